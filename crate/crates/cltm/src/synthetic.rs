//! Ground-truth models, exact enumeration oracles, and synthetic datasets.
//!
//! Everything here is deliberately brute force: enumeration over all `2^m`
//! configurations (guarded at 20 nodes) provides exact marginals, partition
//! values, joints and distances that the fast implementations are tested
//! against. The generator draws features from well-separated Gaussian
//! clusters and labels from a per-cluster tree CRF, which is the regime
//! where kernel ridge regression provably localizes to clusters.

use crate::crf::{Assignment, InferenceResult, Potentials};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::kernel::{pairwise_distance, ConditionalJoint, DistanceLimits, DistanceMatrix};
use crate::seed;
use crate::tree::LatentTree;
use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Enumeration above this many nodes is refused.
pub const ENUMERATION_GUARD: usize = 20;

/// A known conditional latent tree model: per feature cluster, one full set
/// of node and edge potentials; features are the cluster center plus
/// isotropic Gaussian noise.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruthModel {
    pub tree: LatentTree,
    pub clusters: Vec<ClusterPotentials>,
    pub centers: Vec<Vec<f64>>,
    pub noise: f64,
}

/// Potentials of one cluster, aligned with tree nodes / edges.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterPotentials {
    pub node: Vec<f64>,
    pub edge: Vec<f64>,
}

impl ClusterPotentials {
    pub fn potentials(&self) -> Potentials {
        Potentials {
            node: self.node.clone(),
            edge: self.edge.clone(),
        }
    }
}

/// A generated dataset plus the ground truth that produced it.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub dataset: LabeledDataset,
    /// Latent node values per sample, aligned with the tree's latent indices.
    pub hidden: Vec<Vec<bool>>,
    /// Cluster (scene) id per sample.
    pub cluster: Vec<usize>,
}

impl GroundTruthModel {
    pub fn new(
        tree: LatentTree,
        clusters: Vec<ClusterPotentials>,
        centers: Vec<Vec<f64>>,
        noise: f64,
    ) -> Result<Self> {
        if clusters.is_empty() || clusters.len() != centers.len() {
            return Err(Error::InvalidInput(
                "need one center per cluster potential set".into(),
            ));
        }
        if !(noise > 0.0) {
            return Err(Error::InvalidInput("noise scale must be positive".into()));
        }
        for c in &clusters {
            if c.node.len() != tree.node_count() || c.edge.len() != tree.edges().len() {
                return Err(Error::InvalidInput("cluster potentials shape mismatch".into()));
            }
        }
        let d = centers[0].len();
        for c in &centers {
            if c.len() != d {
                return Err(Error::InvalidInput("ragged cluster centers".into()));
            }
        }
        for i in 0..centers.len() {
            for j in (i + 1)..centers.len() {
                let dist: f64 = centers[i]
                    .iter()
                    .zip(&centers[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                if dist < 6.0 * noise {
                    return Err(Error::InvalidInput(format!(
                        "cluster centers {i} and {j} separated by {dist:.4} < 6 * noise"
                    )));
                }
            }
        }
        Ok(GroundTruthModel {
            tree,
            clusters,
            centers,
            noise,
        })
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }

    pub fn dims(&self) -> usize {
        self.centers[0].len()
    }

    /// Identical potentials in every cluster: all edges set to `coupling`
    /// and every node balanced at `-deg * coupling / 2`, which makes every
    /// node marginal exactly 0.5 while edges carry all the correlation.
    pub fn balanced(
        tree: LatentTree,
        coupling: f64,
        centers: Vec<Vec<f64>>,
        noise: f64,
    ) -> Result<Self> {
        let pots = balanced_potentials(&tree, coupling);
        let clusters = vec![pots; centers.len()];
        GroundTruthModel::new(tree, clusters, centers, noise)
    }
}

/// Edge potentials all equal to `coupling`, node potentials balancing them.
pub fn balanced_potentials(tree: &LatentTree, coupling: f64) -> ClusterPotentials {
    let mut node = vec![0.0; tree.node_count()];
    for &(a, b) in tree.edges() {
        node[a] -= coupling / 2.0;
        node[b] -= coupling / 2.0;
    }
    ClusterPotentials {
        node,
        edge: vec![coupling; tree.edges().len()],
    }
}

/// Two latent hubs joined by an edge, each with `per_hub` observed leaves.
pub fn two_star_tree(per_hub: usize) -> LatentTree {
    let l = 2 * per_hub;
    let h1 = l;
    let h2 = l + 1;
    let mut edges = Vec::new();
    for i in 0..per_hub {
        edges.push((i, h1));
    }
    for i in per_hub..l {
        edges.push((i, h2));
    }
    edges.push((h1, h2));
    LatentTree::with_auto_names(l, 2, edges).expect("two-star tree is valid")
}

/// One latent hub with `leaves` observed leaves.
pub fn star_tree(leaves: usize) -> LatentTree {
    let edges = (0..leaves).map(|i| (i, leaves)).collect();
    LatentTree::with_auto_names(leaves, 1, edges).expect("star tree is valid")
}

/// A path of observed nodes, no latent nodes.
pub fn path_tree(nodes: usize) -> LatentTree {
    let edges = (1..nodes).map(|i| (i - 1, i)).collect();
    LatentTree::with_auto_names(nodes, 0, edges).expect("path tree is valid")
}

fn check_guard(nodes: usize) -> Result<()> {
    if nodes > ENUMERATION_GUARD {
        return Err(Error::InvalidInput(format!(
            "enumeration refused for {nodes} nodes (> {ENUMERATION_GUARD})"
        )));
    }
    Ok(())
}

/// Energy of configuration `c` where node `i` is bit `m - 1 - i` of `c`,
/// so configurations enumerate in lexicographic order of `(z_0, .., z_m)`.
fn config_energy(tree: &LatentTree, pots: &Potentials, c: usize) -> f64 {
    let m = tree.node_count();
    let bit = |i: usize| (c >> (m - 1 - i)) & 1 == 1;
    let mut e = 0.0;
    for (k, &phi) in pots.node.iter().enumerate() {
        if bit(k) {
            e += phi;
        }
    }
    for (idx, &(a, b)) in tree.edges().iter().enumerate() {
        if bit(a) && bit(b) {
            e += pots.edge[idx];
        }
    }
    e
}

fn config_consistent(clamp: &Assignment, m: usize, c: usize) -> bool {
    clamp
        .clamped()
        .all(|(i, v)| ((c >> (m - 1 - i)) & 1 == 1) == v)
}

/// Exhaustive enumeration of all configurations consistent with `clamp`:
/// exact marginals, log-partition, and the minimum-energy configuration
/// (ties resolved toward the lexicographically smallest configuration,
/// which also means ties break toward 0).
pub fn brute_force_inference(
    tree: &LatentTree,
    potentials: &Potentials,
    clamp: &Assignment,
) -> Result<InferenceResult> {
    let m = tree.node_count();
    check_guard(m)?;
    if clamp.len() != m {
        return Err(Error::InvalidInput("clamp length mismatch".into()));
    }
    let total = 1usize << m;
    let mut min_energy = f64::INFINITY;
    let mut map_config_bits = None;
    for c in 0..total {
        if !config_consistent(clamp, m, c) {
            continue;
        }
        let e = config_energy(tree, potentials, c);
        if e < min_energy {
            min_energy = e;
            map_config_bits = Some(c);
        }
    }
    let map_c = map_config_bits
        .ok_or_else(|| Error::InvalidInput("no configuration consistent with clamp".into()))?;

    let mut z_sum = 0.0;
    let mut node_sums = vec![0.0; m];
    let mut edge_sums = vec![[[0.0f64; 2]; 2]; tree.edges().len()];
    for c in 0..total {
        if !config_consistent(clamp, m, c) {
            continue;
        }
        let w = (-(config_energy(tree, potentials, c) - min_energy)).exp();
        z_sum += w;
        let bit = |i: usize| (c >> (m - 1 - i)) & 1;
        for i in 0..m {
            if bit(i) == 1 {
                node_sums[i] += w;
            }
        }
        for (idx, &(a, b)) in tree.edges().iter().enumerate() {
            edge_sums[idx][bit(a)][bit(b)] += w;
        }
    }

    let log_partition = -min_energy + z_sum.ln();
    let node_marginals: Vec<f64> = node_sums.iter().map(|s| s / z_sum).collect();
    let edge_marginals: Vec<[[f64; 2]; 2]> = edge_sums
        .iter()
        .map(|t| {
            let mut out = [[0.0; 2]; 2];
            for a in 0..2 {
                for b in 0..2 {
                    out[a][b] = t[a][b] / z_sum;
                }
            }
            out
        })
        .collect();

    let bits: Vec<bool> = (0..m).map(|i| (map_c >> (m - 1 - i)) & 1 == 1).collect();
    Ok(InferenceResult {
        node_marginals,
        edge_marginals,
        log_partition,
        map: Assignment::from_values(bits),
    })
}

/// Exact conditional joint of `(z_k, z_t)` under one cluster's potentials.
pub fn exact_pairwise_joint(
    model: &GroundTruthModel,
    cluster: usize,
    k: usize,
    t: usize,
) -> Result<ConditionalJoint> {
    let m = model.tree.node_count();
    check_guard(m)?;
    if cluster >= model.clusters.len() {
        return Err(Error::InvalidInput("cluster index out of range".into()));
    }
    if k >= m || t >= m {
        return Err(Error::InvalidInput("node index out of range".into()));
    }
    let pots = model.clusters[cluster].potentials();
    let total = 1usize << m;
    let mut min_energy = f64::INFINITY;
    for c in 0..total {
        min_energy = min_energy.min(config_energy(&model.tree, &pots, c));
    }
    let mut table = [[0.0f64; 2]; 2];
    let mut z_sum = 0.0;
    for c in 0..total {
        let w = (-(config_energy(&model.tree, &pots, c) - min_energy)).exp();
        z_sum += w;
        let bit = |i: usize| (c >> (m - 1 - i)) & 1;
        table[bit(k)][bit(t)] += w;
    }
    for row in &mut table {
        for cell in row.iter_mut() {
            *cell /= z_sum;
        }
    }
    Ok(ConditionalJoint::from_table(table))
}

/// Exact information-distance matrix over the observed labels of one
/// cluster, produced by applying the distance formula to enumeration joints.
pub fn exact_distance_matrix(
    model: &GroundTruthModel,
    cluster: usize,
    limits: &DistanceLimits,
) -> Result<DistanceMatrix> {
    let l = model.tree.observed_count();
    let mut entries = DMatrix::zeros(l, l);
    let mut marginals = Vec::with_capacity(l);
    for k in 0..l {
        marginals.push(exact_pairwise_joint(model, cluster, k, k)?);
    }
    for k in 0..l {
        for t in (k + 1)..l {
            let joint = exact_pairwise_joint(model, cluster, k, t)?;
            let d = pairwise_distance(&joint, &marginals[k], &marginals[t], limits)?;
            entries[(k, t)] = d;
            entries[(t, k)] = d;
        }
    }
    DistanceMatrix::from_entries(entries, limits.clamp_ceiling)
}

/// Exact path-length distance matrix of a tree with unit edge lengths,
/// restricted to observed nodes. This is the analytic input for structure
/// recovery tests.
pub fn unit_path_distances(tree: &LatentTree, ceiling: f64) -> Result<DistanceMatrix> {
    let l = tree.observed_count();
    let adj = tree.adjacency();
    let mut entries = DMatrix::zeros(l, l);
    for start in 0..l {
        // BFS over the whole tree, record distances to observed nodes.
        let mut dist = vec![usize::MAX; tree.node_count()];
        dist[start] = 0;
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &u in &adj[v] {
                if dist[u] == usize::MAX {
                    dist[u] = dist[v] + 1;
                    queue.push_back(u);
                }
            }
        }
        for t in 0..l {
            entries[(start, t)] = dist[t] as f64;
        }
    }
    DistanceMatrix::from_entries(entries, ceiling)
}

/// Draw `n` samples: cluster uniform, features Gaussian around the center,
/// configuration drawn exactly from the cluster's tree CRF by sequential
/// clamped-marginal sampling (node 0 from its marginal, clamp, node 1 from
/// its conditional marginal, and so on).
pub fn sample_dataset(model: &GroundTruthModel, n: usize, seed_value: u64) -> Result<SyntheticDataset> {
    let m = model.tree.node_count();
    check_guard(m)?;
    if n == 0 {
        return Err(Error::InvalidInput("need n >= 1".into()));
    }
    let total = 1usize << m;

    // Per cluster: probabilities over configurations in lexicographic order,
    // plus prefix sums. Fixing a prefix (z_0 .. z_i) selects a contiguous
    // block, so each sequential conditional marginal is two range sums.
    let mut prefix_sums = Vec::with_capacity(model.clusters.len());
    for cluster in &model.clusters {
        let pots = cluster.potentials();
        let mut min_energy = f64::INFINITY;
        for c in 0..total {
            min_energy = min_energy.min(config_energy(&model.tree, &pots, c));
        }
        let mut prefix = Vec::with_capacity(total + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for c in 0..total {
            acc += (-(config_energy(&model.tree, &pots, c) - min_energy)).exp();
            prefix.push(acc);
        }
        prefix_sums.push(prefix);
    }

    let mut rng = seed::rng(seed_value);
    let l = model.tree.observed_count();
    let d = model.dims();
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut hidden = Vec::with_capacity(n);
    let mut cluster_ids = Vec::with_capacity(n);
    for _ in 0..n {
        let cluster = rng.random_range(0..model.clusters.len());
        let mut x = Vec::with_capacity(d);
        for dim in 0..d {
            let z: f64 = standard_normal(&mut rng);
            x.push(model.centers[cluster][dim] + model.noise * z);
        }
        let prefix = &prefix_sums[cluster];
        let mut lo = 0usize;
        let mut hi = total;
        let mut bits = Vec::with_capacity(m);
        for _ in 0..m {
            let mid = lo + (hi - lo) / 2;
            let mass0 = prefix[mid] - prefix[lo];
            let mass1 = prefix[hi] - prefix[mid];
            let p1 = mass1 / (mass0 + mass1);
            let u: f64 = rng.random();
            let bit = u < p1;
            bits.push(bit);
            if bit {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        features.push(x);
        labels.push(bits[..l].to_vec());
        hidden.push(bits[l..].to_vec());
        cluster_ids.push(cluster);
    }

    let dataset = LabeledDataset {
        features,
        labels,
        label_names: model.tree.observed_names().to_vec(),
        scenes: Some(cluster_ids.clone()),
        train_indices: None,
        val_indices: None,
    };
    Ok(SyntheticDataset {
        dataset,
        hidden,
        cluster: cluster_ids,
    })
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller; cheap and avoids another dependency.
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Tree topology for generated models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeShape {
    /// Two latent hubs joined by an edge, observed leaves split evenly.
    TwoStar,
    /// One latent hub with all observed nodes as leaves.
    Star,
    /// A path of observed nodes, no latent nodes.
    Path,
}

/// How cluster potentials vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialStyle {
    /// Identical balanced potentials everywhere; labels carry no cluster
    /// signal (structure-recovery regime).
    Balanced,
    /// Each cluster strongly activates one block of labels (scene regime).
    Blocks,
    /// Hub edges alternate attraction/repulsion and clusters tilt the node
    /// potentials, leaving several marginals just under one half.
    AntiPairs,
}

/// Declarative description of a ground-truth model, as accepted by the
/// command-line `synth` stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub shape: TreeShape,
    pub observed: usize,
    pub clusters: usize,
    pub dims: usize,
    pub noise: f64,
    pub separation: f64,
    pub coupling: f64,
    pub bias: f64,
    pub style: PotentialStyle,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            shape: TreeShape::TwoStar,
            observed: 8,
            clusters: 3,
            dims: 3,
            noise: 0.05,
            separation: 1.0,
            coupling: -1.5,
            bias: 1.0,
            style: PotentialStyle::Blocks,
        }
    }
}

/// Deterministic, well-separated cluster centers: scaled coordinate axes,
/// with farther multiples once the axes run out.
pub fn cluster_centers(clusters: usize, dims: usize, separation: f64) -> Vec<Vec<f64>> {
    (0..clusters)
        .map(|c| {
            let mut v = vec![0.0; dims];
            v[c % dims] = separation * (1.0 + (c / dims) as f64);
            v
        })
        .collect()
}

/// Build the ground-truth model described by `spec`.
pub fn build_ground_truth(spec: &SynthSpec) -> Result<GroundTruthModel> {
    if spec.observed < 2 {
        return Err(Error::InvalidInput("need at least 2 observed labels".into()));
    }
    if spec.dims == 0 || spec.clusters == 0 {
        return Err(Error::InvalidInput("dims and clusters must be positive".into()));
    }
    let tree = match spec.shape {
        TreeShape::TwoStar => {
            if spec.observed % 2 != 0 {
                return Err(Error::InvalidInput("two_star needs an even label count".into()));
            }
            two_star_tree(spec.observed / 2)
        }
        TreeShape::Star => star_tree(spec.observed),
        TreeShape::Path => path_tree(spec.observed),
    };
    let l = tree.observed_count();
    let h = tree.latent_count();

    let base = match spec.style {
        PotentialStyle::AntiPairs => {
            // Alternate the sign of observed-to-hub couplings; keep
            // latent-latent edges attractive. Node potentials balance the
            // incident couplings so unbiased marginals sit at one half.
            let mag = spec.coupling.abs();
            let edge: Vec<f64> = tree
                .edges()
                .iter()
                .map(|&(a, b)| {
                    let leaf = a.min(b);
                    if tree.is_latent(a) && tree.is_latent(b) {
                        -mag
                    } else if leaf % 2 == 0 {
                        -mag
                    } else {
                        mag
                    }
                })
                .collect();
            let mut node = vec![0.0; tree.node_count()];
            for (&(a, b), &w) in tree.edges().iter().zip(&edge) {
                node[a] -= w / 2.0;
                node[b] -= w / 2.0;
            }
            ClusterPotentials { node, edge }
        }
        _ => balanced_potentials(&tree, spec.coupling),
    };

    let clusters: Vec<ClusterPotentials> = (0..spec.clusters)
        .map(|c| {
            let mut pots = base.clone();
            match spec.style {
                PotentialStyle::Balanced => {}
                PotentialStyle::Blocks => {
                    // Cluster c switches one block of labels on, the rest
                    // off. Blocks follow the latent hubs when there are any,
                    // otherwise labels are striped.
                    let block_count = if h > 0 { h } else { spec.clusters.min(l) };
                    let active = c % block_count;
                    let adjacency = tree.adjacency();
                    for k in 0..l {
                        let block = adjacency[k]
                            .iter()
                            .copied()
                            .find(|&u| tree.is_latent(u))
                            .map_or(k % block_count, |u| u - l);
                        if block == active {
                            pots.node[k] -= spec.bias;
                        } else {
                            pots.node[k] += spec.bias;
                        }
                    }
                }
                PotentialStyle::AntiPairs => {
                    for k in 0..l {
                        let sign = if (k + c) % 3 == 0 { -1.0 } else { 1.0 };
                        pots.node[k] += sign * spec.bias;
                    }
                }
            }
            pots
        })
        .collect();

    GroundTruthModel::new(
        tree,
        clusters,
        cluster_centers(spec.clusters, spec.dims, spec.separation),
        spec.noise,
    )
}

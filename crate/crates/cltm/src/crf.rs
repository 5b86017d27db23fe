//! Exact inference on a tree-structured CRF over binary variables.
//!
//! The model scores a full configuration `z` of the tree by the energy
//!
//! ```text
//! E(z) = sum_k phi_k * z_k  +  sum_{(k,t) in edges} phi_kt * z_k * z_t
//! ```
//!
//! and defines `P(z) ∝ exp(-E(z))`. States are `{0, 1}`, so an edge term only
//! contributes when both endpoints are 1. All passes run in log space with
//! per-message max normalization so potentials of magnitude several hundred
//! stay finite.

use crate::error::{Error, Result};
use crate::tree::LatentTree;

/// Per-input node potentials plus input-independent edge potentials.
///
/// `node[k]` is aligned with tree node indices; `edge[e]` with
/// [`LatentTree::edges`].
#[derive(Debug, Clone, PartialEq)]
pub struct Potentials {
    pub node: Vec<f64>,
    pub edge: Vec<f64>,
}

impl Potentials {
    pub fn zeros(tree: &LatentTree) -> Self {
        Potentials {
            node: vec![0.0; tree.node_count()],
            edge: vec![0.0; tree.edges().len()],
        }
    }

    fn validate(&self, tree: &LatentTree) -> Result<()> {
        if self.node.len() != tree.node_count() || self.edge.len() != tree.edges().len() {
            return Err(Error::InvalidInput(format!(
                "potentials shaped ({}, {}) do not match tree ({}, {})",
                self.node.len(),
                self.edge.len(),
                tree.node_count(),
                tree.edges().len()
            )));
        }
        if self.node.iter().chain(self.edge.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite potential".into()));
        }
        Ok(())
    }
}

/// A (possibly partial) configuration of the tree nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    values: Vec<Option<bool>>,
}

impl Assignment {
    /// All nodes unset.
    pub fn unset(node_count: usize) -> Self {
        Assignment {
            values: vec![None; node_count],
        }
    }

    /// Fully assigned configuration.
    pub fn from_values(values: Vec<bool>) -> Self {
        Assignment {
            values: values.into_iter().map(Some).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn set(&mut self, node: usize, value: bool) {
        self.values[node] = Some(value);
    }

    pub fn get(&self, node: usize) -> Option<bool> {
        self.values[node]
    }

    pub fn is_complete(&self) -> bool {
        self.values.iter().all(|v| v.is_some())
    }

    /// The full bit vector; errors when any node is unset.
    pub fn bits(&self) -> Result<Vec<bool>> {
        self.values
            .iter()
            .map(|v| v.ok_or_else(|| Error::InvalidInput("partial assignment".into())))
            .collect()
    }

    /// Indices of set nodes with their values.
    pub fn clamped(&self) -> impl Iterator<Item = (usize, bool)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|b| (i, b)))
    }
}

/// Everything exact inference produces for one input: node marginals
/// `P(z_k = 1)`, per-edge pairwise tables indexed `[z_a][z_b]` with `(a, b)`
/// the sorted edge pair, the log-partition value and the MAP configuration.
#[derive(Debug, Clone)]
pub struct InferenceResult {
    pub node_marginals: Vec<f64>,
    pub edge_marginals: Vec<[[f64; 2]; 2]>,
    pub log_partition: f64,
    pub map: Assignment,
}

/// Energy of a fully assigned configuration.
pub fn energy(tree: &LatentTree, potentials: &Potentials, z: &Assignment) -> Result<f64> {
    potentials.validate(tree)?;
    if z.len() != tree.node_count() {
        return Err(Error::InvalidInput("assignment length mismatch".into()));
    }
    let bits = z.bits()?;
    let mut e = 0.0;
    for (k, &phi) in potentials.node.iter().enumerate() {
        if bits[k] {
            e += phi;
        }
    }
    for (idx, &(a, b)) in tree.edges().iter().enumerate() {
        if bits[a] && bits[b] {
            e += potentials.edge[idx];
        }
    }
    Ok(e)
}

/// Log of the partition sum over all configurations consistent with `clamp`.
pub fn log_partition(tree: &LatentTree, potentials: &Potentials, clamp: &Assignment) -> Result<f64> {
    let engine = Engine::new(tree, potentials, clamp, 0)?;
    Ok(engine.log_partition())
}

/// Exact sum-product marginals plus log-partition and MAP.
pub fn marginals(tree: &LatentTree, potentials: &Potentials, clamp: &Assignment) -> Result<InferenceResult> {
    marginals_with_root(tree, potentials, clamp, 0)
}

/// Same as [`marginals`] with an explicit message-passing root. Outputs do
/// not depend on the root; the parameter exists so that invariance is
/// testable.
pub fn marginals_with_root(
    tree: &LatentTree,
    potentials: &Potentials,
    clamp: &Assignment,
    root: usize,
) -> Result<InferenceResult> {
    let engine = Engine::new(tree, potentials, clamp, root)?;
    Ok(engine.run())
}

/// Minimum-energy configuration consistent with `clamp`, ties broken toward 0
/// at every backtracking step.
pub fn map_config(tree: &LatentTree, potentials: &Potentials, clamp: &Assignment) -> Result<Assignment> {
    let engine = Engine::new(tree, potentials, clamp, 0)?;
    Ok(engine.map())
}

/// Rank a batch of per-sample potentials by how strongly they activate one
/// latent node, i.e. by descending `-phi_h`. Ties keep sample order.
pub fn latent_activation_scores(
    tree: &LatentTree,
    potentials_batch: &[Potentials],
    latent_node: &str,
) -> Result<Vec<usize>> {
    let node = tree
        .node_index(latent_node)
        .filter(|&k| tree.is_latent(k))
        .ok_or_else(|| Error::InvalidInput(format!("unknown latent node {latent_node:?}")))?;
    for p in potentials_batch {
        p.validate(tree)?;
    }
    let mut order: Vec<usize> = (0..potentials_batch.len()).collect();
    order.sort_by(|&a, &b| {
        let sa = -potentials_batch[a].node[node];
        let sb = -potentials_batch[b].node[node];
        sb.partial_cmp(&sa).unwrap()
    });
    Ok(order)
}

const NEG_INF: f64 = f64::NEG_INFINITY;

fn lse2(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == NEG_INF {
        NEG_INF
    } else {
        m + ((a - m).exp() + (b - m).exp()).ln()
    }
}

/// Rooted view of the tree plus clamp-restricted local factors.
struct Engine<'a> {
    tree: &'a LatentTree,
    potentials: &'a Potentials,
    order: Vec<usize>,          // BFS order from root
    parent: Vec<Option<usize>>, // parent in the rooted tree
    parent_edge: Vec<usize>,    // index into tree.edges() toward the parent
    children: Vec<Vec<usize>>,
    local: Vec<[f64; 2]>, // -phi_k * s, with clamped-out states at -inf
}

impl<'a> Engine<'a> {
    fn new(
        tree: &'a LatentTree,
        potentials: &'a Potentials,
        clamp: &Assignment,
        root: usize,
    ) -> Result<Self> {
        potentials.validate(tree)?;
        let n = tree.node_count();
        if clamp.len() != n {
            return Err(Error::InvalidInput("clamp length mismatch".into()));
        }
        if root >= n {
            return Err(Error::InvalidInput("root out of range".into()));
        }

        let adj = tree.adjacency();
        let mut order = Vec::with_capacity(n);
        let mut parent = vec![None; n];
        let mut parent_edge = vec![usize::MAX; n];
        let mut seen = vec![false; n];
        order.push(root);
        seen[root] = true;
        let mut head = 0;
        while head < order.len() {
            let v = order[head];
            head += 1;
            for &u in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    parent[u] = Some(v);
                    order.push(u);
                }
            }
        }
        let edge_index = |a: usize, b: usize| -> usize {
            let key = if a < b { (a, b) } else { (b, a) };
            tree.edges().binary_search(&key).expect("edge exists")
        };
        for &v in &order {
            if let Some(p) = parent[v] {
                parent_edge[v] = edge_index(v, p);
            }
        }
        let mut children = vec![Vec::new(); n];
        for &v in &order {
            if let Some(p) = parent[v] {
                children[p].push(v);
            }
        }

        let mut local = vec![[0.0; 2]; n];
        for k in 0..n {
            local[k] = [0.0, -potentials.node[k]];
            match clamp.get(k) {
                Some(false) => local[k][1] = NEG_INF,
                Some(true) => local[k][0] = NEG_INF,
                None => {}
            }
        }

        Ok(Engine {
            tree,
            potentials,
            order,
            parent,
            parent_edge,
            children,
            local,
        })
    }

    fn edge_log(&self, edge: usize, s_a: usize, s_b: usize) -> f64 {
        if s_a == 1 && s_b == 1 {
            -self.potentials.edge[edge]
        } else {
            0.0
        }
    }

    /// Upward sum-product pass. Returns per-node subtree beliefs (with
    /// normalized child messages folded in), per-node normalized upward
    /// messages, and the accumulated normalization carry per node.
    fn upward(&self) -> (Vec<[f64; 2]>, Vec<[f64; 2]>, Vec<f64>) {
        let n = self.tree.node_count();
        let mut subtree = self.local.clone();
        let mut msg = vec![[0.0; 2]; n];
        let mut carry = vec![0.0; n];
        for &v in self.order.iter().rev() {
            for &c in &self.children[v] {
                subtree[v][0] += msg[c][0];
                subtree[v][1] += msg[c][1];
            }
            if let Some(_p) = self.parent[v] {
                let e = self.parent_edge[v];
                let mut raw = [NEG_INF; 2];
                for sp in 0..2 {
                    raw[sp] = lse2(
                        subtree[v][0] + self.edge_log(e, 0, sp),
                        subtree[v][1] + self.edge_log(e, 1, sp),
                    );
                }
                let shift = raw[0].max(raw[1]);
                msg[v] = [raw[0] - shift, raw[1] - shift];
                carry[v] = shift + self.children[v].iter().map(|&c| carry[c]).sum::<f64>();
            } else {
                carry[v] = self.children[v].iter().map(|&c| carry[c]).sum::<f64>();
            }
        }
        (subtree, msg, carry)
    }

    fn log_partition(&self) -> f64 {
        let (subtree, _msg, carry) = self.upward();
        let root = self.order[0];
        lse2(subtree[root][0], subtree[root][1]) + carry[root]
    }

    fn run(&self) -> InferenceResult {
        let (subtree, up, carry) = self.upward();
        let root = self.order[0];
        let log_partition = lse2(subtree[root][0], subtree[root][1]) + carry[root];

        // Downward pass: down[v] is the log-message from v's parent side,
        // normalized per message.
        let n = self.tree.node_count();
        let mut down = vec![[0.0; 2]; n];
        // side[v] caches local + down + all child messages (the "context"
        // from everywhere); subtracting one child's message gives that
        // child's context. Message values are plain additive log terms, so
        // the subtraction is exact arithmetic, not log-domain subtraction.
        let mut node_belief = vec![[0.0; 2]; n];
        for &v in &self.order {
            let total = [
                subtree[v][0] + down[v][0],
                subtree[v][1] + down[v][1],
            ];
            node_belief[v] = total;
            for &c in &self.children[v] {
                let e = self.parent_edge[c];
                let ctx = [total[0] - up[c][0], total[1] - up[c][1]];
                let mut raw = [NEG_INF; 2];
                for sc in 0..2 {
                    raw[sc] = lse2(
                        ctx[0] + self.edge_log(e, sc, 0),
                        ctx[1] + self.edge_log(e, sc, 1),
                    );
                }
                let shift = raw[0].max(raw[1]);
                down[c] = [raw[0] - shift, raw[1] - shift];
            }
        }

        let mut node_marginals = vec![0.0; n];
        for v in 0..n {
            let b = node_belief[v];
            let m = b[0].max(b[1]);
            let p0 = (b[0] - m).exp();
            let p1 = (b[1] - m).exp();
            node_marginals[v] = p1 / (p0 + p1);
        }
        // Clamped nodes report exactly their clamped value.
        for v in 0..n {
            if self.local[v][0] == NEG_INF {
                node_marginals[v] = 1.0;
            } else if self.local[v][1] == NEG_INF {
                node_marginals[v] = 0.0;
            }
        }

        let mut edge_marginals = vec![[[0.0; 2]; 2]; self.tree.edges().len()];
        for &v in &self.order {
            if self.parent[v].is_none() {
                continue;
            }
            let p = self.parent[v].unwrap();
            let e = self.parent_edge[v];
            let ctx_p = [
                node_belief[p][0] - up[v][0],
                node_belief[p][1] - up[v][1],
            ];
            let mut logb = [[NEG_INF; 2]; 2];
            let mut mx = NEG_INF;
            for sp in 0..2 {
                for sv in 0..2 {
                    let val = ctx_p[sp] + self.edge_log(e, sp, sv) + subtree[v][sv];
                    logb[sp][sv] = val;
                    mx = mx.max(val);
                }
            }
            let mut table = [[0.0; 2]; 2];
            let mut sum = 0.0;
            for sp in 0..2 {
                for sv in 0..2 {
                    let w = (logb[sp][sv] - mx).exp();
                    table[sp][sv] = w;
                    sum += w;
                }
            }
            for row in &mut table {
                for cell in row.iter_mut() {
                    *cell /= sum;
                }
            }
            // Table rows/cols follow the sorted edge orientation (low, high).
            let (a, _b) = self.tree.edges()[e];
            let oriented = if a == p {
                table
            } else {
                [
                    [table[0][0], table[1][0]],
                    [table[0][1], table[1][1]],
                ]
            };
            edge_marginals[e] = oriented;
        }

        let map = self.map();

        InferenceResult {
            node_marginals,
            edge_marginals,
            log_partition,
            map,
        }
    }

    /// Max-product (min-energy) pass with backtracking; ties prefer state 0.
    fn map(&self) -> Assignment {
        let n = self.tree.node_count();
        let mut best = self.local.clone();
        // choice[v][sp] = best state of v given its parent takes state sp.
        let mut choice = vec![[0usize; 2]; n];
        for &v in self.order.iter().rev() {
            if let Some(_p) = self.parent[v] {
                let e = self.parent_edge[v];
                let mut msg = [NEG_INF; 2];
                for sp in 0..2 {
                    let v0 = best[v][0] + self.edge_log(e, 0, sp);
                    let v1 = best[v][1] + self.edge_log(e, 1, sp);
                    if v1 > v0 {
                        msg[sp] = v1;
                        choice[v][sp] = 1;
                    } else {
                        msg[sp] = v0;
                        choice[v][sp] = 0;
                    }
                }
                let p = self.parent[v].unwrap();
                best[p][0] += msg[0];
                best[p][1] += msg[1];
            }
        }
        let root = self.order[0];
        let mut assignment = Assignment::unset(n);
        let root_state = if best[root][1] > best[root][0] { 1 } else { 0 };
        assignment.set(root, root_state == 1);
        for &v in &self.order {
            if let Some(p) = self.parent[v] {
                let sp = assignment.get(p).unwrap() as usize;
                assignment.set(v, choice[v][sp] == 1);
            }
        }
        assignment
    }
}

//! Multi-label metrics and the unsupervised scene-clustering evaluation.

use crate::error::{Error, Result};
use crate::model::{BaselineModel, CltmModel};
use crate::crf::{self, Assignment};
use crate::seed;
use rand::Rng;
use serde::Serialize;

/// Precision/recall/F per label plus pooled (micro) and averaged (macro)
/// aggregates. Micro is the headline number.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub per_label: Vec<LabelMetrics>,
    pub micro: Prf,
    pub macro_avg: Prf,
}

#[derive(Debug, Clone, Serialize)]
pub struct LabelMetrics {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// True when the label has no positive ground truth, making recall
    /// undefined (reported as 0).
    pub recall_undefined: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f_measure(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Count TP/FP/FN per label and derive precision, recall and F.
pub fn prf(pred: &[Vec<bool>], truth: &[Vec<bool>]) -> Result<MetricsReport> {
    if pred.len() != truth.len() {
        return Err(Error::InvalidInput("prediction/truth row counts differ".into()));
    }
    if pred.is_empty() {
        return Err(Error::InvalidInput("empty evaluation set".into()));
    }
    let l = truth[0].len();
    if pred.iter().any(|r| r.len() != l) || truth.iter().any(|r| r.len() != l) {
        return Err(Error::InvalidInput("ragged label rows".into()));
    }
    let mut per_label = Vec::with_capacity(l);
    let (mut tp_all, mut fp_all, mut fn_all) = (0u64, 0u64, 0u64);
    for k in 0..l {
        let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
        for (p, t) in pred.iter().zip(truth) {
            match (p[k], t[k]) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        per_label.push(LabelMetrics {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1: f_measure(precision, recall),
            recall_undefined: tp + fn_ == 0,
        });
        tp_all += tp;
        fp_all += fp;
        fn_all += fn_;
    }
    let micro_p = ratio(tp_all, tp_all + fp_all);
    let micro_r = ratio(tp_all, tp_all + fn_all);
    let micro = Prf {
        precision: micro_p,
        recall: micro_r,
        f1: f_measure(micro_p, micro_r),
    };
    let lf = l as f64;
    let macro_p = per_label.iter().map(|m| m.precision).sum::<f64>() / lf;
    let macro_r = per_label.iter().map(|m| m.recall).sum::<f64>() / lf;
    let macro_f = per_label.iter().map(|m| m.f1).sum::<f64>() / lf;
    Ok(MetricsReport {
        per_label,
        micro,
        macro_avg: Prf {
            precision: macro_p,
            recall: macro_r,
            f1: macro_f,
        },
    })
}

/// One point of a precision-recall curve.
#[derive(Debug, Clone, Serialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Per-label and pooled precision-recall curves over a threshold grid.
#[derive(Debug, Clone, Serialize)]
pub struct PrCurve {
    pub per_label: Vec<Vec<PrPoint>>,
    pub micro: Vec<PrPoint>,
}

/// Decisions are `score >= threshold` at each grid point.
pub fn pr_curve(scores: &[Vec<f64>], truth: &[Vec<bool>], grid: &[f64]) -> Result<PrCurve> {
    if scores.len() != truth.len() || scores.is_empty() {
        return Err(Error::InvalidInput("scores/truth shape mismatch".into()));
    }
    let l = truth[0].len();
    if scores.iter().any(|r| r.len() != l) {
        return Err(Error::InvalidInput("scores/truth shape mismatch".into()));
    }
    if grid.is_empty()
        || grid.windows(2).any(|w| w[0] >= w[1])
        || grid.iter().any(|&t| !(0.0..=1.0).contains(&t))
    {
        return Err(Error::InvalidInput(
            "threshold grid must be strictly increasing within [0, 1]".into(),
        ));
    }
    let mut per_label: Vec<Vec<PrPoint>> = vec![Vec::with_capacity(grid.len()); l];
    let mut micro = Vec::with_capacity(grid.len());
    for &threshold in grid {
        let (mut tp_all, mut fp_all, mut fn_all) = (0u64, 0u64, 0u64);
        for k in 0..l {
            let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
            for (s, t) in scores.iter().zip(truth) {
                match (s[k] >= threshold, t[k]) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                    (false, false) => {}
                }
            }
            let p = ratio(tp, tp + fp);
            let r = ratio(tp, tp + fn_);
            per_label[k].push(PrPoint {
                threshold,
                precision: p,
                recall: r,
            });
            tp_all += tp;
            fp_all += fp;
            fn_all += fn_;
        }
        let p = ratio(tp_all, tp_all + fp_all);
        let r = ratio(tp_all, tp_all + fn_all);
        micro.push(PrPoint {
            threshold,
            precision: p,
            recall: r,
        });
    }
    Ok(PrCurve { per_label, micro })
}

/// The default threshold grid: 101 points from 0.00 to 1.00.
pub fn default_grid(points: usize) -> Vec<f64> {
    let steps = points.max(2) - 1;
    (0..=steps).map(|i| i as f64 / steps as f64).collect()
}

/// k-means clustering result.
#[derive(Debug, Clone)]
pub struct KmeansResult {
    pub assignment: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
    pub inertia: f64,
}

const LLOYD_MAX_ITERS: usize = 300;

/// Seeded k-means: careful (farthest-point-weighted) initialization, Lloyd
/// iterations to an assignment fixpoint, best of `restarts` runs by inertia.
pub fn kmeans(vectors: &[Vec<f64>], k: usize, restarts: usize, seed_value: u64) -> Result<KmeansResult> {
    let n = vectors.len();
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!("k = {k} must be in 1..={n}")));
    }
    let d = vectors[0].len();
    if vectors.iter().any(|v| v.len() != d) {
        return Err(Error::InvalidInput("ragged vectors".into()));
    }
    let mut best: Option<KmeansResult> = None;
    for restart in 0..restarts.max(1) {
        let mut rng = seed::rng(seed::stage_seed(seed_value, &format!("kmeans-{restart}")));
        let run = lloyd(vectors, k, &mut rng);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.unwrap())
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn lloyd<R: Rng>(vectors: &[Vec<f64>], k: usize, rng: &mut R) -> KmeansResult {
    let n = vectors.len();
    // Careful seeding: first center uniform, then sample proportional to
    // squared distance from the nearest chosen center.
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    centers.push(vectors[rng.random_range(0..n)].clone());
    let mut d2: Vec<f64> = vectors.iter().map(|v| sq_dist(v, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                target -= w;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.push(vectors[next].clone());
        for (i, v) in vectors.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(v, centers.last().unwrap()));
        }
    }

    let mut assignment = vec![0usize; n];
    for _ in 0..LLOYD_MAX_ITERS {
        let mut changed = false;
        for (i, v) in vectors.iter().enumerate() {
            let mut best_c = 0;
            let mut best_d = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let dist = sq_dist(v, center);
                if dist < best_d {
                    best_d = dist;
                    best_c = c;
                }
            }
            if assignment[i] != best_c {
                assignment[i] = best_c;
                changed = true;
            }
        }
        // Update step; empty clusters re-seed from the farthest point.
        let d = vectors[0].len();
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (v, &c) in vectors.iter().zip(&assignment) {
            counts[c] += 1;
            for (s, x) in sums[c].iter_mut().zip(v) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let farthest = (0..n)
                    .max_by(|&a, &b| {
                        sq_dist(&vectors[a], &centers[assignment[a]])
                            .total_cmp(&sq_dist(&vectors[b], &centers[assignment[b]]))
                    })
                    .unwrap();
                centers[c] = vectors[farthest].clone();
                changed = true;
            } else {
                for (ci, s) in centers[c].iter_mut().zip(&sums[c]) {
                    *ci = s / counts[c] as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let inertia = vectors
        .iter()
        .zip(&assignment)
        .map(|(v, &c)| sq_dist(v, &centers[c]))
        .sum();
    KmeansResult {
        assignment,
        centers,
        inertia,
    }
}

/// Cluster-to-scene evaluation via exact maximum-weight matching on the
/// contingency table.
#[derive(Debug, Clone, Serialize)]
pub struct ClusterEval {
    /// `matched_scene[c]` is the scene assigned to cluster `c`, if any.
    pub matched_scene: Vec<Option<usize>>,
    pub misclassification: f64,
    /// `contingency[c][s]` counts samples in cluster `c` with scene `s`.
    pub contingency: Vec<Vec<u64>>,
}

/// Match clusters one-to-one to scenes, maximizing the matched sample mass;
/// the misclassification rate is `1 - matched / n`.
pub fn match_clusters(assignment: &[usize], scenes: &[usize], k: usize) -> Result<ClusterEval> {
    if assignment.len() != scenes.len() || assignment.is_empty() {
        return Err(Error::InvalidInput("assignment/scene length mismatch".into()));
    }
    if let Some(&bad) = assignment.iter().find(|&&c| c >= k) {
        return Err(Error::InvalidInput(format!("cluster id {bad} out of range")));
    }
    let s_count = scenes.iter().max().unwrap() + 1;
    let mut contingency = vec![vec![0u64; s_count]; k];
    for (&c, &s) in assignment.iter().zip(scenes) {
        contingency[c][s] += 1;
    }

    // Pad to a square matrix for the assignment solver; padded cells carry
    // zero weight, so they never contribute mass.
    let dim = k.max(s_count);
    let weights = pathfinding::matrix::Matrix::from_fn(dim, dim, |(r, c)| {
        if r < k && c < s_count {
            contingency[r][c] as i64
        } else {
            0
        }
    });
    let (total, cols) = pathfinding::prelude::kuhn_munkres(&weights);
    let matched_scene: Vec<Option<usize>> = (0..k)
        .map(|c| {
            let s = cols[c];
            if s < s_count && contingency[c][s] > 0 {
                Some(s)
            } else {
                None
            }
        })
        .collect();
    let n = assignment.len() as f64;
    Ok(ClusterEval {
        matched_scene,
        misclassification: 1.0 - total as f64 / n,
        contingency,
    })
}

/// Which marginal set to cluster on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneSource {
    /// Latent-node marginals of the tree model.
    Hidden,
    /// Observed plus latent marginals of the tree model.
    ObservedHidden,
}

/// Per-sample vectors of unclamped marginals from the tree model.
pub fn scene_feature_vectors(
    model: &CltmModel,
    features: &[Vec<f64>],
    source: SceneSource,
) -> Result<Vec<Vec<f64>>> {
    let n_nodes = model.tree.node_count();
    let l = model.tree.observed_count();
    let mut out = Vec::with_capacity(features.len());
    for x in features {
        let pots = model.potentials_for(x)?;
        let r = crf::marginals(&model.tree, &pots, &Assignment::unset(n_nodes))?;
        let v = match source {
            SceneSource::Hidden => r.node_marginals[l..].to_vec(),
            SceneSource::ObservedHidden => r.node_marginals.clone(),
        };
        out.push(v);
    }
    Ok(out)
}

/// Per-sample probability vectors from the independent baseline.
pub fn baseline_probability_vectors(
    model: &BaselineModel,
    features: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    features.iter().map(|x| model.probabilities(x)).collect()
}

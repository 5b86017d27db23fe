//! Conditional pairwise label distances via kernel embeddings.
//!
//! For a query feature vector `x_i`, the conditional joint of two binary
//! labels is estimated by kernel ridge regression on the training set: solve
//! `(K + lambda*n*I) G = K(:, i)`, then form the weighted 2x2 indicator table
//! `sum_n G[n] psi(y_k^n) psi(y_t^n)^T` with `psi(0) = (1,0)`, `psi(1) =
//! (0,1)`. The per-query information distance between labels `k` and `t` is
//!
//! ```text
//! d^i_{kt} = -log( |det J_{kt}| / sqrt(|det J_{kk}| * |det J_{tt}|) )
//! ```
//!
//! and the distance matrix averages `d^i` over query points. Determinants are
//! floored and distances capped so the matrix stays finite for spanning-tree
//! computation while preserving ordering.

use crate::error::{Error, Result};
use crate::seed;
use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use std::path::Path;

/// Pairwise RBF kernel evaluations over the training features.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    entries: DMatrix<f64>,
    gamma: f64,
}

impl GramMatrix {
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Gram matrix `K[i][j] = exp(-gamma * ||x_i - x_j||^2)`.
pub fn rbf_gram(features: &[Vec<f64>], gamma: f64) -> Result<GramMatrix> {
    let n = features.len();
    if n == 0 || features[0].is_empty() {
        return Err(Error::InvalidInput("rbf_gram needs n >= 1 and d >= 1".into()));
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidInput(format!("gamma must be positive, got {gamma}")));
    }
    let d = features[0].len();
    for (i, row) in features.iter().enumerate() {
        if row.len() != d {
            return Err(Error::InvalidInput(format!("feature row {i} has wrong dimension")));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite feature value in row {i}")));
        }
    }
    let mut entries = DMatrix::zeros(n, n);
    for i in 0..n {
        entries[(i, i)] = 1.0;
        for j in (i + 1)..n {
            let v = (-gamma * squared_distance(&features[i], &features[j])).exp();
            entries[(i, j)] = v;
            entries[(j, i)] = v;
        }
    }
    Ok(GramMatrix { entries, gamma })
}

/// Bandwidth from the median heuristic: `1 / median(||x_i - x_j||^2)` over
/// at most `MEDIAN_MAX_PAIRS` pairs, excluding zero-distance pairs. Errors
/// when every pair is at distance zero.
pub fn median_bandwidth(features: &[Vec<f64>], seed_value: u64) -> Result<f64> {
    const MEDIAN_MAX_PAIRS: usize = 2000;
    let n = features.len();
    if n < 2 {
        return Err(Error::InvalidInput("median heuristic needs n >= 2".into()));
    }
    let total_pairs = n * (n - 1) / 2;
    let mut dists: Vec<f64> = if total_pairs <= MEDIAN_MAX_PAIRS {
        let mut v = Vec::with_capacity(total_pairs);
        for i in 0..n {
            for j in (i + 1)..n {
                v.push(squared_distance(&features[i], &features[j]));
            }
        }
        v
    } else {
        let mut rng = seed::rng(seed_value);
        (0..MEDIAN_MAX_PAIRS)
            .map(|_| {
                let i = rng.random_range(0..n);
                let mut j = rng.random_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                squared_distance(&features[i], &features[j])
            })
            .collect()
    };
    dists.retain(|&d| d > 0.0);
    if dists.is_empty() {
        // The subsample may have hit duplicates only; rescan exhaustively
        // before declaring the feature set degenerate.
        let mut any = Vec::new();
        'outer: for i in 0..n {
            for j in (i + 1)..n {
                let d = squared_distance(&features[i], &features[j]);
                if d > 0.0 {
                    any.push(d);
                    if any.len() >= MEDIAN_MAX_PAIRS {
                        break 'outer;
                    }
                }
            }
        }
        if any.is_empty() {
            return Err(Error::DegenerateFeatures(
                "all points identical; median heuristic undefined".into(),
            ));
        }
        dists = any;
    }
    dists.sort_by(|a, b| a.total_cmp(b));
    let m = dists.len();
    let median = if m % 2 == 1 {
        dists[m / 2]
    } else {
        0.5 * (dists[m / 2 - 1] + dists[m / 2])
    };
    Ok(1.0 / median)
}

fn effective_lambda(lambda: f64, n: usize, scale_by_n: bool) -> f64 {
    if scale_by_n {
        lambda * n as f64
    } else {
        lambda
    }
}

fn cholesky_regularized(gram: &GramMatrix, mu: f64) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let n = gram.n();
    let mut reg = gram.entries.clone();
    for i in 0..n {
        reg[(i, i)] += mu;
    }
    reg.cholesky().ok_or_else(|| {
        Error::Numerical(format!(
            "Cholesky failed for K + {mu} I (n = {n}); condition estimate >= {:.3e}",
            (1.0 + mu) / mu.max(f64::MIN_POSITIVE)
        ))
    })
}

/// Kernel ridge regression weights for one query point: solves
/// `(K + lambda*n*I) G = K(:, query)` (or `(K + lambda*I)` when
/// `scale_by_n` is off). `lambda = 0` is accepted only when `K` itself is
/// numerically invertible.
pub fn kernel_regression_weights(
    gram: &GramMatrix,
    query: usize,
    lambda: f64,
    scale_by_n: bool,
) -> Result<Vec<f64>> {
    if query >= gram.n() {
        return Err(Error::InvalidInput("query index out of range".into()));
    }
    if lambda < 0.0 {
        return Err(Error::InvalidInput("lambda must be nonnegative".into()));
    }
    let chol = cholesky_regularized(gram, effective_lambda(lambda, gram.n(), scale_by_n))?;
    let rhs = gram.entries.column(query).into_owned();
    let g = chol.solve(&rhs);
    Ok(g.iter().copied().collect())
}

/// Low-rank approximation of [`kernel_regression_weights`] via the Nystrom
/// method with `m` uniformly sampled landmark columns. Exact at `m = n`.
pub fn nystrom_weights(
    features: &[Vec<f64>],
    landmarks: usize,
    gamma: f64,
    lambda: f64,
    scale_by_n: bool,
    query: usize,
    seed_value: u64,
) -> Result<Vec<f64>> {
    let n = features.len();
    if landmarks < 1 {
        return Err(Error::InvalidInput("landmark count must be >= 1".into()));
    }
    if landmarks > n {
        return Err(Error::InvalidInput(format!("landmarks {landmarks} > n {n}")));
    }
    if query >= n {
        return Err(Error::InvalidInput("query index out of range".into()));
    }
    let mu = effective_lambda(lambda, n, scale_by_n);
    if !(mu > 0.0) {
        return Err(Error::InvalidInput("nystrom path requires lambda > 0".into()));
    }
    let mut rng = seed::rng(seed_value);
    let mut chosen: Vec<usize> = sample(&mut rng, n, landmarks).into_iter().collect();
    chosen.sort_unstable();

    let kernel = |i: usize, j: usize| (-gamma * squared_distance(&features[i], &features[j])).exp();
    let c = DMatrix::from_fn(n, landmarks, |i, j| kernel(i, chosen[j]));
    let w = DMatrix::from_fn(landmarks, landmarks, |i, j| kernel(chosen[i], chosen[j]));
    let k_q = nalgebra::DVector::from_fn(n, |i, _| kernel(i, query));

    // Woodbury form of (C W^-1 C^T + mu I)^-1 k_q.
    let inner = &w * mu + c.transpose() * &c;
    let chol = inner.cholesky().ok_or_else(|| {
        Error::Numerical("Cholesky failed in Nystrom inner solve".into())
    })?;
    let x = chol.solve(&(c.transpose() * &k_q));
    let g = (&k_q - &c * x) / mu;
    Ok(g.iter().copied().collect())
}

/// Estimated 2x2 joint probability table of `(Y_k, Y_t)` given one query
/// point, indexed `table[y_k][y_t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalJoint {
    table: [[f64; 2]; 2],
}

impl ConditionalJoint {
    pub fn from_table(table: [[f64; 2]; 2]) -> Self {
        ConditionalJoint { table }
    }

    pub fn table(&self) -> &[[f64; 2]; 2] {
        &self.table
    }

    pub fn det(&self) -> f64 {
        self.table[0][0] * self.table[1][1] - self.table[0][1] * self.table[1][0]
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        self.table[0][1].abs() <= tol && self.table[1][0].abs() <= tol
    }

    /// Transposed table, i.e. the joint of `(Y_t, Y_k)`.
    pub fn transposed(&self) -> Self {
        let t = &self.table;
        ConditionalJoint {
            table: [[t[0][0], t[1][0]], [t[0][1], t[1][1]]],
        }
    }
}

/// Weighted indicator table, entry-clamped to `[0, 1]` and renormalized to
/// sum 1. Raw entries may be negative (kernel regression artifact) before
/// the cleanup. With `k == t` the result is the diagonal conditional
/// marginal table.
pub fn conditional_joint(
    labels: &[Vec<bool>],
    k: usize,
    t: usize,
    weights: &[f64],
) -> Result<ConditionalJoint> {
    if labels.len() != weights.len() {
        return Err(Error::InvalidInput("weights/labels length mismatch".into()));
    }
    if labels.is_empty() {
        return Err(Error::InvalidInput("empty label set".into()));
    }
    let l = labels[0].len();
    if k >= l || t >= l {
        return Err(Error::InvalidInput("label index out of range".into()));
    }
    if weights.iter().all(|&w| w == 0.0) {
        return Err(Error::EmptyConditional("all-zero weight vector".into()));
    }
    let mut raw = [[0.0f64; 2]; 2];
    for (row, &w) in labels.iter().zip(weights) {
        raw[row[k] as usize][row[t] as usize] += w;
    }
    let mut table = [[0.0f64; 2]; 2];
    let mut sum = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            let v = raw[a][b].clamp(0.0, 1.0);
            table[a][b] = v;
            sum += v;
        }
    }
    if !(sum > 0.0) {
        return Err(Error::EmptyConditional(
            "clamped table has no positive mass".into(),
        ));
    }
    for row in &mut table {
        for cell in row.iter_mut() {
            *cell /= sum;
        }
    }
    Ok(ConditionalJoint { table })
}

/// Floors and caps that keep information distances finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceLimits {
    pub det_floor: f64,
    pub clamp_ceiling: f64,
}

impl Default for DistanceLimits {
    fn default() -> Self {
        DistanceLimits {
            det_floor: 1e-12,
            clamp_ceiling: 20.0,
        }
    }
}

/// Information distance `-log(|det J| / sqrt(|det M_k| * |det M_t|))` with
/// the joint determinant floored at `det_floor` and the result capped to
/// `[0, clamp_ceiling]`. A marginal determinant below the floor means the
/// label is conditionally deterministic at this query; that is surfaced as
/// an error so callers can drop the query point.
pub fn pairwise_distance(
    joint: &ConditionalJoint,
    marg_k: &ConditionalJoint,
    marg_t: &ConditionalJoint,
    limits: &DistanceLimits,
) -> Result<f64> {
    if !marg_k.is_diagonal(1e-9) || !marg_t.is_diagonal(1e-9) {
        return Err(Error::InvalidInput("marginal tables must be diagonal".into()));
    }
    let det_k = marg_k.det().abs();
    let det_t = marg_t.det().abs();
    if det_k < limits.det_floor || det_t < limits.det_floor {
        return Err(Error::DegenerateMarginal(format!(
            "marginal determinant {:.3e}/{:.3e} below floor {:.1e}",
            det_k, det_t, limits.det_floor
        )));
    }
    let s = joint.det().abs().max(limits.det_floor);
    let d = -(s / (det_k * det_t).sqrt()).ln();
    Ok(d.clamp(0.0, limits.clamp_ceiling))
}

/// Symmetric matrix of conditional information distances between labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    entries: DMatrix<f64>,
    clamp_ceiling: f64,
}

impl DistanceMatrix {
    pub fn from_entries(entries: DMatrix<f64>, clamp_ceiling: f64) -> Result<Self> {
        let m = DistanceMatrix {
            entries,
            clamp_ceiling,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.nrows() == 0
    }

    pub fn get(&self, k: usize, t: usize) -> f64 {
        self.entries[(k, t)]
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn clamp_ceiling(&self) -> f64 {
        self.clamp_ceiling
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.entries.nrows();
        if self.entries.ncols() != n {
            return Err(Error::InvalidInput("distance matrix must be square".into()));
        }
        for i in 0..n {
            if self.entries[(i, i)] != 0.0 {
                return Err(Error::InvalidInput(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let v = self.entries[(i, j)];
                if !v.is_finite() || v < 0.0 || v > self.clamp_ceiling + 1e-12 {
                    return Err(Error::InvalidInput(format!(
                        "distance ({i},{j}) = {v} outside [0, {}]",
                        self.clamp_ceiling
                    )));
                }
                if v != self.entries[(j, i)] {
                    return Err(Error::InvalidInput(format!("asymmetry at ({i},{j})")));
                }
            }
        }
        Ok(())
    }

    /// Headerless CSV of decimal floats, one row per label.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let n = self.len();
        let mut out = String::new();
        for i in 0..n {
            let row: Vec<String> = (0..n).map(|j| format!("{}", self.entries[(i, j)])).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn read_csv(path: &Path, clamp_ceiling: f64) -> Result<Self> {
        let rows = crate::data::read_feature_csv(path, {
            // Peek the first line to learn the width.
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::io(path.display().to_string(), e))?;
            text.lines()
                .next()
                .map(|l| l.split(',').count())
                .ok_or_else(|| Error::Format("empty distance matrix file".into()))?
        })?;
        let n = rows.len();
        let entries = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        DistanceMatrix::from_entries(entries, clamp_ceiling)
    }
}

/// Options for [`cond_distance_matrix`].
#[derive(Debug, Clone)]
pub struct CondDistanceConfig {
    /// RBF bandwidth; `None` means the median heuristic.
    pub gamma: Option<f64>,
    pub lambda: f64,
    pub scale_lambda_by_n: bool,
    /// Number of query points to average over; `None` means `min(n, 1000)`.
    pub query_subsample: Option<usize>,
    /// Nystrom landmark count; `None` means the exact solve.
    pub landmarks: Option<usize>,
    pub limits: DistanceLimits,
    pub seed: u64,
}

impl Default for CondDistanceConfig {
    fn default() -> Self {
        CondDistanceConfig {
            gamma: None,
            lambda: 1e-3,
            scale_lambda_by_n: true,
            query_subsample: None,
            landmarks: None,
            limits: DistanceLimits::default(),
            seed: 0,
        }
    }
}

/// Result of [`cond_distance_matrix`]: the distance matrix over the labels
/// that survived the variability check, plus bookkeeping about what was
/// dropped and skipped.
#[derive(Debug, Clone)]
pub struct CondDistanceOutput {
    pub distances: DistanceMatrix,
    /// Original label indices, in matrix row order.
    pub kept_labels: Vec<usize>,
    /// Labels dropped because they never vary.
    pub dropped_labels: Vec<usize>,
    pub gamma: f64,
    pub query_count: usize,
    /// (pair, queries skipped for that pair) where marginals were degenerate.
    pub skipped: Vec<((usize, usize), usize)>,
}

/// Average per-query information distances over (a subsample of) the
/// training points. Per-query computations run in parallel over immutable
/// inputs; the final average reduces in query-index order, so the result is
/// identical for any thread count.
pub fn cond_distance_matrix(
    features: &[Vec<f64>],
    labels: &[Vec<bool>],
    config: &CondDistanceConfig,
) -> Result<CondDistanceOutput> {
    let n = features.len();
    if labels.len() != n || n == 0 {
        return Err(Error::InvalidInput("features/labels length mismatch".into()));
    }
    let l = labels[0].len();
    if labels.iter().any(|row| row.len() != l) {
        return Err(Error::InvalidInput("ragged label rows".into()));
    }

    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for k in 0..l {
        let ones = labels.iter().filter(|row| row[k]).count();
        if ones == 0 || ones == n {
            dropped.push(k);
        } else {
            kept.push(k);
        }
    }
    if kept.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 varying labels, have {}",
            kept.len()
        )));
    }

    let gamma = match config.gamma {
        Some(g) => g,
        None => median_bandwidth(features, seed::stage_seed(config.seed, "median"))?,
    };

    let queries: Vec<usize> = {
        let target = config.query_subsample.unwrap_or(1000).min(n);
        if target >= n {
            (0..n).collect()
        } else {
            let mut rng = seed::rng(seed::stage_seed(config.seed, "queries"));
            let mut q: Vec<usize> = sample(&mut rng, n, target).into_iter().collect();
            q.sort_unstable();
            q
        }
    };

    enum Solver {
        Exact(GramMatrix, nalgebra::Cholesky<f64, nalgebra::Dyn>),
        Nystrom(usize),
    }
    let solver = match config.landmarks {
        None => {
            let gram = rbf_gram(features, gamma)?;
            let mu = effective_lambda(config.lambda, n, config.scale_lambda_by_n);
            let chol = cholesky_regularized(&gram, mu)?;
            Solver::Exact(gram, chol)
        }
        Some(m) => Solver::Nystrom(m),
    };

    let pair_count = kept.len() * (kept.len() - 1) / 2;
    let per_query: Vec<Result<Vec<Option<f64>>>> = queries
        .par_iter()
        .map(|&q| -> Result<Vec<Option<f64>>> {
            let weights = match &solver {
                Solver::Exact(gram, chol) => {
                    let rhs = gram.entries.column(q).into_owned();
                    chol.solve(&rhs).iter().copied().collect::<Vec<f64>>()
                }
                Solver::Nystrom(m) => nystrom_weights(
                    features,
                    *m,
                    gamma,
                    config.lambda,
                    config.scale_lambda_by_n,
                    q,
                    seed::stage_seed(config.seed, "landmarks"),
                )?,
            };
            let marginals: Vec<Option<ConditionalJoint>> = kept
                .iter()
                .map(|&k| match conditional_joint(labels, k, k, &weights) {
                    Ok(m) if m.det().abs() >= config.limits.det_floor => Some(m),
                    Ok(_) => None,
                    Err(Error::EmptyConditional(_)) => None,
                    Err(_) => None,
                })
                .collect();
            let mut out = vec![None; pair_count];
            let mut idx = 0;
            for a in 0..kept.len() {
                for b in (a + 1)..kept.len() {
                    if let (Some(mk), Some(mt)) = (&marginals[a], &marginals[b]) {
                        if let Ok(joint) = conditional_joint(labels, kept[a], kept[b], &weights) {
                            out[idx] =
                                Some(pairwise_distance(&joint, mk, mt, &config.limits)?);
                        }
                    }
                    idx += 1;
                }
            }
            Ok(out)
        })
        .collect();

    let mut sums = vec![0.0f64; pair_count];
    let mut counts = vec![0usize; pair_count];
    for res in per_query {
        let row = res?;
        for (idx, d) in row.into_iter().enumerate() {
            if let Some(d) = d {
                sums[idx] += d;
                counts[idx] += 1;
            }
        }
    }

    let mut entries = DMatrix::zeros(kept.len(), kept.len());
    let mut skipped = Vec::new();
    let mut idx = 0;
    for a in 0..kept.len() {
        for b in (a + 1)..kept.len() {
            if counts[idx] == 0 {
                return Err(Error::DegenerateMarginal(format!(
                    "all {} queries degenerate for label pair ({}, {})",
                    queries.len(),
                    kept[a],
                    kept[b]
                )));
            }
            if counts[idx] < queries.len() {
                skipped.push(((kept[a], kept[b]), queries.len() - counts[idx]));
            }
            let d = sums[idx] / counts[idx] as f64;
            entries[(a, b)] = d;
            entries[(b, a)] = d;
            idx += 1;
        }
    }

    Ok(CondDistanceOutput {
        distances: DistanceMatrix::from_entries(entries, config.limits.clamp_ceiling)?,
        kept_labels: kept,
        dropped_labels: dropped,
        gamma,
        query_count: queries.len(),
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn f(rows: &[&[f64]]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| r.to_vec()).collect()
    }

    #[test]
    fn gram_diagonal_and_formula() {
        // ||x0 - x1||^2 = 2 with gamma 0.5 gives exp(-1).
        let g = rbf_gram(&f(&[&[0.0, 0.0], &[1.0, 1.0]]), 0.5).unwrap();
        assert_eq!(g.get(0, 0), 1.0);
        assert_eq!(g.get(1, 1), 1.0);
        assert_abs_diff_eq!(g.get(0, 1), (-1.0f64).exp(), epsilon = 1e-12);
        assert_eq!(g.get(0, 1), g.get(1, 0));
    }

    #[test]
    fn gram_rejects_non_finite() {
        assert!(rbf_gram(&f(&[&[0.0], &[f64::NAN]]), 1.0).is_err());
        assert!(rbf_gram(&f(&[&[0.0], &[1.0]]), 0.0).is_err());
    }

    #[test]
    fn gram_invariants_on_random_inputs() {
        let mut rng = seed::rng(11);
        let features: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let g = rbf_gram(&features, 0.7).unwrap();
        for i in 0..40 {
            assert_eq!(g.get(i, i), 1.0);
            for j in 0..40 {
                let v = g.get(i, j);
                assert!(v > 0.0 && v <= 1.0);
                assert_eq!(v, g.get(j, i));
            }
        }
        // PSD within tolerance: smallest eigenvalue of a kernel matrix.
        let eigs = g.entries().clone().symmetric_eigenvalues();
        assert!(eigs.iter().all(|&e| e >= -1e-8), "min eig {:?}", eigs.min());
    }

    #[test]
    fn median_bandwidth_examples() {
        // Single pair with squared distance 4.
        assert_abs_diff_eq!(
            median_bandwidth(&f(&[&[0.0], &[2.0]]), 0).unwrap(),
            0.25,
            epsilon = 1e-12
        );
        // Points {0, 1, 3}: squared distances {1, 9, 4}, median 4.
        assert_abs_diff_eq!(
            median_bandwidth(&f(&[&[0.0], &[1.0], &[3.0]]), 0).unwrap(),
            0.25,
            epsilon = 1e-12
        );
        // Duplicating every point adds only zero-distance pairs, which are
        // excluded, so the estimate is unchanged.
        assert_abs_diff_eq!(
            median_bandwidth(&f(&[&[0.0], &[0.0], &[1.0], &[1.0], &[3.0], &[3.0]]), 0).unwrap(),
            0.25,
            epsilon = 1e-12
        );
        assert!(matches!(
            median_bandwidth(&f(&[&[1.0], &[1.0], &[1.0]]), 0),
            Err(Error::DegenerateFeatures(_))
        ));
    }

    #[test]
    fn regression_weights_scalar_and_identity() {
        let g = rbf_gram(&f(&[&[0.0]]), 1.0).unwrap();
        // n = 1: G = 1 / (1 + mu) with mu = lambda * n = lambda.
        let w = kernel_regression_weights(&g, 0, 0.5, true).unwrap();
        assert_abs_diff_eq!(w[0], 1.0 / 1.5, epsilon = 1e-12);

        // lambda = 0 with invertible K returns the query indicator.
        let g = rbf_gram(&f(&[&[0.0], &[1.0], &[2.5]]), 1.0).unwrap();
        let w = kernel_regression_weights(&g, 1, 0.0, true).unwrap();
        assert_abs_diff_eq!(w[0], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(w[1], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(w[2], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn regression_weights_shrink_with_lambda() {
        let g = rbf_gram(&f(&[&[0.0], &[1.0], &[2.0], &[4.0]]), 0.4).unwrap();
        let norm = |lambda: f64| {
            kernel_regression_weights(&g, 2, lambda, true)
                .unwrap()
                .iter()
                .map(|w| w * w)
                .sum::<f64>()
                .sqrt()
        };
        let norms: Vec<f64> = [1e-3, 1e-1, 1.0, 10.0, 1e3].iter().map(|&l| norm(l)).collect();
        for w in norms.windows(2) {
            assert!(w[1] < w[0], "norm must shrink: {norms:?}");
        }
        assert!(norms[4] < 1e-2);
    }

    #[test]
    fn conditional_joint_examples() {
        let labels: Vec<Vec<bool>> = vec![
            vec![true, true],
            vec![false, true],
            vec![false, false],
        ];
        // Hand summation with weights (0.5, 0.25, 0.25).
        let j = conditional_joint(&labels, 0, 1, &[0.5, 0.25, 0.25]).unwrap();
        assert_eq!(j.table(), &[[0.25, 0.25], [0.0, 0.5]]);

        // Uniform weights give the empirical joint frequency table.
        let j = conditional_joint(&labels, 0, 1, &[1.0 / 3.0; 3]).unwrap();
        assert_abs_diff_eq!(j.table()[0][1], 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(j.table()[1][1], 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(j.table()[0][0], 1.0 / 3.0, epsilon = 1e-12);

        // k = t yields diag(1 - p, p).
        let m = conditional_joint(&labels, 1, 1, &[1.0 / 3.0; 3]).unwrap();
        assert_abs_diff_eq!(m.table()[0][0], 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.table()[1][1], 2.0 / 3.0, epsilon = 1e-12);
        assert_eq!(m.table()[0][1], 0.0);
        assert_eq!(m.table()[1][0], 0.0);

        assert!(matches!(
            conditional_joint(&labels, 0, 1, &[0.0; 3]),
            Err(Error::EmptyConditional(_))
        ));
    }

    #[test]
    fn pairwise_distance_examples() {
        let limits = DistanceLimits::default();
        let diag = |p: f64| ConditionalJoint::from_table([[1.0 - p, 0.0], [0.0, p]]);

        // Perfect correlation with uniform marginals: distance 0.
        let perfect = diag(0.5);
        assert_eq!(
            pairwise_distance(&perfect, &diag(0.5), &diag(0.5), &limits).unwrap(),
            0.0
        );

        // Conditional independence: rank-1 table, distance capped.
        let indep = ConditionalJoint::from_table([[0.25, 0.25], [0.25, 0.25]]);
        assert_eq!(
            pairwise_distance(&indep, &diag(0.5), &diag(0.5), &limits).unwrap(),
            limits.clamp_ceiling
        );

        // det = 0.15 against uniform marginals: -log(0.6).
        let j = ConditionalJoint::from_table([[0.4, 0.1], [0.1, 0.4]]);
        let d = pairwise_distance(&j, &diag(0.5), &diag(0.5), &limits).unwrap();
        assert_abs_diff_eq!(d, -(0.6f64).ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(d, 0.5108, epsilon = 1e-4);

        // Deterministic marginal is surfaced as an error.
        assert!(matches!(
            pairwise_distance(&j, &diag(0.0), &diag(0.5), &limits),
            Err(Error::DegenerateMarginal(_))
        ));
    }

    proptest! {
        #[test]
        fn pairwise_distance_symmetric(
            raw in proptest::collection::vec(0.01f64..1.0, 4),
            pk in 0.1f64..0.9,
            pt in 0.1f64..0.9,
        ) {
            let sum: f64 = raw.iter().sum();
            let j = ConditionalJoint::from_table([
                [raw[0] / sum, raw[1] / sum],
                [raw[2] / sum, raw[3] / sum],
            ]);
            let mk = ConditionalJoint::from_table([[1.0 - pk, 0.0], [0.0, pk]]);
            let mt = ConditionalJoint::from_table([[1.0 - pt, 0.0], [0.0, pt]]);
            let limits = DistanceLimits::default();
            let d1 = pairwise_distance(&j, &mk, &mt, &limits).unwrap();
            let d2 = pairwise_distance(&j.transposed(), &mt, &mk, &limits).unwrap();
            prop_assert!((d1 - d2).abs() < 1e-12);
        }
    }

    #[test]
    fn nystrom_matches_exact_at_full_rank() {
        let mut rng = seed::rng(3);
        let features: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let gamma = 0.8;
        let g = rbf_gram(&features, gamma).unwrap();
        let exact = kernel_regression_weights(&g, 7, 1e-3, true).unwrap();
        let approx_full = nystrom_weights(&features, 50, gamma, 1e-3, true, 7, 5).unwrap();
        for (a, b) in exact.iter().zip(&approx_full) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }

        // Dropping one landmark on a well-conditioned kernel stays close.
        let approx_m = nystrom_weights(&features, 49, gamma, 1e-3, true, 7, 5).unwrap();
        let num: f64 = exact
            .iter()
            .zip(&approx_m)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let den: f64 = exact.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(num / den <= 0.1, "relative error {}", num / den);

        // Heavy regularization drives the weights to zero regardless of m.
        let heavy = nystrom_weights(&features, 10, gamma, 1e3, true, 7, 5).unwrap();
        assert!(heavy.iter().all(|w| w.abs() < 1e-3));

        assert!(nystrom_weights(&features, 0, gamma, 1e-3, true, 7, 5).is_err());
    }

    #[test]
    fn distance_matrix_symmetry_and_duplicated_labels() {
        let mut rng = seed::rng(21);
        let features: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        // Label 0 random, label 1 a duplicate of it, label 2 independent.
        let labels: Vec<Vec<bool>> = (0..30)
            .map(|_| {
                let a = rng.random_bool(0.5);
                let c = rng.random_bool(0.5);
                vec![a, a, c]
            })
            .collect();
        let out = cond_distance_matrix(&features, &labels, &CondDistanceConfig::default()).unwrap();
        let d = &out.distances;
        assert_eq!(out.kept_labels, vec![0, 1, 2]);
        d.validate().unwrap();
        // Duplicated columns are at distance ~0.
        assert!(d.get(0, 1) < 1e-6, "got {}", d.get(0, 1));
        assert!(d.get(0, 2) > d.get(0, 1));
    }

    #[test]
    fn distance_matrix_drops_constant_labels() {
        let features = f(&[&[0.0], &[1.0], &[2.0], &[3.0]]);
        let labels: Vec<Vec<bool>> = vec![
            vec![true, true, false],
            vec![true, false, true],
            vec![true, true, false],
            vec![true, false, true],
        ];
        let out = cond_distance_matrix(&features, &labels, &CondDistanceConfig::default()).unwrap();
        assert_eq!(out.dropped_labels, vec![0]);
        assert_eq!(out.kept_labels, vec![1, 2]);
        assert_eq!(out.distances.len(), 2);
    }

    /// Line-by-line re-implementation of the per-query estimator used as an
    /// independent oracle for the 4-sample toy dataset.
    #[test]
    fn distance_matrix_matches_stepwise_oracle() {
        let features = f(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        let labels: Vec<Vec<bool>> = vec![
            vec![true, false, true],
            vec![false, true, true],
            vec![true, true, false],
            vec![false, false, true],
        ];
        let gamma = 0.5;
        let lambda = 1e-2;
        let config = CondDistanceConfig {
            gamma: Some(gamma),
            lambda,
            query_subsample: Some(4),
            ..CondDistanceConfig::default()
        };
        let out = cond_distance_matrix(&features, &labels, &config).unwrap();

        // Oracle: plain dense solve per query, direct table sums.
        let n = 4;
        let limits = DistanceLimits::default();
        let mut k_mat = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                k_mat[(i, j)] = (-gamma * squared_distance(&features[i], &features[j])).exp();
            }
        }
        let mut reg = k_mat.clone();
        for i in 0..n {
            reg[(i, i)] += lambda * n as f64;
        }
        let inv = reg.try_inverse().unwrap();
        let mut sums = vec![vec![0.0; 3]; 3];
        let mut counts = vec![vec![0usize; 3]; 3];
        for q in 0..n {
            let g = &inv * k_mat.column(q);
            let weights: Vec<f64> = g.iter().copied().collect();
            let table = |k: usize, t: usize| {
                let mut raw = [[0.0f64; 2]; 2];
                for (row, &w) in labels.iter().zip(&weights) {
                    raw[row[k] as usize][row[t] as usize] += w;
                }
                let mut s = 0.0;
                for r in raw.iter_mut() {
                    for c in r.iter_mut() {
                        *c = c.clamp(0.0, 1.0);
                        s += *c;
                    }
                }
                for r in raw.iter_mut() {
                    for c in r.iter_mut() {
                        *c /= s;
                    }
                }
                raw
            };
            let det = |t: [[f64; 2]; 2]| (t[0][0] * t[1][1] - t[0][1] * t[1][0]).abs();
            for k in 0..3 {
                for t in (k + 1)..3 {
                    let skk = det(table(k, k));
                    let stt = det(table(t, t));
                    // A query with a deterministic marginal is dropped for
                    // the pairs it affects.
                    if skk < limits.det_floor || stt < limits.det_floor {
                        continue;
                    }
                    let skt = det(table(k, t)).max(limits.det_floor);
                    let d = (-(skt / (skk * stt).sqrt()).ln()).clamp(0.0, limits.clamp_ceiling);
                    sums[k][t] += d;
                    counts[k][t] += 1;
                }
            }
        }
        for k in 0..3 {
            for t in (k + 1)..3 {
                let expect = sums[k][t] / counts[k][t] as f64;
                assert_abs_diff_eq!(out.distances.get(k, t), expect, epsilon = 1e-10);
            }
        }
    }
}

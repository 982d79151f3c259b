//! Extended BIC scoring, selection over candidate graphs, and the k-fold
//! cross-validation baseline.

use std::cmp::Ordering;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mle::{mle_fit, mle_fit_warm};
use crate::model::{sample_covariance, EdgeSet, PrecisionMatrix};

/// Default γ grid.
pub const GAMMA_GRID: [f64; 3] = [0.0, 0.5, 1.0];
pub const MAX_CV_FOLDS: usize = 100;

/// `−2·loglik + |E|·log n + 4·|E|·γ·log p` (natural logarithms).
///
/// `γ = 0` is the classical BIC.
pub fn ebic_score(loglik: f64, num_edges: usize, n: usize, p: usize, gamma: f64) -> f64 {
    if !(0.0..=1.0).contains(&gamma) {
        log::warn!("gamma = {gamma} lies outside [0, 1]");
    }
    let edges = num_edges as f64;
    -2.0 * loglik + edges * (n as f64).ln() + 4.0 * edges * gamma * (p as f64).ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredModel {
    pub edge_set: EdgeSet,
    pub loglik: f64,
    pub ebic: f64,
    pub gamma: f64,
    pub num_edges: usize,
}

impl ScoredModel {
    pub fn new(edge_set: EdgeSet, loglik: f64, n: usize, gamma: f64) -> Self {
        let num_edges = edge_set.len();
        let ebic = ebic_score(loglik, num_edges, n, edge_set.p(), gamma);
        Self {
            edge_set,
            loglik,
            ebic,
            gamma,
            num_edges,
        }
    }
}

/// Lower score first; ties go to fewer edges, then the lexicographically
/// smaller edge list.
fn preference(a_score: f64, a: &EdgeSet, b_score: f64, b: &EdgeSet) -> Ordering {
    a_score
        .total_cmp(&b_score)
        .then(a.len().cmp(&b.len()))
        .then_with(|| a.cmp(b))
}

/// The candidate with minimal EBIC.
pub fn select_min(candidates: &[ScoredModel]) -> Result<&ScoredModel> {
    candidates
        .iter()
        .min_by(|a, b| preference(a.ebic, &a.edge_set, b.ebic, &b.edge_set))
        .ok_or_else(|| Error::InvalidArgument("no candidate models to select from".into()))
}

/// `γ0 = γ − (1 − 1/(4κ))`; consistency needs it positive.
pub fn gamma0(gamma: f64, kappa: f64) -> Result<f64> {
    if !(kappa > 0.0) {
        return Err(Error::InvalidArgument(format!("kappa must be positive, got {kappa}")));
    }
    Ok(gamma - (1.0 - 1.0 / (4.0 * kappa)))
}

/// Sum over test rows and nodes of squared errors when each node is
/// predicted from the others by its Gaussian conditional mean
/// `x̂_j = −Σ_{k≠j} Θ_jk x_k / Θ_jj`.
pub fn nodewise_predictive_sse(theta: &PrecisionMatrix, test: &DMatrix<f64>) -> f64 {
    if test.nrows() == 0 {
        return 0.0;
    }
    // x_j − x̂_j = (Θx)_j / Θ_jj
    let residuals = test * theta.matrix();
    let diag = theta.matrix().diagonal();
    residuals
        .column_iter()
        .zip(diag.iter())
        .map(|(col, d)| col.iter().map(|r| (r / d).powi(2)).sum::<f64>())
        .sum()
}

/// Rows of each fold: a seeded shuffle cut into `k` contiguous blocks whose
/// sizes differ by at most one.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > n {
        return Err(Error::InvalidArgument(format!(
            "need 2 <= K <= n, got K = {k}, n = {n}"
        )));
    }
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push(rows[start..start + size].to_vec());
        start += size;
    }
    Ok(folds)
}

pub fn default_fold_count(n: usize) -> usize {
    MAX_CV_FOLDS.min(n)
}

#[derive(Debug, Clone)]
pub struct CvSelection {
    pub selected: EdgeSet,
    pub index: usize,
    /// Total held-out squared error per candidate; `+∞` when the candidate
    /// could not be fitted on some fold.
    pub scores: Vec<f64>,
}

/// K-fold cross-validation over `candidates`: each candidate is refit by
/// constrained maximum likelihood on every training split and scored by
/// nodewise prediction error on the held-out rows.
pub fn kfold_cv_select(
    data: &DMatrix<f64>,
    candidates: &[EdgeSet],
    k: usize,
    seed: u64,
) -> Result<CvSelection> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no candidate models to select from".into()));
    }
    let n = data.nrows();
    let folds = fold_assignment(n, k, seed)?;
    let splits: Vec<(crate::model::SampleCov, DMatrix<f64>)> = folds
        .iter()
        .map(|held_out| {
            let mut in_test = vec![false; n];
            for &i in held_out {
                in_test[i] = true;
            }
            let train_rows: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
            let train = data.select_rows(&train_rows);
            let test = data.select_rows(held_out);
            Ok((sample_covariance(&train)?, test))
        })
        .collect::<Result<_>>()?;

    let full = sample_covariance(data)?;
    let scores: Vec<f64> = candidates
        .par_iter()
        .map(|edges| {
            let warm = mle_fit(&full, edges).ok().map(|theta| theta.covariance());
            let mut total = 0.0;
            for (train, test) in &splits {
                let fit = match &warm {
                    Some(w) => mle_fit_warm(train, edges, w),
                    None => mle_fit(train, edges),
                };
                match fit {
                    Ok(theta) => total += nodewise_predictive_sse(&theta, test),
                    Err(e) => {
                        log::warn!("candidate {edges} excluded from cross-validation: {e}");
                        return f64::INFINITY;
                    }
                }
            }
            total
        })
        .collect();

    let index = (0..candidates.len())
        .filter(|&i| scores[i].is_finite())
        .min_by(|&a, &b| preference(scores[a], &candidates[a], scores[b], &candidates[b]))
        .ok_or_else(|| Error::NotEstimable("no candidate could be fitted on every fold".into()))?;
    Ok(CvSelection {
        selected: candidates[index].clone(),
        index,
        scores,
    })
}

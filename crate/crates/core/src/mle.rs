//! Maximum likelihood estimation of a precision matrix restricted to a fixed
//! graph: `Θ̂(E)` is supported on the diagonal and `E`, and its inverse
//! matches `S` on the same positions.

use nalgebra::{DMatrix, Matrix2};

use crate::chordal::{self, CliqueDecomposition};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{log_likelihood, EdgeSet, PrecisionMatrix, SampleCov};

/// Target for `max |(Θ̂⁻¹)_jk − S_jk|` over the diagonal and the edges.
pub const LIKELIHOOD_EQUATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IterativeMethod {
    /// Iterative proportional scaling over the edges: each step matches one
    /// 2×2 marginal of `Θ⁻¹` to `S`.
    EdgeScaling,
    /// Cyclic neighbourhood regressions on `W = Θ⁻¹`, one column at a time.
    NodeRegression,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleOptions {
    pub method: IterativeMethod,
    pub tol: f64,
    pub max_cycles: usize,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            method: IterativeMethod::NodeRegression,
            tol: LIKELIHOOD_EQUATION_TOL,
            max_cycles: 100_000,
        }
    }
}

/// Constrained MLE. Chordal supports use the clique/separator closed form;
/// other supports use the default iterative solver.
pub fn mle_fit(s: &SampleCov, edges: &EdgeSet) -> Result<PrecisionMatrix> {
    check_dims(s, edges)?;
    match chordal::clique_decomposition(edges) {
        Ok(decomposition) => mle_fit_decomposable(s, &decomposition),
        Err(_) => mle_fit_iterative(s, edges, &MleOptions::default()),
    }
}

/// As [`mle_fit`], but a non-chordal support starts node regression from the
/// covariance `warm` (typically `Θ̂⁻¹` fitted on overlapping data). A warm
/// start that is not positive definite or fails to converge is replaced by
/// a cold start.
pub fn mle_fit_warm(s: &SampleCov, edges: &EdgeSet, warm: &DMatrix<f64>) -> Result<PrecisionMatrix> {
    check_dims(s, edges)?;
    if warm.shape() != (s.p(), s.p()) {
        return Err(Error::DimensionMismatch {
            expected: s.p(),
            found: warm.nrows(),
        });
    }
    if let Ok(decomposition) = chordal::clique_decomposition(edges) {
        return mle_fit_decomposable(s, &decomposition);
    }
    let options = MleOptions::default();
    check_iterative_inputs(s, edges)?;
    let mut start = warm.clone();
    start.set_diagonal(&s.matrix().diagonal());
    if linalg::cholesky(&start).is_some() {
        if let Ok(theta) = node_regression(s, edges, &options, Some(start)) {
            return Ok(theta);
        }
    }
    node_regression(s, edges, &options, None)
}

pub fn max_loglik(s: &SampleCov, edges: &EdgeSet) -> Result<f64> {
    log_likelihood(s, &mle_fit(s, edges)?)
}

fn check_dims(s: &SampleCov, edges: &EdgeSet) -> Result<()> {
    if s.p() != edges.p() {
        return Err(Error::DimensionMismatch {
            expected: s.p(),
            found: edges.p(),
        });
    }
    Ok(())
}

fn check_sample_size(s: &SampleCov, max_clique: usize) -> Result<()> {
    if s.n() < max_clique + 1 {
        return Err(Error::NotEstimable(format!(
            "n = {} but the largest clique has {} nodes",
            s.n(),
            max_clique
        )));
    }
    Ok(())
}

fn invert_marginal(s: &SampleCov, indices: &[usize]) -> Result<DMatrix<f64>> {
    linalg::inverse_spd(&linalg::principal_submatrix(s.matrix(), indices)).ok_or_else(|| {
        Error::NotEstimable(format!(
            "sample covariance is singular on nodes {:?}",
            indices.iter().map(|v| v + 1).collect::<Vec<_>>()
        ))
    })
}

/// `Θ̂ = Σ_C [(S_C)⁻¹]⁰ − Σ_Sep [(S_Sep)⁻¹]⁰` with zero-padded embeddings.
pub fn mle_fit_decomposable(
    s: &SampleCov,
    decomposition: &CliqueDecomposition,
) -> Result<PrecisionMatrix> {
    if decomposition.p() != s.p() {
        return Err(Error::DimensionMismatch {
            expected: s.p(),
            found: decomposition.p(),
        });
    }
    check_sample_size(s, decomposition.max_clique_size())?;
    let p = s.p();
    let mut theta = DMatrix::zeros(p, p);
    let mut embed = |indices: &[usize], sign: f64| -> Result<()> {
        if indices.is_empty() {
            return Ok(());
        }
        let inv = invert_marginal(s, indices)?;
        for (a, &j) in indices.iter().enumerate() {
            for (b, &k) in indices.iter().enumerate() {
                theta[(j, k)] += sign * inv[(a, b)];
            }
        }
        Ok(())
    };
    for clique in decomposition.cliques() {
        embed(clique, 1.0)?;
    }
    for separator in decomposition.separators() {
        embed(separator, -1.0)?;
    }
    let edges = decomposition.edge_set();
    finish(theta, &edges)
}

/// Zeroes everything off the support, then validates.
fn finish(mut theta: DMatrix<f64>, edges: &EdgeSet) -> Result<PrecisionMatrix> {
    let p = theta.nrows();
    for j in 0..p {
        for k in 0..p {
            if j != k && !edges.contains(j, k) {
                theta[(j, k)] = 0.0;
            }
        }
    }
    PrecisionMatrix::with_support(theta, edges.clone()).map_err(|e| match e {
        Error::NotPositiveDefinite => {
            Error::NotEstimable("fitted precision matrix is not positive definite".into())
        }
        other => other,
    })
}

/// `max |(Θ⁻¹)_jk − S_jk|` over the diagonal and `edges`.
pub fn likelihood_equation_residual(s: &SampleCov, theta: &PrecisionMatrix, edges: &EdgeSet) -> f64 {
    let w = theta.covariance();
    residual_on_support(s, &w, edges)
}

fn residual_on_support(s: &SampleCov, w: &DMatrix<f64>, edges: &EdgeSet) -> f64 {
    let diag = (0..s.p())
        .map(|j| (w[(j, j)] - s.get(j, j)).abs())
        .fold(0.0, f64::max);
    edges
        .iter()
        .map(|(j, k)| (w[(j, k)] - s.get(j, k)).abs())
        .fold(diag, f64::max)
}

/// Iterative constrained MLE for an arbitrary support.
pub fn mle_fit_iterative(s: &SampleCov, edges: &EdgeSet, options: &MleOptions) -> Result<PrecisionMatrix> {
    check_dims(s, edges)?;
    check_iterative_inputs(s, edges)?;
    match options.method {
        IterativeMethod::EdgeScaling => edge_scaling(s, edges, options),
        IterativeMethod::NodeRegression => node_regression(s, edges, options, None),
    }
}

fn check_iterative_inputs(s: &SampleCov, edges: &EdgeSet) -> Result<()> {
    // no clique exceeds p nodes
    if s.n() <= s.p() {
        check_sample_size(s, chordal::max_clique_size(edges))?;
    }
    if (0..s.p()).any(|j| !(s.get(j, j) > 0.0)) {
        return Err(Error::NotEstimable(
            "sample covariance has a zero diagonal entry".into(),
        ));
    }
    for (j, k) in edges.iter() {
        invert_marginal(s, &[j, k])?;
    }
    Ok(())
}

fn edge_scaling(s: &SampleCov, edges: &EdgeSet, options: &MleOptions) -> Result<PrecisionMatrix> {
    let p = s.p();
    let mut theta = DMatrix::from_diagonal(&s.matrix().diagonal().map(|v| 1.0 / v));
    let mut sigma = DMatrix::from_diagonal(&s.matrix().diagonal());
    let pairs: Vec<(usize, usize)> = edges.iter().collect();
    let mut residual = residual_on_support(s, &sigma, edges);
    for cycle in 1..=options.max_cycles {
        for &(j, k) in &pairs {
            let current = Matrix2::new(sigma[(j, j)], sigma[(j, k)], sigma[(k, j)], sigma[(k, k)]);
            let target = Matrix2::new(s.get(j, j), s.get(j, k), s.get(k, j), s.get(k, k));
            let (Some(current_inv), Some(target_inv)) = (current.try_inverse(), target.try_inverse())
            else {
                return Err(Error::NotEstimable(format!(
                    "singular 2x2 marginal at edge {}-{}",
                    j + 1,
                    k + 1
                )));
            };
            let delta = target_inv - current_inv;
            let idx = [j, k];
            for a in 0..2 {
                for b in 0..2 {
                    theta[(idx[a], idx[b])] += delta[(a, b)];
                }
            }
            // Σ ← Σ − Σ[:,C] A⁻¹ (A − B) A⁻¹ Σ[C,:], A = Σ_CC, B = S_CC
            let core = current_inv * (current - target) * current_inv;
            let left = DMatrix::from_fn(p, 2, |i, a| sigma[(i, idx[a])]);
            let left_core = &left * DMatrix::from_fn(2, 2, |a, b| core[(a, b)]);
            sigma -= &left_core * left.transpose();
        }
        residual = residual_on_support(s, &sigma, edges);
        if residual < options.tol {
            // the running Σ accumulates rounding; confirm against a fresh inverse
            let Some(fresh) = linalg::inverse_spd(&theta) else {
                return Err(Error::NotEstimable("iterate lost positive definiteness".into()));
            };
            sigma = fresh;
            residual = residual_on_support(s, &sigma, edges);
            if residual < options.tol {
                log::trace!("edge scaling converged after {cycle} cycles");
                return finish(linalg::symmetrized(&theta), edges);
            }
        }
    }
    Err(Error::NotConverged {
        solver: "iterative proportional scaling",
        iterations: options.max_cycles,
        residual,
    })
}

fn node_regression(
    s: &SampleCov,
    edges: &EdgeSet,
    options: &MleOptions,
    start: Option<DMatrix<f64>>,
) -> Result<PrecisionMatrix> {
    let p = s.p();
    let neighbors = edges.neighbors();
    let mut w = start.unwrap_or_else(|| s.matrix().clone());
    let mut coefficients: Vec<Vec<f64>> = neighbors.iter().map(|nb| vec![0.0; nb.len()]).collect();
    let mut residual = f64::INFINITY;
    for cycle in 1..=options.max_cycles {
        let mut change = 0.0f64;
        for j in 0..p {
            let nb = &neighbors[j];
            let mut w12 = vec![0.0; p];
            if !nb.is_empty() {
                let w11 = linalg::principal_submatrix(&w, nb);
                let rhs = nalgebra::DVector::from_iterator(nb.len(), nb.iter().map(|&k| s.get(k, j)));
                let beta = linalg::cholesky(&w11)
                    .ok_or_else(|| Error::NotEstimable("neighbourhood block lost positive definiteness".into()))?
                    .solve(&rhs);
                for i in (0..p).filter(|&i| i != j) {
                    w12[i] = nb.iter().zip(beta.iter()).map(|(&k, b)| w[(i, k)] * b).sum();
                }
                coefficients[j] = beta.iter().copied().collect();
            }
            for i in (0..p).filter(|&i| i != j) {
                change = change.max((w[(i, j)] - w12[i]).abs());
                w[(i, j)] = w12[i];
                w[(j, i)] = w12[i];
            }
        }
        if change < options.tol {
            let theta = precision_from_regressions(s, &w, &neighbors, &coefficients);
            match linalg::inverse_spd(&theta) {
                Some(inv) => {
                    residual = residual_on_support(s, &inv, edges);
                    if residual < options.tol {
                        log::trace!("node regression converged after {cycle} cycles");
                        return finish(theta, edges);
                    }
                }
                None if change < options.tol * 1e-3 => {
                    return Err(Error::NotEstimable("fitted precision matrix is not positive definite".into()));
                }
                None => {}
            }
        }
    }
    Err(Error::NotConverged {
        solver: "node regression",
        iterations: options.max_cycles,
        residual,
    })
}

fn precision_from_regressions(
    s: &SampleCov,
    w: &DMatrix<f64>,
    neighbors: &[Vec<usize>],
    coefficients: &[Vec<f64>],
) -> DMatrix<f64> {
    let p = s.p();
    let mut theta = DMatrix::zeros(p, p);
    for j in 0..p {
        let explained: f64 = neighbors[j]
            .iter()
            .zip(&coefficients[j])
            .map(|(&k, b)| w[(k, j)] * b)
            .sum();
        let diag = 1.0 / (s.get(j, j) - explained);
        theta[(j, j)] = diag;
        for (&k, b) in neighbors[j].iter().zip(&coefficients[j]) {
            theta[(k, j)] = -b * diag;
        }
    }
    linalg::symmetrized(&theta)
}

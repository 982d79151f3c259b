//! ℓ1-penalized inverse covariance estimation (graphical lasso) and the
//! log-spaced penalty path used to generate candidate graphs.
//!
//! The solver minimizes
//!
//! ```text
//!     −log det Θ + trace(SΘ) + ρ Σ_{j≠k} |Θ_jk|
//! ```
//!
//! over positive definite `Θ`. Only off-diagonal entries are penalized, so
//! `ρ ≥ max_{j≠k} |S_jk|` yields exactly the diagonal estimate and the path
//! starts from the empty graph.
//!
//! The algorithm is block coordinate descent over the columns of
//! `W = Θ⁻¹`: each column solves a lasso subproblem by cyclic coordinate
//! descent, then `w12 = W11 β`. `Θ` is recovered from the final
//! coefficients, which keeps exact zeros in the estimate.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{EdgeSet, PrecisionMatrix, SampleCov};

pub const DEFAULT_PATH_LENGTH: usize = 100;
/// Ratio between the largest and smallest penalty on the path.
pub const PATH_RANGE: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlassoOptions {
    /// Converged when the mean absolute change of `W` over one sweep falls
    /// below `tol · mean|S_jk|` (off-diagonal).
    pub tol: f64,
    pub max_sweeps: usize,
    /// Coordinate descent on a column stops when no coefficient moves by
    /// more than this (scaled by `mean|S_jk|`).
    pub inner_tol: f64,
    pub max_inner: usize,
    /// Off-diagonal entries with magnitude at or below this are set to zero.
    pub support_tol: f64,
    /// Sweeps continue past `tol` until the KKT residual of the returned
    /// estimate is at most this.
    pub kkt_tol: f64,
    /// Record `log det W` after every sweep.
    pub trace_dual: bool,
}

impl Default for GlassoOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_sweeps: 10_000,
            inner_tol: 1e-12,
            max_inner: 10_000,
            support_tol: 1e-8,
            kkt_tol: 1e-7,
            trace_dual: false,
        }
    }
}

/// Solver state carried between neighbouring penalties on a path.
#[derive(Debug, Clone)]
pub struct WarmStart {
    w: DMatrix<f64>,
    beta: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct GlassoFit {
    pub rho: f64,
    pub estimate: PrecisionMatrix,
    pub sweeps: usize,
    pub kkt_residual: f64,
    /// `log det W` after each sweep, when requested.
    pub dual_trace: Vec<f64>,
    warm: WarmStart,
}

impl GlassoFit {
    pub fn warm_start(&self) -> &WarmStart {
        &self.warm
    }
}

/// Smallest penalty giving the empty graph: `max_{j≠k} |S_jk|`.
pub fn rho_max(s: &SampleCov) -> Result<f64> {
    if s.p() < 2 {
        return Err(Error::InvalidArgument(format!(
            "rho_max needs p >= 2, got {}",
            s.p()
        )));
    }
    Ok(mean_or_max_off_diagonal(s.matrix()).1)
}

fn mean_or_max_off_diagonal(m: &DMatrix<f64>) -> (f64, f64) {
    let p = m.nrows();
    let mut sum = 0.0;
    let mut max = 0.0f64;
    for j in 0..p {
        for k in j + 1..p {
            let v = m[(j, k)].abs();
            sum += v;
            max = max.max(v);
        }
    }
    let count = p * p.saturating_sub(1) / 2;
    (if count > 0 { sum / count as f64 } else { 0.0 }, max)
}

fn soft_threshold(z: f64, rho: f64) -> f64 {
    if z > rho {
        z - rho
    } else if z < -rho {
        z + rho
    } else {
        0.0
    }
}

/// Penalized negative log-likelihood (scaled by `2/n`) at `theta`.
pub fn glasso_objective(s: &SampleCov, theta: &DMatrix<f64>, rho: f64) -> Result<f64> {
    let log_det = linalg::log_det_spd(theta).ok_or(Error::NotPositiveDefinite)?;
    let p = theta.nrows();
    let mut l1 = 0.0;
    for j in 0..p {
        for k in 0..p {
            if j != k {
                l1 += theta[(j, k)].abs();
            }
        }
    }
    Ok(-log_det + linalg::trace_product(s.matrix(), theta) + rho * l1)
}

/// Largest violation of the optimality conditions for `theta` at penalty `rho`:
/// with `W = Θ⁻¹`, `W_jj = S_jj`; `|W_jk − S_jk| ≤ ρ` where `Θ_jk = 0`;
/// `W_jk = S_jk + ρ·sign(Θ_jk)` elsewhere.
pub fn kkt_residual(s: &SampleCov, theta: &DMatrix<f64>, rho: f64) -> Result<f64> {
    let w = linalg::inverse_spd(theta).ok_or(Error::NotPositiveDefinite)?;
    let p = theta.nrows();
    let mut worst = 0.0f64;
    for j in 0..p {
        worst = worst.max((w[(j, j)] - s.get(j, j)).abs());
        for k in j + 1..p {
            let gap = w[(j, k)] - s.get(j, k);
            let t = theta[(j, k)];
            let violation = if t == 0.0 {
                (gap.abs() - rho).max(0.0)
            } else {
                (gap - rho * t.signum()).abs()
            };
            worst = worst.max(violation);
        }
    }
    Ok(worst)
}

pub fn glasso_fit(s: &SampleCov, rho: f64) -> Result<PrecisionMatrix> {
    Ok(glasso_fit_with(s, rho, &GlassoOptions::default(), None)?.estimate)
}

pub fn glasso_fit_with(
    s: &SampleCov,
    rho: f64,
    options: &GlassoOptions,
    warm: Option<&WarmStart>,
) -> Result<GlassoFit> {
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(Error::InvalidArgument(format!("penalty must be >= 0, got {rho}")));
    }
    let p = s.p();
    if (0..p).any(|j| !(s.get(j, j) > 0.0)) {
        return Err(Error::DegenerateInput(
            "sample covariance has a non-positive diagonal entry".into(),
        ));
    }
    if rho == 0.0 && linalg::cholesky(s.matrix()).is_none() {
        return Err(Error::NotPositiveDefinite);
    }
    let (scale, _) = mean_or_max_off_diagonal(s.matrix());
    let (mut w, mut beta) = match warm {
        Some(ws) if ws.w.nrows() == p => (ws.w.clone(), ws.beta.clone()),
        _ => (s.matrix().clone(), DMatrix::zeros(p, p)),
    };
    for j in 0..p {
        w[(j, j)] = s.get(j, j);
    }

    let mut r = vec![0.0; p];
    let mut dual_trace = Vec::new();
    let mut last_change = f64::INFINITY;
    for sweep in 1..=options.max_sweeps {
        let mut change = 0.0;
        for j in 0..p {
            solve_column(s, &w, &mut beta, &mut r, j, rho, scale, options);
            for k in (0..p).filter(|&k| k != j) {
                change += (w[(k, j)] - r[k]).abs();
                w[(k, j)] = r[k];
                w[(j, k)] = r[k];
            }
        }
        if options.trace_dual {
            dual_trace.push(linalg::log_det_spd(&w).unwrap_or(f64::NEG_INFINITY));
        }
        let pairs = (p * p.saturating_sub(1)).max(1) as f64;
        last_change = change / pairs;
        if last_change <= options.tol * scale {
            let estimate = precision_from_coefficients(&w, &beta, options.support_tol)?;
            let kkt = kkt_residual(s, estimate.matrix(), rho)?;
            if kkt <= options.kkt_tol || sweep == options.max_sweeps {
                return Ok(GlassoFit {
                    rho,
                    estimate,
                    sweeps: sweep,
                    kkt_residual: kkt,
                    dual_trace,
                    warm: WarmStart { w, beta },
                });
            }
        }
    }
    Err(Error::NotConverged {
        solver: "glasso",
        iterations: options.max_sweeps,
        residual: last_change,
    })
}

/// Lasso subproblem for column `j`:
/// minimize `½βᵀW11β − s12ᵀβ + ρ‖β‖₁`, leaving `r = W11β`.
#[allow(clippy::too_many_arguments)]
fn solve_column(
    s: &SampleCov,
    w: &DMatrix<f64>,
    beta: &mut DMatrix<f64>,
    r: &mut [f64],
    j: usize,
    rho: f64,
    scale: f64,
    options: &GlassoOptions,
) {
    let p = s.p();
    r.iter_mut().for_each(|v| *v = 0.0);
    for l in (0..p).filter(|&l| l != j) {
        let b = beta[(l, j)];
        if b != 0.0 {
            for i in (0..p).filter(|&i| i != j) {
                r[i] += w[(i, l)] * b;
            }
        }
    }
    let threshold = options.inner_tol * scale.max(f64::MIN_POSITIVE);
    for _ in 0..options.max_inner {
        let mut max_step = 0.0f64;
        for k in (0..p).filter(|&k| k != j) {
            let old = beta[(k, j)];
            let wkk = w[(k, k)];
            let z = s.get(k, j) - (r[k] - wkk * old);
            let new = soft_threshold(z, rho) / wkk;
            let diff = new - old;
            if diff != 0.0 {
                beta[(k, j)] = new;
                for i in (0..p).filter(|&i| i != j) {
                    r[i] += w[(i, k)] * diff;
                }
                max_step = max_step.max(diff.abs() * wkk);
            }
        }
        if max_step <= threshold {
            break;
        }
    }
}

fn precision_from_coefficients(
    w: &DMatrix<f64>,
    beta: &DMatrix<f64>,
    support_tol: f64,
) -> Result<PrecisionMatrix> {
    let p = w.nrows();
    let mut theta = DMatrix::zeros(p, p);
    for j in 0..p {
        let explained: f64 = (0..p).filter(|&k| k != j).map(|k| w[(k, j)] * beta[(k, j)]).sum();
        let diag = 1.0 / (w[(j, j)] - explained);
        theta[(j, j)] = diag;
        for k in (0..p).filter(|&k| k != j) {
            theta[(k, j)] = -beta[(k, j)] * diag;
        }
    }
    let mut theta = linalg::symmetrized(&theta);
    for j in 0..p {
        for k in 0..p {
            if j != k && theta[(j, k)].abs() <= support_tol {
                theta[(j, k)] = 0.0;
            }
        }
    }
    PrecisionMatrix::from_matrix(theta)
}

/// Penalties, estimated supports, and estimates along the path, largest
/// penalty first.
#[derive(Debug, Clone)]
pub struct PenaltyPath {
    pub penalties: Vec<f64>,
    pub models: Vec<EdgeSet>,
    pub estimates: Vec<PrecisionMatrix>,
}

impl PenaltyPath {
    pub fn len(&self) -> usize {
        self.penalties.len()
    }

    pub fn is_empty(&self) -> bool {
        self.penalties.is_empty()
    }

    /// Distinct supports in order of first appearance.
    pub fn distinct_models(&self) -> Vec<EdgeSet> {
        let mut seen = std::collections::HashSet::new();
        self.models
            .iter()
            .filter(|m| seen.insert((*m).clone()))
            .cloned()
            .collect()
    }
}

/// `count` penalties log-spaced from `rho_max` down to `rho_max / 100`.
pub fn penalty_grid(rho_max: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![rho_max];
    }
    (0..count)
        .map(|i| rho_max * PATH_RANGE.powf(-(i as f64) / (count - 1) as f64))
        .collect()
}

pub fn glasso_path(s: &SampleCov, count: usize) -> Result<PenaltyPath> {
    glasso_path_with(s, count, &GlassoOptions::default())
}

pub fn glasso_path_with(s: &SampleCov, count: usize, options: &GlassoOptions) -> Result<PenaltyPath> {
    if count < 2 {
        return Err(Error::InvalidArgument(format!(
            "penalty path needs at least 2 values, got {count}"
        )));
    }
    let top = rho_max(s)?;
    if top <= 0.0 {
        return Err(Error::DegenerateInput(
            "sample covariance is diagonal; the penalty path is empty".into(),
        ));
    }
    let penalties = penalty_grid(top, count);
    let mut models = Vec::with_capacity(count);
    let mut estimates = Vec::with_capacity(count);
    let mut warm: Option<WarmStart> = None;
    for &rho in &penalties {
        let fit = glasso_fit_with(s, rho, options, warm.as_ref()).map_err(|e| Error::PathFit {
            rho,
            source: Box::new(e),
        })?;
        models.push(fit.estimate.support().clone());
        estimates.push(fit.estimate);
        warm = Some(fit.warm);
    }
    Ok(PenaltyPath {
        penalties,
        models,
        estimates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dmatrix;

    fn cov(m: DMatrix<f64>) -> SampleCov {
        SampleCov::new(m, 50).unwrap()
    }

    #[test]
    fn rho_max_values() {
        assert_eq!(rho_max(&cov(dmatrix![1.0, 0.3; 0.3, 1.0])).unwrap(), 0.3);
        assert_eq!(rho_max(&cov(DMatrix::identity(3, 3))).unwrap(), 0.0);
        let s = dmatrix![1.0, 0.1, -0.4; 0.1, 1.0, 0.2; -0.4, 0.2, 1.0];
        assert_eq!(rho_max(&cov(s)).unwrap(), 0.4);
        assert!(rho_max(&cov(dmatrix![2.0])).is_err());
    }

    #[test]
    fn two_by_two_closed_form() {
        let s = cov(dmatrix![1.0, 0.5; 0.5, 1.0]);
        let theta = glasso_fit(&s, 0.2).unwrap();
        let expected = dmatrix![1.0, -0.3; -0.3, 1.0] / 0.91;
        for (a, b) in theta.matrix().iter().zip(expected.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
        let w = theta.covariance();
        assert_abs_diff_eq!(w[(0, 1)], 0.3, epsilon = 1e-9);
    }

    #[test]
    fn large_penalty_gives_diagonal() {
        let s = cov(dmatrix![2.0, 0.3, 0.1; 0.3, 1.0, -0.2; 0.1, -0.2, 0.5]);
        let top = rho_max(&s).unwrap();
        for rho in [top, top * 1.5, 10.0] {
            let theta = glasso_fit(&s, rho).unwrap();
            assert!(theta.support().is_empty());
            for j in 0..3 {
                assert_abs_diff_eq!(theta.get(j, j), 1.0 / s.get(j, j), epsilon = 1e-12);
            }
        }
        let below = glasso_fit(&s, top * 0.99).unwrap();
        assert_eq!(below.support().len(), 1);
    }

    #[test]
    fn zero_penalty_inverts() {
        let s = cov(dmatrix![2.0, 0.3, 0.1; 0.3, 1.0, -0.2; 0.1, -0.2, 0.5]);
        let theta = glasso_fit(&s, 0.0).unwrap();
        let inv = s.matrix().clone().try_inverse().unwrap();
        for (a, b) in theta.matrix().iter().zip(inv.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
    }

    #[test]
    fn zero_penalty_needs_positive_definite_s() {
        let s = cov(dmatrix![1.0, 1.0; 1.0, 1.0]);
        assert!(matches!(glasso_fit(&s, 0.0), Err(Error::NotPositiveDefinite)));
    }

    #[test]
    fn dual_objective_never_decreases() {
        let s = cov(dmatrix![
            1.0, 0.6, 0.3, 0.1;
            0.6, 1.2, 0.5, 0.2;
            0.3, 0.5, 0.9, 0.4;
            0.1, 0.2, 0.4, 1.1
        ]);
        let options = GlassoOptions {
            trace_dual: true,
            ..Default::default()
        };
        let fit = glasso_fit_with(&s, 0.05, &options, None).unwrap();
        assert!(fit.dual_trace.len() >= 2);
        for pair in fit.dual_trace.windows(2) {
            assert!(pair[1] >= pair[0] - 1e-12, "{pair:?}");
        }
        assert!(fit.kkt_residual <= 1e-6);
    }

    #[test]
    fn path_geometry() {
        let s = cov(dmatrix![
            1.0, 0.6, 0.3, 0.1;
            0.6, 1.2, 0.5, 0.2;
            0.3, 0.5, 0.9, 0.4;
            0.1, 0.2, 0.4, 1.1
        ]);
        let path = glasso_path(&s, 100).unwrap();
        assert_eq!(path.len(), 100);
        assert!(path.models[0].is_empty());
        let ratio = PATH_RANGE.powf(-1.0 / 99.0);
        for pair in path.penalties.windows(2) {
            assert!(pair[1] < pair[0]);
            assert_abs_diff_eq!(pair[1] / pair[0], ratio, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(path.penalties[99], path.penalties[0] / 100.0, epsilon = 1e-15);
    }

    #[test]
    fn path_rejects_degenerate_inputs() {
        assert!(glasso_path(&cov(DMatrix::identity(3, 3)), 10).is_err());
        assert!(glasso_path(&cov(dmatrix![1.0, 0.2; 0.2, 1.0]), 1).is_err());
    }
}

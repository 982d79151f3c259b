//! Benchmark precision matrices (chain and double chain), their summary
//! scalars, and a seeded Gaussian sampler.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::chordal::{chain_edges, double_chain_edges};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{EdgeSet, PrecisionMatrix};

pub const CHAIN_OFF_DIAGONAL: f64 = 0.3;
pub const DOUBLE_CHAIN_FIRST_BAND: f64 = 0.2;
pub const DOUBLE_CHAIN_SECOND_BAND: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Chain,
    DoubleChain,
}

impl Family {
    pub fn edges(self, p: usize) -> Result<EdgeSet> {
        match self {
            Family::Chain => chain_edges(p),
            Family::DoubleChain => double_chain_edges(p),
        }
    }

    pub fn build(self, p: usize) -> Result<TrueModelSpec> {
        match self {
            Family::Chain => build_chain_theta(p),
            Family::DoubleChain => build_double_chain_theta(p),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Chain => "chain",
            Family::DoubleChain => "double_chain",
        })
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chain" => Ok(Family::Chain),
            "double_chain" | "double-chain" => Ok(Family::DoubleChain),
            other => Err(Error::InvalidArgument(format!("unknown family '{other}'"))),
        }
    }
}

/// Minimum edge signal θ0, maximum marginal variance σ²max, and the extreme
/// eigenvalues of Θ0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelStats {
    /// `+∞` when the edge set is empty; see `has_edges`.
    pub min_signal: f64,
    pub has_edges: bool,
    pub max_variance: f64,
    pub max_eigenvalue: f64,
    pub min_eigenvalue: f64,
}

impl ModelStats {
    pub fn condition_number(&self) -> f64 {
        self.max_eigenvalue / self.min_eigenvalue
    }

    /// σ²max · λmax, bounded above by the condition number.
    pub fn variance_eigen_product(&self) -> f64 {
        self.max_variance * self.max_eigenvalue
    }
}

#[derive(Debug, Clone)]
pub struct TrueModelSpec {
    pub theta0: PrecisionMatrix,
    pub edges: EdgeSet,
    pub stats: ModelStats,
}

impl TrueModelSpec {
    pub fn new(theta0: PrecisionMatrix, edges: EdgeSet) -> Result<Self> {
        if !theta0.support().is_subset(&edges) {
            return Err(Error::InvalidArgument(
                "precision matrix is not supported on the given edge set".into(),
            ));
        }
        let stats = model_stats(&theta0, &edges)?;
        if stats.has_edges && stats.min_signal <= 0.0 {
            return Err(Error::InvalidArgument(
                "true edge set contains an entry with zero signal".into(),
            ));
        }
        Ok(Self {
            theta0,
            edges,
            stats,
        })
    }

    pub fn p(&self) -> usize {
        self.theta0.p()
    }

    pub fn min_signal(&self) -> f64 {
        self.stats.min_signal
    }

    pub fn max_variance(&self) -> f64 {
        self.stats.max_variance
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.stats.max_eigenvalue
    }
}

pub fn model_stats(theta0: &PrecisionMatrix, edges: &EdgeSet) -> Result<ModelStats> {
    if edges.p() != theta0.p() {
        return Err(Error::DimensionMismatch {
            expected: theta0.p(),
            found: edges.p(),
        });
    }
    let min_signal = edges
        .iter()
        .map(|(j, k)| theta0.get(j, k).abs())
        .fold(f64::INFINITY, f64::min);
    let covariance = theta0.covariance();
    let max_variance = covariance
        .diagonal()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let eigenvalues = linalg::symmetric_eigenvalues(theta0.matrix());
    Ok(ModelStats {
        min_signal,
        has_edges: !edges.is_empty(),
        max_variance,
        max_eigenvalue: *eigenvalues.last().expect("p >= 1"),
        min_eigenvalue: eigenvalues[0],
    })
}

fn banded(p: usize, bands: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |j, k| {
        let offset = j.abs_diff(k);
        if offset == 0 {
            1.0
        } else {
            bands.get(offset - 1).copied().unwrap_or(0.0)
        }
    })
}

/// Tridiagonal Θ0 with unit diagonal and 0.3 next to it.
pub fn build_chain_theta(p: usize) -> Result<TrueModelSpec> {
    let edges = chain_edges(p)?;
    let theta = PrecisionMatrix::with_support(banded(p, &[CHAIN_OFF_DIAGONAL]), edges.clone())?;
    TrueModelSpec::new(theta, edges)
}

/// Pentadiagonal Θ0 with bands `(1, 0.2, 0.1)`.
pub fn build_double_chain_theta(p: usize) -> Result<TrueModelSpec> {
    let edges = double_chain_edges(p)?;
    let matrix = banded(p, &[DOUBLE_CHAIN_FIRST_BAND, DOUBLE_CHAIN_SECOND_BAND]);
    let theta = PrecisionMatrix::with_support(matrix, edges.clone())?;
    TrueModelSpec::new(theta, edges)
}

/// `n` i.i.d. rows from `N(0, Θ⁻¹)`.
///
/// Factors `Θ = LLᵀ` and solves `Lᵀz = ε` for standard normal `ε`, so the
/// covariance is never formed. Identical seeds give identical output.
pub fn sample_mvn(theta: &PrecisionMatrix, n: usize, seed: u64) -> DMatrix<f64> {
    let p = theta.p();
    let chol = linalg::cholesky(theta.matrix()).expect("validated positive definite");
    let upper = chol.l().transpose();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = DMatrix::from_fn(p, n, |_, _| StandardNormal.sample(&mut rng));
    let z = upper
        .solve_upper_triangular(&noise)
        .expect("Cholesky factor has a positive diagonal");
    z.transpose()
}

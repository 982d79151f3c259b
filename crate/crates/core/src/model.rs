//! Core types for Gaussian graphical models: edge sets, sample covariance
//! matrices, precision matrices, and the Gaussian log-likelihood.
//!
//! Node indices are 0-based throughout the library. Text formats read and
//! written by the harness are 1-based.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;

/// Relative tolerance used when validating symmetry of input matrices.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Set of undirected edges `{j, k}` over `p` nodes, stored as `(j, k)` with `j < k`.
///
/// The derived ordering compares by node count, then edge count, then the
/// sorted edge lists lexicographically. Enumeration and tie-breaking both
/// rely on this order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EdgeSet {
    p: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl EdgeSet {
    pub fn empty(p: usize) -> Self {
        Self {
            p,
            edges: BTreeSet::new(),
        }
    }

    pub fn complete(p: usize) -> Self {
        let edges = (0..p)
            .flat_map(|j| (j + 1..p).map(move |k| (j, k)))
            .collect();
        Self { p, edges }
    }

    /// Builds an edge set from 0-based pairs in any orientation.
    pub fn from_pairs<I>(p: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut set = Self::empty(p);
        for (j, k) in pairs {
            set.insert(j, k)?;
        }
        Ok(set)
    }

    /// Inserts `{j, k}`; returns whether it was newly added.
    pub fn insert(&mut self, j: usize, k: usize) -> Result<bool> {
        let key = self.key(j, k)?;
        Ok(self.edges.insert(key))
    }

    pub fn remove(&mut self, j: usize, k: usize) -> bool {
        match self.key(j, k) {
            Ok(key) => self.edges.remove(&key),
            Err(_) => false,
        }
    }

    fn key(&self, j: usize, k: usize) -> Result<(usize, usize)> {
        if j == k {
            return Err(Error::InvalidArgument(format!("self-loop at node {j}")));
        }
        if j >= self.p || k >= self.p {
            return Err(Error::InvalidArgument(format!(
                "edge ({j}, {k}) out of range for p = {}",
                self.p
            )));
        }
        Ok((j.min(k), j.max(k)))
    }

    pub fn contains(&self, j: usize, k: usize) -> bool {
        j != k && self.edges.contains(&(j.min(k), j.max(k)))
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn is_subset(&self, other: &EdgeSet) -> bool {
        self.edges.is_subset(&other.edges)
    }

    pub fn intersection_len(&self, other: &EdgeSet) -> usize {
        self.edges.intersection(&other.edges).count()
    }

    pub fn difference_len(&self, other: &EdgeSet) -> usize {
        self.edges.difference(&other.edges).count()
    }

    /// Edges of `self` missing from `other`.
    pub fn difference(&self, other: &EdgeSet) -> Vec<(usize, usize)> {
        self.edges.difference(&other.edges).copied().collect()
    }

    pub fn union(&self, other: &EdgeSet) -> EdgeSet {
        EdgeSet {
            p: self.p.max(other.p),
            edges: self.edges.union(&other.edges).copied().collect(),
        }
    }

    /// Sorted adjacency lists.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.p];
        for &(j, k) in &self.edges {
            adj[j].push(k);
            adj[k].push(j);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// Row-major `p × p` adjacency matrix.
    pub fn adjacency(&self) -> Vec<bool> {
        let mut adj = vec![false; self.p * self.p];
        for &(j, k) in &self.edges {
            adj[j * self.p + k] = true;
            adj[k * self.p + j] = true;
        }
        adj
    }
}

impl Ord for EdgeSet {
    fn cmp(&self, other: &Self) -> Ordering {
        self.p
            .cmp(&other.p)
            .then(self.edges.len().cmp(&other.edges.len()))
            .then_with(|| self.edges.iter().cmp(other.edges.iter()))
    }
}

impl PartialOrd for EdgeSet {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for EdgeSet {
    /// 1-based, e.g. `{1-2, 2-3}`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (j, k)) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}-{}", j + 1, k + 1)?;
        }
        write!(f, "}}")
    }
}

/// Sample covariance `S` together with the number of observations behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleCov {
    matrix: DMatrix<f64>,
    n: usize,
}

impl SampleCov {
    pub fn new(matrix: DMatrix<f64>, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::DegenerateInput("sample count must be positive".into()));
        }
        if matrix.nrows() == 0 {
            return Err(Error::DegenerateInput("empty covariance matrix".into()));
        }
        if !linalg::is_symmetric(&matrix, SYMMETRY_TOL) {
            return Err(Error::InvalidArgument(
                "covariance matrix is not symmetric".into(),
            ));
        }
        Ok(Self {
            matrix: linalg::symmetrized(&matrix),
            n,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.matrix[(j, k)]
    }
}

/// Symmetric positive definite matrix with its off-diagonal support.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionMatrix {
    matrix: DMatrix<f64>,
    support: EdgeSet,
}

impl PrecisionMatrix {
    /// Validates positive definiteness and reads the support off the exact
    /// nonzero pattern. Accepts asymmetry up to `1e-9` relative and stores
    /// the symmetrized matrix.
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::InvalidArgument(
                "precision matrix must be square and non-empty".into(),
            ));
        }
        if !linalg::is_symmetric(&matrix, 1e-9) {
            return Err(Error::InvalidArgument(
                "precision matrix is not symmetric".into(),
            ));
        }
        let matrix = linalg::symmetrized(&matrix);
        if linalg::cholesky(&matrix).is_none() {
            return Err(Error::NotPositiveDefinite);
        }
        let p = matrix.nrows();
        let mut support = EdgeSet::empty(p);
        for j in 0..p {
            for k in j + 1..p {
                if matrix[(j, k)] != 0.0 {
                    support.insert(j, k)?;
                }
            }
        }
        Ok(Self { matrix, support })
    }

    /// Like [`from_matrix`](Self::from_matrix), but additionally checks that
    /// every nonzero off-diagonal entry lies in `support`.
    pub fn with_support(matrix: DMatrix<f64>, support: EdgeSet) -> Result<Self> {
        let pm = Self::from_matrix(matrix)?;
        if support.p() != pm.p() {
            return Err(Error::DimensionMismatch {
                expected: pm.p(),
                found: support.p(),
            });
        }
        if !pm.support.is_subset(&support) {
            return Err(Error::InvalidArgument(
                "matrix has nonzero entries outside the declared support".into(),
            ));
        }
        Ok(Self {
            matrix: pm.matrix,
            support,
        })
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        Self::from_matrix(DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(
            values,
        )))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn support(&self) -> &EdgeSet {
        &self.support
    }

    pub fn p(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.matrix[(j, k)]
    }

    /// The implied covariance `Θ⁻¹`.
    pub fn covariance(&self) -> DMatrix<f64> {
        linalg::inverse_spd(&self.matrix).expect("validated positive definite")
    }

    pub fn log_det(&self) -> f64 {
        linalg::log_det_spd(&self.matrix).expect("validated positive definite")
    }
}

/// `S = (1/n) XᵀX` for an `n × p` data matrix, without centering.
pub fn sample_covariance(data: &DMatrix<f64>) -> Result<SampleCov> {
    let (n, p) = data.shape();
    if n == 0 || p == 0 {
        return Err(Error::DegenerateInput(format!(
            "data matrix is {n} x {p}"
        )));
    }
    let mut s = data.transpose() * data;
    s /= n as f64;
    SampleCov::new(linalg::symmetrized(&s), n)
}

/// Subtracts column means in place.
pub fn center_columns(data: &mut DMatrix<f64>) {
    let n = data.nrows();
    if n == 0 {
        return;
    }
    for mut col in data.column_iter_mut() {
        let mean = col.sum() / n as f64;
        col.add_scalar_mut(-mean);
    }
}

/// Gaussian log-likelihood `(n/2)[log det Θ − trace(SΘ)]`, omitting the
/// additive `2π` constant.
pub fn log_likelihood(s: &SampleCov, theta: &PrecisionMatrix) -> Result<f64> {
    log_likelihood_matrix(s, theta.matrix())
}

/// As [`log_likelihood`] for a raw matrix; Cholesky failure means `Θ` is not
/// positive definite.
pub fn log_likelihood_matrix(s: &SampleCov, theta: &DMatrix<f64>) -> Result<f64> {
    if theta.nrows() != s.p() || theta.ncols() != s.p() {
        return Err(Error::DimensionMismatch {
            expected: s.p(),
            found: theta.nrows(),
        });
    }
    let log_det = linalg::log_det_spd(theta).ok_or(Error::NotPositiveDefinite)?;
    let trace = linalg::trace_product(s.matrix(), theta);
    Ok(0.5 * s.n() as f64 * (log_det - trace))
}

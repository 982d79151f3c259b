//! Structure learning for sparse Gaussian graphical models with the extended
//! Bayesian information criterion.

pub mod chordal;
pub mod error;
pub mod glasso;
pub mod harness;
pub mod linalg;
pub mod mle;
pub mod model;
pub mod selection;
pub mod synthetic;
pub mod theory;

pub use error::{Error, Result};
pub use model::{EdgeSet, PrecisionMatrix, SampleCov};

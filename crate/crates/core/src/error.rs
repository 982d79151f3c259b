use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("graph is not decomposable")]
    NotDecomposable,

    #[error("enumeration too large: p = {p} exceeds the cap of {cap}")]
    EnumerationTooLarge { p: usize, cap: usize },

    #[error("model not estimable at this sample size: {0}")]
    NotEstimable(String),

    #[error("{solver} did not converge after {iterations} iterations (last residual {residual:e})")]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("glasso failed at rho = {rho}: {source}")]
    PathFit {
        rho: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("n = {n} is below the validity threshold {threshold} of the lower-tail bound")]
    BelowValidityThreshold { n: usize, threshold: f64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerical routines, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NotPositiveDefinite
            | Error::NotEstimable(_)
            | Error::NotConverged { .. } => true,
            Error::PathFit { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numerical_classification() {
        assert!(Error::NotPositiveDefinite.is_numerical());
        assert!(Error::NotEstimable("x".into()).is_numerical());
        let wrapped = Error::PathFit {
            rho: 0.1,
            source: Box::new(Error::NotConverged {
                solver: "glasso",
                iterations: 3,
                residual: 1.0,
            }),
        };
        assert!(wrapped.is_numerical());
        assert!(!Error::InvalidArgument("x".into()).is_numerical());
        assert!(!Error::Parse { line: 2, message: "x".into() }.is_numerical());
        assert!(!Error::NotDecomposable.is_numerical());
    }
}

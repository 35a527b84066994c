use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("iterate outside domain: block {block} has an infinite nonsmooth term")]
    OutsideDomain { block: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("penalty parameter violates the convergence condition: beta = {beta}, lhs = {lhs}, rhs = {rhs}")]
    BetaCondition { beta: f64, lhs: f64, rhs: f64 },

    #[error("no prox available for block {block} with a {kind} surrogate")]
    NoProx { block: usize, kind: &'static str },

    #[error("linear solve failed: {0}")]
    SingularSystem(String),

    #[error("residuals requested from a stale state: block gradients were not stored this iteration")]
    StaleState,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("diagnostic violation at iteration {iteration}: {inequality} exceeds slack by {excess:e}")]
    Diagnostic {
        iteration: usize,
        inequality: String,
        excess: f64,
    },

    #[error(transparent)]
    Data(#[from] crate::data::DataError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            actual,
        })
    }
}

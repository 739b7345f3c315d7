use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{function}: argument {value} outside its domain ({requirement})")]
    Domain {
        function: &'static str,
        requirement: &'static str,
        value: f64,
    },

    #[error("unknown family `{name}`; available: {available}")]
    UnknownFamily { name: String, available: String },

    #[error("unknown link `{0}`; available: identity, log, reciprocal, power(c), tan-half")]
    UnknownLink(String),

    #[error("link scale `mean` requires an exponential dispersion family, `{0}` is not one")]
    MeanScaleUnavailable(&'static str),

    #[error("theta[{index}] = {theta} lies outside the {family} parameter domain")]
    ThetaOutOfDomain {
        index: usize,
        theta: f64,
        family: &'static str,
    },

    #[error("y[{index}] = {y} lies outside the {family} support")]
    ResponseOutOfSupport {
        index: usize,
        y: f64,
        family: &'static str,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("rank-deficient Jacobian: smallest singular value {smallest:e} vs largest {largest:e}")]
    RankDeficient { smallest: f64, largest: f64 },

    #[error("matrix `{0}` is not positive definite")]
    NotPositiveDefinite(&'static str),

    #[error("IRLS did not converge after {iterations} iterations (last step {last_step:e})")]
    NotConverged {
        iterations: usize,
        last_step: f64,
        trace: Vec<crate::fit::IrlsStep>,
    },

    #[error("step-halving could not keep theta inside the parameter domain at iteration {iteration}")]
    DomainExit { iteration: usize },

    #[error("phi equation has no root (target {target})")]
    PhiNoRoot { target: f64 },

    #[error("{family} does not support {operation}")]
    Unsupported {
        family: &'static str,
        operation: &'static str,
    },

    #[error("invalid hypothesis: {0}")]
    Hypothesis(String),

    #[error("contract violation: {0}")]
    Contract(String),
}

impl Error {
    pub(crate) fn domain(function: &'static str, requirement: &'static str, value: f64) -> Self {
        Error::Domain {
            function,
            requirement,
            value,
        }
    }
}

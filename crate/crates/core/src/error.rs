use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the numerical and combinatorial routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{what} = {value} is outside the domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: String,
    },

    #[error("invalid power series: {0}")]
    InvalidSeries(String),

    #[error("invalid offspring spec: {0}")]
    InvalidSpec(String),

    #[error("mean never exceeds 1 within the probe budget (last probe m({t}) = {mean}); no apex")]
    NoApex { t: f64, mean: f64 },

    #[error("apex solver stalled at t = {t} with |m(t) - 1| = {residual:e}")]
    ApexTolerance { t: f64, residual: f64 },

    #[error("limit probe did not converge: {0}")]
    LimitProbe(String),

    #[error("supremum probe of t/psi(t) did not converge (last value {last})")]
    RadiusProbe { last: f64 },

    #[error("offspring series is not in K* (no apex)")]
    NotKStar,

    #[error("fixed-point iteration exceeded {iterations} iterations (last step {last_step:e})")]
    IterationBudget { iterations: usize, last_step: f64 },

    #[error("derivative of q is undefined at the apex t = tau = {tau}")]
    ApexPoint { tau: f64 },

    #[error("tree size {n} exceeds the enumeration cap {max}")]
    SizeCap { n: usize, max: usize },

    #[error("A_{n} = 0 (n is off the lattice); conditional probability undefined")]
    ZeroDenominator { n: usize },

    #[error("finite-size tail mass {tail:e} exceeds the limit {limit:e}; increase N")]
    TailTooLarge { tail: f64, limit: f64 },

    #[error("requested order {requested} exceeds the available order {available}")]
    InsufficientOrder { requested: usize, available: usize },

    #[error("defining equation residual {residual:e} at coefficient {n}")]
    SelfCheck { n: usize, residual: f64 },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn domain(what: &'static str, value: f64, domain: impl Into<String>) -> Self {
        Error::Domain {
            what,
            value,
            domain: domain.into(),
        }
    }
}

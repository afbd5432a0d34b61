use thiserror::Error;

/// Errors raised by the models and solvers in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("{name} = {value} is outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The bisection could not bracket its root within the expansion limit.
    #[error("could not bracket {what} within {limit} expansions")]
    BracketFailure { what: &'static str, limit: usize },

    /// The rate constraint exceeds what the power budget can deliver.
    /// `max_rate` is the water-filling capacity, the certificate of infeasibility.
    #[error("rate {required} nats exceeds the achievable maximum {max_rate} nats")]
    Infeasible { required: f64, max_rate: f64 },

    #[error("{what} has {size} entries, above the limit {limit}")]
    SizeLimit {
        what: &'static str,
        size: u128,
        limit: u128,
    },

    #[error("enumeration of {size} assignments exceeds the budget {budget}")]
    BudgetExceeded { size: u128, budget: u128 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_domain(
    name: &'static str,
    value: f64,
    domain: &'static str,
    ok: bool,
) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value,
            domain,
        })
    }
}

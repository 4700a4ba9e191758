use thiserror::Error;

/// Errors raised by the library.
///
/// The CLI maps [`Error::Parameter`] and [`Error::Domain`] to exit status 2
/// and [`Error::Capacity`] to exit status 3.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid `{field}`: {reason}")]
    Parameter { field: &'static str, reason: String },

    #[error("`{field}` = {value} is outside {domain}")]
    Domain {
        field: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("{what} needs {required} evaluations, budget is {budget}")]
    Capacity {
        what: &'static str,
        required: u128,
        budget: u128,
    },
}

impl Error {
    pub fn param(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            field,
            reason: reason.into(),
        }
    }

    pub fn domain(field: &'static str, value: f64, domain: &'static str) -> Self {
        Error::Domain { field, value, domain }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("probability level {0} is outside the open interval (0, 1)")]
    InvalidProbability(f64),

    #[error("{0}")]
    Invalid(String),

    #[error("claim count {count} on path {path} exceeds the cap of {cap}")]
    ClaimCountCap { path: u64, count: u64, cap: u64 },

    #[error("root bracket has no sign change: gap({lo}) = {gap_lo}, gap({hi}) = {gap_hi}")]
    NoBracket {
        lo: f64,
        hi: f64,
        gap_lo: f64,
        gap_hi: f64,
    },

    #[error("cannot read `{path}`: {message}")]
    Io { path: String, message: String },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("no usable data: {0}")]
    Empty(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_probability(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidProbability(p))
    }
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite and positive",
        })
    }
}

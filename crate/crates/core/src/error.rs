use thiserror::Error;

/// Errors raised by the workbench evaluators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("modulus must be at least 1")]
    ZeroModulus,

    #[error("modulus {0} must be odd")]
    EvenModulus(u64),

    #[error("{0} is not prime")]
    NotPrime(u64),

    #[error("{what}: gcd({value}, {modulus}) = {gcd}, expected 1")]
    NotCoprime {
        what: &'static str,
        value: i64,
        modulus: u64,
        gcd: u64,
    },

    #[error("moduli {0} and {1} are not coprime")]
    ModuliNotCoprime(u64, u64),

    #[error("range bound R = {range} exceeds the modulus r = {modulus}")]
    RangeExceedsModulus { range: u64, modulus: u64 },

    #[error("integer overflow while computing {0}")]
    Overflow(&'static str),

    #[error("estimated work {cost} exceeds the budget {budget}")]
    Budget { cost: u128, budget: u128 },

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}

/// Fails with [`Error::Budget`] when `cost` exceeds `budget`.
pub fn check_budget(cost: u128, budget: u128) -> Result<()> {
    if cost > budget {
        Err(Error::Budget { cost, budget })
    } else {
        Ok(())
    }
}

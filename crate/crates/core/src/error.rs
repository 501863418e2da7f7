use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Exit-code class of an error, as reported by the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Malformed or unusable input (exit 1).
    Input,
    /// Polynomial outside the supported class (exit 2).
    Class,
    /// Internal inconsistency detected by a consistency check (exit 1).
    Internal,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("weight ({0},{1}) is not coprime")]
    NonCoprimeWeight(u64, u64),
    #[error("empty input polynomial")]
    EmptyInput,
    #[error("quasihomogeneous part of weighted degree {degree} has a non-rational root; supply factored input")]
    IrrationalRoot { degree: u64 },
    #[error("coefficient {0} has a denominator divisible by p")]
    NonUnitDenominator(String),
    #[error("{0} is not a prime")]
    NotPrime(u64),
    #[error("geometric series with factor Q^0 T^0 diverges")]
    DivergentFactor,
    #[error("series exponent does not grow: {0}")]
    NonPositiveGrowth(String),
    #[error("negative exponent in closed form: {0}")]
    NegativeExponent(String),
    #[error("reduction has a singular torus point at ({0},{1})")]
    SingularReduction(u64, u64),
    #[error("face function on {0} is not a monomial")]
    NonMonomialFace(String),
    #[error("face {0} is degenerate; route it through the arithmetic engine")]
    DegenerateFace(String),
    #[error("arithmetically degenerate {0}")]
    ArithmeticallyDegenerate(String),
    #[error("unsupported class: {0}")]
    UnsupportedClass(String),
    #[error("predicted count at level {level} is not an integer: {value}")]
    NonIntegralPrediction { level: usize, value: String },
    #[error("level {0} exceeds the safety bound {1}")]
    LevelTooLarge(usize, usize),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Syntax(_)
            | Error::Schema(_)
            | Error::NonCoprimeWeight(..)
            | Error::EmptyInput
            | Error::NonUnitDenominator(_)
            | Error::NotPrime(_)
            | Error::LevelTooLarge(..)
            | Error::Io(_) => ErrorClass::Input,
            Error::IrrationalRoot { .. }
            | Error::SingularReduction(..)
            | Error::NonMonomialFace(_)
            | Error::DegenerateFace(_)
            | Error::ArithmeticallyDegenerate(_)
            | Error::UnsupportedClass(_) => ErrorClass::Class,
            Error::DivergentFactor
            | Error::NonPositiveGrowth(_)
            | Error::NegativeExponent(_)
            | Error::NonIntegralPrediction { .. } => ErrorClass::Internal,
        }
    }

    /// Short machine-readable tag.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::Syntax(_) => "SyntaxError",
            Error::Schema(_) => "SchemaError",
            Error::NonCoprimeWeight(..) => "NonCoprimeWeight",
            Error::EmptyInput => "EmptyInput",
            Error::IrrationalRoot { .. } => "IrrationalRoot",
            Error::NonUnitDenominator(_) => "NonUnitDenominator",
            Error::NotPrime(_) => "NotPrime",
            Error::DivergentFactor => "DivergentFactor",
            Error::NonPositiveGrowth(_) => "NonPositiveGrowth",
            Error::NegativeExponent(_) => "NegativeExponent",
            Error::SingularReduction(..) => "SingularReduction",
            Error::NonMonomialFace(_) => "NonMonomialFace",
            Error::DegenerateFace(_) => "DegenerateFace",
            Error::ArithmeticallyDegenerate(_) => "ArithmeticallyDegenerate",
            Error::UnsupportedClass(_) => "UnsupportedClass",
            Error::NonIntegralPrediction { .. } => "NonIntegralPrediction",
            Error::LevelTooLarge(..) => "LevelTooLarge",
            Error::Io(_) => "IoError",
        }
    }
}

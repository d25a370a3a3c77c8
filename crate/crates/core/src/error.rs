use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{0} is not a prime power")]
    NotAPrimePower(u64),
    #[error("prime power {0} is too large for this construction")]
    TooLarge(u64),
    #[error("field of order {order} needs a log table of {entries} entries, above the bound {bound}")]
    CapacityExceeded { order: u64, entries: u64, bound: u64 },
    #[error("modulus must be odd and at least 3, got {0}")]
    InvalidModulus(u64),
    #[error("residues {0} and {1} are equal mod {2}")]
    EqualResidues(u64, u64, u64),
    #[error("separation {s} is realized by both {first:?} and {second:?}")]
    IndexClash {
        s: u64,
        first: (u64, u64),
        second: (u64, u64),
    },
    #[error("separation {0} is not realized by any pair")]
    IndexIncomplete(u64),
    #[error("angle {theta} outside [0, {upper}]")]
    DomainError { theta: f64, upper: f64 },
    #[error("H({theta}) = {value} is not positive")]
    NonPositiveH { theta: f64, value: f64 },
    #[error("H'(pi) = {0} is not positive")]
    NonPositiveSlope(f64),
    #[error("weight W_{r} = {value} is negative")]
    NegativeWeight { r: usize, value: f64 },
    #[error("last distance gap {0} is not positive")]
    DegenerateGap(f64),
    #[error("epsilon {0} is outside the admissible range")]
    EpsilonOutOfRange(f64),
    #[error("truncation depth {depth} is below {needed}")]
    TruncationTooShallow { depth: u64, needed: u64 },
    #[error("grid size {0} is below the minimum of 1000")]
    GridTooCoarse(usize),
    #[error("modulus mismatch: {0} vs {1}")]
    ModulusMismatch(u64, u64),
    #[error("profile has {0} distances, at least {1} required")]
    ProfileTooShort(usize, usize),
    #[error("no feasible point: {0}")]
    NoFeasiblePoint(String),
    #[error("invalid coefficient spec: {0}")]
    InvalidSpec(String),
    #[error("invalid optimizer config: {0}")]
    InvalidConfig(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

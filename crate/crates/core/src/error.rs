use thiserror::Error;

/// Errors produced by the solvers and transforms in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("degenerate instance: every realization is zero")]
    DegenerateInstance,

    #[error("union support has {points} points, above the exact cap of {cap}; use a Monte-Carlo estimate")]
    SupportTooLarge { points: usize, cap: usize },

    #[error("{n} variables exceed the exact subset-DP cap of {cap}; use the grouped DP or the PTAS")]
    TooManyVariables { n: usize, cap: usize },

    #[error("brute-force oracle needs {work} outcome evaluations, above the cap of {cap}")]
    OracleTooLarge { work: u128, cap: u128 },

    #[error("state {mask:#x} was never reached by the DP over {n} variables")]
    UnknownState { mask: u64, n: usize },

    #[error(
        "grouped DP over {groups} groups needs {states} states, above the cap of {cap}; coarsen the discretization"
    )]
    StateSpaceTooLarge { groups: usize, states: u128, cap: usize },

    #[error("atom (value {value}, prob {prob}) of variable {var} lies in the cannot-exist region (value > 1/eps^2 and prob > eps^2)")]
    ForbiddenAtom { var: usize, value: f64, prob: f64 },

    #[error("variable {var} has {count} atoms above 1; run bundle_above_one first")]
    MultipleHighAtoms { var: usize, count: usize },

    #[error("atom (value {value}, prob {prob}) of variable {var} cannot be discretized: {reason}")]
    Unclassifiable { var: usize, value: f64, prob: f64, reason: &'static str },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

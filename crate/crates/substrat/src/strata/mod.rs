//! Declarative stratification geometry: strata with frontier relations,
//! projections and projectors, L-regular cell constructions, and the
//! sampling-based verification of the geometric estimates they must satisfy.

pub mod cell;
pub mod exponents;
pub mod stratification;
pub mod stratum;

pub use cell::{
    quasiconvexity_estimate, shrink_cell, verify_inclusions, with_scaled_inset, InclusionReport,
    LRegularCell, ShrinkParams, ShrunkenCell,
};
pub use exponents::{assign_exponents, check_exponents, ExponentAssignment, StratumExponents};
pub use stratification::{CheckResult, Stratification, ValidationReport, WConditionFit};
pub use stratum::{Stratum, StratumShape};

#[derive(Clone, Debug, thiserror::Error)]
pub enum StrataError {
    #[error("point lies outside the single-valued projection tube: {0}")]
    OutsideTube(String),
    #[error("sampling produced fewer than 10 valid pairs")]
    NoSamplePairs,
    #[error("sample graph is disconnected; increase the sample budget")]
    DisconnectedSample,
    #[error("degenerate cell: {0}")]
    DegenerateCell(String),
    #[error(
        "no exponent assignment fits in (0, 1) for theta = {theta}; blocking chain: {chain:?}"
    )]
    InfeasibleExponents { theta: f64, chain: Vec<String> },
    #[error("pair ({i}, {j}) has no declared frontier relation")]
    PairNotDeclared { i: usize, j: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

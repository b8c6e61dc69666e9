use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("degenerate encoding: misalignment angle {angle} rad must lie strictly inside (0, pi/2)")]
    DegenerateEncoding { angle: f64 },

    #[error("qubit is not normalized (norm^2 = {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },

    #[error("ill-conditioned yields: |q01*q10 - q00*q11| = {determinant:e} below threshold {threshold:e}")]
    IllConditionedYields { determinant: f64, threshold: f64 },

    #[error("inconsistent statistics: {what} = {value:e}")]
    InconsistentStatistics { what: &'static str, value: f64 },

    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("incomplete data: missing {0}")]
    IncompleteData(String),

    #[error("invalid intensity configuration: {0}")]
    InvalidIntensities(String),

    #[error("root bracket failure in {what}: f({lo:e}) = {f_lo:e}, f({hi:e}) = {f_hi:e}")]
    RootBracket {
        what: &'static str,
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("linear program infeasible; irreducible constraint subset: {0:?}")]
    LpInfeasible(Vec<String>),

    #[error("linear program unbounded")]
    LpUnbounded,

    #[error("linear program did not converge within {0} pivots")]
    LpIterationLimit(usize),

    #[error("linear program optimum failed certification (objective gap {objective_gap:e}, violation {violation:e})")]
    LpUncertified { objective_gap: f64, violation: f64 },

    #[error("phase-error optimization found no point satisfying the normalization constraints")]
    NlpInfeasible,

    #[error("quadrature did not converge (achieved tolerance {achieved:e})")]
    Quadrature { achieved: f64 },

    #[error("count overflow: {0}")]
    CountOverflow(String),
}

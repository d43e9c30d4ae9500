use thiserror::Error;

/// Errors raised by the design and solver routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("layout invalid: {0}")]
    LayoutInvalid(String),

    #[error("region too small: {pas} PAs at spacing {spacing} m need more than {extent} m")]
    RegionTooSmall { pas: usize, spacing: f64, extent: f64 },

    #[error("phase refinement exceeded k cap {cap}")]
    KCapExceeded { cap: u32 },

    #[error("root bracket expansion failed: {0}")]
    BracketFailure(String),

    #[error("channel matrix rank deficient (singular value ratio {ratio:e})")]
    RankDeficient { ratio: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("numerical stall: {0}")]
    NumericalStall(String),

    #[error("empty feasible range [{lo}, {hi}] for PA ({waveguide}, {index})")]
    EmptyFeasibleRange {
        waveguide: usize,
        index: usize,
        lo: f64,
        hi: f64,
    },

    #[error("no alignment zero in scan range")]
    NoZeroInRange,
}

pub type Result<T> = std::result::Result<T, Error>;

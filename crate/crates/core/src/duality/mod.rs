//! Dual representation on finite weight grids: minimal penalties by
//! conjugation, reconstruction of a statistic from a penalty table, the
//! normalization condition on penalties, and the 0/+∞ coherence test.
//!
//! The weight domain is always `{Q ≥ 0, Σ Q_i ≤ 1}`. Outside it the minimal
//! penalty of a normalized loss-dependent statistic is `+∞`, so restricting
//! the maximization there does not change any value.

mod conjugate;
mod dual;
mod grid;

use thiserror::Error;

pub use conjugate::{
    alpha_min, alpha_min_traced, conjugate_on_grid, ConjugateTrace, Conjugation, ConjugationParams,
    PointFailure,
};
pub use dual::{
    check_normalization_condition, classify_coherence, dual_check, dual_reconstruct,
    CoherenceLabel, CoherenceReport, DualCheckOptions, DualityReport, IntermediatePoint, LabelHistogram,
    NormalizationEntry, NormalizationMode, NormalizationReport, NormalizationVerdict,
    Reconstruction, SampleResidual,
};
pub use grid::{
    default_resolution, lattice_size, weight_grid, PenaltyGrid, PenaltyPoint,
    DEFAULT_MAX_GRID_POINTS,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DualityError {
    #[error("grid is empty")]
    EmptyGrid,
    #[error("penalty grid has no point with finite penalty")]
    EmptyEffectiveDomain,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("penalty at point {index} must be finite and nonnegative, got {value}")]
    NegativePenalty { index: usize, value: f64 },
    #[error("weight grid would have {points} points, above the limit {max}")]
    GridTooLarge { points: u128, max: usize },
    #[error("epsilon must lie in (0, 1), got {0}")]
    InvalidEpsilon(f64),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("statistic {0} does not claim loss dependence; the conjugate search needs it")]
    NotLossDependent(String),
    #[error("statistic evaluation failed at M = {m:?}: {message}")]
    Evaluation { m: Vec<f64>, message: String },
    #[error("objective is not finite ({value}) at M = {m:?}")]
    NonFinite { m: Vec<f64>, value: f64 },
    #[error("conjugate at Q = {q:?} is negative ({value}); the statistic is not normalized at 0")]
    NegativeConjugate { q: Vec<f64>, value: f64 },
}

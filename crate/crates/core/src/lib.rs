//! Loss-based risk statistics: evaluation, minimal penalties by conjugation,
//! dual reconstruction, sample-based axiom checks, and the correspondence
//! with cash-additive risk measures.
//!
//! A portfolio is a finite vector of P&L values over scenarios, optionally
//! grouped into blocks. Statistics depend only on the loss part `M ∧ 0`.

pub mod axioms;
pub mod cli;
pub mod duality;
pub mod io;
pub mod sampling;
pub mod statistics;
pub mod types;

pub use axioms::{run_suite, AxiomId, AxiomReport, SuiteVerdict, Tolerances, Verdict};
pub use duality::{alpha_min, conjugate_on_grid, dual_check, weight_grid, ConjugationParams, PenaltyGrid};
pub use sampling::SamplerSpec;
pub use statistics::{Claim, Claims, RiskStatistic, SharedStatistic, StatisticError};
pub use types::{CashAmount, DataError, ExtendedValue, Partition, PortfolioSample, WeightVector};

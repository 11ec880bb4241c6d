//! Built-in loss-based risk statistics and the two transforms between
//! cash-additive and loss-based statistics.
//!
//! Every statistic declares a set of [`Claim`]s. Claims are statements to be
//! verified by [`crate::axioms`]; no computation in this crate relies on
//! them being true.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::duality::PenaltyGrid;
use crate::sampling::SamplerSpec;
use crate::types::{loss_of, DataError, Partition, PortfolioSample, WeightVector, MASS_TOL};

/// `Σ w_i` must be within this of 1 for a weighted loss to be cash-loss-additive.
pub const UNIT_MASS_TOL: f64 = 1e-12;

/// Stream id used by [`check_cash_loss_additivity`].
const CASH_LOSS_STREAM: u64 = 0xC45E;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatisticError {
    #[error("statistic {name} expects dimension {expected}, got {got}")]
    Dimension {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("statistic {name} expects partition {expected:?}, got {got:?}")]
    Partition {
        name: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("penalty grid has no point with finite penalty")]
    EmptyEffectiveDomain,
    #[error("statistic {name} produced a non-finite value {value}")]
    NonFinite { name: String, value: f64 },
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Claim {
    Convex,
    Coherent,
    CashLossAdditive,
    CashAdditive,
    LossDependent,
    Monotone,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct Claims(BTreeSet<Claim>);

impl Claims {
    pub fn of(claims: &[Claim]) -> Self {
        Self(claims.iter().copied().collect())
    }

    pub fn has(&self, claim: Claim) -> bool {
        self.0.contains(&claim)
    }

    pub fn insert(&mut self, claim: Claim) {
        self.0.insert(claim);
    }

    pub fn iter(&self) -> impl Iterator<Item = Claim> + '_ {
        self.0.iter().copied()
    }
}

/// A functional `ℝ^N → ℝ` on scenario data. Evaluation is pure and may be
/// called concurrently.
pub trait RiskStatistic: Send + Sync {
    fn name(&self) -> &str;

    fn claims(&self) -> &Claims;

    /// Fixed dimension, if the statistic only accepts one.
    fn dimension(&self) -> Option<usize>;

    fn evaluate(&self, m: &PortfolioSample) -> Result<f64, StatisticError>;
}

pub type SharedStatistic = Arc<dyn RiskStatistic>;

impl fmt::Debug for dyn RiskStatistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RiskStatistic")
            .field("name", &self.name())
            .field("claims", self.claims())
            .finish()
    }
}

fn check_dimension(name: &str, expected: usize, m: &PortfolioSample) -> Result<(), StatisticError> {
    if m.len() != expected {
        return Err(StatisticError::Dimension {
            name: name.to_owned(),
            expected,
            got: m.len(),
        });
    }
    Ok(())
}

fn finite(name: &str, value: f64) -> Result<f64, StatisticError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(StatisticError::NonFinite {
            name: name.to_owned(),
            value,
        })
    }
}

/// `ρ(M) = −Σ w_i·min(X_i, 0)`.
#[derive(Debug, Clone)]
pub struct WeightedLoss {
    weights: WeightVector,
    claims: Claims,
}

pub fn weighted_loss(weights: WeightVector) -> Result<WeightedLoss, StatisticError> {
    if !weights.is_nonnegative() {
        return Err(StatisticError::InvalidWeights(format!(
            "weights must be nonnegative: {:?}",
            weights.as_slice()
        )));
    }
    if !weights.has_sub_unit_mass() {
        return Err(StatisticError::InvalidWeights(format!(
            "total weight {} exceeds 1",
            weights.mass()
        )));
    }
    let mut claims = Claims::of(&[
        Claim::Convex,
        Claim::Coherent,
        Claim::LossDependent,
        Claim::Monotone,
    ]);
    if (weights.mass() - 1.0).abs() <= UNIT_MASS_TOL {
        claims.insert(Claim::CashLossAdditive);
    }
    Ok(WeightedLoss { weights, claims })
}

impl WeightedLoss {
    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }
}

impl RiskStatistic for WeightedLoss {
    fn name(&self) -> &str {
        "weighted_loss"
    }

    fn claims(&self) -> &Claims {
        &self.claims
    }

    fn dimension(&self) -> Option<usize> {
        Some(self.weights.len())
    }

    fn evaluate(&self, m: &PortfolioSample) -> Result<f64, StatisticError> {
        check_dimension(self.name(), self.weights.len(), m)?;
        finite(self.name(), self.weights.loss_pairing(m.values()))
    }
}

/// Largest block-average loss: `max_h (1/n_h)·Σ_{i∈h} −min(X_i, 0)`.
#[derive(Debug, Clone)]
pub struct WorstScenario {
    partition: Arc<Partition>,
    claims: Claims,
}

pub fn worst_scenario(partition: Partition) -> WorstScenario {
    WorstScenario {
        partition: Arc::new(partition),
        claims: Claims::of(&[
            Claim::Convex,
            Claim::Coherent,
            Claim::LossDependent,
            Claim::CashLossAdditive,
            Claim::Monotone,
        ]),
    }
}

impl WorstScenario {
    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    /// Value and the first block attaining it.
    pub fn evaluate_with_argmax(&self, m: &PortfolioSample) -> Result<(f64, usize), StatisticError> {
        if m.partition().sizes() != self.partition.sizes() {
            return Err(StatisticError::Partition {
                name: self.name().to_owned(),
                expected: self.partition.sizes().to_vec(),
                got: m.partition().sizes().to_vec(),
            });
        }
        let mut best = (f64::NEG_INFINITY, 0);
        for (h, range) in self.partition.ranges().enumerate() {
            let n = range.len() as f64;
            let total: f64 = m.values()[range].iter().map(|&x| loss_of(x)).sum();
            let avg = total / n;
            if avg > best.0 {
                best = (avg, h);
            }
        }
        Ok((finite(self.name(), best.0)?, best.1))
    }
}

impl RiskStatistic for WorstScenario {
    fn name(&self) -> &str {
        "worst_scenario"
    }

    fn claims(&self) -> &Claims {
        &self.claims
    }

    fn dimension(&self) -> Option<usize> {
        Some(self.partition.len())
    }

    fn evaluate(&self, m: &PortfolioSample) -> Result<f64, StatisticError> {
        self.evaluate_with_argmax(m).map(|(v, _)| v)
    }
}

/// `ρ(M) = max_Q { −Σ Q_i·min(X_i, 0) − α(Q) }` over a tabulated penalty.
#[derive(Debug, Clone)]
pub struct PenalizedStatistic {
    grid: PenaltyGrid,
    dimension: usize,
    claims: Claims,
}

pub fn penalized_statistic(grid: PenaltyGrid) -> Result<PenalizedStatistic, StatisticError> {
    let dimension = grid
        .dimension()
        .ok_or(StatisticError::EmptyEffectiveDomain)?;
    let mut finite_alphas = grid.points().iter().filter_map(|p| p.alpha.finite()).peekable();
    if finite_alphas.peek().is_none() {
        return Err(StatisticError::EmptyEffectiveDomain);
    }
    let coherent = finite_alphas.all(|a| a == 0.0);
    for point in grid.points() {
        if !point.q.in_sub_simplex() {
            return Err(StatisticError::InvalidWeights(format!(
                "penalty point {:?} lies outside {{Q >= 0, sum Q <= 1}}",
                point.q.as_slice()
            )));
        }
        if let Some(a) = point.alpha.finite() {
            if a < 0.0 {
                return Err(StatisticError::InvalidParameter(format!(
                    "penalty values must be nonnegative, got {a}"
                )));
            }
        }
    }
    let mut claims = Claims::of(&[Claim::Convex, Claim::LossDependent, Claim::Monotone]);
    if coherent {
        claims.insert(Claim::Coherent);
    }
    Ok(PenalizedStatistic {
        grid,
        dimension,
        claims,
    })
}

impl PenalizedStatistic {
    pub fn grid(&self) -> &PenaltyGrid {
        &self.grid
    }

    /// Value and index of the first maximizing grid point.
    pub fn evaluate_with_argmax(&self, m: &PortfolioSample) -> Result<(f64, usize), StatisticError> {
        check_dimension(self.name(), self.dimension, m)?;
        let (value, index) = self
            .grid
            .maximize(m.values())
            .ok_or(StatisticError::EmptyEffectiveDomain)?;
        Ok((finite(self.name(), value)?, index))
    }
}

impl RiskStatistic for PenalizedStatistic {
    fn name(&self) -> &str {
        "penalized"
    }

    fn claims(&self) -> &Claims {
        &self.claims
    }

    fn dimension(&self) -> Option<usize> {
        Some(self.dimension)
    }

    fn evaluate(&self, m: &PortfolioSample) -> Result<f64, StatisticError> {
        self.evaluate_with_argmax(m).map(|(v, _)| v)
    }
}

/// `ρ(M) = (1/β)·log Σ p_i·exp(−β·min(X_i, 0))`.
#[derive(Debug, Clone)]
pub struct EntropicLoss {
    p: Vec<f64>,
    p_total: f64,
    beta: f64,
    claims: Claims,
}

pub fn entropic_loss(p: Vec<f64>, beta: f64) -> Result<EntropicLoss, StatisticError> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(StatisticError::InvalidParameter(format!(
            "beta must be positive, got {beta}"
        )));
    }
    if p.is_empty() {
        return Err(StatisticError::InvalidWeights("no probability weights".into()));
    }
    if p.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
        return Err(StatisticError::InvalidWeights(format!(
            "probabilities must be nonnegative: {p:?}"
        )));
    }
    let p_total: f64 = p.iter().sum();
    if (p_total - 1.0).abs() > MASS_TOL {
        return Err(StatisticError::InvalidWeights(format!(
            "probabilities sum to {p_total}, not 1"
        )));
    }
    Ok(EntropicLoss {
        p,
        p_total,
        beta,
        claims: Claims::of(&[
            Claim::Convex,
            Claim::LossDependent,
            Claim::CashLossAdditive,
            Claim::Monotone,
        ]),
    })
}

impl EntropicLoss {
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }
}

impl RiskStatistic for EntropicLoss {
    fn name(&self) -> &str {
        "entropic"
    }

    fn claims(&self) -> &Claims {
        &self.claims
    }

    fn dimension(&self) -> Option<usize> {
        Some(self.p.len())
    }

    fn evaluate(&self, m: &PortfolioSample) -> Result<f64, StatisticError> {
        check_dimension(self.name(), self.p.len(), m)?;
        let top = self
            .p
            .iter()
            .zip(m.values())
            .filter(|(&p, _)| p > 0.0)
            .map(|(_, &x)| self.beta * loss_of(x))
            .fold(f64::NEG_INFINITY, f64::max);
        // dividing by the same-order sum of p makes the no-loss case exactly log(1)
        let scaled: f64 = self
            .p
            .iter()
            .zip(m.values())
            .map(|(&p, &x)| if p > 0.0 { p * (self.beta * loss_of(x) - top).exp() } else { 0.0 })
            .sum();
        let value = (top + (scaled / self.p_total).ln()) / self.beta;
        finite(self.name(), value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformDirection {
    RegulatorVersion,
    CashAdditiveLift,
}

/// How the lift picks the upper bound `a_M` of the components of `M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "value")]
pub enum AnchorRule {
    /// `a_M = max(0, max_i X_i)`.
    MaxComponent,
    /// `a_M = max(0, max_i X_i) + c`, `c ≥ 0`.
    Offset(f64),
    /// `a_M = max(a, max(0, max_i X_i))`.
    AtLeast(f64),
}

impl AnchorRule {
    pub fn anchor(&self, m: &PortfolioSample) -> f64 {
        let base = m.max_component().max(0.0);
        match *self {
            Self::MaxComponent => base,
            Self::Offset(c) => base + c.max(0.0),
            Self::AtLeast(a) => base.max(a),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransformRecord {
    pub source: String,
    pub direction: TransformDirection,
    pub anchor_rule: Option<AnchorRule>,
}

/// `ρ(M) = ρ̄(M ∧ 0)`.
pub struct RegulatorVersion {
    inner: SharedStatistic,
    name: String,
    claims: Claims,
}

pub fn regulator_version(rho_bar: SharedStatistic) -> RegulatorVersion {
    let mut claims = Claims::of(&[Claim::LossDependent]);
    for claim in [Claim::Convex, Claim::Coherent, Claim::Monotone] {
        if rho_bar.claims().has(claim) {
            claims.insert(claim);
        }
    }
    if rho_bar.claims().has(Claim::CashAdditive) || rho_bar.claims().has(Claim::CashLossAdditive) {
        claims.insert(Claim::CashLossAdditive);
    }
    RegulatorVersion {
        name: format!("regulator_version({})", rho_bar.name()),
        inner: rho_bar,
        claims,
    }
}

impl RegulatorVersion {
    pub fn record(&self) -> TransformRecord {
        TransformRecord {
            source: self.inner.name().to_owned(),
            direction: TransformDirection::RegulatorVersion,
            anchor_rule: None,
        }
    }
}

impl RiskStatistic for RegulatorVersion {
    fn name(&self) -> &str {
        &self.name
    }

    fn claims(&self) -> &Claims {
        &self.claims
    }

    fn dimension(&self) -> Option<usize> {
        self.inner.dimension()
    }

    fn evaluate(&self, m: &PortfolioSample) -> Result<f64, StatisticError> {
        self.inner.evaluate(&m.loss_part())
    }
}

/// `ρ̄(M) = ρ(M − a_M·1) − a_M`. Only anchor-independent when `ρ` is
/// cash-loss-additive; that is not checked here.
pub struct CashAdditiveLift {
    inner: SharedStatistic,
    anchor: AnchorRule,
    name: String,
    claims: Claims,
}

pub fn cash_additive_lift(rho: SharedStatistic, anchor: AnchorRule) -> CashAdditiveLift {
    let mut claims = Claims::of(&[Claim::CashAdditive, Claim::Monotone]);
    if rho.claims().has(Claim::Convex) {
        claims.insert(Claim::Convex);
    }
    CashAdditiveLift {
        name: format!("cash_additive_lift({})", rho.name()),
        inner: rho,
        anchor,
        claims,
    }
}

impl CashAdditiveLift {
    pub fn anchor_rule(&self) -> AnchorRule {
        self.anchor
    }

    pub fn record(&self) -> TransformRecord {
        TransformRecord {
            source: self.inner.name().to_owned(),
            direction: TransformDirection::CashAdditiveLift,
            anchor_rule: Some(self.anchor),
        }
    }

    /// Lift evaluated with an explicit anchor `a ≥ max_i X_i`.
    pub fn evaluate_at_anchor(&self, m: &PortfolioSample, a: f64) -> Result<f64, StatisticError> {
        let shifted = m.shifted(-a)?;
        Ok(self.inner.evaluate(&shifted)? - a)
    }
}

impl RiskStatistic for CashAdditiveLift {
    fn name(&self) -> &str {
        &self.name
    }

    fn claims(&self) -> &Claims {
        &self.claims
    }

    fn dimension(&self) -> Option<usize> {
        self.inner.dimension()
    }

    fn evaluate(&self, m: &PortfolioSample) -> Result<f64, StatisticError> {
        self.evaluate_at_anchor(m, self.anchor.anchor(m))
    }
}

/// Statistic given by a closure. Used for deliberately broken fixtures.
pub struct FnStatistic {
    name: String,
    claims: Claims,
    dimension: Option<usize>,
    #[allow(clippy::type_complexity)]
    f: Box<dyn Fn(&PortfolioSample) -> f64 + Send + Sync>,
}

impl FnStatistic {
    pub fn new(
        name: impl Into<String>,
        claims: Claims,
        dimension: Option<usize>,
        f: impl Fn(&PortfolioSample) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            claims,
            dimension,
            f: Box::new(f),
        }
    }
}

impl RiskStatistic for FnStatistic {
    fn name(&self) -> &str {
        &self.name
    }

    fn claims(&self) -> &Claims {
        &self.claims
    }

    fn dimension(&self) -> Option<usize> {
        self.dimension
    }

    fn evaluate(&self, m: &PortfolioSample) -> Result<f64, StatisticError> {
        if let Some(n) = self.dimension {
            check_dimension(&self.name, n, m)?;
        }
        finite(&self.name, (self.f)(m))
    }
}

/// `ρ(M) = −Σ w_i·X_i`: counts gains as well as losses.
pub fn gain_leaking(weights: Vec<f64>) -> FnStatistic {
    let n = weights.len();
    FnStatistic::new(
        "gain_leaking",
        Claims::of(&[Claim::Convex, Claim::Coherent, Claim::LossDependent]),
        Some(n),
        move |m| -weights.iter().zip(m.values()).map(|(w, x)| w * x).sum::<f64>(),
    )
}

/// `ρ(M) = Σ w_i·min(X_i, 0)`: risk increasing in the data.
pub fn inverted_loss(weights: Vec<f64>) -> FnStatistic {
    let n = weights.len();
    FnStatistic::new(
        "inverted_loss",
        Claims::of(&[Claim::LossDependent, Claim::Monotone]),
        Some(n),
        move |m| weights.iter().zip(m.values()).map(|(w, x)| w * x.min(0.0)).sum::<f64>(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CashLossCounterexample {
    pub m: Vec<f64>,
    pub a: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CashLossAdditivityReport {
    pub statistic: String,
    pub passed: bool,
    pub max_residual: f64,
    pub samples: usize,
    pub tolerance: f64,
    pub counterexample: Option<CashLossCounterexample>,
}

/// Residual `|ρ(M − a1) − ρ(M) − a|`.
pub fn cash_loss_residual(
    rho: &dyn RiskStatistic,
    m: &PortfolioSample,
    a: f64,
) -> Result<f64, StatisticError> {
    let shifted = rho.evaluate(&m.shifted(-a)?)?;
    let base = rho.evaluate(m)?;
    Ok((shifted - base - a).abs())
}

/// Samples `M ≤ 0` and `a ≥ 0` and tests `ρ(M − a1) = ρ(M) + a`.
pub fn check_cash_loss_additivity(
    rho: &dyn RiskStatistic,
    spec: &SamplerSpec,
    tol: f64,
) -> Result<CashLossAdditivityReport, StatisticError> {
    let mut sampler = spec.stream(CASH_LOSS_STREAM);
    let mut worst: Option<CashLossCounterexample> = None;
    for _ in 0..spec.samples {
        let m = sampler.nonpositive_sample();
        let a = sampler.cash();
        let residual = cash_loss_residual(rho, &m, a)?;
        if worst.as_ref().is_none_or(|w| residual > w.residual) {
            worst = Some(CashLossCounterexample {
                m: m.values().to_vec(),
                a,
                residual,
            });
        }
    }
    let max_residual = worst.as_ref().map_or(0.0, |w| w.residual);
    let passed = max_residual <= tol;
    Ok(CashLossAdditivityReport {
        statistic: rho.name().to_owned(),
        passed,
        max_residual,
        samples: spec.samples,
        tolerance: tol,
        counterexample: if passed { None } else { worst },
    })
}

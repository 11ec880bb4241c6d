use std::sync::Arc;

use serde::Serialize;

use super::conjugate::{conjugate_on_grid, ConjugationParams, PointFailure};
use super::grid::PenaltyGrid;
use super::DualityError;
use crate::statistics::RiskStatistic;
use crate::types::{ExtendedValue, Partition, PortfolioSample, WeightVector};

/// Slack on region boundaries `min_i Q_i ≥ 1−ε` and `Σ Q_i ≥ 1−ε`.
const REGION_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reconstruction {
    pub value: f64,
    pub argmax: usize,
    pub q: Vec<f64>,
}

/// `max_Q { −Σ Q_i·min(X_i, 0) − α(Q) }` over the finite-penalty points.
/// Ties go to the first point in grid order.
pub fn dual_reconstruct(grid: &PenaltyGrid, m: &PortfolioSample) -> Result<Reconstruction, DualityError> {
    let n = grid.dimension().ok_or(DualityError::EmptyGrid)?;
    if m.len() != n {
        return Err(DualityError::DimensionMismatch {
            expected: n,
            got: m.len(),
        });
    }
    let (value, argmax) = grid
        .maximize(m.values())
        .ok_or(DualityError::EmptyEffectiveDomain)?;
    Ok(Reconstruction {
        value,
        argmax,
        q: grid.points()[argmax].q.as_slice().to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationMode {
    /// `min { α(Q) : min_i Q_i ≥ 1−ε } = 0`, as printed.
    Literal,
    /// Effective domain inside `{Q ≥ 0, Σ Q_i ≤ 1}` and
    /// `inf { α(Q) : Σ Q_i ≥ 1−ε } = 0`.
    Derived,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizationVerdict {
    pub passed: bool,
    /// Smallest penalty in the region; `None` when no grid point lies in it.
    pub min_alpha: Option<ExtendedValue>,
    pub region_points: usize,
    /// Derived mode only: whether every finite-penalty point is in the sub-simplex.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domain_ok: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizationEntry {
    pub epsilon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub literal: Option<NormalizationVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub derived: Option<NormalizationVerdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizationReport {
    pub mode: NormalizationMode,
    pub tolerance: f64,
    pub entries: Vec<NormalizationEntry>,
    /// Some ε where the literal and derived verdicts disagree (mode `Both`).
    pub discrepancy: bool,
}

fn region_min<'a>(
    points: impl Iterator<Item = &'a ExtendedValue>,
    tol: f64,
) -> (Option<ExtendedValue>, usize, bool) {
    let mut min: Option<ExtendedValue> = None;
    let mut count = 0;
    for &alpha in points {
        count += 1;
        if min.is_none_or(|m| !m.le(alpha)) {
            min = Some(alpha);
        }
    }
    let passed = matches!(min, Some(ExtendedValue::Finite(v)) if v.abs() <= tol);
    (min, count, passed)
}

fn literal_verdict(grid: &PenaltyGrid, eps: f64, tol: f64) -> NormalizationVerdict {
    let threshold = 1.0 - eps - REGION_SLACK;
    let in_region = grid.points().iter().filter(|p| {
        p.q.as_slice().iter().copied().fold(f64::INFINITY, f64::min) >= threshold
    });
    let (min_alpha, region_points, passed) = region_min(in_region.map(|p| &p.alpha), tol);
    NormalizationVerdict {
        passed,
        min_alpha,
        region_points,
        domain_ok: None,
    }
}

fn derived_verdict(grid: &PenaltyGrid, eps: f64, tol: f64) -> NormalizationVerdict {
    let domain_ok = grid.effective_domain().all(|(_, p)| p.q.in_sub_simplex());
    let threshold = 1.0 - eps - REGION_SLACK;
    let in_region = grid.points().iter().filter(|p| p.q.mass() >= threshold);
    let (min_alpha, region_points, attained) = region_min(in_region.map(|p| &p.alpha), tol);
    NormalizationVerdict {
        passed: domain_ok && attained,
        min_alpha,
        region_points,
        domain_ok: Some(domain_ok),
    }
}

/// Per-ε normalization verdicts. Tolerance on the minimum is `1e-6`.
pub fn check_normalization_condition(
    grid: &PenaltyGrid,
    epsilons: &[f64],
    mode: NormalizationMode,
) -> Result<NormalizationReport, DualityError> {
    const TOL: f64 = 1e-6;
    if let Some(&bad) = epsilons.iter().find(|&&e| !(e > 0.0 && e < 1.0)) {
        return Err(DualityError::InvalidEpsilon(bad));
    }
    let literal = matches!(mode, NormalizationMode::Literal | NormalizationMode::Both);
    let derived = matches!(mode, NormalizationMode::Derived | NormalizationMode::Both);
    let entries: Vec<NormalizationEntry> = epsilons
        .iter()
        .map(|&epsilon| NormalizationEntry {
            epsilon,
            literal: literal.then(|| literal_verdict(grid, epsilon, TOL)),
            derived: derived.then(|| derived_verdict(grid, epsilon, TOL)),
        })
        .collect();
    let discrepancy = entries.iter().any(|e| match (&e.literal, &e.derived) {
        (Some(l), Some(d)) => l.passed != d.passed,
        _ => false,
    });
    Ok(NormalizationReport {
        mode,
        tolerance: TOL,
        entries,
        discrepancy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CoherenceLabel {
    Zero,
    Intermediate,
    Infinite,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LabelHistogram {
    pub zero: usize,
    pub intermediate: usize,
    pub infinite: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntermediatePoint {
    pub index: usize,
    pub q: Vec<f64>,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoherenceReport {
    pub zero_tol: f64,
    pub infinity_threshold: f64,
    pub labels: Vec<CoherenceLabel>,
    pub histogram: LabelHistogram,
    pub intermediate: Vec<IntermediatePoint>,
    pub coherent_consistent: bool,
}

/// Label each penalty as zero, infinite or in between. A coherent
/// statistic's minimal penalty only takes the values 0 and `+∞`.
pub fn classify_coherence(grid: &PenaltyGrid, zero_tol: f64, infinity_threshold: f64) -> CoherenceReport {
    let mut histogram = LabelHistogram::default();
    let mut intermediate = Vec::new();
    let labels = grid
        .points()
        .iter()
        .enumerate()
        .map(|(index, p)| match p.alpha {
            ExtendedValue::PosInfinite => {
                histogram.infinite += 1;
                CoherenceLabel::Infinite
            }
            ExtendedValue::Finite(v) if v >= infinity_threshold => {
                histogram.infinite += 1;
                CoherenceLabel::Infinite
            }
            ExtendedValue::Finite(v) if v.abs() <= zero_tol => {
                histogram.zero += 1;
                CoherenceLabel::Zero
            }
            ExtendedValue::Finite(v) => {
                histogram.intermediate += 1;
                intermediate.push(IntermediatePoint {
                    index,
                    q: p.q.as_slice().to_vec(),
                    alpha: v,
                });
                CoherenceLabel::Intermediate
            }
        })
        .collect();
    CoherenceReport {
        zero_tol,
        infinity_threshold,
        labels,
        coherent_consistent: histogram.intermediate == 0,
        histogram,
        intermediate,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualCheckOptions {
    /// Pass iff `|ρ_rec − ρ| ≤ rel_tol·(1 + |ρ|)` on every sample.
    pub rel_tol: f64,
    pub zero_tol: f64,
    pub infinity_threshold: f64,
}

impl Default for DualCheckOptions {
    fn default() -> Self {
        Self {
            rel_tol: 0.02,
            zero_tol: 1e-6,
            infinity_threshold: 1e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleResidual {
    pub m: Vec<f64>,
    pub rho: f64,
    pub reconstructed: f64,
    pub residual: f64,
    pub argmax_q: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualityReport {
    pub statistic: String,
    pub grid_points: usize,
    pub failures: Vec<PointFailure>,
    pub histogram: LabelHistogram,
    pub samples: Vec<SampleResidual>,
    pub max_abs_residual: f64,
    pub mean_abs_residual: f64,
    pub rel_tol: f64,
    pub passed: bool,
}

/// Conjugate `ρ` on `qgrid`, reconstruct it from the result, and compare
/// with direct evaluation on each sample.
pub fn dual_check(
    rho: &dyn RiskStatistic,
    qgrid: &[WeightVector],
    partition: &Arc<Partition>,
    params: &ConjugationParams,
    samples: &[PortfolioSample],
    options: &DualCheckOptions,
) -> Result<(DualityReport, PenaltyGrid), DualityError> {
    let conj = conjugate_on_grid(rho, qgrid, partition, params, None)?;
    let classes = classify_coherence(&conj.grid, options.zero_tol, options.infinity_threshold);
    let mut rows = Vec::with_capacity(samples.len());
    for m in samples {
        let direct = rho.evaluate(m).map_err(|e| DualityError::Evaluation {
            m: m.values().to_vec(),
            message: e.to_string(),
        })?;
        let rec = dual_reconstruct(&conj.grid, m)?;
        rows.push(SampleResidual {
            m: m.values().to_vec(),
            rho: direct,
            reconstructed: rec.value,
            residual: rec.value - direct,
            argmax_q: rec.q,
        });
    }
    let max_abs_residual = rows.iter().map(|r| r.residual.abs()).fold(0.0, f64::max);
    let mean_abs_residual = if rows.is_empty() {
        0.0
    } else {
        rows.iter().map(|r| r.residual.abs()).sum::<f64>() / rows.len() as f64
    };
    let passed = rows
        .iter()
        .all(|r| r.residual.abs() <= options.rel_tol * (1.0 + r.rho.abs()));
    let report = DualityReport {
        statistic: rho.name().to_owned(),
        grid_points: conj.grid.len(),
        failures: conj.failures,
        histogram: classes.histogram,
        samples: rows,
        max_abs_residual,
        mean_abs_residual,
        rel_tol: options.rel_tol,
        passed,
    };
    Ok((report, conj.grid))
}

//! Sampling-based checks of the five axioms of a loss-based risk statistic:
//!
//! | id  | law                                                  |
//! |-----|------------------------------------------------------|
//! | A.1 | `ρ(−a1) = a` for `a ≥ 0`                             |
//! | A.2 | `M1 ≤ M2 ⇒ ρ(M1) ≥ ρ(M2)`                            |
//! | A.3 | `ρ(M) = ρ(M ∧ 0)`                                    |
//! | A.4 | `ρ(λM1 + (1−λ)M2) ≤ λρ(M1) + (1−λ)ρ(M2)`, `0<λ<1`  |
//! | A.5 | `ρ(sM) = sρ(M)` for `s ≥ 0`                          |
//!
//! A failure comes with a counterexample that can be re-evaluated. A pass
//! only means no violation was found in the samples drawn.

use serde::Serialize;

use crate::sampling::Sampler;
use crate::statistics::{Claim, RiskStatistic, StatisticError};
use crate::types::{CashAmount, PortfolioSample};

pub use crate::sampling::SamplerSpec;

/// Max number of evaluation error messages kept per axiom.
const MAX_ERRORS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum AxiomId {
    #[serde(rename = "A1_normalization")]
    A1Normalization,
    #[serde(rename = "A2_monotonicity")]
    A2Monotonicity,
    #[serde(rename = "A3_loss_dependence")]
    A3LossDependence,
    #[serde(rename = "A4_convexity")]
    A4Convexity,
    #[serde(rename = "A5_positive_homogeneity")]
    A5PositiveHomogeneity,
}

impl AxiomId {
    pub const ALL: [AxiomId; 5] = [
        Self::A1Normalization,
        Self::A2Monotonicity,
        Self::A3LossDependence,
        Self::A4Convexity,
        Self::A5PositiveHomogeneity,
    ];

    fn stream(self) -> u64 {
        self as u64 + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// Absolute tolerance for the equalities A.1 and A.3.
    pub equality: f64,
    /// Scaled by `1 + |lhs| + |rhs|` for the inequalities A.2 and A.4.
    pub inequality: f64,
    /// Relative tolerance for A.5.
    pub homogeneity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            equality: 1e-9,
            inequality: 1e-9,
            homogeneity: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Counterexample {
    Normalization { a: f64, residual: f64 },
    /// `ρ(M) < 0`, reported under A.1.
    Codomain { m: Vec<f64>, residual: f64 },
    Monotonicity { m1: Vec<f64>, m2: Vec<f64>, residual: f64 },
    LossDependence { m: Vec<f64>, residual: f64 },
    Convexity { m1: Vec<f64>, m2: Vec<f64>, lambda: f64, residual: f64 },
    Homogeneity { s: f64, m: Vec<f64>, residual: f64 },
}

impl Counterexample {
    pub fn residual(&self) -> f64 {
        match *self {
            Self::Normalization { residual, .. }
            | Self::Codomain { residual, .. }
            | Self::Monotonicity { residual, .. }
            | Self::LossDependence { residual, .. }
            | Self::Convexity { residual, .. }
            | Self::Homogeneity { residual, .. } => residual,
        }
    }

    /// Recompute the residual from the stored inputs. `like` supplies the
    /// partition the inputs live on.
    pub fn reevaluate(
        &self,
        rho: &dyn RiskStatistic,
        like: &PortfolioSample,
    ) -> Result<f64, StatisticError> {
        let sample = |v: &[f64]| like.with_values(v.to_vec());
        match self {
            Self::Normalization { a, .. } => normalization_residual(rho, like, *a),
            Self::Codomain { m, .. } => Ok(-rho.evaluate(&sample(m)?)?),
            Self::Monotonicity { m1, m2, .. } => {
                monotonicity_residual(rho, &sample(m1)?, &sample(m2)?).map(|r| r.0)
            }
            Self::LossDependence { m, .. } => loss_dependence_residual(rho, &sample(m)?),
            Self::Convexity { m1, m2, lambda, .. } => {
                convexity_residual(rho, &sample(m1)?, &sample(m2)?, *lambda).map(|r| r.0)
            }
            Self::Homogeneity { s, m, .. } => homogeneity_residual(rho, &sample(m)?, *s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomEntry {
    pub axiom: AxiomId,
    pub verdict: Verdict,
    pub worst_residual: f64,
    pub counterexample: Option<Counterexample>,
    pub samples_used: usize,
    pub seed: u64,
    pub errors: Vec<String>,
    /// A.1 only: some sampled `ρ(M)` was negative.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub codomain_violation: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteVerdict {
    CoherentRegulatorBased,
    ConvexRegulatorBased,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomReport {
    pub statistic: String,
    pub seed: u64,
    pub samples: usize,
    pub tolerances: Tolerances,
    pub entries: Vec<AxiomEntry>,
    pub verdict: SuiteVerdict,
}

impl AxiomReport {
    pub fn entry(&self, axiom: AxiomId) -> Option<&AxiomEntry> {
        self.entries.iter().find(|e| e.axiom == axiom)
    }
}

fn cash_loss(like: &PortfolioSample, a: f64) -> Result<PortfolioSample, StatisticError> {
    let cash = PortfolioSample::cash_vector(CashAmount::new(a)?, like.partition().clone())?;
    Ok(cash.scaled(-1.0)?)
}

/// `|ρ(−a1) − a|`.
pub fn normalization_residual(
    rho: &dyn RiskStatistic,
    like: &PortfolioSample,
    a: f64,
) -> Result<f64, StatisticError> {
    Ok((rho.evaluate(&cash_loss(like, a)?)? - a).abs())
}

/// `(ρ(M2) − ρ(M1), scale)`; positive residual means a violation.
pub fn monotonicity_residual(
    rho: &dyn RiskStatistic,
    m1: &PortfolioSample,
    m2: &PortfolioSample,
) -> Result<(f64, f64), StatisticError> {
    let r1 = rho.evaluate(m1)?;
    let r2 = rho.evaluate(m2)?;
    Ok((r2 - r1, 1.0 + r1.abs() + r2.abs()))
}

/// `|ρ(M) − ρ(M ∧ 0)|`.
pub fn loss_dependence_residual(rho: &dyn RiskStatistic, m: &PortfolioSample) -> Result<f64, StatisticError> {
    Ok((rho.evaluate(m)? - rho.evaluate(&m.loss_part())?).abs())
}

/// `(ρ(λM1+(1−λ)M2) − λρ(M1) − (1−λ)ρ(M2), scale)`.
pub fn convexity_residual(
    rho: &dyn RiskStatistic,
    m1: &PortfolioSample,
    m2: &PortfolioSample,
    lambda: f64,
) -> Result<(f64, f64), StatisticError> {
    let mix = m1.convex_combination(m2, lambda).map_err(StatisticError::from)?;
    let lhs = rho.evaluate(&mix)?;
    let rhs = lambda * rho.evaluate(m1)? + (1.0 - lambda) * rho.evaluate(m2)?;
    Ok((lhs - rhs, 1.0 + lhs.abs() + rhs.abs()))
}

/// `|ρ(sM) − sρ(M)| / max(|ρ(sM)|, |sρ(M)|)`, and 0 when both are 0.
pub fn homogeneity_residual(
    rho: &dyn RiskStatistic,
    m: &PortfolioSample,
    s: f64,
) -> Result<f64, StatisticError> {
    let lhs = rho.evaluate(&m.scaled(s)?)?;
    let rhs = s * rho.evaluate(m)?;
    let diff = (lhs - rhs).abs();
    if diff == 0.0 {
        return Ok(0.0);
    }
    Ok(diff / lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE))
}

struct Tracker {
    worst: f64,
    counterexample: Option<Counterexample>,
    errors: Vec<String>,
    error_count: usize,
}

impl Tracker {
    fn new() -> Self {
        Self {
            worst: 0.0,
            counterexample: None,
            errors: Vec::new(),
            error_count: 0,
        }
    }

    fn observe(&mut self, residual: f64, failed: bool, cex: impl FnOnce() -> Counterexample) {
        if residual > self.worst {
            self.worst = residual;
        }
        if failed && self.counterexample.as_ref().is_none_or(|c| residual > c.residual()) {
            self.counterexample = Some(cex());
        }
    }

    fn error(&mut self, err: StatisticError) {
        self.error_count += 1;
        if self.errors.len() < MAX_ERRORS {
            self.errors.push(err.to_string());
        }
    }

    fn finish(self, axiom: AxiomId, spec: &SamplerSpec, samples: usize) -> AxiomEntry {
        let verdict = if self.counterexample.is_some() {
            Verdict::Fail
        } else if self.error_count > 0 {
            Verdict::Error
        } else {
            Verdict::Pass
        };
        AxiomEntry {
            axiom,
            verdict,
            worst_residual: self.worst,
            counterexample: self.counterexample,
            samples_used: samples,
            seed: spec.seed,
            errors: self.errors,
            codomain_violation: None,
        }
    }
}

fn dimension_ok(rho: &dyn RiskStatistic, spec: &SamplerSpec) -> Result<(), StatisticError> {
    match rho.dimension() {
        Some(n) if n != spec.dimension() => Err(StatisticError::Dimension {
            name: rho.name().to_owned(),
            expected: n,
            got: spec.dimension(),
        }),
        _ => Ok(()),
    }
}

fn check_normalization(rho: &dyn RiskStatistic, spec: &SamplerSpec, tol: &Tolerances, s: &mut Sampler) -> AxiomEntry {
    let mut t = Tracker::new();
    let like = s.sample();
    let anchors = [0.0, 1.0];
    let mut codomain = false;
    for i in 0..spec.samples {
        let a = anchors.get(i).copied().unwrap_or_else(|| s.cash());
        match normalization_residual(rho, &like, a) {
            Ok(r) => t.observe(r, r > tol.equality, || Counterexample::Normalization { a, residual: r }),
            Err(e) => t.error(e),
        }
        let m = s.sample();
        match rho.evaluate(&m) {
            Ok(v) if v < -tol.equality => {
                codomain = true;
                t.observe(-v, true, || Counterexample::Codomain {
                    m: m.values().to_vec(),
                    residual: -v,
                });
            }
            Ok(_) => {}
            Err(e) => t.error(e),
        }
    }
    let mut entry = t.finish(AxiomId::A1Normalization, spec, spec.samples);
    entry.codomain_violation = Some(codomain);
    entry
}

fn check_monotonicity(rho: &dyn RiskStatistic, spec: &SamplerSpec, tol: &Tolerances, s: &mut Sampler) -> AxiomEntry {
    let mut t = Tracker::new();
    for _ in 0..spec.samples {
        let m1 = s.sample();
        let m2 = s.dominating(&m1);
        match monotonicity_residual(rho, &m1, &m2) {
            Ok((r, scale)) => t.observe(r.max(0.0), r > tol.inequality * scale, || {
                Counterexample::Monotonicity {
                    m1: m1.values().to_vec(),
                    m2: m2.values().to_vec(),
                    residual: r,
                }
            }),
            Err(e) => t.error(e),
        }
    }
    t.finish(AxiomId::A2Monotonicity, spec, spec.samples)
}

fn check_loss_dependence(rho: &dyn RiskStatistic, spec: &SamplerSpec, tol: &Tolerances, s: &mut Sampler) -> AxiomEntry {
    let mut t = Tracker::new();
    for _ in 0..spec.samples {
        let m = s.sample();
        match loss_dependence_residual(rho, &m) {
            Ok(r) => t.observe(r, r > tol.equality, || Counterexample::LossDependence {
                m: m.values().to_vec(),
                residual: r,
            }),
            Err(e) => t.error(e),
        }
    }
    t.finish(AxiomId::A3LossDependence, spec, spec.samples)
}

fn check_convexity(rho: &dyn RiskStatistic, spec: &SamplerSpec, tol: &Tolerances, s: &mut Sampler) -> AxiomEntry {
    let mut t = Tracker::new();
    for _ in 0..spec.samples {
        let m1 = s.sample();
        let m2 = s.sample();
        let lambda = s.lambda();
        match convexity_residual(rho, &m1, &m2, lambda) {
            Ok((r, scale)) => t.observe(r.max(0.0), r > tol.inequality * scale, || {
                Counterexample::Convexity {
                    m1: m1.values().to_vec(),
                    m2: m2.values().to_vec(),
                    lambda,
                    residual: r,
                }
            }),
            Err(e) => t.error(e),
        }
    }
    t.finish(AxiomId::A4Convexity, spec, spec.samples)
}

fn check_homogeneity(rho: &dyn RiskStatistic, spec: &SamplerSpec, tol: &Tolerances, s: &mut Sampler) -> AxiomEntry {
    let mut t = Tracker::new();
    let anchors = [0.0, 1.0];
    for i in 0..spec.samples {
        let scalar = anchors.get(i).copied().unwrap_or_else(|| s.homogeneity_scalar());
        let m = s.sample();
        match homogeneity_residual(rho, &m, scalar) {
            Ok(r) => t.observe(r, r > tol.homogeneity, || Counterexample::Homogeneity {
                s: scalar,
                m: m.values().to_vec(),
                residual: r,
            }),
            Err(e) => t.error(e),
        }
    }
    t.finish(AxiomId::A5PositiveHomogeneity, spec, spec.samples)
}

/// Check one axiom on `spec.samples` seeded samples.
pub fn check_axiom(
    rho: &dyn RiskStatistic,
    axiom: AxiomId,
    spec: &SamplerSpec,
    tol: &Tolerances,
) -> AxiomEntry {
    if let Err(e) = dimension_ok(rho, spec) {
        let mut t = Tracker::new();
        t.error(e);
        return t.finish(axiom, spec, 0);
    }
    let mut s = spec.stream(axiom.stream());
    match axiom {
        AxiomId::A1Normalization => check_normalization(rho, spec, tol, &mut s),
        AxiomId::A2Monotonicity => check_monotonicity(rho, spec, tol, &mut s),
        AxiomId::A3LossDependence => check_loss_dependence(rho, spec, tol, &mut s),
        AxiomId::A4Convexity => check_convexity(rho, spec, tol, &mut s),
        AxiomId::A5PositiveHomogeneity => check_homogeneity(rho, spec, tol, &mut s),
    }
}

/// A.1–A.4 always; A.5 only when `ρ` claims coherence.
pub fn run_suite(rho: &dyn RiskStatistic, spec: &SamplerSpec, tol: &Tolerances) -> AxiomReport {
    let mut entries: Vec<AxiomEntry> = AxiomId::ALL[..4]
        .iter()
        .map(|&axiom| check_axiom(rho, axiom, spec, tol))
        .collect();
    let a5 = if rho.claims().has(Claim::Coherent) {
        check_axiom(rho, AxiomId::A5PositiveHomogeneity, spec, tol)
    } else {
        AxiomEntry {
            axiom: AxiomId::A5PositiveHomogeneity,
            verdict: Verdict::NotApplicable,
            worst_residual: 0.0,
            counterexample: None,
            samples_used: 0,
            seed: spec.seed,
            errors: Vec::new(),
            codomain_violation: None,
        }
    };
    let convex = entries.iter().all(|e| e.verdict == Verdict::Pass);
    let verdict = match (convex, a5.verdict) {
        (true, Verdict::Pass) => SuiteVerdict::CoherentRegulatorBased,
        (true, _) => SuiteVerdict::ConvexRegulatorBased,
        (false, _) => SuiteVerdict::Fail,
    };
    entries.push(a5);
    AxiomReport {
        statistic: rho.name().to_owned(),
        seed: spec.seed,
        samples: spec.samples,
        tolerances: *tol,
        entries,
        verdict,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statistics::{entropic_loss, gain_leaking, inverted_loss, weighted_loss, worst_scenario};
    use crate::types::{Partition, WeightVector};

    fn spec(n: usize, samples: usize) -> SamplerSpec {
        SamplerSpec::new(Partition::single(n).unwrap(), samples, 2024)
    }

    fn wl(w: &[f64]) -> crate::statistics::WeightedLoss {
        weighted_loss(WeightVector::new(w.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn weighted_loss_loss_dependence_exact() {
        let e = check_axiom(&wl(&[0.5, 0.5]), AxiomId::A3LossDependence, &spec(2, 500), &Tolerances::default());
        assert_eq!(e.verdict, Verdict::Pass);
        assert_eq!(e.worst_residual, 0.0);
    }

    #[test]
    fn weighted_loss_normalization_exact() {
        let e = check_axiom(&wl(&[0.5, 0.25, 0.25]), AxiomId::A1Normalization, &spec(3, 500), &Tolerances::default());
        assert_eq!(e.verdict, Verdict::Pass);
        assert_eq!(e.worst_residual, 0.0);
        assert_eq!(e.codomain_violation, Some(false));
    }

    #[test]
    fn gain_leaking_fails_loss_dependence() {
        let rho = gain_leaking(vec![0.5, 0.5]);
        let sp = spec(2, 100);
        let e = check_axiom(&rho, AxiomId::A3LossDependence, &sp, &Tolerances::default());
        assert_eq!(e.verdict, Verdict::Fail);
        let Some(Counterexample::LossDependence { m, residual }) = &e.counterexample else {
            panic!("expected a loss-dependence counterexample");
        };
        assert!(m.iter().any(|&x| x > 0.0));
        let expected: f64 = m.iter().map(|x| 0.5 * x.max(0.0)).sum();
        assert!((residual - expected).abs() < 1e-12);
    }

    #[test]
    fn entropic_fails_homogeneity_at_known_point() {
        let rho = entropic_loss(vec![0.5, 0.5], 1.0).unwrap();
        let m = PortfolioSample::single_block(vec![-1.0, 0.0]).unwrap();
        let lhs = rho.evaluate(&m.scaled(2.0).unwrap()).unwrap();
        let rhs = 2.0 * rho.evaluate(&m).unwrap();
        assert!((lhs - 1.433_780_830_483_027_2).abs() < 1e-12);
        assert!((rhs - 1.240_229_013_916_555).abs() < 1e-12);
        let e = check_axiom(&rho, AxiomId::A5PositiveHomogeneity, &spec(2, 200), &Tolerances::default());
        assert_eq!(e.verdict, Verdict::Fail);
        assert!(matches!(e.counterexample, Some(Counterexample::Homogeneity { .. })));
    }

    #[test]
    fn zero_cash_requires_zero_risk() {
        let rho = crate::statistics::FnStatistic::new(
            "shifted",
            crate::statistics::Claims::default(),
            Some(1),
            |m| 0.5 - m.values()[0].min(0.0),
        );
        let e = check_axiom(&rho, AxiomId::A1Normalization, &spec(1, 10), &Tolerances::default());
        assert_eq!(e.verdict, Verdict::Fail);
        assert!((e.worst_residual - 0.5).abs() < 1e-12);
    }

    #[test]
    fn codomain_violation_reported_under_normalization() {
        let rho = inverted_loss(vec![1.0]);
        let e = check_axiom(&rho, AxiomId::A1Normalization, &spec(1, 50), &Tolerances::default());
        assert_eq!(e.verdict, Verdict::Fail);
        assert_eq!(e.codomain_violation, Some(true));
    }

    #[test]
    fn inverted_fixture_fails_monotonicity() {
        let rho = inverted_loss(vec![0.5, 0.5]);
        let e = check_axiom(&rho, AxiomId::A2Monotonicity, &spec(2, 200), &Tolerances::default());
        assert_eq!(e.verdict, Verdict::Fail);
    }

    #[test]
    fn suite_verdicts() {
        let sp = SamplerSpec::new(Partition::new(vec![2, 2]).unwrap(), 300, 5);
        let tol = Tolerances::default();
        let ws = worst_scenario(Partition::new(vec![2, 2]).unwrap());
        assert_eq!(run_suite(&ws, &sp, &tol).verdict, SuiteVerdict::CoherentRegulatorBased);

        let ent = entropic_loss(vec![0.25; 4], 0.7).unwrap();
        let r = run_suite(&ent, &sp, &tol);
        assert_eq!(r.verdict, SuiteVerdict::ConvexRegulatorBased);
        assert_eq!(r.entry(AxiomId::A5PositiveHomogeneity).unwrap().verdict, Verdict::NotApplicable);

        let leak = gain_leaking(vec![0.25; 4]);
        let r = run_suite(&leak, &sp, &tol);
        assert_eq!(r.verdict, SuiteVerdict::Fail);
        assert_eq!(r.entry(AxiomId::A3LossDependence).unwrap().verdict, Verdict::Fail);
    }

    #[test]
    fn dimension_mismatch_is_an_error_entry() {
        let e = check_axiom(&wl(&[1.0]), AxiomId::A4Convexity, &spec(3, 10), &Tolerances::default());
        assert_eq!(e.verdict, Verdict::Error);
        assert_eq!(e.errors.len(), 1);
    }

    #[test]
    fn counterexamples_reevaluate() {
        let sp = spec(2, 300);
        let like = PortfolioSample::single_block(vec![0.0, 0.0]).unwrap();
        let tol = Tolerances::default();
        let cases: Vec<(Box<dyn RiskStatistic>, AxiomId)> = vec![
            (Box::new(gain_leaking(vec![0.5, 0.5])), AxiomId::A3LossDependence),
            (Box::new(inverted_loss(vec![0.5, 0.5])), AxiomId::A2Monotonicity),
            (Box::new(inverted_loss(vec![0.5, 0.5])), AxiomId::A1Normalization),
            (Box::new(entropic_loss(vec![0.5, 0.5], 1.0).unwrap()), AxiomId::A5PositiveHomogeneity),
        ];
        for (rho, axiom) in cases {
            let e = check_axiom(rho.as_ref(), axiom, &sp, &tol);
            let cex = e.counterexample.expect("fixture must fail");
            let again = cex.reevaluate(rho.as_ref(), &like).unwrap();
            assert!((again - cex.residual()).abs() <= 1e-12, "{axiom:?}");
        }
    }

    #[test]
    fn reports_are_deterministic() {
        let sp = spec(3, 200);
        let ent = entropic_loss(vec![0.2, 0.3, 0.5], 2.0).unwrap();
        let a = serde_json::to_string(&run_suite(&ent, &sp, &Tolerances::default())).unwrap();
        let b = serde_json::to_string(&run_suite(&ent, &sp, &Tolerances::default())).unwrap();
        assert_eq!(a, b);
    }
}

//! Minimal penalty `α_min(Q) = sup_M { −Σ Q_i·X_i − ρ(M) }` on a finite set
//! of weight vectors.
//!
//! For a loss-dependent `ρ` and `Q ≥ 0` the supremum can be taken over
//! `M ≤ 0`, and we approximate it on the box `[−L, 0]^N`:
//!
//! 1. a coarse lattice over the box,
//! 2. a few rounds of local lattice refinement around the incumbent,
//! 3. line-search ascent along the coordinate axes and the diagonal.
//!
//! The objective is concave in `M` when `ρ` is convex, so every line
//! search is over a unimodal function. Divergence is detected by repeating
//! the search on doubled boxes.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::grid::{PenaltyGrid, PenaltyPoint};
use super::DualityError;
use crate::statistics::{Claim, RiskStatistic};
use crate::types::{ExtendedValue, Partition, PortfolioSample, WeightVector};

const GOLDEN: f64 = 0.618_033_988_749_894_9;
const LINE_SEARCH_ITERS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConjugationParams {
    /// Search box `[−L, 0]^N`.
    pub box_bound: f64,
    /// Coarse lattice points per axis.
    pub axis_points: usize,
    /// Rounds of local lattice refinement.
    pub refinement_rounds: usize,
    /// Incumbents above this are declared `+∞`.
    pub divergence_threshold: f64,
    /// Maximum rounds of line-search ascent.
    pub ascent_steps: usize,
    /// Number of box doublings `L → 2L`.
    pub expansions: usize,
    /// Relative growth across the doublings that counts as divergence.
    pub growth_tol: f64,
    /// Scale below which growth is measured absolutely.
    pub growth_floor: f64,
    /// Values in `[−zero_floor, 0)` are clamped to 0.
    pub zero_floor: f64,
    /// Cap on lattice points per search; the per-axis count shrinks to fit.
    pub max_lattice_points: usize,
}

impl Default for ConjugationParams {
    fn default() -> Self {
        Self {
            box_bound: 100.0,
            axis_points: 9,
            refinement_rounds: 2,
            divergence_threshold: 1e6,
            ascent_steps: 200,
            expansions: 2,
            growth_tol: 0.10,
            growth_floor: 1e-3,
            zero_floor: 1e-9,
            max_lattice_points: 20_000,
        }
    }
}

impl ConjugationParams {
    pub fn validate(&self) -> Result<(), DualityError> {
        let bad = |what: &str| Err(DualityError::InvalidParams(what.to_owned()));
        if !(self.box_bound.is_finite() && self.box_bound > 0.0) {
            return bad("box bound must be positive");
        }
        if !(self.divergence_threshold.is_finite() && self.divergence_threshold > 0.0) {
            return bad("divergence threshold must be positive");
        }
        if self.axis_points < 2 {
            return bad("axis points must be >= 2");
        }
        if !(self.growth_tol > 0.0 && self.growth_floor > 0.0 && self.zero_floor >= 0.0) {
            return bad("growth and floor tolerances must be positive");
        }
        Ok(())
    }

    fn per_axis(&self, n: usize) -> usize {
        let mut k = self.axis_points;
        while k > 2 && (k as f64).powi(n as i32) > self.max_lattice_points as f64 {
            k -= 1;
        }
        k
    }
}

/// `g(M) = −Σ Q_i X_i − ρ(M)` on a fixed partition.
struct Objective<'a> {
    rho: &'a dyn RiskStatistic,
    q: &'a [f64],
    partition: &'a Arc<Partition>,
    evaluations: usize,
}

impl Objective<'_> {
    fn eval(&mut self, x: &[f64]) -> Result<f64, DualityError> {
        self.evaluations += 1;
        let m = PortfolioSample::with_shared_partition(x.to_vec(), Arc::clone(self.partition))
            .map_err(|e| DualityError::Evaluation {
                m: x.to_vec(),
                message: e.to_string(),
            })?;
        let rho = self.rho.evaluate(&m).map_err(|e| DualityError::Evaluation {
            m: x.to_vec(),
            message: e.to_string(),
        })?;
        let linear: f64 = self.q.iter().zip(x).map(|(q, x)| -q * x).sum();
        let g = linear - rho;
        if !g.is_finite() {
            return Err(DualityError::NonFinite {
                m: x.to_vec(),
                value: g,
            });
        }
        Ok(g)
    }
}

#[derive(Debug, Clone)]
struct Incumbent {
    x: Vec<f64>,
    value: f64,
}

impl Incumbent {
    fn offer(&mut self, x: &[f64], value: f64) -> bool {
        if value > self.value {
            self.value = value;
            self.x.copy_from_slice(x);
            true
        } else {
            false
        }
    }
}

/// Max of `g` over the lattice `lo + step·j`, `j = 0..k` per axis, clipped to `[−l, 0]`.
fn scan_lattice(
    g: &mut Objective<'_>,
    lo: &[f64],
    step: f64,
    k: usize,
    l: f64,
    best: &mut Incumbent,
) -> Result<(), DualityError> {
    let n = lo.len();
    let mut idx = vec![0usize; n];
    let mut x = vec![0.0; n];
    loop {
        for i in 0..n {
            x[i] = (lo[i] + step * idx[i] as f64).clamp(-l, 0.0);
        }
        let v = g.eval(&x)?;
        best.offer(&x, v);
        let mut pos = 0;
        loop {
            if pos == n {
                return Ok(());
            }
            idx[pos] += 1;
            if idx[pos] < k {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// Feasible `t` range keeping `x + t·d` inside `[−l, 0]^N`.
fn segment(x: &[f64], d: &[f64], l: f64) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for (&xi, &di) in x.iter().zip(d) {
        if di == 0.0 {
            continue;
        }
        let a = (-l - xi) / di;
        let b = (0.0 - xi) / di;
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        lo = lo.max(a);
        hi = hi.min(b);
    }
    (lo.min(0.0), hi.max(0.0))
}

fn line_search(
    g: &mut Objective<'_>,
    best: &mut Incumbent,
    d: &[f64],
    l: f64,
) -> Result<bool, DualityError> {
    let origin = best.x.clone();
    let (mut a, mut b) = segment(&origin, d, l);
    if b - a <= 0.0 {
        return Ok(false);
    }
    let n = origin.len();
    let mut point = vec![0.0; n];
    let mut improved = false;
    let mut probe = |t: f64, g: &mut Objective<'_>, best: &mut Incumbent| -> Result<f64, DualityError> {
        for i in 0..n {
            point[i] = (origin[i] + t * d[i]).clamp(-l, 0.0);
        }
        let v = g.eval(&point)?;
        improved |= best.offer(&point, v);
        Ok(v)
    };
    probe(a, g, best)?;
    probe(b, g, best)?;
    let mut c = b - GOLDEN * (b - a);
    let mut e = a + GOLDEN * (b - a);
    let mut fc = probe(c, g, best)?;
    let mut fe = probe(e, g, best)?;
    for _ in 0..LINE_SEARCH_ITERS {
        if fc >= fe {
            b = e;
            e = c;
            fe = fc;
            c = b - GOLDEN * (b - a);
            fc = probe(c, g, best)?;
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + GOLDEN * (b - a);
            fe = probe(e, g, best)?;
        }
        if (b - a).abs() <= 1e-12 * (1.0 + l) {
            break;
        }
    }
    Ok(improved)
}

/// Approximate `max g` over `[−l, 0]^N`.
fn maximize_on_box(
    g: &mut Objective<'_>,
    n: usize,
    l: f64,
    params: &ConjugationParams,
) -> Result<Incumbent, DualityError> {
    let k = params.per_axis(n);
    let mut best = Incumbent {
        x: vec![0.0; n],
        value: f64::NEG_INFINITY,
    };
    let mut step = l / (k - 1) as f64;
    scan_lattice(g, &vec![-l; n], step, k, l, &mut best)?;

    for _ in 0..params.refinement_rounds {
        let lo: Vec<f64> = best.x.iter().map(|&x| x - step).collect();
        step = 2.0 * step / (k - 1) as f64;
        scan_lattice(g, &lo, step, k, l, &mut best)?;
    }

    let mut directions: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut d = vec![0.0; n];
            d[i] = 1.0;
            d
        })
        .collect();
    if n > 1 {
        directions.push(vec![1.0; n]);
    }
    for _ in 0..params.ascent_steps {
        let before = best.value;
        for d in &directions {
            line_search(g, &mut best, d, l)?;
        }
        if best.value - before <= 1e-12 * (1.0 + before.abs()) {
            break;
        }
    }
    Ok(best)
}

/// Search trace for one `α_min(Q)` evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConjugateTrace {
    pub value: ExtendedValue,
    /// Best objective value found on each box `L·2^e`.
    pub box_sups: Vec<f64>,
    /// Maximizer found on the largest box searched.
    pub argmax: Vec<f64>,
    pub evaluations: usize,
}

/// `α_min(Q)` for a loss-dependent `ρ` on the given partition.
pub fn alpha_min(
    rho: &dyn RiskStatistic,
    q: &WeightVector,
    partition: &Arc<Partition>,
    params: &ConjugationParams,
) -> Result<ExtendedValue, DualityError> {
    alpha_min_traced(rho, q, partition, params).map(|t| t.value)
}

pub fn alpha_min_traced(
    rho: &dyn RiskStatistic,
    q: &WeightVector,
    partition: &Arc<Partition>,
    params: &ConjugationParams,
) -> Result<ConjugateTrace, DualityError> {
    params.validate()?;
    if !rho.claims().has(Claim::LossDependent) {
        return Err(DualityError::NotLossDependent(rho.name().to_owned()));
    }
    let n = q.len();
    if partition.len() != n {
        return Err(DualityError::DimensionMismatch {
            expected: partition.len(),
            got: n,
        });
    }
    if !q.is_nonnegative() {
        // gains are free for a loss-dependent ρ, so a negative weight diverges
        return Ok(ConjugateTrace {
            value: ExtendedValue::PosInfinite,
            box_sups: Vec::new(),
            argmax: Vec::new(),
            evaluations: 0,
        });
    }

    let mut g = Objective {
        rho,
        q: q.as_slice(),
        partition,
        evaluations: 0,
    };
    let mut sups = Vec::with_capacity(params.expansions + 1);
    let mut argmax = Vec::new();
    let mut l = params.box_bound;
    for _ in 0..=params.expansions {
        let best = maximize_on_box(&mut g, n, l, params)?;
        sups.push(best.value);
        argmax = best.x;
        if best.value > params.divergence_threshold {
            return Ok(ConjugateTrace {
                value: ExtendedValue::PosInfinite,
                box_sups: sups,
                argmax,
                evaluations: g.evaluations,
            });
        }
        l *= 2.0;
    }

    let base = sups[0];
    let top = sups.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let growth = sups[sups.len() - 1] - base;
    let value = if growth > params.growth_tol * base.abs().max(params.growth_floor) {
        ExtendedValue::PosInfinite
    } else if top >= 0.0 {
        ExtendedValue::Finite(top)
    } else if top >= -params.zero_floor {
        ExtendedValue::Finite(0.0)
    } else {
        return Err(DualityError::NegativeConjugate {
            q: q.as_slice().to_vec(),
            value: top,
        });
    };
    Ok(ConjugateTrace {
        value,
        box_sups: sups,
        argmax,
        evaluations: g.evaluations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointFailure {
    pub index: usize,
    pub q: Vec<f64>,
    pub error: String,
}

/// Tabulated `α_min` plus the points whose evaluation failed (stored as `+∞`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Conjugation {
    pub grid: PenaltyGrid,
    pub failures: Vec<PointFailure>,
}

/// `α_min` at every point of `qgrid`, in grid order. Points are processed in
/// parallel on the current rayon pool; output order does not depend on it.
pub fn conjugate_on_grid(
    rho: &dyn RiskStatistic,
    qgrid: &[WeightVector],
    partition: &Arc<Partition>,
    params: &ConjugationParams,
    resolution: Option<usize>,
) -> Result<Conjugation, DualityError> {
    if qgrid.is_empty() {
        return Err(DualityError::EmptyGrid);
    }
    params.validate()?;
    let results: Vec<Result<ExtendedValue, DualityError>> = qgrid
        .par_iter()
        .map(|q| alpha_min(rho, q, partition, params))
        .collect();
    let mut points = Vec::with_capacity(qgrid.len());
    let mut failures = Vec::new();
    for (index, (q, result)) in qgrid.iter().zip(results).enumerate() {
        let alpha = match result {
            Ok(alpha) => alpha,
            Err(err @ (DualityError::NotLossDependent(_) | DualityError::DimensionMismatch { .. })) => {
                return Err(err)
            }
            Err(err) => {
                failures.push(PointFailure {
                    index,
                    q: q.as_slice().to_vec(),
                    error: err.to_string(),
                });
                ExtendedValue::PosInfinite
            }
        };
        points.push(PenaltyPoint { q: q.clone(), alpha });
    }
    let domain = format!("alpha_min({}) on {{Q >= 0, sum Q <= 1}}", rho.name());
    Ok(Conjugation {
        grid: PenaltyGrid::new(points, resolution, domain)?,
        failures,
    })
}

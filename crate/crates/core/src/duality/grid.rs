use serde::Serialize;

use super::DualityError;
use crate::types::{ExtendedValue, WeightVector};

/// Default cap on the number of lattice points in a weight grid.
pub const DEFAULT_MAX_GRID_POINTS: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PenaltyPoint {
    pub q: WeightVector,
    pub alpha: ExtendedValue,
}

/// Tabulated penalty `α` over a finite set of weight vectors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PenaltyGrid {
    points: Vec<PenaltyPoint>,
    resolution: Option<usize>,
    domain: String,
}

impl PenaltyGrid {
    pub fn new(
        points: Vec<PenaltyPoint>,
        resolution: Option<usize>,
        domain: impl Into<String>,
    ) -> Result<Self, DualityError> {
        let first = points.first().ok_or(DualityError::EmptyGrid)?;
        let n = first.q.len();
        for (index, point) in points.iter().enumerate() {
            if point.q.len() != n {
                return Err(DualityError::DimensionMismatch {
                    expected: n,
                    got: point.q.len(),
                });
            }
            if let ExtendedValue::Finite(value) = point.alpha {
                if !(value.is_finite() && value >= 0.0) {
                    return Err(DualityError::NegativePenalty { index, value });
                }
            }
        }
        Ok(Self {
            points,
            resolution,
            domain: domain.into(),
        })
    }

    /// Point `q` with `α = 0` everywhere.
    pub fn zero_penalty(qs: Vec<WeightVector>, domain: impl Into<String>) -> Result<Self, DualityError> {
        let points = qs
            .into_iter()
            .map(|q| PenaltyPoint {
                q,
                alpha: ExtendedValue::Finite(0.0),
            })
            .collect();
        Self::new(points, None, domain)
    }

    pub fn points(&self) -> &[PenaltyPoint] {
        &self.points
    }

    pub fn resolution(&self) -> Option<usize> {
        self.resolution
    }

    pub fn domain(&self) -> &str {
        &self.domain
    }

    pub fn dimension(&self) -> Option<usize> {
        self.points.first().map(|p| p.q.len())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn effective_domain(&self) -> impl Iterator<Item = (usize, &PenaltyPoint)> {
        self.points
            .iter()
            .enumerate()
            .filter(|(_, p)| p.alpha.is_finite())
    }

    /// `max` over finite-penalty points of `Σ Q_i·ℓ_i − α(Q)` with
    /// `ℓ_i = −min(X_i, 0)`, and the first index attaining it.
    pub fn maximize(&self, values: &[f64]) -> Option<(f64, usize)> {
        let mut best: Option<(f64, usize)> = None;
        for (index, point) in self.effective_domain() {
            let alpha = point.alpha.finite().unwrap_or(f64::INFINITY);
            let value = point.q.loss_pairing(values) - alpha;
            if best.is_none_or(|(b, _)| value > b) {
                best = Some((value, index));
            }
        }
        best
    }
}

/// Number of lattice points `k/resolution` with `Σ k_i ≤ resolution`,
/// i.e. `C(resolution + n, n)`. `None` on overflow.
pub fn lattice_size(n: usize, resolution: usize) -> Option<u128> {
    let mut acc: u128 = 1;
    for i in 1..=n as u128 {
        acc = acc.checked_mul(resolution as u128 + i)? / i;
    }
    Some(acc)
}

/// Default per-axis resolution by dimension. `None` means the caller must
/// supply an explicit grid.
pub fn default_resolution(n: usize) -> Option<usize> {
    match n {
        0 => None,
        1..=3 => Some(16),
        4..=6 => Some(8),
        7 | 8 => Some(4),
        _ => None,
    }
}

/// All `Q = k/resolution` with `k ∈ ℕ^n`, `Σ k_i ≤ resolution`, in
/// lexicographic order of `k`.
pub fn weight_grid(
    n: usize,
    resolution: usize,
    max_points: usize,
) -> Result<Vec<WeightVector>, DualityError> {
    if n == 0 {
        return Err(DualityError::InvalidParams("weight grid dimension must be >= 1".into()));
    }
    if resolution < 1 {
        return Err(DualityError::InvalidParams("weight grid resolution must be >= 1".into()));
    }
    let size = lattice_size(n, resolution).unwrap_or(u128::MAX);
    if size > max_points as u128 {
        return Err(DualityError::GridTooLarge {
            points: size,
            max: max_points,
        });
    }
    let mut out = Vec::with_capacity(size as usize);
    let mut k = vec![0usize; n];
    let res = resolution as f64;
    fill(&mut k, 0, resolution, &mut |k| {
        let q = k.iter().map(|&ki| ki as f64 / res).collect();
        out.push(WeightVector::new(q).expect("lattice coordinates are finite"));
    });
    Ok(out)
}

fn fill(k: &mut [usize], pos: usize, budget: usize, emit: &mut dyn FnMut(&[usize])) {
    if pos == k.len() {
        emit(k);
        return;
    }
    for v in 0..=budget {
        k[pos] = v;
        fill(k, pos + 1, budget - v, emit);
    }
    k[pos] = 0;
}

//! Scenario-partitioned data vectors and the small value types shared by
//! every other module.
//!
//! A [`PortfolioSample`] is a flat vector of `N` observations (profit and
//! loss, negative means loss) split into `m` consecutive scenario blocks.
//! All types here are immutable once built.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

/// Slack allowed on `Σ q_i ≤ 1` when flagging a weight vector.
pub const MASS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("sample must contain at least one observation")]
    EmptySample,
    #[error("partition must contain at least one block")]
    EmptyPartition,
    #[error("scenario block {index} is empty")]
    EmptyBlock { index: usize },
    #[error("partition covers {covered} observations but the sample has {len}")]
    PartitionSize { covered: usize, len: usize },
    #[error("observation {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("expected {expected} scenario labels, got {got}")]
    LabelCount { expected: usize, got: usize },
    #[error("cash amount must be finite and nonnegative, got {0}")]
    NegativeCash(f64),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("partition mismatch: {left:?} vs {right:?}")]
    PartitionMismatch { left: Vec<usize>, right: Vec<usize> },
}

/// Block sizes `n_1..n_m` of a scenario partition, with `Σ n_h = N`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Partition {
    sizes: Vec<usize>,
    #[serde(skip)]
    offsets: Vec<usize>,
}

impl Partition {
    pub fn new(sizes: Vec<usize>) -> Result<Self, DataError> {
        if sizes.is_empty() {
            return Err(DataError::EmptyPartition);
        }
        if let Some(index) = sizes.iter().position(|&n| n == 0) {
            return Err(DataError::EmptyBlock { index });
        }
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for &n in &sizes {
            acc += n;
            offsets.push(acc);
        }
        Ok(Self { sizes, offsets })
    }

    /// The one-block partition `m = 1, n_1 = len`.
    pub fn single(len: usize) -> Result<Self, DataError> {
        if len == 0 {
            return Err(DataError::EmptySample);
        }
        Self::new(vec![len])
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn block_count(&self) -> usize {
        self.sizes.len()
    }

    /// Total number of observations covered.
    pub fn len(&self) -> usize {
        *self.offsets.last().expect("offsets never empty")
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index range of block `h` inside the flat data vector.
    pub fn block_range(&self, h: usize) -> std::ops::Range<usize> {
        self.offsets[h]..self.offsets[h + 1]
    }

    pub fn ranges(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        (0..self.sizes.len()).map(move |h| self.block_range(h))
    }
}

/// Data vector `M = (X_1, …, X_N)` together with its scenario partition.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioSample {
    values: Vec<f64>,
    partition: Arc<Partition>,
    labels: Option<Arc<Vec<String>>>,
}

impl PortfolioSample {
    pub fn new(values: Vec<f64>, partition: Partition) -> Result<Self, DataError> {
        Self::with_shared_partition(values, Arc::new(partition))
    }

    /// Sample with the single-block partition.
    pub fn single_block(values: Vec<f64>) -> Result<Self, DataError> {
        let partition = Partition::single(values.len())?;
        Self::new(values, partition)
    }

    pub fn with_shared_partition(
        values: Vec<f64>,
        partition: Arc<Partition>,
    ) -> Result<Self, DataError> {
        if values.is_empty() {
            return Err(DataError::EmptySample);
        }
        if partition.len() != values.len() {
            return Err(DataError::PartitionSize {
                covered: partition.len(),
                len: values.len(),
            });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(DataError::NonFinite { index, value });
        }
        Ok(Self {
            values,
            partition,
            labels: None,
        })
    }

    /// Attach one identifier per scenario block.
    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self, DataError> {
        if labels.len() != self.partition.block_count() {
            return Err(DataError::LabelCount {
                expected: self.partition.block_count(),
                got: labels.len(),
            });
        }
        self.labels = Some(Arc::new(labels));
        Ok(self)
    }

    /// Constant vector `a1 = (a, …, a)` over the given partition.
    pub fn cash_vector(a: CashAmount, partition: Partition) -> Result<Self, DataError> {
        let n = partition.len();
        Self::new(vec![a.get(); n], partition)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn shared_partition(&self) -> &Arc<Partition> {
        &self.partition
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref().map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn block(&self, h: usize) -> &[f64] {
        &self.values[self.partition.block_range(h)]
    }

    /// New sample on the same partition (labels kept).
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self, DataError> {
        let mut out = Self::with_shared_partition(values, Arc::clone(&self.partition))?;
        out.labels = self.labels.clone();
        Ok(out)
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let values: Vec<f64> = self.values.iter().map(|&x| f(x)).collect();
        self.with_values(values)
            .expect("componentwise map of finite data stayed finite")
    }

    /// `M ∧ 0`: componentwise minimum with zero.
    pub fn loss_part(&self) -> Self {
        self.map(|x| x.min(0.0))
    }

    /// `M + c·1`. Fails only if the shift overflows to infinity.
    pub fn shifted(&self, c: f64) -> Result<Self, DataError> {
        self.with_values(self.values.iter().map(|&x| x + c).collect())
    }

    /// `s·M`.
    pub fn scaled(&self, s: f64) -> Result<Self, DataError> {
        self.with_values(self.values.iter().map(|&x| s * x).collect())
    }

    /// `λ·self + (1−λ)·other` on a shared partition.
    pub fn convex_combination(&self, other: &Self, lambda: f64) -> Result<Self, DataError> {
        self.check_compatible(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| lambda * a + (1.0 - lambda) * b)
            .collect();
        self.with_values(values)
    }

    /// Largest component.
    pub fn max_component(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Componentwise order `self ≤ other`. Exact comparison, no tolerance.
    pub fn leq(&self, other: &Self) -> Result<bool, DataError> {
        self.check_compatible(other)?;
        Ok(self.values.iter().zip(&other.values).all(|(a, b)| a <= b))
    }

    pub fn check_compatible(&self, other: &Self) -> Result<(), DataError> {
        if self.len() != other.len() {
            return Err(DataError::DimensionMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        if self.partition.sizes() != other.partition.sizes() {
            return Err(DataError::PartitionMismatch {
                left: self.partition.sizes().to_vec(),
                right: other.partition.sizes().to_vec(),
            });
        }
        Ok(())
    }
}

/// A point `Q ∈ ℝ^N` of the dual domain. Domain flags are always recomputed
/// from the coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    q: Vec<f64>,
    nonnegative: bool,
    sub_unit_mass: bool,
}

impl WeightVector {
    pub fn new(q: Vec<f64>) -> Result<Self, DataError> {
        if q.is_empty() {
            return Err(DataError::EmptySample);
        }
        if let Some((index, &value)) = q.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(DataError::NonFinite { index, value });
        }
        let nonnegative = q.iter().all(|&x| x >= 0.0);
        let sub_unit_mass = q.iter().sum::<f64>() <= 1.0 + MASS_TOL;
        Ok(Self {
            q,
            nonnegative,
            sub_unit_mass,
        })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.q
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.q.iter().sum()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.nonnegative
    }

    pub fn has_sub_unit_mass(&self) -> bool {
        self.sub_unit_mass
    }

    /// Inside `{Q ≥ 0, Σ Q_i ≤ 1}`.
    pub fn in_sub_simplex(&self) -> bool {
        self.nonnegative && self.sub_unit_mass
    }

    /// `Σ q_i·ℓ_i` where `ℓ_i = −min(X_i, 0)` are the losses of `values`.
    pub fn loss_pairing(&self, values: &[f64]) -> f64 {
        self.q
            .iter()
            .zip(values)
            .map(|(&q, &x)| q * loss_of(x))
            .sum()
    }
}

impl Serialize for WeightVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.q.serialize(serializer)
    }
}

/// Loss carried by one observation: `−min(x, 0) ≥ 0`.
#[inline]
pub fn loss_of(x: f64) -> f64 {
    // 0.0 - min(x, 0) never yields -0.0
    0.0 - x.min(0.0)
}

/// Element of `[0, +∞]`. Infinity is explicit, never a large float.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedValue {
    Finite(f64),
    PosInfinite,
}

impl ExtendedValue {
    pub fn is_finite(self) -> bool {
        matches!(self, Self::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Self::Finite(v) => Some(v),
            Self::PosInfinite => None,
        }
    }

    /// Total order with `PosInfinite` on top.
    pub fn le(self, other: Self) -> bool {
        match (self, other) {
            (_, Self::PosInfinite) => true,
            (Self::PosInfinite, Self::Finite(_)) => false,
            (Self::Finite(a), Self::Finite(b)) => a <= b,
        }
    }
}

impl fmt::Display for ExtendedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(v) => write!(f, "{v}"),
            Self::PosInfinite => f.write_str("inf"),
        }
    }
}

impl Serialize for ExtendedValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Finite(v) => serializer.serialize_f64(*v),
            Self::PosInfinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtendedValue {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(v) => Ok(Self::Finite(v)),
            Raw::Text(s) if s == "inf" => Ok(Self::PosInfinite),
            Raw::Text(s) => Err(serde::de::Error::custom(format!(
                "expected a number or \"inf\", got {s:?}"
            ))),
        }
    }
}

/// Nonnegative cash amount `a` of a constant vector `a1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct CashAmount(f64);

impl CashAmount {
    pub fn new(a: f64) -> Result<Self, DataError> {
        if a.is_finite() && a >= 0.0 {
            Ok(Self(a))
        } else {
            Err(DataError::NegativeCash(a))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(values: &[f64]) -> PortfolioSample {
        PortfolioSample::single_block(values.to_vec()).unwrap()
    }

    #[test]
    fn loss_part_examples() {
        assert_eq!(sample(&[-1.0, 2.0, 0.0]).loss_part().values(), &[-1.0, 0.0, 0.0]);
        assert_eq!(sample(&[0.0, 0.0]).loss_part().values(), &[0.0, 0.0]);
        assert_eq!(
            sample(&[-3.5, -0.1, 4.2, 7.0]).loss_part().values(),
            &[-3.5, -0.1, 0.0, 0.0]
        );
    }

    #[test]
    fn loss_part_keeps_partition() {
        let m = PortfolioSample::new(vec![1.0, -2.0, 3.0], Partition::new(vec![1, 2]).unwrap())
            .unwrap();
        assert_eq!(m.loss_part().partition().sizes(), &[1, 2]);
    }

    #[test]
    fn cash_vector_examples() {
        let zero = PortfolioSample::cash_vector(CashAmount::new(0.0).unwrap(), Partition::single(3).unwrap()).unwrap();
        assert_eq!(zero.values(), &[0.0, 0.0, 0.0]);
        let two = PortfolioSample::cash_vector(CashAmount::new(2.0).unwrap(), Partition::single(2).unwrap()).unwrap();
        assert_eq!(two.values(), &[2.0, 2.0]);
        let blocks = PortfolioSample::cash_vector(
            CashAmount::new(1.0).unwrap(),
            Partition::new(vec![2, 2]).unwrap(),
        )
        .unwrap();
        assert_eq!(blocks.values(), &[1.0; 4]);
        assert_eq!(blocks.partition().block_range(0), 0..2);
        assert_eq!(blocks.partition().block_range(1), 2..4);
    }

    #[test]
    fn negative_cash_rejected() {
        assert!(matches!(CashAmount::new(-1.0), Err(DataError::NegativeCash(_))));
        assert!(CashAmount::new(f64::NAN).is_err());
    }

    #[test]
    fn leq_examples() {
        assert!(sample(&[-1.0, 0.0]).leq(&sample(&[0.0, 1.0])).unwrap());
        assert!(!sample(&[0.0, 1.0]).leq(&sample(&[1.0, 0.0])).unwrap());
        let m = sample(&[3.0, -2.0]);
        assert!(m.leq(&m).unwrap());
    }

    #[test]
    fn leq_dimension_mismatch() {
        let err = sample(&[1.0]).leq(&sample(&[1.0, 2.0])).unwrap_err();
        assert_eq!(err, DataError::DimensionMismatch { left: 1, right: 2 });
    }

    #[test]
    fn construction_rejects_bad_data() {
        assert!(matches!(
            PortfolioSample::single_block(vec![1.0, f64::NAN]),
            Err(DataError::NonFinite { index: 1, .. })
        ));
        assert!(PortfolioSample::single_block(vec![f64::INFINITY]).is_err());
        assert_eq!(
            PortfolioSample::single_block(vec![]).unwrap_err(),
            DataError::EmptySample
        );
        assert_eq!(
            Partition::new(vec![2, 0]).unwrap_err(),
            DataError::EmptyBlock { index: 1 }
        );
        assert!(matches!(
            PortfolioSample::new(vec![1.0, 2.0, 3.0], Partition::new(vec![1, 1]).unwrap()),
            Err(DataError::PartitionSize { covered: 2, len: 3 })
        ));
    }

    #[test]
    fn weight_flags_recomputed() {
        let w = WeightVector::new(vec![0.5, 0.5]).unwrap();
        assert!(w.in_sub_simplex());
        let w = WeightVector::new(vec![0.7, 0.5]).unwrap();
        assert!(w.is_nonnegative() && !w.has_sub_unit_mass());
        let w = WeightVector::new(vec![-0.1, 0.5]).unwrap();
        assert!(!w.is_nonnegative() && w.has_sub_unit_mass());
    }

    #[test]
    fn extended_value_json() {
        assert_eq!(serde_json::to_string(&ExtendedValue::Finite(0.4)).unwrap(), "0.4");
        assert_eq!(serde_json::to_string(&ExtendedValue::PosInfinite).unwrap(), "\"inf\"");
        let back: ExtendedValue = serde_json::from_str("\"inf\"").unwrap();
        assert_eq!(back, ExtendedValue::PosInfinite);
        assert!(ExtendedValue::Finite(3.0).le(ExtendedValue::PosInfinite));
        assert!(!ExtendedValue::PosInfinite.le(ExtendedValue::Finite(3.0)));
    }

    fn vec_pair(n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (
            prop::collection::vec(-10.0..10.0f64, n),
            prop::collection::vec(-10.0..10.0f64, n),
        )
    }

    proptest! {
        #[test]
        fn loss_part_idempotent(v in prop::collection::vec(-1e3..1e3f64, 1..12)) {
            let m = sample(&v);
            prop_assert_eq!(m.loss_part().loss_part(), m.loss_part());
        }

        #[test]
        fn loss_part_monotone((a, d) in vec_pair(5)) {
            let m1 = sample(&a);
            let m2 = sample(&a.iter().zip(&d).map(|(x, y)| x + y.abs()).collect::<Vec<_>>());
            prop_assert!(m1.leq(&m2).unwrap());
            prop_assert!(m1.loss_part().leq(&m2.loss_part()).unwrap());
        }

        #[test]
        fn leq_partial_order(
            a in prop::collection::vec(-3i32..3, 3),
            b in prop::collection::vec(-3i32..3, 3),
            c in prop::collection::vec(-3i32..3, 3),
        ) {
            // small integer lattice so comparable triples actually occur
            let to = |v: &[i32]| sample(&v.iter().map(|&x| f64::from(x)).collect::<Vec<_>>());
            let (a, b, c) = (to(&a), to(&b), to(&c));
            prop_assert!(a.leq(&a).unwrap());
            if a.leq(&b).unwrap() && b.leq(&a).unwrap() {
                prop_assert_eq!(&a, &b);
            }
            if a.leq(&b).unwrap() && b.leq(&c).unwrap() {
                prop_assert!(a.leq(&c).unwrap());
            }
        }

        #[test]
        fn cash_loss_part_is_zero(a in 0.0..1e6f64, n in 1usize..8) {
            let cash = PortfolioSample::cash_vector(CashAmount::new(a).unwrap(), Partition::single(n).unwrap()).unwrap();
            prop_assert!(cash.loss_part().values().iter().all(|&x| x == 0.0));
        }
    }
}

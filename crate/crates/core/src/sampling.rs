//! Seeded random data vectors for the property checkers.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::types::{Partition, PortfolioSample};

/// Where and how many samples to draw. A fixed seed gives an identical
/// stream.
#[derive(Debug, Clone, Serialize)]
pub struct SamplerSpec {
    #[serde(serialize_with = "serialize_partition")]
    pub partition: Arc<Partition>,
    pub samples: usize,
    pub seed: u64,
    /// Components are drawn from `[-R, R]`.
    pub component_range: f64,
    /// Cash amounts are drawn from `[0, cash_max]`.
    pub cash_max: f64,
    /// Log-uniform range for homogeneity scalars (0 and 1 always added).
    pub scalar_min: f64,
    pub scalar_max: f64,
}

fn serialize_partition<S: serde::Serializer>(p: &Arc<Partition>, s: S) -> Result<S::Ok, S::Error> {
    p.sizes().serialize(s)
}

impl SamplerSpec {
    pub fn new(partition: Partition, samples: usize, seed: u64) -> Self {
        Self {
            partition: Arc::new(partition),
            samples,
            seed,
            component_range: 10.0,
            cash_max: 100.0,
            scalar_min: 1e-3,
            scalar_max: 1e3,
        }
    }

    pub fn dimension(&self) -> usize {
        self.partition.len()
    }

    /// Independent stream for one consumer (an axiom, a check).
    pub fn stream(&self, stream_id: u64) -> Sampler {
        Sampler {
            rng: ChaCha8Rng::seed_from_u64(mix(self.seed, stream_id)),
            partition: Arc::clone(&self.partition),
            range: self.component_range,
            cash_max: self.cash_max,
            scalar_min: self.scalar_min,
            scalar_max: self.scalar_max,
        }
    }
}

// splitmix64 finalizer
fn mix(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub struct Sampler {
    rng: ChaCha8Rng,
    partition: Arc<Partition>,
    range: f64,
    cash_max: f64,
    scalar_min: f64,
    scalar_max: f64,
}

impl Sampler {
    fn build(&self, values: Vec<f64>) -> PortfolioSample {
        PortfolioSample::with_shared_partition(values, Arc::clone(&self.partition))
            .expect("sampled values are finite and sized to the partition")
    }

    /// Components uniform on `[-R, R]`.
    pub fn sample(&mut self) -> PortfolioSample {
        let r = self.range;
        let values = (0..self.partition.len())
            .map(|_| self.rng.gen_range(-r..=r))
            .collect();
        self.build(values)
    }

    /// Components uniform on `[-R, 0]`.
    pub fn nonpositive_sample(&mut self) -> PortfolioSample {
        let r = self.range;
        let values = (0..self.partition.len())
            .map(|_| -self.rng.gen_range(0.0..=r))
            .collect();
        self.build(values)
    }

    /// `m + d` with `d ≥ 0`; each component of `d` is zero with probability
    /// 1/2, otherwise uniform on `[0, R]`.
    pub fn dominating(&mut self, m: &PortfolioSample) -> PortfolioSample {
        let r = self.range;
        let values = m
            .values()
            .iter()
            .map(|&x| {
                if self.rng.gen_bool(0.5) {
                    x
                } else {
                    x + self.rng.gen_range(0.0..=r)
                }
            })
            .collect();
        self.build(values)
    }

    pub fn cash(&mut self) -> f64 {
        self.rng.gen_range(0.0..=self.cash_max)
    }

    /// Signed cash amount on `[-bound, bound]`.
    pub fn signed(&mut self, bound: f64) -> f64 {
        self.rng.gen_range(-bound..=bound)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.gen_range(lo..=hi)
    }

    /// `λ ∈ (0, 1)`.
    pub fn lambda(&mut self) -> f64 {
        loop {
            let l: f64 = self.rng.gen();
            if l > 0.0 {
                return l;
            }
        }
    }

    /// Log-uniform on `[scalar_min, scalar_max]`.
    pub fn homogeneity_scalar(&mut self) -> f64 {
        let (lo, hi) = (self.scalar_min.ln(), self.scalar_max.ln());
        self.rng.gen_range(lo..=hi).exp()
    }
}

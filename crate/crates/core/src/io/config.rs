//! Flat `key = value` run configuration. Lines starting with `#` are
//! comments. Every key is listed in [`KNOWN_KEYS`]; anything else is an
//! error.
//!
//! List values are comma separated. A penalty table is a `;`-separated list
//! of `q1,q2,…:alpha` entries, where `alpha` may be `inf`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use super::IoError;
use crate::axioms::Tolerances;
use crate::duality::{ConjugationParams, DualCheckOptions, NormalizationMode};
use crate::types::ExtendedValue;

pub const KNOWN_KEYS: &[&str] = &[
    "statistic.kind",
    "statistic.weights",
    "statistic.partition",
    "statistic.penalty",
    "statistic.p",
    "statistic.beta",
    "duality.resolution",
    "duality.box",
    "duality.axis_points",
    "duality.refinement_rounds",
    "duality.divergence_threshold",
    "duality.ascent_steps",
    "duality.expansions",
    "duality.max_grid_points",
    "duality.samples",
    "duality.rel_tol",
    "duality.zero_tol",
    "duality.infinity_threshold",
    "duality.epsilons",
    "duality.normalization_mode",
    "axioms.samples",
    "axioms.seed",
    "axioms.range",
    "axioms.cash_max",
    "tolerance.equality",
    "tolerance.inequality",
    "tolerance.homogeneity",
    "lift.samples",
    "lift.anchors",
    "lift.tol",
    "output.path",
];

#[derive(Debug, Clone, PartialEq)]
pub enum PartitionRule {
    /// Use the partition of the data file.
    FromData,
    /// One block covering everything.
    Single,
    Explicit(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum StatisticSpec {
    WeightedLoss { weights: Vec<f64> },
    WorstScenario { partition: PartitionRule },
    Penalized { table: Vec<(Vec<f64>, ExtendedValue)> },
    Entropic { p: Vec<f64>, beta: f64 },
    GainLeaking { weights: Vec<f64> },
    InvertedLoss { weights: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Raw key/value pairs, echoed into reports.
    pub entries: BTreeMap<String, String>,
    pub statistic: StatisticSpec,
    /// Explicit sample-space partition for runs without data.
    pub partition: PartitionRule,
    pub conjugation: ConjugationParams,
    pub resolution: Option<usize>,
    pub max_grid_points: usize,
    pub dual: DualCheckOptions,
    pub dual_samples: usize,
    pub epsilons: Vec<f64>,
    pub normalization_mode: NormalizationMode,
    pub axiom_samples: usize,
    pub seed: u64,
    pub component_range: f64,
    pub cash_max: f64,
    pub tolerances: Tolerances,
    pub lift_samples: usize,
    pub lift_anchors: usize,
    pub lift_tol: f64,
    pub output: Option<PathBuf>,
}

fn bad(key: &str, message: impl Into<String>) -> IoError {
    IoError::Config {
        key: key.to_owned(),
        message: message.into(),
    }
}

fn parse_f64(key: &str, raw: &str) -> Result<f64, IoError> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| bad(key, format!("not a number: {raw:?}")))?;
    if !v.is_finite() {
        return Err(bad(key, format!("must be finite: {raw:?}")));
    }
    Ok(v)
}

fn parse_list(key: &str, raw: &str) -> Result<Vec<f64>, IoError> {
    let items: Vec<&str> = raw.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(bad(key, "empty list"));
    }
    items.iter().map(|s| parse_f64(key, s)).collect()
}

fn parse_sizes(key: &str, raw: &str) -> Result<Vec<usize>, IoError> {
    raw.split(',')
        .map(str::trim)
        .map(|s| {
            s.parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| bad(key, format!("block sizes must be positive integers: {raw:?}")))
        })
        .collect()
}

fn parse_partition(key: &str, raw: &str) -> Result<PartitionRule, IoError> {
    match raw.trim() {
        "data" => Ok(PartitionRule::FromData),
        "single" => Ok(PartitionRule::Single),
        other => parse_sizes(key, other).map(PartitionRule::Explicit),
    }
}

fn parse_penalty(key: &str, raw: &str) -> Result<Vec<(Vec<f64>, ExtendedValue)>, IoError> {
    let mut table = Vec::new();
    for entry in raw.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let (q, alpha) = entry
            .split_once(':')
            .ok_or_else(|| bad(key, format!("entry {entry:?} is not of the form q1,q2:alpha")))?;
        let q = parse_list(key, q)?;
        let alpha = match alpha.trim() {
            "inf" => ExtendedValue::PosInfinite,
            other => {
                let a = parse_f64(key, other)?;
                if a < 0.0 {
                    return Err(bad(key, format!("penalties must be nonnegative: {other}")));
                }
                ExtendedValue::Finite(a)
            }
        };
        table.push((q, alpha));
    }
    if table.is_empty() {
        return Err(bad(key, "empty penalty table"));
    }
    Ok(table)
}

struct Fields {
    entries: BTreeMap<String, String>,
}

impl Fields {
    fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn require(&self, key: &str) -> Result<&str, IoError> {
        self.get(key).ok_or_else(|| bad(key, "required"))
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64, IoError> {
        self.get(key).map_or(Ok(default), |raw| parse_f64(key, raw))
    }

    fn positive_or(&self, key: &str, default: f64) -> Result<f64, IoError> {
        let v = self.f64_or(key, default)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(bad(key, format!("must be positive, got {v}")))
        }
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize, IoError> {
        self.get(key).map_or(Ok(default), |raw| {
            raw.trim()
                .parse()
                .map_err(|_| bad(key, format!("not a nonnegative integer: {raw:?}")))
        })
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, IoError> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| IoError::ConfigSyntax {
                line: i + 1,
                message: format!("expected key = value, got {line:?}"),
            })?;
            let key = key.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(IoError::ConfigSyntax {
                    line: i + 1,
                    message: format!("unknown key {key:?}"),
                });
            }
            if entries.insert(key.to_owned(), value.trim().to_owned()).is_some() {
                return Err(IoError::ConfigSyntax {
                    line: i + 1,
                    message: format!("duplicate key {key:?}"),
                });
            }
        }
        Self::from_fields(Fields { entries })
    }

    fn from_fields(f: Fields) -> Result<Self, IoError> {
        let partition = f
            .get("statistic.partition")
            .map_or(Ok(PartitionRule::FromData), |raw| parse_partition("statistic.partition", raw))?;
        let kind = f.require("statistic.kind")?;
        let weights = || parse_list("statistic.weights", f.require("statistic.weights")?);
        let statistic = match kind {
            "weighted_loss" => StatisticSpec::WeightedLoss { weights: weights()? },
            "worst_scenario" => StatisticSpec::WorstScenario {
                partition: partition.clone(),
            },
            "penalized" => StatisticSpec::Penalized {
                table: parse_penalty("statistic.penalty", f.require("statistic.penalty")?)?,
            },
            "entropic" => StatisticSpec::Entropic {
                p: parse_list("statistic.p", f.require("statistic.p")?)?,
                beta: parse_f64("statistic.beta", f.require("statistic.beta")?)?,
            },
            "gain_leaking" => StatisticSpec::GainLeaking { weights: weights()? },
            "inverted_loss" => StatisticSpec::InvertedLoss { weights: weights()? },
            other => return Err(bad("statistic.kind", format!("unknown statistic {other:?}"))),
        };

        let defaults = ConjugationParams::default();
        let axis_points = f.usize_or("duality.axis_points", defaults.axis_points)?;
        if axis_points < 2 {
            return Err(bad("duality.axis_points", "must be >= 2"));
        }
        let conjugation = ConjugationParams {
            box_bound: f.positive_or("duality.box", defaults.box_bound)?,
            axis_points,
            refinement_rounds: f.usize_or("duality.refinement_rounds", defaults.refinement_rounds)?,
            divergence_threshold: f
                .positive_or("duality.divergence_threshold", defaults.divergence_threshold)?,
            ascent_steps: f.usize_or("duality.ascent_steps", defaults.ascent_steps)?,
            expansions: f.usize_or("duality.expansions", defaults.expansions)?,
            ..defaults
        };
        let resolution = match f.get("duality.resolution") {
            None => None,
            Some(raw) => {
                let r = f.usize_or("duality.resolution", 0)?;
                if r < 1 {
                    return Err(bad("duality.resolution", format!("must be >= 1, got {raw}")));
                }
                Some(r)
            }
        };
        let dual_defaults = DualCheckOptions::default();
        let dual = DualCheckOptions {
            rel_tol: f.positive_or("duality.rel_tol", dual_defaults.rel_tol)?,
            zero_tol: f.positive_or("duality.zero_tol", dual_defaults.zero_tol)?,
            infinity_threshold: f
                .positive_or("duality.infinity_threshold", dual_defaults.infinity_threshold)?,
        };
        let epsilons = match f.get("duality.epsilons") {
            None => vec![0.1, 0.25, 0.5],
            Some(raw) => parse_list("duality.epsilons", raw)?,
        };
        if let Some(e) = epsilons.iter().find(|&&e| !(e > 0.0 && e < 1.0)) {
            return Err(bad("duality.epsilons", format!("each epsilon must lie in (0, 1), got {e}")));
        }
        let normalization_mode = match f.get("duality.normalization_mode").unwrap_or("both") {
            "literal" => NormalizationMode::Literal,
            "derived" => NormalizationMode::Derived,
            "both" => NormalizationMode::Both,
            other => return Err(bad("duality.normalization_mode", format!("unknown mode {other:?}"))),
        };
        let tol_defaults = Tolerances::default();
        let seed = match f.get("axioms.seed") {
            None => 0,
            Some(raw) => raw
                .trim()
                .parse()
                .map_err(|_| bad("axioms.seed", format!("not a u64: {raw:?}")))?,
        };

        Ok(Self {
            statistic,
            partition,
            conjugation,
            resolution,
            max_grid_points: f.usize_or("duality.max_grid_points", crate::duality::DEFAULT_MAX_GRID_POINTS)?,
            dual,
            dual_samples: f.usize_or("duality.samples", 100)?,
            epsilons,
            normalization_mode,
            axiom_samples: f.usize_or("axioms.samples", 1000)?,
            seed,
            component_range: f.positive_or("axioms.range", 10.0)?,
            cash_max: f.positive_or("axioms.cash_max", 100.0)?,
            tolerances: Tolerances {
                equality: f.positive_or("tolerance.equality", tol_defaults.equality)?,
                inequality: f.positive_or("tolerance.inequality", tol_defaults.inequality)?,
                homogeneity: f.positive_or("tolerance.homogeneity", tol_defaults.homogeneity)?,
            },
            lift_samples: f.usize_or("lift.samples", 1000)?,
            lift_anchors: f.usize_or("lift.anchors", 10)?,
            lift_tol: f.positive_or("lift.tol", 1e-9)?,
            output: f.get("output.path").map(PathBuf::from),
            entries: f.entries,
        })
    }
}

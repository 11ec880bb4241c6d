//! `lossrisk <eval|conjugate|dualcheck|axioms|lift> --config PATH [--data PATH]
//! [--out PATH] [--seed U64] [--workers K]`
//!
//! Exit codes: 0 success or passing check, 1 failing check, 2 usage, config
//! or data error.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::axioms::{run_suite, SuiteVerdict, Tolerances};
use crate::duality::{
    check_normalization_condition, classify_coherence, conjugate_on_grid, default_resolution,
    dual_check, weight_grid, DualityError, PenaltyGrid, PenaltyPoint, PointFailure,
};
use crate::io::{read_scenarios, IoError, PartitionRule, ReportDocument, RunConfig, StatisticSpec};
use crate::sampling::SamplerSpec;
use crate::statistics::{
    cash_additive_lift, check_cash_loss_additivity, entropic_loss, gain_leaking, inverted_loss,
    penalized_statistic, regulator_version, weighted_loss, worst_scenario, AnchorRule, Claims,
    CashLossAdditivityReport, RiskStatistic, SharedStatistic, StatisticError, TransformRecord,
    WorstScenario,
};
use crate::types::{DataError, Partition, PortfolioSample, WeightVector};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

const DUALCHECK_STREAM: u64 = 0xD0A1;
const LIFT_STREAM: u64 = 0x11F7;

#[derive(Debug, Parser)]
#[command(name = "lossrisk", version, about = "Loss-based risk statistics on scenario data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate the configured statistic on the data.
    Eval(CommonArgs),
    /// Tabulate the minimal penalty on the configured weight grid.
    Conjugate(CommonArgs),
    /// Compare the statistic with its reconstruction from the minimal penalty.
    Dualcheck(CommonArgs),
    /// Sample-check the axioms.
    Axioms(CommonArgs),
    /// Cash-additive lift and regulator-version round trip.
    Lift(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Statistic(#[from] StatisticError),
    #[error(transparent)]
    Duality(#[from] DualityError),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Result of one CLI invocation.
#[derive(Debug)]
pub struct Outcome {
    pub code: i32,
    pub report: Option<ReportDocument>,
    /// Canonical JSON of `report`, newline-terminated.
    pub json: Option<String>,
    /// Help text, version, or error message.
    pub message: Option<String>,
}

impl Outcome {
    fn error(err: CliError) -> Self {
        Self {
            code: EXIT_USAGE,
            report: None,
            json: None,
            message: Some(err.to_string()),
        }
    }
}

/// Parse `argv` (including the program name) and run. If `--out` or
/// `output.path` is set the report is also written there.
pub fn run_command<I, T>(argv: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            return Outcome {
                code,
                report: None,
                json: None,
                message: Some(e.to_string()),
            };
        }
    };
    let (name, args) = match &cli.command {
        Command::Eval(a) => ("eval", a),
        Command::Conjugate(a) => ("conjugate", a),
        Command::Dualcheck(a) => ("dualcheck", a),
        Command::Axioms(a) => ("axioms", a),
        Command::Lift(a) => ("lift", a),
    };
    match execute(name, args) {
        Ok(outcome) => outcome,
        Err(err) => Outcome::error(err),
    }
}

struct Context {
    config: RunConfig,
    data: Option<PortfolioSample>,
    partition: Arc<Partition>,
    statistic: Built,
    seed: u64,
}

fn read_file(path: &Path) -> Result<Vec<u8>, IoError> {
    std::fs::read(path).map_err(|e| IoError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn digest(config: &[u8], data: Option<&[u8]>) -> String {
    let mut h = Sha256::new();
    h.update(b"config\0");
    h.update(config);
    if let Some(d) = data {
        h.update(b"\0data\0");
        h.update(d);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn execute(name: &str, args: &CommonArgs) -> Result<Outcome, CliError> {
    let config_bytes = read_file(&args.config)?;
    let config_text = String::from_utf8(config_bytes.clone()).map_err(|_| IoError::Io {
        path: args.config.display().to_string(),
        message: "config is not valid UTF-8".into(),
    })?;
    let config = RunConfig::parse(&config_text)?;
    let (data, data_bytes) = match &args.data {
        Some(path) => {
            let bytes = read_file(path)?;
            let sample = read_scenarios(bytes.as_slice(), &path.display().to_string())?;
            (Some(sample), Some(bytes))
        }
        None => (None, None),
    };
    if matches!(name, "eval" | "lift") && data.is_none() {
        return Err(CliError::Usage(format!("`{name}` requires --data")));
    }

    let partition = Arc::new(sample_space(&config, data.as_ref())?);
    let statistic = build_statistic(&config.statistic, &partition)?;
    if let Some(n) = statistic.shared().dimension() {
        if n != partition.len() {
            return Err(CliError::Usage(format!(
                "statistic {} has dimension {n} but the data has {} observations",
                statistic.shared().name(),
                partition.len()
            )));
        }
    }
    let seed = args.seed.unwrap_or(config.seed);
    let ctx = Context {
        config,
        data,
        partition,
        statistic,
        seed,
    };

    let run = || -> Result<(Value, i32), CliError> {
        match name {
            "eval" => cmd_eval(&ctx),
            "conjugate" => cmd_conjugate(&ctx),
            "dualcheck" => cmd_dualcheck(&ctx),
            "axioms" => cmd_axioms(&ctx),
            "lift" => cmd_lift(&ctx),
            other => Err(CliError::Usage(format!("unknown command {other}"))),
        }
    };
    let (result, code) = match args.workers {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .map_err(|e| CliError::Usage(e.to_string()))?
            .install(run)?,
        None => run()?,
    };

    let doc = ReportDocument {
        tool: "lossrisk".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: name.into(),
        input_digest: digest(&config_bytes, data_bytes.as_deref()),
        config: ctx.config.entries.clone(),
        seed: ctx.seed,
        result,
    };
    let mut json = crate::io::canonical_json(&doc).map_err(|e| CliError::Usage(e.to_string()))?;
    json.push('\n');
    if let Some(out) = args.out.as_ref().or(ctx.config.output.as_ref()) {
        std::fs::write(out, &json).map_err(|e| IoError::Io {
            path: out.display().to_string(),
            message: e.to_string(),
        })?;
    }
    Ok(Outcome {
        code,
        report: Some(doc),
        json: Some(json),
        message: None,
    })
}

fn spec_dimension(spec: &StatisticSpec) -> Option<usize> {
    match spec {
        StatisticSpec::WeightedLoss { weights }
        | StatisticSpec::GainLeaking { weights }
        | StatisticSpec::InvertedLoss { weights } => Some(weights.len()),
        StatisticSpec::Entropic { p, .. } => Some(p.len()),
        StatisticSpec::Penalized { table } => table.first().map(|(q, _)| q.len()),
        StatisticSpec::WorstScenario { .. } => None,
    }
}

fn sample_space(config: &RunConfig, data: Option<&PortfolioSample>) -> Result<Partition, CliError> {
    if let Some(m) = data {
        return Ok(m.partition().clone());
    }
    match &config.partition {
        PartitionRule::Explicit(sizes) => Ok(Partition::new(sizes.clone())?),
        PartitionRule::Single | PartitionRule::FromData => match spec_dimension(&config.statistic) {
            Some(n) => Ok(Partition::single(n)?),
            None => Err(CliError::Usage(
                "no data given and the statistic does not fix a dimension; set statistic.partition".into(),
            )),
        },
    }
}

enum Built {
    Worst(Arc<WorstScenario>),
    Other(SharedStatistic),
}

impl Built {
    fn shared(&self) -> SharedStatistic {
        match self {
            Built::Worst(w) => Arc::clone(w) as SharedStatistic,
            Built::Other(s) => Arc::clone(s),
        }
    }
}

fn build_statistic(spec: &StatisticSpec, space: &Arc<Partition>) -> Result<Built, CliError> {
    let weights = |w: &[f64]| -> Result<WeightVector, CliError> { Ok(WeightVector::new(w.to_vec())?) };
    Ok(match spec {
        StatisticSpec::WeightedLoss { weights: w } => Built::Other(Arc::new(weighted_loss(weights(w)?)?)),
        StatisticSpec::WorstScenario { partition } => {
            let p = match partition {
                PartitionRule::FromData => space.as_ref().clone(),
                PartitionRule::Single => Partition::single(space.len())?,
                PartitionRule::Explicit(sizes) => Partition::new(sizes.clone())?,
            };
            Built::Worst(Arc::new(worst_scenario(p)))
        }
        StatisticSpec::Penalized { table } => {
            let points = table
                .iter()
                .map(|(q, alpha)| Ok(PenaltyPoint { q: weights(q)?, alpha: *alpha }))
                .collect::<Result<Vec<_>, CliError>>()?;
            let grid = PenaltyGrid::new(points, None, "configured penalty table")?;
            Built::Other(Arc::new(penalized_statistic(grid)?))
        }
        StatisticSpec::Entropic { p, beta } => Built::Other(Arc::new(entropic_loss(p.clone(), *beta)?)),
        StatisticSpec::GainLeaking { weights: w } => Built::Other(Arc::new(gain_leaking(w.clone()))),
        StatisticSpec::InvertedLoss { weights: w } => Built::Other(Arc::new(inverted_loss(w.clone()))),
    })
}

fn to_value<T: Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Usage(e.to_string()))
}

#[derive(Serialize)]
struct EvalResult<'a> {
    statistic: &'a str,
    claims: &'a Claims,
    partition: &'a [usize],
    value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    worst_block: Option<String>,
}

fn cmd_eval(ctx: &Context) -> Result<(Value, i32), CliError> {
    let m = ctx.data.as_ref().expect("eval requires data");
    let rho = ctx.statistic.shared();
    let (value, worst_block) = match &ctx.statistic {
        Built::Worst(w) => {
            let (v, h) = w.evaluate_with_argmax(m)?;
            let label = m.labels().map(|l| l[h].clone()).unwrap_or_else(|| format!("block {h}"));
            (v, Some(label))
        }
        Built::Other(s) => (s.evaluate(m)?, None),
    };
    let result = EvalResult {
        statistic: rho.name(),
        claims: rho.claims(),
        partition: m.partition().sizes(),
        value,
        worst_block,
    };
    Ok((to_value(&result)?, EXIT_OK))
}

fn qgrid(ctx: &Context) -> Result<(Vec<WeightVector>, usize), CliError> {
    let n = ctx.partition.len();
    let res = ctx
        .config
        .resolution
        .or_else(|| default_resolution(n))
        .ok_or_else(|| CliError::Usage(format!("dimension {n} needs an explicit duality.resolution")))?;
    Ok((weight_grid(n, res, ctx.config.max_grid_points)?, res))
}

#[derive(Serialize)]
struct ConjugateResult {
    grid: PenaltyGrid,
    failures: Vec<PointFailure>,
    coherence: crate::duality::CoherenceReport,
    normalization: crate::duality::NormalizationReport,
}

fn cmd_conjugate(ctx: &Context) -> Result<(Value, i32), CliError> {
    let rho = ctx.statistic.shared();
    let (grid, res) = qgrid(ctx)?;
    let conj = conjugate_on_grid(rho.as_ref(), &grid, &ctx.partition, &ctx.config.conjugation, Some(res))?;
    let coherence = classify_coherence(&conj.grid, ctx.config.dual.zero_tol, ctx.config.dual.infinity_threshold);
    let normalization =
        check_normalization_condition(&conj.grid, &ctx.config.epsilons, ctx.config.normalization_mode)?;
    let result = ConjugateResult {
        grid: conj.grid,
        failures: conj.failures,
        coherence,
        normalization,
    };
    Ok((to_value(&result)?, EXIT_OK))
}

fn sampler_spec(ctx: &Context, samples: usize) -> SamplerSpec {
    let mut spec = SamplerSpec::new(ctx.partition.as_ref().clone(), samples, ctx.seed);
    spec.component_range = ctx.config.component_range;
    spec.cash_max = ctx.config.cash_max;
    spec
}

fn cmd_dualcheck(ctx: &Context) -> Result<(Value, i32), CliError> {
    let rho = ctx.statistic.shared();
    let (grid, _) = qgrid(ctx)?;
    let spec = sampler_spec(ctx, ctx.config.dual_samples);
    let mut stream = spec.stream(DUALCHECK_STREAM);
    let mut samples: Vec<PortfolioSample> = ctx.data.iter().cloned().collect();
    samples.extend((0..spec.samples).map(|_| stream.sample()));
    let (report, _) = dual_check(
        rho.as_ref(),
        &grid,
        &ctx.partition,
        &ctx.config.conjugation,
        &samples,
        &ctx.config.dual,
    )?;
    let code = if report.passed { EXIT_OK } else { EXIT_CHECK_FAILED };
    Ok((to_value(&report)?, code))
}

fn cmd_axioms(ctx: &Context) -> Result<(Value, i32), CliError> {
    let rho = ctx.statistic.shared();
    let spec = sampler_spec(ctx, ctx.config.axiom_samples);
    let report = run_suite(rho.as_ref(), &spec, &ctx.config.tolerances);
    let code = if report.verdict == SuiteVerdict::Fail {
        EXIT_CHECK_FAILED
    } else {
        EXIT_OK
    };
    Ok((to_value(&report)?, code))
}

#[derive(Serialize)]
struct RoundTrip {
    samples: usize,
    max_residual: f64,
    passed: bool,
}

#[derive(Serialize)]
struct AnchorIndependence {
    anchors: Vec<f64>,
    values: Vec<f64>,
    max_residual: f64,
    passed: bool,
}

#[derive(Serialize)]
struct LiftResult {
    transforms: Vec<TransformRecord>,
    cash_loss_additivity: CashLossAdditivityReport,
    rho: f64,
    lifted: f64,
    anchor: f64,
    round_trip: RoundTrip,
    anchor_independence: AnchorIndependence,
    tolerance: f64,
    passed: bool,
}

fn cmd_lift(ctx: &Context) -> Result<(Value, i32), CliError> {
    let m = ctx.data.as_ref().expect("lift requires data");
    let rho = ctx.statistic.shared();
    let tol = ctx.config.lift_tol;
    let spec = sampler_spec(ctx, ctx.config.lift_samples);
    let cla = check_cash_loss_additivity(rho.as_ref(), &spec, tol)?;

    let lift = Arc::new(cash_additive_lift(Arc::clone(&rho), AnchorRule::MaxComponent));
    let lifted = lift.evaluate(m)?;
    let anchor = AnchorRule::MaxComponent.anchor(m);
    let back = regulator_version(Arc::clone(&lift) as SharedStatistic);

    let mut stream = spec.stream(LIFT_STREAM);
    let mut max_rt: f64 = 0.0;
    let mut check = |x: &PortfolioSample| -> Result<(), CliError> {
        max_rt = max_rt.max((back.evaluate(x)? - rho.evaluate(x)?).abs());
        Ok(())
    };
    check(m)?;
    for _ in 0..spec.samples {
        check(&stream.sample())?;
    }
    let round_trip = RoundTrip {
        samples: spec.samples + 1,
        max_residual: max_rt,
        passed: max_rt <= tol,
    };

    let mut anchors = Vec::with_capacity(ctx.config.lift_anchors);
    let mut values = Vec::with_capacity(ctx.config.lift_anchors);
    for _ in 0..ctx.config.lift_anchors {
        let a = anchor + stream.uniform(0.0, ctx.config.component_range);
        values.push(lift.evaluate_at_anchor(m, a)?);
        anchors.push(a);
    }
    let max_anchor = values.iter().map(|v| (v - lifted).abs()).fold(0.0, f64::max);
    let anchor_independence = AnchorIndependence {
        anchors,
        values,
        max_residual: max_anchor,
        passed: max_anchor <= tol,
    };

    let passed = cla.passed && round_trip.passed && anchor_independence.passed;
    let result = LiftResult {
        transforms: vec![lift.record(), back.record()],
        cash_loss_additivity: cla,
        rho: rho.evaluate(m)?,
        lifted,
        anchor,
        round_trip,
        anchor_independence,
        tolerance: tol,
        passed,
    };
    let code = if passed { EXIT_OK } else { EXIT_CHECK_FAILED };
    Ok((to_value(&result)?, code))
}

/// Default tolerances, exposed for callers building specs by hand.
pub fn default_tolerances() -> Tolerances {
    Tolerances::default()
}

//! Acceptance gate. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any criterion fails.

use std::sync::Arc;
use std::time::{Duration, Instant};

use lossrisk::axioms::{check_axiom, AxiomId, Counterexample, Tolerances, Verdict};
use lossrisk::cli::run_command;
use lossrisk::duality::{
    alpha_min, check_normalization_condition, classify_coherence, conjugate_on_grid,
    dual_reconstruct, weight_grid, ConjugationParams, NormalizationMode, PenaltyGrid,
    PenaltyPoint, DEFAULT_MAX_GRID_POINTS,
};
use lossrisk::sampling::SamplerSpec;
use lossrisk::statistics::{
    cash_additive_lift, cash_loss_residual, check_cash_loss_additivity, entropic_loss,
    gain_leaking, penalized_statistic, regulator_version, weighted_loss, worst_scenario,
    AnchorRule, RiskStatistic, SharedStatistic,
};
use lossrisk::types::{ExtendedValue, Partition, PortfolioSample, WeightVector};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("runtime {elapsed:?} exceeds {limit:?}"))
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn wv(q: &[f64]) -> WeightVector {
    WeightVector::new(q.to_vec()).unwrap()
}

fn random_samples(partition: &Partition, count: usize, seed: u64, stream: u64) -> Vec<PortfolioSample> {
    let spec = SamplerSpec::new(partition.clone(), count, seed);
    let mut s = spec.stream(stream);
    (0..count).map(|_| s.sample()).collect()
}

/// Penalty table with one point of intermediate penalty 0.4.
fn penalized_with_point() -> SharedStatistic {
    let grid = PenaltyGrid::new(
        vec![
            PenaltyPoint { q: wv(&[0.5, 0.5]), alpha: ExtendedValue::Finite(0.0) },
            PenaltyPoint { q: wv(&[1.0, 0.0]), alpha: ExtendedValue::Finite(0.4) },
            PenaltyPoint { q: wv(&[0.0, 1.0]), alpha: ExtendedValue::PosInfinite },
        ],
        None,
        "table",
    )
    .unwrap();
    Arc::new(penalized_statistic(grid).unwrap())
}

fn normalization() -> Check {
    let start = Instant::now();
    let blocks = Partition::new(vec![2, 3]).unwrap();
    let stats: Vec<(SharedStatistic, Partition)> = vec![
        (Arc::new(weighted_loss(wv(&[0.25, 0.75])).unwrap()), Partition::single(2).unwrap()),
        (Arc::new(worst_scenario(blocks.clone())), blocks),
        (penalized_with_point(), Partition::single(2).unwrap()),
    ];
    let mut worst: f64 = 0.0;
    for (rho, space) in &stats {
        for a in [0.0, 0.5, 1.0, 10.0, 1e3] {
            let cash = PortfolioSample::new(vec![-a; space.len()], space.clone()).map_err(err)?;
            let v = rho.evaluate(&cash).map_err(err)?;
            worst = worst.max((v - a).abs());
            ensure((v - a).abs() <= 1e-9, || format!("{}: rho(-{a}1) = {v}", rho.name()))?;
        }
    }
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("3 statistics x 5 amounts, max |rho(-a1) - a| = {worst:e}"))
}

fn loss_dependence() -> Check {
    let start = Instant::now();
    let tol = Tolerances::default();
    let stats: Vec<SharedStatistic> = vec![
        Arc::new(weighted_loss(wv(&[0.2, 0.3, 0.5])).unwrap()),
        Arc::new(worst_scenario(Partition::new(vec![1, 2]).unwrap())),
        Arc::new(entropic_loss(vec![0.2, 0.3, 0.5], 1.5).unwrap()),
        Arc::new(
            penalized_statistic(
                PenaltyGrid::new(
                    vec![
                        PenaltyPoint { q: wv(&[0.3, 0.3, 0.4]), alpha: ExtendedValue::Finite(0.0) },
                        PenaltyPoint { q: wv(&[0.8, 0.1, 0.1]), alpha: ExtendedValue::Finite(0.4) },
                    ],
                    None,
                    "table",
                )
                .unwrap(),
            )
            .unwrap(),
        ),
    ];
    let space = Partition::new(vec![1, 2]).unwrap();
    for rho in &stats {
        let spec = SamplerSpec::new(space.clone(), 1000, 11);
        let entry = check_axiom(rho.as_ref(), AxiomId::A3LossDependence, &spec, &tol);
        ensure(entry.verdict == Verdict::Pass && entry.worst_residual == 0.0, || {
            format!("{}: {:?} residual {}", rho.name(), entry.verdict, entry.worst_residual)
        })?;
    }
    let leaky = gain_leaking(vec![0.2, 0.3, 0.5]);
    let spec = SamplerSpec::new(space.clone(), 10_000, 11);
    let entry = check_axiom(&leaky, AxiomId::A3LossDependence, &spec, &tol);
    ensure(entry.verdict == Verdict::Fail, || "gain-leaking fixture passed".into())?;
    let cx = entry.counterexample.ok_or("no counterexample")?;
    let like = PortfolioSample::new(vec![0.0; 3], space).map_err(err)?;
    let again = cx.reevaluate(&leaky, &like).map_err(err)?;
    ensure(matches!(cx, Counterexample::LossDependence { .. }) && again > 0.0, || {
        format!("counterexample does not reproduce: {again}")
    })?;
    within(start.elapsed(), Duration::from_secs(5))?;
    Ok(format!("4 built-ins exact on 1000 samples; gain-leaking residual {again:.4}"))
}

fn weighted_grid() -> (SharedStatistic, Arc<Partition>, Vec<WeightVector>) {
    let rho: SharedStatistic = Arc::new(weighted_loss(wv(&[0.5, 0.5])).unwrap());
    let partition = Arc::new(Partition::single(2).unwrap());
    let grid = weight_grid(2, 16, DEFAULT_MAX_GRID_POINTS).unwrap();
    (rho, partition, grid)
}

fn dual_round_trip() -> Check {
    let start = Instant::now();
    let (rho, partition, qgrid) = weighted_grid();
    let conj = conjugate_on_grid(rho.as_ref(), &qgrid, &partition, &ConjugationParams::default(), Some(16))
        .map_err(err)?;
    ensure(conj.failures.is_empty(), || format!("{} failed points", conj.failures.len()))?;
    for p in conj.grid.points() {
        let inside = p.q.as_slice().iter().all(|&q| q <= 0.5);
        let ok = match p.alpha {
            ExtendedValue::Finite(a) => inside && a.abs() <= 1e-9,
            ExtendedValue::PosInfinite => !inside,
        };
        ensure(ok, || format!("alpha_min{:?} = {:?}", p.q.as_slice(), p.alpha))?;
    }
    let mut worst: f64 = 0.0;
    for m in random_samples(&partition, 100, 3, 1) {
        let r = dual_reconstruct(&conj.grid, &m).map_err(err)?;
        let v = rho.evaluate(&m).map_err(err)?;
        worst = worst.max((r.value - v).abs());
    }
    ensure(worst <= 1e-9, || format!("reconstruction residual {worst:e}"))?;
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!("153 grid points match; reconstruction residual {worst:e}"))
}

fn minimality() -> Check {
    let qgrid = weight_grid(2, 8, DEFAULT_MAX_GRID_POINTS).map_err(err)?;
    // admissible penalty: nonnegative, minimum 0 at Q = (0.5, 0.5)
    let alpha = |q: &[f64]| 0.5 * (1.0 - q[0] - q[1]) + (q[0] - q[1]).powi(2);
    let points = qgrid
        .iter()
        .map(|q| PenaltyPoint { q: q.clone(), alpha: ExtendedValue::Finite(alpha(q.as_slice())) })
        .collect();
    let table = PenaltyGrid::new(points, Some(8), "sub-simplex").map_err(err)?;
    let rho = penalized_statistic(table.clone()).map_err(err)?;
    let partition = Arc::new(Partition::single(2).unwrap());
    let conj = conjugate_on_grid(&rho, &qgrid, &partition, &ConjugationParams::default(), Some(8))
        .map_err(err)?;
    let mut slack = f64::INFINITY;
    for (p, given) in conj.grid.points().iter().zip(table.points()) {
        let a = given.alpha.finite().unwrap();
        let am = p.alpha.finite().ok_or_else(|| format!("alpha_min{:?} infinite", p.q.as_slice()))?;
        ensure(am <= a + 1e-4, || format!("alpha_min{:?} = {am} > alpha = {a}", p.q.as_slice()))?;
        slack = slack.min(a - am);
    }
    let mut worst: f64 = 0.0;
    for m in random_samples(&partition, 100, 5, 2) {
        let r = dual_reconstruct(&conj.grid, &m).map_err(err)?.value;
        let v = rho.evaluate(&m).map_err(err)?;
        ensure((r - v).abs() <= 0.02 * (1.0 + v), || format!("reconstruction {r} vs {v}"))?;
        worst = worst.max((r - v).abs());
    }
    Ok(format!("min(alpha - alpha_min) = {slack:e}; reconstruction residual {worst:e}"))
}

fn coherence() -> Check {
    let params = ConjugationParams::default();
    let (wl, p2, grid2) = weighted_grid();
    let worst = worst_scenario(Partition::new(vec![2, 1]).unwrap());
    let p3 = Arc::new(Partition::new(vec![2, 1]).unwrap());
    let grid3 = weight_grid(3, 8, DEFAULT_MAX_GRID_POINTS).map_err(err)?;
    for (rho, part, grid) in [(wl.as_ref(), &p2, &grid2), (&worst as &dyn RiskStatistic, &p3, &grid3)] {
        let conj = conjugate_on_grid(rho, grid, part, &params, None).map_err(err)?;
        let report = classify_coherence(&conj.grid, 1e-6, 1e6);
        ensure(report.histogram.intermediate == 0, || {
            format!("{}: {} intermediate labels", rho.name(), report.histogram.intermediate)
        })?;
    }
    let pen = penalized_with_point();
    let conj = conjugate_on_grid(pen.as_ref(), &grid2, &p2, &params, Some(16)).map_err(err)?;
    let report = classify_coherence(&conj.grid, 1e-6, 1e6);
    let hit = report
        .intermediate
        .iter()
        .find(|p| (p.alpha - 0.4).abs() <= 1e-3)
        .ok_or_else(|| format!("no intermediate label near 0.4: {:?}", report.intermediate))?;
    Ok(format!(
        "weighted/worst: 0 intermediate; penalized: {} intermediate, alpha{:?} = {}",
        report.histogram.intermediate, hit.q, hit.alpha
    ))
}

fn equivalence() -> Check {
    let part = Partition::new(vec![2, 1]).unwrap();
    let stats: Vec<SharedStatistic> = vec![
        Arc::new(worst_scenario(part.clone())),
        Arc::new(entropic_loss(vec![0.2, 0.3, 0.5], 1.5).unwrap()),
    ];
    let spec = SamplerSpec::new(part.clone(), 1000, 21);
    let mut max_anchor: f64 = 0.0;
    for rho in &stats {
        let report = check_cash_loss_additivity(rho.as_ref(), &spec, 1e-9).map_err(err)?;
        ensure(report.passed, || format!("{}: residual {}", rho.name(), report.max_residual))?;
        let lift = Arc::new(cash_additive_lift(Arc::clone(rho), AnchorRule::MaxComponent));
        let back = regulator_version(Arc::clone(&lift) as SharedStatistic);
        let mut anchors = spec.stream(77);
        for m in random_samples(&part, 1000, 21, 9) {
            let v = rho.evaluate(&m).map_err(err)?;
            let b = back.evaluate(&m).map_err(err)?;
            ensure((v - b).abs() <= 1e-9, || format!("{}: round trip {b} vs {v}", rho.name()))?;
            let base = lift.evaluate(&m).map_err(err)?;
            let a0 = AnchorRule::MaxComponent.anchor(&m);
            for _ in 0..10 {
                let a = a0 + anchors.uniform(0.0, 50.0);
                let other = lift.evaluate_at_anchor(&m, a).map_err(err)?;
                max_anchor = max_anchor.max((other - base).abs());
            }
        }
        ensure(max_anchor <= 1e-9, || format!("{}: anchor dependence {max_anchor:e}", rho.name()))?;
    }
    let short = weighted_loss(wv(&[0.5, 0.2, 0.1])).map_err(err)?;
    let report = check_cash_loss_additivity(&short, &spec, 1e-9).map_err(err)?;
    ensure(!report.passed, || "mass-0.8 weighted loss passed".into())?;
    let mut s = spec.stream(5);
    for _ in 0..1000 {
        let m = s.nonpositive_sample();
        let a = s.cash();
        let r = cash_loss_residual(&short, &m, a).map_err(err)?;
        ensure((r - 0.2 * a).abs() <= 1e-9, || format!("residual {r} at a = {a}"))?;
    }
    Ok(format!("worst/entropic pass; anchor spread {max_anchor:e}; mass 0.8 residual = 0.2a"))
}

fn lift_laws() -> Check {
    let part = Partition::new(vec![2, 2]).unwrap();
    let lift = cash_additive_lift(Arc::new(worst_scenario(part.clone())), AnchorRule::MaxComponent);
    let rel = |lhs: f64, rhs: f64| 1e-9 * (1.0 + lhs.abs() + rhs.abs());
    let spec = SamplerSpec::new(part, 1000, 31);
    let mut s = spec.stream(3);
    for _ in 0..1000 {
        let m = s.sample();
        let a = s.signed(5.0);
        let lhs = lift.evaluate(&m.shifted(a).map_err(err)?).map_err(err)?;
        let rhs = lift.evaluate(&m).map_err(err)? - a;
        ensure((lhs - rhs).abs() <= rel(lhs, rhs), || format!("cash additivity {lhs} vs {rhs}"))?;

        let big = s.dominating(&m);
        let (lo, hi) = (lift.evaluate(&big).map_err(err)?, lift.evaluate(&m).map_err(err)?);
        ensure(lo <= hi + rel(lo, hi), || format!("anti-monotonicity {lo} > {hi}"))?;

        let m2 = s.sample();
        let lambda = s.lambda();
        let lhs = lift.evaluate(&m.convex_combination(&m2, lambda).map_err(err)?).map_err(err)?;
        let rhs = lambda * hi + (1.0 - lambda) * lift.evaluate(&m2).map_err(err)?;
        ensure(lhs <= rhs + rel(lhs, rhs), || format!("convexity {lhs} > {rhs}"))?;
    }
    Ok("1000 triples: cash additivity, anti-monotonicity, convexity".into())
}

fn one_dimensional() -> Check {
    let partition = Arc::new(Partition::single(1).unwrap());
    let res = 16;
    let step = 1.0 / res as f64;
    let qgrid = weight_grid(1, res, DEFAULT_MAX_GRID_POINTS).map_err(err)?;
    for lambda in [0.25, 1.0] {
        let rho = weighted_loss(wv(&[lambda])).map_err(err)?;
        let conj = conjugate_on_grid(&rho, &qgrid, &partition, &ConjugationParams::default(), Some(res))
            .map_err(err)?;
        for p in conj.grid.points() {
            let q = p.q.as_slice()[0];
            if q <= lambda {
                ensure(matches!(p.alpha, ExtendedValue::Finite(a) if a.abs() <= 1e-9), || {
                    format!("lambda {lambda}: alpha_min({q}) = {:?}", p.alpha)
                })?;
            } else if q > lambda + step {
                ensure(p.alpha == ExtendedValue::PosInfinite, || {
                    format!("lambda {lambda}: alpha_min({q}) = {:?}", p.alpha)
                })?;
            }
        }
        for m in random_samples(&partition, 100, 41, 1) {
            let r = dual_reconstruct(&conj.grid, &m).map_err(err)?.value;
            let v = rho.evaluate(&m).map_err(err)?;
            ensure((r - v).abs() <= 1e-9, || format!("lambda {lambda}: {r} vs {v}"))?;
        }
        let direct = alpha_min(&rho, &wv(&[lambda + 0.5 * step]), &partition, &ConjugationParams::default())
            .map_err(err)?;
        ensure(direct == ExtendedValue::PosInfinite, || format!("off-grid point {direct:?}"))?;
    }
    Ok("lambda in {0.25, 1}: 0 on [0, lambda], +inf beyond; exact reconstruction".into())
}

fn normalization_modes() -> Check {
    let (rho, partition, qgrid) = weighted_grid();
    let conj = conjugate_on_grid(rho.as_ref(), &qgrid, &partition, &ConjugationParams::default(), Some(16))
        .map_err(err)?;
    let report = check_normalization_condition(&conj.grid, &[0.25], NormalizationMode::Both).map_err(err)?;
    let entry = &report.entries[0];
    let literal = entry.literal.as_ref().ok_or("literal verdict missing")?;
    let derived = entry.derived.as_ref().ok_or("derived verdict missing")?;
    ensure(!literal.passed && derived.passed && report.discrepancy, || {
        format!("literal {} derived {}", literal.passed, derived.passed)
    })?;
    let json = serde_json::to_value(&report).map_err(err)?;
    ensure(json["entries"][0]["literal"].is_object() && json["entries"][0]["derived"].is_object(), || {
        "serialized report lacks a verdict".into()
    })?;
    Ok(format!(
        "eps 0.25: literal FAIL ({} region points), derived PASS",
        literal.region_points
    ))
}

fn cli_end_to_end() -> Check {
    let dir = tempfile::tempdir().map_err(err)?;
    let write = |name: &str, body: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p.display().to_string()
    };
    let data = write("scenarios.csv", "scenario,value\ns1,-1\ns1,2\ns2,-3\ns2,0\n");
    let worst = write("worst.cfg", "statistic.kind = worst_scenario\n");
    let leaky = write("leaky.cfg", "statistic.kind = gain_leaking\nstatistic.weights = 0.5, 0.5\n");
    let wl = write("wl.cfg", "statistic.kind = weighted_loss\nstatistic.weights = 0.5, 0.5\n");

    let run_twice = |args: &[&str]| -> Result<(i32, serde_json::Value), String> {
        let argv: Vec<&str> = std::iter::once("lossrisk").chain(args.iter().copied()).collect();
        let a = run_command(argv.clone());
        let b = run_command(argv);
        let ja = a.json.ok_or_else(|| format!("{args:?}: {:?}", a.message))?;
        ensure(Some(&ja) == b.json.as_ref() && a.code == b.code, || format!("{args:?} not deterministic"))?;
        Ok((a.code, serde_json::from_str(&ja).map_err(err)?))
    };

    let (code, doc) = run_twice(&["eval", "--config", &worst, "--data", &data])?;
    ensure(code == 0 && doc["result"]["value"] == 1.5, || format!("eval: {code} {}", doc["result"]))?;

    let (code, doc) = run_twice(&["axioms", "--config", &leaky, "--seed", "42"])?;
    let entries = doc["result"]["entries"].as_array().ok_or("no axiom entries")?;
    let a3 = entries.iter().find(|e| e["axiom"] == "A3_loss_dependence").ok_or("no A3 entry")?;
    ensure(code == 1 && a3["verdict"] == "fail" && a3["counterexample"].is_object(), || {
        format!("axioms: exit {code}, A3 {a3}")
    })?;

    let (code, doc) = run_twice(&["dualcheck", "--config", &wl, "--seed", "42"])?;
    let samples = doc["result"]["samples"].as_array().ok_or("no samples")?;
    let bounded = samples.iter().all(|s| {
        let rho = s["rho"].as_f64().unwrap();
        s["residual"].as_f64().unwrap().abs() <= 0.02 * (1.0 + rho)
    });
    ensure(code == 0 && bounded && !samples.is_empty(), || format!("dualcheck: exit {code}"))?;

    let out = dir.path().join("report.json");
    let argv = ["lossrisk", "axioms", "--config", &leaky, "--seed", "42", "--out", out.to_str().unwrap()];
    let first = run_command(argv);
    let on_disk = std::fs::read_to_string(&out).map_err(err)?;
    ensure(first.json.as_deref() == Some(on_disk.as_str()), || "--out bytes differ".into())?;
    Ok("eval 1.5 exit 0; axioms exit 1 with counterexample; dualcheck exit 0; byte-identical reruns".into())
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("1 normalization", normalization),
        ("2 loss dependence", loss_dependence),
        ("3 dual round trip", dual_round_trip),
        ("4 minimality", minimality),
        ("5 coherence dichotomy", coherence),
        ("6 cash-loss equivalence", equivalence),
        ("7 lift output laws", lift_laws),
        ("8 one-dimensional reduction", one_dimensional),
        ("9 normalization modes", normalization_modes),
        ("10 end-to-end CLI", cli_end_to_end),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name:<28} {secs:>7.3}s  {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name:<28} {secs:>7.3}s  {detail}");
            }
        }
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use sofic_pressure::measure::{
    default_test_family, entropy_cell, pressure_domination_check, random_measure, variational_objective, variational_search,
    CellOracle, EntropyMethod, Family, PressureOracle, TransferOracle,
};
use sofic_pressure::pressure::{
    amenable_pressure, cocycle_check, proposition_battery, run_schedule, PressureEstimate, TransferMatrix,
    DEFAULT_MAX_STATES,
};
use sofic_pressure::{
    defect_report, log_sum_exp, quasi_tile, GroupSpec, MapSpaceQuery, Measure, Observable, PseudometricSpec, SoficMap,
    Subshift,
};

use crate::config::{to_text, ConfigError, ExperimentConfig, Kind};
use crate::emit::{fmt_num, num, opt_num, Invariant, Provenance, ResultBundle};

pub const PRESSURE_HEADER: &str = "d,F_radius,delta,eps,mode,map_size,sep_size,log_sum,normalized,wall_ms";
pub const MEASURE_HEADER: &str = "mu_id,f_id,integral,pressure,margin,passed";
const ENTROPY_HEADER: &str = "d,F_radius,delta,eps,tests,count,normalized,method";
const CLASSICAL_HEADER: &str = "n,normalized";
const VARIATIONAL_HEADER: &str = "mu_id,family,entropy,integral,objective,pressure,margin";
const PROPERTIES_HEADER: &str = "check,d,passed,lhs,rhs";
const TILE_HEADER: &str = "d,corrupt,shapes,centers,covered,coverage,meets_coverage,verified";
const CHECK_HEADER: &str = "d,seed,multiplicativity,freeness,identity,within";

/// Rounding slack for inequalities between computed cells.
const SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    pub timing: bool,
}

/// Problems that stop a run before a bundle exists.
#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Compute(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Compute(e) => write!(f, "{e}"),
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

fn compute(e: impl std::fmt::Display) -> RunError {
    RunError::Compute(e.to_string())
}

pub fn config_hash(config: &ExperimentConfig) -> String {
    let mut canonical = config.clone();
    canonical.workers = 0;
    let digest = Sha256::digest(to_text(&canonical).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

struct Context {
    group: GroupSpec,
    x: Subshift,
    f: Observable<f64>,
}

pub fn run(config: &ExperimentConfig, opts: RunOptions) -> Result<ResultBundle, RunError> {
    config.validate()?;
    let group = config.group()?;
    let x = config.subshift(&group)?;
    let f = config.observable(&group, x.k())?;
    let ctx = Context { group, x, f };
    let provenance = Provenance {
        config_hash: config_hash(config),
        seed: config.seed,
        version: env!("CARGO_PKG_VERSION"),
    };
    let (header, rows, report, invariants) = match config.kind {
        Kind::Pressure => pressure(config, &ctx, opts)?,
        Kind::Entropy => entropy(config, &ctx)?,
        Kind::Classical => classical(config, &ctx)?,
        Kind::Variational => variational(config, &ctx)?,
        Kind::Properties => properties(config, &ctx)?,
        Kind::Tile => tile(config, &ctx)?,
        Kind::SoficCheck => sofic_check(config, &ctx)?,
        Kind::Membership => membership(config, &ctx)?,
    };
    Ok(ResultBundle {
        kind: config.kind.as_str(),
        header,
        rows,
        report,
        invariants,
        provenance,
    })
}

type Parts = (&'static str, Vec<Vec<String>>, Map<String, Value>, Vec<Invariant>);

fn summary_map(summary: Value) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("summary".into(), summary);
    m
}

fn single_site_coeffs(ctx: &Context) -> Option<&[f64]> {
    let w = ctx.f.window();
    (w.len() == 1 && w.contains(&ctx.group.identity())).then(|| ctx.f.table())
}

fn query_for(config: &ExperimentConfig, ctx: &Context, d: usize, f_radius: usize, delta: f64, eps: f64) -> Result<MapSpaceQuery, RunError> {
    let settings = config.settings()?;
    let sigma = config
        .family()?
        .build(&ctx.group, d, config.sofic.domain_radius.max(f_radius))
        .map_err(compute)?;
    let mut q = MapSpaceQuery::new(Arc::new(sigma), ctx.group.ball(f_radius), delta, eps)
        .with_mode(settings.mode)
        .with_metric(settings.metric)
        .with_budget(settings.budget);
    q.sft_tolerance = settings.sft_tolerance;
    Ok(q)
}

fn cell_json(est: &Result<PressureEstimate<f64>, String>, d: usize, timing: bool) -> Value {
    match est {
        Ok(e) => json!({
            "d": d,
            "mode": e.mode.as_str(),
            "method": e.method.as_str(),
            "map_size": e.map_size.to_string(),
            "sep_size": e.sep_size.to_string(),
            "separated_exact": e.separated_exact,
            "log_sum": num(e.log_sum),
            "normalized": num(e.normalized),
            "nodes": e.nodes,
            "wall_ms": if timing { e.wall.as_millis() as u64 } else { 0 },
        }),
        Err(msg) => json!({"d": d, "error": msg}),
    }
}

fn pressure(config: &ExperimentConfig, ctx: &Context, opts: RunOptions) -> Result<Parts, RunError> {
    let schedule = config.schedule()?;
    let settings = config.settings()?;
    let report = run_schedule(&schedule, config.family()?, &ctx.group, &ctx.x, &ctx.f, &settings).map_err(compute)?;
    let mut rows = Vec::new();
    let mut failures = 0;
    let outcomes: Vec<Result<PressureEstimate<f64>, String>> =
        report.cells.iter().map(|c| c.result.clone().map_err(|e| e.to_string())).collect();
    for (cell, est) in report.cells.iter().zip(&outcomes) {
        let c = cell.cell;
        let mut row = vec![
            c.d.to_string(),
            c.f_radius.to_string(),
            fmt_num(c.delta),
            fmt_num(c.eps),
            settings.mode.as_str().to_string(),
        ];
        match est {
            Ok(e) => row.extend([
                e.map_size.to_string(),
                e.sep_size.to_string(),
                fmt_num(e.log_sum),
                fmt_num(e.normalized),
                if opts.timing { e.wall.as_millis().to_string() } else { "0".into() },
            ]),
            Err(_) => {
                failures += 1;
                row.extend(["".into(), "".into(), "".into(), "".into(), "0".into()]);
            }
        }
        rows.push(row);
    }

    let slices: Vec<Value> = report
        .slices
        .iter()
        .map(|s| {
            let cells: Vec<Value> = report
                .cells
                .iter()
                .zip(&outcomes)
                .filter(|(c, _)| c.cell.f_radius == s.f_radius && c.cell.delta == s.delta && c.cell.eps == s.eps)
                .map(|(c, e)| {
                    let mut v = cell_json(e, c.cell.d, opts.timing);
                    v["in_tail"] = json!(s.tail.contains(&c.cell.d));
                    v
                })
                .collect();
            json!({
                "F_radius": s.f_radius,
                "delta": num(s.delta),
                "eps": num(s.eps),
                "tail_d": s.tail,
                "value": opt_num(s.value),
                "cells": cells,
            })
        })
        .collect();

    let coeffs = single_site_coeffs(ctx);
    let lse = coeffs.map(|a| log_sum_exp(a.iter().copied()));
    let transfer = match ctx.group {
        GroupSpec::IntegerLine => TransferMatrix::new(&ctx.x, Some(&ctx.f), DEFAULT_MAX_STATES)
            .ok()
            .map(|t| t.log_spectral_radius()),
        _ => None,
    };
    let summary = json!({
        "value": opt_num(report.summary),
        "rule": report.rule,
        "log_sum_exp_coeffs": opt_num(lse),
        "transfer_oracle": opt_num(transfer),
        "cells": report.cells.len(),
        "failed_cells": failures,
        "slices": slices,
    });

    let mut invariants = vec![Invariant::new(
        "summary available",
        report.summary.is_some(),
        format!("{failures} of {} cells failed", report.cells.len()),
    )];
    let bound = (ctx.x.k() as f64).ln() + ctx.f.max_value();
    let worst = outcomes.iter().filter_map(|e| e.as_ref().ok()).map(|e| e.normalized).fold(f64::NEG_INFINITY, f64::max);
    invariants.push(Invariant::new(
        "cells at most log k + max f",
        worst <= bound + SLACK,
        format!("largest cell {} vs {}", fmt_num(worst), fmt_num(bound)),
    ));
    // full shift with a single-site potential: every cell is log Σ e^{a_j}
    let closed_form = ctx.x.is_full()
        && settings.metric == PseudometricSpec::CoordinateE
        && config.schedule.eps.iter().all(|&e| e <= 1.0);
    if let (true, Some(target)) = (closed_form, lse) {
        let dev = outcomes
            .iter()
            .filter_map(|e| e.as_ref().ok())
            .map(|e| (e.normalized - target).abs())
            .fold(0.0, f64::max);
        invariants.push(Invariant::new(
            "cells equal log_sum_exp_coeffs",
            dev <= 1e-9,
            format!("max deviation {}", fmt_num(dev)),
        ));
    }
    Ok((PRESSURE_HEADER, rows, summary_map(summary), invariants))
}

fn tests_for(config: &ExperimentConfig, ctx: &Context) -> Result<Vec<Observable<f64>>, RunError> {
    let include = config.measure.as_ref().is_some_and(|m| m.include_potential);
    default_test_family(&ctx.group, ctx.x.k(), include.then_some(&ctx.f)).map_err(compute)
}

fn sorted_ds(config: &ExperimentConfig) -> Vec<usize> {
    let mut ds = config.sofic.d.clone();
    ds.sort_unstable();
    ds.dedup();
    ds
}

fn entropy(config: &ExperimentConfig, ctx: &Context) -> Result<Parts, RunError> {
    let mu = config.entropy_measure(&ctx.group, ctx.x.k())?;
    let tests = tests_for(config, ctx)?;
    let mut rows = Vec::new();
    let mut cells = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    let mut failures = 0;
    let s = &config.schedule;
    for &eps in &s.eps {
        for &r in &s.f_radius {
            for &delta in &s.delta {
                for d in sorted_ds(config) {
                    let base = vec![d.to_string(), r.to_string(), fmt_num(delta), fmt_num(eps), tests.len().to_string()];
                    let result = query_for(config, ctx, d, r, delta, eps)
                        .and_then(|q| entropy_cell(&q, &ctx.x, &mu, &tests).map_err(compute));
                    match result {
                        Ok(e) => {
                            let method = match e.method {
                                EntropyMethod::TypeClasses => "type-classes",
                                EntropyMethod::Enumerate => "enumerate",
                            };
                            worst = worst.max(e.normalized);
                            let mut row = base;
                            row.extend([e.count.to_string(), fmt_num(e.normalized), method.to_string()]);
                            rows.push(row);
                            cells.push(json!({
                                "d": d, "F_radius": r, "delta": num(delta), "eps": num(eps),
                                "count": e.count.to_string(), "normalized": num(e.normalized), "method": method,
                            }));
                        }
                        Err(err) => {
                            failures += 1;
                            let mut row = base;
                            row.extend(["".into(), "".into(), "".into()]);
                            rows.push(row);
                            cells.push(json!({"d": d, "F_radius": r, "delta": num(delta), "eps": num(eps), "error": err.to_string()}));
                        }
                    }
                }
            }
        }
    }
    let log_k = (ctx.x.k() as f64).ln();
    let supported = mu.supported_on(&ctx.x).map_err(compute)?;
    let summary = json!({
        "measure_entropy": num(mu.entropy()),
        "supported_on_subshift": supported,
        "tests": tests.len(),
        "failed_cells": failures,
        "cells": cells,
    });
    let invariants = vec![
        Invariant::new("all cells evaluated", failures == 0, format!("{failures} failed")),
        Invariant::new(
            "cells at most log k",
            worst <= log_k + SLACK,
            format!("largest cell {} vs {}", fmt_num(worst), fmt_num(log_k)),
        ),
    ];
    Ok((ENTROPY_HEADER, rows, summary_map(summary), invariants))
}

fn classical(config: &ExperimentConfig, ctx: &Context) -> Result<Parts, RunError> {
    let n_max = config.classical.as_ref().map_or(1, |c| c.n_max);
    let p = amenable_pressure(&ctx.group, &ctx.x, &ctx.f, n_max).map_err(compute)?;
    let rows = p.curve.iter().map(|(n, v)| vec![n.to_string(), fmt_num(*v)]).collect();
    let curve: Vec<Value> = p.curve.iter().map(|(n, v)| json!({"n": n, "normalized": num(*v)})).collect();
    let mut invariants = vec![Invariant::new(
        "curve nonempty",
        !p.curve.is_empty(),
        format!("{} Folner sets", p.curve.len()),
    )];
    if let Some(exact) = p.exact {
        let low = p.curve.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
        invariants.push(Invariant::new(
            "curve bounds the limit from above",
            low >= exact - 1e-9,
            format!("smallest {} vs limit {}", fmt_num(low), fmt_num(exact)),
        ));
    }
    let summary = json!({"exact": opt_num(p.exact), "curve": curve});
    Ok((CLASSICAL_HEADER, rows, summary_map(summary), invariants))
}

fn schedule_summary(config: &ExperimentConfig, ctx: &Context, f: &Observable<f64>) -> Result<Option<f64>, RunError> {
    let report = run_schedule(&config.schedule()?, config.family()?, &ctx.group, &ctx.x, f, &config.settings()?).map_err(compute)?;
    Ok(report.summary)
}

fn variational(config: &ExperimentConfig, ctx: &Context) -> Result<Parts, RunError> {
    let m = config.measure.as_ref().expect("validated");
    let pressure = schedule_summary(config, ctx, &ctx.f)?.unwrap_or(f64::NEG_INFINITY);
    let mut candidates: Vec<(String, &'static str, Measure<f64>)> = Vec::new();
    let mut best = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for name in &m.families {
        let (family, label) = match name.as_str() {
            "markov" => (Family::Markov, "markov"),
            _ => (Family::Product, "product"),
        };
        let found = variational_search(&ctx.group, &ctx.x, &ctx.f, family, m.search_budget).map_err(compute)?;
        best.push(json!({"family": label, "value": num(found.value), "evaluations": found.evaluations}));
        candidates.push((format!("best-{label}"), label, found.measure));
        for i in 0..m.samples {
            let mu = random_measure(&ctx.x, family, &mut rng).map_err(compute)?;
            candidates.push((format!("{label}{i}"), label, mu));
        }
    }
    for (i, p) in m.product.iter().enumerate() {
        let mu = sofic_pressure::measure::ProductMeasure::new(p.clone()).map_err(compute)?;
        candidates.push((format!("given-product{i}"), "product", Measure::Product(mu)));
    }
    for (i, p) in m.markov.iter().enumerate() {
        let mu = sofic_pressure::measure::MarkovMeasure::new(p.clone()).map_err(compute)?;
        candidates.push((format!("given-markov{i}"), "markov", Measure::Markov(mu)));
    }
    let mut rows = Vec::new();
    let mut measures = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    let mut top = f64::NEG_INFINITY;
    for (id, label, mu) in &candidates {
        let h = mu.entropy();
        let integral = mu.integrate(&ctx.group, &ctx.f).map_err(compute)?;
        let objective = variational_objective(&ctx.group, mu, &ctx.f).map_err(compute)?;
        let supported = mu.supported_on(&ctx.x).map_err(compute)?;
        if supported {
            worst = worst.max(objective - pressure);
            top = top.max(objective);
        }
        rows.push(vec![
            id.clone(),
            label.to_string(),
            fmt_num(h),
            fmt_num(integral),
            fmt_num(objective),
            fmt_num(pressure),
            fmt_num(pressure - objective),
        ]);
        measures.push(json!({"mu_id": id, "family": label, "objective": num(objective), "supported": supported}));
    }
    let gap = if pressure == f64::NEG_INFINITY { Value::String("no invariant measure".into()) } else { num(pressure - top) };
    let summary = json!({
        "pressure": num(pressure),
        "best": best,
        "gap": gap,
        "measures": measures,
    });
    let invariants = vec![Invariant::new(
        "objective at most pressure",
        worst <= m.tolerance,
        format!("max objective - pressure {} (tolerance {})", fmt_num(worst), fmt_num(m.tolerance)),
    )];
    Ok((VARIATIONAL_HEADER, rows, summary_map(summary), invariants))
}

fn properties(config: &ExperimentConfig, ctx: &Context) -> Result<Parts, RunError> {
    let g = config.properties_g(&ctx.group, ctx.x.k())?;
    let s = config.cocycle_element(&ctx.group)?;
    let sch = &config.schedule;
    let ds = sorted_ds(config);
    let (r, delta, eps) = (sch.f_radius[0], sch.delta[0], sch.eps[0]);
    let settings = config.settings()?;
    let mut rows = Vec::new();
    let mut invariants = Vec::new();
    let mut checks = Vec::new();
    let q = query_for(config, ctx, ds[0], r, delta, eps)?;
    match proposition_battery(&q, &ctx.x, &ctx.f, &g) {
        Ok(report) => {
            for c in &report.checks {
                rows.push(vec![c.name.replace(',', ";"), ds[0].to_string(), c.passed.to_string(), fmt_num(c.lhs), fmt_num(c.rhs)]);
                checks.push(json!({"check": c.name, "d": ds[0], "passed": c.passed, "lhs": num(c.lhs), "rhs": num(c.rhs)}));
                invariants.push(Invariant::new(c.name.clone(), c.passed, format!("{} vs {}", fmt_num(c.lhs), fmt_num(c.rhs))));
            }
        }
        Err(e) => invariants.push(Invariant::new("battery", false, e.to_string())),
    }
    for &d in &ds {
        let q = query_for(config, ctx, d, r, delta, eps)?;
        match cocycle_check(&q, &ctx.x, &ctx.f, &g, &s, settings.method) {
            Ok(c) => {
                rows.push(vec![c.name.clone(), d.to_string(), c.passed.to_string(), fmt_num(c.lhs), fmt_num(c.rhs)]);
                checks.push(json!({"check": c.name, "d": d, "passed": c.passed, "lhs": num(c.lhs), "rhs": num(c.rhs)}));
                invariants.push(Invariant::new(c.name, c.passed, format!("{} vs {}", fmt_num(c.lhs), fmt_num(c.rhs))));
            }
            Err(e) => invariants.push(Invariant::new(format!("(viii) cocycle d={d}"), false, e.to_string())),
        }
    }
    let summary = json!({
        "battery_d": ds[0],
        "F_radius": r,
        "delta": num(delta),
        "eps": num(eps),
        "cocycle_element": s.to_string(),
        "checks": checks,
    });
    Ok((PROPERTIES_HEADER, rows, summary_map(summary), invariants))
}

fn tile(config: &ExperimentConfig, ctx: &Context) -> Result<Parts, RunError> {
    let t = config.tiling.as_ref().expect("validated");
    let shapes = config.shapes(&ctx.group)?;
    let mut rows = Vec::new();
    let mut invariants = Vec::new();
    let mut tilings = Vec::new();
    for d in sorted_ds(config) {
        let mut sigma = config.family()?.build(&ctx.group, d, config.sofic.domain_radius).map_err(compute)?;
        if t.corrupt > 0 {
            let s = ctx.group.generators().into_iter().next().ok_or_else(|| compute("group has no generators"))?;
            sigma = sigma.perturbed(&s, t.corrupt, config.seed).map_err(compute)?;
        }
        let all: Vec<usize> = (0..d).collect();
        let tiling = quasi_tile(&sigma, &shapes, &all, t.tau, t.eta).map_err(compute)?;
        let verified = tiling.verify(&sigma);
        let centers: usize = tiling.centers.iter().map(Vec::len).sum();
        let meets = tiling.meets_coverage(t.tau, t.eta);
        rows.push(vec![
            d.to_string(),
            t.corrupt.to_string(),
            tiling.shapes.len().to_string(),
            centers.to_string(),
            tiling.covered.len().to_string(),
            fmt_num(tiling.coverage()),
            meets.to_string(),
            verified.is_ok().to_string(),
        ]);
        invariants.push(Invariant::new(
            format!("d={d} translates injective and disjoint"),
            verified.is_ok(),
            verified.clone().err().unwrap_or_default(),
        ));
        if t.corrupt == 0 {
            invariants.push(Invariant::new(
                format!("d={d} coverage"),
                meets,
                format!("{} >= {}", fmt_num(tiling.coverage()), fmt_num(1.0 - t.tau - t.eta)),
            ));
        }
        let shape_sets: Vec<Value> = tiling
            .shapes
            .iter()
            .zip(&tiling.centers)
            .map(|(s, c)| json!({"shape": s.iter().map(|g| g.to_string()).collect::<Vec<_>>(), "centers": c}))
            .collect();
        tilings.push(json!({"d": d, "coverage": num(tiling.coverage()), "tiles": shape_sets}));
    }
    let summary = json!({"tau": num(t.tau), "eta": num(t.eta), "corrupt": t.corrupt, "tilings": tilings});
    Ok((TILE_HEADER, rows, summary_map(summary), invariants))
}

fn sofic_check(config: &ExperimentConfig, ctx: &Context) -> Result<Parts, RunError> {
    let c = config.check.as_ref().expect("validated");
    let tested = ctx.group.ball(c.radius);
    let random = config.sofic.family == "random";
    let seeds: Vec<u64> = if random { (0..c.seeds).map(|i| config.seed.wrapping_add(i)).collect() } else { vec![config.seed] };
    let mut rows = Vec::new();
    let mut invariants = Vec::new();
    let mut per_d = Vec::new();
    for d in sorted_ds(config) {
        let mut within = 0;
        for &seed in &seeds {
            let sigma = if random {
                SoficMap::random_free(&ctx.group, d, config.sofic.domain_radius, seed).map_err(compute)?
            } else {
                config.family()?.build(&ctx.group, d, config.sofic.domain_radius).map_err(compute)?
            };
            let r = defect_report(&sigma, &tested).map_err(compute)?;
            let ok = r.within(c.bound);
            within += ok as usize;
            rows.push(vec![
                d.to_string(),
                seed.to_string(),
                fmt_num(r.multiplicativity),
                fmt_num(r.freeness),
                fmt_num(r.identity),
                ok.to_string(),
            ]);
        }
        let fraction = within as f64 / seeds.len() as f64;
        let required = if random { c.required_fraction } else { 1.0 };
        invariants.push(Invariant::new(
            format!("d={d} defects within {}", fmt_num(c.bound)),
            fraction >= required,
            format!("{within} of {} approximations", seeds.len()),
        ));
        per_d.push(json!({"d": d, "within": within, "tested": seeds.len()}));
    }
    let summary = json!({"radius": c.radius, "bound": num(c.bound), "results": per_d});
    Ok((CHECK_HEADER, rows, summary_map(summary), invariants))
}

fn membership(config: &ExperimentConfig, ctx: &Context) -> Result<Parts, RunError> {
    let m = config.measure.as_ref().expect("validated");
    let measures = config.membership_measures(&ctx.group, ctx.x.k())?;
    let tests = tests_for(config, ctx)?;
    let oracle: Box<dyn PressureOracle<f64>> = match ctx.group {
        GroupSpec::IntegerLine => Box::new(TransferOracle {
            x: ctx.x.clone(),
            max_states: DEFAULT_MAX_STATES,
        }),
        _ => {
            let sch = &config.schedule;
            let d = *sorted_ds(config).last().expect("validated");
            Box::new(CellOracle {
                query: query_for(config, ctx, d, sch.f_radius[0], sch.delta[0], sch.eps[0])?,
                x: ctx.x.clone(),
                method: config.settings()?.method,
            })
        }
    };
    let mut rows = Vec::new();
    let mut invariants = Vec::new();
    let mut reports = Vec::new();
    for (id, mu, expect) in &measures {
        let r = pressure_domination_check(mu, &tests, &ctx.group, oracle.as_ref(), &m.scales, 1e-9).map_err(compute)?;
        for row in &r.rows {
            rows.push(vec![
                id.clone(),
                row.f_id.replace(',', ";"),
                fmt_num(row.integral),
                fmt_num(row.pressure),
                fmt_num(row.margin),
                row.passed.to_string(),
            ]);
        }
        let violations = r.violations().count();
        invariants.push(Invariant::new(
            format!("{id} {}", if *expect { "dominated" } else { "rejected" }),
            r.passed() == *expect,
            format!(
                "{violations} violations, mass {}, min weight {}, invariance defect {}",
                fmt_num(r.total_mass),
                fmt_num(r.min_weight),
                fmt_num(r.invariance_defect)
            ),
        ));
        reports.push(json!({
            "mu_id": id,
            "passed": r.passed(),
            "expected": expect,
            "violations": violations,
            "total_mass": num(r.total_mass),
            "min_weight": num(r.min_weight),
            "invariance_defect": num(r.invariance_defect),
        }));
    }
    let summary = json!({
        "tests": tests.len(),
        "scales": m.scales,
        "note": "passing is evidence of invariance on the window algebra, not a proof",
        "measures": reports,
    });
    Ok((MEASURE_HEADER, rows, summary_map(summary), invariants))
}

use std::fs::File;
use std::io::BufWriter;

use pla_core::reference::{summarize_errors, ErrorSummary, ReferenceRow, PUBLISHED_SUMMARY};
use pla_core::sim::write_delay_trace;
use pla_core::{analyze, run_sim, Analysis, LatencyMetrics, ScenarioParams, SimConfig, SolverConfig};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{AnalyzeArgs, Format, ReportArgs, SimArgs, SimulateArgs, SweepArgs, ValidateArgs};
use crate::input::{apply_solver_flags, load_reference_rows, load_workload, workload_from_args};
use crate::output::{write_json, write_rows, write_rows_to};
use crate::CliError;

/// Runs `f` over `items` on `jobs` threads (0 = all cores), keeping order.
fn par_map<T: Sync, R: Send>(
    items: &[T],
    jobs: usize,
    f: impl Fn(usize, &T) -> R + Sync + Send,
) -> Result<Vec<R>, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::usage(format!("thread pool: {e}")))?;
    Ok(pool.install(|| items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect()))
}

fn sim_config(args: &SimArgs, stream: u64) -> SimConfig {
    SimConfig {
        n_messages: args.n,
        seed: args.seed,
        stream,
        drain: !args.no_drain,
        record_delays: false,
        record_events: false,
        zero_delay_threshold_ms: args.zero_threshold,
    }
}

#[derive(Debug, Serialize)]
struct AnalyzeRow {
    m: f64,
    r: f64,
    h: f64,
    p: f64,
    mdr_pct: f64,
    avg_latency_ms: f64,
    jitter_ms: f64,
    period_r: usize,
    cycles_used: usize,
    converged: bool,
    k_max: usize,
    tail_mass: f64,
    series_truncated: bool,
    warnings: String,
}

impl AnalyzeRow {
    fn new(a: &Analysis) -> Self {
        let sp = &a.params;
        Self {
            m: sp.size_ratio,
            r: sp.publish_period_ms,
            h: sp.heartbeat_period_ms,
            p: sp.delivery_prob,
            mdr_pct: a.metrics.mdr_pct,
            avg_latency_ms: a.metrics.avg_latency_ms,
            jitter_ms: a.metrics.jitter_ms,
            period_r: a.cycle.period_r,
            cycles_used: a.cycle.cycles_used,
            converged: a.cycle.converged,
            k_max: a.cycle.k_max,
            tail_mass: a.cycle.tail_mass,
            series_truncated: a.phases.iter().any(|p| p.truncated),
            warnings: a.warnings.join("; "),
        }
    }
}

fn analyze_all(
    scenarios: &[ScenarioParams],
    cfg: &SolverConfig,
    jobs: usize,
) -> Result<Vec<Analysis>, CliError> {
    par_map(scenarios, jobs, |_, sp| analyze(sp, cfg))?
        .into_iter()
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::usage(e.to_string()))
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<i32, CliError> {
    let work = workload_from_args(&args.scenario)?;
    let cfg = apply_solver_flags(work.solver, &args.solver)?;
    let analyses = analyze_all(&work.scenarios, &cfg, args.jobs)?;
    for a in &analyses {
        for w in &a.warnings {
            eprintln!("warning: {}: {w}", a.params);
        }
    }
    let rows: Vec<AnalyzeRow> = analyses.iter().map(AnalyzeRow::new).collect();
    write_rows(&rows, &args.output)?;
    Ok(0)
}

#[derive(Debug, Serialize)]
struct SimulateRow {
    m: f64,
    r: f64,
    h: f64,
    p: f64,
    n: usize,
    seed: u64,
    stream: u64,
    mdr_pct: f64,
    avg_latency_ms: f64,
    jitter_ms: f64,
    undelivered: usize,
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<i32, CliError> {
    let work = workload_from_args(&args.scenario)?;
    if args.trace.is_some() && work.scenarios.len() != 1 {
        return Err(CliError::usage("--trace needs a single scenario"));
    }
    if args.sim.n == 0 {
        return Err(CliError::usage("--n must be at least 1"));
    }
    let mut rows = Vec::new();
    for (i, sp) in work.scenarios.iter().enumerate() {
        let mut sc = sim_config(&args.sim, i as u64);
        sc.record_delays = args.trace.is_some();
        let res = run_sim(sp, &sc).map_err(|e| CliError::usage(e.to_string()))?;
        if let Some(path) = &args.trace {
            let f = File::create(path)
                .map_err(|e| CliError::usage(format!("cannot create {}: {e}", path.display())))?;
            write_delay_trace(BufWriter::new(f), sp, &sc, &res.delays_ms).map_err(CliError::io)?;
        }
        rows.push(SimulateRow {
            m: sp.size_ratio,
            r: sp.publish_period_ms,
            h: sp.heartbeat_period_ms,
            p: sp.delivery_prob,
            n: sc.n_messages,
            seed: sc.seed,
            stream: sc.stream,
            mdr_pct: res.metrics.mdr_pct,
            avg_latency_ms: res.metrics.avg_latency_ms,
            jitter_ms: res.metrics.jitter_ms,
            undelivered: res.undelivered,
        });
    }
    write_rows(&rows, &args.output)?;
    Ok(0)
}

#[derive(Debug, Serialize)]
struct SweepRow {
    m: f64,
    r: f64,
    h: f64,
    p: f64,
    mdr_pct: Option<f64>,
    avg_latency_ms: Option<f64>,
    jitter_ms: Option<f64>,
    sim_mdr_pct: Option<f64>,
    sim_avg_latency_ms: Option<f64>,
    sim_jitter_ms: Option<f64>,
}

#[derive(Debug, Serialize)]
struct PlotPoint {
    m: f64,
    r: f64,
    h: f64,
    p: f64,
    source: &'static str,
    metric: &'static str,
    value: f64,
}

fn plot_points(sp: &ScenarioParams, source: &'static str, lm: &LatencyMetrics) -> [PlotPoint; 3] {
    let point = |metric, value| PlotPoint {
        m: sp.size_ratio,
        r: sp.publish_period_ms,
        h: sp.heartbeat_period_ms,
        p: sp.delivery_prob,
        source,
        metric,
        value,
    };
    [
        point("mdr_pct", lm.mdr_pct),
        point("avg_latency_ms", lm.avg_latency_ms),
        point("jitter_ms", lm.jitter_ms),
    ]
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<i32, CliError> {
    let work = load_workload(&args.grid)?;
    let cfg = apply_solver_flags(work.solver, &args.solver)?;
    let results = par_map(&work.scenarios, args.jobs, |i, sp| {
        let analytic = match args.mode.analytic() {
            true => Some(analyze(sp, &cfg).map(|a| a.metrics)).transpose(),
            false => Ok(None),
        }?;
        let simulated = match args.mode.simulate() {
            true => Some(run_sim(sp, &sim_config(&args.sim, i as u64)).map(|r| r.metrics)).transpose(),
            false => Ok(None),
        }?;
        Ok::<_, pla_core::Error>((analytic, simulated))
    })?
    .into_iter()
    .collect::<Result<Vec<_>, _>>()
    .map_err(|e| CliError::usage(e.to_string()))?;

    let rows: Vec<SweepRow> = work
        .scenarios
        .iter()
        .zip(&results)
        .map(|(sp, (a, s))| SweepRow {
            m: sp.size_ratio,
            r: sp.publish_period_ms,
            h: sp.heartbeat_period_ms,
            p: sp.delivery_prob,
            mdr_pct: a.map(|x| x.mdr_pct),
            avg_latency_ms: a.map(|x| x.avg_latency_ms),
            jitter_ms: a.map(|x| x.jitter_ms),
            sim_mdr_pct: s.map(|x| x.mdr_pct),
            sim_avg_latency_ms: s.map(|x| x.avg_latency_ms),
            sim_jitter_ms: s.map(|x| x.jitter_ms),
        })
        .collect();
    write_rows(&rows, &args.output)?;

    if let Some(path) = &args.plot_data {
        let mut points = Vec::new();
        for (sp, (a, s)) in work.scenarios.iter().zip(&results) {
            if let Some(a) = a {
                points.extend(plot_points(sp, "analytic", a));
            }
            if let Some(s) = s {
                points.extend(plot_points(sp, "simulated", s));
            }
        }
        let f = File::create(path)
            .map_err(|e| CliError::usage(format!("cannot create {}: {e}", path.display())))?;
        write_rows_to(BufWriter::new(f), &points, Format::Csv)?;
    }
    Ok(0)
}

/// Per-row tolerances on the analytic columns.
const MDR_TIGHT: f64 = 0.10;
const MDR_LOOSE: f64 = 0.50;
const LAT_TIGHT_PCT: f64 = 1.0;
const LAT_SMALL_MS: f64 = 5.0;
const LAT_SMALL_ABS: f64 = 0.05;
const LAT_LOOSE_PCT: f64 = 3.0;
const JIT_TIGHT_PCT: f64 = 2.0;
const JIT_LOOSE_PCT: f64 = 6.0;

#[derive(Debug, Serialize)]
struct ValidateRow {
    idx: u32,
    r: f64,
    h: f64,
    m: f64,
    p: f64,
    mdr_a: f64,
    lat_a: f64,
    jit_a: f64,
    mdr_e: f64,
    lat_e: f64,
    jit_e: f64,
    our_mdr: Option<f64>,
    our_lat: Option<f64>,
    our_jit: Option<f64>,
    d_mdr: Option<f64>,
    d_lat_pct: Option<f64>,
    d_jit_pct: Option<f64>,
    within_tolerance: Option<bool>,
    sim_mdr: Option<f64>,
    sim_lat: Option<f64>,
    sim_jit: Option<f64>,
    sim_mdr_within_3sigma: Option<bool>,
}

#[derive(Debug, Default, Serialize)]
struct ToleranceShares {
    mdr_tight_pct: f64,
    latency_tight_pct: f64,
    jitter_tight_pct: f64,
    rows_outside_loose: usize,
    pass: bool,
}

#[derive(Debug, Serialize)]
struct ValidateSummary {
    rows: usize,
    analytic: Option<ToleranceShares>,
    /// Our analytic metrics against the measured columns.
    analytic_vs_measured: Option<ErrorSummary>,
    /// Our simulator against the measured columns.
    simulated_vs_measured: Option<ErrorSummary>,
    /// The stored error columns.
    reference_errors: ErrorSummary,
    published: ErrorSummary,
}

#[derive(Debug, Serialize)]
struct ValidateReport<'a> {
    summary: &'a ValidateSummary,
    rows: &'a [ValidateRow],
}

fn rel_pct(ours: f64, theirs: f64) -> f64 {
    100.0 * (ours - theirs) / theirs
}

fn errors_vs_measured(rows: &[ReferenceRow], ours: &[LatencyMetrics]) -> Result<ErrorSummary, CliError> {
    let errs: Vec<_> = rows
        .iter()
        .zip(ours)
        .map(|(r, m)| {
            (
                (m.mdr_pct - r.mdr_e).abs(),
                rel_pct(m.avg_latency_ms, r.lat_e).abs(),
                rel_pct(m.jitter_ms, r.jit_e).abs(),
            )
        })
        .collect();
    ErrorSummary::from_errors(&errs).map_err(|e| CliError::usage(e.to_string()))
}

pub fn cmd_validate(args: &ValidateArgs) -> Result<i32, CliError> {
    let reference = load_reference_rows(args.reference.as_ref())?;
    let cfg = apply_solver_flags(SolverConfig::default(), &args.solver)?;
    let params: Vec<ScenarioParams> = reference.iter().map(|r| r.params()).collect();
    let analytic: Option<Vec<LatencyMetrics>> = if args.mode.analytic() {
        Some(
            analyze_all(&params, &cfg, args.jobs)?
                .into_iter()
                .map(|a| a.metrics)
                .collect(),
        )
    } else {
        None
    };
    let simulated: Option<Vec<LatencyMetrics>> = if args.mode.simulate() {
        let runs = par_map(&reference, args.jobs, |_, row| {
            run_sim(&row.params(), &sim_config(&args.sim, row.idx as u64)).map(|r| r.metrics)
        })?;
        Some(
            runs.into_iter()
                .collect::<Result<_, _>>()
                .map_err(|e| CliError::usage(e.to_string()))?,
        )
    } else {
        None
    };

    let mut shares = ToleranceShares::default();
    let mut failing = Vec::new();
    let mut rows = Vec::with_capacity(reference.len());
    for (i, r) in reference.iter().enumerate() {
        let a = analytic.as_ref().map(|v| v[i]);
        let s = simulated.as_ref().map(|v| v[i]);
        let d_mdr = a.map(|m| m.mdr_pct - r.mdr_a);
        let d_lat = a.map(|m| rel_pct(m.avg_latency_ms, r.lat_a));
        let d_jit = a.map(|m| rel_pct(m.jitter_ms, r.jit_a));
        let within = a.map(|m| {
            let (dm, dl, dj) = (d_mdr.unwrap().abs(), d_lat.unwrap().abs(), d_jit.unwrap().abs());
            let lat_abs = (m.avg_latency_ms - r.lat_a).abs();
            shares.mdr_tight_pct += (dm <= MDR_TIGHT) as u8 as f64;
            shares.latency_tight_pct +=
                (dl <= LAT_TIGHT_PCT || (r.lat_a < LAT_SMALL_MS && lat_abs <= LAT_SMALL_ABS)) as u8 as f64;
            shares.jitter_tight_pct += (dj <= JIT_TIGHT_PCT) as u8 as f64;
            dm <= MDR_LOOSE && dl <= LAT_LOOSE_PCT && dj <= JIT_LOOSE_PCT
        });
        if within == Some(false) {
            failing.push(r.idx);
        }
        let sim_within = s.map(|m| {
            let q = r.mdr_e / 100.0;
            let sigma = 100.0 * (q * (1.0 - q) / args.sim.n as f64).sqrt();
            (m.mdr_pct - r.mdr_e).abs() <= 3.0 * sigma
        });
        rows.push(ValidateRow {
            idx: r.idx,
            r: r.r,
            h: r.h,
            m: r.m,
            p: r.p,
            mdr_a: r.mdr_a,
            lat_a: r.lat_a,
            jit_a: r.jit_a,
            mdr_e: r.mdr_e,
            lat_e: r.lat_e,
            jit_e: r.jit_e,
            our_mdr: a.map(|m| m.mdr_pct),
            our_lat: a.map(|m| m.avg_latency_ms),
            our_jit: a.map(|m| m.jitter_ms),
            d_mdr,
            d_lat_pct: d_lat,
            d_jit_pct: d_jit,
            within_tolerance: within,
            sim_mdr: s.map(|m| m.mdr_pct),
            sim_lat: s.map(|m| m.avg_latency_ms),
            sim_jit: s.map(|m| m.jitter_ms),
            sim_mdr_within_3sigma: sim_within,
        });
    }

    let n = reference.len();
    let analytic_shares = analytic.as_ref().map(|_| {
        let to_pct = |v: f64| 100.0 * v / n as f64;
        let s = ToleranceShares {
            mdr_tight_pct: to_pct(shares.mdr_tight_pct),
            latency_tight_pct: to_pct(shares.latency_tight_pct),
            jitter_tight_pct: to_pct(shares.jitter_tight_pct),
            rows_outside_loose: failing.len(),
            pass: false,
        };
        ToleranceShares {
            pass: s.mdr_tight_pct >= 90.0
                && s.latency_tight_pct >= 90.0
                && s.jitter_tight_pct >= 85.0
                && failing.is_empty(),
            ..s
        }
    });
    let summary = ValidateSummary {
        rows: n,
        analytic_vs_measured: analytic
            .as_deref()
            .map(|a| errors_vs_measured(&reference, a))
            .transpose()?,
        simulated_vs_measured: simulated
            .as_deref()
            .map(|s| errors_vs_measured(&reference, s))
            .transpose()?,
        analytic: analytic_shares,
        reference_errors: summarize_errors(&reference).map_err(|e| CliError::usage(e.to_string()))?,
        published: PUBLISHED_SUMMARY,
    };

    match args.output.format {
        Format::Csv => write_rows(&rows, &args.output)?,
        Format::Json => write_json(
            &ValidateReport {
                summary: &summary,
                rows: &rows,
            },
            &args.output,
        )?,
    }
    print_validate_summary(&summary, &failing);
    let pass = summary.analytic.as_ref().is_none_or(|s| s.pass);
    Ok(if pass { 0 } else { 1 })
}

fn print_summary_line(label: &str, s: &ErrorSummary) {
    eprintln!(
        "{label}: MDR {:.2} +/- {:.2}, latency {:.2}% +/- {:.2}, jitter {:.2}% +/- {:.2}",
        s.mdr_mean, s.mdr_std, s.latency_mean_pct, s.latency_std_pct, s.jitter_mean_pct, s.jitter_std_pct
    );
}

fn print_validate_summary(s: &ValidateSummary, failing: &[u32]) {
    if let Some(a) = &s.analytic {
        eprintln!(
            "analytic vs published analytic: MDR within {MDR_TIGHT} on {:.1}%, latency within {LAT_TIGHT_PCT}% on {:.1}%, jitter within {JIT_TIGHT_PCT}% on {:.1}%, {} rows outside loose bounds: {}",
            a.mdr_tight_pct,
            a.latency_tight_pct,
            a.jitter_tight_pct,
            a.rows_outside_loose,
            if a.pass { "PASS" } else { "FAIL" }
        );
        if !failing.is_empty() {
            eprintln!("failing rows: {failing:?}");
        }
    }
    if let Some(e) = &s.analytic_vs_measured {
        print_summary_line("analytic vs measured", e);
    }
    if let Some(e) = &s.simulated_vs_measured {
        print_summary_line("simulated vs measured", e);
    }
    print_summary_line("reference error columns", &s.reference_errors);
    print_summary_line("published summary", &s.published);
}

#[derive(Debug, Serialize)]
struct ReportRow {
    metric: &'static str,
    mean: f64,
    std: f64,
    published_mean: f64,
    published_std: f64,
}

pub fn cmd_report(args: &ReportArgs) -> Result<i32, CliError> {
    let reference = load_reference_rows(args.reference.as_ref())?;
    let s = summarize_errors(&reference).map_err(|e| CliError::usage(e.to_string()))?;
    let p = PUBLISHED_SUMMARY;
    let rows = [
        ReportRow {
            metric: "mdr",
            mean: s.mdr_mean,
            std: s.mdr_std,
            published_mean: p.mdr_mean,
            published_std: p.mdr_std,
        },
        ReportRow {
            metric: "avg_latency_pct",
            mean: s.latency_mean_pct,
            std: s.latency_std_pct,
            published_mean: p.latency_mean_pct,
            published_std: p.latency_std_pct,
        },
        ReportRow {
            metric: "jitter_pct",
            mean: s.jitter_mean_pct,
            std: s.jitter_std_pct,
            published_mean: p.jitter_mean_pct,
            published_std: p.jitter_std_pct,
        },
    ];
    write_rows(&rows, &args.output)?;
    Ok(0)
}

use std::fs;
use std::path::{Path, PathBuf};

use pla_core::reference::{self, ReferenceRow, REFERENCE_FILE};
use pla_core::{JitterMode, ScenarioParams, SolverConfig, TimelineMode};
use serde::Deserialize;

use crate::args::{Jitter, ScenarioArgs, SolverArgs, Timeline};
use crate::CliError;

pub const DATA_DIR_ENV: &str = "PLA_DATA_DIR";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    scenario: Option<ScenarioParams>,
    grid: Option<GridSpec>,
    solver: Option<SolverConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSpec {
    m: Vec<f64>,
    r: Vec<f64>,
    h: Vec<f64>,
    p: Vec<f64>,
    mtu: Option<u32>,
    hb_extra: Option<f64>,
}

/// Scenarios to evaluate plus solver settings from the file, if any.
#[derive(Debug)]
pub struct Workload {
    pub scenarios: Vec<ScenarioParams>,
    pub solver: SolverConfig,
}

fn checked(sp: ScenarioParams) -> Result<ScenarioParams, CliError> {
    let report = sp.validate();
    for w in report.warnings() {
        eprintln!("warning: {sp}: {}", w.message);
    }
    report
        .into_result()
        .map_err(|e| CliError::usage(format!("{sp}: {e}")))?;
    Ok(sp)
}

pub fn load_workload(path: &Path) -> Result<Workload, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let file: ScenarioFile =
        serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    let scenarios = match (file.scenario, file.grid) {
        (Some(s), None) => vec![checked(s)?],
        (None, Some(g)) => expand_grid(&g)?,
        _ => {
            return Err(CliError::usage(format!(
                "{}: expected exactly one of `scenario` or `grid`",
                path.display()
            )))
        }
    };
    let solver = file.solver.unwrap_or_default();
    solver
        .validate()
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    Ok(Workload { scenarios, solver })
}

/// Cartesian product in (r, h, m, p) order with p varying fastest.
fn expand_grid(g: &GridSpec) -> Result<Vec<ScenarioParams>, CliError> {
    for (name, v) in [("m", &g.m), ("r", &g.r), ("h", &g.h), ("p", &g.p)] {
        if v.is_empty() {
            return Err(CliError::usage(format!("empty grid: `{name}` has no values")));
        }
    }
    let mut out = Vec::new();
    for &r in &g.r {
        for &h in &g.h {
            for &m in &g.m {
                for &p in &g.p {
                    let sp = ScenarioParams {
                        size_ratio: m,
                        publish_period_ms: r,
                        heartbeat_period_ms: h,
                        delivery_prob: p,
                        mtu_bytes: g.mtu.unwrap_or(1500),
                        hb_extra_ms: g.hb_extra.unwrap_or(0.2),
                    };
                    out.push(checked(sp)?);
                }
            }
        }
    }
    Ok(out)
}

pub fn workload_from_args(args: &ScenarioArgs) -> Result<Workload, CliError> {
    if let Some(path) = &args.file {
        return load_workload(path);
    }
    let (Some(m), Some(r), Some(h), Some(p)) = (args.m, args.r, args.h, args.p) else {
        return Err(CliError::usage("give --m, --r, --h and --p, or --file"));
    };
    let sp = ScenarioParams {
        size_ratio: m,
        publish_period_ms: r,
        heartbeat_period_ms: h,
        delivery_prob: p,
        mtu_bytes: args.mtu,
        hb_extra_ms: args.hb_extra,
    };
    Ok(Workload {
        scenarios: vec![checked(sp)?],
        solver: SolverConfig::default(),
    })
}

pub fn apply_solver_flags(mut cfg: SolverConfig, flags: &SolverArgs) -> Result<SolverConfig, CliError> {
    if let Some(e) = flags.epsilon {
        cfg.epsilon = e;
    }
    if let Some(k) = flags.kmax {
        cfg.kmax_floor = k;
    }
    if let Some(t) = flags.timeline {
        cfg.timeline_mode = match t {
            Timeline::Nominal => TimelineMode::Nominal,
            Timeline::Drifted => TimelineMode::Drifted,
        };
    }
    if let Some(j) = flags.jitter {
        cfg.jitter_mode = match j {
            Jitter::PerMessage => JitterMode::PerMessage,
            Jitter::PhaseMeans => JitterMode::PhaseMeans,
        };
    }
    cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;
    Ok(cfg)
}

/// Explicit path, then `$PLA_DATA_DIR`, then the copy compiled into the
/// binary.
pub fn load_reference_rows(explicit: Option<&PathBuf>) -> Result<Vec<ReferenceRow>, CliError> {
    let path = explicit
        .cloned()
        .or_else(|| std::env::var_os(DATA_DIR_ENV).map(|d| PathBuf::from(d).join(REFERENCE_FILE)));
    match path {
        Some(p) => {
            reference::load_reference(&p).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))
        }
        None => Ok(reference::bundled_reference()),
    }
}

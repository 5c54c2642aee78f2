//! Delivery ratio, publish-to-heartbeat offsets, latency series and jitter.

use serde::Serialize;

use crate::error::Result;
use crate::model::{
    lcm, JitterMode, LatencyMetrics, ScenarioParams, SolverConfig, UnackedDistribution, GRID_MS,
};
use crate::operators::HeartbeatKernel;
use crate::steady_state::{grid_pair, solve_steady_state, SteadyStateCycle};

/// Residual mass above which a latency series counts as cut short.
pub const SERIES_FLAG_TOL: f64 = 1e-6;

/// Percentage of publishes that leave nothing unacked, averaged over phases.
pub fn mdr(q: &SteadyStateCycle) -> f64 {
    let n = q.dists.len() as f64;
    let pct = 100.0 * q.dists.iter().map(|d| d.acked()).sum::<f64>() / n;
    pct.clamp(0.0, 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OffsetCase {
    REqualsH,
    RLessThanH,
    RGreaterThanH,
}

/// Heartbeat pattern seen by publishes when heartbeats are more frequent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeartbeatPattern {
    /// `(l * h) mod r` for `l = 1..=L`.
    pub deltas_ms: Vec<f64>,
    /// `LCM(r, h) / h - 1`.
    pub weight_index: usize,
    /// Heartbeat rounds applied to a phase before reading its acked mass.
    pub weight_rounds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OffsetModel {
    pub case: OffsetCase,
    pub per_publish_tc_ms: Vec<f64>,
    pub pattern: Option<HeartbeatPattern>,
}

/// Mean position on an arc of length `r` of a circle of circumference `h`
/// starting at `start`.
pub fn arc_mean(start: f64, r: f64, h: f64) -> f64 {
    let s = start;
    let e = (s + r) % h;
    if e >= s {
        (e + s) / 2.0
    } else {
        ((h * h - s * s) / 2.0 + e * e / 2.0) / ((h - s) + e)
    }
}

/// Heartbeat offsets for `r > h`, from integer grid periods.
pub fn heartbeat_pattern(r_ticks: u64, h_ticks: u64) -> HeartbeatPattern {
    let mut len = 1;
    while ((len + 1) * h_ticks) / r_ticks != (len * h_ticks) / r_ticks {
        len += 1;
    }
    let deltas_ms = (1..=len)
        .map(|l| ((l * h_ticks) % r_ticks) as f64 * GRID_MS)
        .collect();
    let weight_index = (lcm(r_ticks, h_ticks) / h_ticks) as usize - 1;
    HeartbeatPattern {
        deltas_ms,
        weight_index,
        weight_rounds: weight_index.saturating_sub(1).max(1),
    }
}

/// Offset for `r > h` given the acked probability used to weight the first
/// heartbeat offset.
pub fn pattern_offset(deltas_ms: &[f64], acked_weight: f64) -> f64 {
    let rest: f64 = deltas_ms[1..].iter().sum();
    (acked_weight * deltas_ms[0] + rest) / deltas_ms.len() as f64
}

/// Expected time from each phase's publish to its first useful heartbeat.
///
/// Phase 1 is the publish at `t = 0 mod LCM(r, h)`.
pub fn offset_model(sp: &ScenarioParams, q: &SteadyStateCycle) -> Result<OffsetModel> {
    let (rt, ht) = grid_pair(sp.publish_period_ms, sp.heartbeat_period_ms)?;
    let r = rt as f64 * GRID_MS;
    let h = ht as f64 * GRID_MS;
    let n_phases = q.dists.len();
    if rt == ht {
        return Ok(OffsetModel {
            case: OffsetCase::REqualsH,
            per_publish_tc_ms: vec![r / 2.0; n_phases],
            pattern: None,
        });
    }
    if rt < ht {
        // The publish at (n-1)r sees the heartbeat grid shifted back by (n-1)r.
        let tcs = (0..n_phases as u64)
            .map(|i| {
                let start = (ht - (i * rt) % ht) % ht;
                arc_mean(start as f64 * GRID_MS, r, h)
            })
            .collect();
        return Ok(OffsetModel {
            case: OffsetCase::RLessThanH,
            per_publish_tc_ms: tcs,
            pattern: None,
        });
    }
    let pattern = heartbeat_pattern(rt, ht);
    let d = sp.derive();
    let mut hb = HeartbeatKernel::new(d.messages_per_packet, sp.delivery_prob);
    let tcs = q
        .dists
        .iter()
        .map(|p| {
            let w = hb.apply_n(p, pattern.weight_rounds).acked();
            pattern_offset(&pattern.deltas_ms, w)
        })
        .collect();
    Ok(OffsetModel {
        case: OffsetCase::RGreaterThanH,
        per_publish_tc_ms: tcs,
        pattern: Some(pattern),
    })
}

/// Latency moments of one phase from the heartbeat series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseLatency {
    pub mean_ms: f64,
    pub second_moment_ms2: f64,
    /// Mass not yet acked when the series stopped.
    pub residual: f64,
    pub terms: usize,
    pub truncated: bool,
}

/// Expected latency of one phase: the acked mass gained at heartbeat `v`
/// arrives `(v - 1) h + tc` after the publish.
pub fn phase_latency(
    dist: &UnackedDistribution,
    tc_ms: f64,
    h_ms: f64,
    hb: &mut HeartbeatKernel,
    cfg: &SolverConfig,
) -> PhaseLatency {
    let mut cur = dist.clone();
    let mut prev = cur.acked();
    let (mut m1, mut m2) = (0.0, 0.0);
    let mut v = 0usize;
    while 1.0 - prev >= cfg.series_tail_tol && v < cfg.series_max_v {
        v += 1;
        cur = hb.apply(&cur);
        let acked = cur.acked();
        let t = (v - 1) as f64 * h_ms + tc_ms;
        let gained = acked - prev;
        m1 += gained * t;
        m2 += gained * t * t;
        prev = acked;
    }
    let residual = (1.0 - prev).max(0.0);
    if residual > 0.0 {
        let t = v.saturating_sub(1) as f64 * h_ms + tc_ms;
        m1 += residual * t;
        m2 += residual * t * t;
    }
    PhaseLatency {
        mean_ms: m1,
        second_moment_ms2: m2,
        residual,
        terms: v,
        truncated: residual > SERIES_FLAG_TOL,
    }
}

/// Mean of the phase latencies.
pub fn aggregate_latency(phases: &[PhaseLatency]) -> f64 {
    phases.iter().map(|p| p.mean_ms).sum::<f64>() / phases.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JitterEstimate {
    pub jitter_ms: f64,
    /// Raw variance before clamping; negative only from rounding.
    pub variance: f64,
    pub clamped: bool,
}

pub fn jitter(phases: &[PhaseLatency], mode: JitterMode) -> JitterEstimate {
    let n = phases.len() as f64;
    let mean = aggregate_latency(phases);
    let second = match mode {
        JitterMode::PerMessage => phases.iter().map(|p| p.second_moment_ms2).sum::<f64>() / n,
        JitterMode::PhaseMeans => phases.iter().map(|p| p.mean_ms * p.mean_ms).sum::<f64>() / n,
    };
    let variance = second - mean * mean;
    JitterEstimate {
        jitter_ms: variance.max(0.0).sqrt(),
        variance,
        clamped: variance < 0.0,
    }
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub params: ScenarioParams,
    pub cycle: SteadyStateCycle,
    pub offsets: OffsetModel,
    pub phases: Vec<PhaseLatency>,
    pub metrics: LatencyMetrics,
    pub warnings: Vec<String>,
}

/// Full analytic pipeline for one scenario.
pub fn analyze(sp: &ScenarioParams, cfg: &SolverConfig) -> Result<Analysis> {
    let mut warnings: Vec<String> = sp
        .validate()
        .into_result()?
        .into_iter()
        .map(|d| d.message)
        .collect();
    let cycle = solve_steady_state(sp, cfg)?;
    if !cycle.converged {
        warnings.push(format!(
            "steady state not converged after {} cycles (distance {:.3e})",
            cycle.cycles_used, cycle.final_distance
        ));
    }
    if cycle.tail_mass > cfg.tail_tol {
        warnings.push(format!(
            "top bucket k_max = {} holds {:.3e} probability",
            cycle.k_max, cycle.tail_mass
        ));
    }
    let offsets = offset_model(sp, &cycle)?;
    let d = sp.derive();
    let mut hb = HeartbeatKernel::new(d.messages_per_packet, sp.delivery_prob);
    let phases: Vec<PhaseLatency> = cycle
        .dists
        .iter()
        .zip(&offsets.per_publish_tc_ms)
        .map(|(p, &tc)| phase_latency(p, tc, sp.heartbeat_period_ms, &mut hb, cfg))
        .collect();
    if let Some(worst) = phases
        .iter()
        .filter(|p| p.truncated)
        .map(|p| p.residual)
        .reduce(f64::max)
    {
        warnings.push(format!("series truncated early (residual {worst:.3e})"));
    }
    let jit = jitter(&phases, cfg.jitter_mode);
    if jit.clamped {
        warnings.push(format!("negative variance {:.3e} clamped to 0", jit.variance));
    }
    let metrics = LatencyMetrics {
        mdr_pct: mdr(&cycle),
        avg_latency_ms: aggregate_latency(&phases),
        jitter_ms: jit.jitter_ms,
    };
    Ok(Analysis {
        params: *sp,
        cycle,
        offsets,
        phases,
        metrics,
        warnings,
    })
}

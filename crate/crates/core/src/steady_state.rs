//! Event timeline and the cyclic steady-state solver.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    grid_ticks, lcm, ScenarioParams, SolverConfig, TimelineMode, UnackedDistribution, GRID_MS,
};
use crate::operators::{HeartbeatKernel, PublishKernel};

/// Relative tolerance when comparing real event times.
const TIE_TOL: f64 = 1e-9;

/// k_max doublings allowed before giving up on the tail tolerance.
const MAX_KMAX_DOUBLINGS: u32 = 10;

/// Number of publishes in one steady-state cycle, `LCM(r, h) / r` on the
/// 0.1 ms grid.
pub fn period_r(r_ms: f64, h_ms: f64) -> Result<usize> {
    let (rt, ht) = grid_pair(r_ms, h_ms)?;
    Ok((lcm(rt, ht) / rt) as usize)
}

pub(crate) fn grid_pair(r_ms: f64, h_ms: f64) -> Result<(u64, u64)> {
    match (grid_ticks(r_ms), grid_ticks(h_ms)) {
        (Some(rt), Some(ht)) => Ok((rt, ht)),
        _ => Err(Error::Incommensurable {
            r: r_ms,
            h: h_ms,
            grid_ms: GRID_MS,
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EventKind {
    Publish,
    Heartbeat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Event {
    pub time_ms: f64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventTimeline {
    pub events: Vec<Event>,
    pub horizon_ms: f64,
}

/// Unbounded, merged publish/heartbeat sequence. Publishes win ties.
#[derive(Debug, Clone)]
pub struct EventStream {
    publish_ms: f64,
    heartbeat_ms: f64,
    // Integer grid periods; exact tie detection in nominal mode.
    ticks: Option<(u64, u64)>,
    next_pub: u64,
    next_hb: u64,
}

impl EventStream {
    pub fn new(sp: &ScenarioParams, mode: TimelineMode) -> Self {
        let heartbeat_ms = match mode {
            TimelineMode::Nominal => sp.heartbeat_period_ms,
            TimelineMode::Drifted => sp.drifted_heartbeat_ms(),
        };
        let ticks = match mode {
            TimelineMode::Nominal => grid_pair(sp.publish_period_ms, heartbeat_ms).ok(),
            TimelineMode::Drifted => None,
        };
        Self {
            publish_ms: sp.publish_period_ms,
            heartbeat_ms,
            ticks,
            next_pub: 0,
            next_hb: 0,
        }
    }

    fn publish_first(&self) -> bool {
        match self.ticks {
            Some((rt, ht)) => self.next_pub * rt <= self.next_hb * ht,
            None => {
                let tp = self.next_pub as f64 * self.publish_ms;
                let th = self.next_hb as f64 * self.heartbeat_ms;
                tp <= th + TIE_TOL * th.abs().max(1.0)
            }
        }
    }

    pub fn peek_time(&self) -> f64 {
        if self.publish_first() {
            self.next_pub as f64 * self.publish_ms
        } else {
            self.next_hb as f64 * self.heartbeat_ms
        }
    }
}

impl Iterator for EventStream {
    type Item = Event;

    fn next(&mut self) -> Option<Event> {
        let ev = if self.publish_first() {
            self.next_pub += 1;
            Event {
                time_ms: (self.next_pub - 1) as f64 * self.publish_ms,
                kind: EventKind::Publish,
            }
        } else {
            self.next_hb += 1;
            Event {
                time_ms: (self.next_hb - 1) as f64 * self.heartbeat_ms,
                kind: EventKind::Heartbeat,
            }
        };
        Some(ev)
    }
}

/// All events with time at most `horizon_ms`.
pub fn build_timeline(sp: &ScenarioParams, cfg: &SolverConfig, horizon_ms: f64) -> EventTimeline {
    let limit = horizon_ms + TIE_TOL * horizon_ms.abs().max(1.0);
    let mut stream = EventStream::new(sp, cfg.timeline_mode);
    let mut events = Vec::new();
    while stream.peek_time() <= limit {
        events.extend(stream.next());
    }
    EventTimeline { events, horizon_ms }
}

/// Post-publish distributions of one cycle plus convergence metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateCycle {
    pub dists: Vec<UnackedDistribution>,
    pub period_r: usize,
    pub converged: bool,
    pub cycles_used: usize,
    pub final_distance: f64,
    pub k_max: usize,
    /// Largest top-bucket mass over the cycle.
    pub tail_mass: f64,
}

impl SteadyStateCycle {
    /// Rotates phases so that `dists[0]` becomes `dists[shift]`.
    pub fn rotated(&self, shift: usize) -> Self {
        let mut out = self.clone();
        out.dists.rotate_left(shift % self.period_r.max(1));
        out
    }
}

/// L-infinity distance over all phases and counts.
pub fn cycle_distance(a: &SteadyStateCycle, b: &SteadyStateCycle) -> Result<f64> {
    dists_distance(&a.dists, &b.dists)
}

fn dists_distance(a: &[UnackedDistribution], b: &[UnackedDistribution]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::CycleLengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| x.linf_distance(y))
        .fold(0.0, f64::max))
}

/// Walks the event stream, applying the operators and truncating at a fixed
/// `k_max`.
pub struct CycleWalker {
    stream: EventStream,
    publish: PublishKernel,
    heartbeat: HeartbeatKernel,
    k_max: usize,
    state: UnackedDistribution,
}

impl CycleWalker {
    pub fn new(sp: &ScenarioParams, mode: TimelineMode, k_max: usize) -> Self {
        let d = sp.derive();
        Self {
            stream: EventStream::new(sp, mode),
            publish: PublishKernel::new(d.packets_per_publish, sp.delivery_prob),
            heartbeat: HeartbeatKernel::new(d.messages_per_packet, sp.delivery_prob),
            k_max,
            state: UnackedDistribution::zero().fold_to(k_max),
        }
    }

    pub fn set_state(&mut self, dist: UnackedDistribution) {
        self.state = dist.fold_to(self.k_max);
    }

    pub fn state(&self) -> &UnackedDistribution {
        &self.state
    }

    /// Processes events up to and including the next publish and returns the
    /// distribution right after it.
    pub fn next_publish(&mut self) -> UnackedDistribution {
        loop {
            let ev = self.stream.next().expect("event stream is unbounded");
            match ev.kind {
                EventKind::Heartbeat => self.state = self.heartbeat.apply(&self.state),
                EventKind::Publish => {
                    self.state = self.publish.apply(&self.state).fold_to(self.k_max);
                    return self.state.clone();
                }
            }
        }
    }

    pub fn take_publishes(&mut self, n: usize) -> Vec<UnackedDistribution> {
        (0..n).map(|_| self.next_publish()).collect()
    }
}

/// Iterates whole cycles from the empty state until consecutive cycles agree
/// within `epsilon`. Restarts with a doubled `k_max` whenever the top bucket
/// holds more than `tail_tol`.
pub fn solve_steady_state(sp: &ScenarioParams, cfg: &SolverConfig) -> Result<SteadyStateCycle> {
    sp.validate().into_result()?;
    cfg.validate()?;
    let period = period_r(sp.publish_period_ms, sp.heartbeat_period_ms)?;
    let u = sp.derive().packets_per_publish;
    let mut k_max = cfg.kmax_floor.max(10 * u);
    let mut doublings = 0;
    loop {
        let cycle = solve_fixed_kmax(sp, cfg, period, k_max);
        if cycle.tail_mass <= cfg.tail_tol || doublings == MAX_KMAX_DOUBLINGS {
            return Ok(cycle);
        }
        k_max *= 2;
        doublings += 1;
    }
}

fn solve_fixed_kmax(
    sp: &ScenarioParams,
    cfg: &SolverConfig,
    period: usize,
    k_max: usize,
) -> SteadyStateCycle {
    let mut walker = CycleWalker::new(sp, cfg.timeline_mode, k_max);
    let mut old = vec![UnackedDistribution::zero().fold_to(k_max); period];
    let mut cycles_used = 0;
    let mut distance = f64::INFINITY;
    let mut converged = false;
    while cycles_used < cfg.max_cycles {
        let snaps = walker.take_publishes(period);
        cycles_used += 1;
        distance = dists_distance(&snaps, &old).expect("equal cycle lengths");
        old = snaps;
        if distance < cfg.epsilon {
            converged = true;
            break;
        }
        if top_mass(&old) > cfg.tail_tol && cycles_used > 1 {
            // Early exit: the caller will retry with a wider support.
            break;
        }
    }
    SteadyStateCycle {
        tail_mass: top_mass(&old),
        dists: old,
        period_r: period,
        converged,
        cycles_used,
        final_distance: distance,
        k_max,
    }
}

fn top_mass(dists: &[UnackedDistribution]) -> f64 {
    dists.iter().map(|d| d.get(d.k_max() as i64)).fold(0.0, f64::max)
}

/// Runs one more cycle starting from the last phase of `q` and returns the
/// resulting post-publish snapshots. A converged cycle maps to itself.
pub fn propagate_cycle(
    sp: &ScenarioParams,
    cfg: &SolverConfig,
    q: &SteadyStateCycle,
) -> Vec<UnackedDistribution> {
    let mut walker = CycleWalker::new(sp, cfg.timeline_mode, q.k_max);
    walker.take_publishes(q.period_r);
    walker.set_state(q.dists[q.period_r - 1].clone());
    walker.take_publishes(q.period_r)
}

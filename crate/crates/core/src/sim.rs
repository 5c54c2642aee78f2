//! Seeded discrete-event simulation of the heartbeat/AckNack loop.
//!
//! Propagation is instantaneous and every packet is lost independently with
//! probability `1 - p`. Messages are handed to the application in order.

use std::collections::BTreeSet;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{LatencyMetrics, ScenarioParams};

const TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub n_messages: usize,
    pub seed: u64,
    /// Independent RNG stream, e.g. the scenario index in a sweep.
    pub stream: u64,
    /// Keep heartbeating after the last publish until everything arrives.
    pub drain: bool,
    pub record_delays: bool,
    pub record_events: bool,
    /// Delays at or below this count as on time for the delivery ratio.
    pub zero_delay_threshold_ms: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_messages: 5000,
            seed: 0,
            stream: 0,
            drain: true,
            record_delays: true,
            record_events: false,
            zero_delay_threshold_ms: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SimEventKind {
    Publish {
        seq: usize,
    },
    /// `missing` RTPS messages at send time; `answered` when both the
    /// heartbeat and its AckNack got through.
    Heartbeat {
        missing: usize,
        answered: bool,
    },
    /// The heartbeat timer went idle: nothing left to repair.
    TimerStopped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimEvent {
    pub time_ms: f64,
    pub kind: SimEventKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    /// Per-message delays in publish order, for delivered messages only.
    /// Empty unless `record_delays` is set.
    pub delays_ms: Vec<f64>,
    pub metrics: LatencyMetrics,
    pub undelivered: usize,
    pub events: Vec<SimEvent>,
}

struct Publisher<'a> {
    sp: &'a ScenarioParams,
    rng: ChaCha8Rng,
    units_per_msg: usize,
    units_per_packet: usize,
    missing: BTreeSet<usize>,
    missing_per_msg: Vec<usize>,
    completed_ms: Vec<Option<f64>>,
    events: Option<Vec<SimEvent>>,
}

impl Publisher<'_> {
    fn arrives(&mut self) -> bool {
        self.rng.random::<f64>() < self.sp.delivery_prob
    }

    fn log(&mut self, time_ms: f64, kind: SimEventKind) {
        if let Some(ev) = self.events.as_mut() {
            ev.push(SimEvent { time_ms, kind });
        }
    }

    fn publish(&mut self, seq: usize, t: f64) {
        self.log(t, SimEventKind::Publish { seq });
        let mut lost = 0;
        for j in 0..self.units_per_msg {
            if !self.arrives() {
                self.missing.insert(seq * self.units_per_msg + j);
                lost += 1;
            }
        }
        self.missing_per_msg[seq] = lost;
        if lost == 0 {
            self.completed_ms[seq] = Some(t);
        }
    }

    fn heartbeat(&mut self, t: f64) {
        let answered = self.arrives() && self.arrives();
        let missing = self.missing.len();
        self.log(t, SimEventKind::Heartbeat { missing, answered });
        if !answered {
            return;
        }
        let wanted: Vec<usize> = self.missing.iter().copied().collect();
        for packet in wanted.chunks(self.units_per_packet) {
            if !self.arrives() {
                continue;
            }
            for &unit in packet {
                self.missing.remove(&unit);
                let seq = unit / self.units_per_msg;
                self.missing_per_msg[seq] -= 1;
                if self.missing_per_msg[seq] == 0 {
                    self.completed_ms[seq] = Some(t);
                }
            }
        }
    }
}

/// Runs one seeded simulation.
///
/// Each publish sends `ceil(m)` packets. The heartbeat timer (period
/// `h + hb_extra_ms`) is armed `h` after a publish that finds it idle. On a
/// tick the timer goes idle if nothing is missing and a heartbeat already
/// went out since the newest publish; otherwise a heartbeat is sent and, if
/// it and the AckNack both arrive, all missing messages are retransmitted
/// `ceil(1/m)` per packet.
pub fn run_sim(sp: &ScenarioParams, sc: &SimConfig) -> Result<SimResult> {
    sp.validate().into_result()?;
    if sc.n_messages == 0 {
        return Err(Error::Empty("simulation needs at least one message"));
    }
    let d = sp.derive();
    let n = sc.n_messages;
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    rng.set_stream(sc.stream);
    let mut pb = Publisher {
        sp,
        rng,
        units_per_msg: d.packets_per_publish,
        units_per_packet: d.messages_per_packet,
        missing: BTreeSet::new(),
        missing_per_msg: vec![0; n],
        completed_ms: vec![None; n],
        events: sc.record_events.then(Vec::new),
    };

    let r = sp.publish_period_ms;
    let period = sp.drifted_heartbeat_ms();
    let mut tick: Option<f64> = None;
    let mut hb_since_publish = false;
    let mut next = 0usize;
    loop {
        let t_pub = (next < n).then_some(next as f64 * r);
        let publish_due = match (t_pub, tick) {
            (Some(tp), Some(t)) => tp <= t + TIE_TOL * t.max(1.0),
            (Some(_), None) => true,
            (None, _) => false,
        };
        if let (true, Some(tp)) = (publish_due, t_pub) {
            pb.publish(next, tp);
            hb_since_publish = false;
            tick = Some(match tick {
                None => tp + sp.heartbeat_period_ms,
                // Near-tie resolved publish first: keep the heartbeat from
                // running before the publish it follows.
                Some(t) => t.max(tp),
            });
            next += 1;
            continue;
        }
        let Some(t) = tick else { break };
        if t_pub.is_none() && !sc.drain {
            break;
        }
        if hb_since_publish && pb.missing.is_empty() {
            pb.log(t, SimEventKind::TimerStopped);
            tick = None;
            continue;
        }
        pb.heartbeat(t);
        hb_since_publish = true;
        tick = Some(t + period);
    }

    let delays = in_order_delays(&pb.completed_ms, r);
    let undelivered = n - delays.len();
    let metrics = if delays.is_empty() {
        LatencyMetrics {
            mdr_pct: 0.0,
            avg_latency_ms: f64::NAN,
            jitter_ms: f64::NAN,
        }
    } else {
        empirical_metrics_with_threshold(&delays, sc.zero_delay_threshold_ms)?
    };
    Ok(SimResult {
        delays_ms: if sc.record_delays { delays } else { Vec::new() },
        metrics,
        undelivered,
        events: pb.events.unwrap_or_default(),
    })
}

/// Delivery is in order: a message is handed over no earlier than its
/// predecessor. Stops at the first message that never completed.
fn in_order_delays(completed_ms: &[Option<f64>], r: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(completed_ms.len());
    let mut last = f64::NEG_INFINITY;
    for (i, c) in completed_ms.iter().enumerate() {
        let Some(done) = *c else { break };
        let published = i as f64 * r;
        last = last.max(done);
        out.push(last - published);
    }
    out
}

pub fn empirical_metrics(delays: &[f64]) -> Result<LatencyMetrics> {
    empirical_metrics_with_threshold(delays, 0.0)
}

/// Delivery ratio (share of delays at or below `threshold_ms`), mean delay
/// and population standard deviation.
pub fn empirical_metrics_with_threshold(delays: &[f64], threshold_ms: f64) -> Result<LatencyMetrics> {
    if delays.is_empty() {
        return Err(Error::Empty("no delays"));
    }
    let n = delays.len() as f64;
    let on_time = delays.iter().filter(|&&d| d <= threshold_ms).count() as f64;
    let mean = delays.iter().sum::<f64>() / n;
    let var = delays.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n;
    Ok(LatencyMetrics {
        mdr_pct: 100.0 * on_time / n,
        avg_latency_ms: mean,
        jitter_ms: var.sqrt(),
    })
}

/// One delay per line after a `#` header naming the scenario and seed.
pub fn write_delay_trace<W: Write>(
    mut w: W,
    sp: &ScenarioParams,
    sc: &SimConfig,
    delays: &[f64],
) -> io::Result<()> {
    writeln!(
        w,
        "# m={} r={} h={} p={} hb_extra={} seed={} stream={} n={}",
        sp.size_ratio,
        sp.publish_period_ms,
        sp.heartbeat_period_ms,
        sp.delivery_prob,
        sp.hb_extra_ms,
        sc.seed,
        sc.stream,
        sc.n_messages
    )?;
    for d in delays {
        writeln!(w, "{d}")?;
    }
    Ok(())
}

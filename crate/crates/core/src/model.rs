//! Shared domain types: scenario parameters, unacked-count distributions,
//! metric triples and solver configuration.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Resolution of the time grid on which publish and heartbeat periods are
/// integerized when computing cycle lengths and offsets.
pub const GRID_MS: f64 = 0.1;

/// Tolerance used when deciding whether a real ratio is "really" an integer.
const INTEGRAL_TOL: f64 = 1e-9;

/// Converts a period to integer grid ticks, or `None` when it does not sit on
/// the grid.
pub(crate) fn grid_ticks(ms: f64) -> Option<u64> {
    let scaled = ms / GRID_MS;
    let rounded = scaled.round();
    if rounded < 1.0 || (scaled - rounded).abs() > 1e-6 * rounded.max(1.0) {
        return None;
    }
    Some(rounded as u64)
}

pub(crate) fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub(crate) fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

fn snapped_ceil(x: f64) -> u64 {
    let rounded = x.round();
    if (x - rounded).abs() <= INTEGRAL_TOL * rounded.max(1.0) {
        rounded as u64
    } else {
        x.ceil() as u64
    }
}

fn is_integral(x: f64) -> bool {
    (x - x.round()).abs() <= INTEGRAL_TOL * x.round().abs().max(1.0)
}

/// One analyzable configuration of a reliable publisher/subscriber pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioParams {
    /// Total message size divided by the MTU.
    #[serde(rename = "m")]
    pub size_ratio: f64,
    #[serde(rename = "r")]
    pub publish_period_ms: f64,
    /// Nominal heartbeat period.
    #[serde(rename = "h")]
    pub heartbeat_period_ms: f64,
    /// Per-packet delivery probability.
    #[serde(rename = "p")]
    pub delivery_prob: f64,
    /// Informational only; the model works in units of `size_ratio`.
    #[serde(rename = "mtu", default = "default_mtu")]
    pub mtu_bytes: u32,
    /// How much longer the real heartbeat period is than its nominal value.
    #[serde(rename = "hb_extra", default = "default_hb_extra")]
    pub hb_extra_ms: f64,
}

fn default_mtu() -> u32 {
    1500
}

fn default_hb_extra() -> f64 {
    0.2
}

impl ScenarioParams {
    /// Builds and validates a scenario with the default MTU and heartbeat
    /// inflation. Warnings are accepted; errors are returned.
    pub fn new(
        size_ratio: f64,
        publish_period_ms: f64,
        heartbeat_period_ms: f64,
        delivery_prob: f64,
    ) -> Result<Self> {
        let sp = Self {
            size_ratio,
            publish_period_ms,
            heartbeat_period_ms,
            delivery_prob,
            mtu_bytes: default_mtu(),
            hb_extra_ms: default_hb_extra(),
        };
        sp.validate().into_result()?;
        Ok(sp)
    }

    pub fn with_hb_extra(mut self, hb_extra_ms: f64) -> Self {
        self.hb_extra_ms = hb_extra_ms;
        self
    }

    pub fn with_mtu(mut self, mtu_bytes: u32) -> Self {
        self.mtu_bytes = mtu_bytes;
        self
    }

    pub fn validate(&self) -> ValidationReport {
        validate_scenario(self)
    }

    pub fn derive(&self) -> DerivedParams {
        derive_params(self)
    }

    /// The actual heartbeat period including inflation.
    pub fn drifted_heartbeat_ms(&self) -> f64 {
        self.heartbeat_period_ms + self.hb_extra_ms
    }
}

impl fmt::Display for ScenarioParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "m={} r={} h={} p={}",
            self.size_ratio, self.publish_period_ms, self.heartbeat_period_ms, self.delivery_prob
        )
    }
}

/// Packet counts implied by the size ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DerivedParams {
    /// UDP packets per publish, `ceil(m)`.
    pub packets_per_publish: usize,
    /// Unacked messages one retransmission packet can carry, `ceil(1/m)`.
    pub messages_per_packet: usize,
}

pub fn derive_params(sp: &ScenarioParams) -> DerivedParams {
    DerivedParams {
        packets_per_publish: snapped_ceil(sp.size_ratio) as usize,
        messages_per_packet: snapped_ceil(1.0 / sp.size_ratio) as usize,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub field: &'static str,
    pub message: String,
}

/// Structured outcome of scenario validation. Errors reject the scenario,
/// warnings are informational.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub diagnostics: Vec<Diagnostic>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors().next().is_none()
    }

    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics
            .iter()
            .filter(|d| d.severity == Severity::Warning)
    }

    pub fn into_result(self) -> Result<Vec<Diagnostic>> {
        if self.is_ok() {
            return Ok(self.diagnostics);
        }
        let msg = self
            .errors()
            .map(|d| d.message.as_str())
            .collect::<Vec<_>>()
            .join("; ");
        Err(Error::InvalidScenario(msg))
    }

    fn error(&mut self, field: &'static str, message: impl Into<String>) {
        self.diagnostics.push(Diagnostic {
            severity: Severity::Error,
            field,
            message: message.into(),
        });
    }

    fn warning(&mut self, field: &'static str, message: impl Into<String>) {
        self.diagnostics.push(Diagnostic {
            severity: Severity::Warning,
            field,
            message: message.into(),
        });
    }
}

pub fn validate_scenario(sp: &ScenarioParams) -> ValidationReport {
    let mut report = ValidationReport::default();
    let m = sp.size_ratio;
    if !(m.is_finite() && m > 0.0) {
        report.error("m", format!("m must be positive, got {m}"));
    } else if !is_integral(m) && !is_integral(1.0 / m) {
        report.warning(
            "m",
            format!("m and 1/m non-integer (m = {m}); packet counts use ceilings"),
        );
    }
    if !(sp.publish_period_ms.is_finite() && sp.publish_period_ms > 0.0) {
        report.error("r", format!("r must be positive, got {}", sp.publish_period_ms));
    }
    if !(sp.heartbeat_period_ms.is_finite() && sp.heartbeat_period_ms > 0.0) {
        report.error("h", format!("h must be positive, got {}", sp.heartbeat_period_ms));
    }
    let p = sp.delivery_prob;
    if !(p > 0.0 && p <= 1.0) {
        report.error("p", format!("p out of range (0, 1], got {p}"));
    }
    if sp.mtu_bytes == 0 {
        report.error("mtu", "mtu must be positive");
    }
    if !(sp.hb_extra_ms.is_finite() && sp.hb_extra_ms >= 0.0) {
        report.error(
            "hb_extra",
            format!("heartbeat inflation must be non-negative, got {}", sp.hb_extra_ms),
        );
    }
    report
}

/// Probability of each count of unacked RTPS messages, `k = 0..=k_max`.
///
/// Queries for negative `k` or `k > k_max` return zero. When a solver folds
/// mass that would exceed `k_max` into the top bucket, `tail_mass` records how
/// much probability currently sits in that bucket.
#[derive(Debug, Clone, PartialEq)]
pub struct UnackedDistribution {
    probs: Vec<f64>,
    tail_mass: f64,
}

impl UnackedDistribution {
    pub const NORMALIZATION_TOL: f64 = 1e-9;

    /// Validates a probability vector. Entries must be finite and
    /// non-negative; a total within 1e-9 of one is renormalized, anything
    /// else is rejected.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("no entries".into()));
        }
        if let Some((k, v)) = probs
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidDistribution(format!(
                "entry {k} is {v}, expected a finite non-negative probability"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > Self::NORMALIZATION_TOL {
            return Err(Error::InvalidDistribution(format!(
                "entries sum to {total}, expected 1"
            )));
        }
        let probs = if total == 1.0 {
            probs
        } else {
            probs.into_iter().map(|v| v / total).collect()
        };
        Ok(Self::from_raw(probs))
    }

    /// All mass at `k` unacked messages.
    pub fn point(k: usize) -> Self {
        let mut probs = vec![0.0; k + 1];
        probs[k] = 1.0;
        Self::from_raw(probs)
    }

    pub fn zero() -> Self {
        Self::point(0)
    }

    /// Trusted constructor for operator outputs.
    pub(crate) fn from_raw(probs: Vec<f64>) -> Self {
        Self {
            probs,
            tail_mass: 0.0,
        }
    }

    pub fn get(&self, k: i64) -> f64 {
        if k < 0 {
            return 0.0;
        }
        self.probs.get(k as usize).copied().unwrap_or(0.0)
    }

    /// Probability that nothing is unacked.
    pub fn acked(&self) -> f64 {
        self.probs[0]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn k_max(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(k, v)| k as f64 * v).sum()
    }

    pub fn is_point_zero(&self) -> bool {
        self.probs[0] == 1.0
    }

    /// Folds every bucket above `k_max` into `k_max`, padding with zeros when
    /// the distribution is shorter.
    pub fn fold_to(mut self, k_max: usize) -> Self {
        if self.probs.len() > k_max + 1 {
            let overflow: f64 = self.probs[k_max + 1..].iter().sum();
            self.probs.truncate(k_max + 1);
            self.probs[k_max] += overflow;
        } else {
            self.probs.resize(k_max + 1, 0.0);
        }
        self.tail_mass = self.probs[k_max];
        self
    }

    /// Largest absolute entrywise difference, treating missing entries as 0.
    pub fn linf_distance(&self, other: &Self) -> f64 {
        let len = self.probs.len().max(other.probs.len());
        (0..len)
            .map(|k| (self.get(k as i64) - other.get(k as i64)).abs())
            .fold(0.0, f64::max)
    }
}

/// Message delivery ratio, mean delay and delay standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyMetrics {
    pub mdr_pct: f64,
    pub avg_latency_ms: f64,
    pub jitter_ms: f64,
}

impl LatencyMetrics {
    pub const LOSSLESS: Self = Self {
        mdr_pct: 100.0,
        avg_latency_ms: 0.0,
        jitter_ms: 0.0,
    };
}

impl fmt::Display for LatencyMetrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "MDR {:.2} %, latency {:.2} ms, jitter {:.2} ms",
            self.mdr_pct, self.avg_latency_ms, self.jitter_ms
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimelineMode {
    /// Heartbeats at exact multiples of the nominal period.
    #[default]
    Nominal,
    /// Heartbeats at multiples of the nominal period plus inflation.
    Drifted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JitterMode {
    /// Per-message second moment inside each phase.
    #[default]
    PerMessage,
    /// Variance of the phase means only.
    PhaseMeans,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub max_cycles: usize,
    pub kmax_floor: usize,
    pub tail_tol: f64,
    pub series_tail_tol: f64,
    pub series_max_v: usize,
    pub timeline_mode: TimelineMode,
    pub jitter_mode: JitterMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-9,
            max_cycles: 10_000,
            kmax_floor: 64,
            tail_tol: 1e-12,
            series_tail_tol: 1e-10,
            series_max_v: 10_000,
            timeline_mode: TimelineMode::Nominal,
            jitter_mode: JitterMode::PerMessage,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("epsilon", self.epsilon),
            ("tail_tol", self.tail_tol),
            ("series_tail_tol", self.series_tail_tol),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidScenario(format!(
                    "solver {name} must be positive, got {v}"
                )));
            }
        }
        if self.max_cycles == 0 || self.series_max_v == 0 || self.kmax_floor == 0 {
            return Err(Error::InvalidScenario("solver caps must be at least 1".into()));
        }
        Ok(())
    }
}

//! Independent oracles shared by the integration tests. Nothing here calls
//! into the operators under test.
#![allow(dead_code)]

use pla_core::ScenarioParams;

pub fn sp(m: f64, r: f64, h: f64, p: f64) -> ScenarioParams {
    ScenarioParams::new(m, r, h, p).unwrap()
}

/// Binomial coefficient by Pascal's triangle.
pub fn choose(n: usize, k: usize) -> f64 {
    let mut row = vec![1.0f64];
    for _ in 0..n {
        let mut next = vec![1.0; row.len() + 1];
        for i in 1..row.len() {
            next[i] = row[i - 1] + row[i];
        }
        row = next;
    }
    row.get(k).copied().unwrap_or(0.0)
}

/// Iterates over every subset of `n` independent trials as a bitmask, with
/// its probability when each trial succeeds with `p`.
pub fn outcomes(n: usize, p: f64) -> impl Iterator<Item = (u32, f64)> {
    (0u32..(1 << n)).map(move |mask| {
        let ok = mask.count_ones() as i32;
        (mask, p.powi(ok) * (1.0 - p).powi(n as i32 - ok))
    })
}

/// Sizes of the retransmission packets for `x` messages, `cap` per packet.
pub fn packet_sizes(x: usize, cap: usize) -> Vec<usize> {
    let mut sizes = vec![cap; x / cap];
    if !x.is_multiple_of(cap) {
        sizes.push(x % cap);
    }
    sizes
}

/// Distribution of messages still unacked after retransmitting `x` of them,
/// by enumerating every packet outcome.
pub fn retransmit_by_enumeration(x: usize, cap: usize, p: f64) -> Vec<f64> {
    let sizes = packet_sizes(x, cap);
    let mut out = vec![0.0; x + 1];
    for (mask, prob) in outcomes(sizes.len(), p) {
        let left: usize = sizes
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) == 0)
            .map(|(_, s)| *s)
            .sum();
        out[left] += prob;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Publish,
    Heartbeat,
}

/// Neumaier-compensated running sum; path enumeration adds millions of
/// tiny terms per bucket.
#[derive(Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Exact distribution of the unacked count after `steps`, starting from
/// `start`, by walking every loss outcome path.
pub fn enumerate_paths(start: &[f64], steps: &[Step], u: usize, cap: usize, p: f64) -> Vec<f64> {
    let mut out = vec![CompensatedSum::default(); start.len() + u * steps.len() + 1];
    for (k, &mass) in start.iter().enumerate() {
        if mass > 0.0 {
            walk(k, mass, steps, u, cap, p, &mut out);
        }
    }
    out.iter().map(CompensatedSum::value).collect()
}

fn walk(k: usize, mass: f64, steps: &[Step], u: usize, cap: usize, p: f64, out: &mut [CompensatedSum]) {
    let Some((first, rest)) = steps.split_first() else {
        out[k].add(mass);
        return;
    };
    match first {
        Step::Publish => {
            for (mask, prob) in outcomes(u, p) {
                let lost = u - mask.count_ones() as usize;
                walk(k + lost, mass * prob, rest, u, cap, p, out);
            }
        }
        Step::Heartbeat => {
            // Heartbeat lost, or heartbeat through and AckNack lost.
            walk(k, mass * (1.0 - p), rest, u, cap, p, out);
            walk(k, mass * p * (1.0 - p), rest, u, cap, p, out);
            let sizes = packet_sizes(k, cap);
            for (mask, prob) in outcomes(sizes.len(), p) {
                let left: usize = sizes
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) == 0)
                    .map(|(_, s)| *s)
                    .sum();
                walk(left, mass * p * p * prob, rest, u, cap, p, out);
            }
        }
    }
}

/// Smallest shift `t` such that `seq[i] == seq[i + t]` within `tol` for
/// every valid `i`.
pub fn detect_period(seq: &[Vec<f64>], tol: f64) -> Option<usize> {
    (1..seq.len() / 2).find(|&t| {
        (0..seq.len() - t).all(|i| {
            let (a, b) = (&seq[i], &seq[i + t]);
            let n = a.len().max(b.len());
            (0..n).all(|k| {
                let x = a.get(k).copied().unwrap_or(0.0);
                let y = b.get(k).copied().unwrap_or(0.0);
                (x - y).abs() <= tol
            })
        })
    })
}

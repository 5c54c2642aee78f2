//! Publish and heartbeat transition operators on unacked-count distributions.

use crate::error::{Error, Result};
use crate::model::UnackedDistribution;

/// Above this many trials the binomial coefficient is evaluated in log space.
const DIRECT_BINOMIAL_MAX: u64 = 60;

/// Probability that exactly `x` of `y` independent packets fail when each
/// arrives with probability `p`.
pub fn pr_fail(x: i64, y: i64, p: f64) -> Result<f64> {
    if y < 0 || x < 0 || x > y {
        return Err(Error::Domain(format!(
            "pr_fail needs 0 <= x <= y, got x = {x}, y = {y}"
        )));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Domain(format!("p out of range (0, 1], got {p}")));
    }
    Ok(binomial_fail(x as u64, y as u64, p))
}

/// `pr_fail` without argument checks; callers guarantee `x <= y`.
pub(crate) fn binomial_fail(x: u64, y: u64, p: f64) -> f64 {
    let q = 1.0 - p;
    if x == 0 {
        return p.powi(y as i32);
    }
    if q == 0.0 {
        return 0.0;
    }
    let ok = y - x;
    if y <= DIRECT_BINOMIAL_MAX {
        let k = x.min(ok);
        let mut c = 1.0f64;
        for i in 1..=k {
            c = c * (y - k + i) as f64 / i as f64;
        }
        return c * p.powi(ok as i32) * q.powi(x as i32);
    }
    let k = x.min(ok);
    let ln_c: f64 = (1..=k).map(|i| ((y - k + i) as f64 / i as f64).ln()).sum();
    (ln_c + ok as f64 * p.ln() + x as f64 * q.ln()).exp()
}

/// Retransmission kernel: probability that `x` unacked messages become `k`
/// after one retransmission round, `cap_m` messages per packet.
pub fn gamma_kernel(x: usize, k: usize, cap_m: usize, p: f64) -> f64 {
    assert!(cap_m >= 1, "cap_M must be at least 1");
    if k > x {
        return 0.0;
    }
    if x == 0 {
        return 1.0;
    }
    let f = x.div_ceil(cap_m) as u64;
    let n = x % cap_m;
    if x == k {
        return (1.0 - p).powi(f as i32);
    }
    if n == 0 {
        return if k.is_multiple_of(cap_m) {
            binomial_fail((k / cap_m) as u64, f, p)
        } else {
            0.0
        };
    }
    // One partial packet of n messages plus f - 1 full ones.
    let mut total = 0.0;
    if k.is_multiple_of(cap_m) {
        total += p * binomial_fail((k / cap_m) as u64, f - 1, p);
    }
    if k >= n && (k - n).is_multiple_of(cap_m) {
        total += (1.0 - p) * binomial_fail(((k - n) / cap_m) as u64, f - 1, p);
    }
    total
}

/// Applies a publish of `u` packets: convolution with the binomial failure
/// count. The result is `u` entries longer than the input.
pub fn pub_apply(dist: &UnackedDistribution, u: usize, p: f64) -> UnackedDistribution {
    PublishKernel::new(u, p).apply(dist)
}

/// Applies one heartbeat round with a fresh kernel. Prefer
/// [`HeartbeatKernel`] when applying repeatedly.
pub fn hb_apply(dist: &UnackedDistribution, cap_m: usize, p: f64) -> UnackedDistribution {
    HeartbeatKernel::new(cap_m, p).apply(dist)
}

#[derive(Debug, Clone)]
pub struct PublishKernel {
    fail_pmf: Vec<f64>,
}

impl PublishKernel {
    pub fn new(u: usize, p: f64) -> Self {
        assert!(u >= 1, "a publish sends at least one packet");
        let fail_pmf = (0..=u as u64).map(|x| binomial_fail(x, u as u64, p)).collect();
        Self { fail_pmf }
    }

    pub fn packets(&self) -> usize {
        self.fail_pmf.len() - 1
    }

    pub fn apply(&self, dist: &UnackedDistribution) -> UnackedDistribution {
        let src = dist.probs();
        let mut out = vec![0.0; src.len() + self.packets()];
        for (k, &mass) in src.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for (x, &w) in self.fail_pmf.iter().enumerate() {
                out[k + x] += mass * w;
            }
        }
        UnackedDistribution::from_raw(out)
    }
}

/// Heartbeat operator with a memoized retransmission table. Rows of the
/// table are sparse: only `k` reachable from `x` are stored.
#[derive(Debug, Clone)]
pub struct HeartbeatKernel {
    cap_m: usize,
    p: f64,
    both_arrive: f64,
    rows: Vec<Vec<(usize, f64)>>,
}

impl HeartbeatKernel {
    pub fn new(cap_m: usize, p: f64) -> Self {
        assert!(cap_m >= 1, "cap_M must be at least 1");
        Self {
            cap_m,
            p,
            both_arrive: p * p,
            rows: vec![vec![(0, 1.0)]],
        }
    }

    pub fn cap_m(&self) -> usize {
        self.cap_m
    }

    /// Makes sure rows `0..=x_max` are cached.
    pub fn reserve(&mut self, x_max: usize) {
        for x in self.rows.len()..=x_max {
            let row = (0..=x)
                .filter_map(|k| {
                    let g = gamma_kernel(x, k, self.cap_m, self.p);
                    (g != 0.0).then_some((k, g))
                })
                .collect();
            self.rows.push(row);
        }
    }

    pub fn gamma(&mut self, x: usize, k: usize) -> f64 {
        self.reserve(x);
        self.rows[x]
            .iter()
            .find(|(kk, _)| *kk == k)
            .map_or(0.0, |(_, g)| *g)
    }

    pub fn apply(&mut self, dist: &UnackedDistribution) -> UnackedDistribution {
        let src = dist.probs();
        self.reserve(src.len() - 1);
        let mut out = vec![0.0; src.len()];
        // Nothing to retransmit from x = 0, so its mass stays put exactly.
        out[0] = src[0];
        let stay = 1.0 - self.both_arrive;
        for (x, &mass) in src.iter().enumerate().skip(1) {
            if mass == 0.0 {
                continue;
            }
            out[x] += mass * stay;
            let w = mass * self.both_arrive;
            for &(k, g) in &self.rows[x] {
                out[k] += w * g;
            }
        }
        UnackedDistribution::from_raw(out)
    }

    /// Applies the operator `times` times.
    pub fn apply_n(&mut self, dist: &UnackedDistribution, times: usize) -> UnackedDistribution {
        let mut cur = dist.clone();
        for _ in 0..times {
            cur = self.apply(&cur);
        }
        cur
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(v: &[f64]) -> UnackedDistribution {
        UnackedDistribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn pr_fail_examples() {
        assert!((pr_fail(0, 2, 0.9).unwrap() - 0.81).abs() < 1e-15);
        assert!((pr_fail(2, 2, 0.9).unwrap() - 0.01).abs() < 1e-15);
        assert_eq!(pr_fail(0, 0, 0.3).unwrap(), 1.0);
        assert!(pr_fail(3, 2, 0.9).is_err());
        assert!(pr_fail(0, -1, 0.9).is_err());
    }

    #[test]
    fn pr_fail_large_y_sums_to_one() {
        for y in [61, 200, 2000] {
            let s: f64 = (0..=y).map(|x| pr_fail(x, y, 0.75).unwrap()).sum();
            assert!((s - 1.0).abs() < 1e-12, "y = {y}: {s}");
        }
    }

    #[test]
    fn gamma_examples() {
        let g: Vec<f64> = (0..=2).map(|k| gamma_kernel(2, k, 1, 0.9)).collect();
        for (a, b) in g.iter().zip([0.81, 0.18, 0.01]) {
            assert!((a - b).abs() < 1e-15);
        }
        let g: Vec<f64> = (0..=3).map(|k| gamma_kernel(3, k, 2, 0.9)).collect();
        for (a, b) in g.iter().zip([0.81, 0.09, 0.09, 0.01]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(gamma_kernel(0, 0, 125, 0.5), 1.0);
        assert_eq!(gamma_kernel(2, 3, 1, 0.9), 0.0);
    }

    #[test]
    fn pub_examples() {
        let d = pub_apply(&UnackedDistribution::zero(), 1, 0.95);
        assert_eq!(d.probs(), &[0.95, 1.0 - 0.95]);
        let d = pub_apply(&UnackedDistribution::zero(), 2, 0.9);
        for (a, b) in d.probs().iter().zip([0.81, 0.18, 0.01]) {
            assert!((a - b).abs() < 1e-15);
        }
        let d = pub_apply(&UnackedDistribution::point(1), 1, 0.9);
        assert_eq!(d.get(0), 0.0);
        assert!((d.get(1) - 0.9).abs() < 1e-15);
        assert!((d.get(2) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn hb_examples() {
        assert!(hb_apply(&UnackedDistribution::zero(), 3, 0.8).is_point_zero());
        let d = hb_apply(&dist(&[0.5, 0.5]), 1, 0.9);
        assert!((d.get(0) - 0.8645).abs() < 1e-15);
        assert!((d.get(1) - 0.1355).abs() < 1e-15);
        let d = hb_apply(&UnackedDistribution::point(2), 1, 1.0);
        assert_eq!(d.probs(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn memoized_gamma_matches_direct() {
        let mut hb = HeartbeatKernel::new(5, 0.85);
        for x in 0..40 {
            for k in 0..=x {
                assert_eq!(hb.gamma(x, k), gamma_kernel(x, k, 5, 0.85));
            }
        }
    }
}

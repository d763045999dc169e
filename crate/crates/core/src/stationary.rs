//! Stationary law of the prepared-order queue and the joint two-queue law.
//!
//! The prepared queue `Q2` (negative values count waiting riders) decouples
//! from the preparation queue and behaves as a birth-death chain on
//! `{-d, -d+1, ...}` with up-rate 1 and down-rate `λ_{max(q-M,0)}`. Its mass
//! function is piecewise geometric, so every quantity here is kept as a short
//! list of geometric runs in log space and summed in closed form. Nothing is
//! truncated; the explicitly stored masses are only a convenience window.

use crate::error::{Error, Result};
use crate::params::{DispatchPolicy, Threshold};

/// Masses below this are not stored explicitly once the remainder is monotone.
pub const STORE_CUTOFF: f64 = 1e-15;

/// Upper bound on explicitly stored states; the rest is reported as `tail_mass`.
const MAX_STORED: usize = 1 << 22;

/// Above this count, finite geometric moments switch from direct summation to
/// closed form.
const DIRECT_SUM_LIMIT: u64 = 1 << 16;

/// A run of states `start, start+1, ...` whose masses form a geometric sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Run {
    start: i64,
    /// `None` for an unbounded run.
    len: Option<u64>,
    ln_first: f64,
    /// Log of the ratio between successive masses; nonpositive unless `len == Some(1)`.
    ln_ratio: f64,
}

impl Run {
    fn last(&self) -> Option<i64> {
        self.len.map(|n| self.start + n as i64 - 1)
    }

    fn contains(&self, q: i64) -> bool {
        q >= self.start && self.last().is_none_or(|e| q <= e)
    }

    fn ln_mass(&self, q: i64) -> f64 {
        if self.len == Some(1) {
            self.ln_first
        } else {
            self.ln_first + (q - self.start) as f64 * self.ln_ratio
        }
    }

    fn ln_total(&self) -> f64 {
        let (s0, _) = geometric_sums(self.len, self.ln_ratio);
        self.ln_first + s0.ln()
    }

    /// `(Σ w_q, Σ q·w_q)` over the part of the run inside `[lo, hi]`.
    fn moments(&self, lo: i64, hi: Option<i64>) -> (f64, f64) {
        let from = lo.max(self.start);
        let to = match (self.last(), hi) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        if let Some(to) = to {
            if to < from {
                return (0.0, 0.0);
            }
        }
        let count = to.map(|t| (t - from + 1) as u64);
        let w = self.ln_mass(from).exp();
        if w == 0.0 {
            return (0.0, 0.0);
        }
        let (s0, s1) = geometric_sums(count, self.ln_ratio);
        (w * s0, w * (from as f64 * s0 + s1))
    }
}

/// `(Σ_{j<n} r^j, Σ_{j<n} j r^j)` with `r = exp(ln_ratio)`; `n = None` sums to infinity.
fn geometric_sums(n: Option<u64>, ln_ratio: f64) -> (f64, f64) {
    match n {
        Some(0) => (0.0, 0.0),
        Some(1) => (1.0, 0.0),
        Some(n) if n <= DIRECT_SUM_LIMIT => {
            let r = ln_ratio.exp();
            let (mut s0, mut s1, mut t) = (0.0, 0.0, 1.0);
            for j in 0..n {
                s0 += t;
                s1 += j as f64 * t;
                t *= r;
                if t == 0.0 {
                    break;
                }
            }
            (s0, s1)
        }
        _ => {
            debug_assert!(ln_ratio < 0.0);
            let r = ln_ratio.exp();
            let one_minus_r = -ln_ratio.exp_m1();
            let s0_inf = 1.0 / one_minus_r;
            let s1_inf = r / (one_minus_r * one_minus_r);
            match n {
                None => (s0_inf, s1_inf),
                Some(n) => {
                    let rn = (n as f64 * ln_ratio).exp();
                    (
                        s0_inf * (1.0 - rn),
                        s1_inf - rn * (n as f64 * s0_inf + s1_inf),
                    )
                }
            }
        }
    }
}

fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    let values: Vec<f64> = values.into_iter().collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Unnormalized runs with `ln w_q = q ln ρ` on `[-d, M]`.
fn build_runs(policy: &DispatchPolicy) -> Vec<Run> {
    let d = i64::from(policy.buffer);
    let ln_l0 = policy.lambda0().ln();
    let ln_first = d as f64 * ln_l0;
    match policy.threshold {
        Threshold::Infinite => vec![Run {
            start: -d,
            len: None,
            ln_first,
            ln_ratio: -ln_l0,
        }],
        Threshold::Finite(m) => {
            let m = i64::from(m);
            let mut runs = vec![Run {
                start: -d,
                len: Some((d + m + 1) as u64),
                ln_first,
                ln_ratio: -ln_l0,
            }];
            let mut ln_w = -(m as f64) * ln_l0;
            let mut q = m;
            for &rate in policy.rates.iter().skip(1) {
                q += 1;
                ln_w -= rate.ln();
                runs.push(Run {
                    start: q,
                    len: Some(1),
                    ln_first: ln_w,
                    ln_ratio: 0.0,
                });
            }
            let ln_tail = policy.tail_rate.ln();
            runs.push(Run {
                start: q + 1,
                len: None,
                ln_first: ln_w - ln_tail,
                ln_ratio: -ln_tail,
            });
            runs
        }
    }
}

/// Stationary law `ν` of the decoupled prepared-queue chain.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    buffer: u32,
    threshold: Threshold,
    runs: Vec<Run>,
    ln_norm_constant: f64,
    masses: Vec<f64>,
    tail_mass: f64,
}

impl StationaryDistribution {
    pub fn buffer(&self) -> u32 {
        self.buffer
    }

    pub fn threshold(&self) -> Threshold {
        self.threshold
    }

    pub fn first_state(&self) -> i64 {
        -i64::from(self.buffer)
    }

    /// Last state whose mass is stored in [`masses`](Self::masses).
    pub fn last_stored_state(&self) -> i64 {
        self.first_state() + self.masses.len() as i64 - 1
    }

    /// Explicit masses for `first_state()..=last_stored_state()`.
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        let first = self.first_state();
        self.masses
            .iter()
            .enumerate()
            .map(move |(i, &p)| (first + i as i64, p))
    }

    /// Exact probability mass beyond the stored window.
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// `C_1`, the mass of state 0 (every state `q ≤ M` has mass `C_1 ρ^q`).
    pub fn norm_constant(&self) -> f64 {
        self.ln_norm_constant.exp()
    }

    pub fn ln_norm_constant(&self) -> f64 {
        self.ln_norm_constant
    }

    pub fn ln_mass(&self, q: i64) -> f64 {
        if q < self.first_state() {
            return f64::NEG_INFINITY;
        }
        let idx = self.runs.partition_point(|r| r.start <= q) - 1;
        let run = &self.runs[idx];
        debug_assert!(run.contains(q));
        run.ln_mass(q)
    }

    /// `ν_q` for any state, stored or not.
    pub fn mass(&self, q: i64) -> f64 {
        self.ln_mass(q).exp()
    }

    /// `(P(lo ≤ Q ≤ hi), E[Q; lo ≤ Q ≤ hi])`.
    pub fn moments_between(&self, lo: i64, hi: Option<i64>) -> (f64, f64) {
        self.runs.iter().fold((0.0, 0.0), |(a, b), run| {
            let (m0, m1) = run.moments(lo, hi);
            (a + m0, b + m1)
        })
    }

    pub fn total_mass(&self) -> f64 {
        self.moments_between(self.first_state(), None).0
    }

    /// `E[max(Q, 0)]`, the mean number of prepared orders waiting.
    pub fn mean_positive_part(&self) -> f64 {
        self.moments_between(1, None).1
    }

    /// `-E[min(Q, 0)]`, the mean number of riders waiting.
    pub fn mean_negative_part(&self) -> f64 {
        // `0.0 - x` rather than `-x` keeps an empty range at +0
        0.0 - self.moments_between(self.first_state(), Some(-1)).1
    }

    /// Joint stationary mass `π(q1, q2) = (1-1/μ) μ^{-q1} ν_{q2}`.
    pub fn joint_pmf(&self, mu: f64, q1: u64, q2: i64) -> f64 {
        if q2 < self.first_state() {
            return 0.0;
        }
        let ln_q1 = (1.0 - 1.0 / mu).ln() - q1 as f64 * mu.ln();
        (ln_q1 + self.ln_mass(q2)).exp()
    }
}

/// Builds `ν` for a policy whose own rate constraints hold.
pub fn decoupled_stationary(policy: &DispatchPolicy) -> Result<StationaryDistribution> {
    policy.check()?;
    let mut runs = build_runs(policy);
    let ln_z = log_sum_exp(runs.iter().map(Run::ln_total));
    for run in &mut runs {
        run.ln_first -= ln_z;
    }

    // suffix_max[i]: largest mass among runs i.. (each run peaks at its first state)
    let mut suffix_max = vec![f64::NEG_INFINITY; runs.len() + 1];
    for i in (0..runs.len()).rev() {
        suffix_max[i] = suffix_max[i + 1].max(runs[i].ln_first);
    }
    let ln_cut = STORE_CUTOFF.ln();
    let mut masses = Vec::new();
    let mut q = -i64::from(policy.buffer);
    let mut idx = 0;
    loop {
        while !runs[idx].contains(q) {
            idx += 1;
        }
        let ln_m = runs[idx].ln_mass(q);
        masses.push(ln_m.exp());
        let next_in_run = if runs[idx].contains(q + 1) {
            runs[idx].ln_mass(q + 1)
        } else {
            f64::NEG_INFINITY
        };
        let ahead = next_in_run.max(suffix_max[idx + 1]);
        if (ln_m < ln_cut && ahead < ln_cut) || masses.len() >= MAX_STORED {
            break;
        }
        q += 1;
    }
    let tail_mass = runs.iter().map(|r| r.moments(q + 1, None).0).sum::<f64>();

    Ok(StationaryDistribution {
        buffer: policy.buffer,
        threshold: policy.threshold,
        ln_norm_constant: -ln_z,
        runs,
        masses,
        tail_mass,
    })
}

/// Joint stationary probability of `(Q1, Q2) = (q1, q2)`.
pub fn joint_stationary_pmf(policy: &DispatchPolicy, mu: f64, q1: i64, q2: i64) -> Result<f64> {
    if !(mu > 1.0) {
        return Err(Error::Rejected(format!("μ must exceed 1, got {mu}")));
    }
    if q1 < 0 {
        return Err(Error::Rejected(format!("q1 must be nonnegative, got {q1}")));
    }
    if q2 < -i64::from(policy.buffer) {
        return Err(Error::Rejected(format!(
            "q2 = {q2} lies below the buffer floor -{}",
            policy.buffer
        )));
    }
    let nu = decoupled_stationary(policy)?;
    Ok(nu.joint_pmf(mu, q1 as u64, q2))
}

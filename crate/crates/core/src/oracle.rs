//! Brute-force reference: the full two-dimensional chain on a finite box.
//!
//! Nothing here uses the product form. The box `{0..=q1_max} × {-d..=q2_max}`
//! keeps every transition of the original chain that stays inside it; moves
//! that would leave the box are dropped, which leaves the generator
//! conservative. The stationary vector is computed by GTH state reduction on a
//! banded layout, so the only approximation is the truncation itself.

use log::debug;

use crate::error::{Error, Result};
use crate::params::{validate, DispatchPolicy, SystemParams};
use crate::waiting::{Method, WaitingTimes};

/// Largest allowed `q1_max` / `q2_max` when the box is grown.
pub const AXIS_CAP: usize = 4096;
/// Mass allowed on the outer faces of the box.
pub const BOUNDARY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedChainSolution {
    policy: DispatchPolicy,
    q1_max: usize,
    q2_max: usize,
    pi: Vec<f64>,
    /// Mass on states with `q1 = q1_max` or `q2 = q2_max`.
    pub boundary_mass: f64,
    /// Largest absolute global-balance defect of the returned vector.
    pub balance_residual: f64,
    /// How many times the box was enlarged before acceptance.
    pub enlargements: u32,
}

impl TruncatedChainSolution {
    pub fn q1_max(&self) -> usize {
        self.q1_max
    }

    pub fn q2_max(&self) -> usize {
        self.q2_max
    }

    pub fn buffer(&self) -> u32 {
        self.policy.buffer
    }

    pub fn policy(&self) -> &DispatchPolicy {
        &self.policy
    }

    fn n2(&self) -> usize {
        self.q2_max + self.policy.buffer as usize + 1
    }

    /// Probability of `(q1, q2)`; zero outside the box.
    pub fn prob(&self, q1: usize, q2: i64) -> f64 {
        let j2 = q2 + i64::from(self.policy.buffer);
        if q1 > self.q1_max || j2 < 0 || j2 as usize >= self.n2() {
            return 0.0;
        }
        self.pi[q1 * self.n2() + j2 as usize]
    }

    /// Iterates `(q1, q2, π)` over the box.
    pub fn states(&self) -> impl Iterator<Item = (usize, i64, f64)> + '_ {
        let n2 = self.n2();
        let d = i64::from(self.policy.buffer);
        self.pi
            .iter()
            .enumerate()
            .map(move |(k, &p)| (k / n2, (k % n2) as i64 - d, p))
    }

    pub fn marginal_q1(&self) -> Vec<f64> {
        self.pi
            .chunks(self.n2())
            .map(|row| row.iter().sum())
            .collect()
    }

    /// Marginal of `Q2`, indexed from `-d`.
    pub fn marginal_q2(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n2()];
        for row in self.pi.chunks(self.n2()) {
            for (o, p) in out.iter_mut().zip(row) {
                *o += p;
            }
        }
        out
    }
}

/// Square band matrix holding off-diagonal rates within distance `width`.
struct Band {
    width: usize,
    stride: usize,
    data: Vec<f64>,
}

impl Band {
    fn new(n: usize, width: usize) -> Self {
        let stride = 2 * width + 1;
        Self {
            width,
            stride,
            data: vec![0.0; n * stride],
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        i * self.stride + j + self.width - i
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.at(i, j)]
    }

    /// Entries `(i, lo..hi)`, which must lie inside the band.
    fn segment(&self, i: usize, lo: usize, hi: usize) -> &[f64] {
        &self.data[self.at(i, lo)..self.at(i, hi)]
    }

    fn segment_mut(&mut self, i: usize, lo: usize, hi: usize) -> &mut [f64] {
        let (a, b) = (self.at(i, lo), self.at(i, hi));
        &mut self.data[a..b]
    }

    #[inline]
    fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.at(i, j);
        self.data[k] += v;
    }
}

/// Box layout: the shorter axis varies fastest so the band stays narrow.
struct Layout {
    n1: usize,
    n2: usize,
    q2_fast: bool,
}

impl Layout {
    fn len(&self) -> usize {
        self.n1 * self.n2
    }

    fn band(&self) -> usize {
        if self.q2_fast {
            self.n2
        } else {
            self.n1
        }
    }

    fn index(&self, q1: usize, j2: usize) -> usize {
        if self.q2_fast {
            q1 * self.n2 + j2
        } else {
            j2 * self.n1 + q1
        }
    }
}

/// Outgoing transitions of `(q1, j2)` that stay in the box, `j2 = q2 + d`.
fn transitions(
    policy: &DispatchPolicy,
    mu: f64,
    n1: usize,
    n2: usize,
    q1: usize,
    j2: usize,
) -> impl Iterator<Item = (usize, usize, f64)> {
    let d = i64::from(policy.buffer);
    let arrival = (q1 + 1 < n1).then_some((q1 + 1, j2, 1.0));
    let service = (q1 > 0 && j2 + 1 < n2).then(|| (q1 - 1, j2 + 1, mu));
    let rider = (j2 > 0).then(|| (q1, j2 - 1, policy.rate_at_state(j2 as i64 - d)));
    arrival.into_iter().chain(service).chain(rider)
}

/// Stationary vector of the truncated generator by GTH reduction.
fn gth_solve(policy: &DispatchPolicy, mu: f64, n1: usize, n2: usize) -> Result<Vec<f64>> {
    let layout = Layout {
        n1,
        n2,
        q2_fast: n2 <= n1,
    };
    let n = layout.len();
    let width = layout.band();
    let mut a = Band::new(n, width);
    for q1 in 0..n1 {
        for j2 in 0..n2 {
            let from = layout.index(q1, j2);
            for (t1, t2, rate) in transitions(policy, mu, n1, n2, q1, j2) {
                a.add(from, layout.index(t1, t2), rate);
            }
        }
    }

    // Diagonal entries are never read, so the row update may touch them freely
    // and run as a dense axpy over the band.
    let mut exit = vec![0.0; n];
    let mut row: Vec<f64> = Vec::with_capacity(width);
    for k in (1..n).rev() {
        let lo = k.saturating_sub(width);
        row.clear();
        row.extend_from_slice(a.segment(k, lo, k));
        let s: f64 = row.iter().sum();
        if !(s > 0.0) {
            return Err(Error::TheoremViolation(format!(
                "truncated chain is not irreducible (state {k} cannot move down)"
            )));
        }
        exit[k] = s;
        for i in lo..k {
            let aik = a.get(i, k);
            if aik == 0.0 {
                continue;
            }
            let f = aik / s;
            for (x, &r) in a.segment_mut(i, lo, k).iter_mut().zip(&row) {
                *x += f * r;
            }
        }
    }

    let mut x = vec![0.0; n];
    x[0] = 1.0;
    for k in 1..n {
        let lo = k.saturating_sub(width);
        let inflow: f64 = (lo..k).map(|i| x[i] * a.get(i, k)).sum();
        x[k] = inflow / exit[k];
    }
    let total: f64 = x.iter().sum();

    // back to q1-major order
    let mut pi = vec![0.0; n];
    for q1 in 0..n1 {
        for j2 in 0..n2 {
            pi[q1 * n2 + j2] = x[layout.index(q1, j2)] / total;
        }
    }
    Ok(pi)
}

fn balance_residual(policy: &DispatchPolicy, mu: f64, n1: usize, n2: usize, pi: &[f64]) -> f64 {
    let mut net = vec![0.0; pi.len()];
    for q1 in 0..n1 {
        for j2 in 0..n2 {
            let from = q1 * n2 + j2;
            for (t1, t2, rate) in transitions(policy, mu, n1, n2, q1, j2) {
                let flow = pi[from] * rate;
                net[from] -= flow;
                net[t1 * n2 + t2] += flow;
            }
        }
    }
    net.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Solves the truncated chain, doubling an axis while its outer face carries
/// more than [`BOUNDARY_TOL`] of the mass.
pub fn solve_truncated(
    policy: &DispatchPolicy,
    params: &SystemParams,
    q1_max: usize,
    q2_max: usize,
) -> Result<TruncatedChainSolution> {
    validate(policy, params).into_result()?;
    let mu = params.mu;
    let d = policy.buffer as usize;
    let (mut q1_max, mut q2_max) = (q1_max.max(1), q2_max.max(1));
    let mut enlargements = 0;
    loop {
        let (n1, n2) = (q1_max + 1, q2_max + d + 1);
        let pi = gth_solve(policy, mu, n1, n2)?;
        let edge1: f64 = pi[(n1 - 1) * n2..].iter().sum();
        let edge2: f64 = (0..n1).map(|q1| pi[q1 * n2 + n2 - 1]).sum();
        let boundary_mass = edge1 + edge2 - pi[n1 * n2 - 1];
        if boundary_mass < BOUNDARY_TOL {
            let balance_residual = balance_residual(policy, mu, n1, n2, &pi);
            return Ok(TruncatedChainSolution {
                policy: policy.clone(),
                q1_max,
                q2_max,
                pi,
                boundary_mass,
                balance_residual,
                enlargements,
            });
        }
        let grow1 = edge1 >= BOUNDARY_TOL / 2.0;
        let grow2 = edge2 >= BOUNDARY_TOL / 2.0 || !grow1;
        if (grow1 && q1_max * 2 > AXIS_CAP) || (grow2 && q2_max * 2 > AXIS_CAP) {
            return Err(Error::Truncation {
                q1_max,
                q2_max,
                boundary_mass,
            });
        }
        if grow1 {
            q1_max *= 2;
        }
        if grow2 {
            q2_max *= 2;
        }
        enlargements += 1;
        debug!("enlarging truncated box to {q1_max}x{q2_max} (boundary mass {boundary_mass:e})");
    }
}

/// Starts from a 32×32 box and grows it as needed.
pub fn solve_auto(
    policy: &DispatchPolicy,
    params: &SystemParams,
) -> Result<TruncatedChainSolution> {
    solve_truncated(policy, params, 32, 32)
}

/// Mean waits from the truncated chain via Little's law.
///
/// Orders arrive at unit rate, so the mean order wait equals the mean number of
/// orders not yet picked up. Riders are divided by the realized dispatch
/// throughput rather than an assumed one.
pub fn oracle_waiting_times(sol: &TruncatedChainSolution) -> WaitingTimes {
    let mut orders = 0.0;
    let mut riders = 0.0;
    for (q1, q2, p) in sol.states() {
        orders += (q1 as f64 + q2.max(0) as f64) * p;
        riders += (-q2).max(0) as f64 * p;
    }
    let rider_wait = if riders == 0.0 {
        0.0
    } else {
        riders / rider_throughput(sol)
    };
    WaitingTimes {
        order_wait: orders,
        rider_wait,
        method: Method::Oracle,
    }
}

/// Realized rider dispatch rate `Σ_{q2>-d} λ_{(q2-M)^+} π`.
pub fn rider_throughput(sol: &TruncatedChainSolution) -> f64 {
    let floor = -i64::from(sol.buffer());
    sol.states()
        .filter(|&(_, q2, _)| q2 > floor)
        .map(|(_, q2, p)| sol.policy.rate_at_state(q2) * p)
        .sum()
}

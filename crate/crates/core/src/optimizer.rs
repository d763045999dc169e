//! Dispatch design under the customer patience constraint.
//!
//! For a blind policy the extra order delay is `ρ^{d+1}/(1-ρ)` and the rider
//! wait is increasing in `d` and decreasing in `ρ`. The optimum therefore
//! takes the smallest buffer the capacity allows and then lowers the dispatch
//! rate until the patience constraint binds.

use crate::error::{Error, Result};
use crate::params::{validate, DispatchPolicy, SystemParams, Threshold};
use crate::waiting::{blind_rider_wait, pow, waiting_times, WaitingTimes};

const MAX_BISECTION_STEPS: usize = 200;

/// Tolerance used when enforcing the policy-improvement relations.
pub const IMPROVEMENT_TOL: f64 = 1e-9;

/// `ρ^{n+1}/(1-ρ)`, the extra order delay of a blind policy with buffer `n`.
pub fn patience_load(rho: f64, n: u64) -> f64 {
    pow(rho, n + 1) / (1.0 - rho)
}

/// Smallest buffer `D ≥ 0` with `ρ^{D+1}/(1-ρ) ≤ T*`.
pub fn smallest_buffer(rho: f64, t_star: f64) -> Result<u32> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Rejected(format!(
            "utilization must lie in (0,1), got {rho}"
        )));
    }
    if !(t_star > 0.0) {
        return Err(Error::Infeasible(format!(
            "T* = {t_star}: no finite buffer meets a nonpositive patience"
        )));
    }
    let fits = |n: u64| patience_load(rho, n) <= t_star;
    let guess = ((t_star.ln() + (1.0 - rho).ln()) / rho.ln() - 1.0).ceil();
    let mut n = if guess.is_finite() && guess > 0.0 {
        guess as u64
    } else {
        0
    };
    // the log formula can land one off an integer boundary
    while n > 0 && fits(n - 1) {
        n -= 1;
    }
    while !fits(n) {
        n += 1;
    }
    u32::try_from(n).map_err(|_| Error::Infeasible(format!("required buffer {n} exceeds u32")))
}

/// Largest `ρ ∈ (0,1)` with `ρ^{n+1}/(1-ρ) ≤ T*`.
///
/// The map is continuous and strictly increasing from 0 to infinity, so plain
/// bisection is used; it runs to floating-point resolution and returns the
/// feasible endpoint.
pub fn max_utilization(n: u32, t_star: f64) -> Result<f64> {
    if !(t_star > 0.0) {
        return Err(Error::Infeasible(format!("T* = {t_star} must be positive")));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if patience_load(mid, u64::from(n)) <= t_star {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalDispatch {
    pub lambda0: f64,
    pub buffer: u32,
    /// `T* - (E[T_o] - 1/(μ-1))`; nonnegative for a feasible design.
    pub constraint_slack: f64,
    pub rider_wait: f64,
    pub order_wait: f64,
}

impl OptimalDispatch {
    pub fn policy(&self) -> DispatchPolicy {
        DispatchPolicy::blind(self.lambda0, self.buffer)
    }
}

/// Rate and buffer minimizing the rider wait of a blind policy subject to the
/// patience constraint.
pub fn optimize_dispatch(params: &SystemParams) -> Result<OptimalDispatch> {
    let bad = params.violations();
    if !bad.is_empty() {
        return Err(Error::Invalid(crate::params::ValidationReport {
            violations: bad,
        }));
    }
    let t_star = params.t_star;
    if !(t_star > 0.0) {
        return Err(Error::Infeasible(format!("T* = {t_star} must be positive")));
    }
    let cap = params.cap_lambda;
    let (lambda0, buffer) = if 1.0 / (cap - 1.0) <= t_star {
        (cap, 0)
    } else {
        let d = smallest_buffer(1.0 / cap, t_star)?;
        let gamma = max_utilization(d, t_star)?;
        ((1.0 / gamma).min(cap), d)
    };
    let w = waiting_times(&DispatchPolicy::blind(lambda0, buffer), params)?;
    let extra = w.extra_delay(params);
    Ok(OptimalDispatch {
        lambda0,
        buffer,
        constraint_slack: t_star - extra,
        rider_wait: w.rider_wait,
        order_wait: w.order_wait,
    })
}

/// Rider wait along the binding curve: the best blind policy with buffer `d`.
pub fn binding_rider_wait(d: u32, t_star: f64) -> Result<f64> {
    let gamma = max_utilization(d, t_star)?;
    Ok(blind_rider_wait(gamma, d))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImprovementResult {
    pub new_policy: DispatchPolicy,
    pub before: WaitingTimes,
    pub after: WaitingTimes,
    /// Mean prepared-queue mass above the new threshold, relative to its mass at the threshold.
    pub c_constant: f64,
}

impl ImprovementResult {
    pub fn order_wait_before(&self) -> f64 {
        self.before.order_wait
    }
    pub fn order_wait_after(&self) -> f64 {
        self.after.order_wait
    }
    pub fn rider_wait_before(&self) -> f64 {
        self.before.rider_wait
    }
    pub fn rider_wait_after(&self) -> f64 {
        self.after.rider_wait
    }
}

/// `Σ_{i≥1} ρ^{M-m} ∏_{j≤i} 1/λ_j`, summed with the geometric tail in closed form.
fn disclosed_tail_sum(policy: &DispatchPolicy, gap: u64) -> f64 {
    let ln_scale = gap as f64 * policy.rho().ln();
    let mut ln_prod = 0.0;
    let mut total = 0.0;
    for &rate in policy.rates.iter().skip(1) {
        ln_prod -= rate.ln();
        total += (ln_scale + ln_prod).exp();
    }
    let tail = policy.tail_rate;
    total + (ln_scale + ln_prod).exp() / (tail - 1.0)
}

/// Redesigns a policy for a lower disclosure threshold `m`.
///
/// Keeps `λ_0` and the buffer, sets `τ_1 = 1/((1-1/Λ)C)` and dispatches at full
/// capacity beyond. The mass at state `m` is unchanged, so the rider wait is
/// preserved while prepared orders clear as fast as capacity allows. Both
/// relations are re-checked numerically before returning.
pub fn improve_policy(
    policy: &DispatchPolicy,
    m: u32,
    params: &SystemParams,
) -> Result<ImprovementResult> {
    validate(policy, params).into_result()?;
    if let Threshold::Finite(big_m) = policy.threshold {
        if m >= big_m {
            return Err(Error::Rejected(format!(
                "new threshold {m} must be below the current threshold {big_m}"
            )));
        }
    }
    let rho = policy.rho();
    let cap = params.cap_lambda;
    let c = match policy.threshold {
        // ρ/(1-ρ) written without the cancellation in 1-ρ
        Threshold::Infinite => 1.0 / (policy.lambda0() - 1.0),
        Threshold::Finite(big_m) => {
            let gap = u64::from(big_m - m);
            (rho - pow(rho, gap + 1)) / (1.0 - rho) + disclosed_tail_sum(policy, gap)
        }
    };
    let mut tau1 = cap / ((cap - 1.0) * c);
    if tau1 > cap {
        if tau1 <= cap * (1.0 + 1e-12) {
            tau1 = cap;
        } else {
            return Err(Error::TheoremViolation(format!(
                "improved rate τ_1 = {tau1} exceeds capacity Λ = {cap}"
            )));
        }
    }
    let new_policy = DispatchPolicy::new(
        vec![policy.lambda0(), tau1],
        cap,
        policy.buffer,
        Threshold::Finite(m),
    );
    let before = waiting_times(policy, params)?;
    let after = waiting_times(&new_policy, params)?;

    let tol_r = IMPROVEMENT_TOL * before.rider_wait.abs().max(1.0);
    if (after.rider_wait - before.rider_wait).abs() > tol_r {
        return Err(Error::TheoremViolation(format!(
            "rider wait changed from {} to {}",
            before.rider_wait, after.rider_wait
        )));
    }
    let tol_o = IMPROVEMENT_TOL * before.order_wait.abs().max(1.0);
    if after.order_wait > before.order_wait + tol_o {
        return Err(Error::TheoremViolation(format!(
            "order wait rose from {} to {}",
            before.order_wait, after.order_wait
        )));
    }
    Ok(ImprovementResult {
        new_policy,
        before,
        after,
        c_constant: c,
    })
}

/// Outcome of the customer/rider trade-off bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TradeoffBound {
    /// Every feasible blind design has at least this rider wait.
    Applicable(f64),
    /// `1/Λ < 0.3` or `(1/Λ)^4/(1-1/Λ) < T*`.
    NotApplicable,
}

impl TradeoffBound {
    pub fn value(self) -> Option<f64> {
        match self {
            TradeoffBound::Applicable(v) => Some(v),
            TradeoffBound::NotApplicable => None,
        }
    }
}

/// `ln(4/3)/(4(1-ρ̂)) - T*` with `ρ̂ = 1/Λ`, clamped at zero.
pub fn rider_wait_lower_bound(params: &SystemParams) -> TradeoffBound {
    let rho_hat = 1.0 / params.cap_lambda;
    if !(0.3..1.0).contains(&rho_hat) || rho_hat.powi(4) / (1.0 - rho_hat) < params.t_star {
        return TradeoffBound::NotApplicable;
    }
    let bound = (4.0f64 / 3.0).ln() / (4.0 * (1.0 - rho_hat)) - params.t_star;
    TradeoffBound::Applicable(bound.max(0.0))
}

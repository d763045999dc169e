//! Mean order and rider waiting times.

use std::fmt;

use crate::error::{Error, Result};
use crate::params::{validate, DispatchPolicy, SystemParams, Threshold};
use crate::stationary::decoupled_stationary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    ClosedForm,
    Series,
    Oracle,
    Simulated,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::ClosedForm => "closed-form",
            Method::Series => "series",
            Method::Oracle => "oracle",
            Method::Simulated => "simulated",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaitingTimes {
    /// Mean time from order placement to pickup.
    pub order_wait: f64,
    /// Mean time a rider spends at the restaurant.
    pub rider_wait: f64,
    pub method: Method,
}

impl WaitingTimes {
    /// Order delay attributable to delivery, beyond the preparation queue.
    pub fn extra_delay(&self, params: &SystemParams) -> f64 {
        self.order_wait - params.order_wait_floor()
    }
}

/// Lower bound on the mean order wait: the sojourn time of the preparation queue.
pub fn order_wait_lower_bound(params: &SystemParams) -> Result<f64> {
    if !(params.mu > 1.0) {
        return Err(Error::Rejected(format!(
            "μ = {} ≤ 1: the preparation queue is unstable",
            params.mu
        )));
    }
    Ok(params.order_wait_floor())
}

/// Extra order delay `ρ^{d+1}/(1-ρ)` of a blind policy.
pub fn blind_extra_delay(rho: f64, buffer: u32) -> f64 {
    pow(rho, u64::from(buffer) + 1) / (1.0 - rho)
}

/// Rider wait `d - (ρ - ρ^{d+1})/(1-ρ)` of a blind policy.
pub fn blind_rider_wait(rho: f64, buffer: u32) -> f64 {
    f64::from(buffer) - (rho - pow(rho, u64::from(buffer) + 1)) / (1.0 - rho)
}

pub(crate) fn pow(x: f64, n: u64) -> f64 {
    match i32::try_from(n) {
        Ok(k) => x.powi(k),
        Err(_) => x.powf(n as f64),
    }
}

/// Mean waits of a policy. Blind policies use the closed forms; anything
/// with a finite threshold goes through the decoupled chain.
pub fn waiting_times(policy: &DispatchPolicy, params: &SystemParams) -> Result<WaitingTimes> {
    validate(policy, params).into_result()?;
    match policy.threshold {
        Threshold::Infinite => {
            let rho = policy.rho();
            Ok(WaitingTimes {
                order_wait: params.order_wait_floor() + blind_extra_delay(rho, policy.buffer),
                rider_wait: blind_rider_wait(rho, policy.buffer),
                method: Method::ClosedForm,
            })
        }
        Threshold::Finite(_) => series_waits(policy, params),
    }
}

/// Mean waits from the decoupled stationary law, whatever the threshold.
pub fn waiting_times_series(
    policy: &DispatchPolicy,
    params: &SystemParams,
) -> Result<WaitingTimes> {
    validate(policy, params).into_result()?;
    series_waits(policy, params)
}

fn series_waits(policy: &DispatchPolicy, params: &SystemParams) -> Result<WaitingTimes> {
    let nu = decoupled_stationary(policy)?;
    Ok(WaitingTimes {
        order_wait: params.order_wait_floor() + nu.mean_positive_part(),
        rider_wait: nu.mean_negative_part(),
        method: Method::Series,
    })
}

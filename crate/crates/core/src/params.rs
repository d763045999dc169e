//! Environment constants, dispatch policies and their admissibility checks.
//!
//! Orders arrive at unit rate throughout; every other rate is expressed
//! relative to that time scale.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Restaurant-side constants of the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Service rate of the preparation queue.
    pub mu: f64,
    /// Maximal rider dispatch rate.
    pub cap_lambda: f64,
    /// Extra order delay customers tolerate beyond `1/(mu-1)`.
    pub t_star: f64,
}

impl SystemParams {
    pub fn new(mu: f64, cap_lambda: f64, t_star: f64) -> Self {
        Self {
            mu,
            cap_lambda,
            t_star,
        }
    }

    /// Mean sojourn time of the preparation queue.
    pub fn order_wait_floor(&self) -> f64 {
        1.0 / (self.mu - 1.0)
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !(self.mu > 1.0) || !self.mu.is_finite() {
            out.push(Violation::ServiceRate(self.mu));
        }
        if !(self.cap_lambda > 1.0) || !self.cap_lambda.is_finite() {
            out.push(Violation::Capacity(self.cap_lambda));
        }
        if !(self.t_star >= 0.0) || self.t_star.is_nan() {
            out.push(Violation::Patience(self.t_star));
        }
        out
    }
}

/// Information-disclosure cutoff of the restaurant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Threshold {
    Finite(u32),
    /// No prepared-queue information is shared.
    Infinite,
}

impl Threshold {
    pub fn finite(self) -> Option<u32> {
        match self {
            Threshold::Finite(m) => Some(m),
            Threshold::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Threshold::Infinite)
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threshold::Finite(m) => write!(f, "{m}"),
            Threshold::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Threshold {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinite") || t == "∞" {
            return Ok(Threshold::Infinite);
        }
        t.parse::<u32>().map(Threshold::Finite).map_err(|_| {
            Error::Rejected(format!(
                "threshold must be a nonnegative integer or 'inf', got {s:?}"
            ))
        })
    }
}

/// Signal-indexed dispatch rates with a buffer cap and the threshold they were designed for.
///
/// `rates[i]` is used while the restaurant signal equals `i`; every index past
/// the prefix uses `tail_rate`.
#[derive(Debug, Clone, PartialEq)]
pub struct DispatchPolicy {
    pub rates: Vec<f64>,
    pub tail_rate: f64,
    pub buffer: u32,
    pub threshold: Threshold,
}

impl DispatchPolicy {
    pub fn new(rates: Vec<f64>, tail_rate: f64, buffer: u32, threshold: Threshold) -> Self {
        Self {
            rates,
            tail_rate,
            buffer,
            threshold,
        }
    }

    /// Constant-rate policy with no restaurant information.
    pub fn blind(lambda0: f64, buffer: u32) -> Self {
        Self::new(vec![lambda0], lambda0, buffer, Threshold::Infinite)
    }

    pub fn lambda0(&self) -> f64 {
        self.rates.first().copied().unwrap_or(f64::NAN)
    }

    /// Utilization of the base rate, `1/lambda0`.
    pub fn rho(&self) -> f64 {
        1.0 / self.lambda0()
    }

    pub fn rate(&self, index: u64) -> f64 {
        usize::try_from(index)
            .ok()
            .and_then(|i| self.rates.get(i).copied())
            .unwrap_or(self.tail_rate)
    }

    /// Rider dispatch rate seen when the prepared queue holds `q2`.
    pub fn rate_at_state(&self, q2: i64) -> f64 {
        match self.threshold {
            Threshold::Infinite => self.lambda0(),
            Threshold::Finite(m) => {
                let signal = q2 - i64::from(m);
                self.rate(signal.max(0) as u64)
            }
        }
    }

    /// Constraints that do not depend on the environment.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let Some(&l0) = self.rates.first() else {
            out.push(Violation::EmptyRates);
            return out;
        };
        if !(l0 > 1.0) || !l0.is_finite() {
            out.push(Violation::BaseRate(l0));
        }
        for (i, &r) in self.rates.iter().enumerate().skip(1) {
            if !(r > 0.0) || !r.is_finite() {
                out.push(Violation::NonPositiveRate { index: i, rate: r });
            }
        }
        if !(self.tail_rate > 1.0) || !self.tail_rate.is_finite() {
            out.push(Violation::TailRate(self.tail_rate));
        }
        out
    }

    pub fn check(&self) -> Result<()> {
        let violations = self.violations();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(ValidationReport { violations }))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    ServiceRate(f64),
    Capacity(f64),
    Patience(f64),
    EmptyRates,
    BaseRate(f64),
    NonPositiveRate { index: usize, rate: f64 },
    TailRate(f64),
    AboveCapacity { index: usize, rate: f64 },
    TailAboveCapacity(f64),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ServiceRate(v) => write!(f, "μ ≤ 1 (μ = {v})"),
            Violation::Capacity(v) => write!(f, "Λ ≤ 1 (Λ = {v})"),
            Violation::Patience(v) => write!(f, "T* < 0 (T* = {v})"),
            Violation::EmptyRates => f.write_str("no dispatch rates given"),
            Violation::BaseRate(v) => write!(f, "λ_0 ≤ 1 (λ_0 = {v})"),
            Violation::NonPositiveRate { index, rate } => {
                write!(f, "λ_{index} ≤ 0 (λ_{index} = {rate})")
            }
            Violation::TailRate(v) => write!(f, "tail rate ≤ 1 (λ_tail = {v})"),
            Violation::AboveCapacity { index, rate } => {
                write!(f, "λ_{index} > Λ (λ_{index} = {rate})")
            }
            Violation::TailAboveCapacity(v) => write!(f, "tail rate > Λ (λ_tail = {v})"),
        }
    }
}

/// Every violated constraint; empty means the system is stable.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::Invalid(self))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("valid");
        }
        let parts: Vec<String> = self.violations.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join("; "))
    }
}

/// Checks a policy against an environment. Never fails; it reports.
pub fn validate(policy: &DispatchPolicy, params: &SystemParams) -> ValidationReport {
    let mut violations = params.violations();
    violations.extend(policy.violations());
    let cap = params.cap_lambda;
    if cap.is_finite() {
        for (i, &r) in policy.rates.iter().enumerate() {
            if r > cap {
                violations.push(Violation::AboveCapacity { index: i, rate: r });
            }
        }
        if policy.tail_rate > cap {
            violations.push(Violation::TailAboveCapacity(policy.tail_rate));
        }
    }
    ValidationReport { violations }
}

//! Queueing analytics for a meal-delivery platform that dispatches riders to
//! a single restaurant.
//!
//! Orders arrive at rate 1 and are prepared first-come-first-served at rate
//! `μ`. Prepared orders wait for riders; riders are sent as a Poisson stream
//! whose rate depends on how much the restaurant discloses about its
//! prepared-order queue, and dispatch pauses once `d` riders are waiting.
//!
//! - [`stationary`]: exact stationary law of the prepared queue and the joint law
//! - [`waiting`]: mean order and rider waits
//! - [`optimizer`]: optimal blind dispatch, policy improvement from
//!   disclosure, and the customer/rider trade-off bound
//! - [`oracle`]: brute-force solve of the truncated two-dimensional chain
//! - [`sim`]: event-driven simulation with batch-means error bars
//! - [`experiment`]: grid experiments rendered as CSV / JSONL tables

// `!(x > a)` is used on purpose so that NaN fails every range check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod optimizer;
pub mod oracle;
pub mod params;
pub mod sim;
pub mod stationary;
pub mod waiting;

pub use error::{Error, Result};
pub use optimizer::{
    improve_policy, max_utilization, optimize_dispatch, rider_wait_lower_bound, smallest_buffer,
    ImprovementResult, OptimalDispatch, TradeoffBound,
};
pub use oracle::{oracle_waiting_times, solve_auto, solve_truncated, TruncatedChainSolution};
pub use params::{validate, DispatchPolicy, SystemParams, Threshold, ValidationReport, Violation};
pub use sim::{simulate, SimulationConfig, SimulationResult};
pub use stationary::{decoupled_stationary, joint_stationary_pmf, StationaryDistribution};
pub use waiting::{
    order_wait_lower_bound, waiting_times, waiting_times_series, Method, WaitingTimes,
};

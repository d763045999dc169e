//! Event-driven simulation of orders and riders.
//!
//! Three exponential clocks compete: order arrivals (rate 1), preparation
//! completions (rate μ while an order is being prepared) and rider arrivals
//! (rate `λ_{(Q2-M)^+}` while fewer than `d` riders wait). All clocks are
//! redrawn after every event, which is exact by memorylessness and handles
//! signal-driven rate changes without thinning.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::params::{validate, DispatchPolicy, SystemParams};
use crate::waiting::{Method, WaitingTimes};

pub const BATCHES: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub policy: DispatchPolicy,
    pub params: SystemParams,
    pub max_events: u64,
    pub warmup_events: u64,
    pub seed: u64,
}

impl SimulationConfig {
    /// Config with the default warm-up of 10% of the events.
    pub fn new(policy: DispatchPolicy, params: SystemParams, max_events: u64, seed: u64) -> Self {
        Self {
            policy,
            params,
            max_events,
            warmup_events: max_events / 10,
            seed,
        }
    }

    pub fn check(&self) -> Result<()> {
        validate(&self.policy, &self.params).into_result()?;
        if self.max_events <= self.warmup_events {
            return Err(Error::Rejected(format!(
                "max_events ({}) must exceed warmup_events ({})",
                self.max_events, self.warmup_events
            )));
        }
        if self.max_events - self.warmup_events < BATCHES as u64 {
            return Err(Error::Rejected(format!(
                "at least {BATCHES} measured events are needed for batch means"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub order_wait_mean: f64,
    pub order_wait_stderr: f64,
    pub rider_wait_mean: f64,
    pub rider_wait_stderr: f64,
    /// Orders picked up after warm-up.
    pub orders_completed: u64,
    /// Riders arriving at the restaurant after warm-up.
    pub riders_dispatched: u64,
    pub realized_rider_rate: f64,
    pub realized_rider_rate_stderr: f64,
    pub measured_time: f64,
    pub events: u64,
    pub seed: u64,
}

impl SimulationResult {
    pub fn waiting_times(&self) -> WaitingTimes {
        WaitingTimes {
            order_wait: self.order_wait_mean,
            rider_wait: self.rider_wait_mean,
            method: Method::Simulated,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    OrderArrival,
    Prepared,
    RiderArrival,
}

/// System state right after an event, for instrumentation.
#[derive(Debug, Clone, Copy)]
pub struct Snapshot {
    pub time: f64,
    pub kind: EventKind,
    pub preparing: usize,
    pub prepared: usize,
    pub riders_waiting: usize,
    pub buffer: u32,
    /// Rider clock rate in force after the event.
    pub rider_rate: f64,
    /// Order that finished preparation at this event.
    pub finished_order: Option<u64>,
    /// Order picked up at this event.
    pub picked_order: Option<u64>,
}

impl Snapshot {
    pub fn q2(&self) -> i64 {
        self.prepared as i64 - self.riders_waiting as i64
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Batch {
    order_sum: f64,
    orders: u64,
    rider_sum: f64,
    riders_matched: u64,
    dispatched: u64,
    start: f64,
    end: f64,
}

fn batch_stats(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    let n = v.len() as f64;
    if v.len() < 2 {
        return (v.first().copied().unwrap_or(0.0), 0.0);
    }
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn simulate(cfg: &SimulationConfig) -> Result<SimulationResult> {
    simulate_observed(cfg, |_| {})
}

/// Runs the simulation and hands every post-event state to `observe`.
pub fn simulate_observed(
    cfg: &SimulationConfig,
    mut observe: impl FnMut(&Snapshot),
) -> Result<SimulationResult> {
    cfg.check()?;
    let policy = &cfg.policy;
    let mu = cfg.params.mu;
    let floor = -i64::from(policy.buffer);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // (order id, placement time)
    let mut preparing: VecDeque<(u64, f64)> = VecDeque::new();
    let mut prepared: VecDeque<(u64, f64)> = VecDeque::new();
    let mut riders: VecDeque<f64> = VecDeque::new();
    let mut next_order = 0u64;
    let mut now = 0.0f64;

    let measured = cfg.max_events - cfg.warmup_events;
    let batch_len = measured.div_ceil(BATCHES as u64);
    let mut batches = vec![Batch::default(); BATCHES];
    let mut warm_start = 0.0;

    for event in 0..cfg.max_events {
        let q2 = prepared.len() as i64 - riders.len() as i64;
        let service_rate = if preparing.is_empty() { 0.0 } else { mu };
        let rider_rate = if q2 > floor {
            policy.rate_at_state(q2)
        } else {
            0.0
        };
        let total = 1.0 + service_rate + rider_rate;
        let dt: f64 = rng.sample::<f64, _>(Exp1) / total;
        now += dt;
        let pick = rng.gen::<f64>() * total;

        let slot = event
            .checked_sub(cfg.warmup_events)
            .map(|k| ((k / batch_len) as usize).min(BATCHES - 1));
        if event == cfg.warmup_events {
            warm_start = now - dt;
        }

        let mut finished_order = None;
        let mut picked_order = None;
        let kind = if pick < 1.0 {
            preparing.push_back((next_order, now));
            next_order += 1;
            EventKind::OrderArrival
        } else if pick < 1.0 + service_rate {
            let order = preparing
                .pop_front()
                .expect("service clock runs only while preparing");
            finished_order = Some(order.0);
            if let Some(rider_since) = riders.pop_front() {
                picked_order = Some(order.0);
                if let Some(s) = slot {
                    let b = &mut batches[s];
                    b.order_sum += now - order.1;
                    b.orders += 1;
                    b.rider_sum += now - rider_since;
                    b.riders_matched += 1;
                }
            } else {
                prepared.push_back(order);
            }
            EventKind::Prepared
        } else {
            if let Some(s) = slot {
                batches[s].dispatched += 1;
            }
            if let Some(order) = prepared.pop_front() {
                picked_order = Some(order.0);
                if let Some(s) = slot {
                    let b = &mut batches[s];
                    b.order_sum += now - order.1;
                    b.orders += 1;
                    b.riders_matched += 1;
                }
            } else {
                riders.push_back(now);
            }
            EventKind::RiderArrival
        };

        if let Some(s) = slot {
            let b = &mut batches[s];
            if b.start == 0.0 && b.end == 0.0 {
                b.start = now - dt;
            }
            b.end = now;
        }

        let q2 = prepared.len() as i64 - riders.len() as i64;
        observe(&Snapshot {
            time: now,
            kind,
            preparing: preparing.len(),
            prepared: prepared.len(),
            riders_waiting: riders.len(),
            buffer: policy.buffer,
            rider_rate: if q2 > floor {
                policy.rate_at_state(q2)
            } else {
                0.0
            },
            finished_order,
            picked_order,
        });
    }

    let sum = |f: fn(&Batch) -> f64| batches.iter().map(f).sum::<f64>();
    let count = |f: fn(&Batch) -> u64| batches.iter().map(f).sum::<u64>();
    let orders = count(|b| b.orders);
    let matched = count(|b| b.riders_matched);
    let dispatched = count(|b| b.dispatched);
    let measured_time = now - warm_start;

    let (_, order_se) = batch_stats(
        batches
            .iter()
            .filter(|b| b.orders > 0)
            .map(|b| b.order_sum / b.orders as f64),
    );
    let (_, rider_se) = batch_stats(
        batches
            .iter()
            .filter(|b| b.riders_matched > 0)
            .map(|b| b.rider_sum / b.riders_matched as f64),
    );
    let (_, rate_se) = batch_stats(
        batches
            .iter()
            .filter(|b| b.end > b.start)
            .map(|b| b.dispatched as f64 / (b.end - b.start)),
    );

    Ok(SimulationResult {
        order_wait_mean: if orders > 0 {
            sum(|b| b.order_sum) / orders as f64
        } else {
            0.0
        },
        order_wait_stderr: order_se,
        rider_wait_mean: if matched > 0 {
            sum(|b| b.rider_sum) / matched as f64
        } else {
            0.0
        },
        rider_wait_stderr: rider_se,
        orders_completed: orders,
        riders_dispatched: dispatched,
        realized_rider_rate: dispatched as f64 / measured_time,
        realized_rider_rate_stderr: rate_se,
        measured_time,
        events: cfg.max_events,
        seed: cfg.seed,
    })
}

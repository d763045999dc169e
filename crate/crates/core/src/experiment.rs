//! Batch experiments over policy grids and their tabular output.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::optimizer::{improve_policy, rider_wait_lower_bound, smallest_buffer};
use crate::params::{DispatchPolicy, SystemParams, Threshold};
use crate::waiting::{waiting_times, WaitingTimes};

pub const DEFAULT_GRID_POINTS: usize = 64;
pub const DEFAULT_GRID_EPS: f64 = 1e-3;

/// Slack for the trade-off bound check on emitted rows.
const BOUND_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    /// Rider wait along the minimal feasible buffer, per patience level.
    Fig3,
    /// Order wait after policy improvement, per disclosure threshold.
    Fig4,
    /// Blind policies over a rate × buffer grid.
    Sweep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub params: SystemParams,
    pub lambda0_grid: Vec<f64>,
    pub t_star_list: Vec<f64>,
    pub thresholds: Vec<Threshold>,
    pub buffers: Vec<u32>,
}

impl ExperimentSpec {
    /// Defaults: `μ = Λ = 1.5`, patience levels 0.01/0.05/0.1, thresholds 0/10/∞.
    pub fn new(kind: ExperimentKind, params: SystemParams) -> Self {
        Self {
            kind,
            params,
            lambda0_grid: default_lambda0_grid(
                params.cap_lambda,
                DEFAULT_GRID_POINTS,
                DEFAULT_GRID_EPS,
            ),
            t_star_list: vec![0.01, 0.05, 0.1],
            thresholds: vec![
                Threshold::Finite(0),
                Threshold::Finite(10),
                Threshold::Infinite,
            ],
            buffers: (0..=10).collect(),
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.lambda0_grid.is_empty() {
            return Err(Error::Rejected("λ_0 grid is empty".into()));
        }
        let cap = self.params.cap_lambda;
        if let Some(bad) = self.lambda0_grid.iter().find(|&&l| !(l > 1.0 && l < cap)) {
            return Err(Error::Rejected(format!(
                "grid rate {bad} is outside (1, Λ = {cap})"
            )));
        }
        match self.kind {
            ExperimentKind::Fig3 if self.t_star_list.is_empty() => {
                Err(Error::Rejected("T* list is empty".into()))
            }
            ExperimentKind::Fig4 if self.thresholds.is_empty() => {
                Err(Error::Rejected("threshold list is empty".into()))
            }
            ExperimentKind::Sweep if self.buffers.is_empty() => {
                Err(Error::Rejected("buffer list is empty".into()))
            }
            _ => Ok(()),
        }
    }
}

/// `points` evenly spaced rates from `1+eps` to `cap-eps` inclusive.
pub fn default_lambda0_grid(cap: f64, points: usize, eps: f64) -> Vec<f64> {
    let (lo, hi) = (1.0 + eps, cap - eps);
    match points {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        n => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
    Threshold(Threshold),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Float(v) => fmt_g17(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Threshold(t) => t.to_string(),
        }
    }

    fn json(&self) -> String {
        match self {
            Cell::Float(v) if v.is_finite() => fmt_g17(*v),
            Cell::Float(_) => "null".into(),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => json_string(s),
            Cell::Threshold(Threshold::Finite(m)) => m.to_string(),
            Cell::Threshold(Threshold::Infinite) => "\"inf\"".into(),
        }
    }
}

fn json_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            let fields: Vec<String> = self
                .header
                .iter()
                .zip(row)
                .map(|(k, v)| format!("{}:{}", json_string(k), v.json()))
                .collect();
            out.push('{');
            out.push_str(&fields.join(","));
            out.push_str("}\n");
        }
        out
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| *h == name)
    }
}

/// Shortest-round-trip-safe rendering with 17 significant digits, like `%.17g`.
pub fn fmt_g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        let m = trim_zeros(mantissa.to_string());
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Fails when an order wait falls below the preparation-time floor.
pub fn check_floor(w: &WaitingTimes, params: &SystemParams, context: &str) -> Result<()> {
    if w.order_wait < params.order_wait_floor() - 1e-12 {
        return Err(Error::TheoremViolation(format!(
            "{context}: order wait {} below 1/(μ-1) = {}",
            w.order_wait,
            params.order_wait_floor()
        )));
    }
    Ok(())
}

/// Fails when a feasible design beats the trade-off bound.
pub fn check_tradeoff(rider_wait: f64, params: &SystemParams, context: &str) -> Result<()> {
    if let Some(bound) = rider_wait_lower_bound(params).value() {
        if rider_wait < bound - BOUND_TOL {
            return Err(Error::TheoremViolation(format!(
                "{context}: rider wait {rider_wait} below trade-off bound {bound}"
            )));
        }
    }
    Ok(())
}

/// Rider wait at the smallest feasible buffer, for every `(T*, λ_0)`.
pub fn run_fig3(spec: &ExperimentSpec) -> Result<Table> {
    spec.check()?;
    let mut t_list = spec.t_star_list.clone();
    t_list.sort_by(f64::total_cmp);
    let mut grid = spec.lambda0_grid.clone();
    grid.sort_by(f64::total_cmp);

    let mut table = Table::new(vec!["tstar", "lambda0", "d", "rider_wait", "order_wait"]);
    for &t_star in &t_list {
        let params = SystemParams {
            t_star,
            ..spec.params
        };
        for &l0 in &grid {
            let d = smallest_buffer(1.0 / l0, t_star)?;
            let w = waiting_times(&DispatchPolicy::blind(l0, d), &params)?;
            let ctx = format!("T*={t_star} λ_0={l0}");
            check_floor(&w, &params, &ctx)?;
            check_tradeoff(w.rider_wait, &params, &ctx)?;
            table.push(vec![
                Cell::Float(t_star),
                Cell::Float(l0),
                Cell::Int(i64::from(d)),
                Cell::Float(w.rider_wait),
                Cell::Float(w.order_wait),
            ]);
        }
    }
    Ok(table)
}

/// Order wait of the buffer-free blind policy and of its improvements for
/// each disclosure threshold.
pub fn run_fig4(spec: &ExperimentSpec) -> Result<Table> {
    spec.check()?;
    let mut thresholds = spec.thresholds.clone();
    thresholds.sort();
    thresholds.dedup();
    let mut grid = spec.lambda0_grid.clone();
    grid.sort_by(f64::total_cmp);
    let params = spec.params;

    let mut table = Table::new(vec![
        "threshold",
        "lambda0",
        "order_wait_total",
        "order_wait_extra",
        "rider_wait",
    ]);
    for &m in &thresholds {
        for &l0 in &grid {
            let base = DispatchPolicy::blind(l0, 0);
            let w = match m {
                Threshold::Infinite => waiting_times(&base, &params)?,
                Threshold::Finite(m) => improve_policy(&base, m, &params)?.after,
            };
            check_floor(&w, &params, &format!("M={m} λ_0={l0}"))?;
            table.push(vec![
                Cell::Threshold(m),
                Cell::Float(l0),
                Cell::Float(w.order_wait),
                Cell::Float(w.extra_delay(&params)),
                Cell::Float(w.rider_wait),
            ]);
        }
    }
    Ok(table)
}

/// Blind policies over `λ_0 × d`, flagged against the patience constraint.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<Table> {
    spec.check()?;
    let mut grid = spec.lambda0_grid.clone();
    grid.sort_by(f64::total_cmp);
    let mut buffers = spec.buffers.clone();
    buffers.sort_unstable();
    buffers.dedup();
    let params = spec.params;

    let mut table = Table::new(vec![
        "lambda0",
        "d",
        "order_wait",
        "order_wait_extra",
        "rider_wait",
        "feasible",
    ]);
    for &l0 in &grid {
        for &d in &buffers {
            let w = waiting_times(&DispatchPolicy::blind(l0, d), &params)?;
            let ctx = format!("λ_0={l0} d={d}");
            check_floor(&w, &params, &ctx)?;
            let feasible = w.extra_delay(&params) <= params.t_star;
            if feasible {
                check_tradeoff(w.rider_wait, &params, &ctx)?;
            }
            table.push(vec![
                Cell::Float(l0),
                Cell::Int(i64::from(d)),
                Cell::Float(w.order_wait),
                Cell::Float(w.extra_delay(&params)),
                Cell::Float(w.rider_wait),
                Cell::Text(feasible.to_string()),
            ]);
        }
    }
    Ok(table)
}

pub fn run(spec: &ExperimentSpec) -> Result<Table> {
    match spec.kind {
        ExperimentKind::Fig3 => run_fig3(spec),
        ExperimentKind::Fig4 => run_fig4(spec),
        ExperimentKind::Sweep => run_sweep(spec),
    }
}

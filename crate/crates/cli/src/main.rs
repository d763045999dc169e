mod config;

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dispatchq::experiment::{
    check_floor, check_tradeoff, default_lambda0_grid, run, Cell, ExperimentKind, ExperimentSpec,
    Table, DEFAULT_GRID_EPS, DEFAULT_GRID_POINTS,
};
use dispatchq::{
    improve_policy, optimize_dispatch, rider_wait_lower_bound, simulate, validate, waiting_times,
    DispatchPolicy, Error, SimulationConfig, SystemParams, Threshold,
};
use log::info;

use crate::config::Config;

const DEFAULT_RATE: f64 = 1.5;
const DEFAULT_T_STAR: f64 = 0.1;
const DEFAULT_EVENTS: u64 = 1_000_000;
const DEFAULT_SEED: u64 = 1;

#[derive(Parser, Debug)]
#[command(
    name = "dispatchq",
    version,
    about = "Rider dispatch analysis for a single restaurant"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run manifest; flags override its scalar fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Write the result table here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Total simulated events, warm-up included.
    #[arg(long, global = true)]
    events: Option<u64>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args, Debug)]
struct Overrides {
    /// Preparation service rate.
    #[arg(long, global = true)]
    mu: Option<f64>,
    /// Rider dispatch capacity.
    #[arg(long, global = true)]
    cap: Option<f64>,
    /// Tolerated extra order delay.
    #[arg(long, global = true)]
    tstar: Option<f64>,
    /// Comma-separated dispatch rates, indexed by the disclosed signal.
    #[arg(long, global = true, value_delimiter = ',', num_args = 1..)]
    rates: Option<Vec<f64>>,
    /// Rate for every signal past the listed ones.
    #[arg(long, global = true)]
    tail: Option<f64>,
    /// Maximal number of waiting riders.
    #[arg(long, global = true)]
    buffer: Option<u32>,
    /// Disclosure threshold, an integer or `inf`.
    #[arg(long, global = true)]
    threshold: Option<Threshold>,
    /// Target threshold for `improve`.
    #[arg(long, global = true)]
    m: Option<u32>,
    /// Events discarded before measuring; defaults to 10% of `--events`.
    #[arg(long, global = true)]
    warmup: Option<u64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Mean order and rider waits of a policy.
    Analyze,
    /// Best blind rate and buffer under the patience constraint.
    Optimize,
    /// Redesign a policy for a lower disclosure threshold.
    Improve,
    /// Event-driven simulation against the analytic waits.
    Simulate,
    /// Rider wait at the smallest feasible buffer across rates and patience levels.
    Fig3,
    /// Order wait after improvement across disclosure thresholds.
    Fig4,
    /// Blind policies over a rate by buffer grid.
    Sweep,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Csv,
    Jsonl,
}

/// Flags and manifest merged into concrete inputs.
struct Inputs {
    cli: Cli,
    cfg: Config,
}

impl Inputs {
    fn params(&self) -> SystemParams {
        let (o, p) = (&self.cli.overrides, &self.cfg.params);
        SystemParams::new(
            o.mu.or(p.mu).unwrap_or(DEFAULT_RATE),
            o.cap.or(p.cap_lambda).unwrap_or(DEFAULT_RATE),
            o.tstar.or(p.t_star).unwrap_or(DEFAULT_T_STAR),
        )
    }

    fn policy(&self, params: &SystemParams) -> Result<DispatchPolicy> {
        let o = &self.cli.overrides;
        let section = self.cfg.policy.as_ref();
        let rates = o
            .rates
            .clone()
            .or_else(|| section.and_then(|s| s.rates.clone()))
            .ok_or_else(|| {
                Error::Rejected("no policy given: pass --rates or a policy section".into())
            })?;
        let policy = DispatchPolicy::new(
            rates,
            o.tail
                .or(section.and_then(|s| s.tail_rate))
                .unwrap_or(params.cap_lambda),
            o.buffer.or(section.and_then(|s| s.buffer)).unwrap_or(0),
            o.threshold
                .or(section.and_then(|s| s.threshold))
                .unwrap_or(Threshold::Infinite),
        );
        validate(&policy, params).into_result()?;
        Ok(policy)
    }

    fn experiment(&self, kind: ExperimentKind) -> ExperimentSpec {
        let params = self.params();
        let e = &self.cfg.experiment;
        let mut spec = ExperimentSpec::new(kind, params);
        spec.lambda0_grid = e.lambda0_grid.clone().unwrap_or_else(|| {
            default_lambda0_grid(
                params.cap_lambda,
                e.grid_points.unwrap_or(DEFAULT_GRID_POINTS),
                e.grid_eps.unwrap_or(DEFAULT_GRID_EPS),
            )
        });
        if let Some(t) = &e.t_star_list {
            spec.t_star_list = t.clone();
        }
        if let Some(t) = &e.thresholds {
            spec.thresholds = t.clone();
        }
        if let Some(b) = &e.buffers {
            spec.buffers = b.clone();
        }
        spec
    }
}

fn analyze(inputs: &Inputs) -> Result<Table> {
    let params = inputs.params();
    let policy = inputs.policy(&params)?;
    let w = waiting_times(&policy, &params)?;
    check_floor(&w, &params, "analyze")?;
    info!("analyze {policy:?}: {w:?}");
    let mut table = Table::new(vec![
        "order_wait",
        "rider_wait",
        "method",
        "order_wait_floor",
        "extra_delay",
    ]);
    table.push(vec![
        Cell::Float(w.order_wait),
        Cell::Float(w.rider_wait),
        Cell::Text(w.method.to_string()),
        Cell::Float(params.order_wait_floor()),
        Cell::Float(w.extra_delay(&params)),
    ]);
    Ok(table)
}

fn optimize(inputs: &Inputs) -> Result<Table> {
    let params = inputs.params();
    let opt = optimize_dispatch(&params)?;
    let w = waiting_times(&opt.policy(), &params)?;
    check_floor(&w, &params, "optimize")?;
    check_tradeoff(opt.rider_wait, &params, "optimize")?;
    info!("optimize {params:?}: {opt:?}");
    let bound = match rider_wait_lower_bound(&params).value() {
        Some(v) => Cell::Float(v),
        None => Cell::Text("n/a".into()),
    };
    let mut table = Table::new(vec![
        "lambda0",
        "buffer",
        "order_wait",
        "rider_wait",
        "extra_delay",
        "constraint_slack",
        "rider_wait_lower_bound",
    ]);
    table.push(vec![
        Cell::Float(opt.lambda0),
        Cell::Int(i64::from(opt.buffer)),
        Cell::Float(opt.order_wait),
        Cell::Float(opt.rider_wait),
        Cell::Float(w.extra_delay(&params)),
        Cell::Float(opt.constraint_slack),
        bound,
    ]);
    Ok(table)
}

fn improve(inputs: &Inputs) -> Result<Table> {
    let params = inputs.params();
    let policy = inputs.policy(&params)?;
    let m = inputs.cli.overrides.m.or(inputs.cfg.improve.m).unwrap_or(0);
    let r = improve_policy(&policy, m, &params)?;
    check_floor(&r.after, &params, "improve")?;
    info!("improve to M={m}: {:?}", r.new_policy);
    let mut table = Table::new(vec![
        "m",
        "c",
        "tau0",
        "tau1",
        "tail_rate",
        "buffer",
        "order_wait_before",
        "order_wait_after",
        "extra_delay_before",
        "extra_delay_after",
        "rider_wait_before",
        "rider_wait_after",
    ]);
    table.push(vec![
        Cell::Int(i64::from(m)),
        Cell::Float(r.c_constant),
        Cell::Float(r.new_policy.rates[0]),
        Cell::Float(r.new_policy.rates[1]),
        Cell::Float(r.new_policy.tail_rate),
        Cell::Int(i64::from(r.new_policy.buffer)),
        Cell::Float(r.order_wait_before()),
        Cell::Float(r.order_wait_after()),
        Cell::Float(r.before.extra_delay(&params)),
        Cell::Float(r.after.extra_delay(&params)),
        Cell::Float(r.rider_wait_before()),
        Cell::Float(r.rider_wait_after()),
    ]);
    Ok(table)
}

fn z_score(estimate: f64, stderr: f64, reference: f64) -> f64 {
    if stderr > 0.0 {
        (estimate - reference) / stderr
    } else if estimate == reference {
        0.0
    } else {
        f64::INFINITY.copysign(estimate - reference)
    }
}

fn simulate_cmd(inputs: &Inputs) -> Result<Table> {
    let params = inputs.params();
    let policy = inputs.policy(&params)?;
    let sim = &inputs.cfg.simulation;
    let events = inputs.cli.events.or(sim.events).unwrap_or(DEFAULT_EVENTS);
    let seed = inputs.cli.seed.or(sim.seed).unwrap_or(DEFAULT_SEED);
    let mut cfg = SimulationConfig::new(policy.clone(), params, events, seed);
    if let Some(w) = inputs.cli.overrides.warmup.or(sim.warmup) {
        cfg.warmup_events = w;
    }
    let reference = waiting_times(&policy, &params)?;
    let r = simulate(&cfg)?;
    info!("simulate seed={seed} events={events}: {r:?}");

    let floor = params.order_wait_floor();
    let rows = [
        (
            "order_wait",
            r.order_wait_mean,
            r.order_wait_stderr,
            reference.order_wait,
        ),
        (
            "order_wait_extra",
            r.order_wait_mean - floor,
            r.order_wait_stderr,
            reference.order_wait - floor,
        ),
        (
            "rider_wait",
            r.rider_wait_mean,
            r.rider_wait_stderr,
            reference.rider_wait,
        ),
        (
            "rider_rate",
            r.realized_rider_rate,
            r.realized_rider_rate_stderr,
            1.0,
        ),
    ];
    let mut table = Table::new(vec![
        "metric",
        "estimate",
        "stderr",
        "reference",
        "z_score",
        "seed",
        "events",
    ]);
    for (name, est, se, reference) in rows {
        table.push(vec![
            Cell::Text(name.into()),
            Cell::Float(est),
            Cell::Float(se),
            Cell::Float(reference),
            Cell::Float(z_score(est, se, reference)),
            i64::try_from(seed).map_or_else(|_| Cell::Text(seed.to_string()), Cell::Int),
            Cell::Int(i64::try_from(r.events).unwrap_or(i64::MAX)),
        ]);
    }
    Ok(table)
}

fn experiment(inputs: &Inputs, kind: ExperimentKind) -> Result<Table> {
    let spec = inputs.experiment(kind);
    info!("{kind:?}: {} rates", spec.lambda0_grid.len());
    Ok(run(&spec)?)
}

fn emit(table: &Table, format: Format, out: Option<&PathBuf>) -> Result<()> {
    let text = match format {
        Format::Csv => table.to_csv(),
        Format::Jsonl => table.to_jsonl(),
    };
    match out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => config::load(path)?,
        None => Config::default(),
    };
    let inputs = Inputs { cli, cfg };
    let table = match inputs.cli.command {
        Command::Analyze => analyze(&inputs)?,
        Command::Optimize => optimize(&inputs)?,
        Command::Improve => improve(&inputs)?,
        Command::Simulate => simulate_cmd(&inputs)?,
        Command::Fig3 => experiment(&inputs, ExperimentKind::Fig3)?,
        Command::Fig4 => experiment(&inputs, ExperimentKind::Fig4)?,
        Command::Sweep => experiment(&inputs, ExperimentKind::Sweep)?,
    };
    emit(&table, inputs.cli.format, inputs.cli.out.as_ref())
}

/// 2 for bad input, 3 for an unreachable patience target, 4 when a checked
/// relation fails, 1 for anything else (I/O).
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Invalid(_) | Error::Rejected(_) => 2,
                Error::Infeasible(_) => 3,
                Error::Truncation { .. } | Error::TheoremViolation(_) => 4,
            };
        }
        if cause.is::<serde_json::Error>() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DISPATCHQ_LOG", "warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

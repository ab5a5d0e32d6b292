//! `mnac-gt`: bounds, sweeps and simulations for group-testing device discovery.

mod settings;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use mnac_gt::bounds::{bound_report, optimize_threshold, DiscoveryConfig, ErrorTarget, Q1Mode, DEFAULT_DELTA_EXP, DEFAULT_MARGIN};
use mnac_gt::capacity::LowSnrRayleigh;
use mnac_gt::channel::write_round_csv;
use mnac_gt::exec::{with_workers, workers_from_env, Exec, WORKERS_ENV};
use mnac_gt::experiments::{
    bounds_table, capacity_curve, gap_sweep, id_cost, simulate, threshold_table, write_table, Activity, Grid, Scale,
    SweepSpec, SweepVar, Table, MC_CELL_LIMIT,
};
use mnac_gt::montecarlo::{trial_round, SimOptions};
use mnac_gt::validate::{run_validation, Golden, ValidateOptions};
use mnac_gt::{Error, SystemParams};

use settings::Settings;

#[derive(Parser, Debug)]
#[command(name = "mnac-gt", version, about, after_help = after_help())]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON file with default option values (flags take precedence)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
}

fn after_help() -> String {
    format!("Set {WORKERS_ENV} to cap the number of worker threads.\nExit codes: 0 success, 1 argument or config error, 2 numerical failure.")
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// ln M upper bound against n for several populations
    CapacityCurve,
    /// Minimum user identification cost
    IdCost,
    /// Every closed-form bound at one configuration
    Bounds,
    /// n_GT over the threshold grid, with the minimiser marked
    OptimizeTau,
    /// Gap to the identification cost across users, SNR or n
    GapSweep,
    /// Monte Carlo discovery trials next to the bounds
    Simulate,
    /// Golden values, oracle agreement and orderings
    Validate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::CapacityCurve => "capacity-curve",
            Command::IdCost => "id-cost",
            Command::Bounds => "bounds",
            Command::OptimizeTau => "optimize-tau",
            Command::GapSweep => "gap-sweep",
            Command::Simulate => "simulate",
            Command::Validate => "validate",
        }
    }
}

/// Failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { code: if e.is_numerical() { 2 } else { 1 }, message: e.to_string() }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure { code: 1, message: format!("{e:#}") }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure { code: 1, message: e.to_string() }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure { code: 1, message: msg.into() }
}

const DEFAULT_ELL: u64 = 10_000;
const DEFAULT_SNR: f64 = 1e-4;
const DEFAULT_GAMMA: f64 = 0.5;
const DEFAULT_GRID_POINTS: usize = 200;
const DEFAULT_TRIALS: u64 = 1000;
const DEFAULT_CURVE_ELLS: [u64; 4] = [1_000, 10_000, 100_000, 1_000_000];

/// Resolved values shared by most commands.
struct Base {
    params: SystemParams,
    activity: Activity,
    target: ErrorTarget,
    margin: f64,
    grid_points: usize,
    q1_mode: Q1Mode,
    seed: u64,
}

fn activity(s: &Settings) -> Activity {
    match (s.alpha, s.gamma) {
        (Some(a), _) => Activity::Alpha(a),
        (None, Some(g)) => Activity::Gamma(g),
        (None, None) => Activity::Gamma(DEFAULT_GAMMA),
    }
}

fn base(s: &Settings) -> Result<Base, Failure> {
    let activity = activity(s);
    let params = activity.params(s.ell.unwrap_or(DEFAULT_ELL), s.snr.unwrap_or(DEFAULT_SNR))?;
    Ok(Base {
        params,
        activity,
        target: ErrorTarget::new(s.delta_exp.unwrap_or(DEFAULT_DELTA_EXP))?,
        margin: s.delta.unwrap_or(DEFAULT_MARGIN),
        grid_points: s.grid_points.unwrap_or(DEFAULT_GRID_POINTS),
        q1_mode: s.q1_mode.unwrap_or_default(),
        seed: s.seed.unwrap_or(0),
    })
}

fn base_meta(b: &Base) -> Value {
    json!({
        "ell": b.params.ell,
        "alpha": b.params.alpha,
        "activity": b.activity,
        "snr": b.params.rho(),
        "delta": b.margin,
        "delta_exp": b.target.delta_exp,
        "grid_points": b.grid_points,
        "q1_mode": b.q1_mode,
        "seed": b.seed,
    })
}

fn extend(mut meta: Value, extra: Value) -> Value {
    if let (Some(m), Value::Object(e)) = (meta.as_object_mut(), extra) {
        m.extend(e);
    }
    meta
}

/// Design config with the threshold fixed or searched, and `n` defaulting
/// to `ceil(n_GT)` at the chosen threshold.
fn design(s: &Settings, b: &Base, exec: Exec) -> Result<DiscoveryConfig, Failure> {
    let cap = LowSnrRayleigh::default();
    let mut cfg = DiscoveryConfig::for_params(&b.params, s.n.unwrap_or(0), s.tau2.unwrap_or(0.0));
    cfg.delta_margin = b.margin;
    cfg.q1_mode = b.q1_mode;
    if let Some(p) = s.p {
        cfg.p = p;
    }
    cfg.check()?;
    if s.tau2.is_none() {
        let choice = optimize_threshold(&b.params, &cfg, &b.target, b.grid_points, &cap, exec)?;
        cfg.tau2 = choice.tau2;
        if s.n.is_none() {
            cfg.n = choice.report.n_gt.ceil() as u64;
        }
    } else if s.n.is_none() {
        let r = bound_report(&b.params, &cfg, &b.target, &cap)?;
        cfg.n = r.n_gt.ceil() as u64;
    }
    Ok(cfg)
}

fn cfg_meta(cfg: &DiscoveryConfig, optimized: bool) -> Value {
    json!({ "n": cfg.n, "p": cfg.p, "tau2": cfg.tau2, "optimize_tau": optimized })
}

struct Output {
    meta: Value,
    table: Table,
    code: u8,
}

fn capacity_curve_cmd(s: &Settings) -> Result<Output, Failure> {
    let activity = activity(s);
    let snr = s.snr.unwrap_or(DEFAULT_SNR);
    let ells = match (&s.ells, s.ell) {
        (Some(v), _) => v.clone(),
        (None, Some(ell)) => vec![ell],
        (None, None) => DEFAULT_CURVE_ELLS.to_vec(),
    };
    let grid = Grid {
        scale: s.scale.unwrap_or(Scale::Linear),
        start: s.from.unwrap_or(2000.0),
        end: s.to.unwrap_or(20000.0),
        points: s.points.unwrap_or(91),
    };
    let table = capacity_curve(&ells, activity, snr, &grid, &LowSnrRayleigh::default())?;
    let meta = json!({ "ells": ells, "activity": activity, "snr": snr, "n_grid": grid });
    Ok(Output { meta, table, code: 0 })
}

fn sweep_spec(s: &Settings) -> Result<SweepSpec, Failure> {
    let variable = s.sweep.unwrap_or_default();
    let (lo, hi, points, scale) = match variable {
        SweepVar::Users => (1e3, 1e6, 10, Scale::Log),
        SweepVar::Snr => (1e-4, 1e-2, 10, Scale::Log),
        SweepVar::N => (1e4, 1e6, 10, Scale::Log),
    };
    let spec = SweepSpec {
        variable,
        grid: Grid {
            scale: s.scale.unwrap_or(scale),
            start: s.from.unwrap_or(lo),
            end: s.to.unwrap_or(hi),
            points: s.points.unwrap_or(points),
        },
        activity: activity(s),
        ell: s.ell.unwrap_or(DEFAULT_ELL),
        snr: s.snr.unwrap_or(DEFAULT_SNR),
        n: s.n,
        p: s.p,
        delta_margin: s.delta.unwrap_or(DEFAULT_MARGIN),
        delta_exp: s.delta_exp.unwrap_or(DEFAULT_DELTA_EXP),
        grid_points: s.grid_points.unwrap_or(DEFAULT_GRID_POINTS),
        q1_mode: s.q1_mode.unwrap_or_default(),
        trials: s.trials.unwrap_or(0),
        seed: s.seed.unwrap_or(0),
    };
    if s.tau2.is_some() {
        return Err(usage("gap-sweep always searches the threshold; drop --tau2"));
    }
    spec.check()?;
    Ok(spec)
}

fn simulate_cmd(s: &Settings, exec: Exec) -> Result<Output, Failure> {
    let b = base(s)?;
    let cfg = design(s, &b, exec)?;
    let trials = s.trials.unwrap_or(DEFAULT_TRIALS);
    let cells = cfg.n as f64 * b.params.ell as f64;
    if cells > MC_CELL_LIMIT {
        return Err(usage(format!("n ell = {cells:e} is too large to simulate; pass a smaller --n")));
    }
    let opts = SimOptions {
        fading: s.fading.unwrap_or_default(),
        matrix: s.matrix.unwrap_or_default(),
        exec,
        decoder_q1: None,
        progress: s.progress.unwrap_or(false),
    };
    let row = simulate(&b.params, &cfg, &b.target, trials, b.seed, &opts, &LowSnrRayleigh::default())?;
    let meta = extend(
        extend(base_meta(&b), cfg_meta(&cfg, s.tau2.is_none())),
        json!({ "trials": trials, "fading": opts.fading, "matrix": opts.matrix }),
    );
    if let Some(path) = &s.dump {
        let (_, round) = trial_round(&b.params, &cfg, b.seed, 0, &opts)?;
        let mut buf = Vec::new();
        writeln!(buf, "# {}", extend(meta.clone(), json!({ "command": "simulate", "dump": "trial 0" })))?;
        write_round_csv(&mut buf, &round.received, &round.outcomes)?;
        std::fs::write(path, buf).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(Output { meta, table: row.table(), code: 0 })
}

fn validate_cmd(s: &Settings, exec: Exec) -> Result<u8, Failure> {
    let golden = match &s.golden {
        Some(p) => Golden::load(p).map_err(|e| usage(format!("cannot load golden file {}: {e}", p.display())))?,
        None => Golden::builtin(),
    };
    let mut opts = ValidateOptions { exec, ..ValidateOptions::default() };
    if let Some(d) = s.draws {
        opts.conditional_draws = d;
    }
    if let Some(seed) = s.seed {
        opts.seed = seed;
    }
    let checks = run_validation(&golden, &opts);
    let mut out = io::stdout().lock();
    for c in &checks {
        writeln!(out, "{c}")?;
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    writeln!(out, "{} checks, {failed} failed", checks.len())?;
    Ok(if failed == 0 { 0 } else { 2 })
}

fn emit(out: Option<&Path>, command: Command, o: &Output) -> Result<(), Failure> {
    let meta = extend(json!({ "command": command.name() }), o.meta.clone());
    let mut buf = Vec::new();
    write_table(&mut buf, &meta, &o.table)?;
    match out {
        Some(path) => {
            let f = File::create(path).map_err(|e| usage(format!("cannot create {}: {e}", path.display())))?;
            let mut w = BufWriter::new(f);
            w.write_all(&buf)?;
            w.flush()?;
        }
        None => io::stdout().lock().write_all(&buf)?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let file = match &cli.config {
        Some(p) => Settings::load(p)?,
        None => Settings::default(),
    };
    let s = cli.settings.over(file);
    let exec = Exec::Parallel;
    let out = s.out.clone();
    let output = match cli.command {
        Command::Validate => return validate_cmd(&s, exec),
        Command::CapacityCurve => capacity_curve_cmd(&s)?,
        Command::IdCost => {
            let b = base(&s)?;
            Output { meta: base_meta(&b), table: id_cost(&b.params, &LowSnrRayleigh::default())?, code: 0 }
        }
        Command::Bounds => {
            let b = base(&s)?;
            let cfg = design(&s, &b, exec)?;
            let report = bound_report(&b.params, &cfg, &b.target, &LowSnrRayleigh::default())?;
            Output { meta: extend(base_meta(&b), cfg_meta(&cfg, s.tau2.is_none())), table: bounds_table(&report), code: 0 }
        }
        Command::OptimizeTau => {
            let b = base(&s)?;
            if s.tau2.is_some() {
                return Err(usage("optimize-tau searches the threshold; drop --tau2"));
            }
            let mut cfg = DiscoveryConfig::for_params(&b.params, s.n.unwrap_or(0), 0.0);
            cfg.delta_margin = b.margin;
            cfg.q1_mode = b.q1_mode;
            if let Some(p) = s.p {
                cfg.p = p;
            }
            let (table, report) = threshold_table(&b.params, &cfg, &b.target, b.grid_points, &LowSnrRayleigh::default(), exec)?;
            let meta = extend(base_meta(&b), json!({ "p": cfg.p, "tau2_opt": report.tau2, "n_gt_opt": report.n_gt }));
            Output { meta, table, code: 0 }
        }
        Command::GapSweep => {
            let spec = sweep_spec(&s)?;
            let result = gap_sweep(&spec, &LowSnrRayleigh::default(), exec)?;
            let code = if result.all_failed { 2 } else { 0 };
            Output { meta: serde_json::to_value(spec).map_err(Error::from)?, table: result.table, code }
        }
        Command::Simulate => simulate_cmd(&s, exec)?,
    };
    emit(out.as_deref(), cli.command, &output)?;
    if output.code != 0 {
        eprintln!("error: every sweep point failed");
    }
    Ok(output.code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match with_workers(workers_from_env(), || run(cli)) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

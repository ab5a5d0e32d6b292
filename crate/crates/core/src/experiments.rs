//! Parameter sweeps and the CSV tables behind the command-line tool.
//!
//! Every table is computed point by point (possibly concurrently) and then
//! laid out in grid order, so the bytes written do not depend on the
//! worker count.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::bounds::{
    bound_report, optimize_threshold, threshold_profile, BoundReport, DiscoveryConfig, ErrorTarget, Q1Mode,
    DEFAULT_MARGIN,
};
use crate::capacity::{binary_entropy_nats, capacity_upper_bound, min_user_id_cost_lb, CapacityFn};
use crate::error::{domain, Error, Result};
use crate::exec::Exec;
use crate::montecarlo::{run_discovery_trials, Estimate, SimOptions, TrialStats};
use crate::params::SystemParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    #[default]
    Log,
    Linear,
}

/// `points` values from `start` to `end` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub scale: Scale,
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

impl Grid {
    pub fn log(start: f64, end: f64, points: usize) -> Self {
        Grid { scale: Scale::Log, start, end, points }
    }

    pub fn linear(start: f64, end: f64, points: usize) -> Self {
        Grid { scale: Scale::Linear, start, end, points }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.start > 0.0 && self.start.is_finite() && self.end.is_finite()) {
            return Err(domain(format!("grid endpoints must be positive, got {} and {}", self.start, self.end)));
        }
        if self.end < self.start {
            return Err(domain(format!("grid endpoints out of order: {} > {}", self.start, self.end)));
        }
        if self.points == 0 || (self.points == 1 && self.end != self.start) {
            return Err(domain(format!("grid from {} to {} needs at least 2 points", self.start, self.end)));
        }
        Ok(())
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        self.check()?;
        if self.points == 1 {
            return Ok(vec![self.start]);
        }
        let last = (self.points - 1) as f64;
        Ok((0..self.points)
            .map(|i| {
                if i == 0 {
                    return self.start;
                }
                if i == self.points - 1 {
                    return self.end;
                }
                let t = i as f64 / last;
                match self.scale {
                    Scale::Linear => self.start + t * (self.end - self.start),
                    Scale::Log => (self.start.ln() + t * (self.end.ln() - self.start.ln())).exp(),
                }
            })
            .map(|v| v.clamp(self.start, self.end))
            .collect())
    }
}

/// How the active fraction follows the population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activity {
    /// `k = ell^gamma`.
    Gamma(f64),
    /// Fixed `alpha`.
    Alpha(f64),
}

impl Default for Activity {
    fn default() -> Self {
        Activity::Gamma(0.5)
    }
}

impl Activity {
    pub fn params(&self, ell: u64, snr: f64) -> Result<SystemParams> {
        match *self {
            Activity::Gamma(g) => SystemParams::with_gamma(ell, g, snr),
            Activity::Alpha(a) => SystemParams::with_snr(ell, a, snr),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepVar {
    #[default]
    Users,
    Snr,
    N,
}

impl SweepVar {
    fn column(&self) -> &'static str {
        match self {
            SweepVar::Users => "sweep_ell",
            SweepVar::Snr => "sweep_snr",
            SweepVar::N => "sweep_n",
        }
    }
}

/// Everything a gap sweep needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub variable: SweepVar,
    pub grid: Grid,
    pub activity: Activity,
    /// Population when it is not the swept variable.
    pub ell: u64,
    /// `rho` when it is not the swept variable.
    pub snr: f64,
    /// Channel uses for the error bounds; `None` uses `ceil(n_GT)`.
    pub n: Option<u64>,
    /// Inclusion probability; `None` uses `1 / (k + 1)`.
    pub p: Option<f64>,
    pub delta_margin: f64,
    pub delta_exp: f64,
    pub grid_points: usize,
    pub q1_mode: Q1Mode,
    /// Monte Carlo trials per point; 0 is analytic only.
    pub trials: u64,
    pub seed: u64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            variable: SweepVar::Users,
            grid: Grid::log(1e3, 1e6, 10),
            activity: Activity::default(),
            ell: 10_000,
            snr: 1e-4,
            n: None,
            p: None,
            delta_margin: DEFAULT_MARGIN,
            delta_exp: crate::bounds::DEFAULT_DELTA_EXP,
            grid_points: 200,
            q1_mode: Q1Mode::JensenLb,
            trials: 0,
            seed: 0,
        }
    }
}

impl SweepSpec {
    pub fn check(&self) -> Result<()> {
        self.grid.check()?;
        if let Activity::Gamma(g) = self.activity {
            if !(g > 0.0 && g < 1.0) {
                return Err(domain(format!("gamma must lie in (0, 1), got {g}")));
            }
        }
        ErrorTarget::new(self.delta_exp)?;
        Ok(())
    }
}

/// Rows of strings in a fixed column order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(columns: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Table { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    /// Index of a named column.
    pub fn col(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Parse a numeric column; empty cells become `None`.
    pub fn numbers(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let c = self.col(name)?;
        Some(self.rows.iter().map(|r| r[c].parse().ok()).collect())
    }
}

/// Write `# <json>` followed by the table as CSV.
pub fn write_table<W: Write>(mut out: W, meta: &serde_json::Value, table: &Table) -> Result<()> {
    writeln!(out, "# {}", serde_json::to_string(meta)?)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

fn status(e: &Error) -> String {
    format!("error: {e}")
}

/// `ln M` upper-bound curves, one block of rows per population.
///
/// Columns: `ell, alpha, n, lnM_nats, M_bits_clamped, status`. The last
/// numeric column is `max(lnM, 0) / ln 2`.
pub fn capacity_curve(ells: &[u64], activity: Activity, snr: f64, n_grid: &Grid, cap: &dyn CapacityFn) -> Result<Table> {
    let ns = n_grid.values()?;
    let mut t = Table::new(["ell", "alpha", "n", "lnM_nats", "M_bits_clamped", "status"]);
    for &ell in ells {
        let params = activity.params(ell, snr)?;
        for &n in &ns {
            let row = match capacity_upper_bound(n, &params, cap) {
                Ok(v) => vec![
                    ell.to_string(),
                    params.alpha.to_string(),
                    n.to_string(),
                    v.to_string(),
                    (v.max(0.0) / std::f64::consts::LN_2).to_string(),
                    "ok".into(),
                ],
                Err(e) => vec![
                    ell.to_string(),
                    params.alpha.to_string(),
                    n.to_string(),
                    String::new(),
                    String::new(),
                    status(&e),
                ],
            };
            t.rows.push(row);
        }
    }
    Ok(t)
}

/// Identification-cost lower bound for one configuration.
pub fn id_cost(params: &SystemParams, cap: &dyn CapacityFn) -> Result<Table> {
    let mut t = Table::new(["ell", "alpha", "k", "rho", "c_su", "h2_nats", "n0"]);
    let c = cap.capacity(params.rho())?;
    t.rows.push(vec![
        params.ell.to_string(),
        params.alpha.to_string(),
        params.k().to_string(),
        params.rho().to_string(),
        c.to_string(),
        binary_entropy_nats(params.alpha)?.to_string(),
        min_user_id_cost_lb(params, cap)?.to_string(),
    ]);
    Ok(t)
}

fn extra_columns() -> [&'static str; 5] {
    ["pmd_exponential", "pmd_theorem", "pfp_theorem", "eta", "beta1_solved"]
}

fn extra_fields(r: &BoundReport) -> Vec<String> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    vec![
        r.pmd_exponential.to_string(),
        opt(r.pmd_theorem),
        opt(r.pfp_theorem),
        r.eta.to_string(),
        r.beta1_solved.to_string(),
    ]
}

/// One [`BoundReport`] row plus the alternative bound forms.
pub fn bounds_table(report: &BoundReport) -> Table {
    let mut t = Table::new(BoundReport::COLUMNS.iter().copied().chain(extra_columns()));
    let mut row = report.csv_fields();
    row.extend(extra_fields(report));
    t.rows.push(row);
    t
}

/// `n_GT` across the threshold grid with the chosen point marked.
///
/// Fails with [`Error::Optimization`] when no grid point is feasible.
pub fn threshold_table(
    params: &SystemParams,
    cfg: &DiscoveryConfig,
    target: &ErrorTarget,
    grid_points: usize,
    cap: &dyn CapacityFn,
    exec: Exec,
) -> Result<(Table, BoundReport)> {
    let choice = optimize_threshold(params, cfg, target, grid_points, cap, exec)?;
    let mut t = Table::new(["index", "tau2", "n_gt", "selected", "status"]);
    for (i, (tau2, v)) in threshold_profile(params, cfg, target, grid_points, exec).into_iter().enumerate() {
        let (value, st) = match v {
            Ok(v) => (v.to_string(), "ok".to_string()),
            Err(e) => (String::new(), status(&e)),
        };
        let selected = tau2 == choice.tau2;
        t.rows.push(vec![(i + 1).to_string(), tau2.to_string(), value, selected.to_string(), st]);
    }
    Ok((t, choice.report))
}

/// Empirical rate at most `bound` plus three binomial standard errors.
pub fn dominated(est: Option<Estimate>, bound: f64) -> bool {
    match est {
        Some(e) => e.point <= bound + 3.0 * e.std_error(),
        None => true,
    }
}

/// Outcome of a sweep: the table and whether every point failed numerically.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub table: Table,
    pub all_failed: bool,
}

/// Largest `n ell` the sweep will simulate per trial before skipping.
pub const MC_CELL_LIMIT: f64 = 2e8;

struct PointResult {
    x: f64,
    outcome: Result<(BoundReport, usize, Option<Result<TrialStats>>)>,
}

fn sweep_point(spec: &SweepSpec, x: f64, index: usize, cap: &dyn CapacityFn) -> PointResult {
    let outcome = (|| {
        let (ell, snr) = match spec.variable {
            SweepVar::Users => (x.round() as u64, spec.snr),
            SweepVar::Snr => (spec.ell, x),
            SweepVar::N => (spec.ell, spec.snr),
        };
        let params = spec.activity.params(ell, snr)?;
        let target = ErrorTarget::new(spec.delta_exp)?;
        let mut cfg = DiscoveryConfig::for_params(&params, 0, 0.0);
        cfg.delta_margin = spec.delta_margin;
        cfg.q1_mode = spec.q1_mode;
        if let Some(p) = spec.p {
            cfg.p = p;
        }
        let choice = optimize_threshold(&params, &cfg, &target, spec.grid_points, cap, Exec::Sequential)?;
        let n = match spec.variable {
            SweepVar::N => x.round() as u64,
            _ => spec.n.unwrap_or(choice.report.n_gt.ceil() as u64),
        };
        let cfg = cfg.with_tau2(choice.tau2).with_n(n);
        let report = bound_report(&params, &cfg, &target, cap)?;
        let mc = (spec.trials > 0).then(|| {
            if n as f64 * ell as f64 > MC_CELL_LIMIT {
                return Err(domain(format!("simulation skipped: n ell = {} exceeds {MC_CELL_LIMIT}", n as f64 * ell as f64)));
            }
            let opts = SimOptions { exec: Exec::Sequential, ..SimOptions::default() };
            run_discovery_trials(&params, &cfg, spec.trials, spec.seed.wrapping_add(index as u64), &opts)
        });
        Ok((report, choice.feasible_points, mc))
    })();
    PointResult { x, outcome }
}

/// Optimise the threshold and report every bound at each grid point.
///
/// Monte Carlo columns are added when `spec.trials > 0`; point `i` uses
/// master seed `seed + i`.
pub fn gap_sweep(spec: &SweepSpec, cap: &dyn CapacityFn, exec: Exec) -> Result<SweepOutput> {
    spec.check()?;
    let xs = spec.grid.values()?;
    let points = exec.map(xs.len(), |i| sweep_point(spec, xs[i], i, cap));

    let mc = spec.trials > 0;
    let mut columns: Vec<String> = vec!["index".into(), spec.variable.column().into()];
    columns.extend(BoundReport::COLUMNS.iter().map(|c| c.to_string()));
    columns.extend(["feasible_points".into(), "status".into()]);
    if mc {
        columns.extend(TrialStats::COLUMNS.iter().map(|c| c.to_string()));
        columns.extend(["pmd_dominated".into(), "pfp_dominated".into(), "mc_status".into()]);
    }
    let width = columns.len();
    let mut table = Table { columns, rows: Vec::new() };
    let mut all_failed = true;
    for (i, p) in points.into_iter().enumerate() {
        let mut row = vec![i.to_string(), p.x.to_string()];
        match p.outcome {
            Ok((report, feasible, sim)) => {
                all_failed = false;
                row.extend(report.csv_fields());
                row.extend([feasible.to_string(), "ok".into()]);
                match sim {
                    Some(Ok(s)) => {
                        row.extend(s.csv_fields());
                        row.extend([
                            dominated(s.pmd(), report.pmd_ub).to_string(),
                            dominated(s.pfp(), report.pfp_ub).to_string(),
                            "ok".into(),
                        ]);
                    }
                    Some(Err(e)) => {
                        row.resize(width - 1, String::new());
                        row.push(status(&e));
                    }
                    None => {}
                }
            }
            Err(e) => {
                if !e.is_numerical() {
                    all_failed = false;
                }
                row.resize(2 + BoundReport::COLUMNS.len() + 1, String::new());
                row.push(status(&e));
                row.resize(width, String::new());
            }
        }
        table.rows.push(row);
    }
    Ok(SweepOutput { table, all_failed })
}

/// Monte Carlo run next to the closed-form bounds for the same configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRow {
    /// `Err` holds the reason the bounds are undefined (e.g. `alpha = 0`).
    pub report: std::result::Result<BoundReport, String>,
    pub stats: TrialStats,
}

impl SimulationRow {
    pub fn pmd_dominated(&self) -> Option<bool> {
        self.report.as_ref().ok().map(|r| dominated(self.stats.pmd(), r.pmd_ub))
    }

    pub fn pfp_dominated(&self) -> Option<bool> {
        self.report.as_ref().ok().map(|r| dominated(self.stats.pfp(), r.pfp_ub))
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(
            BoundReport::COLUMNS
                .iter()
                .copied()
                .chain(TrialStats::COLUMNS)
                .chain(["pmd_dominated", "pfp_dominated", "bounds_status"]),
        );
        let (mut row, st) = match &self.report {
            Ok(r) => (r.csv_fields(), "ok".to_string()),
            Err(e) => (vec![String::new(); BoundReport::COLUMNS.len()], format!("error: {e}")),
        };
        let flag = |v: Option<bool>| v.map(|b| b.to_string()).unwrap_or_default();
        row.extend(self.stats.csv_fields());
        row.extend([flag(self.pmd_dominated()), flag(self.pfp_dominated()), st]);
        t.rows.push(row);
        t
    }
}

/// Run the trials; the bounds are attached when they are defined.
pub fn simulate(
    params: &SystemParams,
    cfg: &DiscoveryConfig,
    target: &ErrorTarget,
    trials: u64,
    seed: u64,
    opts: &SimOptions,
    cap: &dyn CapacityFn,
) -> Result<SimulationRow> {
    let report = bound_report(params, cfg, target, cap).map_err(|e| e.to_string());
    let stats = run_discovery_trials(params, cfg, trials, seed, opts)?;
    Ok(SimulationRow { report, stats })
}

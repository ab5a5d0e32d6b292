//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use mnac_gt::bounds::{
    optimize_threshold, pfp_upper_bound, pmd_upper_bound, q1_exact, q1_lower_bound, q2_exact, q2_upper_bound,
    threshold_grid, DiscoveryConfig, ErrorTarget, Q1Mode,
};
use mnac_gt::capacity::{c_su, min_user_id_cost_lb, solve_x1, x1_equation_residual, LowSnrRayleigh};
use mnac_gt::channel::{energy_detect, gen_signature_matrix, sample_received, ActivityVector, FadingMode};
use mnac_gt::exec::{with_workers, Exec};
use mnac_gt::experiments::{capacity_curve, dominated, gap_sweep, write_table, Activity, Grid, SweepSpec, SweepVar};
use mnac_gt::montecarlo::{estimate_q1_q2, run_discovery_trials, SimOptions, TrialStats};
use mnac_gt::ncomp::ncomp_decode;
use mnac_gt::rng::{Purpose, Seed};
use mnac_gt::SystemParams;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

type Criterion = fn() -> Result<Outcome, String>;

fn gap_at(ell: u64, snr: f64, gamma: f64) -> Result<f64, String> {
    let params = SystemParams::with_gamma(ell, gamma, snr).map_err(|e| e.to_string())?;
    let cfg = DiscoveryConfig::for_params(&params, 1, 0.0);
    let choice = optimize_threshold(&params, &cfg, &ErrorTarget::default(), 200, &LowSnrRayleigh::default(), Exec::Parallel)
        .map_err(|e| e.to_string())?;
    Ok(choice.report.gap_g)
}

fn factor_of_two_gap() -> Result<Outcome, String> {
    let g: Vec<f64> = [10_000u64, 100_000, 1_000_000]
        .iter()
        .map(|&ell| gap_at(ell, 1e-4, 0.5))
        .collect::<Result<_, _>>()?;
    let ok = g[2] <= 1.2 && g[2] <= g[1];
    Ok(outcome(ok, format!("G(1e4) = {:.4}, G(1e5) = {:.4}, G(1e6) = {:.4}; need G(1e6) <= 1.2 and non-increasing", g[0], g[1], g[2])))
}

fn gap_versus_snr() -> Result<Outcome, String> {
    let rhos = Grid::log(1e-4, 1e-2, 10).values().map_err(|e| e.to_string())?;
    let g: Vec<f64> = rhos.iter().map(|&rho| gap_at(10_000, rho, 0.5)).collect::<Result<_, _>>()?;
    let ok = g.iter().all(|v| v.is_finite() && (0.0..=1.5).contains(v));
    let (lo, hi) = g.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    Ok(outcome(ok, format!("G over 10 SNR points in [1e-4, 1e-2] spans [{lo:.4}, {hi:.4}]; need within [0, 1.5]")))
}

fn capacity_curve_geometry() -> Result<Outcome, String> {
    let cap = LowSnrRayleigh::default();
    let ells = [1_000u64, 10_000, 100_000, 1_000_000];
    let table = capacity_curve(&ells, Activity::Gamma(0.5), 1e-4, &Grid::linear(2000.0, 20000.0, 91), &cap)
        .map_err(|e| e.to_string())?;
    let c = c_su(1e-4).map_err(|e| e.to_string())?;
    let (ell_col, n_col, y_col) = (table.col("ell").unwrap(), table.col("n").unwrap(), table.col("lnM_nats").unwrap());
    let (mut worst_slope, mut worst_icept) = (0f64, 0f64);
    for &ell in &ells {
        let rows: Vec<(f64, f64)> = table
            .rows
            .iter()
            .filter(|r| r[ell_col] == ell.to_string())
            .map(|r| (r[n_col].parse().unwrap(), r[y_col].parse().unwrap()))
            .collect();
        let ((n0, y0), (n1, y1)) = (rows[0], rows[rows.len() - 1]);
        let slope = (y1 - y0) / (n1 - n0);
        let intercept = n0 - y0 / slope;
        let params = SystemParams::with_gamma(ell, 0.5, 1e-4).map_err(|e| e.to_string())?;
        let want = min_user_id_cost_lb(&params, &cap).map_err(|e| e.to_string())?;
        worst_slope = worst_slope.max((slope / c - 1.0).abs());
        worst_icept = worst_icept.max((intercept / want - 1.0).abs());
    }
    Ok(outcome(
        worst_slope <= 1e-9 && worst_icept <= 0.01,
        format!("4 populations: worst slope rel err {worst_slope:.2e} (tol 1e-9), worst intercept rel err {worst_icept:.2e} (tol 1e-2)"),
    ))
}

fn q_oracle() -> Result<Outcome, String> {
    let params = SystemParams::with_snr(100, 0.1, 1e-2).map_err(|e| e.to_string())?;
    let cfg = DiscoveryConfig { n: 1, p: 1.0 / 11.0, delta_margin: 0.05, tau2: params.sigma2_w, q1_mode: Q1Mode::Exact };
    let s = estimate_q1_q2(&params, &cfg, 1_000_000, 2024, Exec::Parallel).map_err(|e| e.to_string())?;
    let (e1, e2) = (s.q1().unwrap(), s.q2().unwrap());
    let x1 = q1_exact(&params, &cfg).map_err(|e| e.to_string())?;
    let x2 = q2_exact(&params, &cfg).map_err(|e| e.to_string())?;
    let lb = q1_lower_bound(&params, &cfg).map_err(|e| e.to_string())?;
    let ub = q2_upper_bound(&params, &cfg).map_err(|e| e.to_string())?;
    let (z1, z2) = ((e1.point - x1) / e1.std_error(), (e2.point - x2) / e2.std_error());
    let ok = z1.abs() <= 4.0 && z2.abs() <= 4.0 && lb <= x1 && ub == 1.0 - lb;
    Ok(outcome(
        ok,
        format!(
            "q1 MC {:.6} vs {x1:.6} ({z1:+.2} SE), q2 MC {:.6} vs {x2:.6} ({z2:+.2} SE), q1_LB {lb:.6} <= q1, q2_UB == 1 - q1_LB: {}",
            e1.point,
            e2.point,
            ub == 1.0 - lb
        ),
    ))
}

/// Smallest `n` with the product-form misdetection bound at most `goal`.
fn n_for_pmd(params: &SystemParams, cfg: &DiscoveryConfig, goal: f64) -> Result<u64, String> {
    let at = |n: u64| pmd_upper_bound(params, &cfg.with_n(n)).map(|b| b.product).map_err(|e| e.to_string());
    let (mut lo, mut hi) = (0u64, 1u64);
    while at(hi)? > goal {
        lo = hi;
        hi *= 2;
        if hi > 1 << 40 {
            return Err("misdetection bound never reaches the goal".into());
        }
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if at(mid)? > goal {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

struct DominanceSetup {
    params: SystemParams,
    cfg: DiscoveryConfig,
    pmd_ub: f64,
    pfp_ub: f64,
}

/// Over the threshold grid, place `n` where the misdetection bound hits 0.2
/// and keep the threshold with the smallest false-positive bound there.
fn dominance_setup() -> Result<DominanceSetup, String> {
    let params = SystemParams::with_snr(200, 0.07, 1e-2).map_err(|e| e.to_string())?;
    let base = DiscoveryConfig::for_params(&params, 1, 0.0);
    let mut best: Option<DominanceSetup> = None;
    for tau2 in threshold_grid(&params, 200) {
        let cfg = base.with_tau2(tau2);
        let Ok(n) = n_for_pmd(&params, &cfg, 0.2) else { continue };
        let cfg = cfg.with_n(n);
        let pmd_ub = pmd_upper_bound(&params, &cfg).map_err(|e| e.to_string())?.product;
        let pfp_ub = pfp_upper_bound(&params, &cfg).map_err(|e| e.to_string())?.product;
        if best.as_ref().is_none_or(|b| pfp_ub < b.pfp_ub) {
            best = Some(DominanceSetup { params, cfg, pmd_ub, pfp_ub });
        }
    }
    best.ok_or_else(|| "no threshold reaches a misdetection bound of 0.2".into())
}

static DOMINANCE: OnceLock<Result<(DominanceSetup, TrialStats), String>> = OnceLock::new();

/// Setup and 10^4 trials, shared by both dominance criteria.
fn dominance_run() -> Result<&'static (DominanceSetup, TrialStats), String> {
    DOMINANCE
        .get_or_init(|| {
            let setup = dominance_setup()?;
            let stats = run_discovery_trials(&setup.params, &setup.cfg, 10_000, 5, &SimOptions::default())
                .map_err(|e| e.to_string())?;
            Ok((setup, stats))
        })
        .as_ref()
        .map_err(Clone::clone)
}

fn pmd_dominance() -> Result<Outcome, String> {
    let (setup, s) = dominance_run()?;
    let e = s.pmd().unwrap();
    Ok(outcome(
        dominated(Some(e), setup.pmd_ub),
        format!(
            "tau2 = {:.4}, n = {}: empirical P_MD {:.4} (SE {:.4}) vs bound {:.4}",
            setup.cfg.tau2,
            setup.cfg.n,
            e.point,
            e.std_error(),
            setup.pmd_ub
        ),
    ))
}

fn pfp_dominance() -> Result<Outcome, String> {
    let (setup, s) = dominance_run()?;
    let e = s.pfp().unwrap();
    let setup_ok = setup.pfp_ub <= 1.0;
    let dom = dominated(Some(e), setup.pfp_ub);
    Ok(outcome(
        setup_ok && dom,
        format!(
            "smallest false-positive bound with P_MD bound 0.2 is {:.3} (tau2 = {:.4}, n = {}), needs <= 1; empirical P_FP {:.4} (SE {:.4}) dominated: {dom}",
            setup.pfp_ub,
            setup.cfg.tau2,
            setup.cfg.n,
            e.point,
            e.std_error()
        ),
    ))
}

fn noiseless_comp() -> Result<Outcome, String> {
    let (ell, n) = (10usize, 40usize);
    let params = SystemParams::new(ell as u64, 0.5, 1.0, 1.0, 1e-60).map_err(|e| e.to_string())?;
    let sig = gen_signature_matrix(ell, n, 0.2, Seed::derive(0, Purpose::Signature, 0)).map_err(|e| e.to_string())?;
    let rows = sig.to_rows();
    let (mut misses, mut fp_mismatch, mut fp_total) = (0, 0, 0);
    for mask in 0..1u64 << ell {
        let b = ActivityVector::from_mask(ell, mask);
        let y = sample_received(&sig, &b, &params, FadingMode::Block, Seed::derive(0, Purpose::Channel, mask))
            .map_err(|e| e.to_string())?;
        let covered: Vec<bool> = rows.iter().map(|r| (0..ell).any(|j| b.0[j] && r[j] == 1)).collect();
        let min_active = (0..n).filter(|&i| covered[i]).map(|i| y.0[i].energy()).fold(f64::INFINITY, f64::min);
        let max_idle = (0..n).filter(|&i| !covered[i]).map(|i| y.0[i].energy()).fold(0.0, f64::max);
        let tau2 = if min_active.is_finite() { 0.5 * min_active } else { 1e-40 };
        if max_idle >= tau2 {
            return Err(format!("noise energy {max_idle:e} reaches threshold {tau2:e} at mask {mask}"));
        }
        let outcomes = energy_detect(&y, tau2).map_err(|e| e.to_string())?;
        let decoded = ncomp_decode(&sig, &outcomes, 0.0, 0.05).map_err(|e| e.to_string())?;
        for j in 0..ell {
            let tests: Vec<usize> = (0..n).filter(|&i| rows[i][j] == 1).collect();
            if b.0[j] {
                misses += usize::from(!decoded.0[j]);
            } else {
                let hidden = !tests.is_empty() && tests.iter().all(|&i| covered[i]);
                fp_total += usize::from(hidden);
                fp_mismatch += usize::from(hidden != decoded.0[j]);
            }
        }
    }
    Ok(outcome(
        misses == 0 && fp_mismatch == 0,
        format!("1024 patterns: {misses} misdetections, {fp_total} hidden-user false positives, {fp_mismatch} mismatches with the oracle"),
    ))
}

fn root_solver() -> Result<Outcome, String> {
    let mut worst = 0f64;
    let mut bad = 0;
    for i in 0..50 {
        let rho = 10f64.powf(-6.0 + 4.0 * i as f64 / 49.0);
        let root = solve_x1(rho).map_err(|e| e.to_string())?;
        let r = x1_equation_residual(root.x1, rho).abs();
        let c = c_su(rho).map_err(|e| e.to_string())?;
        worst = worst.max(r);
        bad += usize::from(!(r < 1e-10 && c > 0.0 && c < rho));
    }
    Ok(outcome(bad == 0, format!("50 log-spaced rho in [1e-6, 1e-2]: worst |residual| {worst:.2e}, {bad} violations")))
}

fn sweep_bytes(spec: &SweepSpec, workers: Option<usize>, exec: Exec) -> Result<Vec<u8>, String> {
    with_workers(workers, || {
        let out = gap_sweep(spec, &LowSnrRayleigh::default(), exec).map_err(|e| e.to_string())?;
        let mut buf = Vec::new();
        let meta = serde_json::to_value(spec).map_err(|e| e.to_string())?;
        write_table(&mut buf, &meta, &out.table).map_err(|e| e.to_string())?;
        Ok(buf)
    })
}

fn reproducibility() -> Result<Outcome, String> {
    let spec = SweepSpec {
        variable: SweepVar::Users,
        grid: Grid::log(100.0, 3000.0, 6),
        n: Some(800),
        trials: 200,
        seed: 42,
        ..SweepSpec::default()
    };
    let one = sweep_bytes(&spec, Some(1), Exec::Parallel)?;
    let many = sweep_bytes(&spec, Some(4), Exec::Parallel)?;
    let seq = sweep_bytes(&spec, None, Exec::Sequential)?;
    let analytic = SweepSpec { trials: 0, ..SweepSpec::default() };
    let a1 = sweep_bytes(&analytic, Some(1), Exec::Parallel)?;
    let a4 = sweep_bytes(&analytic, Some(4), Exec::Parallel)?;
    Ok(outcome(
        one == many && one == seq && a1 == a4,
        format!("simulated sweep {} bytes, analytic sweep {} bytes; 1 vs 4 workers vs sequential identical: {}", one.len(), a1.len(), one == many && one == seq && a1 == a4),
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, &str, Criterion, Duration); 9] = [
        ("1", "factor-of-two gap", factor_of_two_gap, Duration::from_secs(60)),
        ("2", "gap across SNR", gap_versus_snr, Duration::from_secs(60)),
        ("3", "capacity curve slope and intercept", capacity_curve_geometry, Duration::from_secs(10)),
        ("4", "q1/q2 oracle equivalence", q_oracle, Duration::from_secs(120)),
        ("5a", "misdetection bound dominance", pmd_dominance, Duration::from_secs(300)),
        ("5b", "false-positive bound dominance", pfp_dominance, Duration::from_secs(300)),
        ("6", "noiseless COMP reduction", noiseless_comp, Duration::from_secs(10)),
        ("7", "root solver", root_solver, Duration::from_secs(10)),
        ("8", "gap-sweep reproducibility", reproducibility, Duration::MAX),
    ];
    let mut failed = 0;
    for (id, name, run, limit) in criteria {
        let start = Instant::now();
        let result = run();
        let took = start.elapsed();
        let (passed, detail) = match result {
            Ok(o) => (o.passed && took <= limit, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let budget = if limit == Duration::MAX { String::new() } else { format!(", limit {limit:?}") };
        println!("{} [{id}] {name}: {detail} [{took:.2?}{budget}]", if passed { "PASS" } else { "FAIL" });
        failed += usize::from(!passed);
    }
    println!("acceptance: {} criteria, {failed} failed", criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

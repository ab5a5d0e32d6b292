//! Self-check suite: golden values, oracle agreement and orderings.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    beta1_min, beta2_min, bound_report, optimize_threshold, pfp_upper_bound, pmd_upper_bound, q1_exact,
    q1_lower_bound, q2_exact, q2_upper_bound, DiscoveryConfig, ErrorTarget, Q1Mode,
};
use crate::capacity::{
    binary_entropy_nats, c_su, capacity_upper_bound, min_user_id_cost_lb, solve_x1, LowSnrRayleigh,
    ROOT_RESIDUAL_TOL,
};
use crate::channel::{energy_detect, gen_signature_matrix, sample_received, ActivityVector, FadingMode};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::montecarlo::estimate_q1_q2;
use crate::ncomp::{ncomp_decode, user_counts};
use crate::params::SystemParams;
use crate::rng::{Purpose, Seed};

const BUILTIN: &str = include_str!("../golden/golden_values.json");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoldenEntry {
    pub value: f64,
    pub rel_tol: f64,
}

/// Named reference values with per-entry tolerances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Golden(pub BTreeMap<String, GoldenEntry>);

impl Golden {
    pub fn builtin() -> Self {
        serde_json::from_str(BUILTIN).expect("bundled golden file parses")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    fn get(&self, name: &str) -> Result<GoldenEntry> {
        self.0.get(name).copied().ok_or_else(|| Error::Config(format!("golden file has no entry `{name}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

/// Sizes used by the Monte Carlo parts of the suite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidateOptions {
    pub conditional_draws: u64,
    pub random_configs: usize,
    pub seed: u64,
    pub exec: Exec,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        ValidateOptions { conditional_draws: 1_000_000, random_configs: 100, seed: 0, exec: Exec::Parallel }
    }
}

struct Suite<'a> {
    golden: &'a Golden,
    checks: Vec<Check>,
}

impl Suite<'_> {
    fn push(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check { name: name.to_string(), passed, detail });
    }

    fn golden(&mut self, name: &str, got: Result<f64>) {
        let entry = self.golden.get(name);
        match (entry, got) {
            (Ok(g), Ok(v)) => {
                let rel = ((v - g.value) / g.value).abs();
                self.push(name, rel <= g.rel_tol, format!("got {v}, golden {} (rel err {rel:.2e}, tol {:.0e})", g.value, g.rel_tol));
            }
            (Err(e), _) | (_, Err(e)) => self.push(name, false, e.to_string()),
        }
    }

    fn run(&mut self, name: &str, f: impl FnOnce() -> Result<(bool, String)>) {
        let start = Instant::now();
        match f() {
            Ok((ok, detail)) => self.push(name, ok, format!("{detail} [{:.1?}]", start.elapsed())),
            Err(e) => self.push(name, false, e.to_string()),
        }
    }
}

fn mid_config() -> Result<(SystemParams, DiscoveryConfig)> {
    let params = SystemParams::with_snr(100, 0.1, 1e-2)?;
    let cfg = DiscoveryConfig { n: 100, p: 1.0 / 11.0, delta_margin: 0.05, tau2: params.sigma2_w, q1_mode: Q1Mode::JensenLb };
    Ok((params, cfg))
}

fn fig_config(ell: u64, alpha: f64, n: u64, tau2: f64) -> Result<(SystemParams, DiscoveryConfig)> {
    let params = SystemParams::with_snr(ell, alpha, 1e-4)?;
    let cfg = DiscoveryConfig::for_params(&params, n, tau2);
    Ok((params, cfg))
}

/// Every active user is kept and the false positives are exactly the
/// inactive users whose tests are all covered by active ones.
pub fn comp_reduction_check(ell: usize, n: usize, p: f64, seed: u64) -> Result<(bool, String)> {
    let params = SystemParams::new(ell as u64, 0.5, 1.0, 1.0, 1e-60)?;
    let sig = gen_signature_matrix(ell, n, p, Seed::derive(seed, Purpose::Signature, 0))?;
    let tau2 = 1e-40;
    let (mut misses, mut mismatches, mut min_energy) = (0usize, 0usize, f64::INFINITY);
    for mask in 0..1u64 << ell {
        let b = ActivityVector::from_mask(ell, mask);
        let y = sample_received(&sig, &b, &params, FadingMode::Block, Seed::derive(seed, Purpose::Channel, mask))?;
        let outcomes = energy_detect(&y, tau2)?;
        let decoded = ncomp_decode(&sig, &outcomes, 0.0, 0.05)?;
        for i in 0..n {
            if (0..ell).any(|j| b.0[j] && sig.get(i, j)) {
                min_energy = min_energy.min(y.0[i].energy());
            }
        }
        for j in 0..ell {
            if b.0[j] {
                misses += usize::from(!decoded.0[j]);
            } else {
                let hidden = !sig.column(j).is_empty()
                    && sig.column(j).iter().all(|&i| (0..ell).any(|a| b.0[a] && sig.get(i as usize, a)));
                mismatches += usize::from(hidden != decoded.0[j]);
                let c = user_counts(&sig, &outcomes, j);
                debug_assert_eq!(hidden, c.tests > 0 && c.tests == c.positives);
            }
        }
    }
    Ok((
        misses == 0 && mismatches == 0 && tau2 < min_energy,
        format!("{} activity patterns, {misses} misdetections, {mismatches} false-positive mismatches, tau2 {tau2:e} < min active energy {min_energy:.3e}", 1u64 << ell),
    ))
}

/// Run every check against `golden`.
pub fn run_validation(golden: &Golden, opts: &ValidateOptions) -> Vec<Check> {
    let mut s = Suite { golden, checks: Vec::new() };
    let cap = LowSnrRayleigh::default();
    let target = ErrorTarget::default();

    s.golden("h2_0_01", binary_entropy_nats(0.01));
    for (name, rho) in [("1e-4", 1e-4), ("1e-3", 1e-3), ("1e-2", 1e-2)] {
        s.golden(&format!("x1_{name}"), solve_x1(rho).map(|r| r.x1));
        s.golden(&format!("csu_{name}"), c_su(rho));
    }
    s.run("root_residuals", || {
        let mut worst: f64 = 0.0;
        let mut bad = 0;
        for i in 0..50 {
            let rho = 10f64.powf(-6.0 + 4.0 * i as f64 / 49.0);
            let r = solve_x1(rho)?;
            let c = c_su(rho)?;
            worst = worst.max(r.residual.abs());
            bad += usize::from(!(r.residual.abs() < ROOT_RESIDUAL_TOL && c > 0.0 && c < rho));
        }
        Ok((bad == 0, format!("50 log-spaced rho in [1e-6, 1e-2], worst residual {worst:.2e}, {bad} violations")))
    });
    s.golden(
        "cap_ub_fig1",
        SystemParams::with_snr(1_000_000, 1e-3, 1e-4).and_then(|p| capacity_upper_bound(20_000.0, &p, &cap)),
    );
    s.golden("id_cost_1e4", SystemParams::with_snr(10_000, 1e-2, 1e-4).and_then(|p| min_user_id_cost_lb(&p, &cap)));

    match mid_config() {
        Ok((params, cfg)) => {
            s.golden("q1_exact_mid", q1_exact(&params, &cfg));
            s.golden("q1_lb_mid", q1_lower_bound(&params, &cfg));
            s.golden("q2_exact_mid", q2_exact(&params, &cfg));
            s.golden("q2_ub_mid", q2_upper_bound(&params, &cfg));
            s.run("q1_q2_monte_carlo", || {
                let st = estimate_q1_q2(&params, &cfg, opts.conditional_draws, opts.seed, opts.exec)?;
                let (e1, e2) = (st.q1().expect("draws > 0"), st.q2().expect("draws > 0"));
                let (x1, x2) = (q1_exact(&params, &cfg)?, q2_exact(&params, &cfg)?);
                let (z1, z2) = ((e1.point - x1) / e1.std_error(), (e2.point - x2) / e2.std_error());
                Ok((
                    z1.abs() <= 4.0 && z2.abs() <= 4.0,
                    format!("{} draws: q1 {:.6} vs {x1:.6} ({z1:+.2} SE), q2 {:.6} vs {x2:.6} ({z2:+.2} SE)", opts.conditional_draws, e1.point, e2.point),
                ))
            });
        }
        Err(e) => s.push("mid_config", false, e.to_string()),
    }
    s.run("q_orderings", || {
        let mut rng = Seed::new(opts.seed ^ 0x5eed_0bd3, 0).rng();
        let mut bad = 0;
        for _ in 0..opts.random_configs {
            let ell = rng.random_range(2..5_000u64);
            let alpha = 10f64.powf(rng.random_range(-3.0..-0.3));
            let snr = 10f64.powf(rng.random_range(-4.0..0.0));
            let params = SystemParams::with_snr(ell, alpha, snr)?;
            let p = 10f64.powf(rng.random_range(-3.0..-0.3));
            let tau2 = rng.random_range(0.0..=params.tau2_max());
            let cfg = DiscoveryConfig { n: 1, p, delta_margin: 0.05, tau2, q1_mode: Q1Mode::JensenLb };
            let lb = q1_lower_bound(&params, &cfg)?;
            let ok = lb <= q1_exact(&params, &cfg)? && q2_upper_bound(&params, &cfg)? == 1.0 - lb;
            bad += usize::from(!ok);
        }
        Ok((bad == 0, format!("{} random configurations, {bad} violations", opts.random_configs)))
    });
    s.run("comp_reduction", || comp_reduction_check(10, 40, 0.2, 0));

    match fig_config(10_000, 1e-2, 100_000, 0.0) {
        Ok((params, cfg)) => {
            match optimize_threshold(&params, &cfg, &target, 200, &cap, opts.exec) {
                Ok(choice) => {
                    s.golden("opt_tau2_1e4", Ok(choice.tau2));
                    s.golden("opt_ngt_1e4", Ok(choice.report.n_gt));
                    s.run("threshold_stability", || {
                        let fine = optimize_threshold(&params, &cfg, &target, 2000, &cap, opts.exec)?;
                        let rel = (fine.report.n_gt / choice.report.n_gt - 1.0).abs();
                        Ok((rel <= 0.02, format!("n_GT at 2000 points differs by {:.3}%", 100.0 * rel)))
                    });
                    let cfg = cfg.with_tau2(choice.tau2);
                    let pmd = pmd_upper_bound(&params, &cfg);
                    s.golden("pmd_product_1e4", pmd.as_ref().map(|b| b.product).map_err(|e| Error::Numerical(e.to_string())));
                    s.golden("pmd_exponential_1e4", pmd.as_ref().map(|b| b.exponential).map_err(|e| Error::Numerical(e.to_string())));
                    if let Ok(b) = &pmd {
                        s.push("pmd_form_ordering", b.product <= b.exponential, format!("product {} <= exponential {}", b.product, b.exponential));
                    }
                    s.golden("pfp_1e4", pfp_upper_bound(&params, &cfg).map(|b| b.product));
                    s.golden("beta1_1e4", beta1_min(&params, &cfg, &target).map(|b| b.formula));
                    s.golden("beta2_1e4", beta2_min(&params, &cfg, &target));
                    s.golden("gap_1e4", bound_report(&params, &cfg, &target, &cap).map(|r| r.gap_g));
                    s.run("beta1_solved_target", || {
                        let b = beta1_min(&params, &cfg, &target)?;
                        let n = (b.solved * crate::capacity::entropy_per_active(params.alpha)?).ceil() as u64;
                        let at = pmd_upper_bound(&params, &cfg.with_n(n))?.product;
                        let goal = target.level(params.ell);
                        Ok((at <= goal, format!("bound {at:.6e} at n = {n} vs target {goal:e}")))
                    });
                }
                Err(e) => s.push("opt_tau2_1e4", false, e.to_string()),
            }
        }
        Err(e) => s.push("fig_config", false, e.to_string()),
    }
    match fig_config(1_000_000, 1e-3, 1, 0.0)
        .and_then(|(params, cfg)| optimize_threshold(&params, &cfg, &target, 200, &cap, opts.exec))
    {
        Ok(choice) => {
            s.golden("opt_tau2_1e6", Ok(choice.tau2));
            s.golden("ngt_1e6", Ok(choice.report.n_gt));
        }
        Err(e) => s.push("ngt_1e6", false, e.to_string()),
    }
    s.checks
}

//! Closed-form analysis of N-COMP discovery over the Rayleigh-fading channel.
//!
//! `q1` is the probability that a test containing a given active user reads
//! negative; `q2` the probability that a test containing a given inactive
//! user reads positive. Both have an exact binomial-mixture form and a
//! Jensen-type bound; the misdetection and false-positive bounds, the
//! minimal `beta` factors, `n_GT` and the gap `G` are built on them.
//!
//! All logarithms are natural.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::binomial::{kl_bernoulli, BinomialWeights, TAIL_TOL};
use crate::capacity::{binary_entropy_nats, entropy_per_active, min_user_id_cost_lb, CapacityFn};
use crate::error::{domain, Error, Result};
use crate::exec::Exec;
use crate::params::SystemParams;

/// Which `q1`/`q2` values feed the decoder and the error bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Q1Mode {
    Exact,
    #[default]
    JensenLb,
}

/// Group-testing design knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryConfig {
    /// Channel uses.
    pub n: u64,
    /// Inclusion probability of a user in a test.
    pub p: f64,
    /// Decoder margin `Delta`.
    pub delta_margin: f64,
    /// Detector threshold on `|y|^2`.
    pub tau2: f64,
    pub q1_mode: Q1Mode,
}

/// Decoder margin used throughout the experiments.
pub const DEFAULT_MARGIN: f64 = 0.05;

impl DiscoveryConfig {
    /// `p = 1 / (k + 1)`, `Delta = 0.05`, Jensen-bound mode.
    pub fn for_params(params: &SystemParams, n: u64, tau2: f64) -> Self {
        DiscoveryConfig {
            n,
            p: 1.0 / (params.k() + 1.0),
            delta_margin: DEFAULT_MARGIN,
            tau2,
            q1_mode: Q1Mode::JensenLb,
        }
    }

    pub fn with_tau2(self, tau2: f64) -> Self {
        DiscoveryConfig { tau2, ..self }
    }

    pub fn with_n(self, n: u64) -> Self {
        DiscoveryConfig { n, ..self }
    }

    pub fn check(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(domain(format!("p must lie in [0, 1], got {}", self.p)));
        }
        if !(self.delta_margin >= 0.0 && self.delta_margin.is_finite()) {
            return Err(domain(format!("margin must be non-negative, got {}", self.delta_margin)));
        }
        if !(self.tau2 >= 0.0 && self.tau2.is_finite()) {
            return Err(domain(format!("tau2 must be non-negative, got {}", self.tau2)));
        }
        Ok(())
    }
}

/// Target error probability `ell^-delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorTarget {
    pub delta_exp: f64,
}

/// Default exponent of the `ell^-delta` error target.
pub const DEFAULT_DELTA_EXP: f64 = 1.0;

impl Default for ErrorTarget {
    fn default() -> Self {
        ErrorTarget { delta_exp: DEFAULT_DELTA_EXP }
    }
}

impl ErrorTarget {
    pub fn new(delta_exp: f64) -> Result<Self> {
        if !(delta_exp > 0.0 && delta_exp.is_finite()) {
            return Err(domain(format!("target exponent must be positive, got {delta_exp}")));
        }
        Ok(ErrorTarget { delta_exp })
    }

    pub fn level(&self, ell: u64) -> f64 {
        (ell as f64).powf(-self.delta_exp)
    }
}

fn checked(params: &SystemParams, cfg: &DiscoveryConfig) -> Result<()> {
    params.check()?;
    cfg.check()
}

/// Number of other users in a test that are active: `Binomial(ell - 1, p alpha)`.
fn others_active(params: &SystemParams, cfg: &DiscoveryConfig) -> BinomialWeights {
    BinomialWeights::new(params.ell - 1, cfg.p * params.alpha, TAIL_TOL)
}

/// Exact `q1`: a test containing an active user reads below the threshold.
pub fn q1_exact(params: &SystemParams, cfg: &DiscoveryConfig) -> Result<f64> {
    checked(params, cfg)?;
    let e = params.user_energy();
    let below = others_active(params, cfg).expect(|g| -(-cfg.tau2 / (e * (1.0 + g as f64) + params.sigma2_w)).exp_m1());
    Ok(below.clamp(0.0, 1.0))
}

/// Exact `q2`: a test containing an inactive user reads above the threshold.
pub fn q2_exact(params: &SystemParams, cfg: &DiscoveryConfig) -> Result<f64> {
    checked(params, cfg)?;
    let e = params.user_energy();
    let w = others_active(params, cfg);
    let above = w.expect(|g| (-cfg.tau2 / (e * g as f64 + params.sigma2_w)).exp()) / w.retained();
    Ok(above.clamp(0.0, 1.0))
}

fn jensen_lb_unchecked(params: &SystemParams, cfg: &DiscoveryConfig) -> f64 {
    let snr_term = (cfg.p * params.alpha * (params.ell - 1) as f64 + 1.0) * params.rho() + 1.0;
    -(-(cfg.tau2 / params.sigma2_w) / snr_term).exp_m1()
}

/// Jensen lower bound on `q1`; needs `tau2 <= 2 (sigma^2 P + sigma_w^2)`.
pub fn q1_lower_bound(params: &SystemParams, cfg: &DiscoveryConfig) -> Result<f64> {
    checked(params, cfg)?;
    let limit = params.tau2_max();
    if cfg.tau2 > limit * (1.0 + 1e-12) {
        return Err(Error::Validity(format!(
            "q1 lower bound needs tau2 <= 2 (sigma^2 P + sigma_w^2) = {limit}, got {}",
            cfg.tau2
        )));
    }
    Ok(jensen_lb_unchecked(params, cfg))
}

/// Upper bound on `q2`, defined as `1 - q1_LB`.
pub fn q2_upper_bound(params: &SystemParams, cfg: &DiscoveryConfig) -> Result<f64> {
    checked(params, cfg)?;
    Ok(1.0 - jensen_lb_unchecked(params, cfg))
}

/// `(q1, q2)` as selected by `cfg.q1_mode`.
pub fn detection_probabilities(params: &SystemParams, cfg: &DiscoveryConfig) -> Result<(f64, f64)> {
    match cfg.q1_mode {
        Q1Mode::Exact => Ok((q1_exact(params, cfg)?, q2_exact(params, cfg)?)),
        Q1Mode::JensenLb => {
            let q1 = q1_lower_bound(params, cfg)?;
            Ok((q1, 1.0 - q1))
        }
    }
}

/// Misdetection bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmdBound {
    /// `alpha ell (1 - p + p exp(-2 (q1 Delta)^2))^n`; the headline value.
    pub product: f64,
    /// `alpha ell exp(-beta1 (H2/alpha) p (1 - e^-2) (q1 Delta)^2)`.
    pub exponential: f64,
    /// As `exponential` with `ln(1/alpha)` in place of `H2(alpha)/alpha`.
    /// Undefined when `alpha` is 0 or 1.
    pub theorem: Option<f64>,
}

fn pmd_product_at(params: &SystemParams, p: f64, q1: f64, margin: f64, n: f64) -> f64 {
    let x = 2.0 * (q1 * margin).powi(2);
    let miss_per_test = p * -(-x).exp_m1();
    params.k() * (n * (-miss_per_test).ln_1p()).exp()
}

pub fn pmd_upper_bound(params: &SystemParams, cfg: &DiscoveryConfig) -> Result<PmdBound> {
    let (q1, _) = detection_probabilities(params, cfg)?;
    let n = cfg.n as f64;
    let rate = cfg.p * (1.0 - (-2f64).exp()) * (q1 * cfg.delta_margin).powi(2);
    let alpha = params.alpha;
    let theorem = (alpha > 0.0 && alpha < 1.0).then(|| {
        let beta1 = n * alpha / binary_entropy_nats(alpha).unwrap_or(f64::NAN);
        params.k() * (-beta1 * (1.0 / alpha).ln() * rate).exp()
    });
    Ok(PmdBound {
        product: pmd_product_at(params, cfg.p, q1, cfg.delta_margin, n),
        exponential: params.k() * (-n * rate).exp(),
        theorem,
    })
}

/// `eta = exp(-D(q2 - q1 Delta || q2) / sqrt(2 pi q1 q2))`.
pub fn eta(q1: f64, q2: f64, margin: f64) -> Result<f64> {
    let shifted = q2 - q1 * margin;
    if !(shifted > 0.0) {
        return Err(domain(format!("q2 - q1 Delta must be positive, got {shifted}")));
    }
    if !(q1 * q2 > 0.0) {
        return Err(domain(format!("eta undefined for q1 q2 = {}", q1 * q2)));
    }
    Ok((-kl_bernoulli(shifted, q2) / (2.0 * PI * q1 * q2).sqrt()).exp())
}

/// False-positive bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PfpBound {
    /// `ell (1 - alpha) (1 - (1 - p + p eta)^n)`; the headline value.
    pub product: f64,
    /// `ell (1 - alpha) (1 - exp(-beta2 ln(1/alpha) p (1 - eta)))` with
    /// `beta2 = n alpha / H2(alpha)`. Undefined when `alpha` is 0 or 1.
    pub theorem: Option<f64>,
    pub eta: f64,
}

pub fn pfp_upper_bound(params: &SystemParams, cfg: &DiscoveryConfig) -> Result<PfpBound> {
    let (q1, q2) = detection_probabilities(params, cfg)?;
    let eta = eta(q1, q2, cfg.delta_margin)?;
    let n = cfg.n as f64;
    let inactive = params.ell as f64 * (1.0 - params.alpha);
    let pass_all = (n * (-cfg.p * (1.0 - eta)).ln_1p()).exp();
    let alpha = params.alpha;
    let theorem = (alpha > 0.0 && alpha < 1.0).then(|| {
        let beta2 = n * alpha / binary_entropy_nats(alpha).unwrap_or(f64::NAN);
        inactive * -(-beta2 * (1.0 / alpha).ln() * cfg.p * (1.0 - eta)).exp_m1()
    });
    Ok(PfpBound {
        product: inactive * (1.0 - pass_all),
        theorem,
        eta,
    })
}

/// Minimal `beta1` for misdetection below `ell^-delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Beta1 {
    /// Closed-form sufficient value; negative when the formula is infeasible.
    pub formula: f64,
    /// Smallest `beta1` with product-form bound at `n = beta1 H2/alpha`
    /// not exceeding the target, found by bisection.
    pub solved: f64,
}

impl Beta1 {
    pub fn formula_feasible(&self) -> bool {
        self.formula > 0.0
    }
}

fn interior_alpha(params: &SystemParams) -> Result<()> {
    if !(params.alpha > 0.0 && params.alpha < 1.0) {
        return Err(domain(format!("alpha must lie in (0, 1), got {}", params.alpha)));
    }
    Ok(())
}

pub fn beta1_min(params: &SystemParams, cfg: &DiscoveryConfig, target: &ErrorTarget) -> Result<Beta1> {
    interior_alpha(params)?;
    let (q1, _) = detection_probabilities(params, cfg)?;
    let margin = q1 * cfg.delta_margin;
    if !(cfg.p > 0.0 && margin > 0.0) {
        return Err(domain("beta1 needs p > 0 and q1 Delta > 0"));
    }
    let alpha = params.alpha;
    let ln_ell = (params.ell as f64).ln();
    let formula = LN_2 / (cfg.p * (1.0 - (-2f64).exp()) * margin * margin)
        * ((1.0 + target.delta_exp) * ln_ell / (1.0 / alpha).ln() - 1.0);
    if formula <= 0.0 {
        log::debug!("beta1 formula infeasible ({formula}) at ell = {}, alpha = {alpha}", params.ell);
    }

    let per_active = entropy_per_active(alpha)?;
    let goal = target.level(params.ell);
    let bound = |beta: f64| pmd_product_at(params, cfg.p, q1, cfg.delta_margin, beta * per_active);
    let solved = if bound(0.0) <= goal {
        0.0
    } else {
        let mut hi = 1.0;
        while bound(hi) > goal {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::Numerical("beta1 bisection failed to bracket".into()));
            }
        }
        let mut lo = 0.0;
        while hi - lo > 1e-13 * hi {
            let mid = 0.5 * (lo + hi);
            if bound(mid) > goal {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    };
    Ok(Beta1 { formula, solved })
}

/// Minimal `beta2` for false positives below `ell^-delta`.
pub fn beta2_min(params: &SystemParams, cfg: &DiscoveryConfig, target: &ErrorTarget) -> Result<f64> {
    interior_alpha(params)?;
    let alpha = params.alpha;
    let scaled = (1.0 - alpha) * ((1.0 + target.delta_exp) * (params.ell as f64).ln()).exp();
    if !(scaled > 1.0) {
        return Err(domain(format!("(1 - alpha) ell^(1 + delta) must exceed 1, got {scaled}")));
    }
    let (q1, q2) = detection_probabilities(params, cfg)?;
    let eta = eta(q1, q2, cfg.delta_margin)?;
    if !(eta < 1.0) || cfg.p <= 0.0 {
        return Err(domain("beta2 needs eta < 1 and p > 0"));
    }
    let log_ratio = -(-1.0 / scaled).ln_1p();
    Ok(log_ratio / (cfg.p * (1.0 - eta) * (1.0 / alpha).ln()))
}

/// `max(beta1, beta2) ell H2(alpha)` with the closed-form betas.
pub fn n_gt(params: &SystemParams, cfg: &DiscoveryConfig, target: &ErrorTarget) -> Result<f64> {
    let b1 = beta1_min(params, cfg, target)?.formula;
    let b2 = beta2_min(params, cfg, target)?;
    n_gt_from(params, b1, b2)
}

fn n_gt_from(params: &SystemParams, b1: f64, b2: f64) -> Result<f64> {
    let n = b1.max(b2) * params.ell as f64 * binary_entropy_nats(params.alpha)?;
    if !(n > 0.0 && n.is_finite()) {
        return Err(domain(format!("n_GT is not positive ({n})")));
    }
    Ok(n)
}

/// Fractional excess of `n_GT` over the identification-cost lower bound.
pub fn gap_g(params: &SystemParams, cfg: &DiscoveryConfig, target: &ErrorTarget, cap: &dyn CapacityFn) -> Result<f64> {
    let b1 = beta1_min(params, cfg, target)?.formula;
    let b2 = beta2_min(params, cfg, target)?;
    Ok(b1.max(b2) * params.k() * cap.capacity(params.rho())? - 1.0)
}

/// Every closed-form quantity for one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundReport {
    pub ell: u64,
    pub alpha: f64,
    pub k: f64,
    pub rho: f64,
    pub n: u64,
    pub p: f64,
    pub delta: f64,
    pub tau2: f64,
    pub q1_exact: f64,
    pub q1_lb: f64,
    pub q2_exact: f64,
    pub q2_ub: f64,
    pub pmd_ub: f64,
    pub pfp_ub: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub n_gt: f64,
    pub n0: f64,
    pub gap_g: f64,
    #[serde(skip)]
    pub pmd_exponential: f64,
    #[serde(skip)]
    pub pmd_theorem: Option<f64>,
    #[serde(skip)]
    pub pfp_theorem: Option<f64>,
    #[serde(skip)]
    pub eta: f64,
    #[serde(skip)]
    pub beta1_solved: f64,
}

impl BoundReport {
    /// CSV column order.
    pub const COLUMNS: [&'static str; 19] = [
        "ell", "alpha", "k", "rho", "n", "p", "delta", "tau2", "q1_exact", "q1_lb", "q2_exact", "q2_ub", "pmd_ub",
        "pfp_ub", "beta1", "beta2", "n_gt", "n0", "gap_g",
    ];

    pub fn csv_fields(&self) -> Vec<String> {
        vec![
            self.ell.to_string(),
            self.alpha.to_string(),
            self.k.to_string(),
            self.rho.to_string(),
            self.n.to_string(),
            self.p.to_string(),
            self.delta.to_string(),
            self.tau2.to_string(),
            self.q1_exact.to_string(),
            self.q1_lb.to_string(),
            self.q2_exact.to_string(),
            self.q2_ub.to_string(),
            self.pmd_ub.to_string(),
            self.pfp_ub.to_string(),
            self.beta1.to_string(),
            self.beta2.to_string(),
            self.n_gt.to_string(),
            self.n0.to_string(),
            self.gap_g.to_string(),
        ]
    }
}

pub fn bound_report(
    params: &SystemParams,
    cfg: &DiscoveryConfig,
    target: &ErrorTarget,
    cap: &dyn CapacityFn,
) -> Result<BoundReport> {
    let pmd = pmd_upper_bound(params, cfg)?;
    let pfp = pfp_upper_bound(params, cfg)?;
    let beta1 = beta1_min(params, cfg, target)?;
    let beta2 = beta2_min(params, cfg, target)?;
    let n_gt = n_gt_from(params, beta1.formula, beta2)?;
    let n0 = min_user_id_cost_lb(params, cap)?;
    let gap = beta1.formula.max(beta2) * params.k() * cap.capacity(params.rho())? - 1.0;
    Ok(BoundReport {
        ell: params.ell,
        alpha: params.alpha,
        k: params.k(),
        rho: params.rho(),
        n: cfg.n,
        p: cfg.p,
        delta: cfg.delta_margin,
        tau2: cfg.tau2,
        q1_exact: q1_exact(params, cfg)?,
        q1_lb: q1_lower_bound(params, cfg)?,
        q2_exact: q2_exact(params, cfg)?,
        q2_ub: q2_upper_bound(params, cfg)?,
        pmd_ub: pmd.product,
        pfp_ub: pfp.product,
        beta1: beta1.formula,
        beta2,
        n_gt,
        n0,
        gap_g: gap,
        pmd_exponential: pmd.exponential,
        pmd_theorem: pmd.theorem,
        pfp_theorem: pfp.theorem,
        eta: pfp.eta,
        beta1_solved: beta1.solved,
    })
}

/// The uniform threshold grid `tau2_i = i T / points`, `i = 1..=points`,
/// with `T = 2 (sigma^2 P + sigma_w^2)`.
pub fn threshold_grid(params: &SystemParams, points: usize) -> Vec<f64> {
    let top = params.tau2_max();
    (1..=points).map(|i| top * i as f64 / points as f64).collect()
}

/// `n_GT` at every grid threshold; infeasible points carry their error.
pub fn threshold_profile(
    params: &SystemParams,
    cfg: &DiscoveryConfig,
    target: &ErrorTarget,
    points: usize,
    exec: Exec,
) -> Vec<(f64, Result<f64>)> {
    let grid = threshold_grid(params, points);
    exec.map(grid.len(), |i| (grid[i], n_gt(params, &cfg.with_tau2(grid[i]), target)))
}

/// Outcome of the exhaustive threshold search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdChoice {
    pub tau2: f64,
    pub report: BoundReport,
    pub feasible_points: usize,
}

/// First minimiser over the feasible points, and the feasible count.
fn argmin_first(profile: Vec<(f64, Result<f64>)>) -> (Option<(f64, f64)>, usize) {
    let mut best: Option<(f64, f64)> = None;
    let mut feasible = 0;
    for (tau2, value) in profile {
        match value {
            Ok(v) => {
                feasible += 1;
                if best.is_none_or(|(_, b)| v < b) {
                    best = Some((tau2, v));
                }
            }
            Err(e) => log::debug!("tau2 = {tau2}: {e}"),
        }
    }
    (best, feasible)
}

/// Pick the grid threshold minimising `n_GT`; ties go to the smaller `tau2`.
pub fn optimize_threshold(
    params: &SystemParams,
    cfg: &DiscoveryConfig,
    target: &ErrorTarget,
    grid_points: usize,
    cap: &dyn CapacityFn,
    exec: Exec,
) -> Result<ThresholdChoice> {
    if grid_points < 2 {
        return Err(domain(format!("threshold search needs at least 2 grid points, got {grid_points}")));
    }
    let (best, feasible) = argmin_first(threshold_profile(params, cfg, target, grid_points, exec));
    let (tau2, _) = best.ok_or_else(|| {
        Error::Optimization(format!(
            "no feasible threshold among {grid_points} grid points at ell = {}, rho = {}",
            params.ell,
            params.rho()
        ))
    })?;
    let report = bound_report(params, &cfg.with_tau2(tau2), target, cap)?;
    Ok(ThresholdChoice { tau2, report, feasible_points: feasible })
}

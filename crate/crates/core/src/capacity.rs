//! Binary entropy, the low-SNR non-coherent Rayleigh capacity and the two
//! information-theoretic limits built on them: the message-length capacity
//! upper bound and the minimum user-identification cost.
//!
//! Everything here is in nats.

use std::f64::consts::{LN_2, PI};

use crate::error::{domain, Error, Result};
use crate::params::SystemParams;

/// Upper end of the SNR range where the closed-form capacity holds.
pub const LOW_SNR_LIMIT: f64 = 1e-2;

const BRACKET_LO_OFFSET: f64 = 1e-6;
const BRACKET_HI: f64 = 1e6;
const SCAN_POINTS_PER_DECADE: usize = 100;
const BISECTION_WIDTH: f64 = 1e-12;
/// Required accuracy of the returned root.
pub const ROOT_RESIDUAL_TOL: f64 = 1e-10;

/// Binary entropy `H2(alpha)` in nats, with `0 ln 0 = 0`.
pub fn binary_entropy_nats(alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(domain(format!("binary entropy needs alpha in [0, 1], got {alpha}")));
    }
    Ok(xlnx_neg(alpha) + xlnx_neg(1.0 - alpha))
}

/// Binary entropy in bits.
pub fn binary_entropy_bits(alpha: f64) -> Result<f64> {
    binary_entropy_nats(alpha).map(|h| h / LN_2)
}

fn xlnx_neg(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -x * x.ln()
    }
}

/// `H2(alpha) / alpha`, the per-active-user entropy of the activity pattern.
pub fn entropy_per_active(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(domain(format!("H2(alpha)/alpha needs alpha in (0, 1), got {alpha}")));
    }
    Ok(binary_entropy_nats(alpha)? / alpha)
}

/// `ln(rho / (u + u^2)) / u` with `u = x1^2`; the log of the recurring
/// power term `(rho / (x1^2 + x1^4))^(1/x1^2)`.
fn log_power_term(u: f64, rho: f64) -> (f64, f64) {
    let log_ratio = rho.ln() - u.ln() - u.ln_1p();
    (log_ratio, log_ratio / u)
}

fn residual_sq(u: f64, rho: f64) -> f64 {
    let (log_ratio, log_a) = log_power_term(u, rho);
    let angle = PI / u;
    let csc = 1.0 / angle.sin();
    let cot = angle.cos() / angle.sin();
    u - (1.0 + u) * u.ln_1p() - PI * log_a.exp() * csc * (1.0 + u - PI * cot + log_ratio)
}

/// Left-hand side of the equation defining `x1` for a given SNR.
pub fn x1_equation_residual(x1: f64, rho: f64) -> f64 {
    residual_sq(x1 * x1, rho)
}

/// A root of the `x1` equation together with the bracket it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootSolution {
    pub x1: f64,
    /// Final bisection bracket in `x1^2`.
    pub bracket: (f64, f64),
    pub bracket_residuals: (f64, f64),
    pub residual: f64,
}

impl RootSolution {
    pub fn x1_sq(&self) -> f64 {
        self.x1 * self.x1
    }
}

fn bisect(rho: f64, mut lo: f64, mut hi: f64) -> RootSolution {
    let mut f_lo = residual_sq(lo, rho);
    let mut f_hi = residual_sq(hi, rho);
    while hi - lo > BISECTION_WIDTH {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = residual_sq(mid, rho);
        if f_mid == 0.0 {
            lo = mid;
            hi = mid;
            f_lo = 0.0;
            f_hi = 0.0;
            break;
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    let x1 = (0.5 * (lo + hi)).sqrt();
    RootSolution {
        x1,
        bracket: (lo, hi),
        bracket_residuals: (f_lo, f_hi),
        residual: x1_equation_residual(x1, rho),
    }
}

/// All sign-change brackets of the `x1` equation on `x1^2 in (1, 1e6]`.
pub fn x1_brackets(rho: f64) -> Vec<(f64, f64)> {
    let decades = (BRACKET_HI.log10() - BRACKET_LO_OFFSET.log10()).round() as usize;
    let points = decades * SCAN_POINTS_PER_DECADE;
    let lo_exp = BRACKET_LO_OFFSET.log10();
    let step = (BRACKET_HI.log10() - lo_exp) / points as f64;
    let grid = (0..=points).map(|i| 1.0 + 10f64.powf(lo_exp + step * i as f64));

    let mut out = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for u in grid {
        let f = residual_sq(u, rho);
        if !f.is_finite() {
            prev = None;
            continue;
        }
        if let Some((pu, pf)) = prev {
            if (pf < 0.0) != (f < 0.0) || f == 0.0 {
                out.push((pu, u));
            }
        }
        prev = Some((u, f));
    }
    out
}

/// Solve for `x1` at SNR `rho`.
///
/// The scan is restricted to `x1^2 > 1`, where `pi / x1^2` stays inside
/// `(0, pi)` and the cosecant has no poles. If several roots exist the one
/// giving the largest capacity is returned.
pub fn solve_x1(rho: f64) -> Result<RootSolution> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(domain(format!("SNR must be positive, got {rho}")));
    }
    let brackets = x1_brackets(rho);
    let mut roots: Vec<RootSolution> = brackets.iter().map(|&(lo, hi)| bisect(rho, lo, hi)).collect();
    if roots.is_empty() {
        return Err(Error::Numerical(format!(
            "no sign change of the x1 equation on x1^2 in (1, 1e6] at rho = {rho}"
        )));
    }
    if roots.len() > 1 {
        log::warn!(
            "x1 equation has {} roots at rho = {rho}; brackets {:?}; keeping the capacity maximiser",
            roots.len(),
            brackets
        );
        roots.sort_by(|a, b| {
            low_snr_capacity_at(rho, a.x1)
                .total_cmp(&low_snr_capacity_at(rho, b.x1))
                .reverse()
        });
    }
    let root = roots[0];
    if !(root.residual.abs() < ROOT_RESIDUAL_TOL) {
        return Err(Error::Numerical(format!(
            "x1 root at rho = {rho} has residual {:e}",
            root.residual
        )));
    }
    Ok(root)
}

/// Closed-form low-SNR capacity evaluated at a given `x1`.
pub fn low_snr_capacity_at(rho: f64, x1: f64) -> f64 {
    let u = x1 * x1;
    let (_, log_a) = log_power_term(u, rho);
    let csc = 1.0 / (PI / u).sin();
    rho - rho * u.ln_1p() / u - PI * rho * csc * log_a.exp() / (1.0 + u)
}

/// Non-coherent single-user Rayleigh capacity in the low-SNR regime,
/// nats per channel use.
pub fn c_su(rho: f64) -> Result<f64> {
    LowSnrRayleigh::default().capacity(rho)
}

/// A single-user capacity model `rho -> C(rho)` in nats per channel use.
pub trait CapacityFn: Send + Sync {
    /// Closed interval of SNRs where the model is trusted.
    fn validity(&self) -> (f64, f64);

    /// Evaluate without a range check.
    fn evaluate_unchecked(&self, rho: f64) -> Result<f64>;

    /// Permit evaluation outside [`CapacityFn::validity`].
    fn allows_extrapolation(&self) -> bool {
        false
    }

    fn capacity(&self, rho: f64) -> Result<f64> {
        let (lo, hi) = self.validity();
        let inside = rho > lo && rho <= hi * (1.0 + 1e-12);
        if !inside && !self.allows_extrapolation() {
            return Err(Error::Validity(format!(
                "capacity model valid for rho in ({lo}, {hi}], got {rho}"
            )));
        }
        let c = self.evaluate_unchecked(rho)?;
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::Numerical(format!("capacity at rho = {rho} is {c}")));
        }
        Ok(c)
    }
}

/// The on-off closed form, valid up to `rho = 1e-2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct LowSnrRayleigh {
    pub allow_extrapolation: bool,
}

impl CapacityFn for LowSnrRayleigh {
    fn validity(&self) -> (f64, f64) {
        (0.0, LOW_SNR_LIMIT)
    }

    fn evaluate_unchecked(&self, rho: f64) -> Result<f64> {
        let root = solve_x1(rho)?;
        Ok(low_snr_capacity_at(rho, root.x1))
    }

    fn allows_extrapolation(&self) -> bool {
        self.allow_extrapolation
    }
}

fn interior_alpha(params: &SystemParams) -> Result<()> {
    if !(params.alpha > 0.0 && params.alpha < 1.0) {
        return Err(domain(format!(
            "bound needs alpha in (0, 1), got {}",
            params.alpha
        )));
    }
    Ok(())
}

/// Upper bound on `ln M` after `n` channel uses: `n C(rho) - H2(alpha)/alpha`.
///
/// The raw value is returned; it is negative while discovery has not yet paid
/// for itself.
pub fn capacity_upper_bound(n: f64, params: &SystemParams, cap: &dyn CapacityFn) -> Result<f64> {
    if !(n >= 0.0) {
        return Err(domain(format!("channel uses must be non-negative, got {n}")));
    }
    interior_alpha(params)?;
    Ok(n * cap.capacity(params.rho())? - entropy_per_active(params.alpha)?)
}

/// Lower bound on the channel uses needed to identify the active users,
/// `H2(alpha) / (alpha C(rho))`.
pub fn min_user_id_cost_lb(params: &SystemParams, cap: &dyn CapacityFn) -> Result<f64> {
    interior_alpha(params)?;
    Ok(entropy_per_active(params.alpha)? / cap.capacity(params.rho())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    // frozen from tools/golden_values.py (40-digit mpmath, independent root finder)
    const X1_1E4: f64 = 2.3826370974987494;
    const X1_1E2: f64 = 2.054477872037595;
    const CSU_1E4: f64 = 5.723862523624693e-05;
    const CSU_1E3: f64 = 0.0005283468486474777;
    const CSU_1E2: f64 = 0.00465078922942521;

    /// Fine uniform scan in x1 with linear interpolation at the sign change.
    fn scan_root(rho: f64) -> f64 {
        let n = 2_000_000;
        let (a, b) = (1.0 + 1e-9, 12.0);
        let h = (b - a) / n as f64;
        let mut prev = (a, x1_equation_residual(a, rho));
        for i in 1..=n {
            let x = a + h * i as f64;
            let f = x1_equation_residual(x, rho);
            if prev.1.is_finite() && f.is_finite() && (prev.1 < 0.0) != (f < 0.0) {
                return prev.0 - prev.1 * (x - prev.0) / (f - prev.1);
            }
            prev = (x, f);
        }
        panic!("no sign change found by the scan");
    }

    #[test]
    fn entropy_examples() {
        assert_relative_eq!(binary_entropy_nats(0.5).unwrap(), LN_2, epsilon = 1e-15);
        assert_eq!(binary_entropy_nats(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy_nats(1.0).unwrap(), 0.0);
        assert_relative_eq!(binary_entropy_nats(0.01).unwrap(), 0.05600153435484734, max_relative = 1e-14);
        assert_relative_eq!(binary_entropy_bits(0.5).unwrap(), 1.0, epsilon = 1e-15);
        assert!(binary_entropy_nats(-0.1).is_err());
        assert!(binary_entropy_nats(1.0001).is_err());
        assert!(binary_entropy_nats(f64::NAN).is_err());
    }

    #[test]
    fn entropy_per_active_decreasing() {
        let mut prev = f64::INFINITY;
        for i in 1..1000 {
            let v = entropy_per_active(i as f64 / 1000.0).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    proptest! {
        #[test]
        fn entropy_symmetric(a in 0.0f64..=1.0) {
            let h = binary_entropy_nats(a).unwrap();
            prop_assert!((h - binary_entropy_nats(1.0 - a).unwrap()).abs() < 1e-15);
            prop_assert!(h <= LN_2 + 1e-15);
        }
    }

    #[test]
    fn x1_matches_golden_and_scan() {
        for (rho, golden) in [(1e-4, X1_1E4), (1e-2, X1_1E2)] {
            let root = solve_x1(rho).unwrap();
            assert!(root.residual.abs() < ROOT_RESIDUAL_TOL);
            assert!(root.x1_sq() > 1.0);
            assert_relative_eq!(root.x1, golden, max_relative = 1e-11);
            assert_relative_eq!(root.x1, scan_root(rho), max_relative = 1e-6);
            let (flo, fhi) = root.bracket_residuals;
            assert!(flo * fhi <= 0.0, "bracket residuals must differ in sign");
            assert!(root.bracket.1 - root.bracket.0 <= BISECTION_WIDTH);
        }
    }

    #[test]
    fn x1_deterministic() {
        assert_eq!(solve_x1(3e-3).unwrap(), solve_x1(3e-3).unwrap());
    }

    #[test]
    fn single_bracket_on_grid() {
        for e in [-6.0, -4.0, -2.0] {
            assert_eq!(x1_brackets(10f64.powf(e)).len(), 1);
        }
    }

    #[test]
    fn csu_golden() {
        assert_relative_eq!(c_su(1e-4).unwrap(), CSU_1E4, max_relative = 1e-10);
        assert_relative_eq!(c_su(1e-3).unwrap(), CSU_1E3, max_relative = 1e-10);
        assert_relative_eq!(c_su(1e-2).unwrap(), CSU_1E2, max_relative = 1e-10);
        let scanned = low_snr_capacity_at(1e-4, scan_root(1e-4));
        assert_relative_eq!(c_su(1e-4).unwrap(), scanned, max_relative = 1e-6);
        assert!(c_su(1e-3).unwrap() > c_su(1e-4).unwrap());
    }

    #[test]
    fn csu_in_open_interval_on_log_grid() {
        for i in 0..=40 {
            let rho = 10f64.powf(-6.0 + 4.0 * i as f64 / 40.0);
            let c = c_su(rho).unwrap();
            assert!(c > 0.0 && c < rho, "rho {rho}: {c}");
            assert!(solve_x1(rho).unwrap().residual.abs() < ROOT_RESIDUAL_TOL);
        }
    }

    #[test]
    fn validity_range_enforced() {
        assert!(matches!(c_su(0.05), Err(Error::Validity(_))));
        assert!(c_su(0.0).is_err());
        let loose = LowSnrRayleigh { allow_extrapolation: true };
        let c = loose.capacity(0.05).unwrap();
        assert!(c > 0.0 && c < 0.05);
    }

    #[test]
    fn upper_bound_examples() {
        let cap = LowSnrRayleigh::default();
        let p = SystemParams::with_snr(1_000_000, 1e-3, 1e-4).unwrap();
        let ub = capacity_upper_bound(20_000.0, &p, &cap).unwrap();
        assert_relative_eq!(ub, -6.762482607507148, max_relative = 1e-9);
        let intercept = min_user_id_cost_lb(&p, &cap).unwrap();
        assert!(capacity_upper_bound(intercept, &p, &cap).unwrap().abs() < 1e-9 * entropy_per_active(1e-3).unwrap());
        assert_relative_eq!(
            capacity_upper_bound(0.0, &p, &cap).unwrap(),
            -entropy_per_active(1e-3).unwrap()
        );
        let slope = capacity_upper_bound(1001.0, &p, &cap).unwrap() - capacity_upper_bound(1000.0, &p, &cap).unwrap();
        assert_relative_eq!(slope, c_su(1e-4).unwrap(), max_relative = 1e-6);
    }

    #[test]
    fn id_cost_examples() {
        let cap = LowSnrRayleigh::default();
        let p = SystemParams::with_snr(10_000, 1e-2, 1e-4).unwrap();
        assert_relative_eq!(min_user_id_cost_lb(&p, &cap).unwrap(), 97838.71314816941, max_relative = 1e-9);
        let half = SystemParams::with_snr(10, 0.5, 1e-4).unwrap();
        assert_relative_eq!(
            min_user_id_cost_lb(&half, &cap).unwrap(),
            2.0 * LN_2 / c_su(1e-4).unwrap(),
            max_relative = 1e-14
        );
        for alpha in [0.0, 1.0] {
            let p = SystemParams::with_snr(10, alpha, 1e-4).unwrap();
            assert!(min_user_id_cost_lb(&p, &cap).is_err());
            assert!(capacity_upper_bound(1.0, &p, &cap).is_err());
        }
    }

    #[test]
    fn id_cost_decreasing_in_snr() {
        let cap = LowSnrRayleigh::default();
        let mut prev = f64::INFINITY;
        for i in 0..=20 {
            let rho = 10f64.powf(-6.0 + 4.0 * i as f64 / 20.0);
            let n = min_user_id_cost_lb(&SystemParams::with_snr(10_000, 0.01, rho).unwrap(), &cap).unwrap();
            assert!(n < prev);
            prev = n;
        }
    }
}

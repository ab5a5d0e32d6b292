use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Physical parameters of one many-access channel instance.
///
/// All powers and variances are linear. The SNR `rho` and the expected
/// number of active users `k` are derived on demand so they always agree
/// with the stored fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub ell: u64,
    pub alpha: f64,
    pub power: f64,
    pub sigma2_h: f64,
    pub sigma2_w: f64,
}

impl SystemParams {
    pub fn new(ell: u64, alpha: f64, power: f64, sigma2_h: f64, sigma2_w: f64) -> Result<Self> {
        let params = SystemParams {
            ell,
            alpha,
            power,
            sigma2_h,
            sigma2_w,
        };
        params.check()?;
        Ok(params)
    }

    /// Unit fading and noise variances with `power = snr`, so `rho() == snr`.
    pub fn with_snr(ell: u64, alpha: f64, snr: f64) -> Result<Self> {
        Self::new(ell, alpha, snr, 1.0, 1.0)
    }

    /// Activity probability chosen so that `k = ell^gamma`.
    pub fn with_gamma(ell: u64, gamma: f64, snr: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(domain(format!("gamma must lie in (0, 1), got {gamma}")));
        }
        let k = (ell as f64).powf(gamma);
        Self::with_snr(ell, k / ell as f64, snr)
    }

    pub fn check(&self) -> Result<()> {
        if self.ell == 0 {
            return Err(domain("ell must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(domain(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        for (name, v) in [
            ("power", self.power),
            ("sigma2_h", self.sigma2_h),
            ("sigma2_w", self.sigma2_w),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }

    /// SNR per symbol, `P sigma^2 / sigma_w^2`.
    pub fn rho(&self) -> f64 {
        self.power * self.sigma2_h / self.sigma2_w
    }

    /// Expected number of active users, `alpha * ell`.
    pub fn k(&self) -> f64 {
        self.alpha * self.ell as f64
    }

    /// Mean received energy of a single active user, `sigma^2 P`.
    pub fn user_energy(&self) -> f64 {
        self.sigma2_h * self.power
    }

    /// Upper end of the admissible detector threshold, `2 (sigma^2 P + sigma_w^2)`.
    pub fn tau2_max(&self) -> f64 {
        2.0 * (self.user_energy() + self.sigma2_w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_quantities() {
        let p = SystemParams::new(1000, 0.01, 2.0, 0.5, 4.0).unwrap();
        assert_eq!(p.rho(), 2.0 * 0.5 / 4.0);
        assert_eq!(p.k(), 0.01 * 1000.0);
        assert_eq!(p.tau2_max(), 2.0 * (1.0 + 4.0));
    }

    #[test]
    fn rejects_bad_values() {
        assert!(SystemParams::new(0, 0.1, 1.0, 1.0, 1.0).is_err());
        assert!(SystemParams::new(10, 1.5, 1.0, 1.0, 1.0).is_err());
        assert!(SystemParams::new(10, 0.1, 0.0, 1.0, 1.0).is_err());
        assert!(SystemParams::new(10, 0.1, 1.0, -1.0, 1.0).is_err());
        assert!(SystemParams::new(10, 0.1, 1.0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn gamma_scaling() {
        let p = SystemParams::with_gamma(10_000, 0.5, 1e-4).unwrap();
        assert!((p.k() - 100.0).abs() < 1e-9);
        assert!(SystemParams::with_gamma(10_000, 1.0, 1e-4).is_err());
    }
}

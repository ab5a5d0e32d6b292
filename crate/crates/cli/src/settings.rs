use std::path::{Path, PathBuf};

use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use mnac_gt::bounds::Q1Mode;
use mnac_gt::channel::FadingMode;
use mnac_gt::experiments::{Scale, SweepVar};
use mnac_gt::montecarlo::MatrixMode;

/// Parse a kebab-case enum value through its serde representation.
fn kebab<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

/// Every option that can come from a flag or from the `--config` file.
#[derive(Args, Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Settings {
    /// Number of potential users
    #[arg(long, global = true)]
    pub ell: Option<u64>,
    /// Activity probability (exclusive with --gamma)
    #[arg(long, global = true, conflicts_with = "gamma")]
    pub alpha: Option<f64>,
    /// Activity scaling k = ell^gamma, gamma in (0, 1)
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    /// Per-user SNR rho
    #[arg(long, global = true)]
    pub snr: Option<f64>,
    /// Channel uses
    #[arg(long, global = true)]
    pub n: Option<u64>,
    /// Test inclusion probability (default 1/(k+1))
    #[arg(long, global = true)]
    pub p: Option<f64>,
    /// Decoder margin Delta
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// Error target exponent: errors below ell^-delta
    #[arg(long, global = true)]
    pub delta_exp: Option<f64>,
    /// Detector threshold (exclusive with --optimize-tau)
    #[arg(long, global = true, conflicts_with = "optimize_tau")]
    pub tau2: Option<f64>,
    /// Pick the threshold by grid search
    #[arg(long, global = true, num_args = 0, default_missing_value = "true")]
    pub optimize_tau: Option<bool>,
    /// Threshold grid size
    #[arg(long, global = true)]
    pub grid_points: Option<usize>,
    /// Monte Carlo trials
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    /// Master seed for every random stream
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output CSV path (default stdout)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Populations for capacity-curve, comma separated
    #[arg(long, global = true, value_delimiter = ',')]
    pub ells: Option<Vec<u64>>,
    /// Swept variable: users | snr | n
    #[arg(long, global = true, value_parser = kebab::<SweepVar>)]
    pub sweep: Option<SweepVar>,
    /// Grid spacing: log | linear
    #[arg(long, global = true, value_parser = kebab::<Scale>)]
    pub scale: Option<Scale>,
    /// First sweep value
    #[arg(long, global = true)]
    pub from: Option<f64>,
    /// Last sweep value
    #[arg(long, global = true)]
    pub to: Option<f64>,
    /// Number of sweep values
    #[arg(long, global = true)]
    pub points: Option<usize>,

    /// Fading model: block | per-use
    #[arg(long, global = true, value_parser = kebab::<FadingMode>)]
    pub fading: Option<FadingMode>,
    /// Signature matrix per trial: redraw | fixed
    #[arg(long, global = true, value_parser = kebab::<MatrixMode>)]
    pub matrix: Option<MatrixMode>,
    /// q1 fed to decoder and bounds: jensen-lb | exact
    #[arg(long, global = true, value_parser = kebab::<Q1Mode>)]
    pub q1_mode: Option<Q1Mode>,
    /// Print trial progress on stderr
    #[arg(long, global = true, num_args = 0, default_missing_value = "true")]
    pub progress: Option<bool>,
    /// Write the first simulated round to this CSV
    #[arg(long, global = true)]
    pub dump: Option<PathBuf>,

    /// Golden value file for validate
    #[arg(long, global = true)]
    pub golden: Option<PathBuf>,
    /// Conditional draws for the q1/q2 check in validate
    #[arg(long, global = true)]
    pub draws: Option<u64>,
}

macro_rules! prefer {
    ($a:ident, $b:ident; $($f:ident),*) => {
        Settings { $($f: $a.$f.or($b.$f)),* , ..$a }
    };
}

impl Settings {
    pub fn load(path: &Path) -> anyhow::Result<Settings> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| anyhow::anyhow!("bad config {}: {e}", path.display()))
    }

    /// Flag values win; exclusive pairs are taken from one side as a unit.
    pub fn over(self, file: Settings) -> Settings {
        let (alpha, gamma) = if self.alpha.is_some() || self.gamma.is_some() {
            (self.alpha, self.gamma)
        } else {
            (file.alpha, file.gamma)
        };
        let (tau2, optimize_tau) = if self.tau2.is_some() || self.optimize_tau.is_some() {
            (self.tau2, self.optimize_tau)
        } else {
            (file.tau2, file.optimize_tau)
        };
        let merged = prefer!(self, file; ell, snr, n, p, delta, delta_exp, grid_points, trials, seed, out,
            ells, sweep, scale, from, to, points, fading, matrix, q1_mode, progress, dump, golden, draws);
        Settings { alpha, gamma, tau2, optimize_tau, ..merged }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let flags = Settings { ell: Some(5), gamma: Some(0.3), ..Settings::default() };
        let file = Settings { ell: Some(7), snr: Some(0.1), alpha: Some(0.2), ..Settings::default() };
        let m = flags.over(file);
        assert_eq!(m.ell, Some(5));
        assert_eq!(m.snr, Some(0.1));
        assert_eq!((m.alpha, m.gamma), (None, Some(0.3)));
    }

    #[test]
    fn file_parses_kebab_case() {
        let s: Settings = serde_json::from_str(r#"{"delta-exp": 0.5, "sweep": "snr", "q1-mode": "exact"}"#).unwrap();
        assert_eq!(s.delta_exp, Some(0.5));
        assert_eq!(s.sweep, Some(SweepVar::Snr));
        assert!(serde_json::from_str::<Settings>(r#"{"bogus": 1}"#).is_err());
    }
}

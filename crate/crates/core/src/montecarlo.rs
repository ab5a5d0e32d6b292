//! Repeated-trial simulation of the discovery pipeline.
//!
//! Every trial draws its own signature matrix, activity, fading and noise
//! from streams keyed by `(seed, purpose, trial)`, and tallies are plain
//! integer sums, so results do not depend on how trials are scheduled.

use std::sync::atomic::{AtomicU64, Ordering};

use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::bounds::{detection_probabilities, DiscoveryConfig};
use crate::channel::{
    complex_gaussian, energy_detect, gen_signature_matrix, sample_activity, sample_received, ActivityVector,
    FadingMode, ReceivedVector, Sample, SignatureMatrix, TestOutcomes,
};
use crate::error::{domain, Result};
use crate::exec::Exec;
use crate::ncomp::{user_counts, NcompRule};
use crate::params::SystemParams;
use crate::rng::{Purpose, Seed};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

/// A binomial proportion with its Wilson 95% interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub hits: u64,
    pub draws: u64,
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Estimate {
    /// `None` when there were no draws.
    pub fn wilson(hits: u64, draws: u64) -> Option<Self> {
        if draws == 0 {
            return None;
        }
        let n = draws as f64;
        let p = hits as f64 / n;
        let z2 = Z95 * Z95;
        let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
        let half = Z95 / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
        Some(Estimate {
            hits,
            draws,
            point: p,
            lo: (centre - half).max(0.0).min(p),
            hi: (centre + half).min(1.0).max(p),
        })
    }

    /// Binomial standard error of the point estimate.
    pub fn std_error(&self) -> f64 {
        (self.point * (1.0 - self.point) / self.draws as f64).sqrt()
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Monte Carlo tallies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TrialStats {
    pub trials: u64,
    /// Trials with at least one misdetected user.
    pub md_union_count: u64,
    /// Trials with at least one false positive.
    pub fp_union_count: u64,
    pub md_user_total: u64,
    pub fp_user_total: u64,
    pub active_total: u64,
    pub inactive_total: u64,
    pub q1_hits: u64,
    pub q1_draws: u64,
    pub q2_hits: u64,
    pub q2_draws: u64,
}

impl TrialStats {
    pub fn merge(self, o: TrialStats) -> TrialStats {
        TrialStats {
            trials: self.trials + o.trials,
            md_union_count: self.md_union_count + o.md_union_count,
            fp_union_count: self.fp_union_count + o.fp_union_count,
            md_user_total: self.md_user_total + o.md_user_total,
            fp_user_total: self.fp_user_total + o.fp_user_total,
            active_total: self.active_total + o.active_total,
            inactive_total: self.inactive_total + o.inactive_total,
            q1_hits: self.q1_hits + o.q1_hits,
            q1_draws: self.q1_draws + o.q1_draws,
            q2_hits: self.q2_hits + o.q2_hits,
            q2_draws: self.q2_draws + o.q2_draws,
        }
    }

    /// Empirical union misdetection probability.
    pub fn pmd(&self) -> Option<Estimate> {
        Estimate::wilson(self.md_union_count, self.trials)
    }

    /// Empirical union false-positive probability.
    pub fn pfp(&self) -> Option<Estimate> {
        Estimate::wilson(self.fp_union_count, self.trials)
    }

    /// Fraction of active users that were missed.
    pub fn md_per_user(&self) -> Option<Estimate> {
        Estimate::wilson(self.md_user_total, self.active_total)
    }

    /// Fraction of inactive users declared active.
    pub fn fp_per_user(&self) -> Option<Estimate> {
        Estimate::wilson(self.fp_user_total, self.inactive_total)
    }

    pub fn q1(&self) -> Option<Estimate> {
        Estimate::wilson(self.q1_hits, self.q1_draws)
    }

    pub fn q2(&self) -> Option<Estimate> {
        Estimate::wilson(self.q2_hits, self.q2_draws)
    }

    pub const COLUMNS: [&'static str; 23] = [
        "trials",
        "md_union_count",
        "fp_union_count",
        "md_user_total",
        "fp_user_total",
        "active_total",
        "inactive_total",
        "pmd_hat",
        "pmd_lo",
        "pmd_hi",
        "pfp_hat",
        "pfp_lo",
        "pfp_hi",
        "md_per_user",
        "fp_per_user",
        "q1_hits",
        "q1_draws",
        "q1_hat",
        "q1_lo",
        "q1_hi",
        "q2_hat",
        "q2_lo",
        "q2_hi",
    ];

    /// One CSV row in [`TrialStats::COLUMNS`] order; unavailable rates are empty.
    pub fn csv_fields(&self) -> Vec<String> {
        let opt = |e: Option<Estimate>, f: fn(&Estimate) -> f64| e.map(|e| f(&e).to_string()).unwrap_or_default();
        vec![
            self.trials.to_string(),
            self.md_union_count.to_string(),
            self.fp_union_count.to_string(),
            self.md_user_total.to_string(),
            self.fp_user_total.to_string(),
            self.active_total.to_string(),
            self.inactive_total.to_string(),
            opt(self.pmd(), |e| e.point),
            opt(self.pmd(), |e| e.lo),
            opt(self.pmd(), |e| e.hi),
            opt(self.pfp(), |e| e.point),
            opt(self.pfp(), |e| e.lo),
            opt(self.pfp(), |e| e.hi),
            opt(self.md_per_user(), |e| e.point),
            opt(self.fp_per_user(), |e| e.point),
            self.q1_hits.to_string(),
            self.q1_draws.to_string(),
            opt(self.q1(), |e| e.point),
            opt(self.q1(), |e| e.lo),
            opt(self.q1(), |e| e.hi),
            opt(self.q2(), |e| e.point),
            opt(self.q2(), |e| e.lo),
            opt(self.q2(), |e| e.hi),
        ]
    }
}

/// Whether the signature matrix is redrawn every trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixMode {
    #[default]
    Redraw,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimOptions {
    pub fading: FadingMode,
    pub matrix: MatrixMode,
    pub exec: Exec,
    /// Overrides the `q1` handed to the decoder (otherwise `cfg.q1_mode`).
    pub decoder_q1: Option<f64>,
    /// Periodic progress counts on standard error.
    pub progress: bool,
}

const FIXED_MATRIX_INDEX: u64 = (1 << 56) - 1;
const CHUNKS: usize = 256;

/// One simulated round: activity, received samples and detector outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Round {
    pub activity: ActivityVector,
    pub received: ReceivedVector,
    pub outcomes: TestOutcomes,
}

fn draw_round(
    params: &SystemParams,
    cfg: &DiscoveryConfig,
    sig: &SignatureMatrix,
    fading: FadingMode,
    seed: u64,
    t: u64,
) -> Result<Round> {
    let activity = sample_activity(params.ell as usize, params.alpha, Seed::derive(seed, Purpose::Activity, t))?;
    let received = sample_received(sig, &activity, params, fading, Seed::derive(seed, Purpose::Channel, t))?;
    let outcomes = energy_detect(&received, cfg.tau2)?;
    Ok(Round { activity, received, outcomes })
}

fn matrix_for(params: &SystemParams, cfg: &DiscoveryConfig, mode: MatrixMode, seed: u64, t: u64) -> Result<SignatureMatrix> {
    let index = match mode {
        MatrixMode::Redraw => t,
        MatrixMode::Fixed => FIXED_MATRIX_INDEX,
    };
    gen_signature_matrix(params.ell as usize, cfg.n as usize, cfg.p, Seed::derive(seed, Purpose::Signature, index))
}

/// Rebuild trial `t` of [`run_discovery_trials`] exactly, with its matrix.
pub fn trial_round(
    params: &SystemParams,
    cfg: &DiscoveryConfig,
    seed: u64,
    t: u64,
    opts: &SimOptions,
) -> Result<(SignatureMatrix, Round)> {
    params.check()?;
    cfg.check()?;
    let sig = matrix_for(params, cfg, opts.matrix, seed, t)?;
    let round = draw_round(params, cfg, &sig, opts.fading, seed, t)?;
    Ok((sig, round))
}

fn one_trial(
    params: &SystemParams,
    cfg: &DiscoveryConfig,
    rule: NcompRule,
    fixed: Option<&SignatureMatrix>,
    opts: &SimOptions,
    seed: u64,
    t: u64,
) -> Result<TrialStats> {
    let drawn;
    let sig = match fixed {
        Some(s) => s,
        None => {
            drawn = matrix_for(params, cfg, MatrixMode::Redraw, seed, t)?;
            &drawn
        }
    };
    let Round { activity: b, outcomes, .. } = draw_round(params, cfg, sig, opts.fading, seed, t)?;

    let mut s = TrialStats { trials: 1, ..TrialStats::default() };
    for (j, &active) in b.0.iter().enumerate() {
        let c = user_counts(sig, &outcomes, j);
        let declared = rule.declares_active(c.tests, c.positives);
        if active {
            s.active_total += 1;
            s.md_user_total += u64::from(!declared);
            s.q1_draws += c.tests as u64;
            s.q1_hits += (c.tests - c.positives) as u64;
        } else {
            s.inactive_total += 1;
            s.fp_user_total += u64::from(declared);
            s.q2_draws += c.tests as u64;
            s.q2_hits += c.positives as u64;
        }
    }
    s.md_union_count = u64::from(s.md_user_total > 0);
    s.fp_union_count = u64::from(s.fp_user_total > 0);
    Ok(s)
}

fn progress_tick(counter: &AtomicU64, total: u64, enabled: bool) {
    if !enabled {
        return;
    }
    let done = counter.fetch_add(1, Ordering::Relaxed) + 1;
    let every = (total / 20).max(1);
    if done % every == 0 || done == total {
        eprintln!("progress: {done}/{total} trials");
    }
}

/// Simulate `trials` independent discovery rounds and tally errors.
///
/// In every trial the `q1` counters collect, for each active user, its
/// channel uses and how many read negative; the `q2` counters collect the
/// same for inactive users and positive reads.
pub fn run_discovery_trials(
    params: &SystemParams,
    cfg: &DiscoveryConfig,
    trials: u64,
    seed: u64,
    opts: &SimOptions,
) -> Result<TrialStats> {
    params.check()?;
    cfg.check()?;
    if trials == 0 {
        return Err(domain("at least one trial is required"));
    }
    if cfg.n == 0 {
        return Err(domain("simulation needs at least one channel use"));
    }
    let q1 = match opts.decoder_q1 {
        Some(q) => q,
        None => detection_probabilities(params, cfg)?.0,
    };
    let rule = NcompRule::new(q1, cfg.delta_margin)?;
    let fixed = match opts.matrix {
        MatrixMode::Fixed => Some(matrix_for(params, cfg, MatrixMode::Fixed, seed, 0)?),
        MatrixMode::Redraw => None,
    };
    let counter = AtomicU64::new(0);
    let chunks = (trials as usize).min(CHUNKS);
    let per = trials.div_ceil(chunks as u64);
    let partial = opts.exec.map(chunks, |c| {
        let lo = c as u64 * per;
        let hi = (lo + per).min(trials);
        (lo..hi).try_fold(TrialStats::default(), |acc, t| {
            let s = one_trial(params, cfg, rule, fixed.as_ref(), opts, seed, t)?;
            progress_tick(&counter, trials, opts.progress);
            Ok::<_, crate::error::Error>(acc.merge(s))
        })
    });
    partial.into_iter().try_fold(TrialStats::default(), |acc, r| Ok(acc.merge(r?)))
}

const DRAWS_PER_CHUNK: u64 = 4096;

fn superposed(rng: &mut impl rand::Rng, params: &SystemParams, users: u64) -> Sample {
    let amp = params.power.sqrt();
    let mut z = complex_gaussian(rng, params.sigma2_w);
    for _ in 0..users {
        let h = complex_gaussian(rng, params.sigma2_h);
        z.re += amp * h.re;
        z.im += amp * h.im;
    }
    z
}

/// Direct conditional sampling of the two detector error events.
///
/// A `q1` draw puts a designated active user in a test together with
/// `Binomial(ell - 1, p alpha)` other active users and records whether the
/// energy stays at or below `tau2`. A `q2` draw does the same without the
/// designated user and records whether the energy exceeds `tau2`.
pub fn estimate_q1_q2(params: &SystemParams, cfg: &DiscoveryConfig, draws: u64, seed: u64, exec: Exec) -> Result<TrialStats> {
    params.check()?;
    cfg.check()?;
    if draws == 0 {
        return Err(domain("at least one draw is required"));
    }
    let others = Binomial::new(params.ell - 1, cfg.p * params.alpha).map_err(|e| domain(e.to_string()))?;
    let chunks = draws.div_ceil(DRAWS_PER_CHUNK);
    Ok(exec.map_reduce(
        chunks as usize,
        CHUNKS,
        TrialStats::default(),
        |c| {
            let c = c as u64;
            let mut rng = Seed::derive(seed, Purpose::Conditional, c).rng();
            let count = DRAWS_PER_CHUNK.min(draws - c * DRAWS_PER_CHUNK);
            let mut s = TrialStats { trials: count, q1_draws: count, q2_draws: count, ..TrialStats::default() };
            for _ in 0..count {
                let g = others.sample(&mut rng);
                s.q1_hits += u64::from(superposed(&mut rng, params, g + 1).energy() <= cfg.tau2);
                let g = others.sample(&mut rng);
                s.q2_hits += u64::from(superposed(&mut rng, params, g).energy() > cfg.tau2);
            }
            s
        },
        TrialStats::merge,
    ))
}

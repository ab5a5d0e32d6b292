//! One discovery round: signature matrix, user activity, Rayleigh block
//! fading, on-off keyed superposition and the 1-bit energy detector.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::params::SystemParams;
use crate::rng::Seed;

/// Binary `n x ell` signature matrix stored column-wise as sorted row indices.
///
/// Column `j` is the signature of user `j`; row `i` is channel use `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureMatrix {
    n: usize,
    columns: Vec<Vec<u32>>,
    /// Inclusion probability the matrix was drawn with, if random.
    pub p: Option<f64>,
}

impl SignatureMatrix {
    /// Build from dense rows (`rows[i][j] == 1` iff user `j` is in use `i`).
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.len();
        let ell = rows.first().map_or(0, Vec::len);
        if n == 0 || ell == 0 {
            return Err(domain("signature matrix needs at least one row and one column"));
        }
        let mut columns = vec![Vec::new(); ell];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != ell {
                return Err(Error::Dimension {
                    what: "signature row length",
                    expected: ell,
                    got: row.len(),
                });
            }
            for (j, &bit) in row.iter().enumerate() {
                match bit {
                    0 => {}
                    1 => columns[j].push(i as u32),
                    other => return Err(domain(format!("signature entries must be 0 or 1, got {other}"))),
                }
            }
        }
        Ok(SignatureMatrix { n, columns, p: None })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ell(&self) -> usize {
        self.columns.len()
    }

    /// Channel uses that include user `j`, ascending.
    pub fn column(&self, j: usize) -> &[u32] {
        &self.columns[j]
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.columns[j].binary_search(&(i as u32)).is_ok()
    }

    /// Number of ones in the matrix.
    pub fn weight(&self) -> usize {
        self.columns.iter().map(Vec::len).sum()
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        let mut rows = vec![vec![0u8; self.ell()]; self.n];
        for (j, col) in self.columns.iter().enumerate() {
            for &i in col {
                rows[i as usize][j] = 1;
            }
        }
        rows
    }
}

/// Sorted positions of successes among `n` Bernoulli(`p`) trials, drawn by
/// geometric gap skipping.
fn bernoulli_positions<R: Rng>(rng: &mut R, n: usize, p: f64, out: &mut Vec<u32>) {
    out.clear();
    if p <= 0.0 {
        return;
    }
    if p >= 1.0 {
        out.extend(0..n as u32);
        return;
    }
    let log_q = (-p).ln_1p();
    let mut pos: f64 = -1.0;
    loop {
        let u: f64 = 1.0 - rng.random::<f64>();
        pos += (u.ln() / log_q).floor() + 1.0;
        if pos >= n as f64 {
            break;
        }
        out.push(pos as u32);
    }
}

/// Draw a signature matrix with i.i.d. Bernoulli(`p`) entries.
pub fn gen_signature_matrix(ell: usize, n: usize, p: f64, seed: Seed) -> Result<SignatureMatrix> {
    if ell == 0 || n == 0 {
        return Err(domain(format!("signature matrix dimensions must be positive, got {n} x {ell}")));
    }
    if n > u32::MAX as usize {
        return Err(domain(format!("at most {} channel uses supported, got {n}", u32::MAX)));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(domain(format!("inclusion probability must lie in [0, 1], got {p}")));
    }
    let mut rng = seed.rng();
    let columns = (0..ell)
        .map(|_| {
            let mut col = Vec::with_capacity((n as f64 * p * 1.2) as usize + 4);
            bernoulli_positions(&mut rng, n, p, &mut col);
            col
        })
        .collect();
    Ok(SignatureMatrix { n, columns, p: Some(p) })
}

/// Activity indicators `b_j` of the `ell` users.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivityVector(pub Vec<bool>);

impl ActivityVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn popcount(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn active(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter_map(|(j, &b)| b.then_some(j))
    }

    /// Activity pattern encoded by the low `ell` bits of `mask`.
    pub fn from_mask(ell: usize, mask: u64) -> Self {
        ActivityVector((0..ell).map(|j| mask >> j & 1 == 1).collect())
    }
}

pub fn sample_activity(ell: usize, alpha: f64, seed: Seed) -> Result<ActivityVector> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(domain(format!("activity probability must lie in [0, 1], got {alpha}")));
    }
    let mut rng = seed.rng();
    Ok(ActivityVector((0..ell).map(|_| rng.random::<f64>() < alpha).collect()))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Sample {
    pub re: f64,
    pub im: f64,
}

impl Sample {
    pub fn energy(&self) -> f64 {
        self.re * self.re + self.im * self.im
    }
}

/// Circularly-symmetric complex Gaussian with total variance `var`.
pub(crate) fn complex_gaussian<R: Rng>(rng: &mut R, var: f64) -> Sample {
    let s = (0.5 * var).sqrt();
    Sample {
        re: s * rng.sample::<f64, _>(StandardNormal),
        im: s * rng.sample::<f64, _>(StandardNormal),
    }
}

/// How often the fading coefficients are redrawn within a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FadingMode {
    /// One coefficient per user for the whole round.
    #[default]
    Block,
    /// Fresh coefficient for every (user, channel use) pair.
    PerUse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedVector(pub Vec<Sample>);

impl ReceivedVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Received samples `y = sqrt(P) sum_j h_j b_j s_j + w` for one round.
///
/// Fading coefficients of active users are drawn first, in user order,
/// followed by the noise of each channel use, all from `seed`'s stream.
pub fn sample_received(
    sig: &SignatureMatrix,
    activity: &ActivityVector,
    params: &SystemParams,
    fading: FadingMode,
    seed: Seed,
) -> Result<ReceivedVector> {
    if activity.len() != sig.ell() {
        return Err(Error::Dimension {
            what: "activity vector length",
            expected: sig.ell(),
            got: activity.len(),
        });
    }
    let mut rng = seed.rng();
    let amp = params.power.sqrt();
    let mut y = vec![Sample::default(); sig.n()];
    for j in activity.active() {
        match fading {
            FadingMode::Block => {
                let h = complex_gaussian(&mut rng, params.sigma2_h);
                for &i in sig.column(j) {
                    y[i as usize].re += amp * h.re;
                    y[i as usize].im += amp * h.im;
                }
            }
            FadingMode::PerUse => {
                for &i in sig.column(j) {
                    let h = complex_gaussian(&mut rng, params.sigma2_h);
                    y[i as usize].re += amp * h.re;
                    y[i as usize].im += amp * h.im;
                }
            }
        }
    }
    for s in &mut y {
        let w = complex_gaussian(&mut rng, params.sigma2_w);
        s.re += w.re;
        s.im += w.im;
    }
    Ok(ReceivedVector(y))
}

/// Detector decisions `y~_i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestOutcomes(pub Vec<bool>);

impl TestOutcomes {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }
}

/// `y~_i = 1` iff `|y_i|^2 > tau2`.
pub fn energy_detect(y: &ReceivedVector, tau2: f64) -> Result<TestOutcomes> {
    if !(tau2 >= 0.0) {
        return Err(domain(format!("energy threshold must be non-negative, got {tau2}")));
    }
    Ok(TestOutcomes(y.0.iter().map(|s| s.energy() > tau2).collect()))
}

/// Write a round as CSV: `channel_use,re_y,im_y,energy,outcome`.
pub fn write_round_csv<W: Write>(out: W, y: &ReceivedVector, outcomes: &TestOutcomes) -> Result<()> {
    if y.len() != outcomes.len() {
        return Err(Error::Dimension {
            what: "outcome vector length",
            expected: y.len(),
            got: outcomes.len(),
        });
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["channel_use", "re_y", "im_y", "energy", "outcome"])?;
    for (i, (s, &o)) in y.0.iter().zip(&outcomes.0).enumerate() {
        w.write_record([
            i.to_string(),
            s.re.to_string(),
            s.im.to_string(),
            s.energy().to_string(),
            u8::from(o).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

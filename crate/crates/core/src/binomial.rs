//! Truncated binomial weights and Bernoulli KL divergence.

use libm::lgamma;

/// Neglected probability mass allowed when truncating a binomial series.
pub const TAIL_TOL: f64 = 1e-12;

/// Contiguous block of `Binomial(trials, q)` probabilities starting at
/// `start`, with a rigorous bound on the mass left outside the block.
#[derive(Debug, Clone, PartialEq)]
pub struct BinomialWeights {
    pub start: u64,
    pub weights: Vec<f64>,
    pub neglected: f64,
}

impl BinomialWeights {
    /// Expand from the mode until the geometric tail bound on each side
    /// drops below `tol / 2`. Ratios of successive binomial terms decrease
    /// away from the mode, so `pmf(g) r / (1 - r)` bounds the rest.
    pub fn new(trials: u64, q: f64, tol: f64) -> Self {
        if q <= 0.0 {
            return BinomialWeights { start: 0, weights: vec![1.0], neglected: 0.0 };
        }
        if q >= 1.0 {
            return BinomialWeights { start: trials, weights: vec![1.0], neglected: 0.0 };
        }
        let n = trials as f64;
        let mode = (((n + 1.0) * q).floor() as u64).min(trials);
        let log_mode = log_pmf(trials, mode, q);
        let odds = q / (1.0 - q);
        let half = 0.5 * tol;

        let mut upper = Vec::new();
        let mut neglected = 0.0;
        let mut g = mode;
        let mut w = log_mode.exp();
        loop {
            upper.push(w);
            if g == trials {
                break;
            }
            let r = (n - g as f64) / (g as f64 + 1.0) * odds;
            if r < 1.0 {
                let tail = w * r / (1.0 - r);
                if tail < half {
                    neglected += tail;
                    break;
                }
            }
            w *= r;
            g += 1;
        }

        let mut lower = Vec::new();
        let mut g = mode;
        let mut w = log_mode.exp();
        while g > 0 {
            let r = g as f64 / (n - g as f64 + 1.0) / odds;
            if r < 1.0 {
                let tail = w * r / (1.0 - r);
                if tail < half {
                    neglected += tail;
                    break;
                }
            }
            w *= r;
            g -= 1;
            lower.push(w);
        }
        let start = mode - lower.len() as u64;
        lower.reverse();
        lower.extend(upper);
        BinomialWeights { start, weights: lower, neglected }
    }

    /// Probability mass held in the block.
    pub fn retained(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `E[f(Q)]` over the retained block.
    pub fn expect(&self, f: impl Fn(u64) -> f64) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(i, w)| w * f(self.start + i as u64))
            .sum()
    }
}

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln(n!) - ln(sqrt(2 pi n) (n / e)^n)`.
fn stirlerr(n: f64) -> f64 {
    if n <= 15.0 {
        return lgamma(n + 1.0) - (n + 0.5) * n.ln() + n - LN_SQRT_2PI;
    }
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// `x ln(x / m) + m - x`, evaluated without cancellation near `x = m`.
fn bd0(x: f64, m: f64) -> f64 {
    if (x - m).abs() < 0.1 * (x + m) {
        let v = (x - m) / (x + m);
        let mut s = (x - m) * v;
        let mut ej = 2.0 * x * v;
        let v2 = v * v;
        for j in 1..1000 {
            ej *= v2;
            let next = s + ej / (2 * j + 1) as f64;
            if next == s {
                break;
            }
            s = next;
        }
        s
    } else {
        x * (x / m).ln() + m - x
    }
}

/// Log of the `Binomial(n, q)` pmf at `x` (saddle-point form, after Loader).
fn log_pmf(n: u64, x: u64, q: f64) -> f64 {
    let nf = n as f64;
    if x == 0 {
        return nf * (-q).ln_1p();
    }
    if x == n {
        return nf * q.ln();
    }
    let xf = x as f64;
    let yf = nf - xf;
    stirlerr(nf) - stirlerr(xf) - stirlerr(yf) - bd0(xf, nf * q) - bd0(yf, nf * (1.0 - q))
        + 0.5 * (nf / (2.0 * std::f64::consts::PI * xf * yf)).ln()
}

/// `D(Bern(a) || Bern(b))` in nats, with `0 ln 0 = 0`.
pub fn kl_bernoulli(a: f64, b: f64) -> f64 {
    let term = |x: f64, y: f64| if x <= 0.0 { 0.0 } else { x * (x / y).ln() };
    term(a, b) + term(1.0 - a, 1.0 - b)
}

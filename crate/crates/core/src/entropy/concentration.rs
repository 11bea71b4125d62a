//! The sub-Gaussian bound `log E exp{gamma (sum_i Xbar_i)^2} <= 2 gamma sigma^2`
//! for independent `X_i in [a_i, b_i]`, `sigma^2 = sum (b_i - a_i)^2` and
//! `gamma <= 1 / sigma^2`: an exact binomial oracle and a Monte Carlo check
//! for independent two-point variables.

use rand::Rng;

use crate::entropy::EntropyError;

/// Bootstrap resamples used for the Monte Carlo confidence band.
pub const BOOTSTRAP_RESAMPLES: usize = 200;

/// `X = hi` with probability `p`, else `lo`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoPoint {
    pub lo: f64,
    pub hi: f64,
    pub p: f64,
}

impl TwoPoint {
    pub fn mean(&self) -> f64 {
        self.lo + self.p * (self.hi - self.lo)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

fn log_sum_exp(terms: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = terms.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

fn check_gamma(gamma: f64, sigma2: f64) -> Result<(), EntropyError> {
    let limit = if sigma2 > 0.0 { 1.0 / sigma2 } else { f64::INFINITY };
    if !(gamma > 0.0 && gamma <= limit * (1.0 + 1e-12)) {
        return Err(EntropyError::GammaRange { gamma, limit });
    }
    Ok(())
}

/// Exact `log E exp{gamma (sum_i Xbar_i)^2}` for `n` i.i.d. Bernoulli(`p`)
/// variables, by summing over the binomial law in log space.
pub fn binomial_log_moment(n: u32, p: f64, gamma: f64) -> Result<f64, EntropyError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(EntropyError::Invalid(format!("p = {p}")));
    }
    check_gamma(gamma, n as f64)?;
    let nf = n as f64;
    let mut log_choose = 0.0;
    let terms = (0..=n).map(|k| {
        if k > 0 {
            log_choose += ((n - k + 1) as f64).ln() - (k as f64).ln();
        }
        let kf = k as f64;
        let log_w = log_choose + xlog(kf, p) + xlog(nf - kf, 1.0 - p);
        log_w + gamma * (kf - nf * p).powi(2)
    });
    Ok(log_sum_exp(terms))
}

/// `a ln b` with `0 ln 0 = 0`.
fn xlog(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a * b.ln()
    }
}

/// Monte Carlo estimate of the log-moment with a bootstrap band.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConcentrationReport {
    pub lhs: f64,
    /// Upper 97.5% bootstrap quantile of the estimate minus the estimate.
    pub band: f64,
    /// `2 gamma sigma^2`.
    pub rhs: f64,
}

impl ConcentrationReport {
    pub fn passed(&self) -> bool {
        self.lhs <= self.rhs + self.band
    }
}

pub fn concentration_check<R: Rng>(
    vars: &[TwoPoint],
    gamma: f64,
    samples: usize,
    rng: &mut R,
) -> Result<ConcentrationReport, EntropyError> {
    if vars.is_empty() || samples == 0 {
        return Err(EntropyError::Invalid(
            "need at least one variable and one sample".into(),
        ));
    }
    if vars.iter().any(|v| !(v.lo <= v.hi && (0.0..=1.0).contains(&v.p))) {
        return Err(EntropyError::Invalid(
            "two-point variable with lo > hi or p outside [0,1]".into(),
        ));
    }
    let sigma2: f64 = vars.iter().map(|v| v.width().powi(2)).sum();
    check_gamma(gamma, sigma2)?;
    let logs: Vec<f64> = (0..samples)
        .map(|_| {
            let s: f64 = vars
                .iter()
                .map(|v| if rng.random_bool(v.p) { v.hi } else { v.lo } - v.mean())
                .sum();
            gamma * s * s
        })
        .collect();
    let ln_mean = |idx: &mut dyn Iterator<Item = usize>| log_sum_exp(idx.map(|i| logs[i])) - (samples as f64).ln();
    let lhs = ln_mean(&mut (0..samples));
    let mut boot: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| ln_mean(&mut (0..samples).map(|_| rng.random_range(0..samples))))
        .collect();
    boot.sort_by(f64::total_cmp);
    let q = boot[((BOOTSTRAP_RESAMPLES as f64 * 0.975) as usize).min(BOOTSTRAP_RESAMPLES - 1)];
    Ok(ConcentrationReport {
        lhs,
        band: (q - lhs).max(0.0),
        rhs: 2.0 * gamma * sigma2,
    })
}

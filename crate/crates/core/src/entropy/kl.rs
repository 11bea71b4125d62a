//! Relative entropy between Bernoulli product measures and the plug-in proxy
//! built from ensemble site means.

use crate::entropy::EntropyError;
use crate::hydro::HydroRun;
use crate::lattice::ScalarField;

fn xlogy(m: f64, v: f64) -> f64 {
    if m == 0.0 {
        0.0
    } else if v == 0.0 {
        f64::INFINITY
    } else {
        m * (m / v).ln()
    }
}

fn site_kl(m: f64, v: f64) -> f64 {
    xlogy(m, v) + xlogy(1.0 - m, 1.0 - v)
}

/// `H(nu_m | nu_v) = sum_x [m log(m/v) + (1-m) log((1-m)/(1-v))]`, with
/// `0 log 0 = 0`. A site with `v in {0, 1}` and a mismatched `m` gives
/// `+inf`.
pub fn relative_entropy_product(mu_mean: &ScalarField, nu_mean: &ScalarField) -> Result<f64, EntropyError> {
    if mu_mean.lattice() != nu_mean.lattice() {
        return Err(EntropyError::LatticeMismatch);
    }
    relative_entropy_values(mu_mean.values(), nu_mean.values())
}

fn relative_entropy_values(m: &[f64], v: &[f64]) -> Result<f64, EntropyError> {
    if let Some(x) = m.iter().chain(v).position(|p| !(0.0..=1.0).contains(p)) {
        let value = if x < m.len() { m[x] } else { v[x - m.len()] };
        return Err(EntropyError::MeanOutOfRange {
            site: x % m.len(),
            value,
        });
    }
    Ok(m.iter().zip(v).map(|(&a, &b)| site_kl(a, b)).sum())
}

/// `H(nu_{mean_t} | nu_{u^N(t)}) / N^d` at each output time of `run`, where
/// `site_means[t]` are the ensemble averages of `eta_x(t)`. Projecting onto
/// product marginals can only decrease relative entropy, so this is a lower
/// bound proxy for the true normalized entropy, not the entropy itself.
pub fn entropy_proxy(site_means: &[Vec<f64>], run: &HydroRun) -> Result<Vec<f64>, EntropyError> {
    if site_means.len() != run.fields.len() {
        return Err(EntropyError::GridMismatch(site_means.len(), run.fields.len()));
    }
    site_means
        .iter()
        .zip(&run.fields)
        .map(|(m, u)| {
            if m.len() != u.values().len() {
                return Err(EntropyError::LatticeMismatch);
            }
            Ok(relative_entropy_values(m, u.values())? / m.len() as f64)
        })
        .collect()
}

//! Summation by parts behind the replacement of `V_a` by its local-average
//! version `V_a^l`:
//!
//! ```text
//! V_a - V_a^l = K sum_j sum_x h_x^{l,j} (omega_x - omega_{x+e_j}),
//! h_x^{l,j}   = sum_{y in Lambda_{2l-1}} omega~_{x-y-n1} Phi^l(y, y+e_j),
//! ```
//!
//! with `omega~_x = a(u_x, u_{x+n1}, u_{x+n2}) omega_x`.

use crate::entropy::adjoint::{fabc_coefficients, CenteredVars};
use crate::entropy::flow::{flow_construct, Flow};
use crate::entropy::EntropyError;
use crate::lattice::{Configuration, ScalarField, TorusLattice};
use crate::rates::RateSpec;

/// Both sides of the identity and the exchange-invariance defect.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HFieldReport {
    pub va: f64,
    pub va_local: f64,
    pub rhs: f64,
    /// `|V_a - V_a^l - rhs|`.
    pub residual: f64,
    /// `max_{x,j} |h_x^{l,j}(eta^{x,x+e_j}) - h_x^{l,j}(eta)|`.
    pub exchange_defect: f64,
}

fn box_offsets(side: usize, d: usize) -> Vec<Vec<i64>> {
    (0..side.pow(d as u32))
        .map(|mut x| {
            (0..d)
                .map(|_| {
                    let c = x % side;
                    x /= side;
                    c as i64
                })
                .collect()
        })
        .collect()
}

/// Shift tables `x -> x + sign * (offset + base)` for each offset.
fn tables(lat: &TorusLattice, offsets: &[Vec<i64>], base: &[i64], sign: i64) -> Result<Vec<Vec<u32>>, EntropyError> {
    offsets
        .iter()
        .map(|o| {
            let v: Vec<i64> = o.iter().zip(base).map(|(a, b)| sign * (a + b)).collect();
            Ok(lat.shift_table(&v)?)
        })
        .collect()
}

struct HField<'a> {
    flow: &'a Flow,
    /// For each box site `y`, the table `x -> x - y - n1`.
    back: Vec<Vec<u32>>,
}

impl HField<'_> {
    fn value(&self, wt: &[f64], x: usize, j: usize) -> f64 {
        let d = self.flow.dim();
        self.back
            .iter()
            .enumerate()
            .map(|(y, t)| wt[t[x] as usize] * self.flow.values()[y * d + j])
            .sum()
    }
}

/// Evaluates the identity for window `ell` and Glauber speed `k`.
pub fn h_field_identity(
    spec: &RateSpec,
    k: f64,
    u: &ScalarField,
    cfg: &Configuration,
    ell: usize,
) -> Result<HFieldReport, EntropyError> {
    let lat = u.lattice();
    let d = lat.dim();
    let reach = spec.n1.iter().map(|v| v.unsigned_abs() as usize).max().unwrap_or(0);
    let need = 4 * ell + reach;
    if ell == 0 || lat.side() <= need {
        return Err(EntropyError::WindowOverflow {
            side: lat.side(),
            ell,
            need,
        });
    }
    let cv = CenteredVars::new(u, cfg)?;
    let rates = spec.bind(lat)?;
    let v = u.values();
    let n = lat.site_count();
    let a: Vec<f64> = (0..n)
        .map(|x| fabc_coefficients(spec, v[x], v[rates.n1(x)], v[rates.n2(x)])[0])
        .collect();
    let weighted = |omega: &[f64]| -> Vec<f64> { a.iter().zip(omega).map(|(a, w)| a * w).collect() };
    let wt = weighted(&cv.omega);
    let w = &cv.omega;

    let va = k * (0..n).map(|x| wt[x] * w[rates.n1(x)]).sum::<f64>();

    let zero = vec![0i64; d];
    let lambda = box_offsets(ell, d);
    let left = tables(lat, &lambda, &zero, -1)?;
    let right = tables(lat, &lambda, &spec.n1, 1)?;
    let norm = 1.0 / lambda.len() as f64;
    let va_local = k
        * (0..n)
            .map(|x| {
                let l: f64 = left.iter().map(|t| wt[t[x] as usize]).sum::<f64>() * norm;
                let r: f64 = right.iter().map(|t| w[t[x] as usize]).sum::<f64>() * norm;
                l * r
            })
            .sum::<f64>();

    let flow = flow_construct(ell, d);
    let hf = HField {
        flow: &flow,
        back: tables(lat, &box_offsets(flow.side(), d), &spec.n1, -1)?,
    };
    let mut rhs = 0.0;
    let mut exchange_defect = 0.0f64;
    let mut swapped = cfg.clone();
    for x in 0..n {
        for j in 0..d {
            let y = lat.forward(x, j);
            let h = hf.value(&wt, x, j);
            rhs += h * (w[x] - w[y]);
            swapped.swap(x, y);
            let sv = CenteredVars::new(u, &swapped)?;
            let hs = hf.value(&weighted(&sv.omega), x, j);
            swapped.swap(x, y);
            exchange_defect = exchange_defect.max((hs - h).abs());
        }
    }
    rhs *= k;
    Ok(HFieldReport {
        va,
        va_local,
        rhs,
        residual: (va - va_local - rhs).abs(),
        exchange_defect,
    })
}

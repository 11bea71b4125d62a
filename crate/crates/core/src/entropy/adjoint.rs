//! Closed-form adjoints `L^{*,nu} 1` of the Kawasaki and Glauber generators
//! with respect to the product Bernoulli measure `nu_u`, and the cancellation
//! of their linear parts against the discretized hydrodynamic equation.

use crate::entropy::EntropyError;
use crate::lattice::{unscaled_laplacian, Configuration, ScalarField};
use crate::rates::RateSpec;

/// Guard keeping `u_x` away from 0 and 1.
pub const MEAN_GUARD: f64 = 1e-12;

/// `chi(rho) = rho (1 - rho)`.
pub fn chi(rho: f64) -> f64 {
    rho * (1.0 - rho)
}

/// `eta_bar_x = eta_x - u_x` and `omega_x = eta_bar_x / chi(u_x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CenteredVars {
    pub eta_bar: Vec<f64>,
    pub omega: Vec<f64>,
}

impl CenteredVars {
    pub fn new(u: &ScalarField, cfg: &Configuration) -> Result<Self, EntropyError> {
        check_means(u, cfg)?;
        let (eta_bar, omega) = u
            .values()
            .iter()
            .enumerate()
            .map(|(x, &ux)| {
                let e = cfg.value(x) - ux;
                (e, e / chi(ux))
            })
            .unzip();
        Ok(Self { eta_bar, omega })
    }
}

pub(crate) fn check_means(u: &ScalarField, cfg: &Configuration) -> Result<(), EntropyError> {
    if u.lattice() != cfg.lattice() {
        return Err(EntropyError::LatticeMismatch);
    }
    check_open_unit(u)
}

pub(crate) fn check_open_unit(u: &ScalarField) -> Result<(), EntropyError> {
    match u
        .values()
        .iter()
        .position(|&v| !(v > MEAN_GUARD && v < 1.0 - MEAN_GUARD))
    {
        Some(x) => Err(EntropyError::MeanOutOfRange {
            site: x,
            value: u.get(x),
        }),
        None => Ok(()),
    }
}

/// `-1/2 sum_{|x-y|=1} (u_y - u_x)^2 omega_x omega_y` over ordered neighbor
/// pairs, with the neighbor multiset (double bonds at `N = 2` count twice).
fn gradient_quadratic(u: &ScalarField, omega: &[f64]) -> f64 {
    let lat = u.lattice();
    let v = u.values();
    let mut acc = 0.0;
    for x in 0..lat.site_count() {
        for y in lat.neighbors(x) {
            let g = v[y] - v[x];
            acc += g * g * omega[x] * omega[y];
        }
    }
    -0.5 * acc
}

/// `L_K^{*,nu} 1` by the closed formula, with the unscaled Laplacian
/// `(Delta u)_x = sum_{|y-x|=1} (u_y - u_x)`.
pub fn adjoint_kawasaki_one(u: &ScalarField, cfg: &Configuration) -> Result<f64, EntropyError> {
    let cv = CenteredVars::new(u, cfg)?;
    let lap = unscaled_laplacian(u);
    let linear: f64 = lap.values().iter().zip(&cv.omega).map(|(l, w)| l * w).sum();
    Ok(gradient_quadratic(u, &cv.omega) + linear)
}

/// The coefficient functions `a`, `b`, `c` of the quadratic and cubic terms
/// of `F(omega, u)` at `(u_x, u_{x+n1}, u_{x+n2})`.
pub fn fabc_coefficients(spec: &RateSpec, u0: f64, u1: f64, u2: f64) -> [f64; 3] {
    let s = spec.a_plus * (1.0 - u0) - spec.a_minus * u0;
    let a = chi(u1) * (s * u2 + spec.b_plus * (1.0 - u0) - spec.b_minus * u0);
    let b = chi(u2) * s * u1;
    let c = chi(u1) * chi(u2) * s;
    [a, b, c]
}

/// `L_G^{*,nu} 1` evaluated three ways.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GlauberAdjoint {
    /// `sum_x (c_x^+(eta)/u_x - c_x^-(eta)/(1 - u_x)) eta_bar_x`.
    pub first_form: f64,
    /// `F(omega, u)`, the part of degree at least two in `omega`.
    pub f_part: f64,
    /// `sum_x f^N(x, u) omega_x`.
    pub linear_part: f64,
}

impl GlauberAdjoint {
    /// `F + linear`.
    pub fn total(&self) -> f64 {
        self.f_part + self.linear_part
    }
}

pub fn adjoint_glauber_one(
    spec: &RateSpec,
    u: &ScalarField,
    cfg: &Configuration,
) -> Result<GlauberAdjoint, EntropyError> {
    let cv = CenteredVars::new(u, cfg)?;
    let rates = spec.bind(u.lattice())?;
    let v = u.values();
    let (mut first, mut f_part, mut linear) = (0.0, 0.0, 0.0);
    for x in 0..v.len() {
        let (x1, x2) = (rates.n1(x), rates.n2(x));
        let (e1, e2) = (cfg.value(x1), cfg.value(x2));
        let cp = spec.c_plus_at(e1, e2);
        let cm = spec.c_minus_at(e1, e2);
        first += (cp / v[x] - cm / (1.0 - v[x])) * cv.eta_bar[x];
        let [a, b, c] = fabc_coefficients(spec, v[x], v[x1], v[x2]);
        let w = &cv.omega;
        f_part += a * w[x] * w[x1] + b * w[x] * w[x2] + c * w[x] * w[x1] * w[x2];
        linear += rates.reaction(v, x) * w[x];
    }
    Ok(GlauberAdjoint {
        first_form: first,
        f_part,
        linear_part: linear,
    })
}

/// Both sides of the cancellation identity: the generator side
/// `N^2 L_K^* 1 + K L_G^* 1 - sum_x (d_t u_x) omega_x` with `d_t u` taken from
/// the discretized hydrodynamic equation, and the reduced side
/// `V_1 + V_a + V_b + V_c` in which no linear term in `omega` survives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cancellation {
    pub generator_side: f64,
    pub v1: f64,
    pub va: f64,
    pub vb: f64,
    pub vc: f64,
}

impl Cancellation {
    pub fn reduced_side(&self) -> f64 {
        self.v1 + self.va + self.vb + self.vc
    }

    pub fn residual(&self) -> f64 {
        (self.generator_side - self.reduced_side()).abs()
    }
}

pub fn cancellation_check(
    spec: &RateSpec,
    k: f64,
    u: &ScalarField,
    cfg: &Configuration,
) -> Result<Cancellation, EntropyError> {
    let lat = u.lattice();
    let n2 = (lat.side() * lat.side()) as f64;
    let cv = CenteredVars::new(u, cfg)?;
    let rates = spec.bind(lat)?;
    let v = u.values();
    let lap = unscaled_laplacian(u);
    let dtu: Vec<f64> = (0..v.len())
        .map(|x| n2 * lap.get(x) + k * rates.reaction(v, x))
        .collect();
    let drift: f64 = dtu.iter().zip(&cv.omega).map(|(a, b)| a * b).sum();
    let kaw = adjoint_kawasaki_one(u, cfg)?;
    let gl = adjoint_glauber_one(spec, u, cfg)?;
    let generator_side = n2 * kaw + k * gl.first_form - drift;

    let w = &cv.omega;
    let (mut va, mut vb, mut vc) = (0.0, 0.0, 0.0);
    for x in 0..v.len() {
        let (x1, x2) = (rates.n1(x), rates.n2(x));
        let [a, b, c] = fabc_coefficients(spec, v[x], v[x1], v[x2]);
        va += a * w[x] * w[x1];
        vb += b * w[x] * w[x2];
        vc += c * w[x] * w[x1] * w[x2];
    }
    Ok(Cancellation {
        generator_side,
        v1: n2 * gradient_quadratic(u, w),
        va: k * va,
        vb: k * vb,
        vc: k * vc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::testing::{random_case, rng};
    use crate::lattice::TorusLattice;

    #[test]
    fn constant_mean_kills_kawasaki_adjoint() {
        let lat = TorusLattice::new(2, 4).unwrap();
        let u = ScalarField::constant(&lat, 0.37);
        for s in [0u64, 5, 1234, 65535] {
            let cfg = Configuration::from_state_index(&lat, s);
            assert_eq!(adjoint_kawasaki_one(&u, &cfg).unwrap(), 0.0);
        }
    }

    #[test]
    fn first_form_equals_decomposition() {
        let spec = RateSpec::bistable_example(1);
        let lat = TorusLattice::new(1, 5).unwrap();
        let mut r = rng(7);
        for _ in 0..50 {
            let (u, cfg) = random_case(&lat, &mut r);
            let g = adjoint_glauber_one(&spec, &u, &cfg).unwrap();
            assert!((g.first_form - g.total()).abs() < 1e-10, "{g:?}");
        }
    }

    #[test]
    fn constant_rates_have_no_f_part() {
        let spec = RateSpec::constant(1, 1.5, 0.5);
        let lat = TorusLattice::new(1, 6).unwrap();
        let mut r = rng(8);
        let (u, cfg) = random_case(&lat, &mut r);
        let g = adjoint_glauber_one(&spec, &u, &cfg).unwrap();
        assert_eq!(g.f_part, 0.0);
        let cv = CenteredVars::new(&u, &cfg).unwrap();
        let expected: f64 = (0..6)
            .map(|x| ((1.0 - u.get(x)) * 1.5 - u.get(x) * 0.5) * cv.omega[x])
            .sum();
        assert!((g.linear_part - expected).abs() < 1e-12);
    }

    #[test]
    fn linear_terms_cancel() {
        let spec = RateSpec::bistable_example(2);
        let lat = TorusLattice::new(2, 5).unwrap();
        let mut r = rng(9);
        for k in [1.0, 4.0, 30.0] {
            for _ in 0..10 {
                let (u, cfg) = random_case(&lat, &mut r);
                let c = cancellation_check(&spec, k, &u, &cfg).unwrap();
                assert!(c.residual() <= 1e-9 * (1.0 + c.generator_side.abs()), "{c:?}");
            }
        }
    }

    #[test]
    fn rejects_degenerate_means() {
        let lat = TorusLattice::new(1, 4).unwrap();
        let u = ScalarField::from_values(&lat, vec![0.5, 1.0, 0.5, 0.5]).unwrap();
        let cfg = Configuration::empty(&lat);
        assert!(matches!(
            adjoint_kawasaki_one(&u, &cfg),
            Err(EntropyError::MeanOutOfRange { site: 1, .. })
        ));
    }
}

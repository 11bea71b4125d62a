//! Glauber flip rates of the three-coefficient form
//!
//! ```text
//! c+(eta) = a+ eta_{n1} eta_{n2} + b+ eta_{n1} + c+
//! c-(eta) = a- eta_{n1} eta_{n2} + b- eta_{n1} + c-
//! ```
//!
//! together with the reaction polynomial `f(rho) = E^{nu_rho}[(1 - 2 eta_0) c(eta)]`,
//! its discrete counterpart `f^N`, and the validation of the structural
//! conditions: admissible offsets, positive rates, bistability with balance,
//! and monotone rates.

use thiserror::Error;

use crate::lattice::{Configuration, LatticeError, ScalarField, TorusLattice};

#[derive(Debug, Error, PartialEq)]
pub enum RateError {
    #[error("offset condition violated: {0}")]
    Offsets(String),
    #[error("rates must be positive on [0,1]^2: {0}")]
    Positivity(String),
    #[error("bistability condition violated: {0}")]
    Bistability(String),
    #[error("monotonicity condition violated: {0}")]
    Monotonicity(String),
    #[error("balance condition violated: integral of f between the stable roots is {integral:e}")]
    Balance { integral: f64 },
    #[error("rate coefficients must be finite")]
    NonFinite,
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// Tolerance on `|int_{alpha1}^{alpha2} f|` for the balance check.
pub const BALANCE_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct RateSpec {
    pub a_plus: f64,
    pub b_plus: f64,
    pub c_plus: f64,
    pub a_minus: f64,
    pub b_minus: f64,
    pub c_minus: f64,
    pub n1: Vec<i64>,
    pub n2: Vec<i64>,
}

/// Roots and leading coefficient of a validated bistable reaction term
/// `f(rho) = -C (rho - alpha1)(rho - alpha_star)(rho - alpha2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BistableProfile {
    pub alpha1: f64,
    pub alpha_star: f64,
    pub alpha2: f64,
    pub c_lead: f64,
}

impl RateSpec {
    /// The symmetric bistable example `c+ = 32 u1 u2 + 3`, `c- = -16 u1 + 19`,
    /// giving `f = -32 (rho - 1/4)(rho - 1/2)(rho - 3/4)`. Offsets are
    /// `n1 = e_1`, `n2 = 2 e_1` for `d = 1` and `n1 = e_1`, `n2 = e_2` otherwise.
    pub fn bistable_example(d: usize) -> Self {
        let (n1, n2) = default_offsets(d);
        Self {
            a_plus: 32.0,
            b_plus: 0.0,
            c_plus: 3.0,
            a_minus: 0.0,
            b_minus: -16.0,
            c_minus: 19.0,
            n1,
            n2,
        }
    }

    /// Rates identically equal to `c+` (empty site) and `c-` (occupied site).
    pub fn constant(d: usize, c_plus: f64, c_minus: f64) -> Self {
        let (n1, n2) = default_offsets(d);
        Self {
            a_plus: 0.0,
            b_plus: 0.0,
            c_plus,
            a_minus: 0.0,
            b_minus: 0.0,
            c_minus,
            n1,
            n2,
        }
    }

    pub fn dim(&self) -> usize {
        self.n1.len()
    }

    /// `c+` as a multilinear function of the two neighbor values.
    #[inline]
    pub fn c_plus_at(&self, u1: f64, u2: f64) -> f64 {
        self.a_plus * u1 * u2 + self.b_plus * u1 + self.c_plus
    }

    #[inline]
    pub fn c_minus_at(&self, u1: f64, u2: f64) -> f64 {
        self.a_minus * u1 * u2 + self.b_minus * u1 + self.c_minus
    }

    /// `c = c+ (1 - u0) + c- u0`, the flip rate for a local pattern.
    #[inline]
    pub fn rate_at(&self, u0: f64, u1: f64, u2: f64) -> f64 {
        self.c_plus_at(u1, u2) * (1.0 - u0) + self.c_minus_at(u1, u2) * u0
    }

    /// `(1 - u0) c+ - u0 c-`, the pointwise reaction term.
    #[inline]
    pub fn reaction_at(&self, u0: f64, u1: f64, u2: f64) -> f64 {
        (1.0 - u0) * self.c_plus_at(u1, u2) - u0 * self.c_minus_at(u1, u2)
    }

    /// Maximum flip rate over the eight occupancy patterns.
    pub fn c_max(&self) -> f64 {
        let mut m = f64::NEG_INFINITY;
        for bits in 0..8u8 {
            let v = |k: u8| ((bits >> k) & 1) as f64;
            m = m.max(self.rate_at(v(0), v(1), v(2)));
        }
        m
    }

    /// Coefficients `[p0, p1, p2, p3]` of `f(rho) = sum p_k rho^k`.
    pub fn poly_coeffs(&self) -> [f64; 4] {
        [
            self.c_plus,
            self.b_plus - self.c_plus - self.c_minus,
            self.a_plus - self.b_plus - self.b_minus,
            -(self.a_plus + self.a_minus),
        ]
    }

    /// `f(rho)`.
    pub fn reaction_poly(&self, rho: f64) -> f64 {
        let [p0, p1, p2, p3] = self.poly_coeffs();
        ((p3 * rho + p2) * rho + p1) * rho + p0
    }

    /// `f'(rho)`.
    pub fn reaction_poly_derivative(&self, rho: f64) -> f64 {
        let [_, p1, p2, p3] = self.poly_coeffs();
        (3.0 * p3 * rho + 2.0 * p2) * rho + p1
    }

    /// Antiderivative of `f` vanishing at 0.
    pub fn reaction_antiderivative(&self, rho: f64) -> f64 {
        let [p0, p1, p2, p3] = self.poly_coeffs();
        (((p3 / 4.0 * rho + p2 / 3.0) * rho + p1 / 2.0) * rho + p0) * rho
    }

    /// `sup_{[0,1]} |f'|`.
    pub fn sup_abs_fprime(&self) -> f64 {
        let [_, _, p2, p3] = self.poly_coeffs();
        let mut m = self
            .reaction_poly_derivative(0.0)
            .abs()
            .max(self.reaction_poly_derivative(1.0).abs());
        if p3 != 0.0 {
            let v = -p2 / (3.0 * p3);
            if (0.0..=1.0).contains(&v) {
                m = m.max(self.reaction_poly_derivative(v).abs());
            }
        }
        m
    }

    /// Crude Lipschitz constant of `f^N` in the sup norm on `[0,1]^3`:
    /// `sup |f'| + 2 (|a+| + |a-| + |b+| + |b-|)`.
    pub fn lipschitz_bound(&self) -> f64 {
        self.sup_abs_fprime() + 2.0 * (self.a_plus.abs() + self.a_minus.abs() + self.b_plus.abs() + self.b_minus.abs())
    }

    /// `max_{u in [0,1]^3} |u_0 f^N|`, the constant of the energy estimate.
    ///
    /// For fixed `u_0 = s` the product is multilinear in the neighbor values,
    /// so the extremum sits at a corner `(u1, u2)`; there it is the quadratic
    /// `g(s) = A s - (A + B) s^2` with `A = c+`, `B = c-`.
    pub fn energy_constant(&self) -> f64 {
        let mut m: f64 = 0.0;
        for (u1, u2) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)] {
            let a = self.c_plus_at(u1, u2);
            let b = self.c_minus_at(u1, u2);
            let g = |s: f64| a * s - (a + b) * s * s;
            let mut cands = vec![0.0, 1.0];
            if a + b != 0.0 {
                let s = a / (2.0 * (a + b));
                if (0.0..=1.0).contains(&s) {
                    cands.push(s);
                }
            }
            for s in cands {
                m = m.max(g(s).abs());
            }
        }
        m
    }

    /// Checks offsets, rate positivity, bistability, monotonicity
    /// and balance, in that order.
    pub fn validate(&self) -> Result<BistableProfile, RateError> {
        let coeffs = [
            self.a_plus,
            self.b_plus,
            self.c_plus,
            self.a_minus,
            self.b_minus,
            self.c_minus,
        ];
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(RateError::NonFinite);
        }
        self.validate_offsets()?;
        for (u1, u2) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)] {
            let (p, m) = (self.c_plus_at(u1, u2), self.c_minus_at(u1, u2));
            if p <= 0.0 || m <= 0.0 {
                return Err(RateError::Positivity(format!(
                    "c+({u1},{u2}) = {p}, c-({u1},{u2}) = {m}"
                )));
            }
        }
        let profile = self.bistable_roots(0.0)?;
        if self.a_plus < 0.0 || self.b_plus < 0.0 || self.a_plus + self.b_plus < 0.0 {
            return Err(RateError::Monotonicity("c+ must be increasing on [0,1]^2".into()));
        }
        if self.a_minus > 0.0 || self.b_minus > 0.0 || self.a_minus + self.b_minus > 0.0 {
            return Err(RateError::Monotonicity("c- must be decreasing on [0,1]^2".into()));
        }
        let integral = self.reaction_antiderivative(profile.alpha2) - self.reaction_antiderivative(profile.alpha1);
        if integral.abs() > BALANCE_TOL {
            return Err(RateError::Balance { integral });
        }
        Ok(profile)
    }

    /// Offsets must be distinct, nonzero, of matching dimension, and each
    /// must have a strictly positive component.
    pub fn validate_offsets(&self) -> Result<(), RateError> {
        let d = self.n1.len();
        if d == 0 || self.n2.len() != d {
            return Err(RateError::Offsets(format!(
                "n1 and n2 must have the same positive length, got {} and {}",
                self.n1.len(),
                self.n2.len()
            )));
        }
        let zero = vec![0i64; d];
        if self.n1 == zero || self.n2 == zero || self.n1 == self.n2 {
            return Err(RateError::Offsets("{n1, n2, 0} must be pairwise distinct".into()));
        }
        for (name, n) in [("n1", &self.n1), ("n2", &self.n2)] {
            if !n.iter().any(|&c| c > 0) {
                return Err(RateError::Offsets(format!("{name} has no positive component")));
            }
        }
        Ok(())
    }

    /// Roots of `f + delta` in `(0,1)` with the stable/unstable sign pattern.
    /// Balance is not checked here.
    pub fn bistable_roots(&self, delta: f64) -> Result<BistableProfile, RateError> {
        let mut c = self.poly_coeffs();
        c[0] += delta;
        let roots = cubic_real_roots(c);
        if roots.len() != 3 {
            return Err(RateError::Bistability(format!(
                "f{} has {} real root(s), need 3",
                if delta == 0.0 {
                    String::new()
                } else {
                    format!(" + {delta}")
                },
                roots.len()
            )));
        }
        let (r0, r1, r2) = (roots[0], roots[1], roots[2]);
        if !(r0 > 0.0 && r2 < 1.0) {
            return Err(RateError::Bistability(format!(
                "roots {r0}, {r1}, {r2} not all in (0,1)"
            )));
        }
        if !(r1 - r0 > 0.0 && r2 - r1 > 0.0) {
            return Err(RateError::Bistability("repeated root".into()));
        }
        let fp = |r: f64| self.reaction_poly_derivative(r);
        if !(fp(r0) < 0.0 && fp(r2) < 0.0) {
            return Err(RateError::Bistability(format!(
                "outer roots must be stable: f'({r0}) = {}, f'({r2}) = {}",
                fp(r0),
                fp(r2)
            )));
        }
        Ok(BistableProfile {
            alpha1: r0,
            alpha_star: r1,
            alpha2: r2,
            c_lead: -c[3],
        })
    }

    /// Precomputes the neighbor tables `x + n1`, `x + n2` on a lattice.
    pub fn bind(&self, lattice: &TorusLattice) -> Result<LocalRates, RateError> {
        Ok(LocalRates {
            spec: self.clone(),
            n1: lattice.shift_table(&self.n1)?,
            n2: lattice.shift_table(&self.n2)?,
        })
    }

    /// `c_x(eta)`. Convenience wrapper; hot loops should use [`LocalRates`].
    pub fn glauber_rate(&self, cfg: &Configuration, x: usize) -> f64 {
        let lat = cfg.lattice();
        let e1 = cfg.value(lat.shift(x, &self.n1));
        let e2 = cfg.value(lat.shift(x, &self.n2));
        self.rate_at(cfg.value(x), e1, e2)
    }

    /// `f^N(x, u)`. Convenience wrapper; hot loops should use [`LocalRates`].
    pub fn reaction_discrete(&self, u: &ScalarField, x: usize) -> f64 {
        let lat = u.lattice();
        self.reaction_at(u.get(x), u.get(lat.shift(x, &self.n1)), u.get(lat.shift(x, &self.n2)))
    }
}

fn default_offsets(d: usize) -> (Vec<i64>, Vec<i64>) {
    let mut n1 = vec![0i64; d];
    let mut n2 = vec![0i64; d];
    n1[0] = 1;
    if d == 1 {
        n2[0] = 2;
    } else {
        n2[1] = 1;
    }
    (n1, n2)
}

/// A rate specification bound to a lattice.
#[derive(Clone, Debug)]
pub struct LocalRates {
    spec: RateSpec,
    n1: Vec<u32>,
    n2: Vec<u32>,
}

impl LocalRates {
    #[inline]
    pub fn spec(&self) -> &RateSpec {
        &self.spec
    }

    #[inline]
    pub fn n1(&self, x: usize) -> usize {
        self.n1[x] as usize
    }

    #[inline]
    pub fn n2(&self, x: usize) -> usize {
        self.n2[x] as usize
    }

    #[inline]
    pub fn glauber_rate(&self, cfg: &Configuration, x: usize) -> f64 {
        self.spec
            .rate_at(cfg.value(x), cfg.value(self.n1(x)), cfg.value(self.n2(x)))
    }

    #[inline]
    pub fn c_plus(&self, u: &[f64], x: usize) -> f64 {
        self.spec.c_plus_at(u[self.n1(x)], u[self.n2(x)])
    }

    #[inline]
    pub fn c_minus(&self, u: &[f64], x: usize) -> f64 {
        self.spec.c_minus_at(u[self.n1(x)], u[self.n2(x)])
    }

    /// `f^N(x, u)` on raw site values.
    #[inline]
    pub fn reaction(&self, u: &[f64], x: usize) -> f64 {
        self.spec.reaction_at(u[x], u[self.n1(x)], u[self.n2(x)])
    }
}

/// Real roots of `c0 + c1 x + c2 x^2 + c3 x^3` in increasing order.
///
/// Uses the trigonometric form when there are three real roots and Cardano
/// otherwise, then applies one Newton step to each root. Degenerate leading
/// coefficients fall back to the quadratic or linear formula.
pub fn cubic_real_roots(c: [f64; 4]) -> Vec<f64> {
    let [c0, c1, c2, c3] = c;
    let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Vec::new();
    }
    if c3.abs() <= 1e-14 * scale {
        return quadratic_real_roots(c0, c1, c2);
    }
    let (a, b, cc) = (c2 / c3, c1 / c3, c0 / c3);
    // x = t - a/3 gives t^3 + p t + q = 0.
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + cc;
    let shift = -a / 3.0;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    let tol = 1e-14 * (1.0 + (q / 2.0).powi(2) + (p / 3.0).abs().powi(3));
    let mut roots = if disc < -tol {
        let r = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * r)).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        (0..3)
            .map(|k| r * (phi - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() + shift)
            .collect::<Vec<_>>()
    } else if disc > tol {
        let s = disc.sqrt();
        vec![(-q / 2.0 + s).cbrt() + (-q / 2.0 - s).cbrt() + shift]
    } else if p.abs() < 1e-14 {
        vec![shift]
    } else {
        // Double root.
        let t1 = 3.0 * q / p;
        let t2 = -3.0 * q / (2.0 * p);
        vec![t1 + shift, t2 + shift]
    };
    let f = |x: f64| ((c3 * x + c2) * x + c1) * x + c0;
    let fp = |x: f64| (3.0 * c3 * x + 2.0 * c2) * x + c1;
    for r in roots.iter_mut() {
        let d = fp(*r);
        if d != 0.0 {
            *r -= f(*r) / d;
        }
    }
    roots.sort_by(|a, b| a.total_cmp(b));
    roots
}

fn quadratic_real_roots(c0: f64, c1: f64, c2: f64) -> Vec<f64> {
    let scale = c0.abs().max(c1.abs()).max(c2.abs());
    if c2.abs() <= 1e-14 * scale {
        return if c1 != 0.0 { vec![-c0 / c1] } else { Vec::new() };
    }
    let disc = c1 * c1 - 4.0 * c2 * c0;
    if disc < 0.0 {
        return Vec::new();
    }
    let s = disc.sqrt();
    let q = -0.5 * (c1 + c1.signum() * s);
    let mut r = if q == 0.0 { vec![0.0] } else { vec![q / c2, c0 / q] };
    r.sort_by(|a, b| a.total_cmp(b));
    r
}

//! Traveling waves `U'' + c U' + f(U) + delta = 0` connecting the outer
//! stable roots `U_-^*(delta) < U_+^*(delta)` of `f + delta`.
//!
//! The speed is found by two-sided shooting: one leg leaves `U_-^*` along the
//! unstable manifold (forward in `z`), the other leaves `U_+^*` along the
//! stable manifold (backward in `z`), and both stop at the midpoint level
//! `(U_-^* + U_+^*)/2`. The slope mismatch there is decreasing in `c` and is
//! bisected to zero. The profile is normalized by `U(0) = (U_-^* + U_+^*)/2`.

use thiserror::Error;

use crate::ode::{dopri_step, solve, OdeError, Tolerances};
use crate::rates::{RateError, RateSpec};

/// Points of the stored profile grid.
pub const GRID_POINTS: usize = 4096;
/// Half-width of the grid in units of the decay length `1/(sqrt(C/2)(alpha2 - alpha1))`.
pub const GRID_DECAY_LENGTHS: f64 = 12.0;
const MAX_BISECTIONS: usize = 200;
/// Initial offset from the rest states, relative to `U_+^* - U_-^*`.
const SEED_OFFSET: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum WaveError {
    #[error("f + delta lost its bistable root structure at delta = {delta}: {source}")]
    RootStructure { delta: f64, source: RateError },
    #[error("shooting did not converge after {MAX_BISECTIONS} bisections (residual {residual:e})")]
    NoConvergence { residual: f64 },
    #[error("shooting bracket [{lo}, {hi}] does not change sign")]
    Bracket { lo: f64, hi: f64 },
    #[error(transparent)]
    Ode(#[from] OdeError),
}

/// A monotone traveling wave sampled on a uniform `z` grid, with exponential
/// tails outside it.
#[derive(Clone, Debug)]
pub struct WaveSolution {
    pub delta: f64,
    pub speed: f64,
    pub u_minus: f64,
    pub u_plus: f64,
    /// Uniform grid on `[-L, L]`.
    pub z: Vec<f64>,
    pub u: Vec<f64>,
    /// `U'` on the grid.
    pub du: Vec<f64>,
    /// Growth rate of `U - U_-^*` as `z -> -inf`.
    pub lambda_left: f64,
    /// Decay rate (negative) of `U_+^* - U` as `z -> +inf`.
    pub lambda_right: f64,
    spec: RateSpec,
}

/// Description of one shooting leg.
struct Leg {
    /// Direction of integration in `z`.
    dir: f64,
    rest: f64,
    /// Signed offset from the rest state at `s = 0`.
    eps: f64,
    lambda: f64,
}

impl Leg {
    /// Seed in deviation coordinates.
    fn start(&self) -> [f64; 2] {
        [self.eps, self.lambda * self.eps]
    }

    /// Linearized tail `(U, U')` at `s` (behind the seed).
    fn tail(&self, s: f64) -> [f64; 2] {
        let e = self.eps * (self.lambda * s).exp();
        [self.rest + e, self.lambda * e]
    }
}

/// The wave ODE as a first-order system in the deviation `w = U - rest` from
/// a root of `f + delta`. Expanding `f` about the root keeps full relative
/// precision in `w` near the seed, where `rest + w` would round away most of
/// its digits; the constant term `f(rest) + delta` is zero up to round-off and
/// is dropped.
fn vector_field(spec: &RateSpec, c: f64, rest: f64) -> impl Fn(f64, &[f64], &mut [f64]) {
    let [_, k1, k2, k3] = spec.poly_coeffs();
    let p1 = k1 + rest * (2.0 * k2 + 3.0 * k3 * rest);
    let p2 = k2 + 3.0 * k3 * rest;
    let p3 = k3;
    move |_, y, dy| {
        let w = y[0];
        dy[0] = y[1];
        dy[1] = -c * y[1] - ((p3 * w + p2) * w + p1) * w;
    }
}

/// Outcome of a leg that ran to the midpoint level.
struct Crossing {
    /// `z`-distance (signed, along `dir`) from the seed to the crossing.
    s: f64,
    slope: f64,
}

impl WaveSolution {
    /// `U(z)` with cubic Hermite interpolation on the grid and exponential
    /// tails outside it.
    pub fn eval(&self, z: f64) -> f64 {
        let n = self.z.len();
        let (z0, zn) = (self.z[0], self.z[n - 1]);
        if z <= z0 {
            return self.u_minus + (self.u[0] - self.u_minus) * (self.lambda_left * (z - z0)).exp();
        }
        if z >= zn {
            return self.u_plus - (self.u_plus - self.u[n - 1]) * (self.lambda_right * (z - zn)).exp();
        }
        let h = self.z[1] - z0;
        let i = (((z - z0) / h) as usize).min(n - 2);
        let t = (z - self.z[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.u[i] + h10 * h * self.du[i] + h01 * self.u[i + 1] + h11 * h * self.du[i + 1]
    }

    /// `U'(z)`, same interpolation.
    pub fn derivative(&self, z: f64) -> f64 {
        let n = self.z.len();
        let (z0, zn) = (self.z[0], self.z[n - 1]);
        if z <= z0 {
            return self.lambda_left * (self.u[0] - self.u_minus) * (self.lambda_left * (z - z0)).exp();
        }
        if z >= zn {
            return -self.lambda_right * (self.u_plus - self.u[n - 1]) * (self.lambda_right * (z - zn)).exp();
        }
        let h = self.z[1] - z0;
        let i = (((z - z0) / h) as usize).min(n - 2);
        let t = (z - self.z[i]) / h;
        let t2 = t * t;
        let d00 = (6.0 * t2 - 6.0 * t) / h;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = (-6.0 * t2 + 6.0 * t) / h;
        let d11 = 3.0 * t2 - 2.0 * t;
        d00 * self.u[i] + d10 * self.du[i] + d01 * self.u[i + 1] + d11 * self.du[i + 1]
    }

    /// Max over interior grid points of `|U'' + c U' + f(U) + delta|` and
    /// `|(U)' - U'|`, with fourth-order central differences of the sampled
    /// `U'` and `U`. Differencing `U'` rather than `U` twice keeps the check
    /// from amplifying round-off by `1/h^2`.
    pub fn residual(&self) -> f64 {
        let h = self.z[1] - self.z[0];
        let d1 = |v: &[f64], i: usize| (-v[i + 2] + 8.0 * v[i + 1] - 8.0 * v[i - 1] + v[i - 2]) / (12.0 * h);
        (2..self.u.len() - 2)
            .map(|i| {
                let ode = d1(&self.du, i) + self.speed * self.du[i] + self.spec.reaction_poly(self.u[i]) + self.delta;
                let slope = d1(&self.u, i) - self.du[i];
                ode.abs().max(slope.abs())
            })
            .fold(0.0, f64::max)
    }

    /// `sup U'` over the grid.
    pub fn max_slope(&self) -> f64 {
        self.du.iter().copied().fold(0.0, f64::max)
    }

    /// Whether the sampled profile is strictly increasing.
    pub fn is_increasing(&self) -> bool {
        self.u.windows(2).all(|w| w[1] > w[0])
    }
}

/// Half-width `L` of the profile grid.
pub fn grid_half_width(spec: &RateSpec) -> Result<f64, WaveError> {
    let p = spec
        .bistable_roots(0.0)
        .map_err(|source| WaveError::RootStructure { delta: 0.0, source })?;
    Ok(GRID_DECAY_LENGTHS / ((p.c_lead / 2.0).sqrt() * (p.alpha2 - p.alpha1)))
}

/// Solves for the wave and its speed at the given `delta`.
pub fn solve_wave(spec: &RateSpec, delta: f64) -> Result<WaveSolution, WaveError> {
    let roots = spec
        .bistable_roots(delta)
        .map_err(|source| WaveError::RootStructure { delta, source })?;
    let (lo, hi) = (roots.alpha1, roots.alpha2);
    let mid = 0.5 * (lo + hi);
    let mu_lo = -spec.reaction_poly_derivative(lo);
    let mu_hi = -spec.reaction_poly_derivative(hi);
    let eps = SEED_OFFSET * (hi - lo);
    let tol = Tolerances {
        rtol: 1e-13,
        // Pure relative control: the legs start 1e-9 away from the rest
        // states, where any absolute floor would dominate.
        atol: 1e-20,
        h_max: 0.05,
        max_steps: 200_000,
    };

    let left_leg = |c: f64| Leg {
        dir: 1.0,
        rest: lo,
        eps,
        lambda: 0.5 * (-c + (c * c + 4.0 * mu_lo).sqrt()),
    };
    let right_leg = |c: f64| Leg {
        dir: -1.0,
        rest: hi,
        eps: -eps,
        lambda: 0.5 * (-c - (c * c + 4.0 * mu_hi).sqrt()),
    };
    // Runs a leg until `U` crosses `mid`; `None` if it turns back first.
    let shoot = |leg: &Leg, c: f64| -> Result<Option<Crossing>, WaveError> {
        let f = vector_field(spec, c, leg.rest);
        let span = 100.0 * grid_half_width(spec)?;
        let target = mid - leg.rest;
        let crossed = |w: f64| (w - target) * target.signum() >= 0.0;
        let stall = 1e-12 * (hi - lo);
        let mut turned = false;
        let out = solve(&f, 0.0, &leg.start(), leg.dir * span, &tol, |_, _, _, y| {
            // A leg whose slope dies out before the midpoint is stuck at the
            // middle root and counts as turned back.
            turned = y[1] <= stall;
            !(turned || crossed(y[0]))
        })?;
        if turned || !out.stopped {
            return Ok(None);
        }
        // Bisect the (signed) length of the last step so it ends on `mid`.
        let (mut a, mut b) = (0.0, out.t - out.t_prev);
        for _ in 0..200 {
            let h = 0.5 * (a + b);
            if h == a || h == b {
                break;
            }
            let (yh, _) = dopri_step(&mut &f, out.t_prev, &out.y_prev, h);
            if crossed(yh[0]) {
                b = h;
            } else {
                a = h;
            }
        }
        let (y, _) = dopri_step(&mut &f, out.t_prev, &out.y_prev, b);
        Ok(Some(Crossing {
            s: out.t_prev + b,
            slope: y[1],
        }))
    };
    // Slope mismatch at the midpoint; a failed leg maps to the sign its
    // failure implies.
    let mismatch = |c: f64| -> Result<f64, WaveError> {
        let l = shoot(&left_leg(c), c)?;
        let r = shoot(&right_leg(c), c)?;
        Ok(match (l, r) {
            (None, _) => -1.0,
            (Some(_), None) => 1.0,
            (Some(l), Some(r)) => l.slope - r.slope,
        })
    };

    // Grow a symmetric bracket from |c| = 1 up to a crude a-priori bound;
    // legs at extreme speeds are slow and expensive to integrate.
    let c_bound = 4.0 * spec.sup_abs_fprime().sqrt() + 1.0;
    let mut width: f64 = 1.0;
    let (mut a, mut b) = loop {
        let w = width.min(c_bound);
        if mismatch(-w)? > 0.0 && mismatch(w)? < 0.0 {
            break (-w, w);
        }
        if w >= c_bound {
            return Err(WaveError::Bracket { lo: -w, hi: w });
        }
        width *= 2.0;
    };
    let mut c = 0.5 * (a + b);
    let mut converged = false;
    let mut last = f64::INFINITY;
    // Probe c = 0 first: balanced specs land there exactly.
    let f0 = mismatch(0.0)?;
    if f0 == 0.0 {
        c = 0.0;
        converged = true;
    } else if f0 > 0.0 {
        a = 0.0;
    } else {
        b = 0.0;
    }
    if !converged {
        for _ in 0..MAX_BISECTIONS {
            c = 0.5 * (a + b);
            let fc = mismatch(c)?;
            last = fc;
            if fc == 0.0 || (b - a) <= 4.0 * f64::EPSILON * c_bound {
                converged = true;
                break;
            }
            if fc > 0.0 {
                a = c;
            } else {
                b = c;
            }
        }
    }
    if !converged {
        return Err(WaveError::NoConvergence { residual: last });
    }
    let l_leg = left_leg(c);
    let r_leg = right_leg(c);
    let (Some(lx), Some(rx)) = (shoot(&l_leg, c)?, shoot(&r_leg, c)?) else {
        return Err(WaveError::NoConvergence { residual: last });
    };

    let half = grid_half_width(spec)?;
    let n = GRID_POINTS;
    let h = 2.0 * half / (n - 1) as f64;
    let z: Vec<f64> = (0..n).map(|i| -half + i as f64 * h).collect();
    let mut u = vec![0.0; n];
    let mut du = vec![0.0; n];
    // Left half: z = s - s_cross, integrated forward from the seed.
    let split = z.partition_point(|&v| v <= 0.0);
    sample_leg(
        spec,
        c,
        &l_leg,
        lx.s,
        &z[..split],
        &mut u[..split],
        &mut du[..split],
        &tol,
    )?;
    // Right half: integrated backward from the seed, visiting grid points in
    // decreasing order.
    let right_z: Vec<f64> = z[split..].iter().rev().copied().collect();
    let mut ru = vec![0.0; right_z.len()];
    let mut rdu = vec![0.0; right_z.len()];
    sample_leg(spec, c, &r_leg, rx.s, &right_z, &mut ru, &mut rdu, &tol)?;
    for (k, i) in (split..n).rev().enumerate() {
        u[i] = ru[k];
        du[i] = rdu[k];
    }
    Ok(WaveSolution {
        delta,
        speed: c,
        u_minus: lo,
        u_plus: hi,
        z,
        u,
        du,
        lambda_left: l_leg.lambda,
        lambda_right: r_leg.lambda,
        spec: spec.clone(),
    })
}

/// Samples a leg at the grid points `zs` (ordered along the leg direction),
/// where `z = s - s_cross`.
#[allow(clippy::too_many_arguments)]
fn sample_leg(
    spec: &RateSpec,
    c: f64,
    leg: &Leg,
    s_cross: f64,
    zs: &[f64],
    u: &mut [f64],
    du: &mut [f64],
    tol: &Tolerances,
) -> Result<(), WaveError> {
    let f = vector_field(spec, c, leg.rest);
    let mut s = 0.0;
    let mut y = leg.start().to_vec();
    for (k, &zk) in zs.iter().enumerate() {
        let target = zk + s_cross;
        if (target - s) * leg.dir <= 0.0 {
            // Still on the linear tail before the seed.
            let t = leg.tail(target);
            u[k] = t[0];
            du[k] = t[1];
            continue;
        }
        let out = solve(&f, s, &y, target, tol, |_, _, _, _| true)?;
        s = target;
        y = out.y;
        u[k] = leg.rest + y[0];
        du[k] = y[1];
    }
    Ok(())
}

/// `U(z) = alpha_star + m tanh(m sqrt(C/2) z)` with `m = (alpha2 - alpha1)/2`,
/// the standing wave of a balanced cubic `-C (rho - alpha1)(rho - alpha_star)(rho - alpha2)`
/// with `alpha_star` the midpoint of the stable roots.
pub fn standing_wave_closed_form(spec: &RateSpec) -> Result<impl Fn(f64) -> f64, RateError> {
    let p = spec.validate()?;
    let m = 0.5 * (p.alpha2 - p.alpha1);
    let k = m * (p.c_lead / 2.0).sqrt();
    let a = p.alpha_star;
    Ok(move |z: f64| a + m * (k * z).tanh())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> RateSpec {
        RateSpec::bistable_example(1)
    }

    #[test]
    fn grid_width_for_example() {
        assert!((grid_half_width(&spec()).unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn closed_form_solves_the_ode() {
        let u = standing_wave_closed_form(&spec()).unwrap();
        let s = spec();
        // Exact derivatives of 1/2 + tanh(z)/4.
        for i in 0..=400 {
            let z = -6.0 + 0.03 * i as f64;
            let th = z.tanh();
            let d2 = -0.5 * th * (1.0 - th * th);
            assert!((d2 + s.reaction_poly(u(z))).abs() < 1e-12);
            assert!((u(z) - (0.5 + 0.25 * th)).abs() < 1e-15);
        }
    }

    #[test]
    fn standing_wave_matches_closed_form() {
        let w = solve_wave(&spec(), 0.0).unwrap();
        assert!(w.speed.abs() <= 1e-8, "speed {}", w.speed);
        let err =
            w.z.iter()
                .zip(&w.u)
                .map(|(z, u)| (u - (0.5 + 0.25 * z.tanh())).abs())
                .fold(0.0, f64::max);
        assert!(err <= 1e-6, "sup error {err}");
        assert!(w.residual() <= 1e-6);
        assert!(w.is_increasing());
        assert!((w.eval(0.0) - 0.5).abs() < 1e-12);
        for z in [-20.0, -7.5, -1.3, 0.77, 6.2, 15.0] {
            assert!((w.eval(z) - (0.5 + 0.25 * f64::tanh(z))).abs() < 1e-6, "z={z}");
            let th = f64::tanh(z);
            assert!((w.derivative(z) - 0.25 * (1.0 - th * th)).abs() < 1e-6, "z={z}");
        }
    }

    #[test]
    fn speed_is_odd_and_monotone() {
        let s = spec();
        let mut speeds = Vec::new();
        for delta in [-0.1, -0.05, 0.05, 0.1] {
            let w = solve_wave(&s, delta).unwrap();
            assert!(w.residual() <= 1e-6, "delta={delta}: {}", w.residual());
            assert!(w.is_increasing());
            assert!((w.eval(-100.0) - w.u_minus).abs() < 1e-9);
            assert!((w.eval(100.0) - w.u_plus).abs() < 1e-9);
            speeds.push(w.speed);
        }
        assert!(speeds.windows(2).all(|p| p[1] != p[0]));
        assert!(speeds
            .windows(2)
            .all(|p| (p[1] - p[0]).signum() == (speeds[1] - speeds[0]).signum()));
        assert!((speeds[0] + speeds[3]).abs() < 1e-8);
        assert!((speeds[1] + speeds[2]).abs() < 1e-8);
    }

    #[test]
    fn limits_are_outer_roots() {
        let s = spec();
        let w = solve_wave(&s, 0.08).unwrap();
        let r = s.bistable_roots(0.08).unwrap();
        assert!((w.u_minus - r.alpha1).abs() < 1e-12 && (w.u_plus - r.alpha2).abs() < 1e-12);
        assert!((w.eval(-1e3) - r.alpha1).abs() < 1e-6);
        assert!((w.eval(1e3) - r.alpha2).abs() < 1e-6);
        // Twelve decay lengths leave the grid ends within e^{-12} of the roots.
        assert!((w.u[0] - r.alpha1).abs() < 1e-5);
    }

    #[test]
    fn u_delta_nonnegative() {
        let s = spec();
        let h = 1e-3;
        for delta in [-0.1, 0.0, 0.1] {
            let a = solve_wave(&s, delta - h).unwrap();
            let b = solve_wave(&s, delta + h).unwrap();
            for i in (-400..=400).map(|i| i as f64 * 0.02) {
                assert!(b.eval(i) - a.eval(i) >= -1e-9, "delta={delta}, z={i}");
            }
        }
    }

    #[test]
    fn rejects_large_delta() {
        assert!(matches!(solve_wave(&spec(), 0.2), Err(WaveError::RootStructure { .. })));
        assert!(solve_wave(&spec(), 0.19).is_ok());
    }
}

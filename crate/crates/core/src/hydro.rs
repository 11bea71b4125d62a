//! The discretized hydrodynamic equation
//!
//! ```text
//! d/dt u(x) = Delta^N u(x) + K f^N(x, u)
//! ```
//!
//! on `T_N^d`, with explicit Euler or classical RK4 time stepping, and the
//! qualitative estimates it satisfies: the comparison principle, the gradient
//! bound and the energy inequality.

use rayon::prelude::*;
use thiserror::Error;

use crate::lattice::{sup_gradient_norm, ScalarField, TorusLattice};
use crate::rates::{LocalRates, RateError, RateSpec};

/// `|u| > BLOWUP` at any site aborts the integration.
pub const BLOWUP: f64 = 2.0;
/// Sitewise tolerance of the comparison check.
pub const COMPARISON_TOL: f64 = 1e-9;

const PAR_THRESHOLD: usize = 4096;
const CHUNK: usize = 1024;

#[derive(Debug, Error, PartialEq)]
pub enum HydroError {
    #[error("time step {dt} exceeds the stability bound {bound}")]
    UnstableStep { dt: f64, bound: f64 },
    #[error("output times must be finite, nonnegative and increasing")]
    BadGrid,
    #[error("solution left [-{BLOWUP}, {BLOWUP}] at t = {t} (site {site}, value {value})")]
    BlowUp { t: f64, site: usize, value: f64 },
    #[error("initial gradient {sup} exceeds C0 K = {bound}")]
    InitialGradient { sup: f64, bound: f64 },
    #[error("K must be positive for the gradient fit")]
    NonPositiveK,
    #[error("fields live on different lattices")]
    LatticeMismatch,
    #[error(transparent)]
    Rates(#[from] RateError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Scheme {
    ExplicitEuler,
    #[default]
    Rk4,
}

/// `0.9 / (4 d N^2 + K L_f)`.
pub fn stable_dt(lattice: &TorusLattice, spec: &RateSpec, k: f64) -> f64 {
    let n = lattice.side() as f64;
    0.9 / (4.0 * lattice.dim() as f64 * n * n + k * spec.lipschitz_bound())
}

/// The right-hand side of the equation, bound to a lattice.
#[derive(Clone, Debug)]
pub struct HydroRhs {
    lattice: TorusLattice,
    rates: LocalRates,
    k: f64,
    n2: f64,
}

impl HydroRhs {
    pub fn new(lattice: &TorusLattice, spec: &RateSpec, k: f64) -> Result<Self, HydroError> {
        let n = lattice.side() as f64;
        Ok(Self {
            lattice: lattice.clone(),
            rates: spec.bind(lattice)?,
            k,
            n2: n * n,
        })
    }

    #[inline]
    fn at(&self, u: &[f64], x: usize) -> f64 {
        let lat = &self.lattice;
        let mut lap = 0.0;
        for i in 0..lat.dim() {
            lap += u[lat.forward(x, i)] + u[lat.backward(x, i)];
        }
        lap -= 2.0 * lat.dim() as f64 * u[x];
        self.n2 * lap + self.k * self.rates.reaction(u, x)
    }

    /// Writes `Delta^N u + K f^N(., u)` into `out`.
    pub fn eval(&self, u: &[f64], out: &mut [f64]) {
        if u.len() < PAR_THRESHOLD {
            for (x, o) in out.iter_mut().enumerate() {
                *o = self.at(u, x);
            }
        } else {
            out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
                for (j, o) in chunk.iter_mut().enumerate() {
                    *o = self.at(u, c * CHUNK + j);
                }
            });
        }
    }
}

/// Instantaneous dissipation `N^2 sum_{|x-y|=1} (u_x - u_y)^2` over ordered
/// neighbor pairs.
pub fn dissipation(u: &ScalarField) -> f64 {
    let lat = u.lattice();
    let n = lat.side() as f64;
    let v = u.values();
    let mut acc = 0.0;
    for x in 0..lat.site_count() {
        for i in 0..lat.dim() {
            let g = v[lat.forward(x, i)] - v[x];
            acc += g * g;
        }
    }
    // Each unordered bond appears twice in the ordered sum.
    2.0 * n * n * acc
}

/// A solution sampled at output times.
#[derive(Clone, Debug)]
pub struct HydroRun {
    pub spec: RateSpec,
    pub k: f64,
    pub dt: f64,
    pub scheme: Scheme,
    pub times: Vec<f64>,
    pub fields: Vec<ScalarField>,
    pub steps: usize,
}

impl HydroRun {
    pub fn lattice(&self) -> &TorusLattice {
        self.fields[0].lattice()
    }

    pub fn final_field(&self) -> &ScalarField {
        self.fields.last().expect("run stores at least the initial field")
    }

    /// `sup_x ||grad^N u(t, x)||` at each output time.
    pub fn sup_gradients(&self) -> Vec<f64> {
        self.fields.par_iter().map(sup_gradient_norm).collect()
    }
}

/// Integrates from `u0` at `t = 0`, storing the field at `t = 0` and at
/// every entry of `output_times`. Between outputs the interval is split into
/// equal steps no longer than `dt` (default: the stability bound).
pub fn integrate(
    u0: &ScalarField,
    spec: &RateSpec,
    k: f64,
    output_times: &[f64],
    dt: Option<f64>,
    scheme: Scheme,
) -> Result<HydroRun, HydroError> {
    let lat = u0.lattice();
    let bound = stable_dt(lat, spec, k);
    let dt = dt.unwrap_or(bound);
    if !(dt > 0.0 && dt <= bound * (1.0 + 1e-12)) {
        return Err(HydroError::UnstableStep { dt, bound });
    }
    let mut times = vec![0.0];
    for &t in output_times {
        if !t.is_finite() || t < 0.0 {
            return Err(HydroError::BadGrid);
        }
        if t == 0.0 && times.len() == 1 {
            continue;
        }
        if t <= *times.last().unwrap() {
            return Err(HydroError::BadGrid);
        }
        times.push(t);
    }
    let rhs = HydroRhs::new(lat, spec, k)?;
    let n = lat.site_count();
    let mut u = u0.values().to_vec();
    let mut buf = Buffers::new(n);
    let mut fields = vec![u0.clone()];
    let mut t = 0.0;
    let mut steps = 0;
    for &t_out in &times[1..] {
        let span = t_out - t;
        let m = (span / dt).ceil().max(1.0) as usize;
        let h = span / m as f64;
        for s in 0..m {
            match scheme {
                Scheme::ExplicitEuler => euler_step(&rhs, &mut u, h, &mut buf),
                Scheme::Rk4 => rk4_step(&rhs, &mut u, h, &mut buf),
            }
            steps += 1;
            if let Some((site, &value)) = u.iter().enumerate().find(|(_, v)| !(v.abs() <= BLOWUP)) {
                return Err(HydroError::BlowUp {
                    t: t + (s + 1) as f64 * h,
                    site,
                    value,
                });
            }
        }
        t = t_out;
        fields.push(ScalarField::from_values(lat, u.clone()).expect("same lattice"));
    }
    Ok(HydroRun {
        spec: spec.clone(),
        k,
        dt,
        scheme,
        times,
        fields,
        steps,
    })
}

struct Buffers {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Buffers {
    fn new(n: usize) -> Self {
        Self {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }
}

fn axpy(out: &mut [f64], u: &[f64], h: f64, k: &[f64]) {
    if u.len() < PAR_THRESHOLD {
        for ((o, a), b) in out.iter_mut().zip(u).zip(k) {
            *o = a + h * b;
        }
    } else {
        out.par_chunks_mut(CHUNK)
            .zip(u.par_chunks(CHUNK).zip(k.par_chunks(CHUNK)))
            .for_each(|(o, (a, b))| {
                for ((o, a), b) in o.iter_mut().zip(a).zip(b) {
                    *o = a + h * b;
                }
            });
    }
}

fn euler_step(rhs: &HydroRhs, u: &mut Vec<f64>, h: f64, b: &mut Buffers) {
    rhs.eval(u, &mut b.k1);
    axpy(&mut b.tmp, u, h, &b.k1);
    std::mem::swap(u, &mut b.tmp);
}

fn rk4_step(rhs: &HydroRhs, u: &mut Vec<f64>, h: f64, b: &mut Buffers) {
    rhs.eval(u, &mut b.k1);
    axpy(&mut b.tmp, u, 0.5 * h, &b.k1);
    rhs.eval(&b.tmp, &mut b.k2);
    axpy(&mut b.tmp, u, 0.5 * h, &b.k2);
    rhs.eval(&b.tmp, &mut b.k3);
    axpy(&mut b.tmp, u, h, &b.k3);
    rhs.eval(&b.tmp, &mut b.k4);
    let combine = |o: &mut f64, a: f64, k1: f64, k2: f64, k3: f64, k4: f64| {
        *o = a + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    };
    if u.len() < PAR_THRESHOLD {
        for (i, o) in b.tmp.iter_mut().enumerate() {
            combine(o, u[i], b.k1[i], b.k2[i], b.k3[i], b.k4[i]);
        }
    } else {
        let (k1, k2, k3, k4) = (&b.k1, &b.k2, &b.k3, &b.k4);
        let uu: &[f64] = u;
        b.tmp.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
            for (j, o) in chunk.iter_mut().enumerate() {
                let i = c * CHUNK + j;
                combine(o, uu[i], k1[i], k2[i], k3[i], k4[i]);
            }
        });
    }
    std::mem::swap(u, &mut b.tmp);
}

/// Result of [`check_comparison`].
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    /// `max_{t,x} (u_-(t,x) - u_+(t,x))`, or 0 if the ordering is strict.
    pub max_violation: f64,
    pub holds: bool,
}

/// Integrates both initial data with the same scheme and step and checks
/// `u_-(t) <= u_+(t) + tol` at every output time.
pub fn check_comparison(
    u_minus0: &ScalarField,
    u_plus0: &ScalarField,
    spec: &RateSpec,
    k: f64,
    output_times: &[f64],
    dt: Option<f64>,
    scheme: Scheme,
) -> Result<ComparisonReport, HydroError> {
    if u_minus0.lattice() != u_plus0.lattice() {
        return Err(HydroError::LatticeMismatch);
    }
    let lo = integrate(u_minus0, spec, k, output_times, dt, scheme)?;
    let hi = integrate(u_plus0, spec, k, output_times, dt, scheme)?;
    let mut worst: f64 = 0.0;
    for (a, b) in lo.fields.iter().zip(&hi.fields) {
        for (x, y) in a.values().iter().zip(b.values()) {
            worst = worst.max(x - y);
        }
    }
    Ok(ComparisonReport {
        max_violation: worst,
        holds: worst <= COMPARISON_TOL,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradientReport {
    pub times: Vec<f64>,
    pub sup_gradient: Vec<f64>,
    pub c0: f64,
    /// Smallest `C >= 0` with `sup_gradient(t) <= K (C0 + C sqrt(t))` on the grid.
    pub c_fit: f64,
}

/// Checks `||grad u0|| <= C0 K` and fits the growth constant of the bound
/// `||grad^N u(t)|| <= K (C0 + C sqrt(t))`.
pub fn gradient_report(run: &HydroRun, c0: f64, k: f64) -> Result<GradientReport, HydroError> {
    if !(k > 0.0) {
        return Err(HydroError::NonPositiveK);
    }
    let sup = run.sup_gradients();
    if sup[0] > c0 * k * (1.0 + 1e-12) {
        return Err(HydroError::InitialGradient {
            sup: sup[0],
            bound: c0 * k,
        });
    }
    let c_fit = run
        .times
        .iter()
        .zip(&sup)
        .filter(|(t, _)| **t > 0.0)
        .map(|(t, g)| (g / k - c0) / t.sqrt())
        .fold(0.0, f64::max);
    Ok(GradientReport {
        times: run.times.clone(),
        sup_gradient: sup,
        c0,
        c_fit,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyReport {
    pub times: Vec<f64>,
    /// `1/2 sum u(T)^2 + int_0^T N^2 sum_{|x-y|=1} (u_x - u_y)^2 dt` with the
    /// time integral by the trapezoid rule on the output grid.
    pub lhs: Vec<f64>,
    /// `C K N^d T + N^d / 2` with `C = max |u_x f^N|` on `[0,1]^3`.
    pub rhs: Vec<f64>,
    /// The trapezoid time integral of the dissipation alone.
    pub dissipation_integral: Vec<f64>,
    pub holds: bool,
}

/// Evaluates both sides of the energy inequality at every output time.
pub fn energy_report(run: &HydroRun) -> EnergyReport {
    let sites = run.lattice().site_count() as f64;
    let c = run.spec.energy_constant();
    let diss: Vec<f64> = run.fields.par_iter().map(dissipation).collect();
    let mut integral = 0.0;
    let mut lhs = Vec::with_capacity(run.times.len());
    let mut rhs = Vec::with_capacity(run.times.len());
    let mut dint = Vec::with_capacity(run.times.len());
    for (i, (&t, u)) in run.times.iter().zip(&run.fields).enumerate() {
        if i > 0 {
            integral += 0.5 * (t - run.times[i - 1]) * (diss[i] + diss[i - 1]);
        }
        let half_sq: f64 = 0.5 * u.values().iter().map(|v| v * v).sum::<f64>();
        lhs.push(half_sq + integral);
        rhs.push(c * run.k * sites * t + 0.5 * sites);
        dint.push(integral);
    }
    let holds = lhs.iter().zip(&rhs).all(|(l, r)| l <= r);
    EnergyReport {
        times: run.times.clone(),
        lhs,
        rhs,
        dissipation_integral: dint,
        holds,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::{solve_to, Tolerances};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn spec(d: usize) -> RateSpec {
        RateSpec::bistable_example(d)
    }

    fn grid(t_end: f64, n: usize) -> Vec<f64> {
        (1..=n).map(|i| t_end * i as f64 / n as f64).collect()
    }

    #[test]
    fn equilibrium_is_stationary() {
        let lat = TorusLattice::new(1, 32).unwrap();
        let u0 = ScalarField::constant(&lat, 0.25);
        let run = integrate(&u0, &spec(1), 5.0, &grid(0.5, 5), None, Scheme::Rk4).unwrap();
        for f in &run.fields {
            assert!(f.values().iter().all(|v| (v - 0.25).abs() < 1e-14));
        }
    }

    #[test]
    fn rejects_unstable_step() {
        let lat = TorusLattice::new(1, 32).unwrap();
        let u0 = ScalarField::constant(&lat, 0.25);
        let err = integrate(&u0, &spec(1), 1.0, &[0.1], Some(1e-2), Scheme::Rk4).unwrap_err();
        assert!(matches!(err, HydroError::UnstableStep { .. }));
    }

    #[test]
    fn heat_spike_matches_spectral_solution() {
        let n = 16;
        let lat = TorusLattice::new(1, n).unwrap();
        let mut v = vec![0.0; n];
        v[0] = 1.0;
        let u0 = ScalarField::from_values(&lat, v).unwrap();
        let t = 0.01;
        // At the stability bound the stiffest mode sits at lambda dt = 0.9,
        // where RK4 is accurate only to ~1e-5; a quarter step suffices.
        let dt = stable_dt(&lat, &spec(1), 0.0) / 4.0;
        let run = integrate(&u0, &spec(1), 0.0, &[t], Some(dt), Scheme::Rk4).unwrap();
        // p^N(t, x, 0) = (1/N) sum_k exp(-lambda_k t) cos(2 pi k x / N),
        // lambda_k = 4 N^2 sin^2(pi k / N).
        let nf = n as f64;
        for x in 0..n {
            let p: f64 = (0..n)
                .map(|k| {
                    let lam = 4.0 * nf * nf * (PI * k as f64 / nf).sin().powi(2);
                    (-lam * t).exp() * (2.0 * PI * (k * x) as f64 / nf).cos()
                })
                .sum::<f64>()
                / nf;
            assert!(
                (run.final_field().get(x) - p).abs() <= 1e-6,
                "x={x}: {} vs {p}",
                run.final_field().get(x)
            );
        }
    }

    #[test]
    fn low_state_increases_to_alpha1() {
        let lat = TorusLattice::new(1, 16).unwrap();
        let u0 = ScalarField::constant(&lat, 0.1);
        let run = integrate(&u0, &spec(1), 1.0, &grid(1.0, 20), None, Scheme::Rk4).unwrap();
        let means: Vec<f64> = run.fields.iter().map(|f| f.get(0)).collect();
        assert!(means.windows(2).all(|w| w[1] > w[0] && w[1] < 0.25));
    }

    #[test]
    fn constant_runs_match_scalar_ode() {
        let lat = TorusLattice::new(2, 8).unwrap();
        let k = 3.0;
        let s = spec(2);
        for rho0 in [0.1, 0.45, 0.62, 0.9] {
            let u0 = ScalarField::constant(&lat, rho0);
            let run = integrate(&u0, &s, k, &[0.5], None, Scheme::Rk4).unwrap();
            let exact = solve_to(
                |_, y, dy| dy[0] = k * s.reaction_poly(y[0]),
                0.0,
                &[rho0],
                0.5,
                &Tolerances::default(),
            )
            .unwrap()[0];
            let got = run.final_field();
            assert!(got.values().iter().all(|v| (v - exact).abs() < 1e-8), "rho0={rho0}");
        }
    }

    #[test]
    fn euler_converges_at_first_order_to_rk4() {
        let lat = TorusLattice::new(1, 16).unwrap();
        let s = spec(1);
        let k = 4.0;
        let u0 = ScalarField::from_fn(&lat, |v| 0.5 + 0.3 * (2.0 * PI * v[0]).sin());
        let t = 0.05;
        let reference = integrate(&u0, &s, k, &[t], None, Scheme::Rk4).unwrap();
        let dt0 = stable_dt(&lat, &s, k);
        let err = |dt: f64| {
            let e = integrate(&u0, &s, k, &[t], Some(dt), Scheme::ExplicitEuler).unwrap();
            e.final_field()
                .values()
                .iter()
                .zip(reference.final_field().values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(dt0), err(dt0 / 2.0));
        let order = (e1 / e2).log2();
        assert!(order >= 0.9, "order {order}");
    }

    #[test]
    fn invariant_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (d, n) in [(1, 16), (1, 64), (2, 16), (2, 64)] {
            let lat = TorusLattice::new(d, n).unwrap();
            let u0 = ScalarField::from_values(
                &lat,
                (0..lat.site_count()).map(|_| rng.random_range(0.1..0.9)).collect(),
            )
            .unwrap();
            let run = integrate(&u0, &spec(d), 1.0, &grid(1.0, 10), None, Scheme::Rk4).unwrap();
            for f in &run.fields {
                assert!(f.min() >= 0.1 - 1e-12 && f.max() <= 0.9 + 1e-12, "d={d} N={n}");
            }
        }
    }

    #[test]
    fn comparison_examples() {
        let lat = TorusLattice::new(1, 32).unwrap();
        let s = spec(1);
        let a = ScalarField::from_fn(&lat, |v| 0.4 + 0.2 * (2.0 * PI * v[0]).cos());
        let r = check_comparison(&a, &a, &s, 2.0, &grid(0.2, 4), None, Scheme::Rk4).unwrap();
        assert_eq!(r.max_violation, 0.0);
        let lo = ScalarField::constant(&lat, 0.3);
        let hi = ScalarField::constant(&lat, 0.6);
        for scheme in [Scheme::Rk4, Scheme::ExplicitEuler] {
            let r = check_comparison(&lo, &hi, &s, 1.0, &grid(0.5, 10), None, scheme).unwrap();
            assert!(r.holds);
        }
    }

    #[test]
    fn gradient_reports() {
        let lat = TorusLattice::new(1, 32).unwrap();
        let run = integrate(
            &ScalarField::constant(&lat, 0.6),
            &spec(1),
            2.0,
            &grid(0.1, 4),
            None,
            Scheme::Rk4,
        )
        .unwrap();
        let g = gradient_report(&run, 0.0, 2.0).unwrap();
        assert!(g.sup_gradient.iter().all(|&v| v < 1e-12));
        assert!(g.c_fit < 1e-10);

        let u0 = ScalarField::from_fn(&lat, |v| 0.5 + 0.4 * (2.0 * PI * v[0]).sin());
        let heat = integrate(&u0, &spec(1), 0.0, &grid(0.02, 10), None, Scheme::Rk4).unwrap();
        let sup = heat.sup_gradients();
        assert!(sup.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(gradient_report(&heat, 1.0, 0.0).is_err());
        let tight = gradient_report(&heat, 0.1, 1.0);
        assert!(matches!(tight, Err(HydroError::InitialGradient { .. })));
    }

    #[test]
    fn energy_identity_without_reaction() {
        let lat = TorusLattice::new(1, 16).unwrap();
        let u0 = ScalarField::from_fn(&lat, |v| {
            0.5 + 0.3 * (2.0 * PI * v[0]).sin() + 0.1 * (6.0 * PI * v[0]).cos()
        });
        // The trapezoid rule on the output grid dominates the error, so
        // output every (small) step.
        let dt = stable_dt(&lat, &spec(1), 0.0) / 64.0;
        let outs: Vec<f64> = (1..=1000).map(|i| i as f64 * dt).collect();
        let run = integrate(&u0, &spec(1), 0.0, &outs, Some(dt), Scheme::Rk4).unwrap();
        let e = energy_report(&run);
        let half0: f64 = 0.5 * u0.values().iter().map(|v| v * v).sum::<f64>();
        let half_t: f64 = 0.5 * run.final_field().values().iter().map(|v| v * v).sum::<f64>();
        let d = *e.dissipation_integral.last().unwrap();
        // d/dt (1/2) sum u^2 = -(1/2) D(t) for the ordered-pair dissipation.
        assert!((half_t + 0.5 * d - half0).abs() < 1e-6, "{}", half_t + 0.5 * d - half0);
        assert!(e.holds);
    }

    #[test]
    fn energy_inequality_examples() {
        let lat = TorusLattice::new(1, 64).unwrap();
        let run = integrate(
            &ScalarField::constant(&lat, 0.0),
            &spec(1),
            1.0,
            &grid(0.1, 5),
            None,
            Scheme::Rk4,
        )
        .unwrap();
        let e = energy_report(&run);
        assert!(e.holds);
        assert!(e.lhs.last().unwrap() * 2.0 < *e.rhs.last().unwrap());

        let k: f64 = 8.0;
        let u0 = ScalarField::from_fn(&lat, |v| {
            let z = k.sqrt() * (0.25 - (v[0] - 0.5).abs());
            0.5 + 0.25 * z.tanh()
        });
        let run = integrate(&u0, &spec(1), k, &grid(0.1, 20), None, Scheme::Rk4).unwrap();
        assert!(energy_report(&run).holds);
    }
}

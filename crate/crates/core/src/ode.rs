//! Adaptive Dormand–Prince 5(4) integrator for small ODE systems.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("too many steps ({steps}) before reaching t = {t_end}")]
    TooManySteps { steps: usize, t_end: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
}

#[derive(Clone, Copy, Debug)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rtol: 1e-11,
            atol: 1e-13,
            h_max: f64::INFINITY,
            max_steps: 1_000_000,
        }
    }
}

/// State after [`solve`] returns.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub t: f64,
    pub y: Vec<f64>,
    /// Start of the last accepted step.
    pub t_prev: f64,
    pub y_prev: Vec<f64>,
    /// True if the observer stopped the integration before `t_end`.
    pub stopped: bool,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// One Dormand–Prince step of size `h`; returns the 5th-order solution and
/// the componentwise error estimate.
pub fn dopri_step<F>(f: &mut F, t: f64, y: &[f64], h: f64) -> (Vec<f64>, Vec<f64>)
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    f(t, y, &mut k[0]);
    for i in 0..n {
        tmp[i] = y[i] + h * A21 * k[0][i];
    }
    f(t + C2 * h, &tmp, &mut k[1]);
    for i in 0..n {
        tmp[i] = y[i] + h * (A31 * k[0][i] + A32 * k[1][i]);
    }
    f(t + C3 * h, &tmp, &mut k[2]);
    for i in 0..n {
        tmp[i] = y[i] + h * (A41 * k[0][i] + A42 * k[1][i] + A43 * k[2][i]);
    }
    f(t + C4 * h, &tmp, &mut k[3]);
    for i in 0..n {
        tmp[i] = y[i] + h * (A51 * k[0][i] + A52 * k[1][i] + A53 * k[2][i] + A54 * k[3][i]);
    }
    f(t + C5 * h, &tmp, &mut k[4]);
    for i in 0..n {
        tmp[i] = y[i] + h * (A61 * k[0][i] + A62 * k[1][i] + A63 * k[2][i] + A64 * k[3][i] + A65 * k[4][i]);
    }
    f(t + h, &tmp, &mut k[5]);
    let mut y5 = vec![0.0; n];
    for i in 0..n {
        y5[i] = y[i] + h * (B1 * k[0][i] + B3 * k[2][i] + B4 * k[3][i] + B5 * k[4][i] + B6 * k[5][i]);
    }
    f(t + h, &y5, &mut k[6]);
    let err = (0..n)
        .map(|i| h * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]))
        .collect();
    (y5, err)
}

/// Integrates `y' = f(t, y)` from `t0` towards `t_end` (either direction).
///
/// After every accepted step `observer(t_prev, y_prev, t, y)` is called; when
/// it returns `false` the integration stops there.
pub fn solve<F, O>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    tol: &Tolerances,
    mut observer: O,
) -> Result<Outcome, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    O: FnMut(f64, &[f64], f64, &[f64]) -> bool,
{
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let span = (t_end - t0).abs();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut t_prev = t0;
    let mut y_prev = y.clone();
    let mut h = (span * 1e-3).clamp(1e-8, tol.h_max.min(span.max(1e-8)));
    let mut steps = 0;
    while (t_end - t) * dir > 0.0 {
        steps += 1;
        if steps > tol.max_steps {
            return Err(OdeError::TooManySteps { steps, t_end });
        }
        let remaining = (t_end - t).abs();
        let last = h >= remaining;
        let h_try = if last { remaining } else { h };
        let (y_new, err) = dopri_step(&mut f, t, &y, dir * h_try);
        let norm = (err
            .iter()
            .zip(y.iter().zip(&y_new))
            .map(|(e, (a, b))| {
                let sc = tol.atol + tol.rtol * a.abs().max(b.abs());
                (e / sc).powi(2)
            })
            .sum::<f64>()
            / y.len() as f64)
            .sqrt();
        if !norm.is_finite() {
            h = h_try * 0.25;
            if h < 1e-14 * (1.0 + t.abs()) {
                return Err(OdeError::NonFinite { t });
            }
            continue;
        }
        if norm <= 1.0 {
            t_prev = t;
            y_prev = std::mem::replace(&mut y, y_new);
            t = if last { t_end } else { t + dir * h_try };
            let grow = if norm == 0.0 {
                5.0
            } else {
                (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = (h_try * grow).min(tol.h_max);
            if !observer(t_prev, &y_prev, t, &y) {
                return Ok(Outcome {
                    t,
                    y,
                    t_prev,
                    y_prev,
                    stopped: true,
                });
            }
        } else {
            h = h_try * (0.9 * norm.powf(-0.2)).clamp(0.1, 1.0);
            if h < 1e-14 * (1.0 + t.abs()) {
                return Err(OdeError::StepUnderflow { t });
            }
        }
    }
    Ok(Outcome {
        t,
        y,
        t_prev,
        y_prev,
        stopped: false,
    })
}

/// Shortcut for [`solve`] without an observer.
pub fn solve_to<F>(f: F, t0: f64, y0: &[f64], t_end: f64, tol: &Tolerances) -> Result<Vec<f64>, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    solve(f, t0, y0, t_end, tol, |_, _, _, _| true).map(|o| o.y)
}

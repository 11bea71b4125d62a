//! Checking `rho_- <= u^N <= rho_+` along a hydrodynamic run started from a
//! circular front, and calibrating the envelope constants `m2`, `m3`.

use std::io::{self, Write};

use thiserror::Error;

use super::distance::{signed_distance_sphere, DistanceError, DistanceField};
use super::envelope::{rho_envelopes, wave_initial_data, EnvelopeError, EnvelopeParams, WaveCache, MAX_ENVELOPE_DELTA};
use super::mmc::sphere_radius;
use super::wave::WaveError;
use crate::hydro::HydroRun;
use crate::lattice::{ScalarField, TorusLattice};
use crate::rates::RateSpec;

/// Violation tolerance of the sandwich check.
pub const SANDWICH_TOL: f64 = 1e-3;

#[derive(Debug, Error, PartialEq)]
pub enum SandwichError {
    #[error("run has {run} output times but {envelopes} envelope pairs were given")]
    GridMismatch { run: usize, envelopes: usize },
    #[error("front is extinct at t = {0}")]
    Extinct(f64),
    #[error("no (m2, m3) within the search range passes the probe check")]
    Calibration,
    #[error("probe time {0} is not an output time of the run")]
    ProbeTime(f64),
    #[error(transparent)]
    Distance(#[from] DistanceError),
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
    #[error(transparent)]
    Wave(#[from] WaveError),
}

/// A circular (spherical) front shrinking by mean curvature, the envelope
/// exponents and the lattice it is sampled on.
#[derive(Clone, Debug)]
pub struct SandwichProblem {
    pub spec: RateSpec,
    pub lattice: TorusLattice,
    pub center: Vec<f64>,
    pub r0: f64,
    pub d0: f64,
    pub k: f64,
    pub a: f64,
    pub beta: f64,
}

impl SandwichProblem {
    pub fn radius_at(&self, t: f64) -> Result<f64, SandwichError> {
        sphere_radius(self.r0, self.center.len(), t).ok_or(SandwichError::Extinct(t))
    }

    /// Modified signed distance to `Gamma_t`.
    pub fn distance_at(&self, t: f64) -> Result<DistanceField, SandwichError> {
        let r = self.radius_at(t)?;
        Ok(signed_distance_sphere(&self.center, r, &self.lattice, self.d0)?)
    }

    pub fn params(&self, m2: f64, m3: f64) -> EnvelopeParams {
        EnvelopeParams {
            k: self.k,
            a: self.a,
            m2,
            m3,
            beta: self.beta,
        }
    }

    /// `U(K^{1/2} d(0, .); 0)`.
    pub fn initial_data(&self, cache: &WaveCache) -> Result<ScalarField, SandwichError> {
        Ok(wave_initial_data(cache, &self.distance_at(0.0)?, self.k)?)
    }

    /// `(rho_-, rho_+)` at each of `times`.
    pub fn envelope_series(
        &self,
        cache: &WaveCache,
        m2: f64,
        m3: f64,
        times: &[f64],
    ) -> Result<Vec<(ScalarField, ScalarField)>, SandwichError> {
        let p = self.params(m2, m3);
        times
            .iter()
            .map(|&t| Ok(rho_envelopes(cache, &self.distance_at(t)?, &p, t)?))
            .collect()
    }

    /// Largest `m3` keeping `|delta(t)|` admissible up to `t_end` for this `m2`.
    pub fn max_m3(&self, m2: f64, t_end: f64) -> f64 {
        MAX_ENVELOPE_DELTA / (self.k.powf(self.beta - 1.0) * (m2 * t_end).exp())
    }
}

/// Per-time sandwich violations.
#[derive(Clone, Debug, PartialEq)]
pub struct SandwichReport {
    pub times: Vec<f64>,
    /// `max_x (rho_- - u)^+`.
    pub max_violation_lo: Vec<f64>,
    /// `max_x (u - rho_+)^+`.
    pub max_violation_hi: Vec<f64>,
    pub tolerance: f64,
}

impl SandwichReport {
    pub fn max_violation(&self) -> f64 {
        self.max_violation_lo
            .iter()
            .chain(&self.max_violation_hi)
            .fold(0.0, |a, &b| a.max(b))
    }

    pub fn passed(&self) -> bool {
        self.max_violation() <= self.tolerance
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,max_violation_lo,max_violation_hi")?;
        for i in 0..self.times.len() {
            writeln!(
                w,
                "{:e},{:e},{:e}",
                self.times[i], self.max_violation_lo[i], self.max_violation_hi[i]
            )?;
        }
        Ok(())
    }
}

fn violations(u: &ScalarField, lo: &ScalarField, hi: &ScalarField) -> (f64, f64) {
    let (mut vl, mut vh) = (0.0f64, 0.0f64);
    for ((&u, &l), &h) in u.values().iter().zip(lo.values()).zip(hi.values()) {
        vl = vl.max(l - u);
        vh = vh.max(u - h);
    }
    (vl, vh)
}

/// Compares each stored field of `run` with the envelope pair at the same
/// index.
pub fn sandwich_check(
    run: &HydroRun,
    envelopes: &[(ScalarField, ScalarField)],
    tolerance: f64,
) -> Result<SandwichReport, SandwichError> {
    if run.fields.len() != envelopes.len() {
        return Err(SandwichError::GridMismatch {
            run: run.fields.len(),
            envelopes: envelopes.len(),
        });
    }
    let (lo, hi) = run
        .fields
        .iter()
        .zip(envelopes)
        .map(|(u, (l, h))| violations(u, l, h))
        .unzip();
    Ok(SandwichReport {
        times: run.times.clone(),
        max_violation_lo: lo,
        max_violation_hi: hi,
        tolerance,
    })
}

/// Search settings for [`calibrate`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CalibrationSearch {
    pub m2_start: f64,
    pub m3_start: f64,
    pub factor: f64,
    pub max_m2_steps: usize,
    /// The envelopes must stay admissible up to this time.
    pub t_end: f64,
}

impl Default for CalibrationSearch {
    fn default() -> Self {
        Self {
            m2_start: 1.0,
            m3_start: 0.01,
            factor: 1.5,
            max_m2_steps: 16,
            t_end: 0.02,
        }
    }
}

/// Smallest `(m2, m3)` found by growing `m3` geometrically (inner loop, up to
/// the admissible `delta` range on `[0, t_end]`) and then `m2` (outer loop)
/// until the sandwich holds at `t = 0` and at `probe_time`, both of which
/// must be output times of `run`.
pub fn calibrate(
    problem: &SandwichProblem,
    cache: &WaveCache,
    run: &HydroRun,
    probe_time: f64,
    search: &CalibrationSearch,
    tolerance: f64,
) -> Result<(f64, f64), SandwichError> {
    let find = |t: f64| {
        run.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
            .ok_or(SandwichError::ProbeTime(t))
    };
    let probes = [(0.0, find(0.0)?), (probe_time, find(probe_time)?)];
    let mut m2 = search.m2_start;
    for _ in 0..search.max_m2_steps {
        let m3_cap = problem.max_m3(m2, search.t_end);
        let mut m3 = search.m3_start;
        while m3 < m3_cap {
            let mut ok = true;
            for &(t, idx) in &probes {
                let d = problem.distance_at(t)?;
                let (lo, hi) = rho_envelopes(cache, &d, &problem.params(m2, m3), t)?;
                let (vl, vh) = violations(&run.fields[idx], &lo, &hi);
                if vl.max(vh) > tolerance {
                    ok = false;
                    break;
                }
            }
            if ok {
                return Ok((m2, m3));
            }
            m3 *= search.factor;
        }
        m2 *= search.factor;
    }
    Err(SandwichError::Calibration)
}

//! The envelopes
//!
//! ```text
//! rho_pm(t, v) = U( K^{1/2} (d(t,v) +- K^{-a} e^{m2 t}) ; +- K^{beta-1} m3 e^{m2 t} )
//! ```
//!
//! built from traveling waves, with a per-`delta` cache of solved profiles.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use thiserror::Error;

use super::distance::DistanceField;
use super::wave::{solve_wave, WaveError, WaveSolution};
use crate::lattice::ScalarField;
use crate::rates::RateSpec;

/// Largest `|delta|` accepted for the envelopes. For the symmetric example the
/// root structure of `f + delta` survives up to `1/(3 sqrt 3) ~ 0.19245`.
pub const MAX_ENVELOPE_DELTA: f64 = 0.19;

#[derive(Debug, Error, PartialEq)]
pub enum EnvelopeError {
    #[error("envelope parameter a = {0} must exceed 1/2")]
    Exponent(f64),
    #[error("|delta| = {delta} outside the admissible range {MAX_ENVELOPE_DELTA}")]
    DeltaRange { delta: f64 },
    #[error(transparent)]
    Wave(#[from] WaveError),
}

/// Envelope parameters `a`, `m2`, `m3` and the exponent `beta` of the `delta`
/// scaling (`beta = 0` gives the `K^{-1}` scaling).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvelopeParams {
    pub k: f64,
    pub a: f64,
    pub m2: f64,
    pub m3: f64,
    pub beta: f64,
}

impl EnvelopeParams {
    pub fn delta(&self, t: f64) -> f64 {
        self.k.powf(self.beta - 1.0) * self.m3 * (self.m2 * t).exp()
    }

    pub fn shift(&self, t: f64) -> f64 {
        self.k.powf(-self.a) * (self.m2 * t).exp()
    }
}

/// Thread-safe memo of solved waves keyed by the exact bits of `delta`.
#[derive(Debug)]
pub struct WaveCache {
    spec: RateSpec,
    map: Mutex<HashMap<u64, Arc<WaveSolution>>>,
}

impl WaveCache {
    pub fn new(spec: &RateSpec) -> Self {
        Self {
            spec: spec.clone(),
            map: Mutex::new(HashMap::new()),
        }
    }

    pub fn spec(&self) -> &RateSpec {
        &self.spec
    }

    pub fn get(&self, delta: f64) -> Result<Arc<WaveSolution>, WaveError> {
        let key = delta.to_bits();
        if let Some(w) = self.map.lock().expect("cache lock").get(&key) {
            return Ok(Arc::clone(w));
        }
        // Solve outside the lock; a racing duplicate solve is harmless.
        let w = Arc::new(solve_wave(&self.spec, delta)?);
        self.map
            .lock()
            .expect("cache lock")
            .entry(key)
            .or_insert_with(|| Arc::clone(&w));
        Ok(w)
    }

    pub fn len(&self) -> usize {
        self.map.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `(rho_-, rho_+)` at time `t`, given the modified distance to `Gamma_t`.
pub fn rho_envelopes(
    cache: &WaveCache,
    dist: &DistanceField,
    params: &EnvelopeParams,
    t: f64,
) -> Result<(ScalarField, ScalarField), EnvelopeError> {
    if !(params.a > 0.5) {
        return Err(EnvelopeError::Exponent(params.a));
    }
    let delta = params.delta(t);
    if !(delta.abs() < MAX_ENVELOPE_DELTA) {
        return Err(EnvelopeError::DeltaRange { delta });
    }
    let up = cache.get(delta)?;
    let down = cache.get(-delta)?;
    let sk = params.k.sqrt();
    let shift = params.shift(t);
    let d = dist.field.values();
    let lo: Vec<f64> = d.par_iter().map(|&v| down.eval(sk * (v - shift))).collect();
    let hi: Vec<f64> = d.par_iter().map(|&v| up.eval(sk * (v + shift))).collect();
    let lat = dist.field.lattice();
    Ok((
        ScalarField::from_values(lat, lo).expect("sized to the lattice"),
        ScalarField::from_values(lat, hi).expect("sized to the lattice"),
    ))
}

/// `U(K^{1/2} d(0, .); 0)`, initial data lying between the envelopes at `t = 0`.
pub fn wave_initial_data(cache: &WaveCache, dist: &DistanceField, k: f64) -> Result<ScalarField, WaveError> {
    let w = cache.get(0.0)?;
    let sk = k.sqrt();
    let values = dist.field.values().par_iter().map(|&v| w.eval(sk * v)).collect();
    Ok(ScalarField::from_values(dist.field.lattice(), values).expect("sized to the lattice"))
}

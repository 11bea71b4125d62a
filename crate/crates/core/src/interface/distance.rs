//! Signed distance to a sphere on the torus and its smooth cutoff.

use rayon::prelude::*;
use thiserror::Error;

use crate::lattice::{ScalarField, TorusLattice};

pub const DEFAULT_D0: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum DistanceError {
    #[error("sphere of radius {radius} with cutoff band 2*d0 = {band} does not fit in the unit torus")]
    TooLarge { radius: f64, band: f64 },
    #[error("radius and cutoff must be positive (R = {radius}, d0 = {d0})")]
    NonPositive { radius: f64, d0: f64 },
    #[error("center has {got} coordinates, lattice dimension is {expected}")]
    Dimension { expected: usize, got: usize },
}

/// The modified distance `d` sampled at `x/N`, together with its cutoff.
#[derive(Clone, Debug)]
pub struct DistanceField {
    pub field: ScalarField,
    pub d0: f64,
}

/// Monotone C^2 cutoff: the identity on `|s| < d0`, constant `+-2 d0` on
/// `|s| >= 2 d0`, and the quintic
/// `d0 (1 + sigma + sigma^3 (4 - 7 sigma + 3 sigma^2))`, `sigma = (|s| - d0)/d0`,
/// in between. Its slope `(1 - sigma)^2 (15 sigma^2 + 2 sigma + 1)` is
/// nonnegative and matches 1 and 0 at the two ends, with vanishing second
/// derivative at both.
pub fn smooth_cutoff(s: f64, d0: f64) -> f64 {
    let a = s.abs();
    let v = if a < d0 {
        a
    } else if a >= 2.0 * d0 {
        2.0 * d0
    } else {
        let sg = (a - d0) / d0;
        d0 * (1.0 + sg + sg * sg * sg * (4.0 - 7.0 * sg + 3.0 * sg * sg))
    };
    v.copysign(s)
}

/// Euclidean distance on the unit torus `T^d`.
pub fn torus_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let t = (x - y).rem_euclid(1.0);
            let t = t.min(1.0 - t);
            t * t
        })
        .sum::<f64>()
        .sqrt()
}

/// `d(v)` for the sphere `|v - center|_T = radius`, positive outside.
///
/// Requires `radius + 2 d0 <= 1/2` so the band where `d` is not clamped sees
/// a single image of the center.
pub fn signed_distance_sphere(
    center: &[f64],
    radius: f64,
    lattice: &TorusLattice,
    d0: f64,
) -> Result<DistanceField, DistanceError> {
    if center.len() != lattice.dim() {
        return Err(DistanceError::Dimension {
            expected: lattice.dim(),
            got: center.len(),
        });
    }
    if !(radius > 0.0 && d0 > 0.0) {
        return Err(DistanceError::NonPositive { radius, d0 });
    }
    if radius + 2.0 * d0 > 0.5 + 1e-12 {
        return Err(DistanceError::TooLarge { radius, band: 2.0 * d0 });
    }
    let values = (0..lattice.site_count())
        .into_par_iter()
        .map(|x| smooth_cutoff(torus_distance(&lattice.position(x), center) - radius, d0))
        .collect();
    Ok(DistanceField {
        field: ScalarField::from_values(lattice, values).expect("sized to the lattice"),
        d0,
    })
}

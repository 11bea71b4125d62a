//! The fixed battery of test functions and the initial fronts.
//!
//! Battery: `phi = 1`, then `cos(2 pi k v_i)` and `sin(2 pi k v_i)` for each
//! coordinate `i` and `k = 1, 2, 3`; 7 functions in `d = 1`, 13 in `d = 2`.

use std::f64::consts::PI;

use crate::experiment::config::Front;
use crate::experiment::ExperimentError;
use crate::interface::distance::{signed_distance_sphere, smooth_cutoff, DistanceField};
use crate::interface::mmc::sphere_radius;
use crate::interface::{wave_initial_data, WaveCache};
use crate::lattice::{ScalarField, TorusLattice};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Wave {
    Cos,
    Sin,
}

/// One function of the battery.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TestFunction {
    One,
    Mode { axis: usize, k: u32, wave: Wave },
}

impl TestFunction {
    pub fn name(&self) -> String {
        match self {
            Self::One => "one".into(),
            Self::Mode { axis, k, wave } => {
                let w = match wave {
                    Wave::Cos => "cos",
                    Wave::Sin => "sin",
                };
                format!("{w}{k}_v{axis}")
            }
        }
    }

    /// Profile along the single coordinate the function depends on.
    fn profile(&self, s: f64) -> f64 {
        match *self {
            Self::One => 1.0,
            Self::Mode { k, wave: Wave::Cos, .. } => (2.0 * PI * k as f64 * s).cos(),
            Self::Mode { k, wave: Wave::Sin, .. } => (2.0 * PI * k as f64 * s).sin(),
        }
    }

    fn axis(&self) -> usize {
        match *self {
            Self::One => 0,
            Self::Mode { axis, .. } => axis,
        }
    }

    pub fn eval(&self, v: &[f64]) -> f64 {
        self.profile(v[self.axis()])
    }

    /// Values at the sites `x/N`.
    pub fn table(&self, lat: &TorusLattice) -> Vec<f64> {
        (0..lat.site_count()).map(|x| self.eval(&lat.position(x))).collect()
    }

    /// `int_{T^d} phi`.
    pub fn integral(&self) -> f64 {
        match self {
            Self::One => 1.0,
            Self::Mode { .. } => 0.0,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        1.0
    }
}

pub fn battery(d: usize) -> Vec<TestFunction> {
    let mut out = vec![TestFunction::One];
    for axis in 0..d {
        for k in 1..=3 {
            for wave in [Wave::Cos, Wave::Sin] {
                out.push(TestFunction::Mode { axis, k, wave });
            }
        }
    }
    out
}

/// Composite Simpson rule with `m` (even) intervals.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let inner: f64 = (1..m)
        .map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 })
        .sum();
    h / 3.0 * (f(a) + f(b) + inner)
}

const QUADRATURE_INTERVALS: usize = 4096;

impl Front {
    /// The front at time `t` under curvature flow: spheres shrink, stripes
    /// are stationary.
    pub fn at(&self, t: f64) -> Result<Front, ExperimentError> {
        match self {
            Front::Circle { center, radius } => {
                let r = sphere_radius(*radius, center.len(), t).ok_or(ExperimentError::Extinct(t))?;
                Ok(Front::Circle {
                    center: center.clone(),
                    radius: r,
                })
            }
            Front::Stripe { .. } => Ok(self.clone()),
        }
    }

    /// Modified signed distance, positive outside (on the `alpha_2` side).
    pub fn distance(&self, lat: &TorusLattice, d0: f64) -> Result<DistanceField, ExperimentError> {
        match self {
            Front::Circle { center, radius } => Ok(signed_distance_sphere(center, *radius, lat, d0)?),
            Front::Stripe { lower, upper } => {
                let field = ScalarField::from_fn(lat, |v| {
                    let s = v[0];
                    let inside = (s - lower).min(upper - s);
                    let outside = ((lower - s).rem_euclid(1.0)).min((s - upper).rem_euclid(1.0));
                    let signed = if inside > 0.0 { -inside } else { outside };
                    smooth_cutoff(signed, d0)
                });
                Ok(DistanceField { field, d0 })
            }
        }
    }

    /// `U(K^{1/2} d(0, x/N); 0)`.
    pub fn initial_profile(
        &self,
        lat: &TorusLattice,
        d0: f64,
        k: f64,
        cache: &WaveCache,
    ) -> Result<ScalarField, ExperimentError> {
        Ok(wave_initial_data(cache, &self.distance(lat, d0)?, k)?)
    }

    /// `int_{inside} phi`, by quadrature along the axis of `phi`.
    fn inside_integral(&self, phi: &TestFunction) -> f64 {
        match self {
            Front::Stripe { lower, upper } => {
                if phi.axis() == 0 {
                    simpson(|s| phi.profile(s), *lower, *upper, QUADRATURE_INTERVALS)
                } else {
                    (upper - lower) * phi.integral()
                }
            }
            Front::Circle { center, radius } => {
                let c = center[phi.axis()];
                let r = *radius;
                match center.len() {
                    1 => simpson(|s| phi.profile(c + s), -r, r, QUADRATURE_INTERVALS),
                    2 => {
                        // Chord weight 2 sqrt(r^2 - s^2) with s = r sin(theta).
                        simpson(
                            |th: f64| phi.profile(c + r * th.sin()) * 2.0 * r * r * th.cos().powi(2),
                            -PI / 2.0,
                            PI / 2.0,
                            QUADRATURE_INTERVALS,
                        )
                    }
                    _ => f64::NAN,
                }
            }
        }
    }

    /// `<chi_Gamma, phi>` with `chi = alpha_1` inside and `alpha_2` outside.
    pub fn sharp_pairing(&self, phi: &TestFunction, alpha1: f64, alpha2: f64) -> f64 {
        alpha2 * phi.integral() - (alpha2 - alpha1) * self.inside_integral(phi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::RateSpec;

    #[test]
    fn battery_sizes_and_names() {
        assert_eq!(battery(1).len(), 7);
        let b = battery(2);
        assert_eq!(b.len(), 13);
        assert_eq!(b[1].name(), "cos1_v0");
        assert_eq!(b[12].name(), "sin3_v1");
        assert_eq!(b[7].eval(&[0.1, 0.25]), (2.0 * PI * 0.25).cos());
    }

    #[test]
    fn sharp_pairing_of_one() {
        let r0 = 0.3;
        let f = Front::Circle {
            center: vec![0.5, 0.5],
            radius: r0,
        };
        let v = f.sharp_pairing(&TestFunction::One, 0.25, 0.75);
        assert!((v - (0.75 - 0.5 * PI * r0 * r0)).abs() < 1e-12, "{v}");
        let s = Front::Stripe {
            lower: 0.25,
            upper: 0.75,
        };
        assert!((s.sharp_pairing(&TestFunction::One, 0.25, 0.75) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn sharp_pairing_matches_lattice_quadrature() {
        let lat = TorusLattice::new(2, 512).unwrap();
        let f = Front::Circle {
            center: vec![0.45, 0.55],
            radius: 0.25,
        };
        for phi in battery(2) {
            let chi = ScalarField::from_fn(&lat, |v| {
                let r = crate::interface::distance::torus_distance(v, &[0.45, 0.55]);
                if r < 0.25 {
                    0.25
                } else {
                    0.75
                }
            });
            let riemann = chi.pairing(|v| phi.eval(v));
            assert!(
                (riemann - f.sharp_pairing(&phi, 0.25, 0.75)).abs() < 2e-3,
                "{}",
                phi.name()
            );
        }
    }

    #[test]
    fn stripe_profile() {
        let lat = TorusLattice::new(1, 100).unwrap();
        let spec = RateSpec::bistable_example(1);
        let cache = WaveCache::new(&spec);
        let front = Front::Stripe {
            lower: 0.25,
            upper: 0.75,
        };
        let u = front.initial_profile(&lat, 0.1, 1e4, &cache).unwrap();
        assert!((u.get(50) - 0.25).abs() < 1e-6);
        assert!((u.get(0) - 0.75).abs() < 1e-6);
        assert!((u.get(25) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn circle_front_shrinks() {
        let f = Front::Circle {
            center: vec![0.5, 0.5],
            radius: 0.3,
        };
        assert_eq!(
            f.at(0.02).unwrap(),
            Front::Circle {
                center: vec![0.5, 0.5],
                radius: 0.05f64.sqrt()
            }
        );
        assert!(matches!(f.at(0.05), Err(ExperimentError::Extinct(_))));
    }
}

//! Reference solutions of motion by mean curvature `V = kappa`.
//!
//! Spheres use the exact law `R(t)^2 = R0^2 - 2(d-1)t`. Closed planar curves
//! use explicit curve-shortening: each vertex moves by `dt` times its
//! curvature vector, taken from the circle through it and its two neighbors,
//! followed by arclength resampling.

use std::io::{self, Write};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MmcError {
    #[error("front became extinct at t = {time}")]
    Extinct { time: f64 },
    #[error("polygon needs at least 3 vertices and positive area")]
    Degenerate,
    #[error("polygon is not simple")]
    NotSimple,
    #[error("output times must be nonnegative and increasing")]
    BadGrid,
    #[error("time step must be positive, got {0}")]
    BadStep(f64),
}

/// A closed front: a sphere in any dimension, or a closed polygon in the
/// plane with vertices in unwrapped coordinates.
#[derive(Clone, Debug, PartialEq)]
pub enum FrontCurve {
    Sphere { center: Vec<f64>, radius: f64 },
    Polygon(Vec<[f64; 2]>),
}

impl FrontCurve {
    /// Regular `m`-gon inscribed in the circle.
    pub fn circle_polygon(center: [f64; 2], radius: f64, m: usize) -> Self {
        let pts = (0..m)
            .map(|i| {
                let th = 2.0 * std::f64::consts::PI * i as f64 / m as f64;
                [center[0] + radius * th.cos(), center[1] + radius * th.sin()]
            })
            .collect();
        FrontCurve::Polygon(pts)
    }

    /// Enclosed area (`pi R^2` for the sphere in `d = 2`, shoelace for polygons).
    pub fn area(&self) -> f64 {
        match self {
            FrontCurve::Sphere { radius, .. } => std::f64::consts::PI * radius * radius,
            FrontCurve::Polygon(p) => polygon_area(p).abs(),
        }
    }

    /// Radius of a sphere, or the area-equivalent radius `sqrt(A/pi)` of a
    /// polygon. The latter is insensitive to uneven vertex spacing.
    pub fn radius(&self) -> f64 {
        match self {
            FrontCurve::Sphere { radius, .. } => *radius,
            FrontCurve::Polygon(p) => (polygon_area(p).abs() / std::f64::consts::PI).sqrt(),
        }
    }

    pub fn vertices(&self) -> Option<&[[f64; 2]]> {
        match self {
            FrontCurve::Polygon(p) => Some(p),
            FrontCurve::Sphere { .. } => None,
        }
    }

    /// Writes `x,y` rows (`center` and `radius` for spheres).
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        match self {
            FrontCurve::Polygon(p) => {
                writeln!(w, "x,y")?;
                for v in p {
                    writeln!(w, "{:e},{:e}", v[0], v[1])?;
                }
            }
            FrontCurve::Sphere { center, radius } => {
                writeln!(w, "center,radius")?;
                let c: Vec<String> = center.iter().map(|c| format!("{c:e}")).collect();
                writeln!(w, "{},{radius:e}", c.join(" "))?;
            }
        }
        Ok(())
    }
}

/// Signed shoelace area (positive for counter-clockwise order).
pub fn polygon_area(p: &[[f64; 2]]) -> f64 {
    let n = p.len();
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (p[i], p[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
}

/// Mean of the vertices.
pub fn centroid(p: &[[f64; 2]]) -> [f64; 2] {
    let n = p.len() as f64;
    let (sx, sy) = p.iter().fold((0.0, 0.0), |(a, b), v| (a + v[0], b + v[1]));
    [sx / n, sy / n]
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn segments_intersect(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    (d1 > 0.0) != (d2 > 0.0) && (d3 > 0.0) != (d4 > 0.0)
}

/// No two non-adjacent edges cross.
pub fn is_simple(p: &[[f64; 2]]) -> bool {
    let n = p.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if segments_intersect(p[i], p[(i + 1) % n], p[j], p[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

/// Exact sphere radius at time `t`, or `None` after extinction.
pub fn sphere_radius(r0: f64, d: usize, t: f64) -> Option<f64> {
    let r2 = r0 * r0 - 2.0 * (d as f64 - 1.0) * t;
    (r2 > 0.0).then(|| r2.sqrt())
}

/// `R0^2 / (2(d-1))`.
pub fn sphere_extinction_time(r0: f64, d: usize) -> f64 {
    r0 * r0 / (2.0 * (d as f64 - 1.0))
}

/// Curvature vector at `b` from the circle through `a`, `b`, `c`: points to
/// the circumcenter with magnitude one over the circumradius.
fn curvature_vector(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> [f64; 2] {
    let (ax, ay) = (a[0] - b[0], a[1] - b[1]);
    let (cx, cy) = (c[0] - b[0], c[1] - b[1]);
    let den = 2.0 * (ax * cy - ay * cx);
    if den == 0.0 {
        return [0.0, 0.0];
    }
    let (a2, c2) = (ax * ax + ay * ay, cx * cx + cy * cy);
    // Circumcenter relative to b.
    let ox = (cy * a2 - ay * c2) / den;
    let oy = (ax * c2 - cx * a2) / den;
    let r2 = ox * ox + oy * oy;
    [ox / r2, oy / r2]
}

/// Resamples a closed polygon to `m` points equally spaced in arclength,
/// starting at the first vertex.
pub fn resample(p: &[[f64; 2]], m: usize) -> Vec<[f64; 2]> {
    let n = p.len();
    let mut cum = Vec::with_capacity(n + 1);
    cum.push(0.0);
    for i in 0..n {
        let (a, b) = (p[i], p[(i + 1) % n]);
        cum.push(cum[i] + (b[0] - a[0]).hypot(b[1] - a[1]));
    }
    let total = cum[n];
    let mut out = Vec::with_capacity(m);
    let mut seg = 0;
    for k in 0..m {
        let s = total * k as f64 / m as f64;
        while seg + 1 < n && cum[seg + 1] <= s {
            seg += 1;
        }
        let len = cum[seg + 1] - cum[seg];
        let t = if len > 0.0 { (s - cum[seg]) / len } else { 0.0 };
        let (a, b) = (p[seg], p[(seg + 1) % n]);
        out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
    }
    out
}

fn min_edge(p: &[[f64; 2]]) -> f64 {
    let n = p.len();
    (0..n)
        .map(|i| {
            let (a, b) = (p[i], p[(i + 1) % n]);
            (b[0] - a[0]).hypot(b[1] - a[1])
        })
        .fold(f64::INFINITY, f64::min)
}

/// A front at one output time.
#[derive(Clone, Debug, PartialEq)]
pub struct FrontSample {
    pub t: f64,
    pub front: FrontCurve,
}

/// Polygons are declared extinct once their area drops below this fraction
/// of the initial area.
pub const EXTINCTION_AREA_FRACTION: f64 = 1e-3;
/// Explicit stability cap `dt <= CFL * h_min^2`.
pub const POLYGON_CFL: f64 = 0.2;

/// Evolves `front0` by `V = kappa` and samples it at `output_times`. For
/// polygons `dt` is further capped by the explicit stability limit.
///
/// Extinction before the last output time is an error carrying the
/// extinction time (exact for spheres; for polygons estimated as
/// `t + A/(2 pi)` since `dA/dt = -2 pi` for any simple closed curve).
pub fn mmc_reference(front0: &FrontCurve, output_times: &[f64], dt: f64) -> Result<Vec<FrontSample>, MmcError> {
    if output_times.iter().any(|t| !(*t >= 0.0)) || output_times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(MmcError::BadGrid);
    }
    match front0 {
        FrontCurve::Sphere { center, radius } => {
            let d = center.len();
            output_times
                .iter()
                .map(|&t| match sphere_radius(*radius, d, t) {
                    Some(r) => Ok(FrontSample {
                        t,
                        front: FrontCurve::Sphere {
                            center: center.clone(),
                            radius: r,
                        },
                    }),
                    None => Err(MmcError::Extinct {
                        time: sphere_extinction_time(*radius, d),
                    }),
                })
                .collect()
        }
        FrontCurve::Polygon(p0) => {
            if !(dt > 0.0) {
                return Err(MmcError::BadStep(dt));
            }
            let m = p0.len();
            if m < 3 {
                return Err(MmcError::Degenerate);
            }
            if !is_simple(p0) {
                return Err(MmcError::NotSimple);
            }
            if polygon_area(p0) == 0.0 {
                return Err(MmcError::Degenerate);
            }
            let a0 = polygon_area(p0).abs();
            let mut p = p0.clone();
            let mut t = 0.0;
            let mut out = Vec::with_capacity(output_times.len());
            let mut next = vec![[0.0; 2]; m];
            for &t_out in output_times {
                while t < t_out {
                    let area = polygon_area(&p).abs();
                    if area < EXTINCTION_AREA_FRACTION * a0 {
                        return Err(MmcError::Extinct {
                            time: t + area / (2.0 * std::f64::consts::PI),
                        });
                    }
                    let h = min_edge(&p);
                    let step = dt.min(POLYGON_CFL * h * h).min(t_out - t);
                    for i in 0..m {
                        let k = curvature_vector(p[(i + m - 1) % m], p[i], p[(i + 1) % m]);
                        next[i] = [p[i][0] + step * k[0], p[i][1] + step * k[1]];
                    }
                    p = resample(&next, m);
                    t = if t_out - t <= step { t_out } else { t + step };
                }
                out.push(FrontSample {
                    t,
                    front: FrontCurve::Polygon(p.clone()),
                });
            }
            Ok(out)
        }
    }
}

/// Runs the polygon flow until extinction and returns the extinction time.
pub fn polygon_extinction_time(front0: &FrontCurve, dt: f64) -> Result<f64, MmcError> {
    // Far beyond any extinction time of a front inside the unit torus.
    match mmc_reference(front0, &[1.0], dt) {
        Err(MmcError::Extinct { time }) => Ok(time),
        Err(e) => Err(e),
        Ok(_) => Err(MmcError::Degenerate),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_examples() {
        assert!((sphere_radius(0.3, 2, 0.02).unwrap() - 0.223_606_797_749_979).abs() < 1e-12);
        assert!((sphere_extinction_time(0.25, 3) - 0.015625).abs() < 1e-15);
        assert_eq!(sphere_radius(0.25, 3, 0.016), None);
        let s = FrontCurve::Sphere {
            center: vec![0.5; 3],
            radius: 0.25,
        };
        let e = mmc_reference(&s, &[0.01, 0.02], 0.0).unwrap_err();
        assert_eq!(e, MmcError::Extinct { time: 0.015625 });
    }

    #[test]
    fn curvature_of_circle_points() {
        let r = 0.3;
        let pts: Vec<[f64; 2]> = [0.0f64, 0.1, 0.2]
            .iter()
            .map(|th| [1.0 + r * th.cos(), 2.0 + r * th.sin()])
            .collect();
        let k = curvature_vector(pts[0], pts[1], pts[2]);
        let inward = [-(0.1f64).cos(), -(0.1f64).sin()];
        assert!((k[0] - inward[0] / r).abs() < 1e-9 && (k[1] - inward[1] / r).abs() < 1e-9);
        assert_eq!(curvature_vector([0.0, 0.0], [1.0, 0.0], [2.0, 0.0]), [0.0, 0.0]);
    }

    #[test]
    fn polygon_circle_follows_exact_law() {
        let r0 = 0.3;
        let ext = r0 * r0 / 2.0;
        let front = FrontCurve::circle_polygon([0.5, 0.5], r0, 256);
        let times: Vec<f64> = (1..=8).map(|i| 0.1 * i as f64 * ext).collect();
        let out = mmc_reference(&front, &times, 1e-4).unwrap();
        for s in &out {
            let exact = sphere_radius(r0, 2, s.t).unwrap();
            assert!(
                (s.front.radius() - exact).abs() < 1e-3,
                "t={}: {} vs {exact}",
                s.t,
                s.front.radius()
            );
            assert!(is_simple(s.front.vertices().unwrap()));
        }
    }

    #[test]
    fn ellipse_rounds_and_shrinks() {
        let m = 200;
        let p: Vec<[f64; 2]> = (0..m)
            .map(|i| {
                let th = 2.0 * std::f64::consts::PI * i as f64 / m as f64;
                [0.5 + 0.3 * th.cos(), 0.5 + 0.15 * th.sin()]
            })
            .collect();
        let a0 = polygon_area(&p).abs();
        let out = mmc_reference(&FrontCurve::Polygon(p), &[0.005, 0.01], 1e-4).unwrap();
        // dA/dt = -2 pi up to discretization.
        for s in &out {
            let expected = a0 - 2.0 * std::f64::consts::PI * s.t;
            assert!((s.front.area() - expected).abs() < 0.01 * a0);
        }
    }

    #[test]
    fn extinction_time_converges() {
        let r0 = 0.2;
        let exact = r0 * r0 / 2.0;
        let mut errs = Vec::new();
        for m in [32, 64, 128] {
            let t = polygon_extinction_time(&FrontCurve::circle_polygon([0.5, 0.5], r0, m), 1e-4).unwrap();
            errs.push((t - exact).abs());
        }
        assert!(errs[1] < errs[0] && errs[2] < errs[1], "{errs:?}");
        assert!(errs[2] < 1e-3 * exact, "{errs:?}");
    }

    #[test]
    fn rejects_bad_polygons() {
        let bow = vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]];
        assert_eq!(
            mmc_reference(&FrontCurve::Polygon(bow), &[0.1], 1e-3),
            Err(MmcError::NotSimple)
        );
        let tiny = vec![[0.0, 0.0], [1.0, 1.0]];
        assert_eq!(
            mmc_reference(&FrontCurve::Polygon(tiny), &[0.1], 1e-3),
            Err(MmcError::Degenerate)
        );
    }
}

//! Level-set extraction on `T^2` by marching squares, and the Hausdorff
//! distance between closed curves under the torus metric.
//!
//! Contour vertices are returned in unwrapped coordinates: consecutive
//! vertices are always nearest images of each other, so a contour that wraps
//! around the torus ends one period away from where it started.

use thiserror::Error;

use super::distance::torus_distance;
use super::mmc::FrontCurve;
use crate::lattice::ScalarField;

#[derive(Debug, Error, PartialEq)]
pub enum ContourError {
    #[error("contour extraction needs d = 2, got d = {0}")]
    Dimension(usize),
}

const NONE: u32 = u32::MAX;

/// Position of the level crossing on edge `id = 2 * site + dir`.
fn crossing_point(u: &ScalarField, id: usize, level: f64) -> [f64; 2] {
    let lat = u.lattice();
    let (s, dir) = (id / 2, id % 2);
    let nb = lat.forward(s, dir);
    let (ua, ub) = (u.get(s), u.get(nb));
    let t = (level - ua) / (ub - ua);
    let p = lat.position(s);
    let h = 1.0 / lat.side() as f64;
    let mut out = [p[0], p[1]];
    out[dir] += t * h;
    out
}

/// All closed level curves `{u = level}` of the bilinear interpolant, as
/// polygons. Saddle cells are resolved by the cell-center average.
pub fn extract_contours(u: &ScalarField, level: f64) -> Result<Vec<Vec<[f64; 2]>>, ContourError> {
    let lat = u.lattice();
    if lat.dim() != 2 {
        return Err(ContourError::Dimension(lat.dim()));
    }
    let sites = lat.site_count();
    let above = |x: usize| u.get(x) >= level;
    let mut links = vec![[NONE; 2]; 2 * sites];
    let mut link = |a: usize, b: usize| {
        for (p, q) in [(a, b), (b, a)] {
            let slot = &mut links[p];
            let free = if slot[0] == NONE { 0 } else { 1 };
            slot[free] = q as u32;
        }
    };
    for s in 0..sites {
        let c0 = s;
        let c1 = lat.forward(s, 0);
        let c3 = lat.forward(s, 1);
        let c2 = lat.forward(c1, 1);
        // Edges: bottom c0-c1, right c1-c2, top c3-c2, left c0-c3.
        let e = [2 * c0, 2 * c1 + 1, 2 * c3, 2 * c0 + 1];
        let side = [above(c0), above(c1), above(c2), above(c3)];
        let cut = [
            side[0] != side[1],
            side[1] != side[2],
            side[3] != side[2],
            side[0] != side[3],
        ];
        let cuts: Vec<usize> = (0..4).filter(|&i| cut[i]).collect();
        match cuts.len() {
            0 => {}
            2 => link(e[cuts[0]], e[cuts[1]]),
            4 => {
                let center = 0.25 * (u.get(c0) + u.get(c1) + u.get(c2) + u.get(c3));
                if side[0] == (center >= level) {
                    link(e[0], e[1]);
                    link(e[2], e[3]);
                } else {
                    link(e[0], e[3]);
                    link(e[1], e[2]);
                }
            }
            _ => unreachable!("a cell boundary crosses the level an even number of times"),
        }
    }

    let mut visited = vec![false; 2 * sites];
    let mut contours = Vec::new();
    for start in 0..2 * sites {
        if visited[start] || links[start][0] == NONE {
            continue;
        }
        let mut poly = vec![crossing_point(u, start, level)];
        visited[start] = true;
        let mut prev = start;
        let mut cur = links[start][0] as usize;
        while cur != start {
            visited[cur] = true;
            let raw = crossing_point(u, cur, level);
            let last = poly[poly.len() - 1];
            poly.push([raw[0] + (last[0] - raw[0]).round(), raw[1] + (last[1] - raw[1]).round()]);
            let l = links[cur];
            let next = if l[0] as usize == prev { l[1] } else { l[0] } as usize;
            prev = cur;
            cur = next;
        }
        contours.push(poly);
    }
    Ok(contours)
}

/// The contour with the most vertices, or `None` when `u` never crosses
/// `level`.
pub fn extract_interface(u: &ScalarField, level: f64) -> Result<Option<FrontCurve>, ContourError> {
    Ok(extract_contours(u, level)?
        .into_iter()
        .max_by_key(|c| c.len())
        .map(FrontCurve::Polygon))
}

/// Distance from `p` to the segment `a b`, with the segment moved to the image
/// nearest `p`. Exact for segments shorter than half the period.
fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let a0 = [a[0] + (p[0] - a[0]).round(), a[1] + (p[1] - a[1]).round()];
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a0[0], p[1] - a0[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    torus_distance(&[a0[0] + t * ab[0], a0[1] + t * ab[1]], &p)
}

fn densify(poly: &[[f64; 2]], spacing: f64) -> Vec<[f64; 2]> {
    let n = poly.len();
    let mut out = Vec::new();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        // Closing segments of wrapping contours are measured through the
        // nearest image.
        let b = [b[0] + (a[0] - b[0]).round(), b[1] + (a[1] - b[1]).round()];
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        let k = (len / spacing).ceil().max(1.0) as usize;
        for j in 0..k {
            let t = j as f64 / k as f64;
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

fn directed(a: &[[f64; 2]], b: &[[f64; 2]], spacing: f64) -> f64 {
    let m = b.len();
    densify(a, spacing)
        .into_iter()
        .map(|p| {
            (0..m)
                .map(|j| {
                    let (s, e) = (b[j], b[(j + 1) % m]);
                    let e = [e[0] + (s[0] - e[0]).round(), e[1] + (s[1] - e[1]).round()];
                    point_segment_distance(p, s, e)
                })
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Hausdorff distance between two closed polygons on `T^2`. The first curve
/// is sampled at spacing `spacing`, the second treated as exact segments, and
/// vice versa.
pub fn hausdorff_distance(a: &[[f64; 2]], b: &[[f64; 2]], spacing: f64) -> f64 {
    directed(a, b, spacing).max(directed(b, a, spacing))
}

/// Samples a sphere front in `d = 2` as a polygon, for comparison with
/// extracted contours.
pub fn front_polygon(front: &FrontCurve, vertices: usize) -> Option<Vec<[f64; 2]>> {
    match front {
        FrontCurve::Polygon(p) => Some(p.clone()),
        FrontCurve::Sphere { center, radius } if center.len() == 2 => {
            match FrontCurve::circle_polygon([center[0], center[1]], *radius, vertices) {
                FrontCurve::Polygon(p) => Some(p),
                FrontCurve::Sphere { .. } => None,
            }
        }
        FrontCurve::Sphere { .. } => None,
    }
}

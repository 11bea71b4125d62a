//! Constructive flow connecting `delta_0` to `q_l = p_l * p_l`, where `p_l` is
//! uniform on the box `Lambda_l = {0, ..., l-1}^d`.
//!
//! `Psi` connects `delta_0` to `p_l` as a sum of steps `Psi_k` from `p_k` to
//! `p_{k+1}`. Each step grows the box one coordinate at a time; along a line
//! in direction `i` the mass `m` spread uniformly on `k` sites is respread on
//! `k + 1` sites by the bond flow `F(x, x+1) = m (x+1) / (k (k+1))`. Then
//! `Phi = Psi + Psi * p_l` connects `delta_0` to `p_l` and `p_l` to `q_l`.

/// A bond function on the box `{0, ..., 2l-2}^d`, stored as
/// `phi[x * d + j] = Phi(x, x + e_j)`. Bonds leaving the box carry no flow.
#[derive(Clone, Debug, PartialEq)]
pub struct Flow {
    ell: usize,
    dim: usize,
    side: usize,
    phi: Vec<f64>,
}

impl Flow {
    fn zero(ell: usize, dim: usize) -> Self {
        let side = 2 * ell - 1;
        Self {
            ell,
            dim,
            side,
            phi: vec![0.0; side.pow(dim as u32) * dim],
        }
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Side `2l - 1` of the supporting box.
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn site_count(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords.iter().rev().fold(0, |acc, &c| acc * self.side + c)
    }

    pub fn coords(&self, mut x: usize) -> Vec<usize> {
        (0..self.dim)
            .map(|_| {
                let c = x % self.side;
                x /= self.side;
                c
            })
            .collect()
    }

    /// `Phi(x, x + e_j)`; zero when `x` or `x + e_j` is outside the box.
    pub fn get(&self, coords: &[usize], j: usize) -> f64 {
        if coords.iter().any(|&c| c >= self.side) {
            return 0.0;
        }
        self.phi[self.index(coords) * self.dim + j]
    }

    /// Raw storage, `[x * d + j]`.
    pub fn values(&self) -> &[f64] {
        &self.phi
    }

    /// `q_l(x) = prod_j (l - |x_j - (l-1)|) / l^2`.
    pub fn target(&self, coords: &[usize]) -> f64 {
        let l = self.ell as f64;
        coords
            .iter()
            .map(|&c| (l - (c as f64 - (l - 1.0)).abs()) / (l * l))
            .product()
    }

    /// Outgoing flux `sum_j [Phi(x, x+e_j) - Phi(x-e_j, x)]` at a box site.
    pub fn divergence(&self, x: usize) -> f64 {
        let c = self.coords(x);
        (0..self.dim)
            .map(|j| {
                let back = if c[j] == 0 {
                    0.0
                } else {
                    self.phi[(x - self.side.pow(j as u32)) * self.dim + j]
                };
                self.phi[x * self.dim + j] - back
            })
            .sum()
    }

    /// `max_x |div Phi(x) - (delta_0 - q_l)(x)|` over the box.
    pub fn divergence_residual(&self) -> f64 {
        (0..self.site_count())
            .map(|x| {
                let delta = if x == 0 { 1.0 } else { 0.0 };
                (self.divergence(x) - (delta - self.target(&self.coords(x)))).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `||Phi||^2 = 1/2 sum_{x~y} Phi(x,y)^2`, i.e. the sum over unordered bonds.
    pub fn cost(&self) -> f64 {
        self.phi.iter().map(|v| v * v).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.phi.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Adds `Psi_k` (from `p_k` to `p_{k+1}`) to `out`.
fn add_step(out: &mut Flow, k: usize) {
    let d = out.dim;
    let kf = k as f64;
    for i in 0..d {
        // Before sweeping direction i, the mass is uniform on
        // [0,k]^i x [0,k-1]^{d-i}.
        let site_mass = 1.0 / ((kf + 1.0).powi(i as i32) * kf.powi((d - i) as i32));
        let line = kf * site_mass;
        let extents: Vec<usize> = (0..d).map(|j| if j < i { k + 1 } else { k }).collect();
        let lines: usize = (0..d).filter(|&j| j != i).map(|j| extents[j]).product();
        for l in 0..lines {
            let mut c = vec![0usize; d];
            let mut rest = l;
            for j in (0..d).filter(|&j| j != i) {
                c[j] = rest % extents[j];
                rest /= extents[j];
            }
            for x in 0..k {
                c[i] = x;
                let idx = out.index(&c) * d + i;
                out.phi[idx] += line * (x as f64 + 1.0) / (kf * (kf + 1.0));
            }
        }
    }
}

/// `out[x] = (1/l) sum_{s=0}^{l-1} in[x - s]` along axis `axis` of the box
/// (entries outside are zero), for every component.
fn box_filter(flow: &mut Flow, axis: usize) {
    let (side, d, l) = (flow.side, flow.dim, flow.ell);
    let stride = side.pow(axis as u32);
    let inv = 1.0 / l as f64;
    let mut buf = vec![0.0; side];
    for base in 0..flow.site_count() {
        if (base / stride) % side != 0 {
            continue;
        }
        for j in 0..d {
            let mut run = 0.0;
            for (s, b) in buf.iter_mut().enumerate() {
                run += flow.phi[(base + s * stride) * d + j];
                if s >= l {
                    run -= flow.phi[(base + (s - l) * stride) * d + j];
                }
                *b = run * inv;
            }
            for (s, b) in buf.iter().enumerate() {
                flow.phi[(base + s * stride) * d + j] = *b;
            }
        }
    }
}

/// `Phi^l` connecting `delta_0` and `q_l` in dimension `d`.
pub fn flow_construct(ell: usize, d: usize) -> Flow {
    assert!(ell >= 1 && d >= 1, "flow_construct needs l >= 1 and d >= 1");
    let mut psi = Flow::zero(ell, d);
    for k in 1..ell {
        add_step(&mut psi, k);
    }
    let mut conv = psi.clone();
    for axis in 0..d {
        box_filter(&mut conv, axis);
    }
    psi.phi.iter_mut().zip(&conv.phi).for_each(|(a, b)| *a += b);
    psi
}

/// Growth law of the flow cost.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScalingModel {
    Linear,
    Logarithmic,
    Bounded,
}

/// Least-squares fit `cost ~ a + b g(l)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingFit {
    pub model: ScalingModel,
    pub intercept: f64,
    pub slope: f64,
    pub r_squared: f64,
    /// `max cost / min cost` over the sample.
    pub spread: f64,
}

pub fn fit_scaling(ells: &[usize], costs: &[f64], model: ScalingModel) -> ScalingFit {
    assert_eq!(ells.len(), costs.len());
    let spread = costs.iter().fold(0.0f64, |m, &c| m.max(c)) / costs.iter().fold(f64::INFINITY, |m, &c| m.min(c));
    let g: Vec<f64> = ells
        .iter()
        .map(|&l| match model {
            ScalingModel::Linear => l as f64,
            ScalingModel::Logarithmic => (l as f64).ln(),
            ScalingModel::Bounded => 0.0,
        })
        .collect();
    let n = costs.len() as f64;
    let my = costs.iter().sum::<f64>() / n;
    let mg = g.iter().sum::<f64>() / n;
    let sgg: f64 = g.iter().map(|v| (v - mg).powi(2)).sum();
    let sgy: f64 = g.iter().zip(costs).map(|(a, b)| (a - mg) * (b - my)).sum();
    let slope = if sgg > 0.0 { sgy / sgg } else { 0.0 };
    let intercept = my - slope * mg;
    let ss_tot: f64 = costs.iter().map(|c| (c - my).powi(2)).sum();
    let ss_res: f64 = g
        .iter()
        .zip(costs)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    ScalingFit {
        model,
        intercept,
        slope,
        r_squared,
        spread,
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn unit_window_is_zero() {
        for d in 1..=3 {
            let f = flow_construct(1, d);
            assert_eq!(f.cost(), 0.0);
            assert_eq!(f.divergence_residual(), 0.0);
        }
    }

    #[test]
    fn two_site_window() {
        let f = flow_construct(2, 1);
        assert_eq!(f.get(&[0], 0), 0.75);
        assert_eq!(f.get(&[1], 0), 0.25);
        assert_eq!(f.get(&[2], 0), 0.0);
        assert_eq!(f.target(&[1]), 0.5);
        assert!(f.divergence_residual() < 1e-15);
    }

    #[test]
    fn step_magnitude_decays() {
        for d in 1..=3 {
            for k in [2usize, 4, 8] {
                let mut f = Flow::zero(k + 1, d);
                add_step(&mut f, k);
                assert!(f.max_abs() * (k as f64).powi(d as i32) <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn cost_growth_by_dimension() {
        let ells = [8usize, 16, 32, 64];
        let c1: Vec<f64> = ells.iter().map(|&l| flow_construct(l, 1).cost()).collect();
        let lin = fit_scaling(&ells, &c1, ScalingModel::Linear);
        assert!(lin.r_squared > 0.98 && lin.slope > 0.0, "{lin:?}");
        let ells3 = [4usize, 8, 16];
        let c3: Vec<f64> = ells3.iter().map(|&l| flow_construct(l, 3).cost()).collect();
        assert!(fit_scaling(&ells3, &c3, ScalingModel::Bounded).spread < 2.0, "{c3:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn divergence_is_exact(ell in 1usize..12, d in 1usize..4) {
            let f = flow_construct(ell, d);
            prop_assert!(f.divergence_residual() < 1e-13);
            let total: f64 = (0..f.site_count()).map(|x| f.target(&f.coords(x))).sum();
            prop_assert!((total - 1.0).abs() < 1e-13);
        }
    }
}

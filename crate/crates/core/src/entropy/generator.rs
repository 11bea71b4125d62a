//! Explicit generators on enumerable state spaces, used as oracles.
//!
//! State `s` is the configuration with `eta_x = (s >> x) & 1`.

use crate::entropy::adjoint::check_means;
use crate::entropy::EntropyError;
use crate::lattice::{Configuration, ScalarField, TorusLattice};
use crate::rates::RateSpec;

/// Largest number of sites accepted for enumeration.
pub const MAX_ENUMERATED_SITES: usize = 20;

fn check_size(lat: &TorusLattice) -> Result<usize, EntropyError> {
    let n = lat.site_count();
    if n > MAX_ENUMERATED_SITES {
        return Err(EntropyError::StateSpace { sites: n });
    }
    Ok(n)
}

/// Bernoulli product measure with site means `u`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductMeasure {
    mean: ScalarField,
}

impl ProductMeasure {
    pub fn new(mean: &ScalarField) -> Result<Self, EntropyError> {
        super::adjoint::check_open_unit(mean)?;
        Ok(Self { mean: mean.clone() })
    }

    pub fn mean(&self) -> &ScalarField {
        &self.mean
    }

    pub fn prob(&self, state: u64) -> f64 {
        self.mean
            .values()
            .iter()
            .enumerate()
            .map(|(x, &u)| if state >> x & 1 == 1 { u } else { 1.0 - u })
            .product()
    }

    /// Probabilities of all `2^{N^d}` states.
    pub fn probabilities(&self) -> Result<Vec<f64>, EntropyError> {
        let n = check_size(self.mean.lattice())?;
        Ok((0..1u64 << n).map(|s| self.prob(s)).collect())
    }

    /// `E[g(eta)]` by enumeration.
    pub fn expect(&self, g: impl Fn(&Configuration) -> f64) -> Result<f64, EntropyError> {
        let lat = self.mean.lattice();
        let n = check_size(lat)?;
        Ok((0..1u64 << n)
            .map(|s| self.prob(s) * g(&Configuration::from_state_index(lat, s)))
            .sum())
    }
}

/// Off-diagonal rates `Q(s, s')` of a continuous-time Markov chain, stored by
/// row. Diagonal entries are implied by conservation.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorMatrix {
    lattice: TorusLattice,
    rows: Vec<Vec<(u32, f64)>>,
}

impl GeneratorMatrix {
    /// `L_K f = 1/2 sum_{|x-y|=1} (f(eta^{x,y}) - f(eta))` over ordered pairs,
    /// scaled by `bond_rate`, so that each unordered bond exchanges at
    /// `bond_rate`.
    pub fn kawasaki(lat: &TorusLattice, bond_rate: f64) -> Result<Self, EntropyError> {
        Self::full(&RateSpec::constant(lat.dim(), 0.0, 0.0), lat, bond_rate, 0.0)
    }

    /// `L_G f = sum_x c_x(eta) (f(eta^x) - f(eta))`.
    pub fn glauber(spec: &RateSpec, lat: &TorusLattice) -> Result<Self, EntropyError> {
        Self::full(spec, lat, 0.0, 1.0)
    }

    /// `bond_rate * L_K + k * L_G`.
    pub fn full(spec: &RateSpec, lat: &TorusLattice, bond_rate: f64, k: f64) -> Result<Self, EntropyError> {
        let n = check_size(lat)?;
        let rates = spec.bind(lat)?;
        let mut rows = Vec::with_capacity(1 << n);
        for s in 0..1u64 << n {
            let cfg = Configuration::from_state_index(lat, s);
            let mut row: Vec<(u32, f64)> = Vec::new();
            let mut push = |t: u64, r: f64| {
                if r == 0.0 {
                    return;
                }
                match row.iter_mut().find(|(j, _)| *j as u64 == t) {
                    Some(e) => e.1 += r,
                    None => row.push((t as u32, r)),
                }
            };
            if bond_rate != 0.0 {
                for x in 0..n {
                    for y in lat.neighbors(x) {
                        if (s >> x & 1) != (s >> y & 1) {
                            push(s ^ (1 << x) ^ (1 << y), 0.5 * bond_rate);
                        }
                    }
                }
            }
            if k != 0.0 {
                for x in 0..n {
                    push(s ^ (1 << x), k * rates.glauber_rate(&cfg, x));
                }
            }
            row.sort_by_key(|e| e.0);
            rows.push(row);
        }
        Ok(Self {
            lattice: lat.clone(),
            rows,
        })
    }

    pub fn lattice(&self) -> &TorusLattice {
        &self.lattice
    }

    pub fn state_count(&self) -> usize {
        self.rows.len()
    }

    /// Off-diagonal transitions out of `state`.
    pub fn row(&self, state: usize) -> &[(u32, f64)] {
        &self.rows[state]
    }

    pub fn exit_rate(&self, state: usize) -> f64 {
        self.rows[state].iter().map(|e| e.1).sum()
    }

    /// `(Q f)(s) = sum_{s'} Q(s, s') (f(s') - f(s))`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .enumerate()
            .map(|(s, row)| row.iter().map(|&(t, r)| r * (f[t as usize] - f[s])).sum())
            .collect()
    }

    /// `L^{*,nu} 1(eta) = nu(eta)^{-1} sum_{eta'} Q(eta', eta) nu(eta')` for every
    /// state, diagonal included.
    pub fn adjoint_one(&self, nu: &ProductMeasure) -> Result<Vec<f64>, EntropyError> {
        if nu.mean().lattice() != &self.lattice {
            return Err(EntropyError::LatticeMismatch);
        }
        let p = nu.probabilities()?;
        let mut acc = vec![0.0; p.len()];
        for (s, row) in self.rows.iter().enumerate() {
            for &(t, r) in row {
                acc[t as usize] += r * p[s];
                acc[s] -= r * p[s];
            }
        }
        Ok(acc.iter().zip(&p).map(|(a, q)| a / q).collect())
    }

    /// `p0 exp(tQ)` by uniformization, truncated once the Poisson tail is
    /// below `1e-15`.
    pub fn transition_law(&self, p0: &[f64], t: f64) -> Result<Vec<f64>, EntropyError> {
        if p0.len() != self.rows.len() || !(t.is_finite() && t >= 0.0) {
            return Err(EntropyError::Invalid("initial law size or time".into()));
        }
        let lambda = (0..self.rows.len()).map(|s| self.exit_rate(s)).fold(0.0, f64::max);
        if lambda == 0.0 || t == 0.0 {
            return Ok(p0.to_vec());
        }
        let lt = lambda * t;
        let mut term = p0.to_vec();
        let mut weight = (-lt).exp();
        let mut out: Vec<f64> = term.iter().map(|v| weight * v).collect();
        let mut mass = weight;
        let mut n = 0u64;
        while 1.0 - mass > 1e-15 && n < 100_000 {
            n += 1;
            let mut next: Vec<f64> = term
                .iter()
                .enumerate()
                .map(|(s, v)| v * (1.0 - self.exit_rate(s) / lambda))
                .collect();
            for (s, row) in self.rows.iter().enumerate() {
                for &(t, r) in row {
                    next[t as usize] += term[s] * r / lambda;
                }
            }
            term = next;
            weight *= lt / n as f64;
            mass += weight;
            out.iter_mut().zip(&term).for_each(|(o, v)| *o += weight * v);
        }
        Ok(out)
    }
}

/// `L^{*,nu} 1(eta)` for a single configuration from the explicit generator.
pub fn brute_force_adjoint(gen: &GeneratorMatrix, u: &ScalarField, cfg: &Configuration) -> Result<f64, EntropyError> {
    check_means(u, cfg)?;
    let nu = ProductMeasure::new(u)?;
    Ok(gen.adjoint_one(&nu)?[cfg.state_index() as usize])
}

/// Exact Dirichlet forms of `f` (indexed by state) under `nu`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DirichletForms {
    /// `1/4 sum_{|x-y|=1} int (f(eta^{x,y}) - f)^2 dnu`.
    pub kawasaki: f64,
    /// `sum_x int c_x (f(eta^x) - f)^2 dnu`.
    pub glauber: f64,
}

impl DirichletForms {
    pub fn new(spec: &RateSpec, nu: &ProductMeasure, f: &[f64]) -> Result<Self, EntropyError> {
        let lat = nu.mean().lattice();
        let p = nu.probabilities()?;
        if f.len() != p.len() {
            return Err(EntropyError::Invalid(format!(
                "f has {} entries, expected {}",
                f.len(),
                p.len()
            )));
        }
        let rates = spec.bind(lat)?;
        let n = lat.site_count();
        let (mut dk, mut dg) = (0.0, 0.0);
        for (s, &ps) in p.iter().enumerate() {
            let cfg = Configuration::from_state_index(lat, s as u64);
            for x in 0..n {
                for y in lat.neighbors(x) {
                    let d = f[s ^ (1 << x) ^ (1 << y)] - f[s];
                    if s >> x & 1 != s >> y & 1 {
                        dk += ps * d * d;
                    }
                }
                let d = f[s ^ (1 << x)] - f[s];
                dg += ps * rates.glauber_rate(&cfg, x) * d * d;
            }
        }
        Ok(Self {
            kawasaki: 0.25 * dk,
            glauber: dg,
        })
    }

    /// `D_N = 2 N^2 D_K + K D_G`.
    pub fn total(&self, n: usize, k: f64) -> f64 {
        2.0 * (n * n) as f64 * self.kawasaki + k * self.glauber
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::adjoint::{adjoint_glauber_one, adjoint_kawasaki_one};
    use crate::entropy::testing::{random_case, rng};

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-10 * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn kawasaki_is_reversible_for_constant_means() {
        let lat = TorusLattice::new(1, 4).unwrap();
        let gen = GeneratorMatrix::kawasaki(&lat, 1.0).unwrap();
        let nu = ProductMeasure::new(&ScalarField::constant(&lat, 0.3)).unwrap();
        assert!(gen.adjoint_one(&nu).unwrap().iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn kawasaki_formula_matches_enumeration() {
        let mut r = rng(1);
        for (d, n) in [(1, 4), (2, 2)] {
            let lat = TorusLattice::new(d, n).unwrap();
            let gen = GeneratorMatrix::kawasaki(&lat, 1.0).unwrap();
            for _ in 0..50 {
                let (u, cfg) = random_case(&lat, &mut r);
                let a = adjoint_kawasaki_one(&u, &cfg).unwrap();
                let b = brute_force_adjoint(&gen, &u, &cfg).unwrap();
                assert!(close(a, b), "d={d} n={n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn kawasaki_fixed_example() {
        let lat = TorusLattice::new(1, 4).unwrap();
        let u = ScalarField::from_values(&lat, vec![0.3, 0.5, 0.5, 0.5]).unwrap();
        let cfg = Configuration::from_bits(&lat, &[true, false, false, false]).unwrap();
        let gen = GeneratorMatrix::kawasaki(&lat, 1.0).unwrap();
        let a = adjoint_kawasaki_one(&u, &cfg).unwrap();
        assert!(close(a, brute_force_adjoint(&gen, &u, &cfg).unwrap()));
        let nu = ProductMeasure::new(&u).unwrap();
        let mean = nu.expect(|c| adjoint_kawasaki_one(&u, c).unwrap()).unwrap();
        assert!(mean.abs() < 1e-13);
    }

    #[test]
    fn glauber_formula_matches_enumeration() {
        let mut r = rng(2);
        for (d, n) in [(1, 5), (2, 3)] {
            let spec = RateSpec::bistable_example(d);
            let lat = TorusLattice::new(d, n).unwrap();
            let gen = GeneratorMatrix::glauber(&spec, &lat).unwrap();
            for _ in 0..50 {
                let (u, cfg) = random_case(&lat, &mut r);
                let a = adjoint_glauber_one(&spec, &u, &cfg).unwrap().total();
                let b = brute_force_adjoint(&gen, &u, &cfg).unwrap();
                assert!(close(a, b), "d={d} n={n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn glauber_adjoint_is_centered() {
        let spec = RateSpec::bistable_example(1);
        let lat = TorusLattice::new(1, 4).unwrap();
        let (u, _) = random_case(&lat, &mut rng(3));
        let nu = ProductMeasure::new(&u).unwrap();
        let mean = nu
            .expect(|c| adjoint_glauber_one(&spec, &u, c).unwrap().total())
            .unwrap();
        assert!(mean.abs() < 1e-12, "{mean}");
    }

    #[test]
    fn centered_variable_moments() {
        let lat = TorusLattice::new(1, 3).unwrap();
        let (u, _) = random_case(&lat, &mut rng(4));
        let nu = ProductMeasure::new(&u).unwrap();
        assert!((nu.probabilities().unwrap().iter().sum::<f64>() - 1.0).abs() < 1e-14);
        for x in 0..3 {
            let e = nu
                .expect(|c| crate::entropy::CenteredVars::new(&u, c).unwrap().eta_bar[x])
                .unwrap();
            let m = nu
                .expect(|c| {
                    let v = crate::entropy::CenteredVars::new(&u, c).unwrap();
                    v.omega[x] * v.eta_bar[x]
                })
                .unwrap();
            assert!(e.abs() < 1e-14 && (m - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn size_limit() {
        let lat = TorusLattice::new(1, 21).unwrap();
        assert_eq!(
            GeneratorMatrix::kawasaki(&lat, 1.0).unwrap_err(),
            EntropyError::StateSpace { sites: 21 }
        );
    }

    #[test]
    fn transition_law_is_stochastic_and_stationary() {
        let spec = RateSpec::bistable_example(1);
        let lat = TorusLattice::new(1, 3).unwrap();
        let gen = GeneratorMatrix::full(&spec, &lat, 1.0, 1.0).unwrap();
        let mut p0 = vec![0.0; 8];
        p0[5] = 1.0;
        let p1 = gen.transition_law(&p0, 0.5).unwrap();
        assert!((p1.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        // Pure exchange preserves the product of equal means.
        let gk = GeneratorMatrix::kawasaki(&lat, 1.0).unwrap();
        let nu = ProductMeasure::new(&ScalarField::constant(&lat, 0.4)).unwrap();
        let p = nu.probabilities().unwrap();
        let pt = gk.transition_law(&p, 2.0).unwrap();
        assert!(p.iter().zip(&pt).all(|(a, b)| (a - b).abs() < 1e-14));
        // Small-time derivative recovers Q.
        let h = 1e-6;
        let ph = gen.transition_law(&p0, h).unwrap();
        for &(t, r) in gen.row(5) {
            assert!(((ph[t as usize] / h) - r).abs() < 1e-3 * r.max(1.0));
        }
    }

    #[test]
    fn dirichlet_forms_match_generator() {
        let spec = RateSpec::bistable_example(1);
        let lat = TorusLattice::new(1, 4).unwrap();
        let (u, _) = random_case(&lat, &mut rng(5));
        let nu = ProductMeasure::new(&ScalarField::constant(&lat, 0.35)).unwrap();
        let f: Vec<f64> = (0..16).map(|s| (s as f64 * 0.7).sin() + u.get(0)).collect();
        let forms = DirichletForms::new(&spec, &nu, &f).unwrap();
        // For the reversible exchange part, D_K = -E[f L_K f].
        let gk = GeneratorMatrix::kawasaki(&lat, 1.0).unwrap();
        let lf = gk.apply(&f);
        let p = nu.probabilities().unwrap();
        let quad: f64 = (0..16).map(|s| p[s] * f[s] * lf[s]).sum();
        assert!((forms.kawasaki + quad).abs() < 1e-12);
        assert!(forms.glauber > 0.0);
        assert!((forms.total(4, 2.0) - (32.0 * forms.kawasaki + 2.0 * forms.glauber)).abs() < 1e-12);
    }
}

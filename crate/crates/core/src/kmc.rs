//! Exact simulation of the process with generator `N^2 L_K + K L_G` by
//! uniformization.
//!
//! Exchanges across each unordered bond are proposed at rate `N^2` and flips
//! at each site at rate `K c_max`; a proposed flip is kept with probability
//! `c_x(eta) / c_max`. Since the majorants are constant, every proposal costs
//! O(1) and the jump chain is independent of the event times.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::lattice::{Configuration, ScalarField, TorusLattice};
use crate::rates::{LocalRates, RateError, RateSpec};

#[derive(Debug, Error, PartialEq)]
pub enum KmcError {
    #[error("target time {target} is before the current time {current}")]
    TimeReversed { target: f64, current: f64 },
    #[error("non-finite or negative rate parameter: {0}")]
    BadRate(String),
    #[error("time grid must be finite, nonnegative and nondecreasing")]
    BadGrid,
    #[error("ensemble needs at least one run")]
    NoRuns,
    #[error(transparent)]
    Rates(#[from] RateError),
}

/// Immutable description of the dynamics on one lattice; shared by all runs
/// of an ensemble.
#[derive(Debug)]
pub struct Dynamics {
    lattice: TorusLattice,
    rates: LocalRates,
    k: f64,
    bond_rate: f64,
    c_max: f64,
    kawasaki_total: f64,
    glauber_total: f64,
}

impl Dynamics {
    /// Physical scaling: each unordered bond exchanges at rate `N^2`.
    pub fn new(lattice: &TorusLattice, spec: &RateSpec, k: f64) -> Result<Self, KmcError> {
        let n = lattice.side() as f64;
        Self::with_bond_rate(lattice, spec, k, n * n)
    }

    /// Test mode: exchange rate per bond set independently of `N`
    /// (`0` freezes the Kawasaki part).
    pub fn with_bond_rate(lattice: &TorusLattice, spec: &RateSpec, k: f64, bond_rate: f64) -> Result<Self, KmcError> {
        if !(k.is_finite() && k >= 0.0) {
            return Err(KmcError::BadRate(format!("K = {k}")));
        }
        if !(bond_rate.is_finite() && bond_rate >= 0.0) {
            return Err(KmcError::BadRate(format!("bond rate = {bond_rate}")));
        }
        let c_max = spec.c_max();
        if !(c_max.is_finite() && c_max > 0.0) {
            return Err(KmcError::BadRate(format!("c_max = {c_max}")));
        }
        let rates = spec.bind(lattice)?;
        Ok(Self {
            lattice: lattice.clone(),
            rates,
            k,
            bond_rate,
            c_max,
            kawasaki_total: bond_rate * lattice.bond_count() as f64,
            glauber_total: k * c_max * lattice.site_count() as f64,
        })
    }

    pub fn lattice(&self) -> &TorusLattice {
        &self.lattice
    }

    pub fn rates(&self) -> &LocalRates {
        &self.rates
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn c_max(&self) -> f64 {
        self.c_max
    }

    /// Exchange rate of a single unordered bond.
    pub fn bond_rate(&self) -> f64 {
        self.bond_rate
    }

    /// Total majorant rate `R_K + R_G`.
    pub fn total_rate(&self) -> f64 {
        self.kawasaki_total + self.glauber_total
    }
}

/// Proposal bookkeeping of one sample path.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Counters {
    pub exchange_proposals: u64,
    /// Proposals that actually moved a particle (discordant bonds).
    pub exchanges_effective: u64,
    pub flip_proposals: u64,
    pub flips_accepted: u64,
    /// Sum of `c_x / c_max` over flip proposals.
    pub acceptance_sum: f64,
}

/// One sample path: configuration, macroscopic time and its own RNG stream.
#[derive(Clone, Debug)]
pub struct SimState {
    cfg: Configuration,
    t: f64,
    rng: ChaCha8Rng,
    dynamics: Arc<Dynamics>,
    counters: Counters,
}

impl SimState {
    pub fn new(cfg: Configuration, dynamics: Arc<Dynamics>, seed: u64) -> Self {
        Self::with_rng(cfg, dynamics, ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn with_rng(cfg: Configuration, dynamics: Arc<Dynamics>, rng: ChaCha8Rng) -> Self {
        assert_eq!(
            cfg.lattice(),
            dynamics.lattice(),
            "configuration lives on another lattice"
        );
        Self {
            cfg,
            t: 0.0,
            rng,
            dynamics,
            counters: Counters::default(),
        }
    }

    pub fn configuration(&self) -> &Configuration {
        &self.cfg
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn counters(&self) -> &Counters {
        &self.counters
    }

    /// Runs the chain up to `t_target` and leaves the state at exactly that
    /// time. The next event after `t_target` is discarded, which is exact by
    /// memorylessness.
    pub fn advance(&mut self, t_target: f64) -> Result<(), KmcError> {
        if !(t_target >= self.t) || !t_target.is_finite() {
            return Err(KmcError::TimeReversed {
                target: t_target,
                current: self.t,
            });
        }
        let dyn_ = Arc::clone(&self.dynamics);
        let total = dyn_.total_rate();
        if total == 0.0 {
            self.t = t_target;
            return Ok(());
        }
        let lat = &dyn_.lattice;
        let d = lat.dim();
        let bonds = lat.bond_count();
        let sites = lat.site_count();
        let p_kawasaki = dyn_.kawasaki_total / total;
        let inv_cmax = 1.0 / dyn_.c_max;
        let mut t = self.t;
        loop {
            let u: f64 = self.rng.random();
            t += -(1.0 - u).ln() / total;
            if t > t_target {
                break;
            }
            let pick: f64 = self.rng.random();
            if pick < p_kawasaki {
                let b = self.rng.random_range(0..bonds);
                let (x, i) = (b / d, b % d);
                let y = lat.forward(x, i);
                self.counters.exchange_proposals += 1;
                if self.cfg.get(x) != self.cfg.get(y) {
                    self.cfg.flip(x);
                    self.cfg.flip(y);
                    self.counters.exchanges_effective += 1;
                }
            } else {
                let x = self.rng.random_range(0..sites);
                let p = dyn_.rates.glauber_rate(&self.cfg, x) * inv_cmax;
                self.counters.flip_proposals += 1;
                self.counters.acceptance_sum += p;
                if self.rng.random::<f64>() < p {
                    self.cfg.flip(x);
                    self.counters.flips_accepted += 1;
                }
            }
        }
        self.t = t_target;
        Ok(())
    }
}

/// Independent Bernoulli(`u0(x)`) occupations. Values are clamped to `[0,1]`.
pub fn sample_initial<R: Rng>(profile: &ScalarField, rng: &mut R) -> Configuration {
    let lat = profile.lattice();
    let mut cfg = Configuration::empty(lat);
    for (x, &p) in profile.values().iter().enumerate() {
        if rng.random::<f64>() < p.clamp(0.0, 1.0) {
            cfg.set(x, true);
        }
    }
    cfg
}

/// [`sample_initial`] with a fresh stream from `seed`.
pub fn sample_initial_seeded(profile: &ScalarField, seed: u64) -> Configuration {
    sample_initial(profile, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// `<alpha^N, phi> = N^{-d} sum_x eta_x phi(x/N)`.
pub fn empirical_pairing(cfg: &Configuration, phi: impl Fn(&[f64]) -> f64) -> f64 {
    let lat = cfg.lattice();
    let sum: f64 = (0..lat.site_count())
        .filter(|&x| cfg.get(x))
        .map(|x| phi(&lat.position(x)))
        .sum();
    sum / lat.site_count() as f64
}

/// [`empirical_pairing`] against `phi` pre-sampled at the sites.
pub fn empirical_pairing_table(cfg: &Configuration, phi: &[f64]) -> f64 {
    let sum: f64 = phi
        .iter()
        .enumerate()
        .filter(|&(x, _)| cfg.get(x))
        .map(|(_, v)| v)
        .sum();
    sum / phi.len() as f64
}

/// Output of [`run_ensemble`].
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    pub times: Vec<f64>,
    /// `pairings[run][time][phi]`.
    pub pairings: Vec<Vec<Vec<f64>>>,
    /// `site_means[time][site]`, the across-run average of `eta_x(t)`.
    pub site_means: Vec<Vec<f64>>,
    /// Configurations of run 0 at each grid time.
    pub first_run: Vec<Configuration>,
    pub counters: Counters,
}

impl Ensemble {
    /// `(1/M) sum_runs <alpha^N(t), phi>`, indexed `[time][phi]`.
    pub fn mean_pairings(&self) -> Vec<Vec<f64>> {
        let m = self.pairings.len() as f64;
        let nt = self.times.len();
        let np = self.pairings.first().map_or(0, |r| r.first().map_or(0, Vec::len));
        let mut out = vec![vec![0.0; np]; nt];
        for run in &self.pairings {
            for (t, row) in run.iter().enumerate() {
                for (p, v) in row.iter().enumerate() {
                    out[t][p] += v;
                }
            }
        }
        out.iter_mut().flatten().for_each(|v| *v /= m);
        out
    }
}

struct RunOutput {
    pairings: Vec<Vec<f64>>,
    counts: Vec<Vec<u32>>,
    snapshots: Vec<Configuration>,
    counters: Counters,
}

/// `m` independent sample paths from `Bernoulli(profile)` initial data, run
/// `i` seeded with `base_seed + i`. Pairings are taken against the sampled
/// test functions `phis[k][site]` at every time of `t_grid`.
///
/// Runs execute on the rayon pool; results are merged in run order so the
/// output does not depend on scheduling.
pub fn run_ensemble(
    profile: &ScalarField,
    dynamics: &Arc<Dynamics>,
    t_grid: &[f64],
    m: usize,
    base_seed: u64,
    phis: &[Vec<f64>],
) -> Result<Ensemble, KmcError> {
    if m == 0 {
        return Err(KmcError::NoRuns);
    }
    if t_grid.iter().any(|t| !t.is_finite() || *t < 0.0) || t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(KmcError::BadGrid);
    }
    let sites = profile.lattice().site_count();
    let one_run = |i: usize| -> Result<RunOutput, KmcError> {
        let mut rng = ChaCha8Rng::seed_from_u64(base_seed.wrapping_add(i as u64));
        let cfg = sample_initial(profile, &mut rng);
        let mut state = SimState::with_rng(cfg, Arc::clone(dynamics), rng);
        let mut pairings = Vec::with_capacity(t_grid.len());
        let mut counts = Vec::with_capacity(t_grid.len());
        let mut snapshots = Vec::new();
        for &t in t_grid {
            state.advance(t)?;
            let c = state.configuration();
            pairings.push(phis.iter().map(|p| empirical_pairing_table(c, p)).collect());
            counts.push(c.iter().map(u32::from).collect());
            if i == 0 {
                snapshots.push(c.clone());
            }
        }
        Ok(RunOutput {
            pairings,
            counts,
            snapshots,
            counters: state.counters,
        })
    };

    let mut pairings = Vec::with_capacity(m);
    let mut totals = vec![vec![0u64; sites]; t_grid.len()];
    let mut first_run = Vec::new();
    let mut counters = Counters::default();
    // Chunking bounds the memory held by per-run occupation vectors.
    let chunk = (rayon::current_num_threads() * 4).max(1);
    for start in (0..m).step_by(chunk) {
        let outs: Vec<RunOutput> = (start..(start + chunk).min(m))
            .into_par_iter()
            .map(one_run)
            .collect::<Result<_, _>>()?;
        for (j, out) in outs.into_iter().enumerate() {
            for (tot, c) in totals.iter_mut().zip(&out.counts) {
                for (a, &b) in tot.iter_mut().zip(c) {
                    *a += b as u64;
                }
            }
            if start + j == 0 {
                first_run = out.snapshots;
            }
            counters.exchange_proposals += out.counters.exchange_proposals;
            counters.exchanges_effective += out.counters.exchanges_effective;
            counters.flip_proposals += out.counters.flip_proposals;
            counters.flips_accepted += out.counters.flips_accepted;
            counters.acceptance_sum += out.counters.acceptance_sum;
            pairings.push(out.pairings);
        }
    }
    let site_means = totals
        .into_iter()
        .map(|row| row.into_iter().map(|c| c as f64 / m as f64).collect())
        .collect();
    Ok(Ensemble {
        times: t_grid.to_vec(),
        pairings,
        site_means,
        first_run,
        counters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> TorusLattice {
        TorusLattice::new(1, n).unwrap()
    }

    #[test]
    fn degenerate_initial_profiles() {
        let lat = TorusLattice::new(2, 8).unwrap();
        let full = sample_initial_seeded(&ScalarField::constant(&lat, 1.0), 3);
        assert_eq!(full.particle_count(), 64);
        let empty = sample_initial_seeded(&ScalarField::constant(&lat, 0.0), 3);
        assert_eq!(empty.particle_count(), 0);
        let half = ScalarField::constant(&lat, 0.5);
        assert_eq!(sample_initial_seeded(&half, 9), sample_initial_seeded(&half, 9));
    }

    #[test]
    fn initial_count_concentrates() {
        let lat = TorusLattice::new(2, 100).unwrap();
        let half = ScalarField::constant(&lat, 0.5);
        for seed in 0..200 {
            let c = sample_initial_seeded(&half, seed).particle_count() as f64;
            assert!((c - 5000.0).abs() <= 4.0 * 50.0, "seed {seed}: {c}");
        }
    }

    #[test]
    fn pairing_examples() {
        let lat = line(4);
        let cfg = Configuration::from_bits(&lat, &[true, false, true, false]).unwrap();
        assert!((empirical_pairing(&cfg, |v| v[0]) - 0.125).abs() < 1e-15);
        assert_eq!(empirical_pairing(&Configuration::full(&lat), |_| 1.0), 1.0);
        assert_eq!(empirical_pairing(&Configuration::empty(&lat), |v| v[0] + 3.0), 0.0);
        let table: Vec<f64> = (0..4).map(|x| x as f64 / 4.0).collect();
        assert_eq!(empirical_pairing_table(&cfg, &table), 0.125);
    }

    #[test]
    fn advance_rejects_time_reversal() {
        let lat = line(8);
        let dy = Arc::new(Dynamics::new(&lat, &RateSpec::bistable_example(1), 1.0).unwrap());
        let mut s = SimState::new(Configuration::empty(&lat), dy, 0);
        s.advance(0.1).unwrap();
        assert!(matches!(s.advance(0.05), Err(KmcError::TimeReversed { .. })));
        assert_eq!(s.time(), 0.1);
    }

    #[test]
    fn kawasaki_conserves_particles() {
        let lat = line(32);
        let dy = Arc::new(Dynamics::new(&lat, &RateSpec::bistable_example(1), 0.0).unwrap());
        let cfg = sample_initial_seeded(&ScalarField::constant(&lat, 0.4), 1);
        let n0 = cfg.particle_count();
        let mut s = SimState::new(cfg, dy, 5);
        for k in 1..=10 {
            s.advance(0.01 * k as f64).unwrap();
            assert_eq!(s.configuration().particle_count(), n0);
        }
        assert!(s.counters().exchange_proposals > 0);
        assert_eq!(s.counters().flip_proposals, 0);
    }

    #[test]
    fn frozen_exchange_two_state_relaxation() {
        // Single-site marginal under flips only with c+ = c- = 1:
        // P(eta(t) = 1) = 1/2 + (eta(0) - 1/2) e^{-2 K t}.
        let lat = line(4);
        let spec = RateSpec::constant(1, 1.0, 1.0);
        let k = 2.0;
        let dy = Arc::new(Dynamics::with_bond_rate(&lat, &spec, k, 0.0).unwrap());
        let t = 1.0; // K t = 2
        let runs = 100_000u64;
        let occupied: u64 = (0..runs)
            .into_par_iter()
            .map(|i| {
                let mut s = SimState::new(Configuration::full(&lat), Arc::clone(&dy), i);
                s.advance(t).unwrap();
                s.configuration().get(0) as u64
            })
            .sum();
        let p = 0.5 + 0.5 * (-4.0f64).exp();
        let mean = occupied as f64 / runs as f64;
        let se = (p * (1.0 - p) / runs as f64).sqrt();
        assert!((mean - p).abs() < 4.0 * se, "{mean} vs {p}");
    }

    #[test]
    fn thinning_acceptance_bookkeeping() {
        let lat = line(64);
        let spec = RateSpec::bistable_example(1);
        let dy = Arc::new(Dynamics::new(&lat, &spec, 4.0).unwrap());
        assert_eq!(dy.c_max(), 35.0);
        let cfg = sample_initial_seeded(&ScalarField::constant(&lat, 0.5), 2);
        let mut s = SimState::new(cfg, dy, 4);
        s.advance(2.0).unwrap();
        let c = s.counters();
        let n = c.flip_proposals as f64;
        assert!(n > 1e4);
        let accepted = c.flips_accepted as f64 / n;
        let expected = c.acceptance_sum / n;
        // Bernoulli sum given the acceptance probabilities.
        let se = (0.25 / n).sqrt();
        assert!((accepted - expected).abs() < 4.0 * se, "{accepted} vs {expected}");
    }

    #[test]
    fn ensemble_is_deterministic_and_single_run_matches() {
        let lat = line(16);
        let spec = RateSpec::bistable_example(1);
        let dy = Arc::new(Dynamics::new(&lat, &spec, 2.0).unwrap());
        let profile = ScalarField::from_fn(&lat, |v| 0.25 + 0.5 * (v[0] > 0.5) as u8 as f64);
        let phis = vec![vec![1.0; 16], (0..16).map(|x| x as f64 / 16.0).collect()];
        let grid = [0.0, 0.01, 0.05];
        let a = run_ensemble(&profile, &dy, &grid, 5, 77, &phis).unwrap();
        let b = run_ensemble(&profile, &dy, &grid, 5, 77, &phis).unwrap();
        assert_eq!(a, b);

        let single = run_ensemble(&profile, &dy, &grid, 1, 77, &phis).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let cfg = sample_initial(&profile, &mut rng);
        let mut s = SimState::with_rng(cfg, Arc::clone(&dy), rng);
        for (ti, &t) in grid.iter().enumerate() {
            s.advance(t).unwrap();
            for (k, p) in phis.iter().enumerate() {
                assert_eq!(single.pairings[0][ti][k], empirical_pairing_table(s.configuration(), p));
            }
            assert_eq!(&single.first_run[ti], s.configuration());
        }
    }

    #[test]
    fn kawasaki_keeps_homogeneous_product_law() {
        let lat = line(32);
        let rho = 0.3;
        let dy = Arc::new(Dynamics::new(&lat, &RateSpec::bistable_example(1), 0.0).unwrap());
        let m = 2000;
        let e = run_ensemble(&ScalarField::constant(&lat, rho), &dy, &[0.0, 0.05], m, 1, &[]).unwrap();
        let band = 4.0 * (rho * (1.0 - rho) / m as f64).sqrt();
        for row in &e.site_means {
            for &v in row {
                // 4 sigma per site over 32 sites; allow the union bound margin.
                assert!((v - rho).abs() < 1.3 * band, "{v}");
            }
        }
    }

    #[test]
    fn exchange_activity_grows_with_n() {
        let spec = RateSpec::bistable_example(1);
        let mut prev = 0u64;
        for n in [16, 32, 64] {
            let lat = line(n);
            let dy = Arc::new(Dynamics::new(&lat, &spec, 0.0).unwrap());
            let cfg = sample_initial_seeded(&ScalarField::constant(&lat, 0.5), 3);
            let mut s = SimState::new(cfg, dy, 8);
            s.advance(0.05).unwrap();
            let eff = s.counters().exchanges_effective;
            assert!(eff > prev);
            prev = eff;
        }
    }
}

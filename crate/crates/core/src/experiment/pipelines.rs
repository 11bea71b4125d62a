//! End-to-end runs: particle ensemble against the hydrodynamic solution and
//! the sharp-interface limit, deviation tails, radius tracking, and the
//! sandwich check.

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use crate::entropy::entropy_proxy;
use crate::experiment::battery::{battery, TestFunction};
use crate::experiment::config::{ExperimentConfig, Front};
use crate::experiment::output::{f, write_field, write_table};
use crate::experiment::ExperimentError;
use crate::hydro::{energy_report, gradient_report, integrate, EnergyReport, GradientReport, HydroRun, Scheme};
use crate::interface::mmc::sphere_radius;
use crate::interface::sandwich::{
    calibrate, sandwich_check, CalibrationSearch, SandwichProblem, SandwichReport, SANDWICH_TOL,
};
use crate::interface::{extract_interface, FrontCurve, WaveCache};
use crate::kmc::{run_ensemble, Dynamics, Ensemble};
use crate::lattice::{ScalarField, TorusLattice};

fn lattice(config: &ExperimentConfig) -> Result<TorusLattice, ExperimentError> {
    Ok(TorusLattice::new(config.d, config.n)?)
}

/// `N^{-d} sum_x u_x phi(x/N)` against a pre-sampled table.
fn field_pairing(u: &ScalarField, table: &[f64]) -> f64 {
    u.values().iter().zip(table).map(|(a, b)| a * b).sum::<f64>() / table.len() as f64
}

/// Hydrodynamic solution with its gradient and energy checks.
#[derive(Clone, Debug)]
pub struct HydroOutcome {
    pub run: HydroRun,
    pub gradient: GradientReport,
    pub energy: EnergyReport,
}

impl HydroOutcome {
    pub fn passed(&self) -> bool {
        self.energy.holds && self.gradient.c_fit.is_finite()
    }

    /// `hydro_report.csv`: `t,sup_gradient,energy_lhs,energy_rhs`.
    pub fn write(&self, dir: &Path, raw: bool) -> Result<(), ExperimentError> {
        for (i, (t, u)) in self.run.times.iter().zip(&self.run.fields).enumerate() {
            write_field(dir, i, u, *t, raw)?;
        }
        let rows = (0..self.run.times.len()).map(|i| {
            vec![
                f(self.run.times[i]),
                f(self.gradient.sup_gradient[i]),
                f(self.energy.lhs[i]),
                f(self.energy.rhs[i]),
            ]
        });
        write_table(
            &dir.join("hydro_report.csv"),
            &["t", "sup_gradient", "energy_lhs", "energy_rhs"],
            rows,
        )?;
        Ok(())
    }
}

/// Slack on `C0 = sup U'` absorbing the difference between the discrete and
/// continuous gradient of the initial profile.
pub const C0_SLACK: f64 = 1.05;

/// Integrates from `u0` and evaluates the gradient bound with
/// `C0 = C0_SLACK * sup U'` and the energy inequality.
pub fn hydro_with_checks(
    u0: &ScalarField,
    config: &ExperimentConfig,
    k: f64,
    output_times: &[f64],
    cache: &WaveCache,
) -> Result<HydroOutcome, ExperimentError> {
    let run = integrate(u0, &config.spec, k, output_times, config.dt, Scheme::Rk4)?;
    let c0 = C0_SLACK * cache.get(0.0)?.max_slope();
    let gradient = gradient_report(&run, c0, k)?;
    let energy = energy_report(&run);
    Ok(HydroOutcome { run, gradient, energy })
}

pub fn run_hydro(config: &ExperimentConfig, cache: &WaveCache) -> Result<HydroOutcome, ExperimentError> {
    config.validate()?;
    let lat = lattice(config)?;
    let u0 = config.front.initial_profile(&lat, config.d0, config.k(), cache)?;
    hydro_with_checks(&u0, config, config.k(), &config.output_times(), cache)
}

/// Particle ensemble, hydrodynamic solution and sharp-interface pairings
/// against the battery.
#[derive(Clone, Debug)]
pub struct MainReport {
    pub times: Vec<f64>,
    pub functions: Vec<TestFunction>,
    /// `[run][time][phi]`.
    pub pairings: Vec<Vec<Vec<f64>>>,
    /// `[time][phi]`.
    pub kmc_mean: Vec<Vec<f64>>,
    pub kmc_std: Vec<Vec<f64>>,
    pub hydro: Vec<Vec<f64>>,
    /// `NaN` once a circle front is extinct.
    pub sharp: Vec<Vec<f64>>,
    pub site_means: Vec<Vec<f64>>,
    pub entropy_proxy: Vec<f64>,
    pub hydro_outcome: HydroOutcome,
}

impl MainReport {
    /// `max_{t,phi} |mean <alpha^N, phi> - <u^N, phi>|`.
    pub fn max_deviation(&self) -> f64 {
        self.deviations().fold(0.0, f64::max)
    }

    /// Average of `|mean <alpha^N, phi> - <u^N, phi>|` over times and battery.
    pub fn mean_deviation(&self) -> f64 {
        let (s, n) = self.deviations().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
        s / n as f64
    }

    fn deviations(&self) -> impl Iterator<Item = f64> + '_ {
        self.kmc_mean
            .iter()
            .zip(&self.hydro)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
    }

    /// `main_theorem.csv`, `pairings.csv`, `site_means.csv` and
    /// `entropy_proxy.csv`.
    pub fn write(&self, dir: &Path) -> Result<(), ExperimentError> {
        let mut rows = Vec::new();
        for (ti, t) in self.times.iter().enumerate() {
            for (pi, phi) in self.functions.iter().enumerate() {
                rows.push(vec![
                    f(*t),
                    phi.name(),
                    f(self.kmc_mean[ti][pi]),
                    f(self.kmc_std[ti][pi]),
                    f(self.hydro[ti][pi]),
                    f(self.sharp[ti][pi]),
                ]);
            }
        }
        write_table(
            &dir.join("main_theorem.csv"),
            &["t", "phi", "kmc_mean", "kmc_std", "hydro", "sharp"],
            rows,
        )?;
        write_ensemble_tables(dir, &self.times, &self.pairings, &self.site_means)?;
        let rows = self
            .times
            .iter()
            .zip(&self.entropy_proxy)
            .map(|(t, p)| vec![f(*t), f(*p)]);
        write_table(&dir.join("entropy_proxy.csv"), &["t", "proxy"], rows)?;
        Ok(())
    }
}

/// `pairings.csv` (`run,t,phi_id,value`) and `site_means.csv`
/// (`t,site,mean`).
pub fn write_ensemble_tables(
    dir: &Path,
    times: &[f64],
    pairings: &[Vec<Vec<f64>>],
    site_means: &[Vec<f64>],
) -> Result<(), ExperimentError> {
    let rows = pairings.iter().enumerate().flat_map(|(r, run)| {
        run.iter().enumerate().flat_map(move |(ti, row)| {
            row.iter()
                .enumerate()
                .map(move |(pi, v)| vec![r.to_string(), f(times[ti]), pi.to_string(), f(*v)])
        })
    });
    write_table(&dir.join("pairings.csv"), &["run", "t", "phi_id", "value"], rows)?;
    let rows = times.iter().zip(site_means).flat_map(|(t, means)| {
        means
            .iter()
            .enumerate()
            .map(move |(x, m)| vec![f(*t), x.to_string(), f(*m)])
    });
    write_table(&dir.join("site_means.csv"), &["t", "site", "mean"], rows)?;
    Ok(())
}

/// Particle ensemble alone, started from the product measure of the
/// configured front profile and paired with the battery.
pub fn run_simulation(
    config: &ExperimentConfig,
    cache: &WaveCache,
    times: &[f64],
    runs: usize,
) -> Result<Ensemble, ExperimentError> {
    config.validate()?;
    let lat = lattice(config)?;
    let k = config.k();
    let u0 = config.front.initial_profile(&lat, config.d0, k, cache)?;
    let tables: Vec<Vec<f64>> = battery(config.d).iter().map(|p| p.table(&lat)).collect();
    let dynamics = Arc::new(Dynamics::new(&lat, &config.spec, k)?);
    Ok(run_ensemble(&u0, &dynamics, times, runs, config.seed, &tables)?)
}

/// Largest side used for curvature-flow runs.
pub const MMC_MAX_SIDE: usize = 256;

/// Side for a curvature-flow run at `K`: `64 sqrt(K)` keeps about the same
/// number of sites across the interface, capped at `MMC_MAX_SIDE`.
pub fn mmc_side(k: f64) -> usize {
    ((64.0 * k.sqrt()).round() as usize).clamp(2, MMC_MAX_SIDE)
}

pub fn run_main_theorem_experiment(
    config: &ExperimentConfig,
    cache: &WaveCache,
) -> Result<MainReport, ExperimentError> {
    config.validate()?;
    let profile = config.spec.validate()?;
    let lat = lattice(config)?;
    let k = config.k();
    let times = config.time_grid();
    let u0 = config.front.initial_profile(&lat, config.d0, k, cache)?;
    let hydro_outcome = hydro_with_checks(&u0, config, k, &config.output_times(), cache)?;

    let functions = battery(config.d);
    let tables: Vec<Vec<f64>> = functions.iter().map(|p| p.table(&lat)).collect();
    let dynamics = Arc::new(Dynamics::new(&lat, &config.spec, k)?);
    let ens = run_ensemble(&u0, &dynamics, &times, config.runs, config.seed, &tables)?;

    let m = config.runs as f64;
    let kmc_mean = ens.mean_pairings();
    let kmc_std: Vec<Vec<f64>> = (0..times.len())
        .map(|ti| {
            (0..functions.len())
                .map(|pi| {
                    let mean = kmc_mean[ti][pi];
                    let ss: f64 = ens.pairings.iter().map(|r| (r[ti][pi] - mean).powi(2)).sum();
                    if config.runs > 1 {
                        (ss / (m - 1.0)).sqrt()
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let hydro: Vec<Vec<f64>> = hydro_outcome
        .run
        .fields
        .iter()
        .map(|u| tables.iter().map(|t| field_pairing(u, t)).collect())
        .collect();
    let sharp: Vec<Vec<f64>> = times
        .iter()
        .map(|&t| match config.front.at(t) {
            Ok(front) => functions
                .iter()
                .map(|p| front.sharp_pairing(p, profile.alpha1, profile.alpha2))
                .collect(),
            Err(_) => vec![f64::NAN; functions.len()],
        })
        .collect();
    let entropy_proxy = entropy_proxy(&ens.site_means, &hydro_outcome.run)?;
    Ok(MainReport {
        times,
        functions,
        pairings: ens.pairings,
        kmc_mean,
        kmc_std,
        hydro,
        sharp,
        site_means: ens.site_means,
        entropy_proxy,
        hydro_outcome,
    })
}

/// Empirical `P(|<alpha^N - u^N, phi>| > epsilon)` per time and function.
#[derive(Clone, Debug, PartialEq)]
pub struct TailReport {
    pub epsilon: f64,
    pub times: Vec<f64>,
    /// `[time][phi]`.
    pub frequency: Vec<Vec<f64>>,
}

impl TailReport {
    /// `tail.csv`: `t,phi_id,epsilon,frequency`.
    pub fn write(&self, dir: &Path) -> Result<(), ExperimentError> {
        let rows = self.times.iter().zip(&self.frequency).flat_map(|(t, row)| {
            row.iter()
                .enumerate()
                .map(move |(pi, fr)| vec![f(*t), pi.to_string(), f(self.epsilon), f(*fr)])
        });
        write_table(&dir.join("tail.csv"), &["t", "phi_id", "epsilon", "frequency"], rows)?;
        Ok(())
    }
}

pub fn run_deviation_tail(report: &MainReport, epsilon: f64) -> TailReport {
    let m = report.pairings.len() as f64;
    let frequency = (0..report.times.len())
        .map(|ti| {
            (0..report.functions.len())
                .map(|pi| {
                    let h = report.hydro[ti][pi];
                    report
                        .pairings
                        .iter()
                        .filter(|r| (r[ti][pi] - h).abs() > epsilon)
                        .count() as f64
                        / m
                })
                .collect()
        })
        .collect();
    TailReport {
        epsilon,
        times: report.times.clone(),
        frequency,
    }
}

/// Exact `P(|S/n - center| > epsilon)` for `S` a sum of independent
/// Bernoulli(`p_i`), by dynamic programming over the count distribution.
pub fn poisson_binomial_tail(probs: &[f64], center: f64, epsilon: f64) -> f64 {
    let n = probs.len();
    let mut dist = vec![0.0; n + 1];
    dist[0] = 1.0;
    for (i, &p) in probs.iter().enumerate() {
        for k in (0..=i + 1).rev() {
            let stay = dist[k] * (1.0 - p);
            let up = if k > 0 { dist[k - 1] * p } else { 0.0 };
            dist[k] = stay + up;
        }
    }
    dist.iter()
        .enumerate()
        .filter(|(k, _)| (*k as f64 / n as f64 - center).abs() > epsilon)
        .map(|(_, p)| p)
        .sum()
}

/// Extracted interface radius against the exact shrinking circle.
#[derive(Clone, Debug)]
pub struct RadiusSeries {
    pub k: f64,
    pub n: usize,
    pub times: Vec<f64>,
    /// Area-equivalent radius of the `alpha_star` level set.
    pub extracted: Vec<f64>,
    pub exact: Vec<f64>,
    pub fronts: Vec<FrontCurve>,
    pub hydro: HydroOutcome,
}

impl RadiusSeries {
    pub fn errors(&self) -> Vec<f64> {
        self.extracted.iter().zip(&self.exact).map(|(a, b)| a - b).collect()
    }

    /// `radius.csv` (`t,extracted_R,exact_R`) and `front_t*.csv`.
    pub fn write(&self, dir: &Path) -> Result<(), ExperimentError> {
        let rows = (0..self.times.len()).map(|i| vec![f(self.times[i]), f(self.extracted[i]), f(self.exact[i])]);
        write_table(&dir.join("radius.csv"), &["t", "extracted_R", "exact_R"], rows)?;
        for (i, front) in self.fronts.iter().enumerate() {
            let mut w = crate::experiment::output::create(&dir.join(format!("front_t{i:04}.csv")))?;
            front.write_csv(&mut w)?;
        }
        Ok(())
    }
}

/// Runs the hydrodynamic equation from the wave profile across a circle and
/// extracts the `alpha_star` level set at each output time.
pub fn radius_series(
    config: &ExperimentConfig,
    k: f64,
    n: usize,
    output_times: &[f64],
    cache: &WaveCache,
) -> Result<RadiusSeries, ExperimentError> {
    let Front::Circle { center, radius } = &config.front else {
        return Err(ExperimentError::Config("radius tracking needs a circle front".into()));
    };
    if config.d != 2 {
        return Err(ExperimentError::Config("radius tracking needs d = 2".into()));
    }
    let level = config.spec.validate()?.alpha_star;
    let lat = TorusLattice::new(2, n)?;
    let u0 = config.front.initial_profile(&lat, config.d0, k, cache)?;
    let hydro = hydro_with_checks(&u0, config, k, output_times, cache)?;
    let fronts: Vec<FrontCurve> = hydro
        .run
        .fields
        .par_iter()
        .map(|u| extract_interface(u, level)?.ok_or(ExperimentError::NoInterface))
        .collect::<Result<_, _>>()?;
    let exact = hydro
        .run
        .times
        .iter()
        .map(|&t| sphere_radius(*radius, center.len(), t).ok_or(ExperimentError::Extinct(t)))
        .collect::<Result<_, _>>()?;
    Ok(RadiusSeries {
        k,
        n,
        times: hydro.run.times.clone(),
        extracted: fronts.iter().map(FrontCurve::radius).collect(),
        exact,
        fronts,
        hydro,
    })
}

/// Calibrated (or configured) envelope constants and the resulting check.
#[derive(Clone, Debug)]
pub struct SandwichOutcome {
    pub m2: f64,
    pub m3: f64,
    pub report: SandwichReport,
    pub hydro: HydroOutcome,
}

pub fn run_sandwich(config: &ExperimentConfig, cache: &WaveCache) -> Result<SandwichOutcome, ExperimentError> {
    config.validate_sandwich()?;
    let Front::Circle { center, radius } = &config.front else {
        unreachable!("validate_sandwich requires a circle");
    };
    let problem = SandwichProblem {
        spec: config.spec.clone(),
        lattice: lattice(config)?,
        center: center.clone(),
        r0: *radius,
        d0: config.d0,
        k: config.k(),
        a: config.envelope.a,
        beta: config.envelope.beta,
    };
    let u0 = problem.initial_data(cache)?;
    let times = config.output_times();
    let hydro = hydro_with_checks(&u0, config, problem.k, &times, cache)?;
    let run = &hydro.run;
    let (m2, m3) = match (config.envelope.m2, config.envelope.m3) {
        (Some(m2), Some(m3)) => (m2, m3),
        _ => {
            let search = CalibrationSearch {
                t_end: config.t_end,
                ..CalibrationSearch::default()
            };
            calibrate(&problem, cache, run, times[0], &search, SANDWICH_TOL)?
        }
    };
    let env = problem.envelope_series(cache, m2, m3, &run.times)?;
    let report = sandwich_check(run, &env, SANDWICH_TOL)?;
    Ok(SandwichOutcome { m2, m3, report, hydro })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ExperimentConfig {
        "[lattice]\nd = 1\nn = 32\n[dynamics]\nk = 2\n[time]\nt_end = 0.01\noutputs = 2\n[ensemble]\nruns = 40\nseed = 3\n"
            .parse()
            .unwrap()
    }

    #[test]
    fn poisson_binomial_oracle() {
        // Fair coins, n = 4: P(|S/4 - 1/2| > 0.3) = P(S in {0, 4}) = 1/8.
        assert!((poisson_binomial_tail(&[0.5; 4], 0.5, 0.3) - 0.125).abs() < 1e-15);
        assert_eq!(poisson_binomial_tail(&[0.2, 0.7], 0.45, 2.0), 0.0);
    }

    #[test]
    fn main_experiment_is_reproducible() {
        let c = small_config();
        let cache = WaveCache::new(&c.spec);
        let a = run_main_theorem_experiment(&c, &cache).unwrap();
        let b = run_main_theorem_experiment(&c, &cache).unwrap();
        assert_eq!(a.pairings, b.pairings);
        assert_eq!(a.times, vec![0.0, 0.005, 0.01]);
        assert_eq!(a.functions.len(), 7);
        assert!(a.max_deviation() < 0.1, "{}", a.max_deviation());
        assert!(a.hydro_outcome.passed());
        let tail = run_deviation_tail(&a, 2.5);
        assert!(tail.frequency.iter().flatten().all(|&v| v == 0.0));
        let dir = tempfile::tempdir().unwrap();
        a.write(dir.path()).unwrap();
        let first = std::fs::read(dir.path().join("pairings.csv")).unwrap();
        b.write(dir.path()).unwrap();
        assert_eq!(first, std::fs::read(dir.path().join("pairings.csv")).unwrap());
        let head = std::fs::read_to_string(dir.path().join("site_means.csv")).unwrap();
        assert!(head.starts_with("t,site,mean\n0e0,0,"));
    }

    #[test]
    fn tail_at_time_zero_matches_exact_law() {
        let mut c = small_config();
        c.runs = 2000;
        c.t_end = 1e-4;
        c.outputs = 1;
        let cache = WaveCache::new(&c.spec);
        let rep = run_main_theorem_experiment(&c, &cache).unwrap();
        let eps = 0.06;
        let tail = run_deviation_tail(&rep, eps);
        let u0 = &rep.hydro_outcome.run.fields[0];
        let mean = u0.values().iter().sum::<f64>() / 32.0;
        let exact = poisson_binomial_tail(u0.values(), mean, eps);
        let sd = (exact * (1.0 - exact) / 2000.0).sqrt();
        assert!(
            (tail.frequency[0][0] - exact).abs() < 4.0 * sd + 1e-3,
            "{} vs {exact}",
            tail.frequency[0][0]
        );
    }

    #[test]
    fn hydro_outputs() {
        let mut c = small_config();
        c.raw = true;
        let cache = WaveCache::new(&c.spec);
        let out = run_hydro(&c, &cache).unwrap();
        assert!(out.passed());
        let dir = tempfile::tempdir().unwrap();
        out.write(dir.path(), true).unwrap();
        assert!(dir.path().join("field_t0002.bin").exists());
        let rep = std::fs::read_to_string(dir.path().join("hydro_report.csv")).unwrap();
        assert_eq!(rep.lines().count(), 4);
    }

    #[test]
    fn radius_tracking_on_a_coarse_grid() {
        let c = ExperimentConfig::default_for(2);
        let cache = WaveCache::new(&c.spec);
        let s = radius_series(&c, 4.0, 64, &[0.01], &cache).unwrap();
        assert_eq!(s.times, vec![0.0, 0.01]);
        assert!((s.exact[1] - 0.07f64.sqrt()).abs() < 1e-15);
        assert!(s.errors().iter().all(|e| e.abs() < 0.05), "{:?}", s.errors());
        let dir = tempfile::tempdir().unwrap();
        s.write(dir.path()).unwrap();
        assert!(dir.path().join("front_t0001.csv").exists());
    }
}

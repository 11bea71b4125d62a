//! The identity suite behind `gk verify`: every check compares a closed form
//! with an independent evaluation and reports the worst residual.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::entropy::{
    adjoint_glauber_one, adjoint_kawasaki_one, binomial_log_moment, brute_force_adjoint, cancellation_check,
    fit_scaling, flow_construct, h_field_identity, random_case, GeneratorMatrix, ScalingModel,
};
use crate::experiment::output::{f, write_table};
use crate::experiment::ExperimentError;
use crate::interface::solve_wave;
use crate::lattice::{Configuration, ScalarField, TorusLattice};
use crate::rates::RateSpec;

/// One line of `verify_report.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub max_residual: f64,
    pub tolerance: f64,
}

impl CheckResult {
    fn new(name: &str, max_residual: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            max_residual,
            tolerance,
        }
    }

    pub fn passed(&self) -> bool {
        self.max_residual <= self.tolerance
    }
}

fn cases(lat: &TorusLattice, count: usize, seed: u64) -> Vec<(ScalarField, Configuration)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_case(lat, &mut rng)).collect()
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

/// Roots, coefficients and balance of the symmetric example.
pub fn check_rate_algebra() -> Result<CheckResult, ExperimentError> {
    let spec = RateSpec::bistable_example(1);
    let p = spec.validate()?;
    let mut worst = [p.alpha1 - 0.25, p.alpha_star - 0.5, p.alpha2 - 0.75]
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    for (c, e) in spec.poly_coeffs().iter().zip([3.0, -22.0, 48.0, -32.0]) {
        worst = worst.max((c - e).abs());
    }
    let balance = spec.reaction_antiderivative(p.alpha2) - spec.reaction_antiderivative(p.alpha1);
    Ok(CheckResult::new("rate_algebra", worst.max(balance.abs()), 1e-10))
}

/// Closed-form exchange adjoint against enumeration on `d = 1, N = 4, 5` and
/// `d = 2, N = 2, 3` (`N = 2` has double bonds).
pub fn check_adjoint_kawasaki(seed: u64) -> Result<CheckResult, ExperimentError> {
    let mut worst = 0.0f64;
    for (d, n) in [(1, 4), (1, 5), (2, 2), (2, 3)] {
        let lat = TorusLattice::new(d, n)?;
        let gen = GeneratorMatrix::kawasaki(&lat, 1.0)?;
        for (u, cfg) in cases(&lat, 50, seed + 10 * d as u64 + n as u64) {
            let a = adjoint_kawasaki_one(&u, &cfg)?;
            worst = worst.max(relative(a, brute_force_adjoint(&gen, &u, &cfg)?));
        }
    }
    Ok(CheckResult::new("adjoint_kawasaki", worst, 1e-10))
}

/// Closed-form flip adjoint `F + linear` against enumeration on `d = 1`,
/// `N = 4, 5` and `d = 2, N = 3`.
pub fn check_adjoint_glauber(seed: u64) -> Result<CheckResult, ExperimentError> {
    let mut worst = 0.0f64;
    for (d, n) in [(1, 4), (1, 5), (2, 3)] {
        let spec = RateSpec::bistable_example(d);
        let lat = TorusLattice::new(d, n)?;
        let gen = GeneratorMatrix::glauber(&spec, &lat)?;
        for (u, cfg) in cases(&lat, 50, seed + 10 * d as u64 + n as u64) {
            let a = adjoint_glauber_one(&spec, &u, &cfg)?;
            let b = brute_force_adjoint(&gen, &u, &cfg)?;
            worst = worst.max(relative(a.total(), b)).max(relative(a.first_form, b));
        }
    }
    Ok(CheckResult::new("adjoint_glauber", worst, 1e-10))
}

/// Cancellation of the linear terms against the discretized equation.
pub fn check_cancellation(seed: u64) -> Result<CheckResult, ExperimentError> {
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (i, (d, n)) in [(1, 6), (2, 4)].into_iter().cycle().take(20).enumerate() {
        let spec = RateSpec::bistable_example(d);
        let lat = TorusLattice::new(d, n)?;
        let (u, cfg) = random_case(&lat, &mut rng);
        let k = 1.0 + i as f64;
        worst = worst.max(cancellation_check(&spec, k, &u, &cfg)?.residual());
    }
    Ok(CheckResult::new("cancellation", worst, 1e-9))
}

/// Window sizes for the flow checks: powers of two up to `max`.
pub fn flow_windows(max: usize) -> Vec<usize> {
    std::iter::successors(Some(1usize), |l| Some(l * 2))
        .take_while(|&l| l <= max)
        .collect()
}

/// Largest windows checked per dimension.
pub const FLOW_MAX_WINDOW: [usize; 3] = [256, 64, 32];

/// `(d, l, cost, divergence residual)` for every checked flow.
pub fn flow_table() -> Vec<(usize, usize, f64, f64)> {
    let jobs: Vec<(usize, usize)> = (1..=3)
        .flat_map(|d| flow_windows(FLOW_MAX_WINDOW[d - 1]).into_iter().map(move |l| (d, l)))
        .collect();
    jobs.par_iter()
        .map(|&(d, l)| {
            let fl = flow_construct(l, d);
            (d, l, fl.cost(), fl.divergence_residual())
        })
        .collect()
}

/// Divergence residuals and the cost growth per dimension: a linear fit in
/// `d = 1`, a logarithmic fit in `d = 2` (both on `l >= 8`), and the spread
/// `max / min` on `l >= 4` in `d = 3`.
pub fn check_flows() -> Vec<CheckResult> {
    let table = flow_table();
    let div = table.iter().fold(0.0f64, |m, r| m.max(r.3));
    let series = |d: usize, from: usize| -> (Vec<usize>, Vec<f64>) {
        table
            .iter()
            .filter(|r| r.0 == d && r.1 >= from)
            .map(|r| (r.1, r.2))
            .unzip()
    };
    let (l1, c1) = series(1, 8);
    let (l2, c2) = series(2, 8);
    let (l3, c3) = series(3, 4);
    let lin = fit_scaling(&l1, &c1, ScalingModel::Linear);
    let log = fit_scaling(&l2, &c2, ScalingModel::Logarithmic);
    let bounded = fit_scaling(&l3, &c3, ScalingModel::Bounded);
    vec![
        CheckResult::new("flow_divergence", div, 1e-12),
        CheckResult::new("flow_cost_linear_d1", 1.0 - lin.r_squared, 0.02),
        CheckResult::new("flow_cost_log_d2", 1.0 - log.r_squared, 0.02),
        CheckResult::new("flow_cost_bounded_d3", bounded.spread, 2.0),
    ]
}

/// Summation-by-parts identity and exchange invariance of `h`, 100 random
/// cases on `d = 1, N = 64` with `l in {2, 4}`.
pub fn check_h_field(seed: u64) -> Result<Vec<CheckResult>, ExperimentError> {
    let spec = RateSpec::bistable_example(1);
    let lat = TorusLattice::new(1, 64)?;
    let all = cases(&lat, 100, seed);
    let reports = all
        .par_iter()
        .enumerate()
        .map(|(i, (u, cfg))| h_field_identity(&spec, 1.0, u, cfg, if i % 2 == 0 { 2 } else { 4 }))
        .collect::<Result<Vec<_>, _>>()?;
    let res = reports.iter().fold(0.0f64, |m, r| m.max(r.residual));
    let exch = reports.iter().fold(0.0f64, |m, r| m.max(r.exchange_defect));
    Ok(vec![
        CheckResult::new("h_field_identity", res, 1e-9),
        CheckResult::new("h_field_exchange", exch, 0.0),
    ])
}

/// Exact binomial log-moment for `n <= 100` Bernoulli variables on `[0, 1]`,
/// `gamma in {1/4, 1/2, 1} / sigma^2`; the residual is the largest excess
/// `lhs - 2 gamma sigma^2`, which must not be positive.
pub fn check_concentration() -> Result<CheckResult, ExperimentError> {
    let mut worst = f64::NEG_INFINITY;
    for n in 1..=100u32 {
        let sigma2 = n as f64;
        for scale in [0.25, 0.5, 1.0] {
            let gamma = scale / sigma2;
            for i in 0..=20 {
                let p = i as f64 / 20.0;
                let lhs = binomial_log_moment(n, p, gamma)?;
                worst = worst.max(lhs - 2.0 * gamma * sigma2);
            }
        }
    }
    Ok(CheckResult::new("concentration", worst, 0.0))
}

/// Standing wave against `1/2 + tanh(z)/4`, and its speed.
pub fn check_standing_wave() -> Result<Vec<CheckResult>, ExperimentError> {
    let spec = RateSpec::bistable_example(1);
    let w = solve_wave(&spec, 0.0)?;
    let err =
        w.z.iter()
            .zip(&w.u)
            .map(|(z, u)| (u - (0.5 + 0.25 * z.tanh())).abs())
            .fold(0.0, f64::max);
    Ok(vec![
        CheckResult::new("standing_wave_profile", err, 1e-6),
        CheckResult::new("standing_wave_speed", w.speed.abs(), 1e-8),
        CheckResult::new("standing_wave_residual", w.residual(), 1e-8),
    ])
}

/// The whole suite.
pub fn run_verify(seed: u64) -> Result<Vec<CheckResult>, ExperimentError> {
    let mut out = vec![
        check_rate_algebra()?,
        check_adjoint_kawasaki(seed)?,
        check_adjoint_glauber(seed)?,
        check_cancellation(seed)?,
    ];
    out.extend(check_flows());
    out.extend(check_h_field(seed)?);
    out.push(check_concentration()?);
    out.extend(check_standing_wave()?);
    Ok(out)
}

/// `verify_report.csv`: `check_name,max_residual,pass`.
pub fn write_verify_report(dir: &Path, checks: &[CheckResult]) -> Result<(), ExperimentError> {
    let rows = checks
        .iter()
        .map(|c| vec![c.name.clone(), f(c.max_residual), c.passed().to_string()]);
    write_table(
        &dir.join("verify_report.csv"),
        &["check_name", "max_residual", "pass"],
        rows,
    )?;
    Ok(())
}

/// `flow_cost.csv`: `d,ell,cost`.
pub fn write_flow_costs(dir: &Path) -> Result<(), ExperimentError> {
    let rows = flow_table()
        .into_iter()
        .map(|(d, l, c, _)| vec![d.to_string(), l.to_string(), f(c)]);
    write_table(&dir.join("flow_cost.csv"), &["d", "ell", "cost"], rows)?;
    Ok(())
}

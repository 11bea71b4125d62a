//! `gk`: command-line driver for the simulator and the verification suite.
//!
//! Exit codes: 0 when every check passes, 1 on a violated check or a runtime
//! failure, 2 on a configuration error. `GK_THREADS` caps the worker pool.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gk_core::experiment::config::parse_list;
use gk_core::experiment::output::{create, f, write_table};
use gk_core::experiment::{
    mmc_side, radius_series, run_deviation_tail, run_hydro, run_main_theorem_experiment, run_sandwich, run_simulation,
    run_verify, write_ensemble_tables, write_flow_costs, write_verify_report, ExperimentConfig, ExperimentError, Front,
};
use gk_core::interface::WaveCache;

#[derive(Parser)]
#[command(
    name = "gk",
    version,
    about = "Glauber-Kawasaki particle systems and their sharp-interface limit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Particle ensemble: pairings.csv and site_means.csv.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        runs: Option<usize>,
        /// Comma-separated observation times.
        #[arg(long = "t-grid")]
        t_grid: Option<String>,
    },
    /// Hydrodynamic equation with the gradient and energy checks.
    Hydro {
        #[command(flatten)]
        common: Common,
    },
    /// Travelling-wave profiles for the configured deltas.
    Wave {
        #[command(flatten)]
        common: Common,
    },
    /// Interface radius against the exact shrinking circle for each K.
    Mmc {
        #[command(flatten)]
        common: Common,
    },
    /// Envelope sandwich check.
    Sandwich {
        #[command(flatten)]
        common: Common,
    },
    /// Identity suite.
    Verify {
        #[command(flatten)]
        common: Common,
    },
    /// Full comparison of particles, hydrodynamics and the sharp interface.
    Experiment {
        #[command(flatten)]
        common: Common,
    },
}

/// Relative radius tolerance for the curvature-flow comparison.
const MMC_REL_TOL: f64 = 0.02;

fn load(common: &Common) -> Result<ExperimentConfig, ExperimentError> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default_for(2),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out) = &common.out {
        config.out_dir = out.clone();
    }
    Ok(config)
}

fn report(name: &str, passed: bool, detail: String) -> bool {
    println!("{} {name}: {detail}", if passed { "PASS" } else { "FAIL" });
    passed
}

fn simulate(config: &ExperimentConfig, runs: Option<usize>, t_grid: Option<&str>) -> Result<bool, ExperimentError> {
    let times = match t_grid {
        Some(s) => parse_list(s).map_err(|_| ExperimentError::Config(format!("--t-grid {s:?} is not a list")))?,
        None => config.time_grid(),
    };
    let runs = runs.unwrap_or(config.runs);
    let cache = WaveCache::new(&config.spec);
    let ens = run_simulation(config, &cache, &times, runs)?;
    write_ensemble_tables(&config.out_dir, &ens.times, &ens.pairings, &ens.site_means)?;
    println!(
        "{runs} runs, {} times, written to {}",
        times.len(),
        config.out_dir.display()
    );
    Ok(true)
}

fn hydro(config: &ExperimentConfig) -> Result<bool, ExperimentError> {
    let cache = WaveCache::new(&config.spec);
    let outcome = run_hydro(config, &cache)?;
    outcome.write(&config.out_dir, config.raw)?;
    let g = &outcome.gradient;
    let a = report(
        "energy",
        outcome.energy.holds,
        format!(
            "dissipation integral {:e}",
            outcome.energy.dissipation_integral.last().copied().unwrap_or(0.0)
        ),
    );
    let b = report(
        "gradient",
        g.c_fit.is_finite(),
        format!("C0 = {:e}, fitted C = {:e}", g.c0, g.c_fit),
    );
    Ok(a && b)
}

fn wave(config: &ExperimentConfig) -> Result<bool, ExperimentError> {
    let cache = WaveCache::new(&config.spec);
    let mut summary = Vec::new();
    for (i, &delta) in config.wave_deltas.iter().enumerate() {
        let w = cache.get(delta)?;
        let name = if i == 0 {
            "wave_profile.csv".to_string()
        } else {
            format!("wave_profile_{i}.csv")
        };
        let rows = w.z.iter().zip(&w.u).map(|(z, u)| vec![f(*z), f(*u)]);
        write_table(&config.out_dir.join(name), &["z", "U"], rows)?;
        summary.push(vec![f(delta), f(w.speed), f(w.u_minus), f(w.u_plus), f(w.residual())]);
        println!("delta = {delta}: speed {:e}, residual {:e}", w.speed, w.residual());
    }
    write_table(
        &config.out_dir.join("wave_speeds.csv"),
        &["delta", "speed", "u_minus", "u_plus", "residual"],
        summary,
    )?;
    Ok(true)
}

fn mmc(config: &ExperimentConfig) -> Result<bool, ExperimentError> {
    let Front::Circle { radius, .. } = &config.front else {
        return Err(ExperimentError::Config(
            "curvature-flow runs need a circle front".into(),
        ));
    };
    let cache = WaveCache::new(&config.spec);
    let mut ok = true;
    for &k in &config.mmc_k_values {
        let n = mmc_side(k);
        let series = radius_series(config, k, n, &config.output_times(), &cache)?;
        series.write(&config.out_dir.join(format!("k{k}")))?;
        let worst = series.errors().iter().fold(0.0f64, |m, e| m.max(e.abs()));
        ok &= report(
            &format!("radius K={k} N={n}"),
            worst <= MMC_REL_TOL * radius,
            format!("max |R - R_exact| = {worst:e}"),
        );
    }
    Ok(ok)
}

fn sandwich(config: &ExperimentConfig) -> Result<bool, ExperimentError> {
    let cache = WaveCache::new(&config.spec);
    let outcome = run_sandwich(config, &cache)?;
    let mut w = create(&config.out_dir.join("sandwich_report.csv"))?;
    outcome.report.write_csv(&mut w)?;
    Ok(report(
        "sandwich",
        outcome.report.passed(),
        format!(
            "m2 = {}, m3 = {}, max violation {:e}",
            outcome.m2,
            outcome.m3,
            outcome.report.max_violation()
        ),
    ))
}

fn verify(config: &ExperimentConfig) -> Result<bool, ExperimentError> {
    let checks = run_verify(config.seed)?;
    write_verify_report(&config.out_dir, &checks)?;
    write_flow_costs(&config.out_dir)?;
    let mut ok = true;
    for c in &checks {
        ok &= report(
            &c.name,
            c.passed(),
            format!("{:e} (tolerance {:e})", c.max_residual, c.tolerance),
        );
    }
    Ok(ok)
}

fn experiment(config: &ExperimentConfig) -> Result<bool, ExperimentError> {
    let cache = WaveCache::new(&config.spec);
    let main = run_main_theorem_experiment(config, &cache)?;
    main.write(&config.out_dir)?;
    main.hydro_outcome.write(&config.out_dir, config.raw)?;
    run_deviation_tail(&main, config.epsilon).write(&config.out_dir)?;
    println!(
        "max |mean pairing - hydro| = {:e}, mean {:e}",
        main.max_deviation(),
        main.mean_deviation()
    );
    Ok(report(
        "hydro checks",
        main.hydro_outcome.passed(),
        format!("{} runs", config.runs),
    ))
}

fn init_threads() -> Result<(), ExperimentError> {
    if let Ok(v) = std::env::var("GK_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| ExperimentError::Config(format!("GK_THREADS = {v:?} is not a count")))?;
        // Fails only if the pool was already built, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

type Job = Box<dyn Fn(&ExperimentConfig) -> Result<bool, ExperimentError>>;

fn dispatch(command: &Command) -> Result<bool, ExperimentError> {
    init_threads()?;
    let (common, run): (&Common, Job) = match command {
        Command::Simulate { common, runs, t_grid } => {
            let runs = *runs;
            let t_grid = t_grid.clone();
            (common, Box::new(move |c| simulate(c, runs, t_grid.as_deref())))
        }
        Command::Hydro { common } => (common, Box::new(hydro)),
        Command::Wave { common } => (common, Box::new(wave)),
        Command::Mmc { common } => (common, Box::new(mmc)),
        Command::Sandwich { common } => (common, Box::new(sandwich)),
        Command::Verify { common } => (common, Box::new(verify)),
        Command::Experiment { common } => (common, Box::new(experiment)),
    };
    let config = load(common)?;
    std::fs::create_dir_all(&config.out_dir)?;
    run(&config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("gk: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

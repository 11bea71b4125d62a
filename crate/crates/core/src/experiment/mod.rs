//! Configured experiment pipelines, the identity suite and their file output.

pub mod battery;
pub mod config;
pub mod output;
pub mod pipelines;
pub mod verify;

use thiserror::Error;

use crate::entropy::EntropyError;
use crate::hydro::HydroError;
use crate::interface::contour::ContourError;
use crate::interface::distance::DistanceError;
use crate::interface::envelope::EnvelopeError;
use crate::interface::mmc::MmcError;
use crate::interface::sandwich::SandwichError;
use crate::interface::wave::WaveError;
use crate::kmc::KmcError;
use crate::lattice::LatticeError;
use crate::rates::RateError;

pub use battery::{battery, TestFunction, Wave};
pub use config::{EnvelopeConfig, ExperimentConfig, Front, KRule};
pub use pipelines::{
    hydro_with_checks, mmc_side, poisson_binomial_tail, radius_series, run_deviation_tail, run_hydro,
    run_main_theorem_experiment, run_sandwich, run_simulation, write_ensemble_tables, HydroOutcome, MainReport,
    RadiusSeries, SandwichOutcome, TailReport,
};
pub use verify::{run_verify, write_flow_costs, write_verify_report, CheckResult};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("the front is extinct at t = {0}")]
    Extinct(f64),
    #[error("no interface found in the field")]
    NoInterface,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Rates(#[from] RateError),
    #[error(transparent)]
    Hydro(#[from] HydroError),
    #[error(transparent)]
    Kmc(#[from] KmcError),
    #[error(transparent)]
    Wave(#[from] WaveError),
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
    #[error(transparent)]
    Distance(#[from] DistanceError),
    #[error(transparent)]
    Contour(#[from] ContourError),
    #[error(transparent)]
    Mmc(#[from] MmcError),
    #[error(transparent)]
    Sandwich(#[from] SandwichError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
}

impl ExperimentError {
    /// Process exit code: 2 for configuration errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            _ => 1,
        }
    }
}

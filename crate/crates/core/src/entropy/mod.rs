//! Executable versions of the relative-entropy machinery: centered variables,
//! adjoints of the generators acting on `1`, enumeration oracles, product
//! relative entropy, the flow-lemma construction, the `h`-field identity and
//! the concentration inequality.

mod adjoint;
mod concentration;
mod flow;
mod generator;
mod hfield;
mod kl;

use rand::Rng;
use thiserror::Error;

use crate::lattice::{Configuration, LatticeError, ScalarField, TorusLattice};
use crate::rates::RateError;

pub use adjoint::{
    adjoint_glauber_one, adjoint_kawasaki_one, cancellation_check, chi, fabc_coefficients, Cancellation, CenteredVars,
    GlauberAdjoint, MEAN_GUARD,
};
pub use concentration::{binomial_log_moment, concentration_check, ConcentrationReport, TwoPoint, BOOTSTRAP_RESAMPLES};
pub use flow::{fit_scaling, flow_construct, Flow, ScalingFit, ScalingModel};
pub use generator::{brute_force_adjoint, DirichletForms, GeneratorMatrix, ProductMeasure, MAX_ENUMERATED_SITES};
pub use hfield::{h_field_identity, HFieldReport};
pub use kl::{entropy_proxy, relative_entropy_product};

#[derive(Debug, Error, PartialEq)]
pub enum EntropyError {
    #[error("mean u_{site} = {value} is not inside (0, 1)")]
    MeanOutOfRange { site: usize, value: f64 },
    #[error("fields live on different lattices")]
    LatticeMismatch,
    #[error("{sites} sites exceed the enumeration limit of {MAX_ENUMERATED_SITES}")]
    StateSpace { sites: usize },
    #[error("lattice side {side} too small for window l = {ell} (need side > {need})")]
    WindowOverflow { side: usize, ell: usize, need: usize },
    #[error("gamma = {gamma} outside (0, 1/sigma^2 = {limit}]")]
    GammaRange { gamma: f64, limit: f64 },
    #[error("time grids differ: {0} vs {1} points")]
    GridMismatch(usize, usize),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Rates(#[from] RateError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// A random test case: `u` uniform on `[0.2, 0.8]` per site, keeping `chi(u)`
/// away from zero, and `eta` Bernoulli(1/2).
pub fn random_case<R: Rng>(lat: &TorusLattice, rng: &mut R) -> (ScalarField, Configuration) {
    let n = lat.site_count();
    let u = (0..n).map(|_| rng.random_range(0.2..0.8)).collect();
    let bits: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
    (
        ScalarField::from_values(lat, u).expect("sized to the lattice"),
        Configuration::from_bits(lat, &bits).expect("sized to the lattice"),
    )
}

//! Simulation and verification toolkit for Glauber–Kawasaki interacting
//! particle systems under the scaling `N^2 L_K + K L_G`.
//!
//! The crate follows the chain particle system → discretized Allen–Cahn
//! equation → sharp interface → motion by mean curvature:
//!
//! * [`lattice`]: torus geometry, configurations, fields, discrete operators.
//! * [`rates`]: Glauber rates, reaction polynomial and their validation.
//! * [`kmc`]: exact continuous-time simulation by thinning.
//! * [`hydro`]: the discretized hydrodynamic equation and its estimates.
//! * [`interface`]: traveling waves, envelopes, curvature flow, contours.
//! * [`entropy`]: adjoint identities, flows, relative entropy, concentration.
//! * [`experiment`]: configuration, orchestration and file output.
//! * [`ode`]: the adaptive integrator used for waves and scalar references.

// `!(x > 0.0)` also rejects NaN, which is the point of those guards.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod entropy;
pub mod experiment;
pub mod hydro;
pub mod interface;
pub mod kmc;
pub mod lattice;
pub mod ode;
pub mod rates;

pub use lattice::{Configuration, ScalarField, TorusLattice};
pub use rates::{BistableProfile, RateSpec};

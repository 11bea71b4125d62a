//! Sharp-interface objects: traveling waves, the modified distance to a
//! front, the envelopes `rho_+-`, mean curvature flow references, contour
//! extraction and the sandwich check.

pub mod contour;
pub mod distance;
pub mod envelope;
pub mod mmc;
pub mod sandwich;
pub mod wave;

pub use contour::{extract_contours, extract_interface, hausdorff_distance};
pub use distance::{signed_distance_sphere, smooth_cutoff, DistanceField};
pub use envelope::{rho_envelopes, wave_initial_data, EnvelopeParams, WaveCache};
pub use mmc::{mmc_reference, FrontCurve};
pub use sandwich::{calibrate, sandwich_check, SandwichProblem, SandwichReport};
pub use wave::{solve_wave, WaveSolution};

//! Simulation of two-path interference experiments.
//!
//! Every run follows the same two-stage contract: a state is first evolved by
//! unitary maps built from optical elements, then individual detection events
//! are drawn from the resulting Born probabilities. Patterns on a screen are
//! built up one sampled event at a time and compared against their analytic
//! forms.
//!
//! Modules:
//! - [`quantum`]: state vectors, operators, density matrices, partial trace,
//!   projective measurement.
//! - [`optics`]: slits, beam splitters, phase shifters, absorbers, polarizers,
//!   which-path markers and the photoelectric detector model.
//! - [`experiments`]: the double slit, which-path, neutron absorber,
//!   Mach-Zehnder, delayed choice and quantum eraser setups.
//! - [`montecarlo`]: seeded event sampling, histograms, visibility and
//!   goodness-of-fit estimators.
//! - [`scenario`]: scenario files, the run contract and result serialization.

pub mod error;
pub mod experiments;
pub mod montecarlo;
pub mod optics;
pub mod quantum;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
pub use experiments::{DualityParams, ScreenGrid, ScreenPattern};
pub use montecarlo::{EventRecord, Histogram, Outcome, RunSummary};
pub use quantum::{DensityMatrix, Operator, StateVector, Subsystem};
pub use scenario::{ResultBundle, Scenario};

/// Complex amplitude type used throughout the crate.
pub type C64 = num_complex::Complex64;

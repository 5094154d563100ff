//! Generic surrogate modeling.
//!
//! Builds globally accurate interpolants of expensive black-box functions
//! from a handful of samples by borrowing structure from a database of
//! related response functions:
//!
//! 1. [`alignment`]: register the database entries onto a reference entry
//!    with per-axis affine maps of inputs and outputs.
//! 2. [`pod`]: extract the dominant modes of the aligned database.
//! 3. [`gappy`]: fit those modes to the scattered samples of a new function,
//!    yielding a generic surrogate model.
//! 4. [`hierarchical`]: interpolate the samples with Kriging, using the
//!    generic surrogate model as the trend.
//! 5. [`sampling`]: Latin hypercube designs and adaptive infill.
//!
//! [`testbed`] supplies an analytic function family to exercise the
//! pipeline end to end, and [`experiment`] runs the comparison sweeps that
//! the command-line tool exposes.
//!
//! Runnable walkthroughs of each stage live in the crate's `examples/`
//! directory (`cargo run --release --example <name>`).

pub mod alignment;
pub mod cli;
pub mod domain;
pub mod error;
pub mod experiment;
pub mod gappy;
pub mod hierarchical;
pub mod kriging;
pub mod optim;
pub mod persist;
pub mod pod;
pub mod sampling;
pub mod testbed;

pub use domain::{Domain, FnSurface, ResponseSurface, SampleSet};
pub use error::{Error, Result};

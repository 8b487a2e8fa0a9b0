//! Talbot matter-wave carpets from Gaussian slits with inter-slit decoherence.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod cli;
pub mod decoherence;
pub mod diagnostics;
pub mod error;
pub mod flow;
pub mod model;
pub mod oracle;
pub mod stats;
pub mod wavefield;

pub use error::{Error, Result};
pub use model::{DecoherenceParams, GratingSpec, Model, SimulationGrid};

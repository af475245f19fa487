//! Simulation of driven dissipative quantum emitters observed through a
//! bandwidth-limited detector mode.
//!
//! The crate is organized bottom-up:
//!
//! - [`qops`]: space layouts, transition/ladder operators, tensor embedding.
//! - [`liouville`]: Lindblad models, superoperators, steady states, propagation.
//! - [`correl`]: regression-theorem correlations, emission spectra, g².
//! - [`models`]: the Λ emitter, emitter + detector, and closed-form references.
//! - [`atomic`]: Wigner 3-j symbols, dipole couplings and hyperfine/Zeeman builders.
//! - [`config`] and [`runner`]: flat key-value run configuration, presets and
//!   the task runner behind the `sps` binary.
//! - [`setup`]: a model paired with the observed emission channel.
//!
//! All rates and frequencies are in units of the emitter linewidth.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod atomic;
pub mod config;
pub mod correl;
pub mod error;
pub mod liouville;
pub mod models;
pub mod qops;
pub mod runner;
pub mod setup;

pub use error::{Error, Result};
pub use liouville::{Collapse, DensityMatrix, LindbladModel, Superoperator};
pub use qops::{Operator, SpaceLayout};

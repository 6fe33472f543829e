//! Simulation and support analysis for piecewise deterministic Markov
//! processes driven by randomly switched ODE flows.
//!
//! The crate is organized bottom-up:
//!
//! - [`sysdef`]: switching systems from declarative config (fields, `Q(x)`, rate, box).
//! - [`flow`]: adaptive single-mode flows, jump schedules, path probabilities.
//! - [`reach`]: cell-grid reachability graph, control sets, domains of
//!   attraction and the accessible set.
//! - [`lie`]: Lie brackets and the accessibility rank condition.
//! - [`pdmp`]: the switching process itself, occupation measures and the
//!   support, tube, entry and mixing diagnostics.
//! - [`cli`]: the `pdmp` command-line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod flow;
pub mod lie;
pub mod pdmp;
pub mod reach;
pub mod sysdef;

#[cfg(feature = "cli")]
pub mod cli;

pub use error::{Error, Result};
pub use sysdef::{load_system, HybridState, SwitchingSystem};

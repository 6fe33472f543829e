//! The switched process: the embedded jump chain, its continuous-time
//! interpolation, occupation measures, and Monte Carlo checks of where
//! those measures live.

mod chain;
mod measure;
mod rng;
pub mod stats;
mod verify;

pub use chain::{run_chain, sample_mode, simulate, simulate_into, step_chain, ChainState, RunSummary};
pub use measure::{
    chain_occupation, ensemble_occupation, occupation_measure, support_estimate, EmpiricalMeasure, MeasureKind,
    OccupationAccumulator, NORMALIZATION_TOL,
};
pub use rng::Stream;
pub use verify::{
    entry_probability, fit_decay, mixing_diagnostic, tube_probability, verify_support_inclusion, ClassMass, DecayFit,
    EntryEstimate, MixingReport, MixingRow, SupportReport, TubeEstimate, DOMINANCE, FULL_COVERAGE, GRID_NOTE,
};

//! Simulation of dark-pulse formation in a dispersion-managed fiber ring
//! laser: coupled two-polarization split-step propagation, the lumped
//! cavity elements, dark-pulse characterization and (dispersion, gain)
//! existence-domain sweeps.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cavity;
pub mod cli;
pub mod config;
pub mod error;
pub mod export;
pub mod fiber;
pub mod grid;
pub mod par;
pub mod run;
pub mod snapshot;
pub mod sweep;

pub use analysis::{classify, find_dark_pulses, AnalysisSettings, DarkPulse, StateClassification, StateLabel};
pub use cavity::{net_dispersion, round_trip, run_to_steady_state, CavityConfig, GridSpec, RoundTripTrace};
pub use error::{ConfigError, GridError, PropagationError, RunError, SnapshotError, SweepError};
pub use fiber::{derive_coefficients, propagate_segment, DerivedCoefficients, FiberSegment, StepControl};
pub use grid::{init_cw_with_dip, make_grid, DipSeed, TimeGrid, VectorField};
pub use run::{simulate, RunResult, RunSetup};
pub use sweep::{run_sweep, RegionMap, SweepSpec};

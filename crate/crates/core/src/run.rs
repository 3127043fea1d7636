//! A single simulation: build the grid, seed the field, iterate the cavity,
//! classify the outcome.

use serde::{Deserialize, Serialize};

use crate::analysis::{classify, AnalysisSettings, StateClassification};
use crate::cavity::{run_to_steady_state_with, CavityConfig, RoundTripTrace};
use crate::error::RunError;
use crate::grid::{init_cw_with_dip, DipSeed, VectorField};

/// Everything needed to reproduce one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSetup {
    pub seed: u64,
    pub cavity: CavityConfig,
    pub initial: DipSeed,
    pub analysis: AnalysisSettings,
}

impl Default for RunSetup {
    fn default() -> Self {
        Self {
            seed: 1,
            cavity: CavityConfig::default(),
            initial: DipSeed::default(),
            analysis: AnalysisSettings::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub initial: VectorField,
    pub field: VectorField,
    pub trace: RoundTripTrace,
    pub classification: StateClassification,
}

impl RunSetup {
    pub fn initial_field(&self) -> Result<VectorField, RunError> {
        let grid = self.cavity.grid.build()?;
        Ok(init_cw_with_dip(&grid, &self.initial, self.seed)?)
    }
}

/// Runs `setup` to steady state; `observe` sees every intracavity field.
pub fn simulate_observed(
    setup: &RunSetup,
    observe: impl FnMut(usize, &VectorField),
) -> Result<RunResult, RunError> {
    setup.cavity.validate()?;
    let f0 = setup.initial_field()?;
    let (field, trace) = run_to_steady_state_with(&f0, &setup.cavity, &setup.analysis, observe)?;
    let classification = classify(&trace, &field, &setup.analysis, setup.cavity.lambda0_nm);
    Ok(RunResult {
        initial: f0,
        field,
        trace,
        classification,
    })
}

pub fn simulate(setup: &RunSetup) -> Result<RunResult, RunError> {
    simulate_observed(setup, |_, _| {})
}

//! TOML configuration files.
//!
//! Every key is optional; anything left out takes the default laser
//! (EDF 5 m, SMF 8 m, DCF 5.2 m, polarizer at 0.13 pi, gamma 3 /(W km),
//! E_sat 500 pJ, 24 nm gain bandwidth). Unknown keys are rejected.
//!
//! ```toml
//! [cavity]
//! smf_length_m = 8.0          # length of every segment named "smf"
//! gain_per_km = 485.0         # small-signal gain of the active segment(s)
//! polarizer_angle_pi = 0.13   # in units of pi
//! phase_bias_pi = 1.6         # in units of pi
//! coupler_out = 0.5
//! lambda0_nm = 1565.0
//! trip_noise = 0.0            # relative per-trip noise, 0 disables
//! trip_noise_seed = 0
//!
//! [grid]
//! n_samples = 8192
//! window_ps = 200.0
//!
//! [step]
//! step_m = 0.1
//! nonlinear = "exact"         # or "rk4"
//! rk4_substeps = 4
//!
//! [run]
//! seed = 1
//! max_round_trips = 2000
//! convergence_tol = 1e-4
//! steady_window = 50
//! extinction_energy_pj = 1e-9
//!
//! [initial]
//! cw_power_w = 0.1
//! dip_depth = 0.1
//! dip_width_ps = 2.0
//! noise_amplitude = 1e-3
//!
//! [analysis]
//! depth_threshold = 0.2
//! min_prominence = 0.05
//! max_drift_samples = 1.0
//!
//! # Optional: replaces the default fiber chain entirely.
//! [[segment]]
//! name = "edf"
//! length_m = 5.0
//! dispersion_ps_nm_km = -32.0
//! third_order_ps2_nm_km = 0.1
//! gamma_per_w_km = 3.0
//! small_signal_gain_per_km = 485.0
//! sat_energy_pj = 500.0
//! gain_bandwidth_nm = 24.0
//! beat_length_ratio = 0.01
//!
//! [sweep]
//! smf_lengths_m = [0.0, 2.0, 4.0, 6.0, 7.6, 8.0, 9.0, 10.0]
//! gains_per_km = [400.0, 450.0, 500.0]   # or gain_min / gain_max / gain_steps
//! seeds = [1]
//! workers = 8
//! ```

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::fiber::{FiberSegment, NonlinearScheme};
use crate::run::RunSetup;
use crate::sweep::{linspace, SweepSpec};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    cavity: CavitySection,
    #[serde(default)]
    grid: GridSection,
    #[serde(default)]
    step: StepSection,
    #[serde(default)]
    run: RunSection,
    #[serde(default)]
    initial: InitialSection,
    #[serde(default)]
    analysis: AnalysisSection,
    segment: Option<Vec<FiberSegment>>,
    sweep: Option<SweepSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CavitySection {
    smf_length_m: Option<f64>,
    gain_per_km: Option<f64>,
    polarizer_angle_pi: Option<f64>,
    phase_bias_pi: Option<f64>,
    coupler_out: Option<f64>,
    lambda0_nm: Option<f64>,
    trip_noise: Option<f64>,
    trip_noise_seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    n_samples: Option<usize>,
    window_ps: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepSection {
    step_m: Option<f64>,
    nonlinear: Option<String>,
    rk4_substeps: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    seed: Option<u64>,
    max_round_trips: Option<usize>,
    convergence_tol: Option<f64>,
    steady_window: Option<usize>,
    extinction_energy_pj: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitialSection {
    cw_power_w: Option<f64>,
    dip_depth: Option<f64>,
    dip_width_ps: Option<f64>,
    noise_amplitude: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnalysisSection {
    depth_threshold: Option<f64>,
    min_prominence: Option<f64>,
    max_drift_samples: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    smf_lengths_m: Option<Vec<f64>>,
    gains_per_km: Option<Vec<f64>>,
    gain_min: Option<f64>,
    gain_max: Option<f64>,
    gain_steps: Option<usize>,
    seeds: Option<Vec<u64>>,
    workers: Option<usize>,
}

/// Sweep axes as read from a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepAxes {
    pub smf_lengths_m: Vec<f64>,
    pub gains_per_km: Vec<f64>,
    pub seeds: Vec<u64>,
    pub workers: usize,
}

/// A fully resolved configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ParsedConfig {
    pub setup: RunSetup,
    pub sweep: Option<SweepAxes>,
}

impl ParsedConfig {
    /// Sweep over the configured axes, or the coarse default grid.
    pub fn sweep_spec(&self) -> SweepSpec {
        let mut spec = SweepSpec::coarse(self.setup.clone());
        if let Some(ax) = &self.sweep {
            spec.smf_lengths_m = ax.smf_lengths_m.clone();
            spec.gains_per_km = ax.gains_per_km.clone();
            spec.seeds = ax.seeds.clone();
            spec.workers = ax.workers;
        }
        spec
    }
}

fn range_err(key: &str, value: impl ToString, invariant: &'static str) -> ConfigError {
    ConfigError::Range {
        key: key.to_string(),
        value: value.to_string(),
        invariant,
    }
}

fn check(ok: bool, key: &str, value: impl ToString, invariant: &'static str) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(range_err(key, value, invariant))
    }
}

/// Parses a TOML config and resolves it against the defaults.
pub fn parse_config(text: &str) -> Result<ParsedConfig, ConfigError> {
    let file: FileConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let mut setup = RunSetup::default();
    let cav = &mut setup.cavity;

    if let Some(segs) = file.segment {
        check(!segs.is_empty(), "segment", "[]", "at least one segment")?;
        cav.segments = segs;
    }
    let c = &file.cavity;
    if let Some(l) = c.smf_length_m {
        check(l >= 0.0, "cavity.smf_length_m", l, "length >= 0")?;
        check(cav.set_smf_length(l) > 0, "cavity.smf_length_m", l, "requires a segment named \"smf\"")?;
    }
    if let Some(g) = c.gain_per_km {
        check(g >= 0.0, "cavity.gain_per_km", g, "small_signal_gain >= 0")?;
        check(cav.set_gain(g) > 0, "cavity.gain_per_km", g, "requires an active segment or one named \"edf\"")?;
    }
    if let Some(x) = c.polarizer_angle_pi {
        cav.polarizer_angle = x * PI;
    }
    if let Some(x) = c.phase_bias_pi {
        cav.phase_bias = x * PI;
    }
    if let Some(x) = c.coupler_out {
        check(x > 0.0 && x < 1.0, "cavity.coupler_out", x, "0 < coupler_out < 1")?;
        cav.coupler_out = x;
    }
    if let Some(x) = c.lambda0_nm {
        check(x > 0.0, "cavity.lambda0_nm", x, "lambda0 > 0")?;
        cav.lambda0_nm = x;
    }
    if let Some(x) = c.trip_noise {
        check(x >= 0.0, "cavity.trip_noise", x, "trip_noise >= 0")?;
        cav.trip_noise = x;
    }
    if let Some(x) = c.trip_noise_seed {
        cav.trip_noise_seed = x;
    }

    if let Some(n) = file.grid.n_samples {
        check(n >= 2 && n.is_power_of_two(), "grid.n_samples", n, "power of two >= 2")?;
        cav.grid.n_samples = n;
    }
    if let Some(w) = file.grid.window_ps {
        check(w > 0.0, "grid.window_ps", w, "window > 0")?;
        cav.grid.window_ps = w;
    }

    if let Some(h) = file.step.step_m {
        check(h > 0.0, "step.step_m", h, "step_size > 0")?;
        cav.step.step_m = h;
    }
    let substeps = file.step.rk4_substeps.unwrap_or(4);
    check(substeps >= 1, "step.rk4_substeps", substeps, "substeps >= 1")?;
    cav.step.nonlinear = match file.step.nonlinear.as_deref() {
        None | Some("exact") => NonlinearScheme::Exact,
        Some("rk4") => NonlinearScheme::Rk4 { substeps },
        Some(other) => return Err(range_err("step.nonlinear", other, "one of \"exact\", \"rk4\"")),
    };

    let r = &file.run;
    if let Some(x) = r.seed {
        setup.seed = x;
    }
    if let Some(x) = r.max_round_trips {
        check(x >= 1, "run.max_round_trips", x, "max_round_trips >= 1")?;
        cav.max_round_trips = x;
    }
    if let Some(x) = r.convergence_tol {
        check(x > 0.0, "run.convergence_tol", x, "convergence_tol > 0")?;
        cav.convergence_tol = x;
    }
    if let Some(x) = r.steady_window {
        check(x >= 1, "run.steady_window", x, "steady_window >= 1")?;
        cav.steady_window = x;
    }
    if let Some(x) = r.extinction_energy_pj {
        check(x >= 0.0, "run.extinction_energy_pj", x, "extinction energy >= 0")?;
        cav.extinction_energy_pj = x;
        setup.analysis.extinction_energy_pj = x;
    }

    let i = &file.initial;
    if let Some(x) = i.cw_power_w {
        check(x >= 0.0, "initial.cw_power_w", x, "cw_power >= 0")?;
        setup.initial.cw_power = x;
    }
    if let Some(x) = i.dip_depth {
        check((0.0..=1.0).contains(&x), "initial.dip_depth", x, "0 <= dip_depth <= 1")?;
        setup.initial.dip_depth = x;
    }
    if let Some(x) = i.dip_width_ps {
        check(x > 0.0, "initial.dip_width_ps", x, "dip_width > 0")?;
        setup.initial.dip_width = x;
    }
    if let Some(x) = i.noise_amplitude {
        check(x >= 0.0, "initial.noise_amplitude", x, "noise_amplitude >= 0")?;
        setup.initial.noise_amplitude = x;
    }

    let a = &file.analysis;
    if let Some(x) = a.depth_threshold {
        check(x > 0.0 && x < 1.0, "analysis.depth_threshold", x, "0 < depth_threshold < 1")?;
        setup.analysis.depth_threshold = x;
    }
    if let Some(x) = a.min_prominence {
        check(x >= 0.0, "analysis.min_prominence", x, "min_prominence >= 0")?;
        setup.analysis.min_prominence = x;
    }
    if let Some(x) = a.max_drift_samples {
        check(x > 0.0, "analysis.max_drift_samples", x, "max_drift_samples > 0")?;
        setup.analysis.max_drift_samples = x;
    }

    setup
        .cavity
        .validate()
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;

    let sweep = match file.sweep {
        None => None,
        Some(s) => Some(resolve_sweep(s, setup.seed)?),
    };
    Ok(ParsedConfig { setup, sweep })
}

fn resolve_sweep(s: SweepSection, seed: u64) -> Result<SweepAxes, ConfigError> {
    let coarse = SweepSpec::coarse(RunSetup::default());
    let smf = s.smf_lengths_m.unwrap_or(coarse.smf_lengths_m);
    check(!smf.is_empty(), "sweep.smf_lengths_m", "[]", "non-empty axis")?;
    if let Some(&l) = smf.iter().find(|&&l| !(l >= 0.0)) {
        return Err(range_err("sweep.smf_lengths_m", l, "all lengths >= 0"));
    }
    let gains = match (s.gains_per_km, s.gain_min, s.gain_max, s.gain_steps) {
        (Some(g), None, None, None) => g,
        (None, None, None, None) => coarse.gains_per_km,
        (None, Some(lo), Some(hi), Some(n)) => {
            check(n >= 1, "sweep.gain_steps", n, "gain_steps >= 1")?;
            check(hi >= lo, "sweep.gain_max", hi, "gain_max >= gain_min")?;
            linspace(lo, hi, n)
        }
        _ => {
            return Err(range_err(
                "sweep.gains_per_km",
                "",
                "give either gains_per_km or all of gain_min, gain_max, gain_steps",
            ))
        }
    };
    check(!gains.is_empty(), "sweep.gains_per_km", "[]", "non-empty axis")?;
    if let Some(&g) = gains.iter().find(|&&g| !(g >= 0.0)) {
        return Err(range_err("sweep.gains_per_km", g, "all gains >= 0"));
    }
    let workers = s.workers.unwrap_or(1);
    check(workers >= 1, "sweep.workers", workers, "workers >= 1")?;
    Ok(SweepAxes {
        smf_lengths_m: smf,
        gains_per_km: gains,
        seeds: s.seeds.unwrap_or_else(|| vec![seed]),
        workers,
    })
}

/// TOML rendering of a resolved setup, used for metadata and hashing.
pub fn render_setup(setup: &RunSetup) -> String {
    toml::to_string(setup).expect("run setup is always representable as TOML")
}

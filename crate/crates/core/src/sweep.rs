//! (SMF length, small-signal gain) existence-domain sweeps and gain
//! threshold bisection.

use serde::{Deserialize, Serialize};

use crate::analysis::{StateClassification, StateLabel};
use crate::cavity::net_dispersion;
use crate::error::SweepError;
use crate::par::map_cells;
use crate::run::{simulate, RunSetup};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub smf_lengths_m: Vec<f64>,
    pub gains_per_km: Vec<f64>,
    pub base: RunSetup,
    /// Initial-condition seeds; empty means just `base.seed`.
    pub seeds: Vec<u64>,
    pub workers: usize,
}

impl SweepSpec {
    /// Coarse default grid: 8 SMF lengths by 8 gains from 400 to 650 /km.
    pub fn coarse(base: RunSetup) -> Self {
        Self {
            smf_lengths_m: vec![0.0, 2.0, 4.0, 6.0, 7.6, 8.0, 9.0, 10.0],
            gains_per_km: linspace(400.0, 650.0, 8),
            base,
            seeds: Vec::new(),
            workers: 1,
        }
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        if self.smf_lengths_m.is_empty() {
            return Err(SweepError::EmptyAxis("smf_lengths_m"));
        }
        if self.gains_per_km.is_empty() {
            return Err(SweepError::EmptyAxis("gains_per_km"));
        }
        if let Some(&l) = self.smf_lengths_m.iter().find(|&&l| !(l >= 0.0)) {
            return Err(SweepError::NegativeLength(l));
        }
        Ok(())
    }

    pub fn seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            vec![self.base.seed]
        } else {
            self.seeds.clone()
        }
    }

    /// Cell coordinates in canonical order: SMF length, then gain, then seed.
    pub fn keys(&self) -> Vec<CellKey> {
        let seeds = self.seeds();
        let mut keys = Vec::new();
        for &smf in &self.smf_lengths_m {
            for &gain in &self.gains_per_km {
                for &seed in &seeds {
                    keys.push(CellKey {
                        smf_length_m: smf,
                        gain_per_km: gain,
                        seed,
                    });
                }
            }
        }
        keys
    }

    /// The run setup for one cell.
    pub fn cell_setup(&self, key: &CellKey) -> RunSetup {
        let mut setup = self.base.clone();
        setup.cavity.set_smf_length(key.smf_length_m);
        setup.cavity.set_gain(key.gain_per_km);
        setup.seed = key.seed;
        setup
    }
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellKey {
    pub smf_length_m: f64,
    pub gain_per_km: f64,
    pub seed: u64,
}

impl CellKey {
    pub fn same_as(&self, other: &CellKey) -> bool {
        self.seed == other.seed
            && (self.smf_length_m - other.smf_length_m).abs() < 1e-9
            && (self.gain_per_km - other.gain_per_km).abs() < 1e-9
    }
}

/// Observables of a classified cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub label: StateLabel,
    pub pulse_count: usize,
    /// Deepest modulation depth among detected pulses (0 if none).
    pub depth_max: f64,
    /// FWHM of the deepest pulse, ps (0 if none).
    pub fwhm_ps: f64,
    pub bandwidth_nm: f64,
    pub round_trips: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CellOutcome {
    Classified(CellSummary),
    Failed(String),
}

impl CellOutcome {
    pub fn label(&self) -> Option<StateLabel> {
        match self {
            CellOutcome::Classified(s) => Some(s.label),
            CellOutcome::Failed(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub key: CellKey,
    pub net_dispersion_ps2: f64,
    pub outcome: CellOutcome,
    /// Full classification when the cell was computed in this process.
    pub classification: Option<StateClassification>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RegionMap {
    pub cells: Vec<Cell>,
}

impl RegionMap {
    pub fn find(&self, key: &CellKey) -> Option<&Cell> {
        self.cells.iter().find(|c| c.key.same_as(key))
    }

    /// Label at (smf, gain) for the first seed found.
    pub fn label_at(&self, smf_length_m: f64, gain_per_km: f64) -> Option<StateLabel> {
        self.cells
            .iter()
            .find(|c| (c.key.smf_length_m - smf_length_m).abs() < 1e-9 && (c.key.gain_per_km - gain_per_km).abs() < 1e-9)
            .and_then(|c| c.outcome.label())
    }
}

/// Runs and classifies a single cell; failures are captured, not returned.
pub fn run_cell(spec: &SweepSpec, key: &CellKey) -> Cell {
    let setup = spec.cell_setup(key);
    let net = net_dispersion(&setup.cavity);
    let mut classification = None;
    let outcome = match simulate(&setup) {
        Ok(res) => {
            let c = &res.classification;
            let deepest = c
                .pulses
                .iter()
                .max_by(|a, b| a.modulation_depth.total_cmp(&b.modulation_depth));
            let summary = CellOutcome::Classified(CellSummary {
                label: c.label,
                pulse_count: c.pulses.len(),
                depth_max: deepest.map_or(0.0, |p| p.modulation_depth),
                fwhm_ps: deepest.map_or(0.0, |p| p.fwhm),
                bandwidth_nm: c.spectral_bw_3db,
                round_trips: res.trace.records.len(),
            });
            classification = Some(res.classification);
            summary
        }
        Err(e) => CellOutcome::Failed(e.to_string()),
    };
    log::info!(
        "cell smf={} m gain={} /km seed={}: {}",
        key.smf_length_m,
        key.gain_per_km,
        key.seed,
        outcome.label().map_or("error", |l| l.as_str())
    );
    Cell {
        key: *key,
        net_dispersion_ps2: net,
        outcome,
        classification,
    }
}

/// Runs every cell of the sweep.
pub fn run_sweep(spec: &SweepSpec) -> Result<RegionMap, SweepError> {
    run_sweep_resuming(spec, &RegionMap::default())
}

/// Runs the cells of `spec` that are not already present in `done`; the
/// result is in canonical cell order regardless of scheduling.
pub fn run_sweep_resuming(spec: &SweepSpec, done: &RegionMap) -> Result<RegionMap, SweepError> {
    spec.validate()?;
    let keys = spec.keys();
    let todo: Vec<CellKey> = keys.iter().filter(|k| done.find(k).is_none()).copied().collect();
    log::info!("sweep: {} cells, {} to compute", keys.len(), todo.len());
    let fresh = map_cells(&todo, spec.workers, |k| run_cell(spec, k));
    let cells = keys
        .iter()
        .map(|k| {
            fresh
                .iter()
                .find(|c| c.key.same_as(k))
                .or_else(|| done.find(k))
                .cloned()
                .expect("every key is either fresh or resumed")
        })
        .collect();
    Ok(RegionMap { cells })
}

/// Result of a gain bisection: the boundary lies in `(lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Threshold {
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
    pub evaluations: usize,
}

/// Bisects a predicate that holds at `lo` and fails at `hi` until the
/// bracket is no wider than `tol`.
pub fn bisect_threshold(
    lo: f64,
    hi: f64,
    tol: f64,
    mut holds: impl FnMut(f64) -> Result<bool, SweepError>,
) -> Result<Threshold, SweepError> {
    if !(hi > lo) || !(tol > 0.0) {
        return Err(SweepError::Bracket(format!("need lo < hi and tol > 0, got [{lo}, {hi}], tol {tol}")));
    }
    if !holds(lo)? {
        return Err(SweepError::Bracket(format!("predicate fails at lower end {lo}")));
    }
    if holds(hi)? {
        return Err(SweepError::Bracket(format!("predicate still holds at upper end {hi}")));
    }
    let (mut a, mut b) = (lo, hi);
    let mut evaluations = 2;
    while b - a > tol {
        let mid = 0.5 * (a + b);
        evaluations += 1;
        if holds(mid)? {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(Threshold {
        estimate: 0.5 * (a + b),
        lo: a,
        hi: b,
        evaluations,
    })
}

/// Upper gain limit of the single-dark-pulse state for `base`'s cavity.
pub fn find_split_threshold(base: &RunSetup, gain_lo: f64, gain_hi: f64, tol: f64) -> Result<Threshold, SweepError> {
    bisect_threshold(gain_lo, gain_hi, tol, |g| {
        let mut setup = base.clone();
        setup.cavity.set_gain(g);
        let res = simulate(&setup)?;
        log::info!("split threshold probe g0 = {g:.2}: {}", res.classification.label);
        Ok(res.classification.label == StateLabel::SingleDark)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisection_on_step_function() {
        let t = bisect_threshold(400.0, 650.0, 1.0, |g| Ok(g <= 500.0)).unwrap();
        assert!((t.estimate - 500.0).abs() <= 1.0);
        assert!(t.lo <= 500.0 && t.hi > 500.0);
    }

    #[test]
    fn bisection_width_tracks_tolerance() {
        let w = |tol| {
            let t = bisect_threshold(0.0, 64.0, tol, |g| Ok(g < 17.3)).unwrap();
            t.hi - t.lo
        };
        assert_eq!(w(4.0), 4.0);
        assert_eq!(w(2.0), 2.0);
        assert_eq!(w(1.0), 1.0);
    }

    #[test]
    fn bisection_rejects_bad_brackets() {
        let r = bisect_threshold(0.0, 1.0, 0.1, |_| Ok(true));
        assert!(matches!(r, Err(SweepError::Bracket(_))));
        let r = bisect_threshold(0.0, 1.0, 0.1, |_| Ok(false));
        assert!(matches!(r, Err(SweepError::Bracket(_))));
        let r = bisect_threshold(1.0, 0.0, 0.1, |_| Ok(false));
        assert!(matches!(r, Err(SweepError::Bracket(_))));
    }

    #[test]
    fn coarse_axes() {
        let s = SweepSpec::coarse(RunSetup::default());
        assert_eq!(s.smf_lengths_m.len(), 8);
        assert_eq!(s.gains_per_km.len(), 8);
        assert_eq!(s.gains_per_km[0], 400.0);
        assert_eq!(s.gains_per_km[7], 650.0);
        assert_eq!(s.keys().len(), 64);
    }

    #[test]
    fn spec_validation() {
        let mut s = SweepSpec::coarse(RunSetup::default());
        s.gains_per_km.clear();
        assert!(matches!(s.validate(), Err(SweepError::EmptyAxis(_))));
        let mut s = SweepSpec::coarse(RunSetup::default());
        s.smf_lengths_m.push(-1.0);
        assert!(matches!(s.validate(), Err(SweepError::NegativeLength(_))));
    }

    #[test]
    fn cell_setup_overrides_length_gain_seed() {
        let s = SweepSpec::coarse(RunSetup::default());
        let k = CellKey {
            smf_length_m: 2.0,
            gain_per_km: 600.0,
            seed: 9,
        };
        let setup = s.cell_setup(&k);
        assert_eq!(setup.seed, 9);
        assert!(setup.cavity.segments.iter().any(|x| x.name == "smf" && x.length_m == 2.0));
        assert!(setup.cavity.segments.iter().any(|x| x.name == "edf" && x.small_signal_gain_per_km == 600.0));
    }
}

//! Dark-pulse detection on a CW background, spectral observables and
//! steady-state classification.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::cavity::{RoundTripTrace, RunStatus};
use crate::fiber::C_NM_PER_PS;
use crate::grid::VectorField;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSettings {
    /// Minimum modulation depth for a dip to count as a pulse.
    pub depth_threshold: f64,
    /// Minimum rise (fraction of background) separating two distinct dips.
    pub min_prominence: f64,
    /// Largest per-trip position change, in samples, still considered stationary.
    pub max_drift_samples: f64,
    /// Energy (pJ) at or below which a field is treated as extinguished.
    pub extinction_energy_pj: f64,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        Self {
            depth_threshold: 0.2,
            min_prominence: 0.05,
            max_drift_samples: 1.0,
            extinction_energy_pj: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DarkPulse {
    /// Center of the dip, ps, in `[-window/2, window/2)`.
    pub position: f64,
    /// Full width at half the dip depth, ps.
    pub fwhm: f64,
    /// `1 - P_min / P_background`.
    pub modulation_depth: f64,
    /// Phase jump across the dip of the dominant component, rad.
    pub phase_step: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateLabel {
    Extinguished,
    Cw,
    SingleDark,
    MultipleDark,
    Unstable,
    NotConverged,
}

impl StateLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            StateLabel::Extinguished => "extinguished",
            StateLabel::Cw => "cw",
            StateLabel::SingleDark => "single_dark",
            StateLabel::MultipleDark => "multiple_dark",
            StateLabel::Unstable => "unstable",
            StateLabel::NotConverged => "not_converged",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            StateLabel::Extinguished,
            StateLabel::Cw,
            StateLabel::SingleDark,
            StateLabel::MultipleDark,
            StateLabel::Unstable,
            StateLabel::NotConverged,
        ]
        .into_iter()
        .find(|l| l.as_str() == s)
    }

    /// True when the state carries at least one dark pulse.
    pub fn is_dark(&self) -> bool {
        matches!(self, StateLabel::SingleDark | StateLabel::MultipleDark)
    }
}

impl std::fmt::Display for StateLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralWidth {
    pub nm: f64,
    pub rad_per_ps: f64,
    /// The half-maximum crossings fall within one bin of the peak.
    pub grid_limited: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateClassification {
    pub label: StateLabel,
    pub pulses: Vec<DarkPulse>,
    pub cw_level: f64,
    pub spectral_bw_3db: f64,
    pub tbp: Option<f64>,
}

/// Median of the upper quartile of `power`.
pub fn estimate_background(power: &[f64]) -> f64 {
    if power.is_empty() {
        return 0.0;
    }
    let mut sorted = power.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let upper = &sorted[(3 * sorted.len()) / 4..];
    let m = upper.len();
    if m % 2 == 1 {
        upper[m / 2]
    } else {
        0.5 * (upper[m / 2 - 1] + upper[m / 2])
    }
}

fn wrap_position(t: f64, window: f64) -> f64 {
    (t + 0.5 * window).rem_euclid(window) - 0.5 * window
}

/// Shortest signed distance `b - a` on a ring of circumference `period`.
pub fn circular_distance(a: f64, b: f64, period: f64) -> f64 {
    let d = (b - a).rem_euclid(period);
    if d > 0.5 * period {
        d - period
    } else {
        d
    }
}

/// Locates dips in `|u|^2 + |v|^2` deeper than `depth_threshold` relative to
/// the CW background.
pub fn find_dark_pulses(f: &VectorField, depth_threshold: f64) -> Vec<DarkPulse> {
    find_dark_pulses_with(f, depth_threshold, AnalysisSettings::default().min_prominence)
}

pub fn find_dark_pulses_with(f: &VectorField, depth_threshold: f64, min_prominence: f64) -> Vec<DarkPulse> {
    let p = f.power();
    let n = p.len();
    let bg = estimate_background(&p);
    if !(bg > 0.0) || n < 3 {
        return Vec::new();
    }
    let at = |i: isize| p[i.rem_euclid(n as isize) as usize];
    let cut = bg * (1.0 - depth_threshold);

    let mut candidates: Vec<usize> = (0..n)
        .filter(|&i| {
            let ii = i as isize;
            p[i] < cut && p[i] <= at(ii - 1) && p[i] < at(ii + 1)
        })
        .collect();
    candidates.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));

    let barrier = |a: usize, b: usize| -> f64 {
        // highest power on the shorter arc between a and b
        let fwd = (b + n - a) % n;
        let (start, len) = if fwd <= n - fwd { (a, fwd) } else { (b, n - fwd) };
        (0..=len).map(|k| p[(start + k) % n]).fold(f64::MIN, f64::max)
    };

    let mut accepted: Vec<usize> = Vec::new();
    for c in candidates {
        if accepted
            .iter()
            .all(|&a| barrier(a, c) - p[c] >= min_prominence * bg)
        {
            accepted.push(c);
        }
    }

    let grid = f.grid();
    let dt = grid.dt();
    let window = grid.window();
    let (u_e, v_e): (f64, f64) = (
        f.u().iter().map(|z| z.norm_sqr()).sum(),
        f.v().iter().map(|z| z.norm_sqr()).sum(),
    );
    let dominant = if u_e >= v_e { f.u() } else { f.v() };

    let mut pulses: Vec<DarkPulse> = accepted
        .into_iter()
        .map(|i| {
            let ii = i as isize;
            let pmin = p[i];
            let depth = (1.0 - pmin / bg).clamp(0.0, 1.0);
            let level = 0.5 * (bg + pmin);
            let edge = |dir: isize| -> f64 {
                // distance in samples to the half-depth crossing
                let mut peak = pmin;
                let mut peak_k = 0.0;
                for k in 1..=(n as isize / 2) {
                    let cur = at(ii + dir * k);
                    if cur >= level {
                        let prev = at(ii + dir * (k - 1));
                        return (k - 1) as f64 + (level - prev) / (cur - prev);
                    }
                    if cur > peak {
                        peak = cur;
                        peak_k = k as f64;
                    } else if peak - cur > min_prominence * bg {
                        return peak_k;
                    }
                }
                peak_k
            };
            let (left, right) = (edge(-1), edge(1));
            let denom = at(ii - 1) - 2.0 * pmin + at(ii + 1);
            let offset = if denom > 0.0 {
                (0.5 * (at(ii - 1) - at(ii + 1)) / denom).clamp(-0.5, 0.5)
            } else {
                0.0
            };
            let span = right.max(left).ceil().max(1.0) as isize * 2;
            let l = dominant[(ii - span).rem_euclid(n as isize) as usize];
            let r = dominant[(ii + span).rem_euclid(n as isize) as usize];
            let phase_step = if l.norm() > 0.0 && r.norm() > 0.0 {
                Some((r * l.conj()).arg())
            } else {
                None
            };
            DarkPulse {
                position: wrap_position(grid.time()[i] + offset * dt, window),
                fwhm: (left + right) * dt,
                modulation_depth: depth,
                phase_step,
            }
        })
        .collect();
    pulses.sort_by(|a, b| a.position.total_cmp(&b.position));
    pulses
}

/// FWHM (ps) of the brightest feature of `|u|^2 + |v|^2`, by linear
/// interpolation of the half-maximum crossings.
pub fn bright_pulse_fwhm(f: &VectorField) -> f64 {
    let p = f.power();
    let (imax, _) = p
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |acc, (i, &x)| if x > acc.1 { (i, x) } else { acc });
    half_max_width(&p, imax) * f.grid().dt()
}

/// Width in samples of the peak at `ipk` measured at half its height.
fn half_max_width(p: &[f64], ipk: usize) -> f64 {
    let n = p.len() as isize;
    let half = 0.5 * p[ipk];
    let at = |i: isize| p[i.rem_euclid(n) as usize];
    let side = |dir: isize| -> f64 {
        for k in 1..=(n / 2) {
            let cur = at(ipk as isize + dir * k);
            if cur <= half {
                let prev = at(ipk as isize + dir * (k - 1));
                return (k - 1) as f64 + (prev - half) / (prev - cur);
            }
        }
        (n / 2) as f64
    };
    side(-1) + side(1)
}

/// Converts an angular-frequency width (rad/ps) into a wavelength width (nm).
pub fn omega_to_nm(d_omega: f64, lambda0_nm: f64) -> f64 {
    d_omega * lambda0_nm * lambda0_nm / (2.0 * PI * C_NM_PER_PS)
}

/// Full width at half maximum of the power spectrum, converted to nm.
pub fn spectral_bandwidth_3db(f: &VectorField, lambda0_nm: f64) -> SpectralWidth {
    let spec = f.spectrum().total();
    let n = spec.len();
    // fftshift so that negative frequencies precede positive ones
    let shifted: Vec<f64> = (0..n).map(|i| spec[(i + n / 2) % n]).collect();
    let (ipk, peak) = shifted
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |acc, (i, &x)| if x > acc.1 { (i, x) } else { acc });
    if !(peak > 0.0) {
        return SpectralWidth {
            nm: 0.0,
            rad_per_ps: 0.0,
            grid_limited: true,
        };
    }
    let half = 0.5 * peak;
    let side = |dir: isize| -> f64 {
        let mut k = 1isize;
        loop {
            let j = ipk as isize + dir * k;
            if j < 0 || j >= n as isize {
                return (k - 1) as f64;
            }
            let cur = shifted[j as usize];
            if cur <= half {
                let prev = shifted[(j - dir) as usize];
                return (k - 1) as f64 + (prev - half) / (prev - cur);
            }
            k += 1;
        }
    };
    let bins = side(-1) + side(1);
    let rad = bins * f.grid().d_omega();
    SpectralWidth {
        nm: omega_to_nm(rad, lambda0_nm),
        rad_per_ps: rad,
        grid_limited: bins <= 1.0 + 1e-9,
    }
}

/// `fwhm * c * bw / lambda0^2`.
pub fn time_bandwidth_product(fwhm_ps: f64, bw_nm: f64, lambda0_nm: f64) -> f64 {
    fwhm_ps * C_NM_PER_PS * bw_nm / (lambda0_nm * lambda0_nm)
}

/// True when the final `trace.window` trips keep a constant pulse count and
/// every pulse moves by less than `max_drift_samples` per trip.
pub fn pattern_is_stable(trace: &RoundTripTrace, settings: &AnalysisSettings) -> bool {
    let recs = &trace.records;
    if trace.window == 0 || recs.len() < trace.window {
        return false;
    }
    let tail = &recs[recs.len() - trace.window..];
    let limit = settings.max_drift_samples * trace.dt;
    tail.windows(2).all(|w| {
        let (a, b) = (&w[0], &w[1]);
        a.pulse_count == b.pulse_count
            && b.positions_ps.iter().all(|&pb| {
                a.positions_ps
                    .iter()
                    .map(|&pa| circular_distance(pa, pb, trace.period_ps).abs())
                    .fold(f64::INFINITY, f64::min)
                    < limit
            })
    })
}

fn characterize(f: &VectorField, settings: &AnalysisSettings, lambda0_nm: f64, label_of: impl FnOnce(usize) -> StateLabel) -> StateClassification {
    let pulses = find_dark_pulses_with(f, settings.depth_threshold, settings.min_prominence);
    let cw_level = estimate_background(&f.power());
    let bw = spectral_bandwidth_3db(f, lambda0_nm);
    let label = label_of(pulses.len());
    let tbp = if label == StateLabel::SingleDark {
        Some(time_bandwidth_product(pulses[0].fwhm, bw.nm, lambda0_nm))
    } else {
        None
    };
    StateClassification {
        label,
        pulses,
        cw_level,
        spectral_bw_3db: bw.nm,
        tbp,
    }
}

fn label_by_count(count: usize) -> StateLabel {
    match count {
        0 => StateLabel::Cw,
        1 => StateLabel::SingleDark,
        _ => StateLabel::MultipleDark,
    }
}

/// Assigns a steady-state label to a completed run.
pub fn classify(
    trace: &RoundTripTrace,
    f_final: &VectorField,
    settings: &AnalysisSettings,
    lambda0_nm: f64,
) -> StateClassification {
    let extinguished = trace.status == RunStatus::Extinguished
        || f_final.total_energy() <= settings.extinction_energy_pj;
    let stable = pattern_is_stable(trace, settings);
    let converged = trace.converged();
    characterize(f_final, settings, lambda0_nm, |count| {
        if extinguished {
            StateLabel::Extinguished
        } else if converged && stable {
            label_by_count(count)
        } else if converged || (trace.records.len() >= trace.window && !stable) {
            StateLabel::Unstable
        } else {
            StateLabel::NotConverged
        }
    })
}

/// Classifies a stored field with no history, treating it as settled.
pub fn classify_snapshot(f: &VectorField, settings: &AnalysisSettings, lambda0_nm: f64) -> StateClassification {
    let extinguished = f.total_energy() <= settings.extinction_energy_pj;
    characterize(f, settings, lambda0_nm, |count| {
        if extinguished {
            StateLabel::Extinguished
        } else {
            label_by_count(count)
        }
    })
}

//! Ring cavity: lumped polarizer, polarization controller and output coupler
//! around an ordered chain of fiber segments, iterated to steady state.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::analysis::{estimate_background, find_dark_pulses, AnalysisSettings};
use crate::error::{GridError, RunError};
use crate::fiber::{derive_coefficients, propagate_segment_in_place, DerivedCoefficients, FiberSegment, StepControl};
use crate::grid::{TimeGrid, VectorField};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub n_samples: usize,
    pub window_ps: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n_samples: 8192,
            window_ps: 200.0,
        }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<TimeGrid, GridError> {
        TimeGrid::new(self.n_samples, self.window_ps)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CavityConfig {
    pub segments: Vec<FiberSegment>,
    /// Polarizer axis relative to the fast axis, rad.
    pub polarizer_angle: f64,
    /// Linear phase delay added to `v` by the polarization controller, rad.
    pub phase_bias: f64,
    /// Output coupling fraction.
    pub coupler_out: f64,
    pub lambda0_nm: f64,
    pub grid: GridSpec,
    pub step: StepControl,
    pub max_round_trips: usize,
    /// Threshold on the amplitude-profile residual between successive trips.
    pub convergence_tol: f64,
    /// Consecutive sub-tolerance trips required to declare convergence.
    pub steady_window: usize,
    /// Relative amplitude of complex noise injected after every trip (0 = off).
    pub trip_noise: f64,
    pub trip_noise_seed: u64,
    /// Below this intracavity energy (pJ) the run is considered extinguished.
    pub extinction_energy_pj: f64,
}

impl Default for CavityConfig {
    fn default() -> Self {
        Self {
            segments: vec![FiberSegment::edf(), FiberSegment::smf(8.0), FiberSegment::dcf()],
            polarizer_angle: 0.13 * PI,
            phase_bias: 1.6 * PI,
            coupler_out: 0.5,
            lambda0_nm: 1565.0,
            grid: GridSpec::default(),
            step: StepControl::default(),
            max_round_trips: 2000,
            convergence_tol: 1e-4,
            steady_window: 50,
            trip_noise: 0.0,
            trip_noise_seed: 0,
            extinction_energy_pj: 1e-9,
        }
    }
}

impl CavityConfig {
    /// Default cavity with the given SMF length (m).
    pub fn with_smf_length(smf_m: f64) -> Self {
        let mut cfg = Self::default();
        cfg.set_smf_length(smf_m);
        cfg
    }

    pub fn total_length_m(&self) -> f64 {
        self.segments.iter().map(|s| s.length_m).sum()
    }

    /// Sets the length of every segment named `smf`. Returns how many matched.
    pub fn set_smf_length(&mut self, smf_m: f64) -> usize {
        let mut hits = 0;
        for s in self.segments.iter_mut().filter(|s| s.name == "smf") {
            s.length_m = smf_m;
            hits += 1;
        }
        hits
    }

    /// Sets the small-signal gain of every active segment.
    pub fn set_gain(&mut self, g0: f64) -> usize {
        let mut hits = 0;
        for s in self.segments.iter_mut().filter(|s| s.small_signal_gain_per_km > 0.0 || s.name == "edf") {
            s.small_signal_gain_per_km = g0;
            hits += 1;
        }
        hits
    }

    pub fn coefficients(&self) -> Vec<DerivedCoefficients> {
        let total = self.total_length_m();
        self.segments
            .iter()
            .map(|s| derive_coefficients(s, self.lambda0_nm, total))
            .collect()
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let bad = |m: &str| Err(RunError::Cavity(m.to_string()));
        if self.segments.is_empty() {
            return bad("no fiber segments");
        }
        for s in &self.segments {
            s.validate()?;
        }
        if !self.segments.iter().any(|s| s.small_signal_gain_per_km > 0.0) {
            return bad("at least one segment needs small_signal_gain > 0");
        }
        self.validate_lumped()
    }

    /// Checks everything except the gain requirement (passive test cavities are legal to run).
    pub fn validate_lumped(&self) -> Result<(), RunError> {
        let bad = |m: &str| Err(RunError::Cavity(m.to_string()));
        if !(self.coupler_out > 0.0 && self.coupler_out < 1.0) {
            return bad("coupler_out must satisfy 0 < coupler_out < 1");
        }
        if !(self.lambda0_nm > 0.0) {
            return bad("lambda0 must be > 0");
        }
        if !(self.convergence_tol > 0.0) {
            return bad("convergence_tol must be > 0");
        }
        if self.steady_window == 0 {
            return bad("steady_window must be >= 1");
        }
        if !(self.trip_noise >= 0.0) {
            return bad("trip_noise must be >= 0");
        }
        for s in &self.segments {
            s.validate()?;
        }
        Ok(())
    }
}

/// Path-summed GVD, ps^2.
pub fn net_dispersion(cfg: &CavityConfig) -> f64 {
    cfg.segments
        .iter()
        .zip(cfg.coefficients())
        .map(|(s, c)| c.beta2 * s.length_km())
        .sum()
}

/// Projects onto the polarizer axis `(cos phi, sin phi)`.
pub fn apply_polarizer(f: &VectorField, phi: f64) -> VectorField {
    let mut out = f.clone();
    polarize_in_place(&mut out, phi);
    out
}

fn polarize_in_place(f: &mut VectorField, phi: f64) {
    let (s, c) = phi.sin_cos();
    for (u, v) in f.u.iter_mut().zip(f.v.iter_mut()) {
        let a = *u * c + *v * s;
        *u = a * c;
        *v = a * s;
    }
}

pub fn apply_phase_bias(f: &VectorField, delta_phi: f64) -> VectorField {
    let mut out = f.clone();
    bias_in_place(&mut out, delta_phi);
    out
}

fn bias_in_place(f: &mut VectorField, delta_phi: f64) {
    let rot = Complex64::from_polar(1.0, delta_phi);
    f.v.iter_mut().for_each(|z| *z *= rot);
}

/// Splits the field into `(kept, emitted)` amplitude branches.
pub fn apply_coupler(f: &VectorField, out_fraction: f64) -> (VectorField, VectorField) {
    let kept = f.scaled(Complex64::new((1.0 - out_fraction).sqrt(), 0.0));
    let emitted = f.scaled(Complex64::new(out_fraction.sqrt(), 0.0));
    (kept, emitted)
}

/// Energies (pJ) at each element boundary of one round trip.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyLedger {
    pub input: f64,
    pub after_polarizer: f64,
    pub after_bias: f64,
    pub before_coupler: f64,
    pub kept: f64,
    pub emitted: f64,
}

/// One pass around the ring: polarizer, phase bias, fibers in order, coupler.
pub fn round_trip(f: &VectorField, cfg: &CavityConfig) -> Result<(VectorField, VectorField), RunError> {
    round_trip_with_ledger(f, cfg).map(|(k, e, _)| (k, e))
}

pub fn round_trip_with_ledger(
    f: &VectorField,
    cfg: &CavityConfig,
) -> Result<(VectorField, VectorField, EnergyLedger), RunError> {
    let coeffs = cfg.coefficients();
    round_trip_inner(f.clone(), cfg, &coeffs)
}

fn round_trip_inner(
    mut f: VectorField,
    cfg: &CavityConfig,
    coeffs: &[DerivedCoefficients],
) -> Result<(VectorField, VectorField, EnergyLedger), RunError> {
    let mut ledger = EnergyLedger {
        input: f.total_energy(),
        ..Default::default()
    };
    polarize_in_place(&mut f, cfg.polarizer_angle);
    ledger.after_polarizer = f.total_energy();
    bias_in_place(&mut f, cfg.phase_bias);
    ledger.after_bias = f.total_energy();
    for (seg, coeff) in cfg.segments.iter().zip(coeffs) {
        propagate_segment_in_place(&mut f, seg, coeff, &cfg.step)?;
    }
    ledger.before_coupler = f.total_energy();
    let (kept, emitted) = apply_coupler(&f, cfg.coupler_out);
    ledger.kept = kept.total_energy();
    ledger.emitted = emitted.total_energy();
    Ok((kept, emitted, ledger))
}

/// One row of the round-trip trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripRecord {
    pub trip: usize,
    /// Intracavity energy after the coupler, pJ.
    pub energy_pj: f64,
    pub cw_level_w: f64,
    pub residual: f64,
    pub pulse_count: usize,
    pub positions_ps: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    Extinguished,
    CapReached,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundTripTrace {
    pub records: Vec<TripRecord>,
    pub status: RunStatus,
    /// Sample spacing of the run, ps; used for drift checks.
    pub dt: f64,
    /// Window duration, ps; positions are periodic with this period.
    pub period_ps: f64,
    /// Consecutive-trip window used for convergence and stability.
    pub window: usize,
}

impl RoundTripTrace {
    pub fn converged(&self) -> bool {
        self.status == RunStatus::Converged
    }

    pub fn last(&self) -> Option<&TripRecord> {
        self.records.last()
    }
}

/// Phase-insensitive residual `|| |f_k| - |f_{k-1}| || / || f_k ||` over both components.
pub fn amplitude_residual(prev: &VectorField, next: &VectorField) -> f64 {
    let mut diff = 0.0;
    let mut norm = 0.0;
    let pairs = prev.u().iter().zip(next.u()).chain(prev.v().iter().zip(next.v()));
    for (a, b) in pairs {
        let d = b.norm() - a.norm();
        diff += d * d;
        norm += b.norm_sqr();
    }
    if norm == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (diff / norm).sqrt()
    }
}

/// Iterates [`round_trip`] with default detection settings.
pub fn run_to_steady_state(f0: &VectorField, cfg: &CavityConfig) -> Result<(VectorField, RoundTripTrace), RunError> {
    run_to_steady_state_with(f0, cfg, &AnalysisSettings::default(), |_, _| {})
}

/// Iterates round trips until the amplitude residual stays below
/// `convergence_tol` for `steady_window` consecutive trips, the field is
/// extinguished, or `max_round_trips` is reached. `observe` sees the
/// intracavity field after every trip.
pub fn run_to_steady_state_with(
    f0: &VectorField,
    cfg: &CavityConfig,
    detect: &AnalysisSettings,
    mut observe: impl FnMut(usize, &VectorField),
) -> Result<(VectorField, RoundTripTrace), RunError> {
    cfg.validate_lumped()?;
    let coeffs = cfg.coefficients();
    let mut noise_rng = ChaCha8Rng::seed_from_u64(cfg.trip_noise_seed);
    let dt = f0.grid().dt();
    let period_ps = f0.grid().window();
    let mut field = f0.clone();
    let mut records = Vec::new();
    let mut quiet = 0usize;
    let mut status = RunStatus::CapReached;

    for trip in 1..=cfg.max_round_trips {
        let (mut kept, _, _) = round_trip_inner(field.clone(), cfg, &coeffs)?;
        if cfg.trip_noise > 0.0 {
            inject_noise(&mut kept, cfg.trip_noise, &mut noise_rng);
        }
        let residual = amplitude_residual(&field, &kept);
        let power = kept.power();
        let energy = kept.total_energy();
        let pulses = find_dark_pulses(&kept, detect.depth_threshold);
        records.push(TripRecord {
            trip,
            energy_pj: energy,
            cw_level_w: estimate_background(&power),
            residual,
            pulse_count: pulses.len(),
            positions_ps: pulses.iter().map(|p| p.position).collect(),
        });
        observe(trip, &kept);
        field = kept;

        if energy < cfg.extinction_energy_pj {
            status = RunStatus::Extinguished;
            break;
        }
        if residual < cfg.convergence_tol {
            quiet += 1;
            if quiet >= cfg.steady_window {
                status = RunStatus::Converged;
                break;
            }
        } else {
            quiet = 0;
        }
    }
    log::debug!("run finished after {} trips: {:?}", records.len(), status);
    Ok((
        field,
        RoundTripTrace {
            records,
            status,
            dt,
            period_ps,
            window: cfg.steady_window,
        },
    ))
}

fn inject_noise(f: &mut VectorField, rel: f64, rng: &mut ChaCha8Rng) {
    let scale = rel * (f.power().iter().sum::<f64>() / (2 * f.u.len()) as f64).sqrt();
    for z in f.u.iter_mut().chain(f.v.iter_mut()) {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *z += Complex64::new(re, im) * (scale * std::f64::consts::FRAC_1_SQRT_2);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use approx::assert_relative_eq;

    fn random_field(seed: u64) -> VectorField {
        use rand::Rng;
        let g = make_grid(256, 50.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = || Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let u = (0..256).map(|_| c()).collect();
        let v = (0..256).map(|_| c()).collect();
        VectorField::new(g, u, v).unwrap()
    }

    fn small_cfg() -> CavityConfig {
        CavityConfig {
            grid: GridSpec {
                n_samples: 256,
                window_ps: 50.0,
            },
            step: StepControl::with_step_m(0.5),
            ..CavityConfig::default()
        }
    }

    #[test]
    fn net_dispersion_endpoints() {
        assert_relative_eq!(net_dispersion(&CavityConfig::with_smf_length(0.0)), 0.2215, max_relative = 5e-3);
        assert_relative_eq!(net_dispersion(&CavityConfig::with_smf_length(10.0)), -0.0125, max_relative = 5e-3);
        // sum of beta2 L with beta2 = -D lambda^2 / (2 pi c) at 1565 nm
        let k = 1565.0_f64.powi(2) / (2.0 * PI * 299_792.458);
        let by_hand = k * (32.0 * 0.005 - 18.0 * 0.008 + 2.0 * 0.0052);
        assert_relative_eq!(net_dispersion(&CavityConfig::with_smf_length(8.0)), by_hand, max_relative = 1e-12);
        assert_relative_eq!(by_hand, 0.0343, max_relative = 2e-3);
    }

    #[test]
    fn net_dispersion_is_linear_in_length() {
        let d = |l| net_dispersion(&CavityConfig::with_smf_length(l));
        let slope = d(1.0) - d(0.0);
        for l in [2.0, 3.5, 7.6, 10.0] {
            assert_relative_eq!(d(l), d(0.0) + slope * l, epsilon = 1e-14);
        }
    }

    #[test]
    fn polarizer_cases() {
        let f = random_field(1);
        let p0 = apply_polarizer(&f, 0.0);
        assert_eq!(p0.u(), f.u());
        assert!(p0.v().iter().all(|z| z.norm() == 0.0));

        let phi = 0.13 * PI;
        let once = apply_polarizer(&f, phi);
        let twice = apply_polarizer(&once, phi);
        for (a, b) in once.u().iter().chain(once.v()).zip(twice.u().iter().chain(twice.v())) {
            assert!((a - b).norm() < 1e-15);
        }
        assert!(once.total_energy() <= f.total_energy());
    }

    #[test]
    fn phase_bias_cases() {
        let f = random_field(2);
        assert_eq!(apply_phase_bias(&f, 0.0), f);
        let full = apply_phase_bias(&f, 2.0 * PI);
        for (a, b) in full.v().iter().zip(f.v()) {
            assert!((a - b).norm() < 1e-15);
        }
        let any = apply_phase_bias(&f, 0.77);
        for (a, b) in any.v().iter().zip(f.v()) {
            assert_relative_eq!(a.norm(), b.norm(), max_relative = 1e-15);
        }
        assert_eq!(any.u(), f.u());
    }

    #[test]
    fn coupler_splits_energy() {
        let f = random_field(3);
        let (k, e) = apply_coupler(&f, 0.5);
        assert_relative_eq!(k.total_energy(), 0.5 * f.total_energy(), max_relative = 1e-12);
        assert_relative_eq!(e.total_energy(), 0.5 * f.total_energy(), max_relative = 1e-12);
        let (k, _) = apply_coupler(&f, 1e-9);
        assert_relative_eq!(k.total_energy(), f.total_energy(), max_relative = 1e-8);
    }

    #[test]
    fn zero_field_stays_zero() {
        let cfg = small_cfg();
        let f = VectorField::zeros(cfg.grid.build().unwrap());
        let (k, e) = round_trip(&f, &cfg).unwrap();
        assert_eq!(k.total_energy(), 0.0);
        assert_eq!(e.total_energy(), 0.0);
    }

    #[test]
    fn passive_round_trip_loses_energy() {
        let mut cfg = small_cfg();
        cfg.set_gain(0.0);
        let f = random_field(4);
        let (k, _, ledger) = round_trip_with_ledger(&f, &cfg).unwrap();
        assert!(k.total_energy() < f.total_energy());
        assert_relative_eq!(ledger.after_bias, ledger.after_polarizer, max_relative = 1e-12);
        assert_relative_eq!(ledger.before_coupler, ledger.after_bias, max_relative = 1e-9);
        assert_relative_eq!(ledger.kept + ledger.emitted, ledger.before_coupler, max_relative = 1e-9);
    }

    #[test]
    fn round_trip_is_deterministic() {
        let cfg = small_cfg();
        let f = random_field(5);
        let a = round_trip(&f, &cfg).unwrap();
        let b = round_trip(&f, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn passive_run_is_extinguished() {
        let mut cfg = small_cfg();
        cfg.set_gain(0.0);
        cfg.max_round_trips = 500;
        let (f, trace) = run_to_steady_state(&random_field(6), &cfg).unwrap();
        assert_eq!(trace.status, RunStatus::Extinguished);
        assert!(f.total_energy() < cfg.extinction_energy_pj);
        assert_eq!(trace.records.len(), trace.records.last().unwrap().trip);
    }

    #[test]
    fn validation_rejects_bad_lumped_values() {
        let cfg = CavityConfig { coupler_out: 1.5, ..Default::default() };
        assert!(cfg.validate().is_err());
        let mut cfg = CavityConfig::default();
        cfg.set_gain(0.0);
        assert!(cfg.validate().is_err());
        assert!(CavityConfig::default().validate().is_ok());
    }
}

//! Split-step integration of the coupled two-polarization propagation
//! equations through a single fiber segment.
//!
//! Units throughout: z in km, t in ps, power in W, energy in pJ.
//!
//! The linear part (birefringence, group-velocity mismatch, second and third
//! order dispersion, distributed gain and its parabolic gain filter) is
//! applied exactly in the frequency domain. The Kerr part, including the
//! coherent-coupling term, is solved exactly in the circular-polarization
//! basis where it reduces to pure self/cross phase rotation.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::PropagationError;
use crate::grid::{TimeGrid, VectorField};

/// Speed of light in nm/ps.
pub const C_NM_PER_PS: f64 = 299_792.458;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Physical parameters of one piece of fiber, in the units engineers quote
/// them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberSegment {
    pub name: String,
    pub length_m: f64,
    /// Dispersion parameter D, (ps/nm)/km.
    pub dispersion_ps_nm_km: f64,
    /// Dispersion slope, (ps^2/nm)/km.
    #[serde(default)]
    pub third_order_ps2_nm_km: f64,
    /// Kerr coefficient, 1/(W km).
    pub gamma_per_w_km: f64,
    /// Small-signal gain, 1/km. Zero for passive fiber.
    #[serde(default)]
    pub small_signal_gain_per_km: f64,
    /// Gain saturation energy, pJ.
    #[serde(default = "default_sat_energy")]
    pub sat_energy_pj: f64,
    /// Gain bandwidth, nm.
    #[serde(default = "default_gain_bandwidth")]
    pub gain_bandwidth_nm: f64,
    /// Cavity length over beat length, L/L_b.
    #[serde(default = "default_beat_ratio")]
    pub beat_length_ratio: f64,
}

fn default_sat_energy() -> f64 {
    500.0
}
fn default_gain_bandwidth() -> f64 {
    24.0
}
fn default_beat_ratio() -> f64 {
    0.01
}

impl FiberSegment {
    fn passive(name: &str, length_m: f64, d: f64) -> Self {
        Self {
            name: name.to_string(),
            length_m,
            dispersion_ps_nm_km: d,
            third_order_ps2_nm_km: 0.1,
            gamma_per_w_km: 3.0,
            small_signal_gain_per_km: 0.0,
            sat_energy_pj: default_sat_energy(),
            gain_bandwidth_nm: default_gain_bandwidth(),
            beat_length_ratio: default_beat_ratio(),
        }
    }

    /// 5 m erbium-doped fiber, D = -32 (ps/nm)/km, g0 = 485 /km.
    pub fn edf() -> Self {
        Self {
            small_signal_gain_per_km: 485.0,
            ..Self::passive("edf", 5.0, -32.0)
        }
    }

    /// Standard single-mode fiber, D = +18 (ps/nm)/km.
    pub fn smf(length_m: f64) -> Self {
        Self::passive("smf", length_m, 18.0)
    }

    /// 5.2 m dispersion-compensating fiber, D = -2 (ps/nm)/km.
    pub fn dcf() -> Self {
        Self::passive("dcf", 5.2, -2.0)
    }

    pub fn length_km(&self) -> f64 {
        self.length_m * 1e-3
    }

    pub fn validate(&self) -> Result<(), PropagationError> {
        let bad = |reason: &str| {
            Err(PropagationError::InvalidSegment {
                segment: self.name.clone(),
                reason: reason.to_string(),
            })
        };
        if !(self.length_m >= 0.0) {
            return bad("length must be >= 0");
        }
        if !(self.gamma_per_w_km >= 0.0) {
            return bad("gamma must be >= 0");
        }
        if !(self.small_signal_gain_per_km >= 0.0) {
            return bad("small-signal gain must be >= 0");
        }
        if self.small_signal_gain_per_km > 0.0 && !(self.sat_energy_pj > 0.0) {
            return bad("saturation energy must be > 0 when gain > 0");
        }
        if self.small_signal_gain_per_km > 0.0 && !(self.gain_bandwidth_nm > 0.0) {
            return bad("gain bandwidth must be > 0 when gain > 0");
        }
        if !(self.beat_length_ratio >= 0.0) {
            return bad("beat length ratio must be >= 0");
        }
        if ![
            self.dispersion_ps_nm_km,
            self.third_order_ps2_nm_km,
            self.gamma_per_w_km,
        ]
        .iter()
        .all(|x| x.is_finite())
        {
            return bad("non-finite coefficient");
        }
        Ok(())
    }
}

/// Propagation-equation coefficients in simulation units.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DerivedCoefficients {
    /// GVD, ps^2/km; positive is normal dispersion.
    pub beta2: f64,
    /// ps^3/km.
    pub beta3: f64,
    /// Birefringent propagation-constant offset, rad/km.
    pub beta_bi: f64,
    /// Group-velocity mismatch, ps/km.
    pub delta: f64,
    /// Gain filter half-width, rad/ps.
    pub omega_g: f64,
}

/// Converts a D-style coefficient at `lambda0_nm` into its beta counterpart
/// magnitude: `lambda0^2 / (2 pi c)`.
pub fn d_to_beta_factor(lambda0_nm: f64) -> f64 {
    lambda0_nm * lambda0_nm / (2.0 * PI * C_NM_PER_PS)
}

pub fn derive_coefficients(
    seg: &FiberSegment,
    lambda0_nm: f64,
    total_cavity_length_m: f64,
) -> DerivedCoefficients {
    let k = d_to_beta_factor(lambda0_nm);
    let beta_bi = if seg.beat_length_ratio > 0.0 && total_cavity_length_m > 0.0 {
        let beat_length_km = total_cavity_length_m * 1e-3 / seg.beat_length_ratio;
        PI / beat_length_km
    } else {
        0.0
    };
    DerivedCoefficients {
        beta2: -seg.dispersion_ps_nm_km * k,
        beta3: seg.third_order_ps2_nm_km * k,
        beta_bi,
        delta: beta_bi * lambda0_nm / (2.0 * PI * C_NM_PER_PS),
        omega_g: seg.gain_bandwidth_nm / k,
    }
}

/// How the Kerr sub-problem is integrated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum NonlinearScheme {
    /// Closed-form phase rotation in the circular basis.
    #[default]
    Exact,
    /// Classical fourth-order Runge-Kutta with a fixed number of sub-steps.
    Rk4 { substeps: usize },
}


/// Step-size control for the symmetric split-step scheme.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepControl {
    pub step_m: f64,
    pub nonlinear: NonlinearScheme,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            step_m: 0.1,
            nonlinear: NonlinearScheme::Exact,
        }
    }
}

impl StepControl {
    pub fn with_step_m(step_m: f64) -> Self {
        Self {
            step_m,
            ..Self::default()
        }
    }

    /// Number of equal steps the segment is split into, and their size in km.
    pub fn partition(&self, length_km: f64) -> Result<(usize, f64), PropagationError> {
        let step_km = self.step_m * 1e-3;
        if !(step_km > 0.0) || !step_km.is_finite() {
            return Err(PropagationError::InvalidStep(step_km));
        }
        if length_km <= 0.0 {
            return Ok((0, 0.0));
        }
        let n = ((length_km / step_km) - 1e-9).ceil().max(1.0) as usize;
        Ok((n, length_km / n as f64))
    }
}

/// Per-sample exponent of the linear operator for the `u` (`sign = +1`) or
/// `v` (`sign = -1`) component, evaluated with `d/dt -> i omega` as
/// implied by the grid's DFT convention.
pub fn linear_exponent(coeff: &DerivedCoefficients, gain: f64, omega: f64, sign: f64) -> Complex64 {
    let dt_sym = I * omega;
    let dt2 = dt_sym * dt_sym;
    let filter = if coeff.omega_g > 0.0 {
        gain / (2.0 * coeff.omega_g * coeff.omega_g)
    } else {
        0.0
    };
    I * sign * coeff.beta_bi - sign * coeff.delta * dt_sym - I * 0.5 * coeff.beta2 * dt2
        + coeff.beta3 / 6.0 * dt2 * dt_sym
        + 0.5 * gain
        + filter * dt2
}

fn linear_multipliers(grid: &TimeGrid, coeff: &DerivedCoefficients, gain: f64, h: f64, sign: f64) -> Vec<Complex64> {
    grid.omega()
        .iter()
        .map(|&w| (linear_exponent(coeff, gain, w, sign) * h).exp())
        .collect()
}

fn apply_spectral(grid: &TimeGrid, data: &mut [Complex64], mult: &[Complex64]) {
    grid.forward(data);
    data.iter_mut().zip(mult).for_each(|(x, m)| *x *= m);
    grid.inverse(data);
}

/// Exact linear propagation over `h` km with constant gain `g` (1/km).
pub fn linear_step(f: &VectorField, coeff: &DerivedCoefficients, g: f64, h: f64) -> VectorField {
    let grid = f.grid().clone();
    let mut out = f.clone();
    apply_spectral(&grid, &mut out.u, &linear_multipliers(&grid, coeff, g, h, 1.0));
    apply_spectral(&grid, &mut out.v, &linear_multipliers(&grid, coeff, g, h, -1.0));
    out
}

/// `exp(i theta)`; a short series below 1e-2 rad, where the truncation
/// error is under 3e-20.
#[inline]
fn unit_phasor(theta: f64) -> Complex64 {
    if theta.abs() < 1e-2 {
        let t2 = theta * theta;
        Complex64::new(
            1.0 - 0.5 * t2 * (1.0 - t2 / 12.0 * (1.0 - t2 / 30.0)),
            theta * (1.0 - t2 / 6.0 * (1.0 - t2 / 20.0 * (1.0 - t2 / 42.0))),
        )
    } else {
        let (s, c) = theta.sin_cos();
        Complex64::new(c, s)
    }
}

/// Exact Kerr step for one sample pair.
#[inline]
fn kerr_exact(u: &mut Complex64, v: &mut Complex64, gamma_h: f64) {
    let a_p = (*u + I * *v) * FRAC_1_SQRT_2;
    let a_m = (*u - I * *v) * FRAC_1_SQRT_2;
    let (pp, pm) = (a_p.norm_sqr(), a_m.norm_sqr());
    let k = 2.0 / 3.0 * gamma_h;
    let a_p = a_p * unit_phasor(k * (pp + 2.0 * pm));
    let a_m = a_m * unit_phasor(k * (pm + 2.0 * pp));
    *u = (a_p + a_m) * FRAC_1_SQRT_2;
    *v = (a_p - a_m) * (-I * FRAC_1_SQRT_2);
}

#[inline]
fn kerr_rhs(u: Complex64, v: Complex64, gamma: f64) -> (Complex64, Complex64) {
    let (pu, pv) = (u.norm_sqr(), v.norm_sqr());
    let du = I * gamma * ((pu + 2.0 / 3.0 * pv) * u + v * v * u.conj() / 3.0);
    let dv = I * gamma * ((pv + 2.0 / 3.0 * pu) * v + u * u * v.conj() / 3.0);
    (du, dv)
}

#[inline]
fn kerr_rk4(u: &mut Complex64, v: &mut Complex64, gamma: f64, h: f64, substeps: usize) {
    let dz = h / substeps.max(1) as f64;
    for _ in 0..substeps.max(1) {
        let (u0, v0) = (*u, *v);
        let (k1u, k1v) = kerr_rhs(u0, v0, gamma);
        let (k2u, k2v) = kerr_rhs(u0 + 0.5 * dz * k1u, v0 + 0.5 * dz * k1v, gamma);
        let (k3u, k3v) = kerr_rhs(u0 + 0.5 * dz * k2u, v0 + 0.5 * dz * k2v, gamma);
        let (k4u, k4v) = kerr_rhs(u0 + dz * k3u, v0 + dz * k3v, gamma);
        *u = u0 + dz / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
        *v = v0 + dz / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    }
}

fn kerr_in_place(u: &mut [Complex64], v: &mut [Complex64], gamma: f64, h: f64, scheme: NonlinearScheme) {
    if gamma == 0.0 {
        return;
    }
    match scheme {
        NonlinearScheme::Exact => u
            .iter_mut()
            .zip(v.iter_mut())
            .for_each(|(a, b)| kerr_exact(a, b, gamma * h)),
        NonlinearScheme::Rk4 { substeps } => u
            .iter_mut()
            .zip(v.iter_mut())
            .for_each(|(a, b)| kerr_rk4(a, b, gamma, h, substeps)),
    }
}

/// Kerr step: `du/dz = i gamma (|u|^2 + 2/3 |v|^2) u + i gamma/3 v^2 u*`
/// and its mirror for `v`, integrated exactly over `h` km.
pub fn nonlinear_step(f: &VectorField, gamma: f64, h: f64) -> VectorField {
    nonlinear_step_with(f, gamma, h, NonlinearScheme::Exact)
}

pub fn nonlinear_step_with(f: &VectorField, gamma: f64, h: f64, scheme: NonlinearScheme) -> VectorField {
    let mut out = f.clone();
    kerr_in_place(&mut out.u, &mut out.v, gamma, h, scheme);
    out
}

/// `g0 exp(-E / E_sat)` with `E` the field energy at segment entry.
pub fn saturated_gain(seg: &FiberSegment, f_in: &VectorField) -> f64 {
    if seg.small_signal_gain_per_km == 0.0 {
        return 0.0;
    }
    seg.small_signal_gain_per_km * (-f_in.total_energy() / seg.sat_energy_pj).exp()
}

/// Propagates through a whole segment with symmetric splitting
/// (linear h/2, Kerr h, linear h/2). Adjacent linear half steps are fused.
pub fn propagate_segment(
    f: &VectorField,
    seg: &FiberSegment,
    coeff: &DerivedCoefficients,
    ctl: &StepControl,
) -> Result<VectorField, PropagationError> {
    let mut out = f.clone();
    propagate_segment_in_place(&mut out, seg, coeff, ctl)?;
    Ok(out)
}

pub(crate) fn propagate_segment_in_place(
    f: &mut VectorField,
    seg: &FiberSegment,
    coeff: &DerivedCoefficients,
    ctl: &StepControl,
) -> Result<(), PropagationError> {
    seg.validate()?;
    let (n_steps, h) = ctl.partition(seg.length_km())?;
    if n_steps == 0 {
        return Ok(());
    }
    let g = saturated_gain(seg, f);
    let grid = f.grid().clone();
    let inv_n = 1.0 / grid.n_samples() as f64;
    let half_u = linear_multipliers(&grid, coeff, g, 0.5 * h, 1.0);
    let half_v = linear_multipliers(&grid, coeff, g, 0.5 * h, -1.0);
    let full_u: Vec<Complex64> = half_u.iter().map(|m| m * m * inv_n).collect();
    let full_v: Vec<Complex64> = half_v.iter().map(|m| m * m * inv_n).collect();
    let half_u: Vec<Complex64> = half_u.iter().map(|m| m * inv_n).collect();
    let half_v: Vec<Complex64> = half_v.iter().map(|m| m * inv_n).collect();
    let mut scratch = vec![Complex64::default(); grid.scratch_len()];

    for step in 0..n_steps {
        let (mu, mv) = if step == 0 {
            (&half_u, &half_v)
        } else {
            (&full_u, &full_v)
        };
        grid.filter_with_scratch(&mut f.u, mu, &mut scratch);
        grid.filter_with_scratch(&mut f.v, mv, &mut scratch);
        kerr_in_place(&mut f.u, &mut f.v, seg.gamma_per_w_km, h, ctl.nonlinear);
        if !f.is_finite() {
            return Err(PropagationError::NonFinite {
                segment: seg.name.clone(),
                z_m: (step as f64 + 1.0) * h * 1e3,
            });
        }
    }
    grid.filter_with_scratch(&mut f.u, &half_u, &mut scratch);
    grid.filter_with_scratch(&mut f.v, &half_v, &mut scratch);
    if !f.is_finite() {
        return Err(PropagationError::NonFinite {
            segment: seg.name.clone(),
            z_m: seg.length_m,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(n: usize, window: f64, seed: u64) -> VectorField {
        let g = make_grid(n, window).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = || Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let u = (0..n).map(|_| c()).collect();
        let v = (0..n).map(|_| c()).collect();
        VectorField::new(g, u, v).unwrap()
    }

    #[test]
    fn unit_phasor_matches_sin_cos() {
        for theta in [0.0, 1e-9, -3e-5, 7e-4, -9.99e-4, 1e-3, 9.99e-3, -0.01, 0.2, -2.5, 40.0] {
            let z = unit_phasor(theta);
            assert!((z - Complex64::from_polar(1.0, theta)).norm() < 2e-16, "{theta}");
        }
    }

    #[test]
    fn beta2_from_d() {
        let c = derive_coefficients(&FiberSegment::edf(), 1565.0, 18.2);
        assert_relative_eq!(c.beta2, 41.61, max_relative = 2e-4);
        let c = derive_coefficients(&FiberSegment::smf(8.0), 1565.0, 18.2);
        assert_relative_eq!(c.beta2, -23.40, max_relative = 3e-4);
        let mut zero = FiberSegment::smf(1.0);
        zero.dispersion_ps_nm_km = 0.0;
        assert_eq!(derive_coefficients(&zero, 1565.0, 18.2).beta2, 0.0);
    }

    #[test]
    fn birefringence_and_filter_coefficients() {
        let c = derive_coefficients(&FiberSegment::edf(), 1565.0, 18.2);
        // L_b = 18.2 m / 0.01 = 1.82 km
        assert_relative_eq!(c.beta_bi, PI / 1.82, max_relative = 1e-12);
        assert!(c.delta > 0.0 && c.delta < 1e-2);
        // 24 nm at 1565 nm is about 18.46 rad/ps
        assert_relative_eq!(c.omega_g, 18.46, max_relative = 1e-3);
        let mut no_bi = FiberSegment::edf();
        no_bi.beat_length_ratio = 0.0;
        assert_eq!(derive_coefficients(&no_bi, 1565.0, 18.2).beta_bi, 0.0);
    }

    #[test]
    fn linear_step_identity_without_coefficients() {
        let f = random_field(64, 10.0, 1);
        let out = linear_step(&f, &DerivedCoefficients::default(), 0.0, 0.3);
        for (a, b) in f.u().iter().zip(out.u()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn linear_step_cw_gain() {
        let g = make_grid(128, 20.0).unwrap();
        let f = VectorField::from_fn(g, |_| Complex64::new(1.0, 0.0), |_| Complex64::new(0.5, 0.0));
        let coeff = DerivedCoefficients {
            beta2: 20.0,
            omega_g: 18.0,
            ..Default::default()
        };
        let (gain, h) = (300.0, 0.002);
        let out = linear_step(&f, &coeff, gain, h);
        let expect = (gain * h / 2.0).exp();
        for z in out.u() {
            assert_relative_eq!(z.norm(), expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn gaussian_dispersive_broadening() {
        // |u|^2 of a chirp-free Gaussian broadens as T1 = T0 sqrt(1 + (b2 L / T0^2)^2).
        let g = make_grid(4096, 200.0).unwrap();
        let t0 = 2.0;
        let f = VectorField::from_fn(
            g,
            |t| Complex64::new((-t * t / (2.0 * t0 * t0)).exp(), 0.0),
            |_| Complex64::default(),
        );
        let coeff = DerivedCoefficients {
            beta2: 40.0,
            ..Default::default()
        };
        let len = 0.25;
        let out = linear_step(&f, &coeff, 0.0, len);
        let t1 = t0 * (1.0 + (coeff.beta2 * len / (t0 * t0)).powi(2)).sqrt();
        let peak = (t0 / t1).sqrt();
        for (t, z) in out.grid().time().iter().zip(out.u()) {
            let exact = peak * (-t * t / (2.0 * t1 * t1)).exp();
            assert!((z.norm() - exact).abs() < 1e-6 * peak, "t = {t}");
        }
    }

    #[test]
    fn linear_steps_commute() {
        let f = random_field(128, 16.0, 3);
        let a = DerivedCoefficients {
            beta2: 3.0,
            beta3: 0.4,
            beta_bi: 1.2,
            delta: 0.01,
            omega_g: 5.0,
        };
        let b = DerivedCoefficients {
            beta2: -7.0,
            beta3: 0.0,
            beta_bi: 0.3,
            delta: 0.0,
            omega_g: 9.0,
        };
        let ab = linear_step(&linear_step(&f, &a, 100.0, 0.01), &b, 0.0, 0.02);
        let ba = linear_step(&linear_step(&f, &b, 0.0, 0.02), &a, 100.0, 0.01);
        for (x, y) in ab.u().iter().chain(ab.v()).zip(ba.u().iter().chain(ba.v())) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn spm_phase_is_exact() {
        let g = make_grid(16, 1.0).unwrap();
        let p: f64 = 2.5;
        let f = VectorField::from_fn(g, |_| Complex64::new(p.sqrt(), 0.0), |_| Complex64::default());
        let (gamma, h) = (3.0, 0.01);
        let out = nonlinear_step(&f, gamma, h);
        for z in out.u() {
            assert_relative_eq!(z.norm(), p.sqrt(), max_relative = 1e-14);
            assert_relative_eq!(z.arg(), gamma * p * h, max_relative = 1e-12);
        }
        assert!(out.v().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn kerr_of_zero_is_zero() {
        let g = make_grid(16, 1.0).unwrap();
        let f = VectorField::zeros(g);
        assert_eq!(nonlinear_step(&f, 3.0, 1.0), f);
    }

    #[test]
    fn kerr_conserves_pointwise_power() {
        let f = random_field(256, 10.0, 9);
        let out = nonlinear_step(&f, 3.0, 0.5);
        for (a, b) in f.power().iter().zip(out.power()) {
            assert_relative_eq!(*a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn kerr_exact_matches_fine_rk4() {
        // Large nonlinear phase so the coherent-coupling term matters.
        let f = random_field(64, 10.0, 11).scaled(Complex64::new(3.0, 0.0));
        let (gamma, h) = (3.0, 0.05);
        let exact = nonlinear_step(&f, gamma, h);
        let rk = nonlinear_step_with(&f, gamma, h, NonlinearScheme::Rk4 { substeps: 4000 });
        for (x, y) in exact.u().iter().chain(exact.v()).zip(rk.u().iter().chain(rk.v())) {
            assert!((x - y).norm() < 1e-9, "{x} vs {y}");
        }
    }

    #[test]
    fn saturated_gain_values() {
        let g = make_grid(128, 100.0).unwrap();
        let seg = FiberSegment::edf();
        assert_eq!(saturated_gain(&seg, &VectorField::zeros(g.clone())), 485.0);
        // 5 W CW over 100 ps = 500 pJ = E_sat
        let f = VectorField::from_fn(g, |_| Complex64::new(5f64.sqrt(), 0.0), |_| Complex64::default());
        assert_relative_eq!(f.total_energy(), 500.0, max_relative = 1e-12);
        assert_relative_eq!(saturated_gain(&seg, &f), 485.0 / std::f64::consts::E, max_relative = 1e-12);
        assert_relative_eq!(saturated_gain(&seg, &f), 178.42, max_relative = 1e-4);
        assert_eq!(saturated_gain(&FiberSegment::smf(1.0), &f), 0.0);
    }

    #[test]
    fn partition_rounds_up() {
        let ctl = StepControl::with_step_m(0.1);
        assert_eq!(ctl.partition(0.005).unwrap().0, 50);
        assert_eq!(ctl.partition(0.0052).unwrap().0, 52);
        assert_eq!(ctl.partition(0.0076).unwrap().0, 76);
        assert_eq!(ctl.partition(0.00005).unwrap().0, 1);
        assert_eq!(ctl.partition(0.0).unwrap().0, 0);
        assert!(StepControl::with_step_m(0.0).partition(1.0).is_err());
    }

    #[test]
    fn passive_segment_conserves_energy() {
        let f = random_field(512, 50.0, 5);
        let seg = FiberSegment::smf(8.0);
        let coeff = derive_coefficients(&seg, 1565.0, 18.2);
        let out = propagate_segment(&f, &seg, &coeff, &StepControl::default()).unwrap();
        assert_relative_eq!(out.total_energy(), f.total_energy(), max_relative = 1e-10);
    }

    #[test]
    fn nan_is_reported_with_position() {
        let g = make_grid(64, 10.0).unwrap();
        // |u|^2 overflows, so the nonlinear phase is infinite
        let f = VectorField::from_fn(g, |_| Complex64::new(1e200, 0.0), |_| Complex64::default());
        let seg = FiberSegment::smf(1.0);
        let coeff = DerivedCoefficients::default();
        let err = propagate_segment(&f, &seg, &coeff, &StepControl::default()).unwrap_err();
        assert!(matches!(err, PropagationError::NonFinite { ref segment, .. } if segment == "smf"), "{err}");
    }
}

#![allow(dead_code)]

use dmsoliton::fiber::{derive_coefficients, propagate_segment, FiberSegment, StepControl};
use dmsoliton::{make_grid, VectorField};
use num_complex::Complex64;
use rustfft::FftPlanner;

pub const LAMBDA0: f64 = 1565.0;

/// Lossless, gainless, isotropic fiber.
pub fn passive_fiber(name: &str, length_m: f64, d_ps_nm_km: f64, d3: f64, gamma: f64) -> FiberSegment {
    FiberSegment {
        name: name.into(),
        length_m,
        dispersion_ps_nm_km: d_ps_nm_km,
        third_order_ps2_nm_km: d3,
        gamma_per_w_km: gamma,
        small_signal_gain_per_km: 0.0,
        sat_energy_pj: 500.0,
        gain_bandwidth_nm: 0.0,
        beat_length_ratio: 0.0,
    }
}

pub fn propagate(f: &VectorField, seg: &FiberSegment, step_m: f64) -> VectorField {
    let coeff = derive_coefficients(seg, LAMBDA0, seg.length_m);
    propagate_segment(f, seg, &coeff, &StepControl::with_step_m(step_m)).unwrap()
}

pub fn l2_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

pub struct DarkSolitonCheck {
    pub t0_ps: f64,
    pub dispersion_length_km: f64,
    pub relative_error: f64,
}

/// A pair of black solitons `tanh((t+W/4)/T0) tanh((t-W/4)/T0)` on a
/// periodic window, propagated `n_ld` dispersion lengths through normal
/// dispersion fiber and compared with the analytic `e^{i gamma P0 z}` evolution.
pub fn dark_soliton_check(n_samples: usize, window_ps: f64, step_m: f64, n_ld: f64) -> DarkSolitonCheck {
    let (p0, gamma, d) = (1.0, 3.0, -32.0);
    let probe = passive_fiber("normal", 1.0, d, 0.0, gamma);
    let beta2 = derive_coefficients(&probe, LAMBDA0, 1.0).beta2;
    let t0 = (beta2 / (gamma * p0)).sqrt();
    let ld = t0 * t0 / beta2;
    let z_km = n_ld * ld;
    let seg = passive_fiber("normal", z_km * 1e3, d, 0.0, gamma);
    let g = make_grid(n_samples, window_ps).unwrap();
    let q = window_ps / 4.0;
    let shape = |t: f64| p0.sqrt() * ((t + q) / t0).tanh() * ((t - q) / t0).tanh();
    let f = VectorField::from_fn(g.clone(), |t| Complex64::new(shape(t), 0.0), |_| Complex64::default());
    let out = propagate(&f, &seg, step_m);
    let rot = Complex64::from_polar(1.0, gamma * p0 * z_km);
    let exact: Vec<Complex64> = g.time().iter().map(|&t| rot * shape(t)).collect();
    DarkSolitonCheck {
        t0_ps: t0,
        dispersion_length_km: ld,
        relative_error: l2_diff(out.u(), &exact),
    }
}

/// Errors of steps `h` and `h/2` against an `h/16` reference for a
/// Gaussian under dispersion and Kerr nonlinearity.
pub fn split_step_errors(h_m: f64) -> (f64, f64) {
    let g = make_grid(1024, 40.0).unwrap();
    let seg = passive_fiber("test", 100.0, -32.0, 0.1, 3.0);
    let f = VectorField::from_fn(
        g,
        |t| Complex64::new(10f64.sqrt() * (-t * t / 2.0).exp(), 0.0),
        |t| Complex64::new(0.5 * (-(t - 0.3) * (t - 0.3) / 2.0).exp(), 0.0),
    );
    let reference = propagate(&f, &seg, h_m / 16.0);
    let err = |h: f64| {
        let out = propagate(&f, &seg, h);
        let a: Vec<Complex64> = out.u().iter().chain(out.v()).copied().collect();
        let b: Vec<Complex64> = reference.u().iter().chain(reference.v()).copied().collect();
        l2_diff(&a, &b)
    };
    (err(h_m), err(h_m / 2.0))
}

/// Independent scalar split-step for `u_z = -i b2/2 u_tt + b3/6 u_ttt + i gamma |u|^2 u`,
/// written directly against rustfft.
pub fn scalar_split_step(u0: &[Complex64], window: f64, beta2: f64, beta3: f64, gamma: f64, len_km: f64, steps: usize) -> Vec<Complex64> {
    let n = u0.len();
    let h = len_km / steps as f64;
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let omega = |k: usize| {
        let k = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
        2.0 * std::f64::consts::PI * k / window
    };
    let half: Vec<Complex64> = (0..n)
        .map(|k| {
            let w = omega(k);
            Complex64::from_polar(1.0, 0.5 * h * (0.5 * beta2 * w * w - beta3 * w * w * w / 6.0))
        })
        .collect();
    let mut u = u0.to_vec();
    let disperse = |u: &mut Vec<Complex64>| {
        fwd.process(u);
        for (x, m) in u.iter_mut().zip(&half) {
            *x *= m / n as f64;
        }
        inv.process(u);
    };
    for _ in 0..steps {
        disperse(&mut u);
        for x in u.iter_mut() {
            *x *= Complex64::from_polar(1.0, gamma * x.norm_sqr() * h);
        }
        disperse(&mut u);
    }
    u
}

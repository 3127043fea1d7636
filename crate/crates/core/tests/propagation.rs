mod common;

use common::*;
use dmsoliton::fiber::{derive_coefficients, nonlinear_step, FiberSegment};
use dmsoliton::{make_grid, VectorField};
use num_complex::Complex64;

#[test]
fn black_soliton_pair_keeps_its_shape() {
    let c = dark_soliton_check(8192, 200.0, 0.1, 10.0);
    assert!((c.t0_ps - 3.724).abs() < 1e-3, "T0 = {}", c.t0_ps);
    assert!(c.relative_error < 1e-3, "error {}", c.relative_error);
}

#[test]
fn strang_splitting_is_second_order() {
    let (e1, e2) = split_step_errors(2.5);
    let ratio = e1 / e2;
    assert!((3.5..=4.5).contains(&ratio), "ratio {ratio} ({e1:e} / {e2:e})");
}

#[test]
fn matches_independent_scalar_solver() {
    let g = make_grid(2048, 50.0).unwrap();
    let shape = |t: f64| Complex64::new(2.0 / (t / 0.8).cosh(), 0.3 * (-(t - 4.0) * (t - 4.0)).exp());
    let f = VectorField::from_fn(g.clone(), shape, |_| Complex64::default());
    let seg = passive_fiber("smf", 40.0, 18.0, 0.1, 3.0);
    let out = propagate(&f, &seg, 0.5);
    let c = derive_coefficients(&seg, LAMBDA0, seg.length_m);
    let u0: Vec<Complex64> = g.time().iter().map(|&t| shape(t)).collect();
    let reference = scalar_split_step(&u0, 50.0, c.beta2, c.beta3, 3.0, 0.04, 80);
    assert!(l2_diff(out.u(), &reference) < 1e-10);
    assert!(out.v().iter().all(|z| z.norm() == 0.0));
}

#[test]
fn passive_segments_conserve_energy() {
    let g = make_grid(4096, 100.0).unwrap();
    let f = VectorField::from_fn(
        g,
        |t| Complex64::new(1.0 - 0.9 / (t / 2.0).cosh(), 0.1 * t.sin()),
        |t| Complex64::new(0.4, 0.2 * (t / 3.0).cos()),
    );
    for seg in [
        FiberSegment { small_signal_gain_per_km: 0.0, ..FiberSegment::edf() },
        FiberSegment::smf(8.0),
        FiberSegment::dcf(),
    ] {
        let c = derive_coefficients(&seg, LAMBDA0, 18.2);
        let out = dmsoliton::propagate_segment(&f, &seg, &c, &Default::default()).unwrap();
        let rel = (out.total_energy() - f.total_energy()).abs() / f.total_energy();
        assert!(rel < 1e-10, "{}: {rel:e}", seg.name);
    }
}

#[test]
fn kerr_step_conserves_local_power() {
    let g = make_grid(256, 10.0).unwrap();
    let f = VectorField::from_fn(
        g,
        |t| Complex64::new(30.0 * (t * 1.3).cos(), 5.0 * t),
        |t| Complex64::new(-12.0, 20.0 * (t * 0.7).sin()),
    );
    let out = nonlinear_step(&f, 3.0, 0.05);
    for (a, b) in f.power().iter().zip(out.power()) {
        assert!((a - b).abs() <= 1e-12 * a.max(1e-300), "{a} -> {b}");
    }
}

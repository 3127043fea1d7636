//! Periodic time grid, its angular-frequency axis, and the two-component
//! optical field that lives on it.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{Fft, FftPlanner};

use crate::error::GridError;

/// Forward/inverse FFT plans shared by every field on a grid.
pub(crate) struct FftPair {
    pub forward: Arc<dyn Fft<f64>>,
    pub inverse: Arc<dyn Fft<f64>>,
}

/// Uniform periodic sampling of `window` ps with `n_samples` points.
///
/// Sample `j` sits at `t_j = (j - n/2) * dt`, so the window covers
/// `[-window/2, window/2)` and `t = 0` is an exact sample.
#[derive(Clone)]
pub struct TimeGrid {
    n_samples: usize,
    window: f64,
    dt: f64,
    time: Arc<[f64]>,
    omega: Arc<[f64]>,
    fft: Arc<FftPair>,
}

impl TimeGrid {
    pub fn new(n_samples: usize, window: f64) -> Result<Self, GridError> {
        if n_samples < 2 || !n_samples.is_power_of_two() {
            return Err(GridError::NotPowerOfTwo(n_samples));
        }
        if !(window > 0.0) || !window.is_finite() {
            return Err(GridError::BadWindow(window));
        }
        let dt = window / n_samples as f64;
        let half = n_samples / 2;
        let time: Arc<[f64]> = (0..n_samples)
            .map(|j| (j as f64 - half as f64) * dt)
            .collect();
        let omega: Arc<[f64]> = (0..n_samples)
            .map(|j| {
                let k = if j < half {
                    j as f64
                } else {
                    j as f64 - n_samples as f64
                };
                2.0 * PI * k / window
            })
            .collect();
        let mut planner = FftPlanner::new();
        let fft = Arc::new(FftPair {
            forward: planner.plan_fft_forward(n_samples),
            inverse: planner.plan_fft_inverse(n_samples),
        });
        Ok(Self {
            n_samples,
            window,
            dt,
            time,
            omega,
            fft,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    /// Window duration in ps.
    pub fn window(&self) -> f64 {
        self.window
    }

    /// Sample spacing in ps.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Sample times in ps.
    pub fn time(&self) -> &[f64] {
        &self.time
    }

    /// Angular frequency axis in rad/ps, standard DFT ordering.
    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    /// Frequency bin spacing in rad/ps.
    pub fn d_omega(&self) -> f64 {
        2.0 * PI / self.window
    }

    /// In-place unnormalized forward DFT (`sum x_j e^{-i w_k t_j}` up to the
    /// constant phase of the shifted time origin).
    pub(crate) fn forward(&self, data: &mut [Complex64]) {
        self.fft.forward.process(data);
    }

    /// In-place inverse DFT including the `1/n` normalization.
    pub(crate) fn inverse(&self, data: &mut [Complex64]) {
        self.fft.inverse.process(data);
        let scale = 1.0 / self.n_samples as f64;
        data.iter_mut().for_each(|x| *x *= scale);
    }

    /// Scratch length needed by [`Self::filter_with_scratch`].
    pub(crate) fn scratch_len(&self) -> usize {
        self.fft
            .forward
            .get_inplace_scratch_len()
            .max(self.fft.inverse.get_inplace_scratch_len())
    }

    /// Forward DFT, pointwise multiply, unnormalized inverse DFT. `mult`
    /// must already carry the `1/n` factor.
    pub(crate) fn filter_with_scratch(&self, data: &mut [Complex64], mult: &[Complex64], scratch: &mut [Complex64]) {
        self.fft.forward.process_with_scratch(data, scratch);
        data.iter_mut().zip(mult).for_each(|(x, m)| *x *= m);
        self.fft.inverse.process_with_scratch(data, scratch);
    }
}

impl PartialEq for TimeGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n_samples == other.n_samples && self.window == other.window
    }
}

impl fmt::Debug for TimeGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TimeGrid")
            .field("n_samples", &self.n_samples)
            .field("window", &self.window)
            .field("dt", &self.dt)
            .finish()
    }
}

/// Convenience wrapper mirroring [`TimeGrid::new`].
pub fn make_grid(n_samples: usize, window: f64) -> Result<TimeGrid, GridError> {
    TimeGrid::new(n_samples, window)
}

/// Slowly varying envelopes of the two linear polarization components,
/// amplitudes in sqrt(W).
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: TimeGrid,
    pub(crate) u: Vec<Complex64>,
    pub(crate) v: Vec<Complex64>,
}

impl VectorField {
    pub fn new(grid: TimeGrid, u: Vec<Complex64>, v: Vec<Complex64>) -> Result<Self, GridError> {
        let n = grid.n_samples();
        if u.len() != n || v.len() != n {
            return Err(GridError::LengthMismatch {
                expected: n,
                u: u.len(),
                v: v.len(),
            });
        }
        if let Some(idx) = u.iter().chain(&v).position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(GridError::NonFinite(idx % n));
        }
        Ok(Self { grid, u, v })
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        let n = grid.n_samples();
        Self {
            grid,
            u: vec![Complex64::default(); n],
            v: vec![Complex64::default(); n],
        }
    }

    /// Builds a field from real-valued or complex profiles evaluated per sample time.
    pub fn from_fn(
        grid: TimeGrid,
        u: impl Fn(f64) -> Complex64,
        v: impl Fn(f64) -> Complex64,
    ) -> Self {
        let uu = grid.time().iter().map(|&t| u(t)).collect();
        let vv = grid.time().iter().map(|&t| v(t)).collect();
        Self { grid, u: uu, v: vv }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn u(&self) -> &[Complex64] {
        &self.u
    }

    pub fn v(&self) -> &[Complex64] {
        &self.v
    }

    pub fn into_components(self) -> (Vec<Complex64>, Vec<Complex64>) {
        (self.u, self.v)
    }

    pub fn is_finite(&self) -> bool {
        self.u
            .iter()
            .chain(&self.v)
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Total instantaneous power |u|^2 + |v|^2 per sample, in W.
    pub fn power(&self) -> Vec<f64> {
        self.u
            .iter()
            .zip(&self.v)
            .map(|(a, b)| a.norm_sqr() + b.norm_sqr())
            .collect()
    }

    /// Energy in the window, pJ.
    pub fn total_energy(&self) -> f64 {
        let sum: f64 = self
            .u
            .iter()
            .chain(&self.v)
            .map(|z| z.norm_sqr())
            .sum();
        sum * self.grid.dt()
    }

    /// Multiplies both components by a complex constant.
    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            grid: self.grid.clone(),
            u: self.u.iter().map(|z| z * factor).collect(),
            v: self.v.iter().map(|z| z * factor).collect(),
        }
    }

    /// Power spectral density of each component over `grid.omega()`,
    /// normalized so that `sum(psd) * d_omega / 2pi == total_energy`.
    pub fn spectrum(&self) -> Spectrum {
        let dt = self.grid.dt();
        let psd = |comp: &[Complex64]| {
            let mut buf = comp.to_vec();
            self.grid.forward(&mut buf);
            buf.iter().map(|z| z.norm_sqr() * dt * dt).collect::<Vec<_>>()
        };
        Spectrum {
            grid: self.grid.clone(),
            u: psd(&self.u),
            v: psd(&self.v),
        }
    }
}

/// Free-function form of [`VectorField::total_energy`].
pub fn total_energy(f: &VectorField) -> f64 {
    f.total_energy()
}

/// Spectral power densities (pJ ps) of the two components, DFT ordering.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub grid: TimeGrid,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl Spectrum {
    pub fn total(&self) -> Vec<f64> {
        self.u.iter().zip(&self.v).map(|(a, b)| a + b).collect()
    }

    /// Energy recovered from the spectrum, pJ.
    pub fn energy(&self) -> f64 {
        let s: f64 = self.u.iter().chain(&self.v).sum();
        s * self.grid.d_omega() / (2.0 * PI)
    }
}

/// Initial condition: CW background carrying a shallow sech-shaped dip.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DipSeed {
    /// Background power, W.
    pub cw_power: f64,
    /// Fractional amplitude depth of the dip, 0..=1.
    pub dip_depth: f64,
    /// sech width parameter, ps.
    pub dip_width: f64,
    /// Relative amplitude of the complex white noise.
    pub noise_amplitude: f64,
}

impl Default for DipSeed {
    fn default() -> Self {
        Self {
            cw_power: 0.1,
            dip_depth: 0.1,
            dip_width: 2.0,
            noise_amplitude: 1e-3,
        }
    }
}

impl DipSeed {
    pub fn validate(&self) -> Result<(), GridError> {
        if !(0.0..=1.0).contains(&self.dip_depth) {
            return Err(GridError::BadDipDepth(self.dip_depth));
        }
        if !(self.dip_width > 0.0) {
            return Err(GridError::BadDipWidth(self.dip_width));
        }
        if !(self.cw_power >= 0.0) || !(self.noise_amplitude >= 0.0) {
            return Err(GridError::BadSeedLevel);
        }
        Ok(())
    }
}

/// `u(t) = sqrt(P) (1 - depth sech(t/width)) (1 + noise)`; `v` identical up
/// to its own noise draw. Deterministic for a fixed seed.
pub fn init_cw_with_dip(grid: &TimeGrid, seed_spec: &DipSeed, seed: u64) -> Result<VectorField, GridError> {
    seed_spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amp = seed_spec.cw_power.sqrt();
    let mut draw = |noise: f64| -> Complex64 {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        Complex64::new(1.0 + noise * re * std::f64::consts::FRAC_1_SQRT_2, noise * im * std::f64::consts::FRAC_1_SQRT_2)
    };
    let profile: Vec<f64> = grid
        .time()
        .iter()
        .map(|&t| amp * (1.0 - seed_spec.dip_depth / (t / seed_spec.dip_width).cosh()))
        .collect();
    let noise = seed_spec.noise_amplitude;
    let u = profile.iter().map(|&p| p * draw(noise)).collect();
    let v = profile.iter().map(|&p| p * draw(noise)).collect();
    Ok(VectorField {
        grid: grid.clone(),
        u,
        v,
    })
}

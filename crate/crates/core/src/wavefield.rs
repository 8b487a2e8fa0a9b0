//! Freely propagated Gaussian slit modes and the coherent grating field.
//!
//! Each slit contributes
//!
//! ```text
//! φ_n(x, z) = (2π σ̃_z²)^(-1/4) · exp[-(x - x_n)² / (4 σ0 σ̃_z)],   σ̃_z = σ0 (1 + i z / 2kσ0²)
//! ```
//!
//! and the transmitted wave is `ψ = N^(-1/2) Σ_n φ_n` (unit total intensity).
//! The quarter power is taken as `exp(¼ · principal log)`, which is
//! continuous for every `z >= 0` because `Re σ̃_z > 0`.

use std::f64::consts::PI;
use std::ops::Range;

use num_complex::Complex64;

use crate::model::Model;

/// Largest Gaussian exponent (relative to the leading mode at the same
/// point) kept in mode and pair sums; `e^-46 ≈ 1e-20`.
pub const EXPONENT_CUTOFF: f64 = 46.0;

/// A single mode and its transverse derivative at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeValue {
    pub amplitude: Complex64,
    pub gradient: Complex64,
}

/// Everything about the modes that depends on `z` only.
///
/// Building one costs a handful of transcendental calls; evaluating all the
/// modes at a point then costs three complex exponentials regardless of the
/// number of slits.
#[derive(Debug, Clone)]
pub struct ModeSlice<'a> {
    model: &'a Model,
    z: f64,
    sigma_z: f64,
    /// `1 / (4 σ0 σ̃_z)`; its real part is `1 / (4 σ_z²)`.
    coef: Complex64,
    /// `(2π σ̃_z²)^(-1/4)`
    prefactor: Complex64,
    /// Ratio of successive slit-to-slit amplitude ratios, `exp(-2 coef d²)`.
    ratio_step: Complex64,
    /// Half-width (in x) of the active window beyond the nearest slit, squared,
    /// in units where the cutoff is measured: `4 σ_z² · EXPONENT_CUTOFF`.
    reach_sq: f64,
}

impl<'a> ModeSlice<'a> {
    pub fn new(model: &'a Model, z: f64) -> Self {
        let sigma0 = model.sigma0();
        let sigma_t = model.complex_width(z);
        let sigma_z = sigma_t.norm();
        let coef = (4.0 * sigma0 * sigma_t).inv();
        let log_var = Complex64::new((2.0 * PI).ln(), 0.0) + 2.0 * sigma_t.ln();
        let prefactor = (-0.25 * log_var).exp();
        let d = model.period();
        let ratio_step = (-2.0 * coef * d * d).exp();
        Self { model, z, sigma_z, coef, prefactor, ratio_step, reach_sq: 4.0 * sigma_z * sigma_z * EXPONENT_CUTOFF }
    }

    pub fn model(&self) -> &'a Model {
        self.model
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn sigma_z(&self) -> f64 {
        self.sigma_z
    }

    /// Multiplier turning a mode amplitude into its x-derivative, divided by `(x - x_n)`:
    /// `∂φ_n/∂x = -(x - x_n) / (2σ0σ̃_z) · φ_n = -2·coef·(x - x_n)·φ_n`.
    pub fn gradient_coef(&self) -> Complex64 {
        -2.0 * self.coef
    }

    /// Closed-form mode amplitude, evaluated directly.
    pub fn amplitude(&self, n: usize, x: f64) -> Complex64 {
        let dx = x - self.model.centers()[n];
        self.prefactor * (-self.coef * (dx * dx)).exp()
    }

    pub fn mode(&self, n: usize, x: f64) -> ModeValue {
        let dx = x - self.model.centers()[n];
        let amplitude = self.amplitude(n, x);
        ModeValue { amplitude, gradient: self.gradient_coef() * dx * amplitude }
    }

    /// Index of the slit whose centre is closest to `x`.
    pub fn nearest_slit(&self, x: f64) -> usize {
        let n = self.model.n_slits();
        let mid = (n as f64 - 1.0) / 2.0;
        let idx = (x / self.model.period() + mid).round();
        idx.clamp(0.0, (n - 1) as f64) as usize
    }

    /// Slits whose amplitude exponent at `x` is within [`EXPONENT_CUTOFF`]
    /// of the nearest slit's. Modes outside contribute below `e^-46`
    /// relative to the leading term and are treated as exact zeros.
    pub fn active_range(&self, x: f64) -> Range<usize> {
        let n = self.model.n_slits();
        let d = self.model.period();
        let mid = (n as f64 - 1.0) / 2.0;
        let near = self.nearest_slit(x);
        let x_near = self.model.centers()[near];
        let reach = ((x - x_near).powi(2) + self.reach_sq).sqrt();
        let lo = ((x - reach) / d + mid).ceil().max(0.0);
        let hi = ((x + reach) / d + mid).floor().min((n - 1) as f64);
        let lo = (lo as usize).min(near);
        let hi = (hi as usize).max(near);
        lo..hi + 1
    }

    /// Fills `amps` with the amplitudes of the active slits at `x` and returns
    /// their index range. Amplitudes are generated outward from the nearest
    /// slit by the exact multiplicative recurrence between neighbours.
    pub fn fill_amplitudes(&self, x: f64, amps: &mut Vec<Complex64>) -> Range<usize> {
        let range = self.active_range(x);
        let near = self.nearest_slit(x);
        let d = self.model.period();
        let x0 = x - self.model.centers()[near];
        amps.clear();
        amps.resize(range.len(), Complex64::new(0.0, 0.0));
        let a0 = self.prefactor * (-self.coef * (x0 * x0)).exp();
        let base = near - range.start;
        amps[base] = a0;
        // upward: X_{i+1} = X_i - d, ratio_i = exp(-coef (d² - 2 X_i d))
        let mut ratio = (-self.coef * (d * d - 2.0 * x0 * d)).exp();
        let mut a = a0;
        for slot in amps.iter_mut().skip(base + 1) {
            a *= ratio;
            *slot = a;
            ratio *= self.ratio_step;
        }
        // downward: X_{i-1} = X_i + d, ratio_i = exp(-coef (d² + 2 X_i d))
        let mut ratio = (-self.coef * (d * d + 2.0 * x0 * d)).exp();
        let mut a = a0;
        for slot in amps[..base].iter_mut().rev() {
            a *= ratio;
            *slot = a;
            ratio *= self.ratio_step;
        }
        range
    }

    /// Coherent sums `Σ φ_n` and `Σ ∂φ_n/∂x` over the active slits (no `1/√N`).
    pub fn coherent_sums(&self, x: f64, amps: &mut Vec<Complex64>) -> (Complex64, Complex64) {
        let range = self.fill_amplitudes(x, amps);
        let centers = &self.model.centers()[range];
        let mut psi = Complex64::new(0.0, 0.0);
        let mut weighted = Complex64::new(0.0, 0.0);
        for (a, &c) in amps.iter().zip(centers) {
            psi += *a;
            weighted += *a * (x - c);
        }
        (psi, self.gradient_coef() * weighted)
    }
}

/// `φ_n(x, z)` for zero-based slit index `n`.
pub fn mode_amplitude(model: &Model, n: usize, x: f64, z: f64) -> Complex64 {
    ModeSlice::new(model, z).amplitude(n, x)
}

/// `∂φ_n/∂x (x, z)` for zero-based slit index `n`.
pub fn mode_gradient(model: &Model, n: usize, x: f64, z: f64) -> Complex64 {
    ModeSlice::new(model, z).mode(n, x).gradient
}

pub fn mode_value(model: &Model, n: usize, x: f64, z: f64) -> ModeValue {
    ModeSlice::new(model, z).mode(n, x)
}

/// Total transmitted wave `ψ(x, z) = N^(-1/2) Σ_n φ_n(x, z)`.
pub fn coherent_wave(model: &Model, x: f64, z: f64) -> Complex64 {
    let slice = ModeSlice::new(model, z);
    let mut amps = Vec::new();
    let (psi, _) = slice.coherent_sums(x, &mut amps);
    psi / (model.n_slits() as f64).sqrt()
}

/// `ψ` and `∂ψ/∂x` together.
pub fn coherent_wave_with_gradient(model: &Model, x: f64, z: f64) -> (Complex64, Complex64) {
    let slice = ModeSlice::new(model, z);
    let mut amps = Vec::new();
    let (psi, grad) = slice.coherent_sums(x, &mut amps);
    let norm = (model.n_slits() as f64).sqrt();
    (psi / norm, grad / norm)
}

/// `ρ = |ψ|²`.
pub fn coherent_density(model: &Model, x: f64, z: f64) -> f64 {
    coherent_wave(model, x, z).norm_sqr()
}

/// The intensity written as an explicit double sum of cosines,
///
/// ```text
/// ρ = (1/N) (2πσ_z²)^(-1/2) Σ_{n,n'} cos φ_nn' · e^{-β_nn'}
/// β_nn'  = [(x-x_n)² + (x-x_n')²] / 4σ_z²
/// φ_nn'  = z / (8kσ0²σ_z²) · [(x-x_n)² - (x-x_n')²]
/// ```
///
/// No terms are skipped. Used only to cross-check the complex-product path.
pub fn cosine_density_form(model: &Model, x: f64, z: f64) -> f64 {
    let sigma0 = model.sigma0();
    let k = model.k();
    let sz = model.beam_width(z);
    let sz2 = sz * sz;
    let phase_coef = z / (8.0 * k * sigma0 * sigma0 * sz2);
    let centers = model.centers();
    let mut sum = 0.0;
    for &xn in centers {
        let a = (x - xn).powi(2);
        for &xm in centers {
            let b = (x - xm).powi(2);
            let beta = (a + b) / (4.0 * sz2);
            sum += (phase_coef * (a - b)).cos() * (-beta).exp();
        }
    }
    sum / (model.n_slits() as f64 * (2.0 * PI * sz2).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BeamParams;
    use crate::model::GratingSpec;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn peak_of_initial_gaussian() {
        let m = Model::reference();
        let s0 = m.sigma0();
        let peak = (1.0 / (2.0 * PI * s0 * s0)).powf(0.25);
        for n in [0, 17, 49] {
            let a = mode_amplitude(&m, n, m.centers()[n], 0.0);
            assert!(rel(a.re, peak) < 1e-14);
            assert_eq!(a.im, 0.0);
        }
    }

    #[test]
    fn gradient_examples() {
        let m = Model::reference();
        let zt = m.talbot_distance();
        let xn = m.centers()[10];
        for z in [0.0, 0.3 * zt, 7.0 * zt] {
            assert_eq!(mode_gradient(&m, 10, xn, z), Complex64::new(0.0, 0.0));
        }
        let s0 = m.sigma0();
        let g = mode_gradient(&m, 10, xn + s0, 0.0);
        let a = mode_amplitude(&m, 10, xn + s0, 0.0);
        let expected = -a / (2.0 * s0);
        assert!((g - expected).norm() / expected.norm() < 1e-14);
    }

    #[test]
    fn gradient_matches_central_difference() {
        let m = Model::reference();
        let zt = m.talbot_distance();
        for &z in &[0.0, 0.1 * zt, zt, 20.0 * zt] {
            let sz = m.beam_width(z);
            // resolve the quadratic phase, not just the envelope
            let h = 1e-4 * sz / (1.0 + z / m.spreading_length());
            for &off in &[-2.3, -0.7, 0.4, 1.9] {
                let x = m.centers()[3] + off * sz;
                let fd = (mode_amplitude(&m, 3, x + h, z) - mode_amplitude(&m, 3, x - h, z)) / (2.0 * h);
                let g = mode_gradient(&m, 3, x, z);
                assert!((fd - g).norm() / g.norm() < 1e-6, "z={z} off={off}");
            }
        }
    }

    #[test]
    fn single_mode_is_normalized() {
        let m = Model::reference();
        let zt = m.talbot_distance();
        for &z in &[0.0, zt, 50.0 * zt] {
            let sz = m.beam_width(z);
            let xn = m.centers()[0];
            let n = 4001;
            let h = 20.0 * sz / (n - 1) as f64;
            let total: f64 =
                (0..n).map(|i| mode_amplitude(&m, 0, xn - 10.0 * sz + i as f64 * h, z).norm_sqr()).sum::<f64>() * h;
            assert!((total - 1.0).abs() < 1e-10, "z={z} total={total}");
        }
    }

    #[test]
    fn recurrence_matches_direct_evaluation() {
        let m = Model::reference();
        let zt = m.talbot_distance();
        let mut amps = Vec::new();
        for &z in &[0.0, 0.37 * zt, zt, 3.0 * zt, 50.0 * zt] {
            let slice = ModeSlice::new(&m, z);
            for &x in &[-11e-6, -3.1e-6, 0.0, 0.05e-6, 4.44e-6, 9.8e-6, 30e-6] {
                let range = slice.fill_amplitudes(x, &mut amps);
                let lead = amps.iter().map(|a| a.norm()).fold(0.0, f64::max);
                for (a, n) in amps.iter().zip(range) {
                    let direct = slice.amplitude(n, x);
                    assert!((a - direct).norm() <= 1e-13 * lead.max(direct.norm()), "z={z} x={x} n={n}");
                }
            }
        }
    }

    #[test]
    fn single_slit_wave_is_the_mode() {
        let beam = BeamParams::new(16e-12).unwrap();
        let m = Model::new(beam, GratingSpec::with_default_sigma(0.4e-6, 0.2e-6, 1).unwrap());
        for &(x, z) in &[(0.0, 0.0), (0.1e-6, 0.01), (-2e-6, 0.3)] {
            let a = coherent_wave(&m, x, z);
            let b = mode_amplitude(&m, 0, x, z);
            assert!((a - b).norm() <= 1e-14 * b.norm());
        }
    }

    #[test]
    fn separated_slits_at_the_grating() {
        let m = Model::reference();
        let s0 = m.sigma0();
        let expected = (1.0 / (2.0 * PI * s0 * s0)).sqrt() / 50.0;
        for &xn in m.centers() {
            assert!(rel(coherent_density(&m, xn, 0.0), expected) < 1e-3);
        }
    }

    #[test]
    fn cosine_form_single_slit() {
        let beam = BeamParams::new(16e-12).unwrap();
        let m = Model::new(beam, GratingSpec::with_default_sigma(0.4e-6, 0.2e-6, 1).unwrap());
        for &(x, z) in &[(0.0, 0.0), (0.07e-6, 0.01), (-1.3e-6, 0.2)] {
            let sz = m.beam_width(z);
            let expected = (-(x * x) / (2.0 * sz * sz)).exp() / (2.0 * PI * sz * sz).sqrt();
            assert!(rel(cosine_density_form(&m, x, z), expected) < 1e-13);
        }
    }

    #[test]
    fn cosine_form_at_grating_is_gaussian_pairs() {
        let m = Model::reference().with_slits(4).unwrap();
        let s0 = m.sigma0();
        let x = 0.13e-6;
        let mut sum = 0.0;
        for &a in m.centers() {
            for &b in m.centers() {
                sum += (-((x - a).powi(2) + (x - b).powi(2)) / (4.0 * s0 * s0)).exp();
            }
        }
        let expected = sum / (4.0 * (2.0 * PI * s0 * s0).sqrt());
        assert!(rel(cosine_density_form(&m, x, 0.0), expected) < 1e-14);
    }

    #[test]
    fn active_range_contains_nearest_and_is_clamped() {
        let m = Model::reference();
        let s = ModeSlice::new(&m, 0.0);
        let r = s.active_range(0.0);
        assert!(r.contains(&24) && r.contains(&25));
        assert!(r.len() <= 6);
        let r = s.active_range(1.0);
        assert_eq!(r, 49..50);
        let far = ModeSlice::new(&m, 1.0);
        assert_eq!(far.active_range(0.0), 0..50);
    }
}

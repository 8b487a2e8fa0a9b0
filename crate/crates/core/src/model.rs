//! Physical parameters of the beam, the grating and the decoherence model,
//! together with the closed-form scales derived from them.
//!
//! Everything is stored in SI units (lengths in metres, the localization
//! strength in m⁻³). Conversions from the laboratory units used on the
//! command line live in [`units`].

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{domain, Result};

pub mod units {
    //! Multipliers from display units to SI.

    pub const PM: f64 = 1e-12;
    pub const NM: f64 = 1e-9;
    pub const UM: f64 = 1e-6;
    pub const MM: f64 = 1e-3;
    pub const CM: f64 = 1e-2;
    pub const M: f64 = 1.0;

    /// 1 mm⁻¹·µm⁻² expressed in m⁻³.
    pub const PER_MM_PER_UM2: f64 = 1e15;
}

/// Longitudinal wavenumber `2π/λ`.
pub fn derive_wavenumber(lambda_db: f64) -> Result<f64> {
    if !(lambda_db > 0.0) || !lambda_db.is_finite() {
        return domain(format!("wavelength must be positive and finite, got {lambda_db:e}"));
    }
    Ok(2.0 * PI / lambda_db)
}

/// Talbot self-imaging distance `2d²/λ`.
pub fn talbot_distance(period: f64, lambda_db: f64) -> Result<f64> {
    if !(period > 0.0) || !period.is_finite() {
        return domain(format!("grating period must be positive, got {period:e}"));
    }
    if !(lambda_db > 0.0) || !lambda_db.is_finite() {
        return domain(format!("wavelength must be positive, got {lambda_db:e}"));
    }
    Ok(2.0 * period * period / lambda_db)
}

/// Real width of a freely spreading Gaussian, `σ0·sqrt(1 + (z/2kσ0²)²)`.
pub fn beam_width(sigma0: f64, k: f64, z: f64) -> f64 {
    let tau = z / (2.0 * k * sigma0 * sigma0);
    sigma0 * tau.hypot(1.0)
}

/// Complex width `σ0(1 + iz/2kσ0²)`; its modulus is [`beam_width`].
pub fn complex_width(sigma0: f64, k: f64, z: f64) -> Complex64 {
    let tau = z / (2.0 * k * sigma0 * sigma0);
    Complex64::new(sigma0, sigma0 * tau)
}

/// Inter-slit coherence range `1/sqrt(Λz)`.
///
/// Returns `f64::INFINITY` when `Λz == 0`: without damping the coherence
/// range is unbounded.
pub fn coherence_range(lambda: f64, z: f64) -> f64 {
    let lz = lambda * z;
    if lz <= 0.0 {
        f64::INFINITY
    } else {
        1.0 / lz.sqrt()
    }
}

/// Incident beam, parameterized by its de Broglie wavelength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamParams {
    lambda_db: f64,
    k: f64,
}

impl BeamParams {
    pub fn new(lambda_db: f64) -> Result<Self> {
        let k = derive_wavenumber(lambda_db)?;
        Ok(Self { lambda_db, k })
    }

    pub fn lambda_db(&self) -> f64 {
        self.lambda_db
    }

    /// Longitudinal wavenumber, always `2π/λ`.
    pub fn k(&self) -> f64 {
        self.k
    }
}

/// Overlap `exp(-d²/8σ0²)` between neighbouring initial modes above which a
/// grating is flagged.
pub const OVERLAP_WARNING_THRESHOLD: f64 = 1e-3;

/// A finite periodic array of Gaussian slits centred on `x = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct GratingSpec {
    period: f64,
    slit_width: f64,
    sigma0: f64,
    centers: Vec<f64>,
    overlap_warning: bool,
}

impl GratingSpec {
    /// Builds a grating with an explicit Gaussian width `sigma0`.
    pub fn new(period: f64, slit_width: f64, n_slits: usize, sigma0: f64) -> Result<Self> {
        if !(period > 0.0) || !period.is_finite() {
            return domain(format!("grating period must be positive, got {period:e}"));
        }
        if !(slit_width > 0.0) || slit_width >= period {
            return domain(format!("slit width must satisfy 0 < w < d, got w = {slit_width:e}, d = {period:e}"));
        }
        if n_slits == 0 {
            return domain("a grating needs at least one slit");
        }
        if !(sigma0 > 0.0) || !sigma0.is_finite() {
            return domain(format!("sigma0 must be positive, got {sigma0:e}"));
        }
        let mid = (n_slits as f64 - 1.0) / 2.0;
        let centers = (0..n_slits).map(|i| (i as f64 - mid) * period).collect();
        let overlap = (-period * period / (8.0 * sigma0 * sigma0)).exp();
        Ok(Self { period, slit_width, sigma0, centers, overlap_warning: overlap >= OVERLAP_WARNING_THRESHOLD })
    }

    /// Builds a grating with the default Gaussian width `σ0 = w/4`.
    pub fn with_default_sigma(period: f64, slit_width: f64, n_slits: usize) -> Result<Self> {
        Self::new(period, slit_width, n_slits, slit_width / 4.0)
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn slit_width(&self) -> f64 {
        self.slit_width
    }

    pub fn n_slits(&self) -> usize {
        self.centers.len()
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    /// Slit centres, ordered from the most negative. Index `i` here is slit
    /// `n = i + 1` in one-based numbering.
    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    /// Overlap between neighbouring initial Gaussians, `exp(-d²/8σ0²)`.
    pub fn adjacent_overlap(&self) -> f64 {
        (-self.period * self.period / (8.0 * self.sigma0 * self.sigma0)).exp()
    }

    /// True when neighbouring modes overlap by more than [`OVERLAP_WARNING_THRESHOLD`].
    pub fn overlap_warning(&self) -> bool {
        self.overlap_warning
    }

    /// Total geometric extent `N·d`.
    pub fn extent(&self) -> f64 {
        self.period * self.n_slits() as f64
    }
}

/// Strength of the inter-slit localization, stored in m⁻³.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DecoherenceParams {
    lambda: f64,
}

impl DecoherenceParams {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return domain(format!("localization strength must be >= 0, got {lambda:e}"));
        }
        Ok(Self { lambda })
    }

    pub fn coherent() -> Self {
        Self { lambda: 0.0 }
    }

    /// From a value in mm⁻¹·µm⁻².
    pub fn from_display(value: f64) -> Result<Self> {
        Self::new(value * units::PER_MM_PER_UM2)
    }

    /// Strength in m⁻³.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Strength in mm⁻¹·µm⁻².
    pub fn display(&self) -> f64 {
        self.lambda / units::PER_MM_PER_UM2
    }
}

/// Uniform closed-interval sampling of the `(x, z)` plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub nx: usize,
    pub nz: usize,
}

impl SimulationGrid {
    pub fn new(x_min: f64, x_max: f64, z_min: f64, z_max: f64, nx: usize, nz: usize) -> Result<Self> {
        if !(x_min < x_max) || !x_min.is_finite() || !x_max.is_finite() {
            return domain(format!("need x_min < x_max, got [{x_min:e}, {x_max:e}]"));
        }
        if !(0.0 <= z_min && z_min < z_max) || !z_max.is_finite() {
            return domain(format!("need 0 <= z_min < z_max, got [{z_min:e}, {z_max:e}]"));
        }
        if nx < 2 || nz < 2 {
            return domain(format!("need nx, nz >= 2, got {nx} x {nz}"));
        }
        Ok(Self { x_min, x_max, z_min, z_max, nx, nz })
    }

    pub fn x(&self, i: usize) -> f64 {
        lattice(self.x_min, self.x_max, self.nx, i)
    }

    pub fn z(&self, j: usize) -> f64 {
        lattice(self.z_min, self.z_max, self.nz, j)
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    pub fn zs(&self) -> Vec<f64> {
        (0..self.nz).map(|j| self.z(j)).collect()
    }
}

/// Point `i` of `n` on `[a, b]`, hitting both endpoints exactly.
pub fn lattice(a: f64, b: f64, n: usize, i: usize) -> f64 {
    if i + 1 == n {
        b
    } else {
        a + (b - a) * (i as f64) / ((n - 1) as f64)
    }
}

/// Beam and grating together: everything needed to evaluate the coherent field.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    beam: BeamParams,
    grating: GratingSpec,
}

impl Model {
    pub fn new(beam: BeamParams, grating: GratingSpec) -> Self {
        Self { beam, grating }
    }

    /// Sodium at 16 pm on a 0.4 µm grating with 0.2 µm slits, 50 slits, σ0 = w/4.
    pub fn reference() -> Self {
        let beam = BeamParams::new(16.0 * units::PM).expect("valid wavelength");
        let grating = GratingSpec::with_default_sigma(0.4 * units::UM, 0.2 * units::UM, 50).expect("valid grating");
        Self { beam, grating }
    }

    /// Same beam and slit geometry with a different slit count.
    pub fn with_slits(&self, n_slits: usize) -> Result<Self> {
        let g = &self.grating;
        Ok(Self { beam: self.beam, grating: GratingSpec::new(g.period(), g.slit_width(), n_slits, g.sigma0())? })
    }

    pub fn beam(&self) -> &BeamParams {
        &self.beam
    }

    pub fn grating(&self) -> &GratingSpec {
        &self.grating
    }

    pub fn k(&self) -> f64 {
        self.beam.k()
    }

    pub fn lambda_db(&self) -> f64 {
        self.beam.lambda_db()
    }

    pub fn period(&self) -> f64 {
        self.grating.period()
    }

    pub fn sigma0(&self) -> f64 {
        self.grating.sigma0()
    }

    pub fn n_slits(&self) -> usize {
        self.grating.n_slits()
    }

    pub fn centers(&self) -> &[f64] {
        self.grating.centers()
    }

    pub fn talbot_distance(&self) -> f64 {
        2.0 * self.period() * self.period() / self.lambda_db()
    }

    /// Transverse grating wavenumber `2π/d`.
    pub fn k0(&self) -> f64 {
        2.0 * PI / self.period()
    }

    /// Spreading length `2kσ0²`: the distance at which a single mode has
    /// widened by a factor √2.
    pub fn spreading_length(&self) -> f64 {
        2.0 * self.k() * self.sigma0() * self.sigma0()
    }

    pub fn beam_width(&self, z: f64) -> f64 {
        beam_width(self.sigma0(), self.k(), z)
    }

    pub fn complex_width(&self, z: f64) -> Complex64 {
        complex_width(self.sigma0(), self.k(), z)
    }

    /// Far-field position `ℓλz/d` of diffraction order `ℓ`.
    pub fn order_position(&self, order: i32, z: f64) -> f64 {
        order as f64 * self.lambda_db() * z / self.period()
    }
}

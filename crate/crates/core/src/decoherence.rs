//! Inter-slit decoherence and the fields derived from the damped pair sums.
//!
//! Coherence between slits `n` and `n'` is weighted by
//! `D_nn'(z) = exp[-Λ z (x_n - x_n')²]`, applied identically to the
//! interference terms of the density and of the probability current:
//!
//! ```text
//! ρ(x, z) = (1/N)  Σ_{n,n'} Re[φ_n φ_n'*] D_nn'
//! J(x, z) = (1/Nk) Σ_{n,n'} Im[φ_n'* ∂_x φ_n] D_nn'
//! ```
//!
//! Diagonal terms are never damped. For a uniform grating `D` depends only
//! on the slit offset `m = n - n'`, so the double sum is evaluated offset by
//! offset and truncated once `D_m < 1e-16`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::model::{Model, SimulationGrid};
use crate::wavefield::ModeSlice;

/// Offsets whose damping factor falls below this are dropped.
pub const DAMPING_CUTOFF: f64 = 1e-16;

/// Velocities are reported only where `ρ >= DENSITY_FLOOR · ρ_ref`.
pub const DENSITY_FLOOR: f64 = 1e-12;

/// `D_nn'(z)` for zero-based slit indices.
pub fn damping_factor(model: &Model, n: usize, n2: usize, z: f64, lambda: f64) -> f64 {
    if n == n2 {
        return 1.0;
    }
    let dx = model.centers()[n] - model.centers()[n2];
    (-lambda * z * dx * dx).exp()
}

/// Damping factors `D_m` for offsets `m = 0, 1, ...` until they drop below
/// [`DAMPING_CUTOFF`] (or the grating runs out of offsets).
pub fn offset_damping(model: &Model, z: f64, lambda: f64) -> Vec<f64> {
    let n = model.n_slits();
    let d = model.period();
    let mut out = vec![1.0];
    for m in 1..n {
        let dm = (-lambda * z * (m as f64 * d).powi(2)).exp();
        if dm < DAMPING_CUTOFF {
            break;
        }
        out.push(dm);
    }
    out
}

/// Density, current and the derived transverse drift at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub rho: f64,
    pub current: f64,
    /// `dx/dz`; NaN when `valid` is false.
    pub v_eff: f64,
    /// `k·v_eff / k0`; NaN when `valid` is false.
    pub kx_over_k0: f64,
    pub valid: bool,
}

impl FieldSample {
    fn from_parts(model: &Model, rho: f64, current: f64, floor: f64) -> Self {
        let rho = rho.max(0.0);
        let valid = rho > 0.0 && rho >= floor;
        let (v_eff, kx_over_k0) = if valid {
            let v = current / rho;
            (v, model.k() * v / model.k0())
        } else {
            (f64::NAN, f64::NAN)
        };
        Self { rho, current, v_eff, kx_over_k0, valid }
    }

    pub fn channel(&self, channel: Channel) -> f64 {
        match channel {
            Channel::Density => self.rho,
            Channel::Current => self.current,
            Channel::DriftVelocity => self.v_eff,
            Channel::KxOverK0 => self.kx_over_k0,
        }
    }
}

/// Scalar views of a [`FieldSample`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Density,
    Current,
    DriftVelocity,
    KxOverK0,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::Density, Channel::Current, Channel::DriftVelocity, Channel::KxOverK0];

    pub fn name(&self) -> &'static str {
        match self {
            Channel::Density => "density",
            Channel::Current => "current",
            Channel::DriftVelocity => "v_eff",
            Channel::KxOverK0 => "kx_over_k0",
        }
    }

    pub fn unit(&self) -> &'static str {
        match self {
            Channel::Density => "1/m",
            Channel::Current => "1/m",
            Channel::DriftVelocity | Channel::KxOverK0 => "1",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

/// Pair-sum evaluator for one propagation distance and one `Λ`.
///
/// Holds the z-dependent mode data and the offset damping table; evaluating
/// a point costs `O(M · m_max)` for `M` active slits, or `O(M)` when `Λz = 0`.
#[derive(Debug, Clone)]
pub struct SliceEvaluator<'a> {
    slice: ModeSlice<'a>,
    damping: Vec<f64>,
    coherent: bool,
}

impl<'a> SliceEvaluator<'a> {
    pub fn new(model: &'a Model, z: f64, lambda: f64) -> Self {
        Self::with_damping(model, z, offset_damping(model, z, lambda), lambda * z == 0.0)
    }

    /// Forces all off-diagonal damping factors to zero (the incoherent limit).
    pub fn diagonal_only(model: &'a Model, z: f64) -> Self {
        Self::with_damping(model, z, vec![1.0], false)
    }

    fn with_damping(model: &'a Model, z: f64, damping: Vec<f64>, coherent: bool) -> Self {
        Self { slice: ModeSlice::new(model, z), damping, coherent }
    }

    pub fn slice(&self) -> &ModeSlice<'a> {
        &self.slice
    }

    /// Largest slit offset still carrying coherence.
    pub fn max_offset(&self) -> usize {
        self.damping.len() - 1
    }

    /// Reference density for the validity floor at this `z`: the peak of one
    /// normalized mode divided by `N`.
    pub fn reference_density(&self) -> f64 {
        let sz = self.slice.sigma_z();
        1.0 / ((2.0 * PI * sz * sz).sqrt() * self.slice.model().n_slits() as f64)
    }

    /// `(ρ, J)` at `x`. `amps` is scratch space.
    pub fn density_current(&self, x: f64, amps: &mut Vec<Complex64>) -> (f64, f64) {
        let model = self.slice.model();
        let n = model.n_slits() as f64;
        let k = model.k();
        if self.coherent {
            let (psi, grad) = self.slice.coherent_sums(x, amps);
            return (psi.norm_sqr() / n, (psi.conj() * grad).im / (n * k));
        }
        let range = self.slice.fill_amplitudes(x, amps);
        let centers = &model.centers()[range];
        let gcoef = self.slice.gradient_coef();
        let len = amps.len();

        let mut rho = 0.0;
        let mut cur = 0.0;
        // m = 0: |φ_n|² and Im[φ_n* ∂φ_n]
        for (a, &c) in amps.iter().zip(centers) {
            rho += a.norm_sqr();
            cur += (a.norm_sqr() * gcoef * (x - c)).im;
        }
        for (m, &dm) in self.damping.iter().enumerate().skip(1) {
            if m >= len {
                break;
            }
            let mut pr = 0.0;
            let mut pc = 0.0;
            for i in 0..len - m {
                let (a, b) = (amps[i], amps[i + m]);
                let ga = gcoef * (x - centers[i]) * a;
                let gb = gcoef * (x - centers[i + m]) * b;
                pr += (a * b.conj()).re;
                pc += (b.conj() * ga).im + (a.conj() * gb).im;
            }
            rho += 2.0 * dm * pr;
            cur += dm * pc;
        }
        (rho / n, cur / (n * k))
    }

    /// Full sample with the validity floor `DENSITY_FLOOR · floor_ref`.
    pub fn sample(&self, x: f64, floor_ref: f64, amps: &mut Vec<Complex64>) -> FieldSample {
        let (rho, cur) = self.density_current(x, amps);
        FieldSample::from_parts(self.slice.model(), rho, cur, DENSITY_FLOOR * floor_ref)
    }

    /// Drift `J/ρ`, or `None` below the density floor.
    pub fn velocity(&self, x: f64, amps: &mut Vec<Complex64>) -> Option<f64> {
        let (rho, cur) = self.density_current(x, amps);
        if rho > 0.0 && rho >= DENSITY_FLOOR * self.reference_density() {
            Some(cur / rho)
        } else {
            None
        }
    }
}

/// Decohered density `ρ(x, z)`.
pub fn density(model: &Model, x: f64, z: f64, lambda: f64) -> f64 {
    SliceEvaluator::new(model, z, lambda).density_current(x, &mut Vec::new()).0
}

/// Probability current `J(x, z)` (flux per unit z).
pub fn current(model: &Model, x: f64, z: f64, lambda: f64) -> f64 {
    SliceEvaluator::new(model, z, lambda).density_current(x, &mut Vec::new()).1
}

/// Point sample using the single-mode reference density for the floor.
pub fn sample(model: &Model, x: f64, z: f64, lambda: f64) -> FieldSample {
    let ev = SliceEvaluator::new(model, z, lambda);
    let floor_ref = ev.reference_density();
    ev.sample(x, floor_ref, &mut Vec::new())
}

/// `v_eff = J/ρ`, or `None` in sub-floor (nodal) regions.
pub fn drift_velocity(model: &Model, x: f64, z: f64, lambda: f64) -> Option<f64> {
    let s = sample(model, x, z, lambda);
    s.valid.then_some(s.v_eff)
}

/// Local transverse wavenumber in units of the grating wavenumber, `k v_eff / k0`.
pub fn transverse_momentum(model: &Model, x: f64, z: f64, lambda: f64) -> Option<f64> {
    let s = sample(model, x, z, lambda);
    s.valid.then_some(s.kx_over_k0)
}

/// Incoherent sum `(1/N) Σ |φ_n|²`: every off-diagonal factor set to zero.
pub fn incoherent_density(model: &Model, x: f64, z: f64) -> f64 {
    SliceEvaluator::diagonal_only(model, z).density_current(x, &mut Vec::new()).0
}

/// Reference double sum over all `N²` pairs with direct exponentials and no
/// truncation. Returns `(ρ, J)`.
pub fn naive_pair_sums(model: &Model, x: f64, z: f64, lambda: f64) -> (f64, f64) {
    let slice = ModeSlice::new(model, z);
    let modes: Vec<_> = (0..model.n_slits()).map(|n| slice.mode(n, x)).collect();
    let mut rho = 0.0;
    let mut cur = 0.0;
    for (n, a) in modes.iter().enumerate() {
        for (n2, b) in modes.iter().enumerate() {
            let dnn = damping_factor(model, n, n2, z, lambda);
            rho += (a.amplitude * b.amplitude.conj()).re * dnn;
            cur += (b.amplitude.conj() * a.gradient).im * dnn;
        }
    }
    let n = model.n_slits() as f64;
    (rho / n, cur / (n * model.k()))
}

/// The loss term `∂ρ/∂z + ∂J/∂x = -(1/N) Σ Λ(x_n - x_n')² D_nn' Re[φ_n φ_n'*]`
/// produced by the damping. Zero when `Λ = 0`.
pub fn damping_sink(model: &Model, x: f64, z: f64, lambda: f64) -> f64 {
    let slice = ModeSlice::new(model, z);
    let amps: Vec<_> = (0..model.n_slits()).map(|n| slice.amplitude(n, x)).collect();
    let centers = model.centers();
    let mut s = 0.0;
    for (n, a) in amps.iter().enumerate() {
        for (n2, b) in amps.iter().enumerate() {
            let sep2 = (centers[n] - centers[n2]).powi(2);
            s += lambda * sep2 * damping_factor(model, n, n2, z, lambda) * (a * b.conj()).re;
        }
    }
    -s / model.n_slits() as f64
}

/// Samples on a simulation grid; row `j` holds `z_j`, column `i` holds `x_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub grid: SimulationGrid,
    pub samples: Vec<FieldSample>,
}

impl FieldGrid {
    pub fn at(&self, i: usize, j: usize) -> &FieldSample {
        &self.samples[j * self.grid.nx + i]
    }

    pub fn row(&self, j: usize) -> &[FieldSample] {
        let nx = self.grid.nx;
        &self.samples[j * nx..(j + 1) * nx]
    }

    /// One scalar channel, row-major (`nz × nx`); invalid velocities are NaN.
    pub fn channel(&self, channel: Channel) -> Vec<f64> {
        self.samples.iter().map(|s| s.channel(channel)).collect()
    }

    pub fn invalid_count(&self) -> usize {
        self.samples.iter().filter(|s| !s.valid).count()
    }
}

/// Evaluates every grid point. The validity floor on each z-row is
/// `DENSITY_FLOOR · max ρ` over that row.
pub fn evaluate_grid(grid: &SimulationGrid, model: &Model, lambda: f64) -> FieldGrid {
    let xs = grid.xs();
    let rows: Vec<Vec<FieldSample>> = (0..grid.nz)
        .into_par_iter()
        .map_init(Vec::new, |amps, j| {
            let ev = SliceEvaluator::new(model, grid.z(j), lambda);
            let raw: Vec<(f64, f64)> = xs.iter().map(|&x| ev.density_current(x, amps)).collect();
            let max = raw.iter().map(|r| r.0).fold(0.0, f64::max);
            raw.into_iter().map(|(rho, cur)| FieldSample::from_parts(model, rho, cur, DENSITY_FLOOR * max)).collect()
        })
        .collect();
    FieldGrid { grid: *grid, samples: rows.into_iter().flatten().collect() }
}

/// Same grid through [`naive_pair_sums`]; the reference for [`evaluate_grid`].
pub fn evaluate_grid_naive(grid: &SimulationGrid, model: &Model, lambda: f64) -> FieldGrid {
    let xs = grid.xs();
    let rows: Vec<Vec<FieldSample>> = (0..grid.nz)
        .into_par_iter()
        .map(|j| {
            let z = grid.z(j);
            let raw: Vec<(f64, f64)> = xs.iter().map(|&x| naive_pair_sums(model, x, z, lambda)).collect();
            let max = raw.iter().map(|r| r.0).fold(0.0, f64::max);
            raw.into_iter().map(|(rho, cur)| FieldSample::from_parts(model, rho, cur, DENSITY_FLOOR * max)).collect()
        })
        .collect();
    FieldGrid { grid: *grid, samples: rows.into_iter().flatten().collect() }
}

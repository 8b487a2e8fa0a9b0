//! Independent checks of the closed-form coherent field: an exact spectral
//! propagator on a periodic lattice and direct Huygens–Fresnel quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{domain, Error, Result};
use crate::model::Model;
use crate::stats::pearson;
use crate::wavefield::{coherent_wave, mode_amplitude};

/// Spectral power fraction above `0.9 k_max` that triggers [`Error::Aliasing`].
pub const ALIASING_THRESHOLD: f64 = 1e-10;

/// Complex field on a uniform power-of-two lattice `x_j = (j - n/2) dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub x_lattice: Vec<f64>,
    pub values: Vec<Complex64>,
    /// Length of the last propagation step (0 for a fresh field).
    pub dz: f64,
    /// Propagation distance of `values`.
    pub z: f64,
}

impl SpectralField {
    /// Lattice of `n` points (power of two) with spacing `dx`, centred on 0.
    pub fn lattice(n: usize, dx: f64) -> Result<Vec<f64>> {
        if !n.is_power_of_two() || n < 2 {
            return domain(format!("lattice size {n} is not a power of two"));
        }
        if !(dx.is_finite() && dx > 0.0) {
            return domain(format!("lattice spacing must be positive, got {dx}"));
        }
        let h = (n / 2) as f64;
        Ok((0..n).map(|j| (j as f64 - h) * dx).collect())
    }

    /// The grating field at `z = 0` on a lattice spanning the grating plus
    /// `10 σ_z(z_max)` on each side, with `dx <= σ0/4`.
    pub fn initial(model: &Model, z_max: f64) -> Result<Self> {
        if !(z_max >= 0.0 && z_max.is_finite()) {
            return domain(format!("z_max must be non-negative, got {z_max}"));
        }
        let half_span = 0.5 * model.grating().extent() + 10.0 * model.beam_width(z_max);
        let dx_max = model.sigma0() / 4.0;
        let n = ((2.0 * half_span / dx_max).ceil() as usize).next_power_of_two().max(2);
        let dx = 2.0 * half_span / n as f64;
        let x_lattice = Self::lattice(n, dx)?;
        let values = x_lattice.iter().map(|&x| coherent_wave(model, x, 0.0)).collect();
        Ok(Self { x_lattice, values, dz: 0.0, z: 0.0 })
    }

    pub fn from_values(x_lattice: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        if x_lattice.len() != values.len() || !x_lattice.len().is_power_of_two() || x_lattice.len() < 2 {
            return domain("lattice and values must share a power-of-two length");
        }
        Ok(Self { x_lattice, values, dz: 0.0, z: 0.0 })
    }

    pub fn dx(&self) -> f64 {
        self.x_lattice[1] - self.x_lattice[0]
    }

    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    /// `Σ |ψ_j|² dx`.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.dx()
    }
}

/// Angular wavenumbers in FFT order.
fn wavenumbers(n: usize, dx: f64) -> Vec<f64> {
    let dk = 2.0 * PI / (n as f64 * dx);
    (0..n).map(|j| if j < n / 2 { j as f64 } else { j as f64 - n as f64 } * dk).collect()
}

/// Propagates `initial` to `z_target` with the exact free-space factor
/// `exp(-i k_x² Δz / 2k)`.
pub fn split_step_propagate(model: &Model, initial: &SpectralField, z_target: f64) -> Result<SpectralField> {
    if !(z_target >= 0.0 && z_target.is_finite()) {
        return domain(format!("z_target must be non-negative, got {z_target}"));
    }
    let n = initial.values.len();
    let dx = initial.dx();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);

    let mut buf = initial.values.clone();
    fwd.process(&mut buf);

    let kx = wavenumbers(n, dx);
    let k_max = PI / dx;
    let total: f64 = buf.iter().map(|v| v.norm_sqr()).sum();
    let tail: f64 = buf.iter().zip(&kx).filter(|(_, k)| k.abs() > 0.9 * k_max).map(|(v, _)| v.norm_sqr()).sum();
    let tail_fraction = if total > 0.0 { tail / total } else { 0.0 };
    if tail_fraction > ALIASING_THRESHOLD {
        return Err(Error::Aliasing { tail_fraction, threshold: ALIASING_THRESHOLD, points: n, dx });
    }

    let dz = z_target - initial.z;
    let k = model.k();
    let scale = 1.0 / n as f64;
    for (v, &q) in buf.iter_mut().zip(&kx) {
        *v *= Complex64::from_polar(scale, -q * q * dz / (2.0 * k));
    }
    inv.process(&mut buf);
    Ok(SpectralField { x_lattice: initial.x_lattice.clone(), values: buf, dz, z: z_target })
}

// 15-point Kronrod nodes (non-negative half) and weights, with the embedded
// 7-point Gauss weights on the odd-indexed nodes.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

struct Panel {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15(f: &mut impl FnMut(f64) -> Complex64, a: f64, b: f64) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let s = f(c - h * XGK[j]) + f(c + h * XGK[j]);
        kron += s * WGK[j];
        if j % 2 == 1 {
            gauss += s * WG[j / 2];
        }
    }
    Panel { a, b, value: kron * h, error: ((kron - gauss) * h).norm() }
}

/// Outcome of [`adaptive_integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: Complex64,
    pub error: f64,
    pub nodes: usize,
}

/// Globally adaptive Gauss–Kronrod (7/15) integration of a complex integrand,
/// refining the worst panel until the summed error estimate is at most
/// `rel_tol · |value|`. Fails once `max_nodes` evaluations are spent.
pub fn adaptive_integrate(
    mut f: impl FnMut(f64) -> Complex64,
    a: f64,
    b: f64,
    rel_tol: f64,
    initial_panels: usize,
    max_nodes: usize,
) -> Result<Quadrature> {
    let mut nodes = 0;
    let mut heap = BinaryHeap::new();
    let panels = initial_panels.max(1);
    for i in 0..panels {
        let pa = a + (b - a) * i as f64 / panels as f64;
        let pb = a + (b - a) * (i + 1) as f64 / panels as f64;
        heap.push(gk15(&mut f, pa, pb));
        nodes += 15;
    }
    loop {
        let value: Complex64 = heap.iter().map(|p| p.value).sum();
        let error: f64 = heap.iter().map(|p| p.error).sum();
        if error <= rel_tol * value.norm() {
            return Ok(Quadrature { value, error, nodes });
        }
        if nodes + 30 > max_nodes {
            return Err(Error::Quadrature { nodes, estimate: error, target: rel_tol * value.norm() });
        }
        let worst = heap.pop().expect("at least one panel");
        let mid = 0.5 * (worst.a + worst.b);
        heap.push(gk15(&mut f, worst.a, mid));
        heap.push(gk15(&mut f, mid, worst.b));
        nodes += 30;
    }
}

/// Node budget for [`fresnel_quadrature_mode`].
pub const FRESNEL_MAX_NODES: usize = 2_000_000;

/// Mode `n` at `(x, z)` from the Huygens–Fresnel integral
/// `√(k/2πiz) ∫ φ_n(x', 0) exp[ik(x - x')²/2z] dx'` over `x_n ± 12σ0`,
/// to relative tolerance `1e-8`.
pub fn fresnel_quadrature_mode(model: &Model, n: usize, x: f64, z: f64) -> Result<Complex64> {
    fresnel_quadrature_mode_with(model, n, x, z, 1e-8, FRESNEL_MAX_NODES)
}

pub fn fresnel_quadrature_mode_with(
    model: &Model,
    n: usize,
    x: f64,
    z: f64,
    rel_tol: f64,
    max_nodes: usize,
) -> Result<Complex64> {
    if !(z > 0.0 && z.is_finite()) {
        return domain(format!("Fresnel quadrature needs z > 0, got {z}"));
    }
    if n >= model.n_slits() {
        return domain(format!("slit index {n} out of range"));
    }
    let k = model.k();
    let xn = model.centers()[n];
    let s0 = model.sigma0();
    let kernel = |xp: f64| {
        let u = x - xp;
        mode_amplitude(model, n, xp, 0.0) * Complex64::from_polar(1.0, k * u * u / (2.0 * z))
    };
    // enough starting panels to resolve the local chirp at the window edges
    let chirp = k * ((x - xn).abs() + 12.0 * s0) / z * 24.0 * s0 / (2.0 * PI);
    let panels = (chirp.ceil() as usize).clamp(8, 1 << 16);
    let q = adaptive_integrate(kernel, xn - 12.0 * s0, xn + 12.0 * s0, rel_tol, panels, max_nodes)?;
    let pref = (Complex64::new(0.0, -k / (2.0 * PI * z))).sqrt();
    Ok(pref * q.value)
}

/// Density samples on a lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityProfile {
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldMetrics {
    pub max_rel: f64,
    pub l2_rel: f64,
    pub pearson: f64,
}

/// Deviation of `candidate` from `reference`. `max_rel` only counts points
/// where the reference exceeds `1e-6` of its maximum.
pub fn compare_fields(reference: &DensityProfile, candidate: &DensityProfile) -> Result<FieldMetrics> {
    if reference.xs.len() != reference.values.len()
        || candidate.xs.len() != candidate.values.len()
        || reference.xs != candidate.xs
    {
        return domain("profiles are not on the same lattice");
    }
    let (a, b) = (&reference.values, &candidate.values);
    let peak = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut max_rel = 0.0f64;
    let (mut num, mut den) = (0.0, 0.0);
    for (&ra, &rb) in a.iter().zip(b) {
        if ra.abs() > 1e-6 * peak {
            max_rel = max_rel.max((rb - ra).abs() / ra.abs());
        }
        num += (rb - ra).powi(2);
        den += ra * ra;
    }
    Ok(FieldMetrics { max_rel, l2_rel: if den > 0.0 { (num / den).sqrt() } else { 0.0 }, pearson: pearson(a, b) })
}

/// Split-step density against the closed form on `|x| <= half_window`.
pub fn cross_validate(model: &Model, z: f64, half_window: f64) -> Result<FieldMetrics> {
    let init = SpectralField::initial(model, z)?;
    let out = split_step_propagate(model, &init, z)?;
    let (mut xs, mut numeric, mut exact) = (Vec::new(), Vec::new(), Vec::new());
    for (&x, v) in out.x_lattice.iter().zip(&out.values) {
        if x.abs() <= half_window {
            xs.push(x);
            numeric.push(v.norm_sqr());
            exact.push(coherent_wave(model, x, z).norm_sqr());
        }
    }
    compare_fields(&DensityProfile { xs: xs.clone(), values: exact }, &DensityProfile { xs, values: numeric })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavefield::coherent_density;

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn kronrod_weights_integrate_polynomials() {
        let sum: f64 = 2.0 * WGK[..7].iter().sum::<f64>() + WGK[7];
        assert!((sum - 2.0).abs() < 1e-14);
        let gsum: f64 = 2.0 * WG[..3].iter().sum::<f64>() + WG[3];
        assert!((gsum - 2.0).abs() < 1e-14);
        let p = gk15(&mut |x| Complex64::new(x.powi(10), 0.0), -1.0, 1.0);
        assert!((p.value.re - 2.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_oscillation() {
        let q = adaptive_integrate(|x| Complex64::from_polar(1.0, 50.0 * x), 0.0, 1.0, 1e-10, 1, 100_000).unwrap();
        let exact = (Complex64::from_polar(1.0, 50.0) - 1.0) / Complex64::new(0.0, 50.0);
        assert!(rel(q.value, exact) < 1e-10);
        let e = adaptive_integrate(|x| Complex64::from_polar(1.0, 1e6 * x * x), 0.0, 1.0, 1e-14, 1, 60);
        assert!(matches!(e, Err(Error::Quadrature { .. })));
    }

    #[test]
    fn zero_distance_is_identity() {
        let m = Model::reference().with_slits(4).unwrap();
        let f = SpectralField::initial(&m, 0.0).unwrap();
        let g = split_step_propagate(&m, &f, 0.0).unwrap();
        for (a, b) in f.values.iter().zip(&g.values) {
            assert!((a - b).norm() < 1e-13 * f.values.iter().map(|v| v.norm()).fold(0.0, f64::max));
        }
    }

    #[test]
    fn lattice_is_power_of_two_and_padded() {
        let m = Model::reference();
        let zt = m.talbot_distance();
        let f = SpectralField::initial(&m, zt).unwrap();
        assert!(f.x_lattice.len().is_power_of_two());
        assert!(f.dx() <= m.sigma0() / 4.0);
        let half = 0.5 * m.grating().extent() + 10.0 * m.beam_width(zt);
        assert!(-f.x_lattice[0] >= half - 1e-15);
        assert!(SpectralField::lattice(100, 1.0).is_err());
        assert!(SpectralField::from_values(vec![0.0; 3], vec![Complex64::new(0.0, 0.0); 3]).is_err());
    }

    #[test]
    fn norm_is_conserved() {
        let m = Model::reference();
        let zt = m.talbot_distance();
        let f = SpectralField::initial(&m, zt).unwrap();
        let g = split_step_propagate(&m, &f, 0.5 * zt).unwrap();
        let h = split_step_propagate(&m, &g, zt).unwrap();
        assert!((g.norm() - f.norm()).abs() / f.norm() < 1e-12);
        assert!((h.norm() - g.norm()).abs() / g.norm() < 1e-12);
        assert_eq!(h.dz, 0.5 * zt);
    }

    #[test]
    fn single_gaussian_width() {
        let m = Model::reference().with_slits(1).unwrap();
        let z = m.talbot_distance();
        let f = SpectralField::initial(&m, z).unwrap();
        let g = split_step_propagate(&m, &f, z).unwrap();
        let rho = g.density();
        let norm: f64 = rho.iter().sum();
        let var: f64 = g.x_lattice.iter().zip(&rho).map(|(x, r)| x * x * r).sum::<f64>() / norm;
        assert!((var.sqrt() - m.beam_width(z)).abs() / m.beam_width(z) < 1e-8);
    }

    #[test]
    fn aliasing_is_rejected() {
        let m = Model::reference().with_slits(1).unwrap();
        // a lattice far too coarse for σ0 = 50 nm
        let xs = SpectralField::lattice(64, 100e-9).unwrap();
        let vals = xs.iter().map(|&x| coherent_wave(&m, x, 0.0)).collect();
        let f = SpectralField::from_values(xs, vals).unwrap();
        match split_step_propagate(&m, &f, 1e-3) {
            Err(Error::Aliasing { tail_fraction, points, .. }) => {
                assert!(tail_fraction > ALIASING_THRESHOLD);
                assert_eq!(points, 64);
            }
            other => panic!("expected aliasing error, got {other:?}"),
        }
    }

    #[test]
    fn grating_matches_closed_form_at_talbot_distance() {
        let m = Model::reference();
        let zt = m.talbot_distance();
        let r = cross_validate(&m, zt, 10.0 * m.period()).unwrap();
        assert!(r.max_rel < 1e-3, "{r:?}");
        assert!(r.pearson > 0.999_999);
    }

    #[test]
    fn quadrature_matches_mode() {
        let m = Model::reference();
        let zt = m.talbot_distance();
        let n = 20;
        let xn = m.centers()[n];
        let q = fresnel_quadrature_mode(&m, n, xn, zt).unwrap();
        assert!(rel(q, mode_amplitude(&m, n, xn, zt)) < 1e-6);
        let sz = m.beam_width(0.5 * zt);
        for i in 0..21 {
            let x = xn + sz * (-4.0 + 8.0 * i as f64 / 20.0);
            let q = fresnel_quadrature_mode(&m, n, x, 0.5 * zt).unwrap();
            assert!(rel(q, mode_amplitude(&m, n, x, 0.5 * zt)) < 1e-6, "i={i}");
        }
    }

    #[test]
    fn quadrature_modulus_is_even() {
        let m = Model::reference();
        let zt = m.talbot_distance();
        let xn = m.centers()[7];
        for &d in &[0.1e-6, 0.4e-6, 1.3e-6] {
            let a = fresnel_quadrature_mode(&m, 7, xn + d, zt).unwrap().norm();
            let b = fresnel_quadrature_mode(&m, 7, xn - d, zt).unwrap().norm();
            assert!((a - b).abs() / a < 1e-8);
        }
        assert!(fresnel_quadrature_mode(&m, 7, xn, 0.0).is_err());
        assert!(fresnel_quadrature_mode(&m, 50, xn, zt).is_err());
    }

    #[test]
    fn spectral_and_quadrature_agree() {
        let m = Model::reference().with_slits(1).unwrap();
        let zt = m.talbot_distance();
        let f = SpectralField::initial(&m, zt).unwrap();
        let g = split_step_propagate(&m, &f, zt).unwrap();
        let mid = g.x_lattice.len() / 2;
        for j in [mid, mid + 7, mid + 19] {
            let q = fresnel_quadrature_mode(&m, 0, g.x_lattice[j], zt).unwrap();
            assert!(rel(g.values[j], q) < 1e-6);
        }
    }

    #[test]
    fn compare_basics() {
        let m = Model::reference().with_slits(3).unwrap();
        let xs: Vec<f64> = (0..64).map(|i| -1e-6 + i as f64 * 3e-8).collect();
        let a = DensityProfile { values: xs.iter().map(|&x| coherent_density(&m, x, 1e-3)).collect(), xs: xs.clone() };
        let r = compare_fields(&a, &a).unwrap();
        assert_eq!((r.max_rel, r.l2_rel), (0.0, 0.0));
        assert!((r.pearson - 1.0).abs() < 1e-14);
        let b = DensityProfile { xs: xs.clone(), values: a.values.iter().map(|v| 2.0 * v).collect() };
        let r = compare_fields(&a, &b).unwrap();
        assert!((r.max_rel - 1.0).abs() < 1e-14 && (r.pearson - 1.0).abs() < 1e-14);
        let c = DensityProfile { xs: xs[1..].to_vec(), values: a.values[1..].to_vec() };
        assert!(compare_fields(&a, &c).is_err());
    }
}

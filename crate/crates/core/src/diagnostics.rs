//! Reductions of the field into scalar observables: self-imaging
//! correlations, coherence crossings, far-field orders and momentum plateaus.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::decoherence::SliceEvaluator;
use crate::error::{domain, Result};
use crate::model::{coherence_range, lattice, Model};
use crate::stats::{gaussian_smooth, linear_fit, pearson};

/// Minimum lattice size for correlation windows.
pub const MIN_CORRELATION_SAMPLES: usize = 512;

fn density_profile(model: &Model, lambda: f64, z: f64, xs: impl Iterator<Item = f64>) -> Vec<f64> {
    let ev = SliceEvaluator::new(model, z, lambda);
    let mut amps = Vec::new();
    xs.map(|x| ev.density_current(x, &mut amps).0).collect()
}

fn fields_on(model: &Model, lambda: f64, z: f64, xs: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let ev = SliceEvaluator::new(model, z, lambda);
    let mut amps = Vec::new();
    xs.iter().map(|&x| ev.density_current(x, &mut amps)).unzip()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RevivalReport {
    pub z_probe: f64,
    pub window_half_width: f64,
    pub shift: f64,
    /// NaN when either profile is constant over the window.
    pub pearson: f64,
}

impl RevivalReport {
    pub fn is_defined(&self) -> bool {
        self.pearson.is_finite()
    }
}

/// Pearson correlation of `ρ(x + shift, z_probe)` with `ρ(x, 0)` over
/// `|x| <= window` on `samples` points (at least 512).
pub fn revival_correlation(
    model: &Model,
    lambda: f64,
    z_probe: f64,
    window: f64,
    shift: f64,
    samples: usize,
) -> Result<RevivalReport> {
    if !(z_probe >= 0.0 && z_probe.is_finite()) {
        return domain(format!("z_probe must be non-negative, got {z_probe}"));
    }
    if !(window > 0.0 && window.is_finite() && shift.is_finite()) {
        return domain("correlation window must be positive and finite");
    }
    let n = samples.max(MIN_CORRELATION_SAMPLES);
    let xs = (0..n).map(|i| lattice(-window, window, n, i));
    let initial = density_profile(model, 0.0, 0.0, xs.clone());
    let probe = density_profile(model, lambda, z_probe, xs.map(|x| x + shift));
    Ok(RevivalReport { z_probe, window_half_width: window, shift, pearson: pearson(&probe, &initial) })
}

/// Distance `z*` where the coherence range `1/√(Λz)` falls to the beam
/// width `σ_z`, by bisection on `[1e-6, 1e3] z_T` to `1e-3 z_T`.
/// `None` when the bracket holds no sign change.
pub fn coherence_crossing(model: &Model, lambda: f64) -> Result<Option<f64>> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return domain(format!("coherence crossing needs Λ > 0, got {lambda}"));
    }
    let zt = model.talbot_distance();
    let f = |z: f64| coherence_range(lambda, z) - model.beam_width(z);
    let (mut a, mut b) = (1e-6 * zt, 1e3 * zt);
    let (fa, fb) = (f(a), f(b));
    if fa.signum() == fb.signum() {
        return Ok(None);
    }
    while b - a > 1e-3 * zt {
        let m = 0.5 * (a + b);
        if f(m).signum() == fa.signum() {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(Some(0.5 * (a + b)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderReport {
    pub order: i32,
    pub peak_x: f64,
    pub predicted_x: f64,
    /// `|peak - predicted| / |predicted|`, or `|peak| / (λz/d)` for order 0.
    pub relative_error: f64,
    /// Peak density relative to the slice maximum.
    pub strength: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderScan {
    pub z: f64,
    pub orders: Vec<OrderReport>,
    /// Orders without a qualifying peak, with the reason.
    pub omitted: Vec<(i32, String)>,
}

/// Tuning of [`diffraction_order_positions`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderSearch {
    /// Peaks weaker than this fraction of the slice maximum are omitted.
    pub presence_floor: f64,
    /// Half-width of the search window around each prediction, in order spacings.
    pub window: f64,
    /// Lattice points per order spacing.
    pub points_per_order: usize,
}

impl Default for OrderSearch {
    fn default() -> Self {
        Self { presence_floor: 1e-3, window: 0.25, points_per_order: 400 }
    }
}

/// Local maxima of `ρ(·, z)` nearest `x_ℓ = ℓ λ z / d`, `|ℓ| <= max_order`,
/// refined by a parabola through the discrete peak and its neighbours.
pub fn diffraction_order_positions(
    model: &Model,
    lambda: f64,
    z: f64,
    max_order: u32,
    search: &OrderSearch,
) -> Result<OrderScan> {
    if z < 10.0 * model.talbot_distance() {
        return domain(format!("order detection needs the far field (z >= 10 z_T), got z = {z}"));
    }
    if max_order == 0 {
        return domain("max_order must be at least 1");
    }
    let spacing = model.order_position(1, z);
    let half = (max_order as f64 + 0.5) * spacing;
    let n = 2 * (max_order as usize * search.points_per_order + search.points_per_order / 2) + 1;
    let xs: Vec<f64> = (0..n).map(|i| lattice(-half, half, n, i)).collect();
    let rho = density_profile(model, lambda, z, xs.iter().copied());
    let max = rho.iter().copied().fold(0.0, f64::max);
    let dx = xs[1] - xs[0];

    let mut orders = Vec::new();
    let mut omitted = Vec::new();
    let m = max_order as i32;
    for l in -m..=m {
        let predicted = model.order_position(l, z);
        let lo = predicted - search.window * spacing;
        let hi = predicted + search.window * spacing;
        let best = (1..n - 1)
            .filter(|&i| xs[i] >= lo && xs[i] <= hi)
            .filter(|&i| rho[i] > rho[i - 1] && rho[i] >= rho[i + 1])
            .min_by(|&a, &b| (xs[a] - predicted).abs().total_cmp(&(xs[b] - predicted).abs()));
        let Some(i) = best else {
            omitted.push((l, "no local maximum near the predicted position".to_string()));
            continue;
        };
        if rho[i] < search.presence_floor * max {
            omitted.push((l, format!("peak density {:.3e} of slice max is below the presence floor", rho[i] / max)));
            continue;
        }
        let (a, b, c) = (rho[i - 1], rho[i], rho[i + 1]);
        let denom = a - 2.0 * b + c;
        let offset = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
        let peak_x = xs[i] + offset.clamp(-0.5, 0.5) * dx;
        let relative_error = if l == 0 { peak_x.abs() / spacing } else { (peak_x - predicted).abs() / predicted.abs() };
        orders.push(OrderReport { order: l, peak_x, predicted_x: predicted, relative_error, strength: rho[i] / max });
    }
    Ok(OrderScan { z, orders, omitted })
}

/// A run of nearly constant transverse momentum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plateau {
    pub x_start: f64,
    pub x_end: f64,
    /// Mean `k_x/k0` over the segment.
    pub level: f64,
}

/// Tuning of [`detect_momentum_plateaus`].
///
/// Density and current are smoothed with a Gaussian of width
/// `smoothing · λz/d` before forming `k_x/k0`. A point qualifies when its
/// slope is below `slope_fraction · d/(λz)` (the slope of purely ballistic
/// flow from the origin) and the raw density exceeds `density_cut` of the
/// slice maximum; qualifying runs shorter than `min_width · λz/d` are dropped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateauSearch {
    pub density_cut: f64,
    pub slope_fraction: f64,
    pub smoothing: f64,
    pub min_width: f64,
    /// Scan `|x| <= half_orders · λz/d`.
    pub half_orders: f64,
    /// Lattice points per `λz/d`.
    pub points_per_order: usize,
}

impl Default for PlateauSearch {
    fn default() -> Self {
        Self {
            density_cut: 0.1,
            slope_fraction: 0.25,
            smoothing: 1.0 / 16.0,
            min_width: 1.0 / 16.0,
            half_orders: 3.0,
            points_per_order: 800,
        }
    }
}

impl PlateauSearch {
    pub fn with_cut(mut self, density_cut: f64) -> Self {
        self.density_cut = density_cut;
        self
    }
}

pub fn detect_momentum_plateaus(model: &Model, lambda: f64, z: f64, search: &PlateauSearch) -> Result<Vec<Plateau>> {
    if !(search.density_cut > 0.0 && search.density_cut < 1.0) {
        return domain(format!("density cut must lie in (0, 1), got {}", search.density_cut));
    }
    if !(z > 0.0 && z.is_finite()) {
        return domain(format!("plateau detection needs z > 0, got {z}"));
    }
    let spacing = model.order_position(1, z);
    let n = 2 * (search.half_orders * search.points_per_order as f64).round() as usize + 1;
    let half = search.half_orders * spacing;
    let xs: Vec<f64> = (0..n).map(|i| lattice(-half, half, n, i)).collect();
    let dx = xs[1] - xs[0];
    let (rho, cur) = fields_on(model, lambda, z, &xs);
    let max = rho.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Ok(Vec::new());
    }
    let sigma_pts = search.smoothing * spacing / dx;
    let rs = gaussian_smooth(&rho, sigma_pts);
    let js = gaussian_smooth(&cur, sigma_pts);
    let scale = model.k() / model.k0();
    let kx: Vec<f64> = rs.iter().zip(&js).map(|(r, j)| if *r > 0.0 { scale * j / r } else { f64::NAN }).collect();

    let ballistic = 1.0 / spacing;
    let qualifies = |i: usize| {
        let (a, b) = if i == 0 {
            (0, 1)
        } else if i == n - 1 {
            (n - 2, n - 1)
        } else {
            (i - 1, i + 1)
        };
        let slope = (kx[b] - kx[a]) / (xs[b] - xs[a]);
        slope.abs() < search.slope_fraction * ballistic && rho[i] > search.density_cut * max
    };
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        if !qualifies(i) {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && qualifies(i) {
            i += 1;
        }
        if xs[i - 1] - xs[start] >= search.min_width * spacing {
            let level = kx[start..i].iter().sum::<f64>() / (i - start) as f64;
            out.push(Plateau { x_start: xs[start], x_end: xs[i - 1], level });
        }
    }
    Ok(out)
}

/// Largest distance of a plateau level from its nearest integer.
pub fn integer_deviation(plateaus: &[Plateau]) -> f64 {
    plateaus.iter().map(|p| (p.level - p.level.round()).abs()).fold(0.0, f64::max)
}

/// Far-field grating intensity normalized to the single-slit value at the
/// origin: `exp[-2k²σ0²(x/z)²] · [sin(πdNx/λz) / sin(πdx/λz)]²`, with the
/// principal maxima filled by their limit `N²`.
pub fn multislit_reference(x: f64, z: f64, model: &Model) -> f64 {
    let k = model.k();
    let s0 = model.sigma0();
    let n = model.n_slits() as f64;
    let envelope = (-2.0 * (k * s0 * x / z).powi(2)).exp();
    let a = PI * model.period() * x / (model.lambda_db() * z);
    // reduce to the nearest principal maximum; the squared ratio is invariant
    let r = a - (a / PI).round() * PI;
    let af = if r.abs() < 1e-9 { n * n } else { ((n * r).sin() / r.sin()).powi(2) };
    envelope * af
}

/// `(z, ρ(0, z))` for each requested distance.
pub fn onaxis_profile(model: &Model, lambda: f64, zs: &[f64]) -> Result<Vec<(f64, f64)>> {
    let mut amps: Vec<Complex64> = Vec::new();
    zs.iter()
        .map(|&z| {
            if !(z >= 0.0 && z.is_finite()) {
                return domain(format!("z must be non-negative, got {z}"));
            }
            Ok((z, SliceEvaluator::new(model, z, lambda).density_current(0.0, &mut amps).0))
        })
        .collect()
}

/// `(max - min) / (max + min)` of the density over one grating period
/// centred on `x_center`, sampled at `samples` points.
pub fn fringe_contrast(model: &Model, lambda: f64, z: f64, x_center: f64, samples: usize) -> f64 {
    let d = model.period();
    let n = samples.max(3);
    let rho = density_profile(model, lambda, z, (0..n).map(|i| lattice(x_center - 0.5 * d, x_center + 0.5 * d, n, i)));
    let max = rho.iter().copied().fold(f64::MIN, f64::max);
    let min = rho.iter().copied().fold(f64::MAX, f64::min);
    (max - min) / (max + min)
}

/// Slope of `k_x/k0` against `x` for a single Gaussian slit at distance `z`.
pub fn single_slit_momentum_slope(model: &Model, z: f64) -> f64 {
    let (k, s0) = (model.k(), model.sigma0());
    let sz = model.beam_width(z);
    z / (4.0 * k * s0 * s0 * sz * sz) / model.k0()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentumFit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS residual relative to the fitted value at the window edge.
    pub relative_residual: f64,
    pub samples: usize,
}

/// Least-squares line through the valid `k_x/k0` samples on `|x| <= half_width`.
pub fn momentum_linear_fit(model: &Model, lambda: f64, z: f64, half_width: f64, samples: usize) -> Result<MomentumFit> {
    if !(half_width > 0.0) || samples < 3 {
        return domain("fit window needs a positive half width and at least 3 samples");
    }
    let ev = SliceEvaluator::new(model, z, lambda);
    let floor = ev.reference_density();
    let mut amps = Vec::new();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for i in 0..samples {
        let x = lattice(-half_width, half_width, samples, i);
        let s = ev.sample(x, floor, &mut amps);
        if s.valid {
            xs.push(x);
            ys.push(s.kx_over_k0);
        }
    }
    if xs.len() < 3 {
        return domain("too few valid samples in the fit window");
    }
    let (slope, intercept) = linear_fit(&xs, &ys);
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    let rms = (rss / xs.len() as f64).sqrt();
    Ok(MomentumFit { slope, intercept, relative_residual: rms / (slope * half_width).abs(), samples: xs.len() })
}

/// Largest relative deviation of `ρ(·, z)` from a unit-mass Gaussian of
/// width `σ_z` (a single slit carrying the whole incoherent sum) over the
/// interval holding the central `mass` fraction of that Gaussian.
pub fn incoherent_envelope_deviation(model: &Model, lambda: f64, z: f64, mass: f64, samples: usize) -> Result<f64> {
    if !(mass > 0.0 && mass < 1.0) || samples < 2 {
        return domain("mass fraction must lie in (0, 1)");
    }
    let sz = model.beam_width(z);
    // central interval of a normal distribution holding `mass`
    let half = sz * std::f64::consts::SQRT_2 * inverse_erf(mass);
    let ev = SliceEvaluator::new(model, z, lambda);
    let mut amps = Vec::new();
    let norm = 1.0 / (2.0 * PI * sz * sz).sqrt();
    let mut worst = 0.0f64;
    for i in 0..samples {
        let x = lattice(-half, half, samples, i);
        let reference = norm * (-x * x / (2.0 * sz * sz)).exp();
        let rho = ev.density_current(x, &mut amps).0;
        worst = worst.max((rho - reference).abs() / reference);
    }
    Ok(worst)
}

/// Inverse error function by bisection (the callers need only a few values).
fn inverse_erf(y: f64) -> f64 {
    let (mut a, mut b) = (0.0, 6.0);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if erf(m) < y {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Error function via its Taylor series (|x| <= 3) or continued fraction.
fn erf(x: f64) -> f64 {
    if x < 0.0 {
        return -erf(-x);
    }
    if x <= 3.0 {
        let mut term = x;
        let mut sum = x;
        let x2 = x * x;
        for n in 1..200 {
            term *= -x2 / n as f64;
            let add = term / (2 * n + 1) as f64;
            sum += add;
            if add.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        2.0 / PI.sqrt() * sum
    } else {
        // erfc continued fraction
        let mut f = 0.0;
        for n in (1..60).rev() {
            f = (n as f64 / 2.0) / (x + f);
        }
        1.0 - (-x * x).exp() / PI.sqrt() / (x + f)
    }
}

//! Probability-flow streamlines `dx/dz = v_eff(x, z)`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::decoherence::SliceEvaluator;
use crate::error::{domain, Result};
use crate::model::{GratingSpec, Model};

/// Why an integration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationReason {
    Completed,
    /// The trajectory reached a point where the density is below the floor.
    EnteredInvalidRegion,
    /// Error control demanded a step below the minimum.
    StepUnderflow,
}

impl TerminationReason {
    pub fn name(&self) -> &'static str {
        match self {
            TerminationReason::Completed => "completed",
            TerminationReason::EnteredInvalidRegion => "entered_invalid_region",
            TerminationReason::StepUnderflow => "step_underflow",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Streamline {
    pub seed_x: f64,
    pub z_samples: Vec<f64>,
    pub x_samples: Vec<f64>,
    pub terminated_early: bool,
    pub reason: TerminationReason,
}

impl Streamline {
    pub fn len(&self) -> usize {
        self.z_samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z_samples.is_empty()
    }

    pub fn last_x(&self) -> f64 {
        *self.x_samples.last().unwrap_or(&self.seed_x)
    }
}

/// Step-doubling RK4 control.
///
/// Each base interval is covered by steps of `base_step / 2^j`; a step is
/// accepted once the Richardson estimate `|x_half - x_full| / 15` is at most
/// `tolerance`. Samples are recorded every `sample_stride` base intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub base_step: f64,
    pub tolerance: f64,
    pub min_step: f64,
    pub sample_stride: usize,
}

impl StepControl {
    /// `h = z_T / 2000`, tolerance `1e-4 d`, `h_min = h / 1024`.
    pub fn for_model(model: &Model) -> Self {
        Self::with_base_step(model, model.talbot_distance() / 2000.0)
    }

    pub fn with_base_step(model: &Model, base_step: f64) -> Self {
        Self { base_step, tolerance: 1e-4 * model.period(), min_step: base_step / 1024.0, sample_stride: 1 }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.sample_stride = stride.max(1);
        self
    }

    fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !(ok(self.base_step) && ok(self.tolerance) && ok(self.min_step)) || self.min_step > self.base_step {
            return domain(format!("invalid step control {self:?}"));
        }
        if self.sample_stride == 0 {
            return domain("sample stride must be at least 1");
        }
        Ok(())
    }
}

/// Seeds spread uniformly across the geometric width of every slit.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedEnsemble {
    pub seeds: Vec<f64>,
    pub per_slit: usize,
}

pub fn seed_ensemble(grating: &GratingSpec, per_slit: usize) -> Result<SeedEnsemble> {
    if per_slit == 0 {
        return domain("per_slit must be at least 1");
    }
    let w = grating.slit_width();
    let mut seeds = Vec::with_capacity(grating.n_slits() * per_slit);
    for &xn in grating.centers() {
        if per_slit == 1 {
            seeds.push(xn);
            continue;
        }
        for j in 0..per_slit {
            seeds.push(xn + w * (j as f64 / (per_slit - 1) as f64 - 0.5));
        }
    }
    Ok(SeedEnsemble { seeds, per_slit })
}

struct Field<'a> {
    model: &'a Model,
    lambda: f64,
    amps: Vec<Complex64>,
}

impl Field<'_> {
    fn velocity(&mut self, x: f64, z: f64) -> Option<f64> {
        if !x.is_finite() {
            return None;
        }
        SliceEvaluator::new(self.model, z, self.lambda).velocity(x, &mut self.amps)
    }

    fn rk4(&mut self, x: f64, z: f64, h: f64) -> Option<f64> {
        let k1 = self.velocity(x, z)?;
        let k2 = self.velocity(x + 0.5 * h * k1, z + 0.5 * h)?;
        let k3 = self.velocity(x + 0.5 * h * k2, z + 0.5 * h)?;
        let k4 = self.velocity(x + h * k3, z + h)?;
        Some(x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
    }
}

enum Advance {
    Ok(f64),
    Invalid,
    Underflow,
}

/// Integrates one streamline from `(seed, z_start)` to `z_end`.
pub fn integrate_streamline(
    seed: f64,
    z_start: f64,
    z_end: f64,
    control: &StepControl,
    model: &Model,
    lambda: f64,
) -> Result<Streamline> {
    if !(z_start >= 0.0 && z_end > z_start && z_end.is_finite()) {
        return domain(format!("invalid z interval [{z_start}, {z_end}]"));
    }
    if !seed.is_finite() {
        return domain("seed must be finite");
    }
    control.validate()?;

    let intervals = ((z_end - z_start) / control.base_step).ceil().max(1.0) as usize;
    let z_at = |i: usize| {
        if i == intervals {
            z_end
        } else {
            z_start + (z_end - z_start) * i as f64 / intervals as f64
        }
    };

    let mut field = Field { model, lambda, amps: Vec::new() };
    let mut line = Streamline {
        seed_x: seed,
        z_samples: vec![z_start],
        x_samples: vec![seed],
        terminated_early: false,
        reason: TerminationReason::Completed,
    };
    if field.velocity(seed, z_start).is_none() {
        line.terminated_early = true;
        line.reason = TerminationReason::EnteredInvalidRegion;
        return Ok(line);
    }

    let mut x = seed;
    for i in 0..intervals {
        let (za, zb) = (z_at(i), z_at(i + 1));
        match advance(&mut field, x, za, zb, control) {
            Advance::Ok(xn) => x = xn,
            Advance::Invalid => {
                line.terminated_early = true;
                line.reason = TerminationReason::EnteredInvalidRegion;
                break;
            }
            Advance::Underflow => {
                line.terminated_early = true;
                line.reason = TerminationReason::StepUnderflow;
                break;
            }
        }
        if (i + 1) % control.sample_stride == 0 || i + 1 == intervals {
            line.z_samples.push(zb);
            line.x_samples.push(x);
        }
    }
    Ok(line)
}

/// Crosses one base interval `[za, zb]`, subdividing as error control demands.
fn advance(field: &mut Field, mut x: f64, za: f64, zb: f64, control: &StepControl) -> Advance {
    let span = zb - za;
    let mut z = za;
    let mut parts = 1usize;
    // `done` counts completed sub-steps of size span/parts
    let mut done = 0usize;
    while done < parts {
        let h = span / parts as f64;
        let full = field.rk4(x, z, h);
        let half = field.rk4(x, z, 0.5 * h).and_then(|xm| field.rk4(xm, z + 0.5 * h, 0.5 * h));
        let (full, half) = match (full, half) {
            (Some(f), Some(h2)) => (f, h2),
            _ => {
                if 0.5 * h < control.min_step {
                    return Advance::Invalid;
                }
                parts *= 2;
                done *= 2;
                continue;
            }
        };
        let err = (half - full).abs() / 15.0;
        if err > control.tolerance {
            if 0.5 * h < control.min_step {
                return Advance::Underflow;
            }
            parts *= 2;
            done *= 2;
            continue;
        }
        x = half + (half - full) / 15.0;
        done += 1;
        z = if done == parts { zb } else { za + span * done as f64 / parts as f64 };
    }
    Advance::Ok(x)
}

/// Integrates every seed independently (in parallel); output order follows the seeds.
pub fn integrate_ensemble(
    ensemble: &SeedEnsemble,
    z_range: (f64, f64),
    control: &StepControl,
    model: &Model,
    lambda: f64,
) -> Result<Vec<Streamline>> {
    ensemble.seeds.par_iter().map(|&s| integrate_streamline(s, z_range.0, z_range.1, control, model, lambda)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderingReport {
    /// Adjacent-pair inversions summed over all shared z samples.
    pub crossings: usize,
    pub first_crossing_z: Option<f64>,
}

/// Counts order inversions between neighbouring streamlines (in input order)
/// at each shared z sample. Lines that terminated early drop out of the
/// comparison after their last sample; their z grids must be a prefix of the
/// longest one.
pub fn ordering_check(lines: &[Streamline]) -> Result<OrderingReport> {
    let Some(longest) = lines.iter().max_by_key(|l| l.len()) else {
        return Ok(OrderingReport { crossings: 0, first_crossing_z: None });
    };
    for l in lines {
        if l.x_samples.len() != l.z_samples.len() || l.z_samples[..] != longest.z_samples[..l.len()] {
            return domain("streamlines do not share a common z grid");
        }
    }
    let mut crossings = 0;
    let mut first = None;
    for (j, &z) in longest.z_samples.iter().enumerate() {
        let mut prev: Option<f64> = None;
        for l in lines.iter().filter(|l| j < l.len()) {
            let x = l.x_samples[j];
            if let Some(p) = prev {
                if x < p {
                    crossings += 1;
                    first.get_or_insert(z);
                }
            }
            prev = Some(x);
        }
    }
    Ok(OrderingReport { crossings, first_crossing_z: first })
}

/// Interquartile range of the final positions of the completed streamlines.
pub fn final_spread_iqr(lines: &[Streamline]) -> f64 {
    let mut xs: Vec<f64> = lines.iter().filter(|l| !l.terminated_early).map(|l| l.last_x()).collect();
    if xs.len() < 2 {
        return 0.0;
    }
    xs.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let t = p * (xs.len() - 1) as f64;
        let i = t.floor() as usize;
        let f = t - i as f64;
        if i + 1 < xs.len() {
            xs[i] * (1.0 - f) + xs[i + 1] * f
        } else {
            xs[i]
        }
    };
    q(0.75) - q(0.25)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_follow_slit_width() {
        let m = Model::reference();
        let e = seed_ensemble(m.grating(), 11).unwrap();
        assert_eq!(e.seeds.len(), 550);
        let one = Model::reference().with_slits(1).unwrap();
        assert_eq!(seed_ensemble(one.grating(), 1).unwrap().seeds, vec![0.0]);
        let three = seed_ensemble(one.grating(), 3).unwrap().seeds;
        assert!((three[0] + 0.1e-6).abs() < 1e-20 && three[1] == 0.0 && (three[2] - 0.1e-6).abs() < 1e-20);
        assert!(seed_ensemble(one.grating(), 0).is_err());
        assert!(e.seeds.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn axis_streamline_stays_put() {
        let m = Model::reference().with_slits(1).unwrap();
        let zt = m.talbot_distance();
        let c = StepControl::for_model(&m);
        let l = integrate_streamline(0.0, 0.0, zt, &c, &m, 0.0).unwrap();
        assert_eq!(l.reason, TerminationReason::Completed);
        assert_eq!(l.len(), 2001);
        assert!(l.x_samples.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_gaussian_streamline_tracks_width() {
        let m = Model::reference().with_slits(1).unwrap();
        let zt = m.talbot_distance();
        let s0 = m.sigma0();
        let c = StepControl::for_model(&m);
        let l = integrate_streamline(s0, 0.0, zt, &c, &m, 0.0).unwrap();
        assert!(!l.terminated_early);
        for (&z, &x) in l.z_samples.iter().zip(&l.x_samples) {
            let exact = m.beam_width(z);
            assert!((x - exact).abs() / exact < 1e-4, "z={z}");
        }
    }

    #[test]
    fn rejects_bad_interval() {
        let m = Model::reference();
        let c = StepControl::for_model(&m);
        assert!(integrate_streamline(0.0, 1.0, 0.5, &c, &m, 0.0).is_err());
        assert!(integrate_streamline(0.0, -1.0, 0.5, &c, &m, 0.0).is_err());
        assert!(integrate_streamline(f64::NAN, 0.0, 0.5, &c, &m, 0.0).is_err());
    }

    #[test]
    fn seed_in_empty_region_is_flagged() {
        let m = Model::reference();
        let c = StepControl::for_model(&m);
        let l = integrate_streamline(80e-6, 0.0, 1e-3, &c, &m, 0.0).unwrap();
        assert!(l.terminated_early);
        assert_eq!(l.reason, TerminationReason::EnteredInvalidRegion);
        assert_eq!(l.len(), 1);
    }

    #[test]
    fn tight_tolerance_underflows() {
        let m = Model::reference().with_slits(1).unwrap();
        let mut c = StepControl::for_model(&m);
        c.tolerance = 1e-30;
        let l = integrate_streamline(m.sigma0(), 0.0, m.talbot_distance(), &c, &m, 0.0).unwrap();
        assert!(l.terminated_early);
        assert_eq!(l.reason, TerminationReason::StepUnderflow);
    }

    #[test]
    fn stride_keeps_endpoints() {
        let m = Model::reference().with_slits(1).unwrap();
        let zt = m.talbot_distance();
        let c = StepControl::for_model(&m).with_stride(300);
        let l = integrate_streamline(m.sigma0(), 0.0, zt, &c, &m, 0.0).unwrap();
        assert_eq!(l.z_samples.len(), 1 + 6 + 1);
        assert_eq!(*l.z_samples.last().unwrap(), zt);
    }

    #[test]
    fn ordering_detects_swaps() {
        let mk = |xs: &[f64]| Streamline {
            seed_x: xs[0],
            z_samples: (0..xs.len()).map(|i| i as f64).collect(),
            x_samples: xs.to_vec(),
            terminated_early: false,
            reason: TerminationReason::Completed,
        };
        let a = mk(&[0.0, 1.0, 2.0]);
        let b = mk(&[0.5, 1.5, 2.5]);
        let r = ordering_check(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(r.crossings, 0);
        assert_eq!(ordering_check(&[a.clone(), a.clone()]).unwrap().crossings, 0);
        let mut bad = b.clone();
        bad.x_samples[2] = 1.0;
        let r = ordering_check(&[a.clone(), bad]).unwrap();
        assert_eq!(r.crossings, 1);
        assert_eq!(r.first_crossing_z, Some(2.0));
        let mut shifted = b;
        shifted.z_samples[1] = 0.7;
        assert!(ordering_check(&[a, shifted]).is_err());
        assert_eq!(ordering_check(&[]).unwrap().crossings, 0);
    }

    #[test]
    fn single_seed_ensemble_matches_direct() {
        let m = Model::reference().with_slits(3).unwrap();
        let c = StepControl::for_model(&m);
        let zt = m.talbot_distance();
        let e = SeedEnsemble { seeds: vec![0.37e-6], per_slit: 1 };
        let a = integrate_ensemble(&e, (0.0, 0.1 * zt), &c, &m, 0.0).unwrap();
        let b = integrate_streamline(0.37e-6, 0.0, 0.1 * zt, &c, &m, 0.0).unwrap();
        assert_eq!(a, vec![b]);
    }

    #[test]
    fn iqr_of_uniform_points() {
        let lines: Vec<_> = (0..5)
            .map(|i| Streamline {
                seed_x: 0.0,
                z_samples: vec![0.0],
                x_samples: vec![i as f64],
                terminated_early: false,
                reason: TerminationReason::Completed,
            })
            .collect();
        assert_eq!(final_spread_iqr(&lines), 2.0);
    }
}

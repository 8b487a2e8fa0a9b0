//! C ABI over `talbot-core`.
//!
//! Every fallible call returns a [`TalbotStatus`]; on failure a message is
//! kept per thread and can be read with [`talbot_last_error_message`].
//! Models and streamlines are opaque heap handles released with their
//! `_free` function. Lengths are metres, Λ is m⁻³.
//!
//! # Safety
//!
//! Pointer arguments must be non-null, aligned and valid for the documented
//! element count unless stated otherwise. Handles must come from this library
//! and must not be used after being freed.
#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use talbot_core::decoherence::{self, evaluate_grid, Channel};
use talbot_core::diagnostics::coherence_crossing;
use talbot_core::flow::{integrate_streamline, StepControl, Streamline, TerminationReason};
use talbot_core::model::{BeamParams, GratingSpec};
use talbot_core::{Error, Model, SimulationGrid};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TalbotStatus {
    Ok = 0,
    NullPointer = 1,
    /// Argument outside its physical domain.
    Domain = 2,
    /// Output buffer too small; the required size is reported where possible.
    BufferTooSmall = 3,
    Numerical = 4,
    Io = 5,
    Config = 6,
    /// A Rust panic was caught at the boundary.
    Internal = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TalbotChannel {
    Density = 0,
    Current = 1,
    DriftVelocity = 2,
    KxOverK0 = 3,
}

impl From<TalbotChannel> for Channel {
    fn from(c: TalbotChannel) -> Self {
        match c {
            TalbotChannel::Density => Channel::Density,
            TalbotChannel::Current => Channel::Current,
            TalbotChannel::DriftVelocity => Channel::DriftVelocity,
            TalbotChannel::KxOverK0 => Channel::KxOverK0,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TalbotTermination {
    Completed = 0,
    EnteredInvalidRegion = 1,
    StepUnderflow = 2,
}

/// Field values at one point. `valid` is 0 where the density is below the
/// velocity floor; `v_eff` and `kx_over_k0` are NaN there.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TalbotFieldSample {
    pub rho: f64,
    pub current: f64,
    pub v_eff: f64,
    pub kx_over_k0: f64,
    pub valid: u8,
}

/// Uniform closed-interval lattice; samples are written row-major with
/// rows indexed by z.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TalbotGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub nx: usize,
    pub nz: usize,
}

/// Opaque grating and beam parameters.
pub struct TalbotModel(Model);

/// Opaque integrated streamline.
pub struct TalbotStreamline(Streamline);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: TalbotStatus, msg: impl Into<String>) -> TalbotStatus {
    set_error(msg.into());
    status
}

fn status_of(e: &Error) -> TalbotStatus {
    match e {
        Error::Domain(_) => TalbotStatus::Domain,
        Error::Quadrature { .. } | Error::Aliasing { .. } => TalbotStatus::Numerical,
        Error::Config(_) => TalbotStatus::Config,
        Error::Io(_) => TalbotStatus::Io,
    }
}

fn guard(f: impl FnOnce() -> Result<(), TalbotStatus>) -> TalbotStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            TalbotStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(TalbotStatus::Internal, format!("internal error: {msg}"))
        }
    }
}

fn core<T>(r: talbot_core::Result<T>) -> Result<T, TalbotStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn model_ref<'a>(m: *const TalbotModel) -> Result<&'a Model, TalbotStatus> {
    m.as_ref().map(|m| &m.0).ok_or_else(|| fail(TalbotStatus::NullPointer, "model handle is null"))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, TalbotStatus> {
    p.as_mut().ok_or_else(|| fail(TalbotStatus::NullPointer, format!("{what} is null")))
}

/// Message of the last failed call on this thread, or null after a success.
/// Valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn talbot_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn talbot_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a model from de Broglie wavelength, grating period, slit width,
/// slit count and Gaussian slit width σ0.
#[no_mangle]
pub unsafe extern "C" fn talbot_model_new(
    lambda_db: f64,
    period: f64,
    slit_width: f64,
    n_slits: usize,
    sigma0: f64,
    out: *mut *mut TalbotModel,
) -> TalbotStatus {
    guard(|| {
        let out = out_ref(out, "output handle")?;
        *out = ptr::null_mut();
        let beam = core(BeamParams::new(lambda_db))?;
        let grating = core(GratingSpec::new(period, slit_width, n_slits, sigma0))?;
        *out = Box::into_raw(Box::new(TalbotModel(Model::new(beam, grating))));
        Ok(())
    })
}

/// Sodium at 16 pm through 50 slits, d = 0.4 µm, w = 0.2 µm, σ0 = w/4.
#[no_mangle]
pub unsafe extern "C" fn talbot_model_reference(out: *mut *mut TalbotModel) -> TalbotStatus {
    guard(|| {
        *out_ref(out, "output handle")? = Box::into_raw(Box::new(TalbotModel(Model::reference())));
        Ok(())
    })
}

/// Releases a model. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn talbot_model_free(model: *mut TalbotModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

#[no_mangle]
pub unsafe extern "C" fn talbot_model_talbot_distance(model: *const TalbotModel, out: *mut f64) -> TalbotStatus {
    guard(|| {
        *out_ref(out, "output")? = model_ref(model)?.talbot_distance();
        Ok(())
    })
}

/// Beam width σ_z of a single slit at distance `z`.
#[no_mangle]
pub unsafe extern "C" fn talbot_model_beam_width(model: *const TalbotModel, z: f64, out: *mut f64) -> TalbotStatus {
    guard(|| {
        *out_ref(out, "output")? = model_ref(model)?.beam_width(z);
        Ok(())
    })
}

fn check_point(x: f64, z: f64, lambda: f64) -> Result<(), TalbotStatus> {
    if !x.is_finite() || !(z >= 0.0 && z.is_finite()) || !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(fail(
            TalbotStatus::Domain,
            format!("need finite x, z >= 0 and lambda >= 0 (got x = {x:e}, z = {z:e}, lambda = {lambda:e})"),
        ));
    }
    Ok(())
}

/// Density, current and drift velocity at `(x, z)` for decoherence
/// strength `lambda`.
#[no_mangle]
pub unsafe extern "C" fn talbot_sample(
    model: *const TalbotModel,
    x: f64,
    z: f64,
    lambda: f64,
    out: *mut TalbotFieldSample,
) -> TalbotStatus {
    guard(|| {
        let m = model_ref(model)?;
        let out = out_ref(out, "output sample")?;
        check_point(x, z, lambda)?;
        let s = decoherence::sample(m, x, z, lambda);
        *out = TalbotFieldSample {
            rho: s.rho,
            current: s.current,
            v_eff: s.v_eff,
            kx_over_k0: s.kx_over_k0,
            valid: s.valid as u8,
        };
        Ok(())
    })
}

/// Fills `out[j * nx + i]` with `channel` at `(x_i, z_j)`; invalid velocity
/// samples are NaN. `capacity` is the length of `out` in elements.
#[no_mangle]
pub unsafe extern "C" fn talbot_evaluate_grid(
    model: *const TalbotModel,
    grid: *const TalbotGrid,
    lambda: f64,
    channel: TalbotChannel,
    out: *mut f64,
    capacity: usize,
) -> TalbotStatus {
    guard(|| {
        let m = model_ref(model)?;
        let g = grid.as_ref().ok_or_else(|| fail(TalbotStatus::NullPointer, "grid is null"))?;
        if out.is_null() {
            return Err(fail(TalbotStatus::NullPointer, "output buffer is null"));
        }
        check_point(0.0, 0.0, lambda)?;
        let grid = core(SimulationGrid::new(g.x_min, g.x_max, g.z_min, g.z_max, g.nx, g.nz))?;
        let need = g.nx * g.nz;
        if capacity < need {
            return Err(fail(
                TalbotStatus::BufferTooSmall,
                format!("grid needs {need} values, buffer holds {capacity}"),
            ));
        }
        let values = evaluate_grid(&grid, m, lambda).channel(channel.into());
        std::slice::from_raw_parts_mut(out, need).copy_from_slice(&values);
        Ok(())
    })
}

/// Distance where the coherence range falls to the beam width. `found` is
/// set to 0 when no crossing lies in the search bracket.
#[no_mangle]
pub unsafe extern "C" fn talbot_coherence_crossing(
    model: *const TalbotModel,
    lambda: f64,
    out_z: *mut f64,
    found: *mut u8,
) -> TalbotStatus {
    guard(|| {
        let m = model_ref(model)?;
        let (out_z, found) = (out_ref(out_z, "output z")?, out_ref(found, "found flag")?);
        match core(coherence_crossing(m, lambda))? {
            Some(z) => {
                *out_z = z;
                *found = 1;
            }
            None => {
                *out_z = f64::NAN;
                *found = 0;
            }
        }
        Ok(())
    })
}

/// Integrates the streamline through `seed` from `z_start` to `z_end` with
/// the default step control, keeping every `sample_stride`-th base step.
#[no_mangle]
pub unsafe extern "C" fn talbot_streamline_new(
    model: *const TalbotModel,
    seed: f64,
    z_start: f64,
    z_end: f64,
    lambda: f64,
    sample_stride: usize,
    out: *mut *mut TalbotStreamline,
) -> TalbotStatus {
    guard(|| {
        let m = model_ref(model)?;
        let out = out_ref(out, "output handle")?;
        *out = ptr::null_mut();
        check_point(seed, z_start, lambda)?;
        let control = StepControl::for_model(m).with_stride(sample_stride);
        let s = core(integrate_streamline(seed, z_start, z_end, &control, m, lambda))?;
        *out = Box::into_raw(Box::new(TalbotStreamline(s)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn talbot_streamline_free(line: *mut TalbotStreamline) {
    if !line.is_null() {
        drop(Box::from_raw(line));
    }
}

/// Number of recorded samples; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn talbot_streamline_len(line: *const TalbotStreamline) -> usize {
    line.as_ref().map_or(0, |l| l.0.len())
}

#[no_mangle]
pub unsafe extern "C" fn talbot_streamline_termination(
    line: *const TalbotStreamline,
    out: *mut TalbotTermination,
) -> TalbotStatus {
    guard(|| {
        let l = line.as_ref().ok_or_else(|| fail(TalbotStatus::NullPointer, "streamline handle is null"))?;
        *out_ref(out, "output")? = match l.0.reason {
            TerminationReason::Completed => TalbotTermination::Completed,
            TerminationReason::EnteredInvalidRegion => TalbotTermination::EnteredInvalidRegion,
            TerminationReason::StepUnderflow => TalbotTermination::StepUnderflow,
        };
        Ok(())
    })
}

/// Copies the samples into `z_out` and `x_out`, each holding `capacity`
/// values.
#[no_mangle]
pub unsafe extern "C" fn talbot_streamline_copy(
    line: *const TalbotStreamline,
    z_out: *mut f64,
    x_out: *mut f64,
    capacity: usize,
) -> TalbotStatus {
    guard(|| {
        let l = &line.as_ref().ok_or_else(|| fail(TalbotStatus::NullPointer, "streamline handle is null"))?.0;
        if z_out.is_null() || x_out.is_null() {
            return Err(fail(TalbotStatus::NullPointer, "output buffer is null"));
        }
        let n = l.len();
        if capacity < n {
            return Err(fail(
                TalbotStatus::BufferTooSmall,
                format!("streamline has {n} samples, buffer holds {capacity}"),
            ));
        }
        std::slice::from_raw_parts_mut(z_out, n).copy_from_slice(&l.z_samples);
        std::slice::from_raw_parts_mut(x_out, n).copy_from_slice(&l.x_samples);
        Ok(())
    })
}

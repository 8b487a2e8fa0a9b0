//! Exercises the exported functions through their C signatures.

use std::ffi::CStr;
use std::ptr;

use talbot_core::decoherence;
use talbot_core::Model;
use talbot_ffi::*;

fn reference() -> *mut TalbotModel {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { talbot_model_reference(&mut m) }, TalbotStatus::Ok);
    assert!(!m.is_null());
    m
}

fn last_error() -> String {
    let p = talbot_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(talbot_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn model_lifecycle_and_scales() {
    let m = reference();
    let mut zt = 0.0;
    assert_eq!(unsafe { talbot_model_talbot_distance(m, &mut zt) }, TalbotStatus::Ok);
    assert!((zt - 0.02).abs() < 1e-15);
    assert!(talbot_last_error_message().is_null());
    let mut s = 0.0;
    assert_eq!(unsafe { talbot_model_beam_width(m, 0.0, &mut s) }, TalbotStatus::Ok);
    assert_eq!(s, 50e-9);
    unsafe { talbot_model_free(m) };
    unsafe { talbot_model_free(ptr::null_mut()) };
}

#[test]
fn invalid_parameters_report_domain_errors() {
    let mut m = ptr::null_mut();
    let st = unsafe { talbot_model_new(16e-12, 0.4e-6, 0.5e-6, 50, 50e-9, &mut m) };
    assert_eq!(st, TalbotStatus::Domain);
    assert!(m.is_null());
    assert!(last_error().contains("slit width"), "{}", last_error());
    assert_eq!(unsafe { talbot_model_new(-1.0, 0.4e-6, 0.2e-6, 50, 50e-9, &mut m) }, TalbotStatus::Domain);
    assert_eq!(
        unsafe { talbot_model_new(16e-12, 0.4e-6, 0.2e-6, 3, 50e-9, ptr::null_mut()) },
        TalbotStatus::NullPointer
    );

    let mut out = TalbotFieldSample { rho: 0.0, current: 0.0, v_eff: 0.0, kx_over_k0: 0.0, valid: 0 };
    assert_eq!(unsafe { talbot_sample(ptr::null(), 0.0, 0.0, 0.0, &mut out) }, TalbotStatus::NullPointer);
    let m = reference();
    assert_eq!(unsafe { talbot_sample(m, 0.0, -1.0, 0.0, &mut out) }, TalbotStatus::Domain);
    assert_eq!(unsafe { talbot_sample(m, 0.0, 0.0, -1.0, &mut out) }, TalbotStatus::Domain);
    unsafe { talbot_model_free(m) };
}

#[test]
fn samples_match_the_core_engine() {
    let m = reference();
    let core = Model::reference();
    let mut out = TalbotFieldSample { rho: 0.0, current: 0.0, v_eff: 0.0, kx_over_k0: 0.0, valid: 0 };
    for &(x, z, l) in &[(0.13e-6, 0.007, 0.0), (-2.1e-6, 0.031, 1e12), (5e-6, 0.2, 1e15)] {
        assert_eq!(unsafe { talbot_sample(m, x, z, l, &mut out) }, TalbotStatus::Ok);
        let s = decoherence::sample(&core, x, z, l);
        assert_eq!(out.rho.to_bits(), s.rho.to_bits());
        assert_eq!(out.current.to_bits(), s.current.to_bits());
        assert_eq!(out.valid, s.valid as u8);
    }
    unsafe { talbot_model_free(m) };
}

#[test]
fn grid_fills_row_major_and_checks_capacity() {
    let m = reference();
    let g = TalbotGrid { x_min: -12e-6, x_max: 12e-6, z_min: 0.0, z_max: 0.04, nx: 7, nz: 5 };
    let mut buf = vec![0.0; 35];
    let st = unsafe { talbot_evaluate_grid(m, &g, 0.0, TalbotChannel::Density, buf.as_mut_ptr(), 34) };
    assert_eq!(st, TalbotStatus::BufferTooSmall);
    assert!(last_error().contains("35"));
    let st = unsafe { talbot_evaluate_grid(m, &g, 0.0, TalbotChannel::Density, buf.as_mut_ptr(), buf.len()) };
    assert_eq!(st, TalbotStatus::Ok);
    let core = Model::reference();
    let (x, z) = (-12e-6 + 4.0 * 4e-6, 3.0 * 0.01);
    assert!((buf[3 * 7 + 4] - decoherence::density(&core, x, z, 0.0)).abs() <= 1e-12 * buf[3 * 7 + 4]);

    let mut k = vec![0.0; 35];
    let st = unsafe { talbot_evaluate_grid(m, &g, 0.0, TalbotChannel::KxOverK0, k.as_mut_ptr(), k.len()) };
    assert_eq!(st, TalbotStatus::Ok);
    assert!(k[0].is_nan(), "row z = 0 far outside the grating is below the floor");

    let bad = TalbotGrid { nx: 1, ..g };
    let st = unsafe { talbot_evaluate_grid(m, &bad, 0.0, TalbotChannel::Density, buf.as_mut_ptr(), buf.len()) };
    assert_eq!(st, TalbotStatus::Domain);
    unsafe { talbot_model_free(m) };
}

#[test]
fn crossing_distance() {
    let m = reference();
    let (mut z, mut found) = (0.0, 0u8);
    assert_eq!(unsafe { talbot_coherence_crossing(m, 1e12, &mut z, &mut found) }, TalbotStatus::Ok);
    assert_eq!(found, 1);
    assert!((z / 0.02 - 6.0).abs() < 0.5);
    assert_eq!(unsafe { talbot_coherence_crossing(m, 0.0, &mut z, &mut found) }, TalbotStatus::Domain);
    unsafe { talbot_model_free(m) };
}

#[test]
fn streamline_round_trip() {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { talbot_model_new(16e-12, 0.4e-6, 0.2e-6, 1, 50e-9, &mut m) }, TalbotStatus::Ok);
    let mut line = ptr::null_mut();
    let st = unsafe { talbot_streamline_new(m, 50e-9, 0.0, 0.02, 0.0, 100, &mut line) };
    assert_eq!(st, TalbotStatus::Ok);
    let n = unsafe { talbot_streamline_len(line) };
    assert!(n >= 21);
    let (mut zs, mut xs) = (vec![0.0; n], vec![0.0; n]);
    assert_eq!(
        unsafe { talbot_streamline_copy(line, zs.as_mut_ptr(), xs.as_mut_ptr(), n - 1) },
        TalbotStatus::BufferTooSmall
    );
    assert_eq!(unsafe { talbot_streamline_copy(line, zs.as_mut_ptr(), xs.as_mut_ptr(), n) }, TalbotStatus::Ok);
    assert_eq!((zs[0], xs[0], zs[n - 1]), (0.0, 50e-9, 0.02));
    let mut reason = TalbotTermination::StepUnderflow;
    assert_eq!(unsafe { talbot_streamline_termination(line, &mut reason) }, TalbotStatus::Ok);
    assert_eq!(reason, TalbotTermination::Completed);
    let mut s = 0.0;
    unsafe { talbot_model_beam_width(m, zs[n - 1], &mut s) };
    assert!(((xs[n - 1] - s) / s).abs() < 1e-4);
    assert_eq!(unsafe { talbot_streamline_new(m, 0.0, 0.02, 0.01, 0.0, 1, &mut line) }, TalbotStatus::Domain);
    assert!(line.is_null());
    unsafe {
        talbot_streamline_free(ptr::null_mut());
        assert_eq!(talbot_streamline_len(ptr::null()), 0);
        talbot_model_free(m);
    }
}

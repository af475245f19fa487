use std::ffi::CStr;
use std::ptr;

use sps_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as std::ffi::c_char; 256];
    let n = unsafe { sps_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn lambda() -> *mut SpsScenario {
    let mut h = ptr::null_mut();
    let s = unsafe { sps_lambda_new(1e-2, 1e-3, 1.0, 1.0, 0.0, &mut h) };
    assert_eq!(s, SpsStatus::Ok);
    assert!(!h.is_null());
    h
}

#[test]
fn steady_state_is_a_density_matrix() {
    let h = lambda();
    let d = unsafe { sps_scenario_dim(h) };
    assert_eq!(d, 3);
    let (mut re, mut im) = (vec![0.0; 9], vec![0.0; 9]);
    assert_eq!(unsafe { sps_steady_state(h, re.as_mut_ptr(), im.as_mut_ptr(), 9) }, SpsStatus::Ok);
    let trace: f64 = (0..3).map(|i| re[i * 3 + i]).sum();
    assert!((trace - 1.0).abs() < 1e-12);
    assert!(im.iter().enumerate().all(|(k, v)| (v + im[(k % 3) * 3 + k / 3]).abs() < 1e-14));
    assert_eq!(unsafe { sps_steady_state(h, re.as_mut_ptr(), im.as_mut_ptr(), 4) }, SpsStatus::BufferSize);
    assert!(last_error().contains("need 9"));
    unsafe { sps_scenario_free(h) };
}

#[test]
fn spectrum_and_g2_match_core() {
    use sps_core::correl::{emission_spectrum, g2_emitter};
    use sps_core::models::{build_lambda_emitter, lambda_lowering, LambdaParams};
    let model =
        build_lambda_emitter(&LambdaParams { omega: 1e-2, omega_r: 1e-3, gamma1: 1.0, gamma2: 1.0, delta_e: 0.0 })
            .unwrap();
    let h = lambda();
    let w = [-3e-3, 0.0, 2e-3, 5e-2];
    let mut s = [0.0; 4];
    let mut coh = f64::NAN;
    assert_eq!(unsafe { sps_emission_spectrum(h, w.as_ptr(), 4, s.as_mut_ptr(), &mut coh) }, SpsStatus::Ok);
    let r = emission_spectrum(&model, &lambda_lowering(), &w).unwrap();
    assert_eq!(s.to_vec(), r.incoherent);
    assert_eq!(coh, r.coherent_weight);
    let t = [0.0, 10.0, 100.0];
    let mut g = [0.0; 3];
    assert_eq!(unsafe { sps_g2(h, t.as_ptr(), 3, g.as_mut_ptr()) }, SpsStatus::Ok);
    assert_eq!(g.to_vec(), g2_emitter(&model, &lambda_lowering(), &t).unwrap().real_values());
    let bad = [1.0, 0.5];
    assert_eq!(unsafe { sps_g2(h, bad.as_ptr(), 2, g.as_mut_ptr()) }, SpsStatus::InvalidArgument);
    unsafe { sps_scenario_free(h) };
}

#[test]
fn detector_handles() {
    let mut rb = ptr::null_mut();
    assert_eq!(unsafe { sps_rb87_new(1e-2, 1e-2, 0, &mut rb) }, SpsStatus::Ok);
    let mut out = 0.0;
    assert_eq!(unsafe { sps_detector_g2_zero(rb, &mut out) }, SpsStatus::InvalidArgument);
    assert!(last_error().contains("detector"));
    let mut det = ptr::null_mut();
    assert_eq!(unsafe { sps_scenario_with_detector(rb, 1e-3, 1.0, 0.0, 3, &mut det) }, SpsStatus::Ok);
    assert_eq!(unsafe { sps_scenario_dim(det) }, 16);
    assert_eq!(unsafe { sps_detector_g2_zero(det, &mut out) }, SpsStatus::Ok);
    assert!(out > 0.0 && out < 1e-2, "{out}");
    let mut bad = ptr::null_mut();
    assert_eq!(unsafe { sps_scenario_with_detector(rb, 1e-3, -1.0, 0.0, 3, &mut bad) }, SpsStatus::InvalidArgument);
    assert!(bad.is_null());
    unsafe {
        sps_scenario_free(det);
        sps_scenario_free(rb);
    }
}

#[test]
fn hyperfine_struct_and_polarization_channel() {
    let spec = SpsHyperfine {
        f_g_twice: 4,
        f_e_twice: 2,
        omega_l: 3e-2,
        q_laser: 1,
        omega_b: 1e-3,
        gamma: 1.0,
        delta_e: 0.0,
        channel: SpsChannelKind::Polarization,
        m_g_twice: 0,
        m_e_twice: 0,
        q: 0,
    };
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { sps_hyperfine_new(&spec, &mut h) }, SpsStatus::Ok);
    assert_eq!(unsafe { sps_scenario_dim(h) }, 8);
    unsafe { sps_scenario_free(h) };
    let half = SpsHyperfine { f_g_twice: 3, ..spec };
    assert_eq!(unsafe { sps_hyperfine_new(&half, &mut h) }, SpsStatus::InvalidArgument);
}

#[test]
fn null_pointers_and_errors() {
    assert_eq!(unsafe { sps_lambda_new(1e-2, 1e-3, 1.0, 1.0, 0.0, ptr::null_mut()) }, SpsStatus::NullPointer);
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { sps_lambda_new(f64::NAN, 1e-3, 1.0, 1.0, 0.0, &mut h) }, SpsStatus::InvalidArgument);
    let msg = last_error();
    let need = sps_last_error_length();
    assert_eq!(need, msg.len() + 1);
    let mut tiny = [1 as std::ffi::c_char; 4];
    assert_eq!(unsafe { sps_last_error_message(tiny.as_mut_ptr(), 4) }, need);
    assert_eq!(tiny[3], 0);
    let mut x = 0.0;
    assert_eq!(unsafe { sps_steady_state(ptr::null(), &mut x, &mut x, 1) }, SpsStatus::NullPointer);
    assert_eq!(unsafe { sps_scenario_dim(ptr::null()) }, 0);
    unsafe { sps_scenario_free(ptr::null_mut()) };
    assert_eq!(unsafe { sps_wigner_3j(2, 2, 0, 2, -2, 0, &mut x) }, SpsStatus::Ok);
    assert!((x - 1.0 / 3f64.sqrt()).abs() < 1e-15);
    assert_eq!(unsafe { sps_last_error_message(ptr::null_mut(), 0) }, 0);
    let v = unsafe { CStr::from_ptr(sps_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_is_valid_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/sps.h");
    let text = std::fs::read_to_string(header).unwrap();
    for f in ["sps_steady_state", "sps_last_error_message", "SPS_STATUS_NUMERICAL", "typedef struct SpsScenario"] {
        assert!(text.contains(f), "{f}");
    }
    let Ok(o) = std::process::Command::new("cc").args(["-fsyntax-only", "-std=c99", "-x", "c", header]).output() else {
        eprintln!("cc not found; skipping compile check");
        return;
    };
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

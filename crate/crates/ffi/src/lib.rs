//! C interface to `sps-core`.
//!
//! Models are built into opaque [`SpsScenario`] handles and released with
//! [`sps_scenario_free`]. Every fallible function returns an [`SpsStatus`];
//! on failure a description is kept per thread and can be copied out with
//! [`sps_last_error_message`]. Angular momenta are passed as twice their
//! value (`2j`), so half-integers stay exact.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sps_core::atomic::{wigner_3j, HalfInt, HyperfineSpec};
use sps_core::config::ModelSetting;
use sps_core::correl::{detector_g2_zero, emission_spectrum_with, g2_emitter_with, Stationary};
use sps_core::models::{DetectorParams, LambdaParams};
use sps_core::setup::{Channel, Scenario};
use sps_core::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// A solver failed or a quantity did not converge.
    Numerical = 3,
    /// The output buffer length does not match.
    BufferSize = 4,
    /// Internal panic caught at the boundary.
    Internal = 5,
}

/// Observed channel of a hyperfine model.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub enum SpsChannelKind {
    /// Single transition `|F_g, m_g⟩ ← |F_e, m_e⟩`.
    Transition = 0,
    /// All decays emitting polarization `q`.
    Polarization = 1,
}

/// `F_g → F_e` emitter parameters.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SpsHyperfine {
    pub f_g_twice: i32,
    pub f_e_twice: i32,
    pub omega_l: f64,
    pub q_laser: i32,
    pub omega_b: f64,
    pub gamma: f64,
    pub delta_e: f64,
    pub channel: SpsChannelKind,
    /// `2m_g` and `2m_e` for [`SpsChannelKind::Transition`].
    pub m_g_twice: i32,
    pub m_e_twice: i32,
    /// Polarization for [`SpsChannelKind::Polarization`].
    pub q: i32,
}

/// Opaque model handle.
pub struct SpsScenario {
    setting: ModelSetting,
    detector: Option<DetectorParams>,
    scenario: Scenario,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: SpsStatus, msg: impl Into<String>) -> SpsStatus {
    set_error(msg.into());
    status
}

fn from_core(e: Error) -> SpsStatus {
    let status = match e {
        Error::NoStationaryState { .. }
        | Error::DegenerateKernel { .. }
        | Error::EigenFailure
        | Error::SingularResolvent { .. }
        | Error::NotConverged(_)
        | Error::ZeroPopulation(_) => SpsStatus::Numerical,
        _ => SpsStatus::InvalidArgument,
    };
    fail(status, e.to_string())
}

/// Runs `f`, mapping panics to [`SpsStatus::Internal`].
fn guard(f: impl FnOnce() -> SpsStatus) -> SpsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(SpsStatus::Internal, "panic inside sps"))
}

fn boxed(setting: ModelSetting, detector: Option<DetectorParams>) -> Result<*mut SpsScenario, SpsStatus> {
    let scenario = setting.scenario(detector.as_ref()).map_err(from_core)?;
    Ok(Box::into_raw(Box::new(SpsScenario { setting, detector, scenario })))
}

/// Builds a handle and stores it in `*out`.
fn make(out: *mut *mut SpsScenario, build: impl FnOnce() -> Result<*mut SpsScenario, SpsStatus>) -> SpsStatus {
    if out.is_null() {
        return fail(SpsStatus::NullPointer, "output handle pointer is null");
    }
    guard(|| match build() {
        Ok(h) => {
            // SAFETY: `out` is non-null and the caller provides a writable slot.
            unsafe { *out = h };
            SpsStatus::Ok
        }
        Err(s) => s,
    })
}

/// Length of the message of the last failure on this thread, including the
/// terminating NUL; 0 when there is none.
#[no_mangle]
pub extern "C" fn sps_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(0, |c| c.as_bytes_with_nul().len()))
}

/// Copies the last failure message into `buf` (NUL-terminated, truncated to
/// `len`). Returns the full length including the NUL, or 0 if there is none.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn sps_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            // SAFETY: `buf` holds at least `len >= n` bytes.
            unsafe {
                ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n - 1) = 0;
            }
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sps_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Λ emitter observed on its `e → a` transition.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn sps_lambda_new(
    omega: f64,
    omega_r: f64,
    gamma1: f64,
    gamma2: f64,
    delta_e: f64,
    out: *mut *mut SpsScenario,
) -> SpsStatus {
    make(out, || boxed(ModelSetting::Lambda(LambdaParams { omega, omega_r, gamma1, gamma2, delta_e }), None))
}

/// `F_g = 1 → F_e = 0` emitter with laser coupling `v_eg`, observed on
/// `|1, m_g⟩ ← |0, 0⟩`.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn sps_rb87_new(v_eg: f64, omega_b: f64, m_g: i32, out: *mut *mut SpsScenario) -> SpsStatus {
    make(out, || {
        let spec = HyperfineSpec::rb87(v_eg, omega_b);
        let channel = Channel::Transition { m_g: HalfInt::int(m_g), m_e: HalfInt::ZERO };
        boxed(ModelSetting::Hyperfine { spec, channel }, None)
    })
}

/// General hyperfine emitter.
///
/// # Safety
/// `spec` must point to a valid [`SpsHyperfine`]; `out` to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn sps_hyperfine_new(spec: *const SpsHyperfine, out: *mut *mut SpsScenario) -> SpsStatus {
    if spec.is_null() {
        return fail(SpsStatus::NullPointer, "spec is null");
    }
    // SAFETY: checked non-null; caller guarantees validity.
    let s = unsafe { *spec };
    make(out, || {
        let hs = HyperfineSpec {
            f_g: HalfInt::from_twice(s.f_g_twice),
            f_e: HalfInt::from_twice(s.f_e_twice),
            omega_l: s.omega_l,
            q_laser: s.q_laser,
            omega_b: s.omega_b,
            gamma: s.gamma,
            delta_e: s.delta_e,
        };
        let channel = match s.channel {
            SpsChannelKind::Transition => {
                Channel::Transition { m_g: HalfInt::from_twice(s.m_g_twice), m_e: HalfInt::from_twice(s.m_e_twice) }
            }
            SpsChannelKind::Polarization => Channel::Polarization(s.q),
        };
        boxed(ModelSetting::Hyperfine { spec: hs, channel }, None)
    })
}

/// New handle: `base` with a detector mode on its observed channel.
///
/// # Safety
/// `base` must be a live handle; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn sps_scenario_with_detector(
    base: *const SpsScenario,
    g: f64,
    kappa: f64,
    delta_s: f64,
    n_max: u32,
    out: *mut *mut SpsScenario,
) -> SpsStatus {
    // SAFETY: caller guarantees `base` is null or live.
    let Some(b) = (unsafe { base.as_ref() }) else {
        return fail(SpsStatus::NullPointer, "base handle is null");
    };
    make(out, || {
        let d = DetectorParams { g, kappa, delta_s, n_max: n_max as usize };
        d.validate().map_err(from_core)?;
        boxed(b.setting.clone(), Some(d))
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `h` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sps_scenario_free(h: *mut SpsScenario) {
    if !h.is_null() {
        // SAFETY: `h` came from `Box::into_raw` in this crate.
        drop(unsafe { Box::from_raw(h) });
    }
}

/// Hilbert-space dimension of the model (emitter times detector levels).
///
/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sps_scenario_dim(h: *const SpsScenario) -> usize {
    // SAFETY: caller guarantees `h` is null or live.
    unsafe { h.as_ref() }.map_or(0, |s| s.scenario.model.dim())
}

unsafe fn scenario<'a>(h: *const SpsScenario) -> Result<&'a SpsScenario, SpsStatus> {
    // SAFETY: forwarded caller guarantee.
    unsafe { h.as_ref() }.ok_or_else(|| fail(SpsStatus::NullPointer, "handle is null"))
}

unsafe fn input<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], SpsStatus> {
    if p.is_null() {
        return Err(fail(SpsStatus::NullPointer, format!("{what} is null")));
    }
    // SAFETY: caller guarantees `n` readable values.
    Ok(unsafe { std::slice::from_raw_parts(p, n) })
}

unsafe fn output<'a>(p: *mut f64, n: usize, what: &str) -> Result<&'a mut [f64], SpsStatus> {
    if p.is_null() {
        return Err(fail(SpsStatus::NullPointer, format!("{what} is null")));
    }
    // SAFETY: caller guarantees `n` writable values.
    Ok(unsafe { std::slice::from_raw_parts_mut(p, n) })
}

fn finish(r: Result<(), SpsStatus>) -> SpsStatus {
    r.err().unwrap_or(SpsStatus::Ok)
}

/// Steady-state density matrix, column-major, into `re` and `im`, each of
/// length `len = dim²`.
///
/// # Safety
/// `h` must be a live handle; `re`/`im` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn sps_steady_state(h: *const SpsScenario, re: *mut f64, im: *mut f64, len: usize) -> SpsStatus {
    guard(|| {
        finish((|| {
            let s = unsafe { scenario(h) }?;
            let d = s.scenario.model.dim();
            if len != d * d {
                return Err(fail(SpsStatus::BufferSize, format!("need {} values, got {len}", d * d)));
            }
            let (re, im) = unsafe { (output(re, len, "re")?, output(im, len, "im")?) };
            let st = Stationary::new(&s.scenario.model).map_err(from_core)?;
            for (k, z) in st.state().matrix().iter().enumerate() {
                re[k] = z.re;
                im[k] = z.im;
            }
            Ok(())
        })())
    })
}

/// Incoherent spectrum of the observed channel at `n` frequencies; the
/// coherent weight goes to `coherent_weight` when it is non-null.
///
/// # Safety
/// `h` must be a live handle; `omegas` and `out` must hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn sps_emission_spectrum(
    h: *const SpsScenario,
    omegas: *const f64,
    n: usize,
    out: *mut f64,
    coherent_weight: *mut f64,
) -> SpsStatus {
    guard(|| {
        finish((|| {
            let s = unsafe { scenario(h) }?;
            let (w, o) = unsafe { (input(omegas, n, "omegas")?, output(out, n, "out")?) };
            let st = Stationary::new(&s.scenario.model).map_err(from_core)?;
            let r = emission_spectrum_with(&st, &s.scenario.lowering, w).map_err(from_core)?;
            o.copy_from_slice(&r.incoherent);
            if !coherent_weight.is_null() {
                // SAFETY: non-null output scalar.
                unsafe { *coherent_weight = r.coherent_weight };
            }
            Ok(())
        })())
    })
}

/// Normalized `g²(τ)` of the observed channel; `taus` must start at 0 and
/// increase strictly.
///
/// # Safety
/// `h` must be a live handle; `taus` and `out` must hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn sps_g2(h: *const SpsScenario, taus: *const f64, n: usize, out: *mut f64) -> SpsStatus {
    guard(|| {
        finish((|| {
            let s = unsafe { scenario(h) }?;
            let (t, o) = unsafe { (input(taus, n, "taus")?, output(out, n, "out")?) };
            let st = Stationary::new(&s.scenario.model).map_err(from_core)?;
            let trace = g2_emitter_with(&st, &s.scenario.lowering, t).map_err(from_core)?;
            o.copy_from_slice(&trace.real_values());
            Ok(())
        })())
    })
}

/// Zero-delay `g²` of the detector mode of a handle built with
/// [`sps_scenario_with_detector`].
///
/// # Safety
/// `h` must be a live handle; `out` a writable value.
#[no_mangle]
pub unsafe extern "C" fn sps_detector_g2_zero(h: *const SpsScenario, out: *mut f64) -> SpsStatus {
    guard(|| {
        finish((|| {
            let s = unsafe { scenario(h) }?;
            let o = unsafe { output(out, 1, "out")? };
            let (Some(slot), Some(_)) = (s.scenario.detector_slot, s.detector) else {
                return Err(fail(SpsStatus::InvalidArgument, "handle has no detector mode"));
            };
            o[0] = detector_g2_zero(&s.scenario.model, slot).map_err(from_core)?;
            Ok(())
        })())
    })
}

/// Wigner 3-j symbol with every argument given as twice its value.
///
/// # Safety
/// `out` must be a writable value.
#[no_mangle]
pub unsafe extern "C" fn sps_wigner_3j(
    j1_twice: i32,
    j2_twice: i32,
    j3_twice: i32,
    m1_twice: i32,
    m2_twice: i32,
    m3_twice: i32,
    out: *mut f64,
) -> SpsStatus {
    guard(|| {
        finish((|| {
            let o = unsafe { output(out, 1, "out")? };
            let h = HalfInt::from_twice;
            o[0] = wigner_3j(h(j1_twice), h(j2_twice), h(j3_twice), h(m1_twice), h(m2_twice), h(m3_twice))
                .map_err(from_core)?;
            Ok(())
        })())
    })
}

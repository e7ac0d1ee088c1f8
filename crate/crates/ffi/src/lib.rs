//! C ABI for pulseforge.
//!
//! Objects cross the boundary as opaque handles created by the constructor calls
//! and released with the matching `pf_*_free`. Every fallible call
//! returns a [`PfStatus`]; on failure the message is kept per thread and can be
//! read with [`pf_last_error`]. Strings returned by the library are released with
//! [`pf_string_free`]. Panics never unwind into the caller.

use std::cell::RefCell;
use std::ffi::{CStr, CString, c_char};
use std::f64::consts::PI;
use std::panic::{AssertUnwindSafe, catch_unwind};

use pulseforge::calibration::{CalibrationConfig, full_calibration};
use pulseforge::cli::{self, CALIBRATED_SCHEMA, CalibratedDocument, MODEL_SCHEMA, ModelDocument, PULSE_SCHEMA, PulseDocument};
use pulseforge::distortion::{DistortionModel, apply_distortion, predistort_waveform};
use pulseforge::envelopes::{DragConfig, DragVariant, EnvelopeSpec, SampledWaveform, sample_waveform};
use pulseforge::fast_synth::{fast_envelope_spec, solve_fast};
use pulseforge::hd_drag::{HdProblem, hd_envelope_spec, solve_hd};
use pulseforge::simulator::{CalibratedPulse, TransmonModel, gate_error_cardinal};
use pulseforge::Error;

/// Result of every fallible call. Values 2 and 3 match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PfStatus {
    Ok = 0,
    NullPointer = 1,
    Config = 2,
    Numeric = 3,
    InvalidUtf8 = 4,
    Panic = 5,
}

/// DRAG variant selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PfVariant {
    DragL = 0,
    DragP = 1,
    NoDrag = 2,
}

impl From<PfVariant> for DragVariant {
    fn from(v: PfVariant) -> Self {
        match v {
            PfVariant::DragL => DragVariant::DragL,
            PfVariant::DragP => DragVariant::DragP,
            PfVariant::NoDrag => DragVariant::NoDrag,
        }
    }
}

/// Transmon model handle.
pub struct PfModel(TransmonModel);

/// Uncalibrated pulse handle: envelope and DRAG setting.
pub struct PfPulse(PulseDocument);

/// Calibrated native π/2 pulse handle.
pub struct PfCalibrated(CalibratedPulse);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PfStatus {
    match e.exit_code() {
        2 => PfStatus::Config,
        _ => PfStatus::Numeric,
    }
}

/// Runs `f`, recording errors and converting panics.
fn guard(f: impl FnOnce() -> Result<(), PfStatus>) -> PfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PfStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            PfStatus::Panic
        }
    }
}

fn lib<T>(r: pulseforge::Result<T>) -> Result<T, PfStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

fn null(what: &str) -> PfStatus {
    set_error(format!("{what} is null"));
    PfStatus::NullPointer
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, PfStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: the caller promises a NUL-terminated string that outlives the call.
    unsafe { CStr::from_ptr(p) }.to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        PfStatus::InvalidUtf8
    })
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    // SAFETY: checked non-null by every caller.
    unsafe { *out = Box::into_raw(Box::new(value)) };
}

fn json_string<T: serde::Serialize>(value: &T, out: *mut *mut c_char) -> Result<(), PfStatus> {
    let text = lib(serde_json::to_string_pretty(value).map_err(Error::from))?;
    let c = CString::new(text).map_err(|_| {
        set_error("JSON contains a NUL byte".into());
        PfStatus::Numeric
    })?;
    // SAFETY: checked non-null by every caller.
    unsafe { *out = c.into_raw() };
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[unsafe(no_mangle)]
pub extern "C" fn pf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (truncated, always NUL-terminated).
///
/// Returns the full message length in bytes, excluding the terminator; 0 when there is none.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn pf_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            if !buf.is_null() && len > 0 {
                // SAFETY: `buf` has at least one writable byte.
                unsafe { *buf = 0 };
            }
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            // SAFETY: `n < len` bytes plus the terminator fit in `buf`.
            unsafe {
                std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n) = 0;
            }
        }
        bytes.len()
    })
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a pointer obtained from this library that was not freed yet.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn pf_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: produced by `CString::into_raw`.
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Reference transmon model (4 levels, α/2π = −212 MHz, T1 = 35 μs, T_φ = 40 μs, n̄ = 0.02).
///
/// # Safety
/// `out` must point to writable storage for one pointer.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn pf_model_default(out: *mut *mut PfModel) -> PfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        unsafe { put(out, PfModel(TransmonModel::default())) };
        Ok(())
    })
}

/// Parses a model document (`{"schema": "pulseforge.model/1", "model": {...}}`).
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must point to writable storage for one pointer.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn pf_model_from_json(json: *const c_char, out: *mut *mut PfModel) -> PfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = unsafe { str_arg(json, "json") }?;
        let doc: ModelDocument = lib(serde_json::from_str(text).map_err(|e| Error::config(e.to_string())))?;
        lib(cli::check_schema(&doc.schema, MODEL_SCHEMA))?;
        lib(doc.model.validate())?;
        unsafe { put(out, PfModel(doc.model)) };
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from this library that was not freed yet.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn pf_model_free(model: *mut PfModel) {
    if !model.is_null() {
        // SAFETY: produced by `Box::into_raw`.
        drop(unsafe { Box::from_raw(model) });
    }
}

fn make_drag(alpha_hz: f64, variant: PfVariant) -> DragConfig {
    let v: DragVariant = variant.into();
    DragConfig::new(CalibrationConfig::for_variant(v).initial_beta(), 2.0 * PI * alpha_hz, v)
}

fn finish_pulse(envelope: EnvelopeSpec, drag: DragConfig) -> pulseforge::Result<PulseDocument> {
    envelope.validate()?;
    drag.validate()?;
    Ok(PulseDocument { schema: PULSE_SCHEMA.into(), envelope, drag, problem: None, solution: None, hd: None, heuristic: None })
}

/// Raised-cosine pulse of duration `t_p` (s) for rotation `theta` (rad); `alpha_hz` is α/2π.
///
/// # Safety
/// `out` must point to writable storage for one pointer.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn pf_pulse_cosine(t_p: f64, theta: f64, alpha_hz: f64, variant: PfVariant, out: *mut *mut PfPulse) -> PfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let doc = lib(finish_pulse(EnvelopeSpec::cosine(t_p, theta), make_drag(alpha_hz, variant)))?;
        unsafe { put(out, PfPulse(doc)) };
        Ok(())
    })
}

/// FAST pulse with bands from the anharmonicity heuristic.
///
/// # Safety
/// `out` must point to writable storage for one pointer.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn pf_pulse_fast_heuristic(
    t_p: f64,
    theta: f64,
    alpha_hz: f64,
    variant: PfVariant,
    out: *mut *mut PfPulse,
) -> PfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let drag = make_drag(alpha_hz, variant);
        let (h, problem) = lib(cli::experiment::fast_problem(drag.alpha, drag.variant, theta, t_p, (None, None, None, None, None)))?;
        let sol = lib(solve_fast(&problem))?;
        let mut doc = lib(finish_pulse(fast_envelope_spec(&sol, &problem), drag))?;
        doc.heuristic = Some(h);
        doc.problem = Some(problem);
        doc.solution = Some(sol);
        unsafe { put(out, PfPulse(doc)) };
        Ok(())
    })
}

/// HD DRAG pulse with a `k`-fold spectral zero at |α|/2π.
///
/// # Safety
/// `out` must point to writable storage for one pointer.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn pf_pulse_hd(t_p: f64, theta: f64, alpha_hz: f64, k: usize, variant: PfVariant, out: *mut *mut PfPulse) -> PfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let problem = HdProblem { k, suppressed_freqs: vec![alpha_hz.abs(); k], duration: t_p };
        let sol = lib(solve_hd(&problem))?;
        let env = lib(cli::experiment::with_area_amplitude(hd_envelope_spec(&sol, 1.0, t_p), theta))?;
        let mut doc = lib(finish_pulse(env, make_drag(alpha_hz, variant)))?;
        doc.hd = Some(sol);
        unsafe { put(out, PfPulse(doc)) };
        Ok(())
    })
}

/// Parses a pulse document as written by `pulseforge synth`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must point to writable storage for one pointer.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn pf_pulse_from_json(json: *const c_char, out: *mut *mut PfPulse) -> PfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = unsafe { str_arg(json, "json") }?;
        let doc: PulseDocument = lib(serde_json::from_str(text).map_err(|e| Error::config(e.to_string())))?;
        lib(cli::check_schema(&doc.schema, PULSE_SCHEMA))?;
        let doc = lib(finish_pulse(doc.envelope.clone(), doc.drag).map(|_| doc))?;
        unsafe { put(out, PfPulse(doc)) };
        Ok(())
    })
}

/// Serialises a pulse; release the string with [`pf_string_free`].
///
/// # Safety
/// `pulse` must be a live handle; `out` must point to writable storage for one pointer.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn pf_pulse_to_json(pulse: *const PfPulse, out: *mut *mut c_char) -> PfStatus {
    guard(|| {
        if pulse.is_null() || out.is_null() {
            return Err(null("pulse or out"));
        }
        json_string(unsafe { &(*pulse).0 }, out)
    })
}

/// Number of samples produced by [`pf_pulse_sample`] at interval `dt`.
///
/// # Safety
/// `pulse` must be a live handle; `len` must be writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn pf_pulse_sample_len(pulse: *const PfPulse, dt: f64, len: *mut usize) -> PfStatus {
    guard(|| {
        if pulse.is_null() || len.is_null() {
            return Err(null("pulse or len"));
        }
        let p = unsafe { &(*pulse).0 };
        let w = lib(sample_waveform(&p.envelope, &p.drag, dt))?;
        unsafe { *len = w.len() };
        Ok(())
    })
}

/// Samples Ω_I and Ω_Q (rad/s) at interval `dt` into caller buffers of length `len`.
///
/// `len` must equal the value reported by [`pf_pulse_sample_len`].
///
/// # Safety
/// `pulse` must be a live handle; `i_out` and `q_out` must hold `len` doubles.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn pf_pulse_sample(pulse: *const PfPulse, dt: f64, i_out: *mut f64, q_out: *mut f64, len: usize) -> PfStatus {
    guard(|| {
        if pulse.is_null() || i_out.is_null() || q_out.is_null() {
            return Err(null("pulse or output buffer"));
        }
        let p = unsafe { &(*pulse).0 };
        let w = lib(sample_waveform(&p.envelope, &p.drag, dt))?;
        if w.len() != len {
            set_error(format!("buffer holds {len} samples but the waveform has {}", w.len()));
            return Err(PfStatus::Config);
        }
        unsafe {
            std::ptr::copy_nonoverlapping(w.i_samples.as_ptr(), i_out, len);
            std::ptr::copy_nonoverlapping(w.q_samples.as_ptr(), q_out, len);
        }
        Ok(())
    })
}

/// # Safety
/// `pulse` must be null or a handle from this library that was not freed yet.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn pf_pulse_free(pulse: *mut PfPulse) {
    if !pulse.is_null() {
        // SAFETY: produced by `Box::into_raw`.
        drop(unsafe { Box::from_raw(pulse) });
    }
}

/// Runs the simulated calibration flow (variant taken from the pulse) with the given seed.
///
/// # Safety
/// `model` and `pulse` must be live handles; `out` must point to writable storage for one pointer.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn pf_calibrate(model: *const PfModel, pulse: *const PfPulse, seed: u64, out: *mut *mut PfCalibrated) -> PfStatus {
    guard(|| {
        if model.is_null() || pulse.is_null() || out.is_null() {
            return Err(null("model, pulse or out"));
        }
        let (m, p) = unsafe { (&(*model).0, &(*pulse).0) };
        let cfg = CalibrationConfig { seed, ..CalibrationConfig::for_variant(p.drag.variant) };
        let report = lib(full_calibration(m, &p.envelope, &cfg))?;
        unsafe { put(out, PfCalibrated(report.pulse)) };
        Ok(())
    })
}

/// Parses a calibrated-pulse document as written by `pulseforge calibrate`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must point to writable storage for one pointer.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn pf_calibrated_from_json(json: *const c_char, out: *mut *mut PfCalibrated) -> PfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = unsafe { str_arg(json, "json") }?;
        let doc: CalibratedDocument = lib(serde_json::from_str(text).map_err(|e| Error::config(e.to_string())))?;
        lib(cli::check_schema(&doc.schema, CALIBRATED_SCHEMA))?;
        lib(doc.pulse.validate())?;
        unsafe { put(out, PfCalibrated(doc.pulse)) };
        Ok(())
    })
}

/// Serialises a calibrated pulse as a calibrated-pulse document.
///
/// # Safety
/// `pulse` must be a live handle; `out` must point to writable storage for one pointer.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn pf_calibrated_to_json(pulse: *const PfCalibrated, out: *mut *mut c_char) -> PfStatus {
    guard(|| {
        if pulse.is_null() || out.is_null() {
            return Err(null("pulse or out"));
        }
        let doc = CalibratedDocument { schema: CALIBRATED_SCHEMA.into(), pulse: unsafe { (*pulse).0.clone() }, steps: Vec::new() };
        json_string(&doc, out)
    })
}

/// Calibrated amplitude, β, drive frequency (Hz) and virtual-Z phase (rad); null outputs are skipped.
///
/// # Safety
/// `pulse` must be a live handle; non-null outputs must be writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn pf_calibrated_parameters(
    pulse: *const PfCalibrated,
    amplitude: *mut f64,
    beta: *mut f64,
    drive_freq: *mut f64,
    virtual_z: *mut f64,
) -> PfStatus {
    guard(|| {
        if pulse.is_null() {
            return Err(null("pulse"));
        }
        let c = unsafe { (*pulse).0.calib };
        for (ptr, v) in [(amplitude, c.amplitude), (beta, c.beta), (drive_freq, c.drive_freq), (virtual_z, c.virtual_z)] {
            if !ptr.is_null() {
                unsafe { *ptr = v };
            }
        }
        Ok(())
    })
}

/// Cardinal-state average error and leakage of one gate, integrated with `steps` steps per pulse.
///
/// # Safety
/// `model` and `pulse` must be live handles; `error` and `leakage` must be writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn pf_gate_metrics(
    model: *const PfModel,
    pulse: *const PfCalibrated,
    steps: usize,
    error: *mut f64,
    leakage: *mut f64,
) -> PfStatus {
    guard(|| {
        if model.is_null() || pulse.is_null() || error.is_null() || leakage.is_null() {
            return Err(null("model, pulse or output"));
        }
        if steps == 0 {
            set_error("steps must be positive".into());
            return Err(PfStatus::Config);
        }
        let m = lib(gate_error_cardinal(unsafe { &(*model).0 }, unsafe { &(*pulse).0 }, steps))?;
        unsafe {
            *error = m.error;
            *leakage = m.leakage;
        }
        Ok(())
    })
}

/// # Safety
/// `pulse` must be null or a handle from this library that was not freed yet.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn pf_calibrated_free(pulse: *mut PfCalibrated) {
    if !pulse.is_null() {
        // SAFETY: produced by `Box::into_raw`.
        drop(unsafe { Box::from_raw(pulse) });
    }
}

unsafe fn distortion_io(
    i_in: *const f64,
    q_in: *const f64,
    len: usize,
    dt: f64,
    a: f64,
    tau: f64,
    i_out: *mut f64,
    q_out: *mut f64,
    f: impl FnOnce(&SampledWaveform, &DistortionModel) -> pulseforge::Result<SampledWaveform>,
) -> Result<(), PfStatus> {
    if i_in.is_null() || q_in.is_null() || i_out.is_null() || q_out.is_null() {
        return Err(null("sample buffer"));
    }
    let (i, q) = unsafe { (std::slice::from_raw_parts(i_in, len).to_vec(), std::slice::from_raw_parts(q_in, len).to_vec()) };
    let w = lib(SampledWaveform::new(dt, i, q))?;
    let model = DistortionModel::intra(a, tau);
    let r = lib(f(&w, &model))?;
    unsafe {
        std::ptr::copy_nonoverlapping(r.i_samples.as_ptr(), i_out, len);
        std::ptr::copy_nonoverlapping(r.q_samples.as_ptr(), q_out, len);
    }
    Ok(())
}

/// Passes `len` I/Q samples through a single-term intra-quadrature line `1 + a e^{−t/τ}`.
///
/// # Safety
/// Input and output buffers must hold `len` doubles; outputs may alias inputs.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn pf_distort_intra(
    i_in: *const f64,
    q_in: *const f64,
    len: usize,
    dt: f64,
    a: f64,
    tau: f64,
    i_out: *mut f64,
    q_out: *mut f64,
) -> PfStatus {
    guard(|| unsafe { distortion_io(i_in, q_in, len, dt, a, tau, i_out, q_out, |w, m| apply_distortion(w, m).map(|d| d.waveform)) })
}

/// Predistorts `len` I/Q samples for a single-term intra-quadrature line `1 + a e^{−t/τ}`.
///
/// # Safety
/// Input and output buffers must hold `len` doubles; outputs may alias inputs.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn pf_predistort_intra(
    i_in: *const f64,
    q_in: *const f64,
    len: usize,
    dt: f64,
    a: f64,
    tau: f64,
    i_out: *mut f64,
    q_out: *mut f64,
) -> PfStatus {
    guard(|| unsafe { distortion_io(i_in, q_in, len, dt, a, tau, i_out, q_out, predistort_waveform) })
}

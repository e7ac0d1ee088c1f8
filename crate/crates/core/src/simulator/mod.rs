//! Open-system simulation of a driven transmon in the frame rotating at ω_q.
//!
//! ```text
//! H = (α/2) a†a†aa + ½ { a† e^{−iΔt} (Ω̃_I + iΩ̃_Q) + a e^{iΔt} (Ω̃_I − iΩ̃_Q) }
//! Ω̃_I =  Ω_I cos φ + Ω_Q sin φ
//! Ω̃_Q = −Ω_I sin φ + Ω_Q cos φ
//! dρ/dt = −i[H, ρ] + Σ_k ( L_k ρ L_k† − ½{L_k† L_k, ρ} )
//! L₋ = √((1 + n̄)/T1) a,   L₊ = √(n̄/T1) a†,   L_φ = a†a / √T_φ
//! ```
//!
//! The drive phase φ enters only as `e^{−iφ}` on the `a†` coefficient, so a pulse
//! at phase φ equals the phase-zero pulse conjugated by `U_φ = exp(−iφ a†a)`.
//! Gate sequences use this to reuse one pulse propagator for every axis and
//! for virtual Z updates.

pub(crate) mod lindblad;

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use crate::envelopes::{DragConfig, EnvelopeSpec, SampledWaveform, apply_drag};
use crate::error::{Error, Result};
use lindblad::{Kernel, drive_coefficient, expm, free_generator, integrate_batch};

/// Default RK4 steps per pulse duration.
pub const DEFAULT_STEPS_PER_PULSE: usize = 2048;
/// Delay inserted after every pulse.
pub const DEFAULT_DELAY: f64 = 0.41e-9;

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() { s.serialize_f64(*v) } else { s.serialize_none() }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmonModel {
    /// Qubit frequency ω_q in rad/s.
    pub omega_q: f64,
    /// Anharmonicity α in rad/s.
    pub alpha: f64,
    /// Energy relaxation time in seconds; `null` in JSON means no relaxation.
    #[serde(with = "infinite_as_null")]
    pub t1: f64,
    /// Pure dephasing time in seconds; `null` in JSON means no dephasing.
    #[serde(with = "infinite_as_null")]
    pub t_phi: f64,
    pub n_bar: f64,
    pub levels: usize,
}

impl Default for TransmonModel {
    fn default() -> Self {
        Self {
            omega_q: 2.0 * PI * 4.417e9,
            alpha: -2.0 * PI * 212e6,
            t1: 35e-6,
            t_phi: 40e-6,
            n_bar: 0.02,
            levels: 4,
        }
    }
}

impl TransmonModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.t1 > 0.0) || !(self.t_phi > 0.0) {
            return Err(Error::config("T1 and T_phi must be positive"));
        }
        if !(0.0..1.0).contains(&self.n_bar) {
            return Err(Error::config("n_bar must lie in [0, 1)"));
        }
        if !(2..=5).contains(&self.levels) {
            return Err(Error::config(format!("levels must be 2..=5, got {}", self.levels)));
        }
        if !self.alpha.is_finite() || !self.omega_q.is_finite() {
            return Err(Error::config("frequencies must be finite"));
        }
        Ok(())
    }

    /// Same model without relaxation, excitation or dephasing.
    pub fn closed(&self) -> Self {
        Self { t1: f64::INFINITY, t_phi: f64::INFINITY, n_bar: 0.0, ..*self }
    }

    pub fn with_levels(&self, levels: usize) -> Self {
        Self { levels, ..*self }
    }
}

/// Density operator stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub dim: usize,
    pub data: Vec<C>,
}

impl DensityMatrix {
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut data = vec![C::new(0.0, 0.0); dim * dim];
        data[k * dim + k] = C::new(1.0, 0.0);
        Self { dim, data }
    }

    pub fn ground(dim: usize) -> Self {
        Self::basis(dim, 0)
    }

    pub fn pure(psi: &[C]) -> Self {
        let dim = psi.len();
        let mut data = vec![C::new(0.0, 0.0); dim * dim];
        for j in 0..dim {
            for k in 0..dim {
                data[j * dim + k] = psi[j] * psi[k].conj();
            }
        }
        Self { dim, data }
    }

    /// Embeds a qubit state vector into `dim` levels.
    pub fn qubit(dim: usize, a0: C, a1: C) -> Self {
        let mut psi = vec![C::new(0.0, 0.0); dim];
        psi[0] = a0;
        psi[1] = a1;
        Self::pure(&psi)
    }

    pub fn get(&self, j: usize, k: usize) -> C {
        self.data[j * self.dim + k]
    }

    pub fn trace(&self) -> C {
        (0..self.dim).map(|j| self.get(j, j)).sum()
    }

    pub fn population(&self, k: usize) -> f64 {
        self.get(k, k).re
    }

    /// Population outside the two lowest levels.
    pub fn leaked(&self) -> f64 {
        (2..self.dim).map(|k| self.population(k)).sum()
    }

    /// ⟨ψ|ρ|ψ⟩ for a state given in the full space.
    pub fn expectation(&self, psi: &[C]) -> f64 {
        let d = self.dim;
        let mut acc = C::new(0.0, 0.0);
        for j in 0..d {
            for k in 0..d {
                acc += psi[j].conj() * self.data[j * d + k] * psi[k];
            }
        }
        acc.re
    }

    pub fn to_matrix(&self) -> DMatrix<C> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim;
        let mut e: f64 = 0.0;
        for j in 0..d {
            for k in 0..d {
                e = e.max((self.data[j * d + k] - self.data[k * d + j].conj()).norm());
            }
        }
        e
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let m = self.to_matrix();
        let herm = (&m + m.adjoint()) * C::new(0.5, 0.0);
        herm.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Checks Hermiticity (1e-10), unit trace (1e-9) and positivity (−1e-9).
    pub fn check(&self) -> std::result::Result<(), String> {
        let h = self.hermiticity_error();
        if h > 1e-10 {
            return Err(format!("Hermiticity error {h:.3e}"));
        }
        let t = (self.trace() - C::new(1.0, 0.0)).norm();
        if t > 1e-9 {
            return Err(format!("trace error {t:.3e}"));
        }
        let m = self.min_eigenvalue();
        if m < -1e-9 {
            return Err(format!("negative eigenvalue {m:.3e}"));
        }
        Ok(())
    }

    /// Trace distance ½‖ρ − σ‖₁.
    pub fn trace_distance(&self, other: &DensityMatrix) -> f64 {
        let diff = self.to_matrix() - other.to_matrix();
        let herm = (&diff + diff.adjoint()) * C::new(0.5, 0.0);
        0.5 * herm.symmetric_eigenvalues().iter().map(|v| v.abs()).sum::<f64>()
    }

    /// Applies `U_φ ρ U_φ†` with `U_φ = exp(−iφ a†a)`.
    pub fn rotate_frame(&mut self, phi: f64) {
        if phi == 0.0 {
            return;
        }
        let d = self.dim;
        for j in 0..d {
            for k in 0..d {
                self.data[j * d + k] *= C::from_polar(1.0, -phi * (j as f64 - k as f64));
            }
        }
    }

    /// Purity `2 tr(ρ̂²) − 1` of the renormalised qubit block.
    pub fn normalized_qubit_purity(&self) -> f64 {
        let p = self.population(0) + self.population(1);
        if p <= 0.0 {
            return 0.0;
        }
        let (a, b, c) = (self.get(0, 0).re / p, self.get(1, 1).re / p, self.get(0, 1).norm() / p);
        2.0 * (a * a + b * b + 2.0 * c * c) - 1.0
    }
}

/// Linear map on row-major vec(ρ).
#[derive(Debug, Clone, PartialEq)]
pub struct Superop {
    pub dim: usize,
    pub m: Vec<C>,
}

impl Superop {
    pub fn identity(dim: usize) -> Self {
        let n = dim * dim;
        let mut m = vec![C::new(0.0, 0.0); n * n];
        for i in 0..n {
            m[i * n + i] = C::new(1.0, 0.0);
        }
        Self { dim, m }
    }

    /// `ρ ↦ U ρ U†` for a row-major unitary.
    pub fn from_unitary(dim: usize, u: &[C]) -> Self {
        let n = dim * dim;
        let mut m = vec![C::new(0.0, 0.0); n * n];
        for j in 0..dim {
            for k in 0..dim {
                for a in 0..dim {
                    for b in 0..dim {
                        m[(j * dim + k) * n + a * dim + b] = u[j * dim + a] * u[k * dim + b].conj();
                    }
                }
            }
        }
        Self { dim, m }
    }

    pub fn apply(&self, rho: &DensityMatrix) -> DensityMatrix {
        let n = self.dim * self.dim;
        let mut out = vec![C::new(0.0, 0.0); n];
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.m[i * n..(i + 1) * n];
            *o = row.iter().zip(&rho.data).map(|(a, b)| a * b).sum();
        }
        DensityMatrix { dim: self.dim, data: out }
    }

    /// `self ∘ first` (apply `first`, then `self`).
    pub fn after(&self, first: &Superop) -> Superop {
        Superop { dim: self.dim, m: lindblad::matmul(&self.m, &first.m, self.dim * self.dim) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateCalibration {
    /// Drive amplitude A (scale of the envelope family).
    pub amplitude: f64,
    pub beta: f64,
    /// Drive frequency f_d in Hz.
    pub drive_freq: f64,
    /// Virtual Z phase φ_z in rad, split evenly before and after each pulse.
    pub virtual_z: f64,
    pub t_p: f64,
    pub t_d: f64,
}

impl GateCalibration {
    /// Area-theorem starting point, resonant drive, no virtual Z.
    pub fn initial(model: &TransmonModel, spec: &EnvelopeSpec, drag: &DragConfig) -> Result<Self> {
        Ok(Self {
            amplitude: spec.area_theorem_amplitude()?,
            beta: drag.beta,
            drive_freq: model.omega_q / (2.0 * PI),
            virtual_z: 0.0,
            t_p: spec.duration,
            t_d: DEFAULT_DELAY,
        })
    }

    pub fn gate_time(&self) -> f64 {
        self.t_p + self.t_d
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_d >= 0.0) {
            return Err(Error::config("t_d must be non-negative"));
        }
        if !(self.t_p > 0.0) {
            return Err(Error::config("t_p must be positive"));
        }
        if !self.amplitude.is_finite() || !self.beta.is_finite() || !self.virtual_z.is_finite() {
            return Err(Error::config("calibration parameters must be finite"));
        }
        Ok(())
    }
}

/// Envelope, DRAG setting and calibration of one native π/2 pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibratedPulse {
    pub spec: EnvelopeSpec,
    pub drag: DragConfig,
    pub calib: GateCalibration,
}

impl CalibratedPulse {
    pub fn new(spec: EnvelopeSpec, drag: DragConfig, calib: GateCalibration) -> Result<Self> {
        let p = Self { spec, drag, calib };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.drag.validate()?;
        self.calib.validate()?;
        if ((self.calib.t_p - self.spec.duration) / self.spec.duration).abs() > 1e-12 {
            return Err(Error::config("calibration t_p differs from the envelope duration"));
        }
        Ok(())
    }

    /// Envelope with the calibrated amplitude.
    pub fn effective_spec(&self) -> EnvelopeSpec {
        self.spec.with_amplitude(self.calib.amplitude)
    }

    pub fn effective_drag(&self) -> DragConfig {
        DragConfig { beta: self.calib.beta, ..self.drag }
    }

    /// (Ω_I, Ω_Q) at local pulse time `t`.
    pub fn iq(&self, t: f64) -> (f64, f64) {
        apply_drag(&self.effective_spec(), &self.effective_drag(), t)
    }

    pub fn detuning(&self, model: &TransmonModel) -> f64 {
        2.0 * PI * self.calib.drive_freq - model.omega_q
    }

    pub fn with_calibration(&self, calib: GateCalibration) -> Self {
        Self { calib, ..self.clone() }
    }
}

#[derive(Debug, Clone)]
pub enum GateOp {
    PulseGate(Arc<CalibratedPulse>),
    VirtualZ { phase: f64 },
    Idle { duration: f64 },
}

/// Integration settings for a single drive segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    /// Largest RK4 step in seconds.
    pub max_step: f64,
    pub phase: f64,
    /// ω_d − ω_q in rad/s.
    pub detuning: f64,
    /// Absolute start time, used by the detuning factor.
    pub t0: f64,
    pub check_invariants: bool,
}

impl EvolveOptions {
    pub fn for_pulse(t_p: f64) -> Self {
        Self { max_step: t_p / DEFAULT_STEPS_PER_PULSE as f64, phase: 0.0, detuning: 0.0, t0: 0.0, check_invariants: true }
    }
}

/// Rotating-frame Hamiltonian at time `t` (dense, for inspection and tests).
pub fn build_hamiltonian(model: &TransmonModel, i_env: f64, q_env: f64, phase: f64, detuning: f64, t: f64) -> DMatrix<C> {
    let d = model.levels;
    let mut h = DMatrix::<C>::zeros(d, d);
    for j in 0..d {
        h[(j, j)] = C::new(0.5 * model.alpha * (j * j.saturating_sub(1)) as f64, 0.0);
    }
    let c = drive_coefficient(i_env, q_env, phase, detuning, t);
    for j in 1..d {
        let s = (j as f64).sqrt();
        h[(j, j - 1)] = c * s;
        h[(j - 1, j)] = c.conj() * s;
    }
    h
}

fn sample_coefficients(
    drive: &dyn Fn(f64) -> (f64, f64),
    duration: f64,
    steps: usize,
    phase: f64,
    detuning: f64,
    t0: f64,
) -> Vec<C> {
    let h = duration / steps as f64;
    (0..=2 * steps)
        .map(|m| {
            let tau = 0.5 * h * m as f64;
            let (i, q) = drive(tau);
            drive_coefficient(i, q, phase, detuning, t0 + tau)
        })
        .collect()
}

fn step_count(duration: f64, max_step: f64) -> usize {
    ((duration / max_step) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

/// Integrates the master equation for `duration` with the drive given in local time.
pub fn evolve(
    rho0: &DensityMatrix,
    model: &TransmonModel,
    drive: &dyn Fn(f64) -> (f64, f64),
    duration: f64,
    opts: &EvolveOptions,
) -> Result<DensityMatrix> {
    model.validate()?;
    if rho0.dim != model.levels {
        return Err(Error::config(format!("state has {} levels, model has {}", rho0.dim, model.levels)));
    }
    if !(duration >= 0.0) {
        return Err(Error::config("duration must be non-negative"));
    }
    if duration == 0.0 {
        return Ok(rho0.clone());
    }
    if !(opts.max_step > 0.0) {
        return Err(Error::config("integration step must be positive"));
    }
    let steps = step_count(duration, opts.max_step);
    let kernel = Kernel::new(model);
    let coeffs = sample_coefficients(drive, duration, steps, opts.phase, opts.detuning, opts.t0);
    let mut states = vec![rho0.data.clone()];
    integrate_batch(&kernel, &mut states, &coeffs, duration / steps as f64);
    let out = DensityMatrix { dim: rho0.dim, data: states.pop().unwrap_or_default() };
    if opts.check_invariants {
        if out.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Instability { what: "non-finite state".into(), suggested_step: 0.5 * duration / steps as f64 });
        }
        out.check()
            .map_err(|what| Error::Instability { what, suggested_step: 0.5 * duration / steps as f64 })?;
    }
    Ok(out)
}

/// Propagator of an arbitrary drive segment.
pub fn drive_superop(
    model: &TransmonModel,
    drive: &dyn Fn(f64) -> (f64, f64),
    duration: f64,
    steps: usize,
    phase: f64,
    detuning: f64,
    t0: f64,
) -> Superop {
    let d = model.levels;
    let n = d * d;
    let kernel = Kernel::new(model);
    let coeffs = sample_coefficients(drive, duration, steps.max(1), phase, detuning, t0);
    let mut states: Vec<Vec<C>> = (0..n)
        .map(|col| {
            let mut v = vec![C::new(0.0, 0.0); n];
            v[col] = C::new(1.0, 0.0);
            v
        })
        .collect();
    integrate_batch(&kernel, &mut states, &coeffs, duration / steps.max(1) as f64);
    let mut m = vec![C::new(0.0, 0.0); n * n];
    for (col, st) in states.iter().enumerate() {
        for row in 0..n {
            m[row * n + col] = st[row];
        }
    }
    Superop { dim: d, m }
}

/// Exact propagator of the drive-free dynamics over `duration`.
pub fn idle_superop(model: &TransmonModel, duration: f64) -> Superop {
    let kernel = Kernel::new(model);
    let n = model.levels * model.levels;
    Superop { dim: model.levels, m: expm(&free_generator(&kernel), n, duration) }
}

/// Propagator of one pulse at phase zero starting at t = 0, followed by its delay t_d.
pub fn pulse_superop(model: &TransmonModel, pulse: &CalibratedPulse, steps: usize) -> Superop {
    let drive = |t: f64| pulse.iq(t);
    let s = drive_superop(model, &drive, pulse.calib.t_p, steps, 0.0, pulse.detuning(model), 0.0);
    if pulse.calib.t_d > 0.0 { idle_superop(model, pulse.calib.t_d).after(&s) } else { s }
}

/// Executes a gate list, returning the final state and the accumulated frame phase.
pub fn run_sequence(
    rho0: &DensityMatrix,
    model: &TransmonModel,
    gates: &[GateOp],
    steps_per_pulse: usize,
) -> Result<(DensityMatrix, f64)> {
    model.validate()?;
    let mut rho = rho0.clone();
    let mut phase = 0.0;
    let mut t = 0.0;
    for g in gates {
        match g {
            GateOp::VirtualZ { phase: p } => phase += p,
            GateOp::Idle { duration } => {
                rho = idle_superop(model, *duration).apply(&rho);
                t += duration;
            }
            GateOp::PulseGate(p) => {
                p.validate()?;
                phase += 0.5 * p.calib.virtual_z;
                let opts = EvolveOptions {
                    max_step: p.calib.t_p / steps_per_pulse as f64,
                    phase,
                    detuning: p.detuning(model),
                    t0: t,
                    check_invariants: true,
                };
                rho = evolve(&rho, model, &|tau| p.iq(tau), p.calib.t_p, &opts)?;
                t += p.calib.t_p;
                phase += 0.5 * p.calib.virtual_z;
                if p.calib.t_d > 0.0 {
                    rho = idle_superop(model, p.calib.t_d).apply(&rho);
                    t += p.calib.t_d;
                }
            }
        }
    }
    Ok((rho, phase))
}

/// The six Bloch-axis states.
pub fn cardinal_states() -> [(C, C); 6] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [
        (C::new(1.0, 0.0), C::new(0.0, 0.0)),
        (C::new(0.0, 0.0), C::new(1.0, 0.0)),
        (C::new(s, 0.0), C::new(s, 0.0)),
        (C::new(s, 0.0), C::new(-s, 0.0)),
        (C::new(s, 0.0), C::new(0.0, s)),
        (C::new(s, 0.0), C::new(0.0, -s)),
    ]
}

/// 2×2 rotation `exp(−iθ/2 (cos ψ σx + sin ψ σy))`, row-major.
pub fn qubit_rotation(theta: f64, axis_angle: f64) -> [C; 4] {
    let (c, s) = ((0.5 * theta).cos(), (0.5 * theta).sin());
    let e = C::from_polar(1.0, axis_angle);
    let mi = C::new(0.0, -1.0);
    [C::new(c, 0.0), mi * s * e.conj(), mi * s * e, C::new(c, 0.0)]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateMetrics {
    /// Average infidelity over the cardinal states.
    pub error: f64,
    /// Average population outside the qubit subspace.
    pub leakage: f64,
}

/// Cardinal-state gate error and leakage of one calibrated R_X(θ) gate including its delay.
pub fn gate_error_cardinal(model: &TransmonModel, pulse: &CalibratedPulse, steps_per_pulse: usize) -> Result<GateMetrics> {
    model.validate()?;
    pulse.validate()?;
    let s = pulse_superop(model, pulse, steps_per_pulse);
    Ok(cardinal_metrics(model.levels, &s, pulse.calib.virtual_z, pulse.spec.rotation_angle))
}

/// Metrics for a phase-zero pulse propagator sandwiched by ½φ_z frame advances.
pub fn cardinal_metrics(dim: usize, pulse: &Superop, virtual_z: f64, theta: f64) -> GateMetrics {
    let r = qubit_rotation(theta, 0.0);
    let mut fid = 0.0;
    let mut leak = 0.0;
    for (a0, a1) in cardinal_states() {
        let mut rho = DensityMatrix::qubit(dim, a0, a1);
        // Pulse at frame phase φ_z/2, then undo the total φ_z frame advance.
        rho.rotate_frame(-0.5 * virtual_z);
        let mut out = pulse.apply(&rho);
        out.rotate_frame(0.5 * virtual_z);
        out.rotate_frame(-virtual_z);
        let mut target = vec![C::new(0.0, 0.0); dim];
        target[0] = r[0] * a0 + r[1] * a1;
        target[1] = r[2] * a0 + r[3] * a1;
        fid += out.expectation(&target);
        leak += out.leaked();
    }
    GateMetrics { error: 1.0 - fid / 6.0, leakage: leak / 6.0 }
}

/// Simulates an arbitrary sampled I/Q record at phase zero (linear interpolation between samples).
pub fn evolve_waveform(
    rho0: &DensityMatrix,
    model: &TransmonModel,
    waveform: &SampledWaveform,
    detuning: f64,
    max_step: f64,
) -> Result<DensityMatrix> {
    let duration = waveform.dt * (waveform.len().saturating_sub(1)) as f64;
    let opts = EvolveOptions { max_step, phase: 0.0, detuning, t0: waveform.start_time, check_invariants: true };
    let start = waveform.start_time;
    evolve(rho0, model, &|tau| waveform.interpolate(start + tau), duration, &opts)
}

/// Native gates of the benchmarking gate set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NativeGate {
    I,
    X90,
    Xm90,
    Y90,
    Ym90,
}

impl NativeGate {
    pub const ALL: [NativeGate; 5] = [NativeGate::I, NativeGate::X90, NativeGate::Xm90, NativeGate::Y90, NativeGate::Ym90];

    /// Drive phase of the pulse implementing the gate, `None` for the idle.
    ///
    /// With the `a†` coefficient `½Ω e^{−iφ}`, phase φ rotates about
    /// `cos φ σx − sin φ σy`, so +Y needs φ = −π/2.
    pub fn drive_phase(self) -> Option<f64> {
        match self {
            NativeGate::I => None,
            NativeGate::X90 => Some(0.0),
            NativeGate::Xm90 => Some(PI),
            NativeGate::Y90 => Some(-PI / 2.0),
            NativeGate::Ym90 => Some(PI / 2.0),
        }
    }

    /// Ideal qubit unitary, row-major.
    pub fn unitary(self) -> [C; 4] {
        match self {
            NativeGate::I => [C::new(1.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0), C::new(1.0, 0.0)],
            NativeGate::X90 => qubit_rotation(PI / 2.0, 0.0),
            NativeGate::Xm90 => qubit_rotation(-PI / 2.0, 0.0),
            NativeGate::Y90 => qubit_rotation(PI / 2.0, PI / 2.0),
            NativeGate::Ym90 => qubit_rotation(-PI / 2.0, PI / 2.0),
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            NativeGate::I => "I",
            NativeGate::X90 => "X90",
            NativeGate::Xm90 => "-X90",
            NativeGate::Y90 => "Y90",
            NativeGate::Ym90 => "-Y90",
        }
    }
}

/// Running drive frame of a gate sequence.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Frame {
    pub phase: f64,
    pub time: f64,
}

/// Precomputed propagators for fast execution of long native-gate sequences.
///
/// Every pulse gate reuses one phase-zero propagator (pulse plus delay)
/// conjugated by the frame rotation, so a sequence costs one small matrix-vector
/// product per gate.
#[derive(Debug, Clone, PartialEq)]
pub struct GateSet {
    pub dim: usize,
    pub pulse: Superop,
    pub idle: Superop,
    pub virtual_z: f64,
    /// ω_d − ω_q in rad/s.
    pub detuning: f64,
    pub gate_time: f64,
}

impl GateSet {
    pub fn simulated(model: &TransmonModel, pulse: &CalibratedPulse, steps_per_pulse: usize) -> Result<Self> {
        model.validate()?;
        pulse.validate()?;
        Ok(Self {
            dim: model.levels,
            pulse: pulse_superop(model, pulse, steps_per_pulse),
            idle: idle_superop(model, pulse.calib.gate_time()),
            virtual_z: pulse.calib.virtual_z,
            detuning: pulse.detuning(model),
            gate_time: pulse.calib.gate_time(),
        })
    }

    /// Perfect gates followed by an optional noise channel (also applied to the idle).
    pub fn ideal(dim: usize, gate_time: f64, noise: Option<Superop>) -> Self {
        let r = qubit_rotation(PI / 2.0, 0.0);
        let mut u = vec![C::new(0.0, 0.0); dim * dim];
        for j in 0..dim {
            u[j * dim + j] = C::new(1.0, 0.0);
        }
        u[0] = r[0];
        u[1] = r[1];
        u[dim] = r[2];
        u[dim + 1] = r[3];
        let gate = Superop::from_unitary(dim, &u);
        let (pulse, idle) = match noise {
            Some(n) => (n.after(&gate), n),
            None => (gate, Superop::identity(dim)),
        };
        Self { dim, pulse, idle, virtual_z: 0.0, detuning: 0.0, gate_time }
    }

    pub fn with_virtual_z(&self, virtual_z: f64) -> Self {
        Self { virtual_z, ..self.clone() }
    }

    pub fn apply(&self, rho: &mut DensityMatrix, frame: &mut Frame, gate: NativeGate) {
        match gate.drive_phase() {
            None => *rho = self.idle.apply(rho),
            Some(offset) => {
                frame.phase += 0.5 * self.virtual_z;
                let phi = frame.phase + offset + self.detuning * frame.time;
                rho.rotate_frame(-phi);
                *rho = self.pulse.apply(rho);
                rho.rotate_frame(phi);
                frame.phase += 0.5 * self.virtual_z;
            }
        }
        frame.time += self.gate_time;
    }

    pub fn run(&self, rho0: &DensityMatrix, gates: &[NativeGate]) -> (DensityMatrix, Frame) {
        let mut rho = rho0.clone();
        let mut frame = Frame::default();
        for &g in gates {
            self.apply(&mut rho, &mut frame, g);
        }
        (rho, frame)
    }
}

impl Superop {
    /// `ρ ↦ (1 − p) ρ + p tr(ρ) 𝟙/d`.
    pub fn depolarizing(dim: usize, p: f64) -> Self {
        let n = dim * dim;
        let mut s = Superop::identity(dim);
        s.m.iter_mut().for_each(|v| *v *= 1.0 - p);
        for j in 0..dim {
            for k in 0..dim {
                s.m[(j * dim + j) * n + k * dim + k] += C::new(p / dim as f64, 0.0);
            }
        }
        s
    }
}

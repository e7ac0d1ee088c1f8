//! Simulated single-qubit gate calibration.
//!
//! Each routine sweeps one parameter of a [`CalibratedPulse`], simulates an
//! error-amplifying circuit, and extracts an optimum or zero crossing with a
//! local quadratic fit. [`full_calibration`] chains them:
//!
//! ```text
//! Rabi (A) → Ramsey (f_d) → Q-scale β (DRAG-P) | leakage β (DRAG-L)
//!          → repeat { phase amplification φ_z (DRAG-L), BangBang A }
//! ```
//!
//! Probabilities are exact unless `shots` is set, in which case every
//! simulated probability is replaced by a seeded binomial estimate.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::benchmarking::{CliffordTable, random_sequences};
use crate::envelopes::{DragConfig, DragVariant, EnvelopeSpec};
use crate::error::{Error, Result};
use crate::fitting::{crossings, levenberg_marquardt, quadratic_vertex};
use crate::simulator::{
    CalibratedPulse, DEFAULT_DELAY, DEFAULT_STEPS_PER_PULSE, DensityMatrix, EvolveOptions, Frame, GateCalibration,
    GateSet, NativeGate, TransmonModel, evolve, idle_superop,
};

use NativeGate::{X90, Xm90, Y90};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationConfig {
    pub variant: DragVariant,
    pub max_loop_iters: usize,
    pub rabi_points: usize,
    pub qscale_points: usize,
    /// Blocks of four π/2 pulses in the fine BangBang scan.
    pub bangbang_reps: usize,
    pub bangbang_points: usize,
    pub phase_amp_reps: Vec<usize>,
    pub phase_points: usize,
    pub leakage_rb_lengths: Vec<usize>,
    pub leakage_rb_sequences: usize,
    /// Deliberate Ramsey detuning in Hz.
    pub ramsey_offset: f64,
    /// Longest Ramsey delay in seconds.
    pub ramsey_window: f64,
    pub ramsey_points: usize,
    pub steps_per_pulse: usize,
    /// Binomial shot count per probability; `None` for exact probabilities.
    pub shots: Option<u64>,
    pub seed: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            variant: DragVariant::DragL,
            max_loop_iters: 3,
            rabi_points: 41,
            qscale_points: 21,
            bangbang_reps: 8,
            bangbang_points: 15,
            phase_amp_reps: vec![1, 4, 16],
            phase_points: 41,
            leakage_rb_lengths: vec![20],
            leakage_rb_sequences: 10,
            ramsey_offset: 5e6,
            ramsey_window: 24e-6,
            ramsey_points: 481,
            steps_per_pulse: DEFAULT_STEPS_PER_PULSE,
            shots: None,
            seed: 0,
        }
    }
}

impl CalibrationConfig {
    pub fn for_variant(variant: DragVariant) -> Self {
        Self { variant, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("max_loop_iters", self.max_loop_iters),
            ("bangbang_reps", self.bangbang_reps),
            ("leakage_rb_sequences", self.leakage_rb_sequences),
            ("steps_per_pulse", self.steps_per_pulse),
        ];
        for (name, v) in counts {
            if v < 1 {
                return Err(Error::config(format!("{name} must be at least 1")));
            }
        }
        let grids = [
            ("rabi_points", self.rabi_points),
            ("qscale_points", self.qscale_points),
            ("bangbang_points", self.bangbang_points),
            ("phase_points", self.phase_points),
            ("ramsey_points", self.ramsey_points),
        ];
        for (name, v) in grids {
            if v < 5 {
                return Err(Error::config(format!("{name} must be at least 5")));
            }
        }
        if self.phase_amp_reps.is_empty() || self.phase_amp_reps.contains(&0) {
            return Err(Error::config("phase_amp_reps must be non-empty and positive"));
        }
        if self.leakage_rb_lengths.is_empty() {
            return Err(Error::config("leakage_rb_lengths must be non-empty"));
        }
        if !(self.ramsey_offset != 0.0 && self.ramsey_window > 0.0) {
            return Err(Error::config("Ramsey offset and window must be nonzero"));
        }
        if self.shots == Some(0) {
            return Err(Error::config("shots must be positive"));
        }
        Ok(())
    }

    /// DRAG coefficient used before any β calibration.
    pub fn initial_beta(&self) -> f64 {
        match self.variant {
            DragVariant::DragP => 0.5,
            DragVariant::DragL => 1.0,
            DragVariant::NoDrag => 0.0,
        }
    }
}

/// Turns exact probabilities into measured frequencies.
struct Meter {
    shots: Option<u64>,
    rng: ChaCha8Rng,
}

impl Meter {
    fn new(config: &CalibrationConfig, stage: u64) -> Self {
        Self { shots: config.shots, rng: ChaCha8Rng::seed_from_u64(config.seed.wrapping_mul(0x9E37_79B9).wrapping_add(stage)) }
    }

    fn measure(&mut self, p: f64) -> f64 {
        match self.shots {
            None => p,
            Some(n) => {
                let p = p.clamp(0.0, 1.0);
                Binomial::new(n, p).map(|b| b.sample(&mut self.rng) as f64 / n as f64).unwrap_or(p)
            }
        }
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

fn argmax(ys: &[f64]) -> usize {
    ys.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|p| p.0).unwrap_or(0)
}

fn run_from_ground(gates: &GateSet, seq: &[NativeGate]) -> DensityMatrix {
    gates.run(&DensityMatrix::ground(gates.dim), seq).0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RabiResult {
    /// Amplitude for the requested rotation angle.
    pub amplitude: f64,
    /// Amplitude of the first p₁ maximum (π rotation).
    pub pi_amplitude: f64,
    pub amplitudes: Vec<f64>,
    pub p1: Vec<f64>,
}

/// Single-pulse Rabi sweep over `[0.5, 1.5]` times the area-theorem π amplitude.
pub fn calibrate_amplitude_rabi(
    model: &TransmonModel,
    spec: &EnvelopeSpec,
    drag: &DragConfig,
    config: &CalibrationConfig,
) -> Result<RabiResult> {
    model.validate()?;
    spec.validate()?;
    drag.validate()?;
    config.validate()?;
    let a_pi0 = spec.area_theorem_amplitude()? * PI / spec.rotation_angle;
    let amplitudes = linspace(0.5 * a_pi0, 1.5 * a_pi0, config.rabi_points);
    let mut meter = Meter::new(config, 1);
    let mut p1 = Vec::with_capacity(amplitudes.len());
    let opts = EvolveOptions { check_invariants: false, ..EvolveOptions::for_pulse(spec.duration) };
    let opts = EvolveOptions { max_step: spec.duration / config.steps_per_pulse as f64, ..opts };
    for &a in &amplitudes {
        let s = spec.with_amplitude(a);
        let rho = evolve(&DensityMatrix::ground(model.levels), model, &|t| crate::envelopes::apply_drag(&s, drag, t), spec.duration, &opts)?;
        p1.push(meter.measure(rho.population(1)));
    }
    let k = argmax(&p1);
    if k == 0 || k + 1 == p1.len() {
        return Err(Error::Calibration("no Rabi maximum inside the amplitude sweep".into()));
    }
    let (pi_amplitude, _) = quadratic_vertex(&amplitudes, &p1, k, true);
    Ok(RabiResult { amplitude: pi_amplitude * spec.rotation_angle / PI, pi_amplitude, amplitudes, p1 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RamseyResult {
    /// Estimated qubit frequency in Hz, to be used as the drive frequency.
    pub drive_freq: f64,
    pub fringe_freq: f64,
    /// Envelope decay time of the fringes in seconds (infinite without decay).
    pub decay_time: f64,
    pub fringe_amplitude: f64,
    pub delays: Vec<f64>,
    pub p1: Vec<f64>,
}

/// Ramsey fringe model: quadratic baseline plus a damped oscillation.
/// Returns the residual and the linear coefficients for given (f, γ).
fn ramsey_projection(delays: &[f64], ys: &[f64], f: f64, gamma: f64) -> (Vec<f64>, DVector<f64>) {
    let window = delays.last().copied().unwrap_or(1.0).max(1e-300);
    let n = delays.len();
    let basis = DMatrix::from_fn(n, 5, |r, c| {
        let t = delays[r];
        let s = t / window;
        let env = (-gamma * t).exp();
        match c {
            0 => 1.0,
            1 => s,
            2 => s * s,
            3 => env * (2.0 * PI * f * t).cos(),
            _ => env * (2.0 * PI * f * t).sin(),
        }
    });
    let y = DVector::from_column_slice(ys);
    let coef = basis.clone().svd(true, true).solve(&y, 1e-14).unwrap_or_else(|_| DVector::zeros(5));
    let res = (&basis * &coef - y).iter().copied().collect();
    (res, coef)
}

pub fn calibrate_frequency_ramsey(
    model: &TransmonModel,
    pulse: &CalibratedPulse,
    config: &CalibrationConfig,
) -> Result<RamseyResult> {
    config.validate()?;
    let detuned = pulse.with_calibration(GateCalibration { drive_freq: pulse.calib.drive_freq + config.ramsey_offset, ..pulse.calib });
    let gates = GateSet::simulated(model, &detuned, config.steps_per_pulse)?;
    let n = config.ramsey_points;
    let step = config.ramsey_window / (n - 1) as f64;
    let idle = idle_superop(model, step);
    let mut meter = Meter::new(config, 2);

    let mut rho = DensityMatrix::ground(model.levels);
    let mut frame = Frame::default();
    gates.apply(&mut rho, &mut frame, X90);
    let mut delays = Vec::with_capacity(n);
    let mut p1 = Vec::with_capacity(n);
    for k in 0..n {
        let tau = k as f64 * step;
        let mut r = rho.clone();
        let mut f = Frame { phase: frame.phase, time: frame.time + tau };
        gates.apply(&mut r, &mut f, X90);
        delays.push(tau);
        p1.push(meter.measure(r.population(1)));
        rho = idle.apply(&rho);
    }

    // Frequency start from the periodogram of the detrended record.
    let (trend, _) = ramsey_projection(&delays, &p1, 0.0, 0.0);
    let nyquist = 0.5 / step;
    let mut best = (0.0, 0.0);
    for j in 1..4000 {
        let f = nyquist * j as f64 / 4000.0;
        let (mut c, mut s) = (0.0, 0.0);
        for (t, r) in delays.iter().zip(&trend) {
            c += r * (2.0 * PI * f * t).cos();
            s += r * (2.0 * PI * f * t).sin();
        }
        let power = c * c + s * s;
        if power > best.1 {
            best = (f, power);
        }
    }
    let f0 = best.0.max(1.0 / config.ramsey_window);
    let g0 = 1.0 / config.ramsey_window;
    let lm = levenberg_marquardt(|q| ramsey_projection(&delays, &p1, q[0] * f0, q[1] * g0).0, &[1.0, 1.0], 200)?;
    let (fringe_freq, gamma) = (lm.params[0] * f0, lm.params[1] * g0);
    let (_, coef) = ramsey_projection(&delays, &p1, fringe_freq, gamma);
    let fringe_amplitude = coef[3].hypot(coef[4]);
    if fringe_freq.abs() * config.ramsey_window < 1.0 {
        return Err(Error::Calibration(format!(
            "no Ramsey fringe within the window (fitted {:.3e} Hz over {:.3e} s)",
            fringe_freq.abs(),
            config.ramsey_window
        )));
    }
    if fringe_amplitude < 1e-3 {
        return Err(Error::Calibration(format!("flat Ramsey fringes (amplitude {fringe_amplitude:.2e})")));
    }
    Ok(RamseyResult {
        drive_freq: detuned.calib.drive_freq - config.ramsey_offset.signum() * fringe_freq.abs(),
        fringe_freq: fringe_freq.abs(),
        decay_time: if gamma > 0.0 { 1.0 / gamma } else { f64::INFINITY },
        fringe_amplitude,
        delays,
        p1,
    })
}

fn with_beta(pulse: &CalibratedPulse, beta: f64) -> CalibratedPulse {
    pulse.with_calibration(GateCalibration { beta, ..pulse.calib })
}

/// `p₁(X90 X90 Y90) − p₁(Y90 Y90 X90)` at DRAG coefficient β.
pub fn qscale_signal(model: &TransmonModel, pulse: &CalibratedPulse, beta: f64, steps_per_pulse: usize) -> Result<f64> {
    let gates = GateSet::simulated(model, &with_beta(pulse, beta), steps_per_pulse)?;
    let a = run_from_ground(&gates, &[X90, X90, Y90]).population(1);
    let b = run_from_ground(&gates, &[Y90, Y90, X90]).population(1);
    Ok(a - b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTrace {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaResult {
    pub beta: f64,
    pub coarse: SweepTrace,
    pub fine: SweepTrace,
}

fn sweep_signal(xs: &[f64], meter: &mut Meter, mut f: impl FnMut(f64) -> Result<f64>) -> Result<SweepTrace> {
    let mut y = Vec::with_capacity(xs.len());
    for &x in xs {
        y.push(meter.measure(f(x)?));
    }
    Ok(SweepTrace { x: xs.to_vec(), y })
}

/// Measured difference of two probabilities with shot noise on each.
fn measured_difference(meter: &mut Meter, model: &TransmonModel, pulse: &CalibratedPulse, beta: f64, steps: usize) -> Result<f64> {
    let gates = GateSet::simulated(model, &with_beta(pulse, beta), steps)?;
    let a = meter.measure(run_from_ground(&gates, &[X90, X90, Y90]).population(1));
    let b = meter.measure(run_from_ground(&gates, &[Y90, Y90, X90]).population(1));
    Ok(a - b)
}

fn nearest_crossing(trace: &SweepTrace, center: f64) -> Option<f64> {
    crossings(&trace.x, &trace.y).into_iter().map(|c| c.0).min_by(|a, b| (a - center).abs().total_cmp(&(b - center).abs()))
}

/// β where the two Q-scale sequences give equal excited population.
pub fn calibrate_beta_qscale(model: &TransmonModel, pulse: &CalibratedPulse, config: &CalibrationConfig) -> Result<BetaResult> {
    config.validate()?;
    let mut meter = Meter::new(config, 3);
    let steps = config.steps_per_pulse;
    let probe = |xs: &[f64], meter: &mut Meter| -> Result<SweepTrace> {
        let mut y = Vec::with_capacity(xs.len());
        for &b in xs {
            y.push(measured_difference(meter, model, pulse, b, steps)?);
        }
        Ok(SweepTrace { x: xs.to_vec(), y })
    };
    let mut coarse = probe(&linspace(0.0, 2.0, config.qscale_points), &mut meter)?;
    let flat = |t: &SweepTrace| t.y.iter().map(|v| v.abs()).fold(0.0, f64::max) < 1e-9;
    if flat(&coarse) {
        return Err(Error::Degenerate { reason: "Q-scale sequences coincide for every beta".into(), condition: f64::INFINITY });
    }
    let mut center = nearest_crossing(&coarse, 0.5);
    if center.is_none() {
        coarse = probe(&linspace(-2.0, 4.0, 3 * config.qscale_points), &mut meter)?;
        center = nearest_crossing(&coarse, 0.5);
    }
    let center = center.ok_or_else(|| Error::Calibration("no Q-scale crossing in beta range [-2, 4]".into()))?;
    let fine = probe(&linspace(center - 0.2, center + 0.2, config.qscale_points), &mut meter)?;
    let beta = nearest_crossing(&fine, center).unwrap_or(center);
    Ok(BetaResult { beta, coarse, fine })
}

/// Mean population outside the qubit subspace after seeded random Clifford sequences.
pub fn leakage_signal(model: &TransmonModel, pulse: &CalibratedPulse, sequences: &[(usize, Vec<usize>)], steps_per_pulse: usize) -> Result<f64> {
    let gates = GateSet::simulated(model, pulse, steps_per_pulse)?;
    let table = CliffordTable::get();
    let total: f64 = sequences.iter().map(|(_, s)| run_from_ground(&gates, &table.physical_sequence(s)).leaked()).sum();
    Ok(total / sequences.len().max(1) as f64)
}

/// β minimising leakage after random Clifford sequences (coarse then fine sweep).
pub fn calibrate_beta_leakage(model: &TransmonModel, pulse: &CalibratedPulse, config: &CalibrationConfig) -> Result<BetaResult> {
    config.validate()?;
    let sequences = random_sequences(&config.leakage_rb_lengths, config.leakage_rb_sequences, config.seed);
    let mut meter = Meter::new(config, 4);
    let steps = config.steps_per_pulse;
    let coarse = sweep_signal(&linspace(0.0, 2.0, config.qscale_points), &mut meter, |b| {
        leakage_signal(model, &with_beta(pulse, b), &sequences, steps)
    })?;
    let (lo, hi) = coarse.y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    if !(hi - lo > 1e-12) {
        return Err(Error::Calibration("leakage does not depend on beta".into()));
    }
    let k = argmax(&coarse.y.iter().map(|v| -v).collect::<Vec<_>>());
    let (c, _) = quadratic_vertex(&coarse.x, &coarse.y, k, false);
    let fine = sweep_signal(&linspace(c - 0.2, c + 0.2, config.qscale_points), &mut meter, |b| {
        leakage_signal(model, &with_beta(pulse, b), &sequences, steps)
    })?;
    let k = argmax(&fine.y.iter().map(|v| -v).collect::<Vec<_>>());
    let (beta, _) = quadratic_vertex(&fine.x, &fine.y, k, false);
    Ok(BetaResult { beta, coarse, fine })
}

/// `p₁ − ½` after `n` blocks of (X90, X90, X−90, X−90) followed by Y90.
pub fn phase_signal(gates: &GateSet, n: usize) -> f64 {
    let mut seq = Vec::with_capacity(4 * n + 1);
    for _ in 0..n {
        seq.extend_from_slice(&[X90, X90, Xm90, Xm90]);
    }
    seq.push(Y90);
    run_from_ground(gates, &seq).population(1) - 0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirtualZResult {
    pub virtual_z: f64,
    /// One trace per repetition count.
    pub traces: Vec<SweepTrace>,
}

/// φ_z nulling the phase-error amplification signal, refined over increasing repetition counts.
pub fn calibrate_virtual_z(model: &TransmonModel, pulse: &CalibratedPulse, config: &CalibrationConfig) -> Result<VirtualZResult> {
    config.validate()?;
    let base = GateSet::simulated(model, pulse, config.steps_per_pulse)?;
    let mut meter = Meter::new(config, 5);
    let mut center = pulse.calib.virtual_z;
    let mut slope_sign: Option<f64> = None;
    let mut traces = Vec::new();
    for (i, &n) in config.phase_amp_reps.iter().enumerate() {
        let mut half = 0.1;
        let mut found = None;
        for _ in 0..if i == 0 { 3 } else { 1 } {
            let xs = linspace(center - half, center + half, config.phase_points);
            let trace = sweep_signal(&xs, &mut meter, |phi| Ok(phase_signal(&base.with_virtual_z(phi), n) + 0.5))?;
            let shifted = SweepTrace { x: trace.x.clone(), y: trace.y.iter().map(|p| p - 0.5).collect() };
            found = crossings(&shifted.x, &shifted.y)
                .into_iter()
                .filter(|c| slope_sign.is_none_or(|s| c.1 * s > 0.0))
                .min_by(|a, b| (a.0 - center).abs().total_cmp(&(b.0 - center).abs()));
            traces.push(trace);
            if found.is_some() {
                break;
            }
            half *= 4.0;
        }
        let (x, slope) = found.ok_or_else(|| Error::Calibration(format!("no phase-error crossing for n = {n}")))?;
        center = x;
        slope_sign.get_or_insert(slope.signum());
    }
    Ok(VirtualZResult { virtual_z: center, traces })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BangBangScan {
    pub reps: usize,
    pub amplitude: f64,
    /// Amplitude offset that lowers the fitted return probability by 0.01.
    pub width: f64,
    pub trace: SweepTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BangBangResult {
    pub amplitude: f64,
    pub coarse: BangBangScan,
    pub fine: BangBangScan,
}

fn bangbang_trace(
    model: &TransmonModel,
    pulse: &CalibratedPulse,
    reps: usize,
    rel_half_width: f64,
    config: &CalibrationConfig,
    stage: u64,
) -> Result<SweepTrace> {
    let a0 = pulse.calib.amplitude;
    let xs = linspace(a0 * (1.0 - rel_half_width), a0 * (1.0 + rel_half_width), config.bangbang_points);
    let seq = vec![X90; 4 * reps];
    let mut meter = Meter::new(config, stage);
    sweep_signal(&xs, &mut meter, |a| {
        let p = pulse.with_calibration(GateCalibration { amplitude: a, ..pulse.calib });
        let gates = GateSet::simulated(model, &p, config.steps_per_pulse)?;
        Ok(run_from_ground(&gates, &seq).population(0))
    })
}

fn bangbang_fit(reps: usize, trace: SweepTrace) -> std::result::Result<BangBangScan, (f64, SweepTrace)> {
    let k = argmax(&trace.y);
    if k == 0 || k + 1 == trace.x.len() {
        return Err((trace.x[k], trace));
    }
    let (amplitude, curvature) = quadratic_vertex(&trace.x, &trace.y, k, true);
    let width = if curvature < 0.0 { (0.02 / -curvature).sqrt() } else { f64::INFINITY };
    Ok(BangBangScan { reps, amplitude, width, trace })
}

/// Return probability after `n` blocks of four π/2 pulses, swept over amplitude.
pub fn bangbang_scan(
    model: &TransmonModel,
    pulse: &CalibratedPulse,
    reps: usize,
    rel_half_width: f64,
    config: &CalibrationConfig,
    stage: u64,
) -> Result<BangBangScan> {
    let trace = bangbang_trace(model, pulse, reps, rel_half_width, config, stage)?;
    bangbang_fit(reps, trace).map_err(|_| Error::Calibration(format!("BangBang maximum at the edge of the sweep (n = {reps})")))
}

/// Maximum number of times the coarse window is moved onto a boundary maximum.
const BANGBANG_RECENTER: usize = 4;

/// Repeats a scan with the window moved onto a boundary maximum.
fn recentered_scan(
    model: &TransmonModel,
    pulse: &CalibratedPulse,
    reps: usize,
    rel_half_width: f64,
    config: &CalibrationConfig,
    stage: u64,
) -> Result<BangBangScan> {
    let mut start = pulse.clone();
    for attempt in 0..=BANGBANG_RECENTER {
        let trace = bangbang_trace(model, &start, reps, rel_half_width, config, stage + 16 * attempt as u64)?;
        match bangbang_fit(reps, trace) {
            Ok(scan) => return Ok(scan),
            Err((edge, _)) => start = start.with_calibration(GateCalibration { amplitude: edge, ..start.calib }),
        }
    }
    Err(Error::Calibration(format!("BangBang maximum at the edge of the sweep (n = {reps})")))
}

/// Coarse scan with one block (±5 %), then a scan with `bangbang_reps` blocks over a window shrunk by the same factor.
///
/// A maximum on the window boundary moves the window there and repeats.
pub fn refine_amplitude_bangbang(model: &TransmonModel, pulse: &CalibratedPulse, config: &CalibrationConfig) -> Result<BangBangResult> {
    config.validate()?;
    let coarse = recentered_scan(model, pulse, 1, 0.05, config, 6)?;
    let p = pulse.with_calibration(GateCalibration { amplitude: coarse.amplitude, ..pulse.calib });
    let n = config.bangbang_reps;
    let fine = if n > 1 { recentered_scan(model, &p, n, 0.1 / n as f64, config, 7)? } else { coarse.clone() };
    Ok(BangBangResult { amplitude: fine.amplitude, coarse, fine })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationStep {
    pub stage: String,
    pub iteration: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub pulse: CalibratedPulse,
    pub steps: Vec<CalibrationStep>,
}

impl CalibrationReport {
    pub fn calibration(&self) -> GateCalibration {
        self.pulse.calib
    }
}

/// The error-amplification loop on an already initialised pulse.
pub fn calibration_loop(model: &TransmonModel, pulse: &CalibratedPulse, config: &CalibrationConfig) -> Result<CalibrationReport> {
    config.validate()?;
    let mut p = pulse.clone();
    let mut steps = Vec::new();
    let mut record = |stage: &str, iteration: usize, value: f64| steps.push(CalibrationStep { stage: stage.into(), iteration, value });
    for it in 0..config.max_loop_iters {
        if config.variant == DragVariant::DragL {
            let z = calibrate_virtual_z(model, &p, config)?.virtual_z;
            p = p.with_calibration(GateCalibration { virtual_z: z, ..p.calib });
            record("virtual_z", it, z);
        }
        let a = refine_amplitude_bangbang(model, &p, config)?.amplitude;
        p = p.with_calibration(GateCalibration { amplitude: a, ..p.calib });
        record("bangbang", it, a);
    }
    Ok(CalibrationReport { pulse: p, steps })
}

/// Rabi, Ramsey, DRAG coefficient, then the error-amplification loop.
pub fn full_calibration(model: &TransmonModel, spec: &EnvelopeSpec, config: &CalibrationConfig) -> Result<CalibrationReport> {
    model.validate()?;
    spec.validate()?;
    config.validate()?;
    let drag = DragConfig::new(config.initial_beta(), model.alpha, config.variant);
    let mut steps = Vec::new();

    let rabi = calibrate_amplitude_rabi(model, spec, &drag, config)?;
    steps.push(CalibrationStep { stage: "rabi".into(), iteration: 0, value: rabi.amplitude });
    let calib = GateCalibration {
        amplitude: rabi.amplitude,
        beta: drag.beta,
        drive_freq: model.omega_q / (2.0 * PI),
        virtual_z: 0.0,
        t_p: spec.duration,
        t_d: DEFAULT_DELAY,
    };
    let mut pulse = CalibratedPulse::new(spec.clone(), drag, calib)?;

    let ramsey = calibrate_frequency_ramsey(model, &pulse, config)?;
    pulse = pulse.with_calibration(GateCalibration { drive_freq: ramsey.drive_freq, ..pulse.calib });
    steps.push(CalibrationStep { stage: "ramsey".into(), iteration: 0, value: ramsey.drive_freq });

    let beta = match config.variant {
        DragVariant::DragP => Some(calibrate_beta_qscale(model, &pulse, config)?.beta),
        DragVariant::DragL => Some(calibrate_beta_leakage(model, &pulse, config)?.beta),
        DragVariant::NoDrag => None,
    };
    if let Some(b) = beta {
        pulse = with_beta(&pulse, b);
        steps.push(CalibrationStep { stage: "beta".into(), iteration: 0, value: b });
    }

    let looped = calibration_loop(model, &pulse, config)?;
    steps.extend(looped.steps);
    Ok(CalibrationReport { pulse: looped.pulse, steps })
}

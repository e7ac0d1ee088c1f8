use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::distortion::{DistortionModel, apply_distortion, predistort_waveform};
use crate::envelopes::SampledWaveform;
use crate::error::{Error, Result};
use crate::fitting::{crossings, levenberg_marquardt};
use crate::simulator::{CalibratedPulse, DensityMatrix, TransmonModel, evolve_waveform};

/// Settings shared by the distortion-characterization circuits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CharacterizationConfig {
    /// Number of (π, π) pulse pairs.
    pub n_pairs: usize,
    /// Waveform samples per pulse duration.
    pub samples_per_pulse: usize,
    /// Predistort the ideal waveform before the simulated line distorts it.
    pub predistort: bool,
    /// Integrator steps per pulse duration.
    pub steps_per_pulse: usize,
}

impl Default for CharacterizationConfig {
    fn default() -> Self {
        Self { n_pairs: 10, samples_per_pulse: 256, predistort: false, steps_per_pulse: 1024 }
    }
}

/// One pulse of a circuit: rotation scale relative to the calibrated π/2
/// pulse and the axis angle ψ (rotation about `cos ψ x + sin ψ y`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSlot {
    pub scale: f64,
    pub axis: f64,
}

/// Samples a train of pulses with period `t_p + t_d` on a uniform grid.
///
/// The grid step divides the period exactly so every pulse starts on a sample.
pub fn sequence_waveform(pulse: &CalibratedPulse, slots: &[PulseSlot], t_d: f64, samples_per_pulse: usize) -> Result<SampledWaveform> {
    let t_p = pulse.calib.t_p;
    let period = t_p + t_d;
    let per_period = ((period / t_p) * samples_per_pulse as f64).ceil().max(1.0) as usize;
    let dt = period / per_period as f64;
    let total = slots.len() * per_period + 1;
    let mut i_s = vec![0.0; total];
    let mut q_s = vec![0.0; total];
    for (k, slot) in slots.iter().enumerate() {
        let start = k * per_period;
        // Drive phase −ψ rotates the envelope: Ω̃ = (Ω_I + iΩ_Q) e^{iψ}.
        let (c, s) = (slot.axis.cos(), slot.axis.sin());
        for j in 0..=per_period {
            let tau = j as f64 * dt;
            if tau > t_p {
                break;
            }
            let (i, q) = pulse.iq(tau);
            i_s[start + j] += slot.scale * (i * c - q * s);
            q_s[start + j] += slot.scale * (i * s + q * c);
        }
    }
    SampledWaveform::new(dt, i_s, q_s)
}

fn played(ideal: &SampledWaveform, distortion: &DistortionModel, predistort: bool) -> Result<SampledWaveform> {
    let input = if predistort { predistort_waveform(ideal, distortion)? } else { ideal.clone() };
    Ok(apply_distortion(&input, distortion)?.waveform)
}

fn excited_population(model: &TransmonModel, pulse: &CalibratedPulse, w: &SampledWaveform, steps_per_pulse: usize) -> Result<f64> {
    let max_step = w.dt.min(pulse.calib.t_p / steps_per_pulse.max(1) as f64);
    let rho = evolve_waveform(&DensityMatrix::ground(model.levels), model, w, pulse.detuning(model), max_step)?;
    Ok(rho.population(1))
}

/// X90, then `n` pairs (X180, Y180 tilted by φ), then Y90.
pub fn i_circuit(n_pairs: usize, phi: f64) -> Vec<PulseSlot> {
    let mut v = vec![PulseSlot { scale: 1.0, axis: 0.0 }];
    for _ in 0..n_pairs {
        v.push(PulseSlot { scale: 2.0, axis: 0.0 });
        v.push(PulseSlot { scale: 2.0, axis: PI / 2.0 + phi });
    }
    v.push(PulseSlot { scale: 1.0, axis: PI / 2.0 });
    v
}

/// `n` pairs (X180, X−180), then Y90.
pub fn c_circuit(n_pairs: usize) -> Vec<PulseSlot> {
    let mut v = Vec::new();
    for _ in 0..n_pairs {
        v.push(PulseSlot { scale: 2.0, axis: 0.0 });
        v.push(PulseSlot { scale: 2.0, axis: PI });
    }
    v.push(PulseSlot { scale: 1.0, axis: PI / 2.0 });
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisShiftScan {
    pub t_d: f64,
    pub phi: Vec<f64>,
    pub p_e: Vec<f64>,
    /// Tilt that nulls the amplified over-rotation (p_e = ½ crossing nearest φ = 0).
    pub phi_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpDecayFit {
    pub amplitude: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IDistortionResult {
    pub scans: Vec<AxisShiftScan>,
    /// `φ_s(t_d) ≈ amplitude · e^{−t_d/τ}`, absent when every φ_s vanishes.
    pub fit: Option<ExpDecayFit>,
}

pub fn axis_shift_scan(
    model: &TransmonModel,
    pulse: &CalibratedPulse,
    distortion: &DistortionModel,
    t_d: f64,
    phi_grid: &[f64],
    config: &CharacterizationConfig,
) -> Result<AxisShiftScan> {
    let pulse = pulse.with_calibration(crate::simulator::GateCalibration { t_d, ..pulse.calib });
    let mut p_e = Vec::with_capacity(phi_grid.len());
    for &phi in phi_grid {
        let ideal = sequence_waveform(&pulse, &i_circuit(config.n_pairs, phi), t_d, config.samples_per_pulse)?;
        p_e.push(excited_population(model, &pulse, &played(&ideal, distortion, config.predistort)?, config.steps_per_pulse)?);
    }
    let signal: Vec<f64> = p_e.iter().map(|p| p - 0.5).collect();
    let phi_s = crossings(phi_grid, &signal)
        .into_iter()
        .map(|c| c.0)
        .min_by(|a, b| a.abs().total_cmp(&b.abs()))
        .ok_or_else(|| Error::Calibration(format!("no axis-shift crossing at t_d = {t_d:e} s")))?;
    Ok(AxisShiftScan { t_d, phi: phi_grid.to_vec(), p_e, phi_s })
}

/// Fits `φ_s = c e^{−t_d/τ}` by log-linear initialisation and Levenberg–Marquardt.
pub fn fit_axis_shift(t_d: &[f64], phi_s: &[f64]) -> Result<Option<ExpDecayFit>> {
    if t_d.len() < 2 {
        return Err(Error::Fit { reason: "need two delays".into(), residual: f64::NAN });
    }
    let scale = phi_s.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(None);
    }
    // Log-linear start from the points sharing the sign of the largest shift.
    let sign = phi_s.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(1.0).signum();
    let pts: Vec<(f64, f64)> = t_d.iter().zip(phi_s).filter(|(_, v)| **v * sign > 0.05 * scale).map(|(t, v)| (*t, (v * sign).ln())).collect();
    let (c0, tau0) = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let (sx, sy) = (pts.iter().map(|p| p.0).sum::<f64>(), pts.iter().map(|p| p.1).sum::<f64>());
        let sxx = pts.iter().map(|p| p.0 * p.0).sum::<f64>();
        let sxy = pts.iter().map(|p| p.0 * p.1).sum::<f64>();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let icpt = (sy - slope * sx) / n;
        (sign * icpt.exp(), if slope < 0.0 { -1.0 / slope } else { t_d.iter().copied().fold(0.0, f64::max) })
    } else {
        (sign * scale, t_d.iter().copied().fold(0.0, f64::max).max(1e-9))
    };
    let t_scale = tau0;
    let lm = levenberg_marquardt(
        |p| t_d.iter().zip(phi_s).map(|(t, v)| (p[0] * (-t / (p[1] * t_scale)).exp() - v) / scale).collect(),
        &[c0, 1.0],
        200,
    )?;
    Ok(Some(ExpDecayFit { amplitude: lm.params[0], tau: lm.params[1] * t_scale }))
}

pub fn i_distortion_characterization(
    model: &TransmonModel,
    pulse: &CalibratedPulse,
    distortion: &DistortionModel,
    t_d_values: &[f64],
    phi_grid: &[f64],
    config: &CharacterizationConfig,
) -> Result<IDistortionResult> {
    distortion.validate()?;
    if phi_grid.len() < 3 {
        return Err(Error::config("phi grid needs at least three points"));
    }
    let scans = t_d_values
        .iter()
        .map(|&t_d| axis_shift_scan(model, pulse, distortion, t_d, phi_grid, config))
        .collect::<Result<Vec<_>>>()?;
    let fit = if scans.len() >= 2 {
        fit_axis_shift(&scans.iter().map(|s| s.t_d).collect::<Vec<_>>(), &scans.iter().map(|s| s.phi_s).collect::<Vec<_>>())?
    } else {
        None
    };
    Ok(IDistortionResult { scans, fit })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CDistortionResult {
    pub t_d: Vec<f64>,
    pub n_reps: Vec<usize>,
    /// `p_e[i][j]` for `t_d[i]` and `n_reps[j]`.
    pub p_e: Vec<Vec<f64>>,
}

pub fn c_distortion_characterization(
    model: &TransmonModel,
    pulse: &CalibratedPulse,
    distortion: &DistortionModel,
    t_d_values: &[f64],
    n_reps: &[usize],
    config: &CharacterizationConfig,
) -> Result<CDistortionResult> {
    distortion.validate()?;
    let mut grid = Vec::with_capacity(t_d_values.len());
    for &t_d in t_d_values {
        let p = pulse.with_calibration(crate::simulator::GateCalibration { t_d, ..pulse.calib });
        let mut row = Vec::with_capacity(n_reps.len());
        for &n in n_reps {
            let ideal = sequence_waveform(&p, &c_circuit(n), t_d, config.samples_per_pulse)?;
            row.push(excited_population(model, &p, &played(&ideal, distortion, config.predistort)?, config.steps_per_pulse)?);
        }
        grid.push(row);
    }
    Ok(CDistortionResult { t_d: t_d_values.to_vec(), n_reps: n_reps.to_vec(), p_e: grid })
}

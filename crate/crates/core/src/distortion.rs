//! Linear control-line distortion and its frequency-domain inversion.
//!
//! Intra-quadrature model (acts on I and Q separately):
//!
//! ```text
//! step response  s(t) = 1 + Σ_j a_j e^{−t/τ_j}
//! ĥ(f)           = 1 + Σ_j i a_j 2πfτ_j / (1 + i2πfτ_j)
//! ```
//!
//! Cross-quadrature model on the complex envelope `u = u_I + i u_Q`:
//! `s(t) = 1 + i Σ_j ã_j e^{−t/τ̃_j}`, so the tail lands in the other quadrature.
//!
//! The forward path is a time-domain one-pole recursion per term; the inverse
//! path divides the FFT by ĥ. The two share no code.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::envelopes::SampledWaveform;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistortionKind {
    Intra,
    Cross,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistortionTerm {
    pub a: f64,
    /// Time constant in seconds.
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistortionModel {
    pub kind: DistortionKind,
    pub terms: Vec<DistortionTerm>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Distorted {
    pub waveform: SampledWaveform,
    /// Set when the record ends before the slowest tail has decayed (< 10 τ of trailing zeros).
    pub padding_warning: bool,
}

/// Smallest |ĥ| accepted by the inverse filter.
pub const MIN_KERNEL_MAGNITUDE: f64 = 1e-6;

/// Frequency far above every pole, where ĥ has reached its limit `1 + Σ a_j` (intra).
const HIGH_FREQUENCY_PROBE: f64 = 1e60;

impl DistortionModel {
    pub fn identity() -> Self {
        Self { kind: DistortionKind::Intra, terms: Vec::new() }
    }

    pub fn intra(a: f64, tau: f64) -> Self {
        Self { kind: DistortionKind::Intra, terms: vec![DistortionTerm { a, tau }] }
    }

    pub fn cross(a: f64, tau: f64) -> Self {
        Self { kind: DistortionKind::Cross, terms: vec![DistortionTerm { a, tau }] }
    }

    pub fn validate(&self) -> Result<()> {
        for (j, t) in self.terms.iter().enumerate() {
            if !(t.tau > 0.0 && t.tau.is_finite()) {
                return Err(Error::config(format!("distortion term {j}: tau must be positive")));
            }
            if !(t.a.abs() < 1.0) {
                return Err(Error::config(format!("distortion term {j}: |a| must be below 1")));
            }
        }
        Ok(())
    }

    pub fn tau_max(&self) -> f64 {
        self.terms.iter().map(|t| t.tau).fold(0.0, f64::max)
    }
}

/// Frequency response ĥ(f).
pub fn kernel_ft(model: &DistortionModel, f: f64) -> Complex64 {
    let i = Complex64::i();
    let tail: Complex64 = model
        .terms
        .iter()
        .map(|t| {
            let x = i * (2.0 * PI * f * t.tau);
            x * t.a / (1.0 + x)
        })
        .sum();
    match model.kind {
        DistortionKind::Intra => 1.0 + tail,
        DistortionKind::Cross => 1.0 + i * tail,
    }
}

/// One-pole unity-gain smoother with the input linearly interpolated between samples.
fn smooth(x: &[f64], dt: f64, tau: f64) -> Vec<f64> {
    let e = (-dt / tau).exp();
    // Weights of the exact solution of τ s' = x − s for piecewise-linear x.
    let g = tau / dt * (1.0 - e);
    let (w_prev, w_next) = (g - e, 1.0 - g);
    let mut out = Vec::with_capacity(x.len());
    let mut s = 0.0;
    for k in 0..x.len() {
        if k > 0 {
            s = e * s + w_prev * x[k - 1] + w_next * x[k];
        }
        out.push(s);
    }
    out
}

/// Applies the forward distortion in the time domain.
///
/// The system is at rest before the first sample, so a record that starts
/// with a nonzero value is treated as a step at `t = start_time`.
pub fn apply_distortion(waveform: &SampledWaveform, model: &DistortionModel) -> Result<Distorted> {
    waveform.validate()?;
    model.validate()?;
    let dt = waveform.dt;
    let mut i_out = waveform.i_samples.clone();
    let mut q_out = waveform.q_samples.clone();
    for t in &model.terms {
        let si = smooth(&waveform.i_samples, dt, t.tau);
        let sq = smooth(&waveform.q_samples, dt, t.tau);
        for k in 0..waveform.len() {
            let hi = t.a * (waveform.i_samples[k] - si[k]);
            let hq = t.a * (waveform.q_samples[k] - sq[k]);
            match model.kind {
                DistortionKind::Intra => {
                    i_out[k] += hi;
                    q_out[k] += hq;
                }
                DistortionKind::Cross => {
                    i_out[k] -= hq;
                    q_out[k] += hi;
                }
            }
        }
    }
    let last_nonzero = (0..waveform.len())
        .rev()
        .find(|&k| waveform.i_samples[k] != 0.0 || waveform.q_samples[k] != 0.0);
    let trailing = match last_nonzero {
        Some(k) => (waveform.len() - 1 - k) as f64 * dt,
        None => f64::INFINITY,
    };
    Ok(Distorted {
        waveform: SampledWaveform { dt, i_samples: i_out, q_samples: q_out, start_time: waveform.start_time },
        padding_warning: trailing < 10.0 * model.tau_max(),
    })
}

/// Default internal FFT padding: `max(10 τ_max, 4 · record length)`.
pub fn default_padding(waveform: &SampledWaveform, model: &DistortionModel) -> f64 {
    (10.0 * model.tau_max()).max(4.0 * waveform.len() as f64 * waveform.dt)
}

/// Inverse filter `x̂_pred = x̂ / ĥ`, returned on the input sample grid.
///
/// Cross-quadrature inversion is provided but only the forward cross model is validated.
pub fn predistort_waveform(waveform: &SampledWaveform, model: &DistortionModel) -> Result<SampledWaveform> {
    predistort_with_padding(waveform, model, default_padding(waveform, model))
}

pub fn predistort_with_padding(
    waveform: &SampledWaveform,
    model: &DistortionModel,
    padding: f64,
) -> Result<SampledWaveform> {
    waveform.validate()?;
    model.validate()?;
    if model.terms.iter().all(|t| t.a == 0.0) || waveform.is_empty() {
        return Ok(waveform.clone());
    }
    // ĥ tends to a constant at high frequency; a vanishing limit cannot be inverted on any grid.
    let limit = kernel_ft(model, HIGH_FREQUENCY_PROBE).norm();
    if !(limit >= MIN_KERNEL_MAGNITUDE) {
        return Err(Error::NonInvertible { freq: f64::INFINITY, magnitude: limit });
    }
    let len = waveform.len();
    let n = (len + (padding / waveform.dt).ceil() as usize).next_power_of_two();
    let mut buf: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..len {
        buf[k] = Complex64::new(waveform.i_samples[k], waveform.q_samples[k]);
    }
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let df = 1.0 / (n as f64 * waveform.dt);
    for (k, v) in buf.iter_mut().enumerate() {
        let f = if k <= n / 2 { k as f64 * df } else { (k as f64 - n as f64) * df };
        let h = kernel_ft(model, f);
        if h.norm() < MIN_KERNEL_MAGNITUDE {
            return Err(Error::NonInvertible { freq: f, magnitude: h.norm() });
        }
        *v /= h;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    Ok(SampledWaveform {
        dt: waveform.dt,
        i_samples: buf[..len].iter().map(|z| z.re * scale).collect(),
        q_samples: buf[..len].iter().map(|z| z.im * scale).collect(),
        start_time: waveform.start_time,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dc_and_high_frequency_gain() {
        let m = DistortionModel::intra(-0.028, 8e-9);
        assert!((kernel_ft(&m, 0.0) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((kernel_ft(&m, 1e15) - Complex64::new(0.972, 0.0)).norm() < 1e-6);
    }

    #[test]
    fn empty_model_is_identity() {
        let w = SampledWaveform::new(1e-10, vec![0.0, 1.0, 2.0, 0.5], vec![0.0, -1.0, 0.0, 0.0]).unwrap();
        let d = apply_distortion(&w, &DistortionModel::identity()).unwrap();
        assert_eq!(d.waveform, w);
        assert_eq!(predistort_waveform(&w, &DistortionModel::identity()).unwrap(), w);
    }

    #[test]
    fn step_response_matches_closed_form() {
        let (a, tau, dt) = (-0.028, 8e-9, 0.05e-9);
        let n = 4000;
        let w = SampledWaveform::new(dt, vec![1.0; n], vec![0.0; n]).unwrap();
        let y = apply_distortion(&w, &DistortionModel::intra(a, tau)).unwrap().waveform;
        for k in 0..n {
            let exact = 1.0 + a * (-(k as f64) * dt / tau).exp();
            assert!((y.i_samples[k] - exact).abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn unstable_parameters_rejected() {
        assert!(DistortionModel::intra(-1.0, 8e-9).validate().is_err());
        assert!(DistortionModel::intra(0.1, 0.0).validate().is_err());
    }
}

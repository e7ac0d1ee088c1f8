//! Envelope spectra in the baseband.
//!
//! Sign convention: `X̂(f) = ∫ x(t) e^{−i2πft} dt`. The complex envelope is
//! `Ω_IQ = Ω_I − iΩ_Q`, whose transform is `[1 − 2πβf/α] · Ω̂_I(f)` for DRAG.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::envelopes::{DragConfig, EnvelopeKind, EnvelopeSpec, SampledWaveform, eval_envelope};
use crate::error::{Error, Result};
use crate::fast_synth::basis_ft;
use crate::hd_drag::even_polynomial;
use crate::quad;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    I,
    Iq,
}

/// How a spectral value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumMethod {
    Analytic,
    /// Direct quadrature of the Fourier integral (families without a closed form here).
    Numerical,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumValue {
    pub value: Complex64,
    pub method: SpectrumMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandEnergy {
    pub f_low: f64,
    pub f_high: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandSuppression {
    pub f_low: f64,
    pub f_high: f64,
    pub db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumReport {
    pub freqs: Vec<f64>,
    pub amplitude_i: Vec<f64>,
    pub amplitude_iq: Vec<f64>,
    pub band_energies: Vec<BandEnergy>,
    pub suppression_db: Vec<BandSuppression>,
}

/// Closed-form Ω̂_I(f) for the cosine-series families.
fn closed_form_i(spec: &EnvelopeSpec, f: f64) -> Option<Complex64> {
    let t_p = spec.duration;
    let base = match &spec.kind {
        EnvelopeKind::Cosine => basis_ft(1, t_p, f) * 0.5,
        EnvelopeKind::FastSeries { coeffs } => {
            coeffs.iter().enumerate().map(|(n, c)| basis_ft(n + 1, t_p, f) * *c).sum()
        }
        EnvelopeKind::HdSeries { d_coeffs, beta_even } => {
            let g: Complex64 = d_coeffs.iter().enumerate().map(|(k, d)| basis_ft(k + 1, t_p, f) * *d).sum();
            g * even_polynomial(beta_even, f)
        }
        _ => return None,
    };
    Some(base * spec.amplitude)
}

fn numerical_i(spec: &EnvelopeSpec, f: f64) -> Complex64 {
    let t_p = spec.duration;
    let scale = spec.peak_abs(64).max(f64::MIN_POSITIVE) * t_p;
    let tol = 1e-13 * scale;
    let w = 2.0 * PI * f;
    let re = quad::integrate(|t| eval_envelope(spec, t) * (w * t).cos(), 0.0, t_p, tol).unwrap_or(f64::NAN);
    let im = quad::integrate(|t| -eval_envelope(spec, t) * (w * t).sin(), 0.0, t_p, tol).unwrap_or(f64::NAN);
    Complex64::new(re, im)
}

/// Ω̂_I(f), analytic where a closed form exists.
pub fn i_spectrum(spec: &EnvelopeSpec, f: f64) -> SpectrumValue {
    match closed_form_i(spec, f) {
        Some(value) => SpectrumValue { value, method: SpectrumMethod::Analytic },
        None => SpectrumValue { value: numerical_i(spec, f), method: SpectrumMethod::Numerical },
    }
}

/// The DRAG factor `1 − 2πβf/α` (unity without DRAG).
pub fn drag_factor(drag: &DragConfig, f: f64) -> f64 {
    1.0 + 2.0 * PI * f * drag.derivative_gain()
}

/// Ω̂_IQ(f) = [1 − 2πβf/α] · Ω̂_I(f).
pub fn analytic_iq_spectrum(spec: &EnvelopeSpec, drag: &DragConfig, f: f64) -> SpectrumValue {
    let v = i_spectrum(spec, f);
    SpectrumValue { value: v.value * drag_factor(drag, f), method: v.method }
}

pub fn component_spectrum(spec: &EnvelopeSpec, drag: &DragConfig, f: f64, component: Component) -> Complex64 {
    match component {
        Component::I => i_spectrum(spec, f).value,
        Component::Iq => analytic_iq_spectrum(spec, drag, f).value,
    }
}

/// ∫_{f_l}^{f_h} |Ω̂(f)|² df for the chosen component.
pub fn band_energy(spec: &EnvelopeSpec, drag: &DragConfig, f_l: f64, f_h: f64, component: Component) -> Result<f64> {
    if f_l > f_h {
        return Err(Error::config(format!("band [{f_l:e}, {f_h:e}] Hz has f_low > f_high")));
    }
    if f_l == f_h {
        return Ok(0.0);
    }
    // Tolerance relative to the pulse energy bound peak²·t_p. The DC value is
    // no measure of it for envelopes whose lobes nearly cancel in area.
    let scale = spec.peak_abs(64).powi(2) * spec.duration;
    quad::integrate(|f| component_spectrum(spec, drag, f, component).norm_sqr(), f_l, f_h, 1e-15 * scale)
}

fn band_db(energy: f64, reference: f64) -> f64 {
    10.0 * (energy / reference).log10()
}

/// Analytic report on a frequency grid with band energies of Ω_IQ and their
/// suppression relative to the same-θ raised-cosine pulse under the same DRAG setting.
pub fn spectrum_report(
    spec: &EnvelopeSpec,
    drag: &DragConfig,
    freqs: &[f64],
    bands: &[(f64, f64)],
) -> Result<SpectrumReport> {
    spec.validate()?;
    drag.validate()?;
    let reference = EnvelopeSpec::cosine(spec.duration, spec.rotation_angle);
    let mut band_energies = Vec::new();
    let mut suppression_db = Vec::new();
    for &(lo, hi) in bands {
        let e = band_energy(spec, drag, lo, hi, Component::Iq)?;
        let r = band_energy(&reference, drag, lo, hi, Component::Iq)?;
        band_energies.push(BandEnergy { f_low: lo, f_high: hi, energy: e });
        suppression_db.push(BandSuppression { f_low: lo, f_high: hi, db: band_db(e, r) });
    }
    Ok(SpectrumReport {
        freqs: freqs.to_vec(),
        amplitude_i: freqs.iter().map(|&f| i_spectrum(spec, f).value.norm()).collect(),
        amplitude_iq: freqs.iter().map(|&f| analytic_iq_spectrum(spec, drag, f).value.norm()).collect(),
        band_energies,
        suppression_db,
    })
}

/// Discrete spectrum of a sampled waveform, zero-padded to `zero_pad_to` points.
///
/// Bins are spaced by `1/(zero_pad_to·dt)` and returned in ascending frequency
/// order; amplitudes are multiplied by `dt` to approximate the continuous transform.
pub fn fft_spectrum(waveform: &SampledWaveform, zero_pad_to: usize) -> Result<SpectrumReport> {
    waveform.validate()?;
    if waveform.is_empty() {
        return Err(Error::config("cannot transform an empty waveform"));
    }
    if zero_pad_to < waveform.len() {
        return Err(Error::config(format!(
            "zero_pad_to = {zero_pad_to} is shorter than the {} samples",
            waveform.len()
        )));
    }
    let n = zero_pad_to;
    let mut iq: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); n];
    let mut ii: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..waveform.len() {
        iq[k] = Complex64::new(waveform.i_samples[k], -waveform.q_samples[k]);
        ii[k] = Complex64::new(waveform.i_samples[k], 0.0);
    }
    let fft = FftPlanner::new().plan_fft_forward(n);
    fft.process(&mut iq);
    fft.process(&mut ii);
    let df = 1.0 / (n as f64 * waveform.dt);
    let half = n.div_ceil(2);
    let order: Vec<usize> = (half..n).chain(0..half).collect();
    let freq = |k: usize| if k < half { k as f64 * df } else { (k as f64 - n as f64) * df };
    Ok(SpectrumReport {
        freqs: order.iter().map(|&k| freq(k)).collect(),
        amplitude_i: order.iter().map(|&k| ii[k].norm() * waveform.dt).collect(),
        amplitude_iq: order.iter().map(|&k| iq[k].norm() * waveform.dt).collect(),
        band_energies: Vec::new(),
        suppression_db: Vec::new(),
    })
}

impl SpectrumReport {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["f_MHz", "abs_I", "abs_IQ"])?;
        for k in 0..self.freqs.len() {
            out.write_record(&[
                format!("{:.12e}", self.freqs[k] * 1e-6),
                format!("{:.12e}", self.amplitude_i[k]),
                format!("{:.12e}", self.amplitude_iq[k]),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

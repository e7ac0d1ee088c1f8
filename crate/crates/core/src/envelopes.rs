//! Control-envelope families, the DRAG quadrature transform and sampling.
//!
//! Every family is written as `Ω_I(t) = A · b(t)` where `b` is a fixed base
//! shape supported on `[0, t_p]`:
//!
//! ```text
//! Cosine            b = [1 − cos(2πt/t_p)] / 2
//! Gaussian          b = exp[−(t − t_p/2)² / 2σ²] − exp[−t_p² / 8σ²]   (offset optional)
//! FastSeries        b = Σ_n c_n [1 − cos(2πnt/t_p)]                    (c_n in 1/s)
//! HdSeries          b = Σ_n β_2n g^(2n)(t),  g = Σ_k d_k [1 − cos(2πkt/t_p)]
//! SquareCosineRise  b = cosine rise over t_r, flat top, mirrored fall
//! ```
//!
//! The quadrature is `Ω_Q = −β Ω̇_I / α`. All derivatives are analytic.
//! Because the FastSeries base already carries units of 1/s, its amplitude is a
//! dimensionless scale factor (unit amplitude gives area `Σ c_n t_p`).

use std::f64::consts::PI;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default Gaussian width as a fraction of the pulse duration.
pub const DEFAULT_SIGMA_RATIO: f64 = 0.2;
/// Default rise time of the flat-top calibration pulse.
pub const DEFAULT_RISE_TIME: f64 = 6.25e-9;
/// Sample interval of a 2.4 GSa/s waveform generator.
pub const AWG_DT: f64 = 1.0 / 2.4e9;

#[derive(Debug, Clone, PartialEq)]
pub enum EnvelopeKind {
    Cosine,
    Gaussian { sigma_ratio: f64, subtract_offset: bool },
    FastSeries { coeffs: Vec<f64> },
    HdSeries { d_coeffs: Vec<f64>, beta_even: Vec<f64> },
    SquareCosineRise { rise_time: f64 },
}

impl EnvelopeKind {
    pub fn name(&self) -> &'static str {
        match self {
            EnvelopeKind::Cosine => "cosine",
            EnvelopeKind::Gaussian { .. } => "gaussian",
            EnvelopeKind::FastSeries { .. } => "fast_series",
            EnvelopeKind::HdSeries { .. } => "hd_series",
            EnvelopeKind::SquareCosineRise { .. } => "square_cosine_rise",
        }
    }
}

/// Parametric in-phase envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEnvelope", into = "RawEnvelope")]
pub struct EnvelopeSpec {
    pub kind: EnvelopeKind,
    /// Pulse duration t_p in seconds.
    pub duration: f64,
    /// Drive scale A.
    pub amplitude: f64,
    /// Target rotation angle θ in radians.
    pub rotation_angle: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DragVariant {
    DragP,
    DragL,
    NoDrag,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DragConfig {
    pub beta: f64,
    /// Anharmonicity α in rad/s.
    pub alpha: f64,
    pub variant: DragVariant,
}

impl DragConfig {
    pub fn new(beta: f64, alpha: f64, variant: DragVariant) -> Self {
        Self { beta, alpha, variant }
    }

    pub fn none() -> Self {
        Self { beta: 0.0, alpha: -2.0 * PI * 212e6, variant: DragVariant::NoDrag }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.beta.is_finite() {
            return Err(Error::config("DRAG beta must be finite"));
        }
        if self.variant != DragVariant::NoDrag && (self.alpha == 0.0 || !self.alpha.is_finite()) {
            return Err(Error::config("DRAG requires a finite nonzero anharmonicity"));
        }
        Ok(())
    }

    /// Multiplier applied to Ω̇_I to obtain Ω_Q.
    pub fn derivative_gain(&self) -> f64 {
        match self.variant {
            DragVariant::NoDrag => 0.0,
            _ => -self.beta / self.alpha,
        }
    }
}

/// Uniformly sampled I/Q waveform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledWaveform {
    pub dt: f64,
    pub i_samples: Vec<f64>,
    pub q_samples: Vec<f64>,
    pub start_time: f64,
}

// m-th derivative of cos evaluated through the phase-shift identity.
fn cos_derivative(x: f64, omega: f64, m: u32) -> f64 {
    let w = omega.powi(m as i32);
    match m % 4 {
        0 => w * x.cos(),
        1 => -w * x.sin(),
        2 => -w * x.cos(),
        _ => w * x.sin(),
    }
}

/// m-th derivative of the cosine-series term `1 − cos(2πkt/t_p)`.
pub fn cosine_term_derivative(k: usize, t_p: f64, t: f64, m: u32) -> f64 {
    let omega = 2.0 * PI * k as f64 / t_p;
    let x = omega * t;
    if m == 0 {
        1.0 - x.cos()
    } else {
        -cos_derivative(x, omega, m)
    }
}

fn hermite_prob(n: u32, x: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, x);
    if n == 0 {
        return h0;
    }
    for k in 1..n {
        let h2 = x * h1 - k as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

impl EnvelopeSpec {
    pub fn new(kind: EnvelopeKind, duration: f64, amplitude: f64, rotation_angle: f64) -> Result<Self> {
        let s = Self { kind, duration, amplitude, rotation_angle };
        s.validate()?;
        Ok(s)
    }

    /// Raised cosine whose amplitude reaches θ by the area theorem.
    pub fn cosine(duration: f64, theta: f64) -> Self {
        Self { kind: EnvelopeKind::Cosine, duration, amplitude: 2.0 * theta / duration, rotation_angle: theta }
    }

    pub fn gaussian(duration: f64, theta: f64) -> Self {
        let mut s = Self {
            kind: EnvelopeKind::Gaussian { sigma_ratio: DEFAULT_SIGMA_RATIO, subtract_offset: true },
            duration,
            amplitude: 1.0,
            rotation_angle: theta,
        };
        s.amplitude = s.area_theorem_amplitude().unwrap_or(1.0);
        s
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::config(format!("pulse duration must be positive, got {}", self.duration)));
        }
        if !self.amplitude.is_finite() || !self.rotation_angle.is_finite() {
            return Err(Error::config("amplitude and rotation angle must be finite"));
        }
        match &self.kind {
            EnvelopeKind::Cosine => {}
            EnvelopeKind::Gaussian { sigma_ratio, .. } => {
                if !(*sigma_ratio > 0.0 && sigma_ratio.is_finite()) {
                    return Err(Error::config("gaussian sigma_ratio must be positive"));
                }
            }
            EnvelopeKind::FastSeries { coeffs } => {
                if coeffs.is_empty() {
                    return Err(Error::config("fast_series needs at least one coefficient"));
                }
                if coeffs.iter().any(|c| !c.is_finite()) {
                    return Err(Error::config("fast_series coefficients must be finite"));
                }
            }
            EnvelopeKind::HdSeries { d_coeffs, beta_even } => {
                if d_coeffs.is_empty() || beta_even.is_empty() {
                    return Err(Error::config("hd_series needs basis and beta coefficients"));
                }
                if d_coeffs.iter().chain(beta_even).any(|c| !c.is_finite()) {
                    return Err(Error::config("hd_series coefficients must be finite"));
                }
            }
            EnvelopeKind::SquareCosineRise { rise_time } => {
                if !(*rise_time > 0.0) || 2.0 * rise_time > self.duration {
                    return Err(Error::config(format!(
                        "rise time {rise_time:e} s incompatible with duration {:e} s",
                        self.duration
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn with_amplitude(&self, amplitude: f64) -> Self {
        Self { amplitude, ..self.clone() }
    }

    /// m-th time derivative of the base shape (amplitude excluded).
    pub fn base_derivative(&self, t: f64, m: u32) -> f64 {
        let t_p = self.duration;
        if !(0.0..=t_p).contains(&t) {
            return 0.0;
        }
        match &self.kind {
            EnvelopeKind::Cosine => 0.5 * cosine_term_derivative(1, t_p, t, m),
            EnvelopeKind::FastSeries { coeffs } => coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| c * cosine_term_derivative(i + 1, t_p, t, m))
                .sum(),
            EnvelopeKind::HdSeries { d_coeffs, beta_even } => beta_even
                .iter()
                .enumerate()
                .map(|(n, b)| {
                    let order = 2 * n as u32 + m;
                    b * d_coeffs
                        .iter()
                        .enumerate()
                        .map(|(k, d)| d * cosine_term_derivative(k + 1, t_p, t, order))
                        .sum::<f64>()
                })
                .sum(),
            EnvelopeKind::Gaussian { sigma_ratio, subtract_offset } => {
                let sigma = sigma_ratio * t_p;
                let x = (t - 0.5 * t_p) / sigma;
                let g = (-0.5 * x * x).exp();
                let mut v = (-1.0 / sigma).powi(m as i32) * hermite_prob(m, x) * g;
                if m == 0 && *subtract_offset {
                    v -= (-t_p * t_p / (8.0 * sigma * sigma)).exp();
                }
                v
            }
            EnvelopeKind::SquareCosineRise { rise_time } => {
                let tr = *rise_time;
                let omega = PI / tr;
                if t < tr {
                    if m == 0 { 0.5 * (1.0 - (omega * t).cos()) } else { -0.5 * cos_derivative(omega * t, omega, m) }
                } else if t > t_p - tr {
                    let s = t_p - t;
                    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                    if m == 0 {
                        0.5 * (1.0 - (omega * s).cos())
                    } else {
                        -0.5 * sign * cos_derivative(omega * s, omega, m)
                    }
                } else if m == 0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// ∫ b(t) dt over the support.
    pub fn base_area(&self) -> f64 {
        let t_p = self.duration;
        match &self.kind {
            EnvelopeKind::Cosine => 0.5 * t_p,
            EnvelopeKind::FastSeries { coeffs } => coeffs.iter().sum::<f64>() * t_p,
            // Derivative terms integrate to zero because g' vanishes at both ends.
            EnvelopeKind::HdSeries { d_coeffs, beta_even } => {
                beta_even.first().copied().unwrap_or(0.0) * d_coeffs.iter().sum::<f64>() * t_p
            }
            EnvelopeKind::SquareCosineRise { rise_time } => t_p - rise_time,
            EnvelopeKind::Gaussian { .. } => {
                crate::quad::integrate(|t| self.base_derivative(t, 0), 0.0, t_p, 1e-15 * t_p)
                    .unwrap_or(f64::NAN)
            }
        }
    }

    /// Amplitude for which the pulse area equals θ.
    pub fn area_theorem_amplitude(&self) -> Result<f64> {
        let area = self.base_area();
        if !(area.abs() > 0.0) || !area.is_finite() {
            return Err(Error::config("envelope has zero area; cannot set amplitude from θ"));
        }
        Ok(self.rotation_angle / area)
    }

    /// Largest |Ω_I| over a uniform grid with `n_grid` intervals.
    pub fn peak_abs(&self, n_grid: usize) -> f64 {
        (0..=n_grid)
            .map(|k| eval_envelope(self, self.duration * k as f64 / n_grid as f64).abs())
            .fold(0.0, f64::max)
    }
}

/// In-phase envelope Ω_I(t).
pub fn eval_envelope(spec: &EnvelopeSpec, t: f64) -> f64 {
    spec.amplitude * spec.base_derivative(t, 0)
}

/// (Ω_I(t), Ω_Q(t)) with the DRAG quadrature.
pub fn apply_drag(spec: &EnvelopeSpec, drag: &DragConfig, t: f64) -> (f64, f64) {
    let i = eval_envelope(spec, t);
    let gain = drag.derivative_gain();
    let q = if gain == 0.0 { 0.0 } else { gain * spec.amplitude * spec.base_derivative(t, 1) };
    (i, q)
}

/// Number of grid points `k·dt` that fall inside `[0, t_p]`.
pub fn sample_count(t_p: f64, dt: f64) -> usize {
    let ratio = t_p / dt;
    let nearest = ratio.round();
    let whole = if (ratio - nearest).abs() < 1e-9 * ratio.max(1.0) { nearest } else { ratio.floor() };
    whole as usize + 1
}

/// Samples Ω_I and Ω_Q at `t = k·dt` over the closed support `[0, t_p]`.
pub fn sample_waveform(spec: &EnvelopeSpec, drag: &DragConfig, dt: f64) -> Result<SampledWaveform> {
    spec.validate()?;
    drag.validate()?;
    if !(dt > 0.0) || dt > spec.duration {
        return Err(Error::config(format!("sample interval {dt:e} s must lie in (0, t_p]")));
    }
    let n = sample_count(spec.duration, dt);
    let mut i_samples = Vec::with_capacity(n);
    let mut q_samples = Vec::with_capacity(n);
    for k in 0..n {
        let (i, q) = apply_drag(spec, drag, k as f64 * dt);
        i_samples.push(i);
        q_samples.push(q);
    }
    Ok(SampledWaveform { dt, i_samples, q_samples, start_time: 0.0 })
}

/// Drive-induced qubit frequency shift `−2Ω_I² / (4α)`.
pub fn ac_stark_shift(omega_i: f64, alpha: f64) -> f64 {
    -2.0 * omega_i * omega_i / (4.0 * alpha)
}

impl SampledWaveform {
    pub fn new(dt: f64, i_samples: Vec<f64>, q_samples: Vec<f64>) -> Result<Self> {
        let w = Self { dt, i_samples, q_samples, start_time: 0.0 };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::config("waveform dt must be positive"));
        }
        if self.i_samples.len() != self.q_samples.len() {
            return Err(Error::config("I and Q sample counts differ"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.i_samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.i_samples.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.start_time + k as f64 * self.dt
    }

    /// Appends `n` zero samples to both quadratures.
    pub fn padded(mut self, n: usize) -> Self {
        self.i_samples.resize(self.i_samples.len() + n, 0.0);
        self.q_samples.resize(self.q_samples.len() + n, 0.0);
        self
    }

    /// Appends zeros so the waveform covers at least `duration` seconds of trailing silence.
    pub fn padded_for(self, duration: f64) -> Self {
        let n = (duration / self.dt).ceil() as usize;
        self.padded(n)
    }

    /// Linearly interpolated (I, Q) at absolute time `t`; zero outside the record.
    pub fn interpolate(&self, t: f64) -> (f64, f64) {
        let x = (t - self.start_time) / self.dt;
        if x < 0.0 || self.is_empty() {
            return (0.0, 0.0);
        }
        let k = x.floor() as usize;
        let last = self.len() - 1;
        if k >= last {
            return if k == last && x - k as f64 == 0.0 {
                (self.i_samples[last], self.q_samples[last])
            } else {
                (0.0, 0.0)
            };
        }
        let f = x - k as f64;
        (
            self.i_samples[k] * (1.0 - f) + self.i_samples[k + 1] * f,
            self.q_samples[k] * (1.0 - f) + self.q_samples[k + 1] * f,
        )
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t_ns", "I", "Q"])?;
        for k in 0..self.len() {
            out.write_record(&[
                format!("{:.17e}", self.time(k) * 1e9),
                format!("{:.17e}", self.i_samples[k]),
                format!("{:.17e}", self.q_samples[k]),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a `(t_ns, I, Q)` CSV; the sample interval is taken from the first two rows.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        let expected = ["t_ns", "I", "Q"];
        if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h.trim() != e) {
            return Err(Error::config(format!("waveform CSV header must be t_ns,I,Q (got {:?})", headers)));
        }
        let mut t = Vec::new();
        let mut i_samples = Vec::new();
        let mut q_samples = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parse = |j: usize| -> Result<f64> {
                rec[j].trim().parse::<f64>().map_err(|_| {
                    Error::config(format!("waveform CSV row {}: column {} is not a number", row + 2, expected[j]))
                })
            };
            t.push(parse(0)? * 1e-9);
            i_samples.push(parse(1)?);
            q_samples.push(parse(2)?);
        }
        if t.len() < 2 {
            return Err(Error::config("waveform CSV needs at least two samples"));
        }
        let dt = t[1] - t[0];
        for (k, pair) in t.windows(2).enumerate() {
            if ((pair[1] - pair[0]) - dt).abs() > 1e-6 * dt {
                return Err(Error::config(format!("waveform CSV is not uniformly sampled at row {}", k + 3)));
            }
        }
        let w = Self { dt, i_samples, q_samples, start_time: t[0] };
        w.validate()?;
        Ok(w)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnvelope {
    kind: String,
    duration: f64,
    amplitude: f64,
    rotation_angle: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    subtract_offset: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coeffs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    d_coeffs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta_even: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rise_time: Option<f64>,
}

impl TryFrom<RawEnvelope> for EnvelopeSpec {
    type Error = Error;

    fn try_from(r: RawEnvelope) -> Result<Self> {
        let need = |name: &str, present: bool| {
            if present { Ok(()) } else { Err(Error::config(format!("envelope kind '{}' requires '{name}'", r.kind))) }
        };
        let stray = |fields: &[(&str, bool)]| -> Result<()> {
            match fields.iter().find(|(_, set)| *set) {
                Some((name, _)) => Err(Error::config(format!("field '{name}' does not apply to kind '{}'", r.kind))),
                None => Ok(()),
            }
        };
        let kind = match r.kind.as_str() {
            "cosine" => {
                stray(&[
                    ("sigma_ratio", r.sigma_ratio.is_some()),
                    ("coeffs", r.coeffs.is_some()),
                    ("d_coeffs", r.d_coeffs.is_some()),
                    ("rise_time", r.rise_time.is_some()),
                ])?;
                EnvelopeKind::Cosine
            }
            "gaussian" => {
                stray(&[("coeffs", r.coeffs.is_some()), ("d_coeffs", r.d_coeffs.is_some())])?;
                EnvelopeKind::Gaussian {
                    sigma_ratio: r.sigma_ratio.unwrap_or(DEFAULT_SIGMA_RATIO),
                    subtract_offset: r.subtract_offset.unwrap_or(true),
                }
            }
            "fast_series" => {
                need("coeffs", r.coeffs.is_some())?;
                stray(&[("d_coeffs", r.d_coeffs.is_some()), ("sigma_ratio", r.sigma_ratio.is_some())])?;
                EnvelopeKind::FastSeries { coeffs: r.coeffs.clone().unwrap_or_default() }
            }
            "hd_series" => {
                need("d_coeffs", r.d_coeffs.is_some())?;
                need("beta_even", r.beta_even.is_some())?;
                stray(&[("coeffs", r.coeffs.is_some())])?;
                EnvelopeKind::HdSeries {
                    d_coeffs: r.d_coeffs.clone().unwrap_or_default(),
                    beta_even: r.beta_even.clone().unwrap_or_default(),
                }
            }
            "square_cosine_rise" => EnvelopeKind::SquareCosineRise { rise_time: r.rise_time.unwrap_or(DEFAULT_RISE_TIME) },
            other => return Err(Error::config(format!("unknown envelope kind '{other}'"))),
        };
        EnvelopeSpec::new(kind, r.duration, r.amplitude, r.rotation_angle)
    }
}

impl From<EnvelopeSpec> for RawEnvelope {
    fn from(s: EnvelopeSpec) -> Self {
        let mut r = RawEnvelope {
            kind: s.kind.name().to_string(),
            duration: s.duration,
            amplitude: s.amplitude,
            rotation_angle: s.rotation_angle,
            sigma_ratio: None,
            subtract_offset: None,
            coeffs: None,
            d_coeffs: None,
            beta_even: None,
            rise_time: None,
        };
        match s.kind {
            EnvelopeKind::Cosine => {}
            EnvelopeKind::Gaussian { sigma_ratio, subtract_offset } => {
                r.sigma_ratio = Some(sigma_ratio);
                r.subtract_offset = Some(subtract_offset);
            }
            EnvelopeKind::FastSeries { coeffs } => r.coeffs = Some(coeffs),
            EnvelopeKind::HdSeries { d_coeffs, beta_even } => {
                r.d_coeffs = Some(d_coeffs);
                r.beta_even = Some(beta_even);
            }
            EnvelopeKind::SquareCosineRise { rise_time } => r.rise_time = Some(rise_time),
        }
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALPHA: f64 = -2.0 * PI * 212e6;

    #[test]
    fn cosine_peak_at_midpoint() {
        let s = EnvelopeSpec::new(EnvelopeKind::Cosine, 10e-9, 1.0, PI / 2.0).unwrap();
        assert!((eval_envelope(&s, 5e-9) - 1.0).abs() < 1e-15);
        assert_eq!(eval_envelope(&s, -1e-12), 0.0);
        assert_eq!(eval_envelope(&s, 10.001e-9), 0.0);
    }

    #[test]
    fn hd_midpoint_value() {
        let t_p = 6e-9;
        let s = EnvelopeSpec::new(
            EnvelopeKind::HdSeries { d_coeffs: vec![4.0 / 3.0, -1.0 / 3.0], beta_even: vec![1.0, 0.0] },
            t_p,
            1.0,
            PI / 2.0,
        )
        .unwrap();
        assert!((eval_envelope(&s, t_p / 2.0) - 8.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn fast_series_zero_at_start() {
        let s = EnvelopeSpec::new(EnvelopeKind::FastSeries { coeffs: vec![1e8, 2e7, -3e6, 1e6] }, 6e-9, 1.0, 0.7)
            .unwrap();
        assert_eq!(eval_envelope(&s, 0.0), 0.0);
    }

    #[test]
    fn empty_coefficients_rejected() {
        let e = EnvelopeSpec::new(EnvelopeKind::FastSeries { coeffs: vec![] }, 6e-9, 1.0, 1.0);
        assert!(matches!(e, Err(Error::Config(_))));
    }

    #[test]
    fn drag_off_and_endpoint_derivative() {
        let s = EnvelopeSpec::cosine(6e-9, PI / 2.0);
        let d0 = DragConfig::new(0.0, ALPHA, DragVariant::DragL);
        for k in 0..=20 {
            assert_eq!(apply_drag(&s, &d0, 6e-9 * k as f64 / 20.0).1, 0.0);
        }
        let d1 = DragConfig::new(1.0, ALPHA, DragVariant::DragL);
        assert!(apply_drag(&s, &d1, 0.0).1.abs() < 1e-6);
        let nd = DragConfig::new(1.0, ALPHA, DragVariant::NoDrag);
        assert_eq!(apply_drag(&s, &nd, 2e-9).1, 0.0);
    }

    #[test]
    fn awg_sample_count() {
        let s = EnvelopeSpec::cosine(6e-9, PI / 2.0);
        let w = sample_waveform(&s, &DragConfig::none(), AWG_DT).unwrap();
        assert_eq!(w.len(), 15);
        let w = sample_waveform(&s, &DragConfig::none(), 6e-9 / 64.0).unwrap();
        assert_eq!(w.len(), 65);
    }

    #[test]
    fn stark_shift_value() {
        assert_eq!(ac_stark_shift(0.0, ALPHA), 0.0);
        let d = ac_stark_shift(2.0 * PI * 50e6, ALPHA) / (2.0 * PI);
        let independent = 2.0 * 50e6 * 50e6 / (4.0 * 212e6);
        assert!((d - independent).abs() < 1e-6);
        assert!((d - 5.896e6).abs() < 1e3);
    }

    #[test]
    fn json_round_trip_and_unknown_field() {
        let s = EnvelopeSpec::new(
            EnvelopeKind::Gaussian { sigma_ratio: 0.25, subtract_offset: false },
            8e-9,
            3e8,
            PI / 2.0,
        )
        .unwrap();
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.contains("\"kind\":\"gaussian\""));
        let back: EnvelopeSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        let bad = text.replace("\"kind\"", "\"colour\":1,\"kind\"");
        assert!(serde_json::from_str::<EnvelopeSpec>(&bad).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let s = EnvelopeSpec::cosine(6e-9, PI / 2.0);
        let d = DragConfig::new(0.5, ALPHA, DragVariant::DragP);
        let w = sample_waveform(&s, &d, 6e-9 / 32.0).unwrap();
        let mut buf = Vec::new();
        w.write_csv(&mut buf).unwrap();
        let back = SampledWaveform::read_csv(&buf[..]).unwrap();
        assert_eq!(back.len(), w.len());
        for k in 0..w.len() {
            assert!((back.i_samples[k] - w.i_samples[k]).abs() <= 1e-15 * w.i_samples[k].abs().max(1.0));
        }
        assert!((back.dt - w.dt).abs() < 1e-9 * w.dt);
    }
}

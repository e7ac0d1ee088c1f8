use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benchmarking::{RbConfig, fit_leakage_rb, fit_rb, run_rb};
use crate::calibration::{CalibrationConfig, full_calibration};
use crate::envelopes::{DEFAULT_SIGMA_RATIO, DragVariant, EnvelopeKind, EnvelopeSpec};
use crate::error::{Error, Result};
use crate::fast_synth::{HeuristicParams, SuppressionProblem, fast_envelope_spec, heuristic_hyperparams, solve_fast};
use crate::hd_drag::{HdProblem, hd_envelope_spec, solve_hd};
use crate::simulator::{CalibratedPulse, DEFAULT_DELAY, TransmonModel, gate_error_cardinal};

pub const SWEEP_SCHEMA: &str = "pulseforge.sweep/1";

/// How the in-phase envelope of an experiment is built.
///
/// FAST fields left out fall back to the anharmonicity heuristic; the HD
/// suppressed frequency defaults to `|α|/2π`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum PulseRecipe {
    Cosine {},
    Gaussian {
        #[serde(default = "default_sigma_ratio")]
        sigma_ratio: f64,
        #[serde(default = "default_true")]
        subtract_offset: bool,
    },
    Fast {
        #[serde(default)]
        n_terms: Option<usize>,
        #[serde(default)]
        f_c: Option<f64>,
        #[serde(default)]
        w_ef: Option<f64>,
        #[serde(default)]
        interval_center: Option<f64>,
        #[serde(default)]
        interval_width: Option<f64>,
    },
    Hd {
        #[serde(default = "default_k")]
        k: usize,
        #[serde(default)]
        beta2_freq: Option<f64>,
    },
}

fn default_sigma_ratio() -> f64 {
    DEFAULT_SIGMA_RATIO
}
fn default_true() -> bool {
    true
}
fn default_k() -> usize {
    1
}
fn default_theta() -> f64 {
    PI / 2.0
}
fn default_delay() -> f64 {
    DEFAULT_DELAY
}

/// Model, pulse recipe, calibration and optional benchmarking of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub model: TransmonModel,
    /// Gate duration t_g = t_p + t_d in seconds.
    pub gate_duration: f64,
    #[serde(default = "default_delay")]
    pub delay: f64,
    #[serde(default = "default_theta")]
    pub rotation_angle: f64,
    pub pulse: PulseRecipe,
    #[serde(default)]
    pub calibration: CalibrationConfig,
    #[serde(default)]
    pub benchmark: Option<RbConfig>,
}

/// Resolved FAST problem with the heuristic it started from.
pub fn fast_problem(
    alpha: f64,
    variant: DragVariant,
    theta: f64,
    t_p: f64,
    overrides: (Option<usize>, Option<f64>, Option<f64>, Option<f64>, Option<f64>),
) -> Result<(HeuristicParams, SuppressionProblem)> {
    let (n_terms, f_c, w_ef, center, width) = overrides;
    let mut h = heuristic_hyperparams(alpha, if variant == DragVariant::NoDrag { DragVariant::DragL } else { variant })?;
    if let Some(n) = n_terms {
        h.n_terms = n;
    }
    if let Some(f) = f_c {
        h.f_c = f;
        h.f_h_2 = h.f_h_2.max(1.5 * f);
    }
    if let Some(w) = w_ef {
        h.w_ef = w;
    }
    let c = center.unwrap_or(0.5 * (h.f_l_ef + h.f_h_ef));
    let w = width.unwrap_or(h.f_h_ef - h.f_l_ef);
    h.f_l_ef = c - 0.5 * w;
    h.f_h_ef = c + 0.5 * w;
    h.validate()?;
    let p = h.problem(theta, t_p);
    p.validate()?;
    Ok((h, p))
}

/// Replaces the drive scale so the family reaches `theta` by the area theorem.
pub fn with_area_amplitude(mut spec: EnvelopeSpec, theta: f64) -> Result<EnvelopeSpec> {
    spec.rotation_angle = theta;
    spec.amplitude = 1.0;
    let a = spec.area_theorem_amplitude()?;
    Ok(spec.with_amplitude(a))
}

impl ExperimentConfig {
    pub fn pulse_duration(&self) -> f64 {
        self.gate_duration - self.delay
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.calibration.validate()?;
        if !(self.delay >= 0.0) {
            return Err(Error::config("delay must be non-negative"));
        }
        if !(self.pulse_duration() > 0.0 && self.gate_duration.is_finite()) {
            return Err(Error::config(format!(
                "gate_duration {:e} s must exceed the delay {:e} s",
                self.gate_duration, self.delay
            )));
        }
        if let Some(b) = &self.benchmark {
            b.validate()?;
        }
        Ok(())
    }

    /// Envelope scaled for the target rotation by the area theorem.
    pub fn envelope(&self) -> Result<EnvelopeSpec> {
        self.validate()?;
        let t_p = self.pulse_duration();
        let theta = self.rotation_angle;
        let spec = match &self.pulse {
            PulseRecipe::Cosine {} => EnvelopeSpec::cosine(t_p, theta),
            PulseRecipe::Gaussian { sigma_ratio, subtract_offset } => with_area_amplitude(
                EnvelopeSpec::new(
                    EnvelopeKind::Gaussian { sigma_ratio: *sigma_ratio, subtract_offset: *subtract_offset },
                    t_p,
                    1.0,
                    theta,
                )?,
                theta,
            )?,
            PulseRecipe::Fast { n_terms, f_c, w_ef, interval_center, interval_width } => {
                let (_, p) = fast_problem(
                    self.model.alpha,
                    self.calibration.variant,
                    theta,
                    t_p,
                    (*n_terms, *f_c, *w_ef, *interval_center, *interval_width),
                )?;
                fast_envelope_spec(&solve_fast(&p)?, &p)
            }
            PulseRecipe::Hd { k, beta2_freq } => {
                let f = beta2_freq.unwrap_or(self.model.alpha.abs() / (2.0 * PI));
                let problem = HdProblem { k: *k, suppressed_freqs: vec![f; *k], duration: t_p };
                problem.validate()?;
                with_area_amplitude(hd_envelope_spec(&solve_hd(&problem)?, 1.0, t_p), theta)?
            }
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Copy with one sweep axis set to `value`.
    pub fn with_axis(&self, axis: SweepAxis, value: f64) -> Result<Self> {
        let mut c = self.clone();
        let bad = || Error::config(format!("sweep axis '{}' does not apply to this pulse recipe", axis.name()));
        match (axis, &mut c.pulse) {
            (SweepAxis::GateDuration, _) => c.gate_duration = value,
            (SweepAxis::NTerms, PulseRecipe::Fast { n_terms, .. }) => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(Error::config(format!("n_terms value {value} is not a positive integer")));
                }
                *n_terms = Some(value as usize);
            }
            (SweepAxis::FC, PulseRecipe::Fast { f_c, .. }) => *f_c = Some(value),
            (SweepAxis::WEf, PulseRecipe::Fast { w_ef, .. }) => *w_ef = Some(value),
            (SweepAxis::IntervalCenter, PulseRecipe::Fast { interval_center, .. }) => *interval_center = Some(value),
            (SweepAxis::IntervalWidth, PulseRecipe::Fast { interval_width, .. }) => *interval_width = Some(value),
            (SweepAxis::Beta2Freq, PulseRecipe::Hd { beta2_freq, .. }) => *beta2_freq = Some(value),
            _ => return Err(bad()),
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    GateDuration,
    NTerms,
    FC,
    WEf,
    IntervalCenter,
    IntervalWidth,
    Beta2Freq,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::GateDuration => "gate_duration",
            SweepAxis::NTerms => "n_terms",
            SweepAxis::FC => "f_c",
            SweepAxis::WEf => "w_ef",
            SweepAxis::IntervalCenter => "interval_center",
            SweepAxis::IntervalWidth => "interval_width",
            SweepAxis::Beta2Freq => "beta2_freq",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub schema: String,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub base: ExperimentConfig,
    #[serde(default)]
    pub seed: u64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        super::check_schema(&self.schema, SWEEP_SCHEMA)?;
        if self.values.is_empty() {
            return Err(Error::config("sweep values must be non-empty"));
        }
        if let Some(v) = self.values.iter().find(|v| !v.is_finite()) {
            return Err(Error::config(format!("sweep value {v} is not finite")));
        }
        self.base.validate()?;
        // The axis must exist in the base recipe.
        self.base.with_axis(self.axis, self.values[0])?;
        Ok(())
    }
}

/// One evaluated experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub eps_g: f64,
    pub leakage: f64,
    pub amplitude: f64,
    pub beta: f64,
    pub rb_eps_g: Option<f64>,
    pub rb_leakage: Option<f64>,
}

/// Full calibration, cardinal-state metrics and optional RB for one configuration.
pub fn run_experiment(config: &ExperimentConfig, seed: u64) -> Result<(CalibratedPulse, ExperimentOutcome)> {
    let spec = config.envelope()?;
    let cal_cfg = CalibrationConfig { seed, ..config.calibration.clone() };
    let report = full_calibration(&config.model, &spec, &cal_cfg)?;
    let mut pulse = report.pulse;
    pulse.calib.t_d = config.delay;
    let steps = cal_cfg.steps_per_pulse;
    let m = gate_error_cardinal(&config.model, &pulse, steps)?;
    let (rb_eps_g, rb_leakage) = match &config.benchmark {
        Some(rb) => {
            let out = run_rb(&config.model, &pulse, &RbConfig { seed, ..rb.clone() }, steps)?;
            (Some(fit_rb(&out)?.eps_gate), Some(fit_leakage_rb(&out)?.leakage_per_gate))
        }
        None => (None, None),
    };
    let outcome = ExperimentOutcome {
        eps_g: m.error,
        leakage: m.leakage,
        amplitude: pulse.calib.amplitude,
        beta: pulse.calib.beta,
        rb_eps_g,
        rb_leakage,
    };
    Ok((pulse, outcome))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis_value: f64,
    pub outcome: std::result::Result<ExperimentOutcome, String>,
}

/// Evaluates every sweep value on a pool of `jobs` workers; rows keep axis order.
pub fn run_sweep(sweep: &SweepConfig, jobs: usize) -> Result<Vec<SweepRow>> {
    sweep.validate()?;
    let eval = |v: f64| SweepRow {
        axis_value: v,
        outcome: sweep
            .base
            .with_axis(sweep.axis, v)
            .and_then(|c| run_experiment(&c, sweep.seed))
            .map(|r| r.1)
            .map_err(|e| e.to_string()),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| sweep.values.par_iter().map(|&v| eval(v)).collect()))
}

pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], with_rb: bool, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["axis_value", "eps_g", "L_g", "A_calibrated", "beta_calibrated"];
    if with_rb {
        header.extend(["eps_g_rb", "L_g_rb"]);
    }
    header.push("error");
    out.write_record(&header)?;
    let num = |v: f64| format!("{v:.12e}");
    for r in rows {
        let mut rec = vec![num(r.axis_value)];
        match &r.outcome {
            Ok(o) => {
                rec.extend([num(o.eps_g), num(o.leakage), num(o.amplitude), num(o.beta)]);
                if with_rb {
                    rec.push(o.rb_eps_g.map_or("NaN".into(), num));
                    rec.push(o.rb_leakage.map_or("NaN".into(), num));
                }
                rec.push(String::new());
            }
            Err(e) => {
                rec.extend(std::iter::repeat_n("NaN".to_string(), if with_rb { 6 } else { 4 }));
                rec.push(e.clone());
            }
        }
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

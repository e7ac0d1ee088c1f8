//! Command-line front end.
//!
//! Every structured file is a JSON document tagged with a `schema` string;
//! unknown fields are rejected. Waveforms, spectra, sweeps and RB samples are
//! CSV with a header row. [`run`] returns the process exit code so the
//! commands can be exercised in-process.

pub mod experiment;

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::benchmarking::{
    CharacterizationConfig, RbConfig, c_distortion_characterization, fit_leakage_rb, fit_purity_rb, fit_rb,
    i_distortion_characterization, run_rb,
};
use crate::calibration::{CalibrationConfig, CalibrationStep, full_calibration};
use crate::distortion::{DistortionModel, apply_distortion, predistort_waveform};
use crate::envelopes::{AWG_DT, DragConfig, DragVariant, EnvelopeKind, EnvelopeSpec, SampledWaveform, sample_waveform};
use crate::error::{Error, Result};
use crate::fast_synth::{FastSolution, HeuristicParams, Interval, SuppressionProblem, fast_envelope_spec, solve_fast};
use crate::hd_drag::{HdProblem, HdSolution, hd_envelope_spec, solve_hd};
use crate::simulator::{
    CalibratedPulse, DEFAULT_DELAY, DEFAULT_STEPS_PER_PULSE, DensityMatrix, GateCalibration, GateSet, NativeGate,
    TransmonModel, gate_error_cardinal,
};
use crate::spectrum::{fft_spectrum, spectrum_report};

pub use experiment::{
    ExperimentConfig, ExperimentOutcome, PulseRecipe, SWEEP_SCHEMA, SweepAxis, SweepConfig, SweepRow, run_experiment,
    run_sweep, write_sweep_csv,
};

pub const PULSE_SCHEMA: &str = "pulseforge.pulse/1";
pub const MODEL_SCHEMA: &str = "pulseforge.model/1";
pub const CALIBRATED_SCHEMA: &str = "pulseforge.calibrated/1";
pub const CALIBRATION_CONFIG_SCHEMA: &str = "pulseforge.calibration-config/1";
pub const RB_CONFIG_SCHEMA: &str = "pulseforge.rb-config/1";
pub const DISTORTION_SCHEMA: &str = "pulseforge.distortion/1";
pub const SPECTRUM_SCHEMA: &str = "pulseforge.spectrum/1";
pub const METRICS_SCHEMA: &str = "pulseforge.metrics/1";
pub const RB_SUMMARY_SCHEMA: &str = "pulseforge.rb-summary/1";
pub const CHARACTERIZATION_SCHEMA: &str = "pulseforge.characterization/1";
pub const PROBLEM_SCHEMA: &str = "pulseforge.fast-problem/1";

/// Environment variable consulted when `--seed` is absent.
pub const SEED_ENV: &str = "PULSEFORGE_SEED";

pub fn check_schema(found: &str, expected: &str) -> Result<()> {
    if found == expected {
        Ok(())
    } else {
        Err(Error::config(format!("schema '{found}' where '{expected}' was expected")))
    }
}

/// A solved pulse: envelope (scaled for its rotation angle), DRAG setting and synthesis data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseDocument {
    pub schema: String,
    pub envelope: EnvelopeSpec,
    pub drag: DragConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<SuppressionProblem>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solution: Option<FastSolution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hd: Option<HdSolution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heuristic: Option<HeuristicParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub schema: String,
    pub model: TransmonModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibratedDocument {
    pub schema: String,
    pub pulse: CalibratedPulse,
    #[serde(default)]
    pub steps: Vec<CalibrationStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfigDocument {
    pub schema: String,
    pub calibration: CalibrationConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RbConfigDocument {
    pub schema: String,
    pub rb: RbConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistortionDocument {
    pub schema: String,
    pub distortion: DistortionModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDocument {
    pub schema: String,
    pub problem: SuppressionProblem,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsDocument {
    pub schema: String,
    pub eps_g: f64,
    pub leakage: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence: Option<SequenceResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceResult {
    pub gates: Vec<String>,
    pub populations: Vec<f64>,
    pub frame_phase: f64,
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path).map_err(|e| Error::config(format!("cannot open {}: {e}", path.display())))?;
    serde_json::from_reader(BufReader::new(f)).map_err(|e| Error::config(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => std::fs::write(p, text + "\n")?,
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{text}")?;
        }
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn load_pulse(path: &Path) -> Result<PulseDocument> {
    let d: PulseDocument = read_json(path)?;
    check_schema(&d.schema, PULSE_SCHEMA)?;
    d.envelope.validate()?;
    d.drag.validate()?;
    Ok(d)
}

pub fn load_model(path: Option<&Path>) -> Result<TransmonModel> {
    let m = match path {
        Some(p) => {
            let d: ModelDocument = read_json(p)?;
            check_schema(&d.schema, MODEL_SCHEMA)?;
            d.model
        }
        None => TransmonModel::default(),
    };
    m.validate()?;
    Ok(m)
}

pub fn load_calibrated(path: &Path) -> Result<CalibratedPulse> {
    let d: CalibratedDocument = read_json(path)?;
    check_schema(&d.schema, CALIBRATED_SCHEMA)?;
    d.pulse.validate()?;
    Ok(d.pulse)
}

pub fn load_distortion(path: &Path) -> Result<DistortionModel> {
    let d: DistortionDocument = read_json(path)?;
    check_schema(&d.schema, DISTORTION_SCHEMA)?;
    d.distortion.validate()?;
    Ok(d.distortion)
}

fn read_waveform(path: &Path) -> Result<SampledWaveform> {
    let f = File::open(path).map_err(|e| Error::config(format!("cannot open {}: {e}", path.display())))?;
    SampledWaveform::read_csv(BufReader::new(f))
}

/// Seed from the flag, else `PULSEFORGE_SEED`, else the given default.
pub fn resolve_seed(flag: Option<u64>, default: u64) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| Error::config(format!("{SEED_ENV}='{v}' is not an unsigned integer"))),
        Err(_) => Ok(default),
    }
}

fn parse_interval(s: &str) -> std::result::Result<Interval, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("interval '{s}' must be f_low:f_high:weight"));
    }
    let v: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("interval '{s}': '{p}' is not a number")))
        .collect::<std::result::Result<_, _>>()?;
    Ok(Interval::new(v[0], v[1], v[2]))
}

fn parse_band(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("band '{s}' must be f_low:f_high"))?;
    let p = |x: &str| x.trim().parse::<f64>().map_err(|_| format!("band '{s}': '{x}' is not a number"));
    Ok((p(a)?, p(b)?))
}

fn parse_gate(s: &str) -> std::result::Result<NativeGate, String> {
    NativeGate::ALL
        .into_iter()
        .find(|g| g.symbol().eq_ignore_ascii_case(s.trim()))
        .ok_or_else(|| format!("unknown gate '{s}'"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Cosine,
    Gaussian,
    Fast,
    Hd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    DragL,
    DragP,
    None,
}

impl From<VariantArg> for DragVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::DragL => DragVariant::DragL,
            VariantArg::DragP => DragVariant::DragP,
            VariantArg::None => DragVariant::NoDrag,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "pulseforge", version, about = "Spectrally shaped single-qubit pulses: synthesis, simulation, calibration and benchmarking")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a pulse and write its JSON definition and sampled waveform.
    Synth(SynthArgs),
    /// Envelope spectrum as CSV (f_MHz, abs_I, abs_IQ).
    Spectrum(SpectrumArgs),
    /// Cardinal-state error and leakage of a pulse, optionally a gate sequence.
    Simulate(SimulateArgs),
    /// Run the simulated calibration flow on a pulse.
    Calibrate(CalibrateArgs),
    /// Calibrate and evaluate a family of experiments along one axis.
    Sweep(SweepArgs),
    /// Randomized benchmarking: error per gate.
    Rb(RbArgs),
    /// Leakage randomized benchmarking: leakage per gate.
    LeakageRb(RbArgs),
    /// Purity benchmarking: incoherent error per gate.
    PurityRb(RbArgs),
    /// Apply or invert a control-line distortion model on a waveform.
    Distort(DistortArgs),
    /// Simulated I- or C-distortion characterization circuits.
    CharacterizeDistortion(CharacterizeArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    /// Pulse duration t_p in seconds.
    #[arg(long)]
    pub tp: f64,
    /// Rotation angle in radians.
    #[arg(long, default_value_t = PI / 2.0)]
    pub theta: f64,
    /// Anharmonicity α/2π in Hz.
    #[arg(long, default_value_t = -212e6, allow_hyphen_values = true)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value = "drag-l")]
    pub variant: VariantArg,
    /// DRAG coefficient β (defaults to 1 for DRAG-L, 0.5 for DRAG-P).
    #[arg(long)]
    pub beta: Option<f64>,
    /// FAST: derive the bands from the anharmonicity.
    #[arg(long)]
    pub heuristic: bool,
    /// FAST: number of cosine terms.
    #[arg(long)]
    pub n_terms: Option<usize>,
    /// FAST: suppression band `f_low:f_high:weight` in Hz (repeatable).
    #[arg(long = "interval", value_parser = parse_interval)]
    pub intervals: Vec<Interval>,
    /// FAST: problem document instead of flags.
    #[arg(long)]
    pub problem: Option<PathBuf>,
    /// HD: number of suppressed frequencies.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// HD: suppressed baseband frequency in Hz (repeatable; default |α|/2π).
    #[arg(long = "suppress")]
    pub suppress: Vec<f64>,
    /// Gaussian: σ / t_p.
    #[arg(long, default_value_t = crate::envelopes::DEFAULT_SIGMA_RATIO)]
    pub sigma_ratio: f64,
    /// Pulse JSON output (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Waveform CSV output.
    #[arg(long)]
    pub waveform: Option<PathBuf>,
    /// Waveform sample interval in seconds.
    #[arg(long, default_value_t = AWG_DT)]
    pub dt: f64,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    /// Pulse document (analytic spectrum).
    #[arg(long, conflicts_with = "waveform")]
    pub pulse: Option<PathBuf>,
    /// Waveform CSV (FFT spectrum).
    #[arg(long)]
    pub waveform: Option<PathBuf>,
    #[arg(long, default_value_t = -1e9, allow_hyphen_values = true)]
    pub f_min: f64,
    #[arg(long, default_value_t = 1e9, allow_hyphen_values = true)]
    pub f_max: f64,
    #[arg(long, default_value_t = 2001)]
    pub points: usize,
    /// FFT length for `--waveform` (default: next power of two ≥ 16 × samples).
    #[arg(long)]
    pub zero_pad: Option<usize>,
    /// Band `f_low:f_high` in Hz for energy and suppression (repeatable).
    #[arg(long = "band", value_parser = parse_band, allow_hyphen_values = true)]
    pub bands: Vec<(f64, f64)>,
    #[arg(long)]
    pub out: PathBuf,
    /// Band summary JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Calibrated pulse document.
    #[arg(long, conflicts_with = "pulse")]
    pub calibrated: Option<PathBuf>,
    /// Uncalibrated pulse document (area-theorem amplitude, drive on resonance).
    #[arg(long)]
    pub pulse: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_STEPS_PER_PULSE)]
    pub steps: usize,
    /// Comma-separated native gates run from |0⟩ (I, X90, Xm90, Y90, Ym90).
    #[arg(long, value_delimiter = ',', value_parser = parse_gate)]
    pub sequence: Vec<NativeGate>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub pulse: PathBuf,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Calibration settings document; the variant defaults to the pulse's DRAG variant.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RbArgs {
    #[arg(long)]
    pub calibrated: PathBuf,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// RB settings document.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub lengths: Vec<usize>,
    #[arg(long)]
    pub sequences: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_STEPS_PER_PULSE)]
    pub steps: usize,
    /// Per-sequence CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Fit summary JSON (stdout when absent).
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DistortArgs {
    #[arg(long)]
    pub waveform: PathBuf,
    #[arg(long)]
    pub distortion: PathBuf,
    /// Pass the waveform through the line.
    #[arg(long, conflicts_with = "invert", required_unless_present = "invert")]
    pub apply: bool,
    /// Predistort with the inverse filter.
    #[arg(long)]
    pub invert: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Circuit {
    I,
    C,
}

#[derive(Debug, Args)]
pub struct CharacterizeArgs {
    #[arg(long)]
    pub calibrated: PathBuf,
    #[arg(long)]
    pub distortion: PathBuf,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "i")]
    pub circuit: Circuit,
    /// Delays between pulses in seconds.
    #[arg(long = "t-d", value_delimiter = ',', required = true)]
    pub t_d: Vec<f64>,
    /// Half-width of the tilt sweep in radians (I circuit).
    #[arg(long, default_value_t = 0.1)]
    pub phi_range: f64,
    #[arg(long, default_value_t = 41)]
    pub phi_points: usize,
    /// Pair counts (C circuit).
    #[arg(long, value_delimiter = ',', default_values_t = vec![1usize, 5, 10])]
    pub n_reps: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub n_pairs: usize,
    #[arg(long)]
    pub predistort: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command.
///
/// Returns the exit code: 0 success, 1 usage or I/O, 2 configuration, 3 numerical failure.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Spectrum(a) => cmd_spectrum(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Calibrate(a) => cmd_calibrate(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Rb(a) => cmd_rb(&a, RbKind::Standard),
        Command::LeakageRb(a) => cmd_rb(&a, RbKind::Leakage),
        Command::PurityRb(a) => cmd_rb(&a, RbKind::Purity),
        Command::Distort(a) => cmd_distort(&a),
        Command::CharacterizeDistortion(a) => cmd_characterize(&a),
    }
}

/// Builds the pulse document described by the synth flags.
pub fn synthesize(a: &SynthArgs) -> Result<PulseDocument> {
    let alpha = 2.0 * PI * a.alpha;
    let variant: DragVariant = a.variant.into();
    let beta = a.beta.unwrap_or(CalibrationConfig::for_variant(variant).initial_beta());
    let drag = DragConfig::new(beta, alpha, variant);
    drag.validate()?;
    let mut doc = PulseDocument {
        schema: PULSE_SCHEMA.into(),
        envelope: EnvelopeSpec::cosine(a.tp, a.theta),
        drag,
        problem: None,
        solution: None,
        hd: None,
        heuristic: None,
    };
    match a.method {
        Method::Cosine => {}
        Method::Gaussian => {
            let s = EnvelopeSpec::new(
                EnvelopeKind::Gaussian { sigma_ratio: a.sigma_ratio, subtract_offset: true },
                a.tp,
                1.0,
                a.theta,
            )?;
            doc.envelope = experiment::with_area_amplitude(s, a.theta)?;
        }
        Method::Fast => {
            let problem = if let Some(p) = &a.problem {
                let d: ProblemDocument = read_json(p)?;
                check_schema(&d.schema, PROBLEM_SCHEMA)?;
                d.problem
            } else if a.heuristic {
                let (h, p) = experiment::fast_problem(alpha, variant, a.theta, a.tp, (a.n_terms, None, None, None, None))?;
                doc.heuristic = Some(h);
                p
            } else {
                if a.intervals.is_empty() {
                    return Err(Error::config("FAST needs --heuristic, --problem or at least one --interval"));
                }
                SuppressionProblem {
                    n_terms: a.n_terms.unwrap_or(4),
                    intervals: a.intervals.clone(),
                    theta: a.theta,
                    duration: a.tp,
                }
            };
            let sol = solve_fast(&problem)?;
            doc.envelope = fast_envelope_spec(&sol, &problem);
            doc.problem = Some(problem);
            doc.solution = Some(sol);
        }
        Method::Hd => {
            let freqs = if a.suppress.is_empty() { vec![a.alpha.abs(); a.k] } else { a.suppress.clone() };
            let problem = HdProblem { k: a.k, suppressed_freqs: freqs, duration: a.tp };
            let sol = solve_hd(&problem)?;
            doc.envelope = experiment::with_area_amplitude(hd_envelope_spec(&sol, 1.0, a.tp), a.theta)?;
            doc.hd = Some(sol);
        }
    }
    doc.envelope.validate()?;
    Ok(doc)
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let doc = synthesize(a)?;
    if let Some(w) = &a.waveform {
        let wf = sample_waveform(&doc.envelope, &doc.drag, a.dt)?;
        wf.write_csv(create(w)?)?;
    }
    write_json(a.out.as_deref(), &doc)
}

#[derive(Debug, Serialize)]
struct SpectrumSummary<'a> {
    schema: &'a str,
    band_energies: &'a [crate::spectrum::BandEnergy],
    suppression_db: &'a [crate::spectrum::BandSuppression],
}

fn cmd_spectrum(a: &SpectrumArgs) -> Result<()> {
    let report = match (&a.pulse, &a.waveform) {
        (Some(p), None) => {
            if a.points < 2 || !(a.f_max > a.f_min) {
                return Err(Error::config("frequency grid needs f_max > f_min and at least two points"));
            }
            let doc = load_pulse(p)?;
            let df = (a.f_max - a.f_min) / (a.points - 1) as f64;
            let freqs: Vec<f64> = (0..a.points).map(|k| a.f_min + df * k as f64).collect();
            spectrum_report(&doc.envelope, &doc.drag, &freqs, &a.bands)?
        }
        (None, Some(w)) => {
            let wf = read_waveform(w)?;
            fft_spectrum(&wf, a.zero_pad.unwrap_or((16 * wf.len()).next_power_of_two()))?
        }
        _ => return Err(Error::config("spectrum needs exactly one of --pulse or --waveform")),
    };
    report.write_csv(create(&a.out)?)?;
    if let Some(r) = &a.report {
        let s = SpectrumSummary {
            schema: SPECTRUM_SCHEMA,
            band_energies: &report.band_energies,
            suppression_db: &report.suppression_db,
        };
        write_json(Some(r), &s)?;
    }
    Ok(())
}

/// Calibrated pulse built from an uncalibrated document: area-theorem amplitude, resonant drive.
pub fn nominal_pulse(doc: &PulseDocument, model: &TransmonModel) -> Result<CalibratedPulse> {
    let calib = GateCalibration {
        amplitude: doc.envelope.amplitude,
        beta: doc.drag.beta,
        drive_freq: model.omega_q / (2.0 * PI),
        virtual_z: 0.0,
        t_p: doc.envelope.duration,
        t_d: DEFAULT_DELAY,
    };
    CalibratedPulse::new(doc.envelope.clone(), doc.drag, calib)
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let model = load_model(a.model.as_deref())?;
    let pulse = match (&a.calibrated, &a.pulse) {
        (Some(c), None) => load_calibrated(c)?,
        (None, Some(p)) => nominal_pulse(&load_pulse(p)?, &model)?,
        _ => return Err(Error::config("simulate needs exactly one of --calibrated or --pulse")),
    };
    if a.steps == 0 {
        return Err(Error::config("steps must be positive"));
    }
    let m = gate_error_cardinal(&model, &pulse, a.steps)?;
    let sequence = if a.sequence.is_empty() {
        None
    } else {
        let gates = GateSet::simulated(&model, &pulse, a.steps)?;
        let (rho, frame) = gates.run(&DensityMatrix::ground(model.levels), &a.sequence);
        Some(SequenceResult {
            gates: a.sequence.iter().map(|g| g.symbol().to_string()).collect(),
            populations: (0..model.levels).map(|k| rho.population(k)).collect(),
            frame_phase: frame.phase,
        })
    };
    write_json(a.out.as_deref(), &MetricsDocument { schema: METRICS_SCHEMA.into(), eps_g: m.error, leakage: m.leakage, sequence })
}

fn cmd_calibrate(a: &CalibrateArgs) -> Result<()> {
    let doc = load_pulse(&a.pulse)?;
    let model = load_model(a.model.as_deref())?;
    let mut cfg = match &a.config {
        Some(p) => {
            let d: CalibrationConfigDocument = read_json(p)?;
            check_schema(&d.schema, CALIBRATION_CONFIG_SCHEMA)?;
            d.calibration
        }
        None => CalibrationConfig::for_variant(doc.drag.variant),
    };
    cfg.seed = resolve_seed(a.seed, cfg.seed)?;
    if doc.drag.variant != DragVariant::NoDrag && (doc.drag.alpha - model.alpha).abs() > 1e-9 * model.alpha.abs() {
        return Err(Error::config("pulse DRAG anharmonicity differs from the model anharmonicity"));
    }
    let report = full_calibration(&model, &doc.envelope, &cfg)?;
    write_json(
        a.out.as_deref(),
        &CalibratedDocument { schema: CALIBRATED_SCHEMA.into(), pulse: report.pulse, steps: report.steps },
    )
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let mut sweep: SweepConfig = read_json(&a.config)?;
    sweep.seed = resolve_seed(a.seed, sweep.seed)?;
    let rows = run_sweep(&sweep, a.jobs)?;
    write_sweep_csv(&rows, sweep.base.benchmark.is_some(), create(&a.out)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RbKind {
    Standard,
    Leakage,
    Purity,
}

fn cmd_rb(a: &RbArgs, kind: RbKind) -> Result<()> {
    let pulse = load_calibrated(&a.calibrated)?;
    let model = load_model(a.model.as_deref())?;
    let mut cfg = match &a.config {
        Some(p) => {
            let d: RbConfigDocument = read_json(p)?;
            check_schema(&d.schema, RB_CONFIG_SCHEMA)?;
            d.rb
        }
        None => RbConfig::default(),
    };
    if !a.lengths.is_empty() {
        cfg.lengths = a.lengths.clone();
    }
    if let Some(n) = a.sequences {
        cfg.n_sequences = n;
    }
    cfg.seed = resolve_seed(a.seed, cfg.seed)?;
    if a.steps == 0 {
        return Err(Error::config("steps must be positive"));
    }
    let outcome = run_rb(&model, &pulse, &cfg, a.steps)?;
    outcome.write_csv(create(&a.out)?)?;
    let fit = match kind {
        RbKind::Standard => serde_json::to_value(fit_rb(&outcome)?)?,
        RbKind::Leakage => serde_json::to_value(fit_leakage_rb(&outcome)?)?,
        RbKind::Purity => serde_json::to_value(fit_purity_rb(&outcome)?)?,
    };
    let summary = serde_json::json!({
        "schema": RB_SUMMARY_SCHEMA,
        "kind": match kind { RbKind::Standard => "rb", RbKind::Leakage => "leakage_rb", RbKind::Purity => "purity_rb" },
        "seed": cfg.seed,
        "avg_gate_count": outcome.avg_gate_count,
        "fit": fit,
    });
    write_json(a.summary.as_deref(), &summary)
}

fn cmd_distort(a: &DistortArgs) -> Result<()> {
    let wf = read_waveform(&a.waveform)?;
    let model = load_distortion(&a.distortion)?;
    let out = if a.invert {
        predistort_waveform(&wf, &model)?
    } else {
        let d = apply_distortion(&wf, &model)?;
        if d.padding_warning {
            eprintln!("warning: the record ends less than 10 τ after the last nonzero sample");
        }
        d.waveform
    };
    out.write_csv(create(&a.out)?)
}

fn cmd_characterize(a: &CharacterizeArgs) -> Result<()> {
    let pulse = load_calibrated(&a.calibrated)?;
    let distortion = load_distortion(&a.distortion)?;
    let model = load_model(a.model.as_deref())?;
    let cfg = CharacterizationConfig { n_pairs: a.n_pairs, predistort: a.predistort, ..CharacterizationConfig::default() };
    let result = match a.circuit {
        Circuit::I => {
            if a.phi_points < 3 || !(a.phi_range > 0.0) {
                return Err(Error::config("phi grid needs a positive range and at least three points"));
            }
            let step = 2.0 * a.phi_range / (a.phi_points - 1) as f64;
            let grid: Vec<f64> = (0..a.phi_points).map(|k| -a.phi_range + step * k as f64).collect();
            serde_json::to_value(i_distortion_characterization(&model, &pulse, &distortion, &a.t_d, &grid, &cfg)?)?
        }
        Circuit::C => serde_json::to_value(c_distortion_characterization(&model, &pulse, &distortion, &a.t_d, &a.n_reps, &cfg)?)?,
    };
    let doc = serde_json::json!({
        "schema": CHARACTERIZATION_SCHEMA,
        "circuit": match a.circuit { Circuit::I => "i", Circuit::C => "c" },
        "result": result,
    });
    write_json(a.out.as_deref(), &doc)
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::clifford::CliffordTable;
use crate::error::{Error, Result};
use crate::fitting::{ExpFit, fit_exponential};
use crate::simulator::{CalibratedPulse, DensityMatrix, GateSet, TransmonModel};

pub const DEFAULT_LENGTHS: [usize; 6] = [2, 8, 24, 60, 120, 240];
pub const DEFAULT_SEQUENCES: usize = 25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RbConfig {
    pub lengths: Vec<usize>,
    pub n_sequences: usize,
    pub seed: u64,
}

impl Default for RbConfig {
    fn default() -> Self {
        Self { lengths: DEFAULT_LENGTHS.to_vec(), n_sequences: DEFAULT_SEQUENCES, seed: 0 }
    }
}

impl RbConfig {
    pub fn validate(&self) -> Result<()> {
        let mut l = self.lengths.clone();
        l.sort_unstable();
        l.dedup();
        if l.len() < 2 {
            return Err(Error::config("RB needs at least two distinct sequence lengths"));
        }
        if self.n_sequences == 0 {
            return Err(Error::config("RB needs at least one sequence per length"));
        }
        Ok(())
    }
}

/// Final populations of one random sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RbSample {
    pub length: usize,
    pub sequence: usize,
    pub p_g: f64,
    pub p_e: f64,
    /// Population outside the qubit subspace, `1 − p_g − p_e`.
    pub p_f: f64,
    /// `2 tr(ρ̂²) − 1` of the renormalised qubit block.
    pub purity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbOutcome {
    pub lengths: Vec<usize>,
    pub samples: Vec<RbSample>,
    pub avg_gate_count: f64,
}

/// Random Clifford strings with the recovery element appended, in the order
/// (length, sequence) as listed.
pub fn random_sequences(lengths: &[usize], n_sequences: usize, seed: u64) -> Vec<(usize, Vec<usize>)> {
    let table = CliffordTable::get();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(lengths.len() * n_sequences);
    for &len in lengths {
        for _ in 0..n_sequences {
            let mut seq: Vec<usize> = (0..len).map(|_| rng.random_range(0..24)).collect();
            seq.push(table.recovery(&seq));
            out.push((len, seq));
        }
    }
    out
}

/// Runs RB sequences through a precomputed gate set from the ground state.
pub fn run_rb_with_gates(gates: &GateSet, config: &RbConfig) -> Result<RbOutcome> {
    config.validate()?;
    let table = CliffordTable::get();
    let rho0 = DensityMatrix::ground(gates.dim);
    let mut samples = Vec::new();
    let mut counter = std::collections::HashMap::<usize, usize>::new();
    for (len, seq) in random_sequences(&config.lengths, config.n_sequences, config.seed) {
        let (rho, _) = gates.run(&rho0, &table.physical_sequence(&seq));
        let (p_g, p_e) = (rho.population(0), rho.population(1));
        let idx = counter.entry(len).or_insert(0);
        samples.push(RbSample { length: len, sequence: *idx, p_g, p_e, p_f: rho.leaked(), purity: rho.normalized_qubit_purity() });
        *idx += 1;
    }
    Ok(RbOutcome { lengths: config.lengths.clone(), samples, avg_gate_count: table.avg_gate_count() })
}

pub fn run_rb(model: &TransmonModel, pulse: &CalibratedPulse, config: &RbConfig, steps_per_pulse: usize) -> Result<RbOutcome> {
    let gates = GateSet::simulated(model, pulse, steps_per_pulse)?;
    run_rb_with_gates(&gates, config)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RbFit {
    pub a: f64,
    pub b: f64,
    pub p: f64,
    pub sigma_p: f64,
    pub eps_clifford: f64,
    pub eps_gate: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeakageFit {
    pub a_f: f64,
    pub b_f: f64,
    pub lambda1: f64,
    pub sigma_lambda1: f64,
    pub leakage_per_gate: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PurityFit {
    pub a: f64,
    pub b: f64,
    pub u: f64,
    pub sigma_u: f64,
    pub eps_incoherent: f64,
    pub residual: f64,
}

fn series(outcome: &RbOutcome, pick: impl Fn(&RbSample) -> f64) -> Result<ExpFit> {
    let xs: Vec<f64> = outcome.samples.iter().map(|s| s.length as f64).collect();
    let ys: Vec<f64> = outcome.samples.iter().map(pick).collect();
    fit_exponential(&xs, &ys)
}

/// Fits `p_g = A + B pᴺ`; `ε_Cl = (1 − p)/2`, `ε_g = ε_Cl / N_g`.
pub fn fit_rb(outcome: &RbOutcome) -> Result<RbFit> {
    let f = series(outcome, |s| s.p_g)?;
    let eps_clifford = (1.0 - f.p) / 2.0;
    Ok(RbFit {
        a: f.a,
        b: f.b,
        p: f.p,
        sigma_p: f.sigma_p,
        eps_clifford,
        eps_gate: eps_clifford / outcome.avg_gate_count,
        residual: f.residual,
    })
}

/// Fits `p_f = A_f + B_f λ₁ᴺ`; `L_g = A_f (1 − λ₁) / N_g`.
pub fn fit_leakage_rb(outcome: &RbOutcome) -> Result<LeakageFit> {
    let f = series(outcome, |s| s.p_f)?;
    Ok(LeakageFit {
        a_f: f.a,
        b_f: f.b,
        lambda1: f.p,
        sigma_lambda1: f.sigma_p,
        leakage_per_gate: f.a * (1.0 - f.p) / outcome.avg_gate_count,
        residual: f.residual,
    })
}

/// Purity spread below which the decay is treated as absent.
pub const FLAT_PURITY: f64 = 1e-7;

/// Fits `P_norm = A' uᴺ + B'`; `ε_g,inc = ½ (1 − √u) / N_g`.
///
/// Under purely coherent errors every sample has purity 1 up to integrator
/// round-off, and an exponential fit through that flat line returns an
/// arbitrary rate. Data whose total spread is below [`FLAT_PURITY`] is
/// reported as `u = 1`.
pub fn fit_purity_rb(outcome: &RbOutcome) -> Result<PurityFit> {
    let (lo, hi) = outcome.samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.purity), hi.max(s.purity)));
    if outcome.samples.len() >= 2 && hi - lo < FLAT_PURITY {
        let mean = outcome.samples.iter().map(|s| s.purity).sum::<f64>() / outcome.samples.len() as f64;
        return Ok(PurityFit { a: 0.0, b: mean, u: 1.0, sigma_u: 0.0, eps_incoherent: 0.0, residual: 0.0 });
    }
    let f = series(outcome, |s| s.purity)?;
    Ok(PurityFit {
        a: f.b,
        b: f.a,
        u: f.p,
        sigma_u: f.sigma_p,
        eps_incoherent: 0.5 * (1.0 - f.p.max(0.0).sqrt()) / outcome.avg_gate_count,
        residual: f.residual,
    })
}

pub fn run_purity_rb(
    model: &TransmonModel,
    pulse: &CalibratedPulse,
    config: &RbConfig,
    steps_per_pulse: usize,
) -> Result<(RbOutcome, PurityFit)> {
    let outcome = run_rb(model, pulse, config, steps_per_pulse)?;
    let fit = fit_purity_rb(&outcome)?;
    Ok((outcome, fit))
}

impl RbOutcome {
    /// Per-sample CSV: length, sequence, p_g, p_e, p_f, purity.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["length", "sequence", "p_g", "p_e", "p_f", "purity"])?;
        for s in &self.samples {
            out.write_record(&[
                s.length.to_string(),
                s.sequence.to_string(),
                format!("{:.15e}", s.p_g),
                format!("{:.15e}", s.p_e),
                format!("{:.15e}", s.p_f),
                format!("{:.15e}", s.purity),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Mean over sequences for each length, in the configured order.
    pub fn means(&self, pick: impl Fn(&RbSample) -> f64) -> Vec<(usize, f64)> {
        self.lengths
            .iter()
            .map(|&l| {
                let v: Vec<f64> = self.samples.iter().filter(|s| s.length == l).map(&pick).collect();
                (l, v.iter().sum::<f64>() / v.len().max(1) as f64)
            })
            .collect()
    }
}

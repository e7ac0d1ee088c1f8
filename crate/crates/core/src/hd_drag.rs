//! Higher-derivative DRAG.
//!
//! The in-phase envelope `Ω_I = A Σ_n β_2n g^(2n)` has the spectrum
//! `A · P(f) · ĝ(f)` with the even polynomial
//! `P(f) = Σ_n β_2n (−1)ⁿ (2πf)^(2n)`. Choosing β so that `P` vanishes at the
//! suppressed frequencies places spectral zeros there; a root of multiplicity
//! `m` imposes `m` derivative conditions on `P` as a polynomial in `u = (2πf)²`.
//!
//! The basis `g = Σ_k d_k [1 − cos(2πkt/t_p)]` is chosen so that all odd
//! derivatives up to order `2K + 1` vanish at the endpoints.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::envelopes::{EnvelopeKind, EnvelopeSpec};
use crate::error::{Error, Result};

pub const MAX_K: usize = 4;
const BASIS_K_WARN: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HdProblem {
    pub k: usize,
    /// Baseband frequencies in Hz; repeat an entry to raise its multiplicity.
    pub suppressed_freqs: Vec<f64>,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HdSolution {
    /// β_0 … β_2K in s^(2n).
    pub beta_even: Vec<f64>,
    /// d_1 … d_{K+1}.
    pub d_coeffs: Vec<f64>,
}

impl HdProblem {
    pub fn validate(&self) -> Result<()> {
        if self.k > MAX_K {
            return Err(Error::config(format!("K = {} exceeds the supported maximum {MAX_K}", self.k)));
        }
        if self.suppressed_freqs.len() != self.k {
            return Err(Error::config(format!(
                "K = {} but {} suppressed frequencies were given",
                self.k,
                self.suppressed_freqs.len()
            )));
        }
        if self.suppressed_freqs.iter().any(|f| !(*f > 0.0 && f.is_finite())) {
            return Err(Error::config("suppressed frequencies must be positive"));
        }
        if !(self.duration > 0.0) {
            return Err(Error::config("duration must be positive"));
        }
        Ok(())
    }
}

/// `P(f) = Σ_n β_2n (−1)ⁿ (2πf)^(2n)`.
pub fn even_polynomial(beta_even: &[f64], f: f64) -> f64 {
    let u = (2.0 * PI * f).powi(2);
    // Horner in −u.
    beta_even.iter().rev().fold(0.0, |acc, b| acc * (-u) + b)
}

fn falling_factorial(n: usize, r: usize) -> f64 {
    (0..r).map(|i| (n - i) as f64).product()
}

/// Solves for β_0 = 1, β_2, …, β_2K.
pub fn solve_betas(problem: &HdProblem) -> Result<Vec<f64>> {
    problem.validate()?;
    let k = problem.k;
    if k == 0 {
        return Ok(vec![1.0]);
    }
    // Group equal frequencies into (u, multiplicity).
    let mut roots: Vec<(f64, usize)> = Vec::new();
    for f in &problem.suppressed_freqs {
        let u = (2.0 * PI * f).powi(2);
        match roots.iter_mut().find(|(r, _)| ((r - u) / u).abs() < 1e-12) {
            Some(entry) => entry.1 += 1,
            None => roots.push((u, 1)),
        }
    }
    let u_ref = roots.iter().map(|r| r.0).fold(0.0, f64::max);

    // Unknowns b_n = β_2n u_ref^n; P(s) = 1 + Σ b_n (−s)^n with s = u / u_ref.
    let mut m = DMatrix::<f64>::zeros(k, k);
    let mut rhs = DVector::<f64>::zeros(k);
    let mut row = 0;
    for &(u, mult) in &roots {
        let s = u / u_ref;
        for r in 0..mult {
            for n in 1..=k {
                if n >= r {
                    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                    m[(row, n - 1)] = sign * falling_factorial(n, r) * s.powi((n - r) as i32);
                }
            }
            rhs[row] = if r == 0 { -1.0 } else { 0.0 };
            row += 1;
        }
    }
    let b = m.clone().lu().solve(&rhs).ok_or_else(|| Error::Degenerate {
        reason: "HD beta system is singular".into(),
        condition: f64::INFINITY,
    })?;
    let mut beta = vec![1.0];
    for n in 1..=k {
        beta.push(b[n - 1] / u_ref.powi(n as i32));
    }
    Ok(beta)
}

/// Cosine-series coefficients d_1 … d_{K+1} with smooth endpoints and Σ d_k = 1.
pub fn solve_basis_coeffs(k: usize) -> Result<Vec<f64>> {
    let dim = k + 1;
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = DVector::<f64>::zeros(dim);
    for n in 1..=k {
        let sign = if (n + 1) % 2 == 0 { 1.0 } else { -1.0 };
        for kk in 1..=dim {
            m[(n - 1, kk - 1)] = sign * (kk as f64).powi(2 * n as i32);
        }
    }
    for kk in 0..dim {
        m[(k, kk)] = 1.0;
    }
    rhs[k] = 1.0;
    if k > BASIS_K_WARN {
        let sv = m.clone().singular_values();
        let cond = sv.max() / sv.min();
        if !(cond < 1e13) {
            return Err(Error::Degenerate { reason: format!("basis system for K = {k}"), condition: cond });
        }
    }
    let d = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Degenerate { reason: "basis system is singular".into(), condition: f64::INFINITY })?;
    Ok(d.iter().copied().collect())
}

pub fn solve_hd(problem: &HdProblem) -> Result<HdSolution> {
    Ok(HdSolution { beta_even: solve_betas(problem)?, d_coeffs: solve_basis_coeffs(problem.k)? })
}

/// Problem with a K-fold zero at the ef transition `|α|/2π`.
pub fn ef_problem(k: usize, alpha: f64, duration: f64) -> HdProblem {
    HdProblem { k, suppressed_freqs: vec![alpha.abs() / (2.0 * PI); k], duration }
}

/// HdSeries envelope whose area equals `A·t_p` (β_0 = 1, Σ d_k = 1).
pub fn hd_envelope_spec(solution: &HdSolution, amplitude: f64, duration: f64) -> EnvelopeSpec {
    let area = solution.beta_even.first().copied().unwrap_or(1.0) * solution.d_coeffs.iter().sum::<f64>() * duration;
    EnvelopeSpec {
        kind: EnvelopeKind::HdSeries { d_coeffs: solution.d_coeffs.clone(), beta_even: solution.beta_even.clone() },
        duration,
        amplitude,
        rotation_angle: amplitude * area,
    }
}

//! FAST coefficient synthesis.
//!
//! The in-phase envelope is a cosine series `Σ c_n [1 − cos(2πnt/t_p)]`.
//! The coefficients minimise the weighted spectral energy
//! `Σ_j w_j ∫_{f_l,j}^{f_h,j} |Ω̂_I(f)|² df` subject to `Σ c_n t_p = θ`.
//!
//! Writing `x = f·t_p`, every basis transform factors as
//! `ĝ_n(f) = t_p · e^{−iπx} · R_n(x)` with the real amplitude
//!
//! ```text
//! R_n(x) = sinc(πx) − (−1)ⁿ/2 · [sinc(π(n − x)) + sinc(π(n + x))]
//! ```
//!
//! so the Gram matrix `A_nm = Σ_j w_j t_p ∫ R_n R_m dx` is real symmetric.
//! The stationarity conditions form the bordered system
//! `[[A + Aᵀ, −b], [bᵀ, 0]] [c; μ] = [0; θ/t_p]` with `b = (1, …, 1)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::envelopes::{DragVariant, EnvelopeKind, EnvelopeSpec};
use crate::error::{Error, Result};
use crate::quad;

/// Upper edge of the high-frequency band when none is given.
pub const DEFAULT_F_HIGH: f64 = 1000e6;
/// Absolute tolerance of the dimensionless band integrals `∫ R_n R_m dx`.
pub const GRAM_TOL: f64 = 1e-13;
/// Singular-value ratio below which the bordered system is treated as rank-deficient.
const SINGULAR_RATIO: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interval {
    pub f_low: f64,
    pub f_high: f64,
    pub weight: f64,
}

impl Interval {
    pub fn new(f_low: f64, f_high: f64, weight: f64) -> Self {
        Self { f_low, f_high, weight }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuppressionProblem {
    pub n_terms: usize,
    pub intervals: Vec<Interval>,
    pub theta: f64,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FastSolution {
    /// Series coefficients c_n in 1/s.
    pub coeffs: Vec<f64>,
    pub lagrange_multiplier: f64,
    /// Weighted band energy cᵀ A c.
    pub objective: f64,
    /// ‖(A + Aᵀ)c − μb‖ / (‖A + Aᵀ‖ ‖c‖).
    pub kkt_residual: f64,
    /// 2-norm condition number of the scaled bordered matrix.
    pub condition: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeuristicParams {
    pub f_l_ef: f64,
    pub f_h_ef: f64,
    pub f_c: f64,
    pub f_h_2: f64,
    pub w_ef: f64,
    pub n_terms: usize,
    pub variant: DragVariant,
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// Real amplitude `R_n(x)` of the n-th basis transform at `x = f·t_p`.
pub fn basis_amplitude(n: usize, x: f64) -> f64 {
    let nf = n as f64;
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    sinc(PI * x) - 0.5 * sign * (sinc(PI * (nf - x)) + sinc(PI * (nf + x)))
}

/// Closed-form Fourier transform ĝ_n(f) of `1 − cos(2πnt/t_p)` on `[0, t_p]`.
pub fn basis_ft(n: usize, t_p: f64, f: f64) -> Complex64 {
    let x = f * t_p;
    Complex64::from_polar(t_p * basis_amplitude(n, x), -PI * x)
}

impl SuppressionProblem {
    pub fn validate(&self) -> Result<()> {
        if self.n_terms == 0 {
            return Err(Error::config("n_terms must be at least 1"));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::config("duration must be positive"));
        }
        if !self.theta.is_finite() {
            return Err(Error::config("theta must be finite"));
        }
        for (j, iv) in self.intervals.iter().enumerate() {
            if !(iv.f_low >= 0.0) || !iv.f_high.is_finite() {
                return Err(Error::config(format!("interval {j}: f_low must be >= 0 and f_high finite")));
            }
            if iv.f_low > iv.f_high {
                return Err(Error::config(format!(
                    "interval {j}: f_low {:.6e} Hz exceeds f_high {:.6e} Hz",
                    iv.f_low, iv.f_high
                )));
            }
            if !(iv.weight > 0.0 && iv.weight.is_finite()) {
                return Err(Error::config(format!("interval {j}: weight must be positive")));
            }
        }
        Ok(())
    }

    /// The raised-cosine point `c = (θ/t_p, 0, …)` of the feasible set.
    pub fn cosine_point(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.n_terms];
        c[0] = self.theta / self.duration;
        c
    }

    pub fn with_terms(&self, n_terms: usize) -> Self {
        Self { n_terms, ..self.clone() }
    }

    /// Weighted band energy of an arbitrary coefficient vector.
    pub fn energy(&self, coeffs: &[f64]) -> Result<f64> {
        let a = build_gram(&self.with_terms(coeffs.len()))?;
        let c = DVector::from_column_slice(coeffs);
        Ok((c.transpose() * &a * &c)[(0, 0)])
    }
}

/// Gram matrix `A_nm = Σ_j w_j ∫ ĝ_n ĝ_m* df` (units of seconds).
///
/// The common phase `e^{−iπx}` cancels in `ĝ_n ĝ_m*`, so the matrix is real.
pub fn build_gram(problem: &SuppressionProblem) -> Result<DMatrix<f64>> {
    problem.validate()?;
    let n = problem.n_terms;
    let t_p = problem.duration;
    let mut a = DMatrix::<f64>::zeros(n, n);
    for iv in &problem.intervals {
        let (xl, xh) = (iv.f_low * t_p, iv.f_high * t_p);
        if xh <= xl {
            continue;
        }
        for i in 0..n {
            for j in i..n {
                let v = quad::integrate(|x| basis_amplitude(i + 1, x) * basis_amplitude(j + 1, x), xl, xh, GRAM_TOL)?;
                let v = iv.weight * t_p * v;
                a[(i, j)] += v;
                if i != j {
                    a[(j, i)] += v;
                }
            }
        }
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("non-finite Gram matrix entry"));
    }
    Ok(a)
}

fn relative_kkt_residual(two_a: &DMatrix<f64>, c: &DVector<f64>, mu: f64) -> f64 {
    let r = two_a * c - DVector::from_element(c.len(), mu);
    let scale = two_a.norm() * c.norm();
    if scale == 0.0 { r.norm() } else { r.norm() / scale }
}

/// Solves the bordered KKT system for the optimal series coefficients.
pub fn solve_fast(problem: &SuppressionProblem) -> Result<FastSolution> {
    let a = build_gram(problem)?;
    solve_with_gram(problem, &a)
}

/// Same as [`solve_fast`] with a precomputed Gram matrix.
pub fn solve_with_gram(problem: &SuppressionProblem, a: &DMatrix<f64>) -> Result<FastSolution> {
    problem.validate()?;
    let n = problem.n_terms;
    let t_p = problem.duration;
    let theta = problem.theta;
    let scale_c = theta / t_p;

    let finish = |c: DVector<f64>, mu: f64, condition: f64| -> FastSolution {
        let two_a = a * 2.0;
        let objective = (c.transpose() * a * &c)[(0, 0)];
        FastSolution {
            kkt_residual: relative_kkt_residual(&two_a, &c, mu),
            coeffs: c.iter().copied().collect(),
            lagrange_multiplier: mu,
            objective,
            condition,
        }
    };

    if n == 1 {
        let c = DVector::from_element(1, scale_c);
        let mu = 2.0 * a[(0, 0)] * scale_c;
        return Ok(finish(c, mu, 1.0));
    }
    if a.iter().all(|v| *v == 0.0) {
        let c = DVector::from_column_slice(&problem.cosine_point());
        return Ok(finish(c, 0.0, 1.0));
    }

    // Dimensionless form: c = (θ/t_p) c̃, A = t_p Ã, μ = θ μ̃, with the border
    // row scaled by s so that it is commensurate with the Gram block.
    let two_at = a * (2.0 / t_p);
    let s = two_at.amax();
    let mut m = DMatrix::<f64>::zeros(n + 1, n + 1);
    m.view_mut((0, 0), (n, n)).copy_from(&two_at);
    for i in 0..n {
        m[(i, n)] = -s;
        m[(n, i)] = s;
    }
    let mut rhs = DVector::<f64>::zeros(n + 1);
    rhs[n] = s;

    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };

    let z = if smin > smax * SINGULAR_RATIO {
        let lu = m.clone().lu();
        let mut z = lu
            .solve(&rhs)
            .ok_or_else(|| Error::Degenerate { reason: "LU factorisation failed".into(), condition })?;
        // One step of iterative refinement.
        let r = &rhs - &m * &z;
        if let Some(dz) = lu.solve(&r) {
            z += dz;
        }
        z
    } else {
        // Numerically rank-deficient Gram block (e.g. one narrow band and many
        // terms): every KKT point is optimal, take the minimum-norm one.
        let z = svd
            .solve(&rhs, smax * SINGULAR_RATIO)
            .map_err(|e| Error::Degenerate { reason: format!("pseudo-inverse failed: {e}"), condition })?;
        let residual = (&rhs - &m * &z).norm() / (smax * z.norm()).max(f64::MIN_POSITIVE);
        if !(residual < 1e-12) {
            return Err(Error::Degenerate { reason: "bordered KKT matrix is singular".into(), condition });
        }
        z
    };

    let mut c = z.rows(0, n).into_owned() * scale_c;
    restore_area(&mut c, scale_c);
    let mu = z[n] * s * theta;
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("non-finite FAST coefficients"));
    }
    Ok(finish(c, mu, condition))
}

/// Neumaier-compensated sum.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        comp += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + comp
}

/// Nudges the smallest-magnitude coefficient so that the coefficients sum to
/// `target`. Large cancelling coefficients otherwise lose the constraint to
/// round-off; the nudge is of order cond·eps and leaves stationarity intact.
fn restore_area(c: &mut DVector<f64>, target: f64) {
    let Some(k) = (0..c.len()).min_by(|&i, &j| c[i].abs().total_cmp(&c[j].abs())) else {
        return;
    };
    for _ in 0..3 {
        let delta = target - compensated_sum(c.iter().copied());
        if delta == 0.0 {
            break;
        }
        c[k] += delta;
    }
}

/// Band-placement heuristic driven only by the anharmonicity.
pub fn heuristic_hyperparams(alpha: f64, variant: DragVariant) -> Result<HeuristicParams> {
    if alpha == 0.0 || !alpha.is_finite() {
        return Err(Error::config("anharmonicity must be finite and nonzero"));
    }
    let fa = alpha.abs() / (2.0 * PI);
    let (w_ef, n_terms) = match variant {
        DragVariant::DragL => (5.0, 4),
        DragVariant::DragP => (100.0, 5),
        DragVariant::NoDrag => return Err(Error::config("heuristic needs a DRAG-P or DRAG-L variant")),
    };
    let f_c = 2.0 * fa;
    Ok(HeuristicParams {
        f_l_ef: 0.95 * fa,
        f_h_ef: 1.05 * fa,
        f_c,
        f_h_2: DEFAULT_F_HIGH.max(1.5 * f_c),
        w_ef,
        n_terms,
        variant,
    })
}

impl HeuristicParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.f_l_ef < self.f_h_ef && self.f_h_ef < self.f_c && self.f_c < self.f_h_2) {
            return Err(Error::config("heuristic bands must satisfy f_l_ef < f_h_ef < f_c < f_h_2"));
        }
        Ok(())
    }

    pub fn problem(&self, theta: f64, duration: f64) -> SuppressionProblem {
        SuppressionProblem {
            n_terms: self.n_terms,
            intervals: vec![
                Interval::new(self.f_l_ef, self.f_h_ef, self.w_ef),
                Interval::new(self.f_c, self.f_h_2, 1.0),
            ],
            theta,
            duration,
        }
    }
}

/// Hand-tuned bands used for the 212 MHz device: `[194, 214]` and `[450, 1000]` MHz.
pub fn reference_problem(variant: DragVariant, theta: f64, duration: f64) -> Result<SuppressionProblem> {
    let (w_ef, n_terms) = match variant {
        DragVariant::DragL => (5.0, 4),
        DragVariant::DragP => (100.0, 5),
        DragVariant::NoDrag => return Err(Error::config("reference bands exist for DRAG-P and DRAG-L only")),
    };
    Ok(SuppressionProblem {
        n_terms,
        intervals: vec![Interval::new(194e6, 214e6, w_ef), Interval::new(450e6, 1000e6, 1.0)],
        theta,
        duration,
    })
}

/// Minimum out-of-band energy above `f_c`, the discrete analogue of a prolate spheroidal window.
pub fn slepian_problem(f_c: f64, theta: f64, duration: f64, n_terms: usize) -> Result<SuppressionProblem> {
    if !(f_c > 0.0) {
        return Err(Error::config("cut-off frequency must be positive"));
    }
    if f_c >= DEFAULT_F_HIGH {
        return Err(Error::config(format!("cut-off {f_c:e} Hz lies above the band edge {DEFAULT_F_HIGH:e} Hz")));
    }
    let p = SuppressionProblem { n_terms, intervals: vec![Interval::new(f_c, DEFAULT_F_HIGH, 1.0)], theta, duration };
    p.validate()?;
    Ok(p)
}

/// Largest N (searched upward from 1, up to `n_max`) for which every solve keeps `|c_N| < θ/t_p`.
///
/// N = 1 is accepted by convention: its single coefficient equals θ/t_p.
pub fn critical_n(theta: f64, duration: f64, problem: &SuppressionProblem, n_max: usize) -> Result<usize> {
    let bound = (theta / duration).abs();
    let base = SuppressionProblem { theta, duration, ..problem.clone() };
    let mut best = 1;
    for n in 2..=n_max {
        let sol = solve_fast(&base.with_terms(n))?;
        if sol.coeffs[n - 1].abs() < bound {
            best = n;
        } else {
            break;
        }
    }
    Ok(best)
}

/// Envelope for a solved problem; unit amplitude reproduces the target area θ.
pub fn fast_envelope_spec(solution: &FastSolution, problem: &SuppressionProblem) -> EnvelopeSpec {
    EnvelopeSpec {
        kind: EnvelopeKind::FastSeries { coeffs: solution.coeffs.clone() },
        duration: problem.duration,
        amplitude: 1.0,
        rotation_angle: problem.theta,
    }
}

//! Lindblad generator for a driven, truncated Duffing oscillator and its
//! fixed-step fourth-order Runge–Kutta integration.
//!
//! Density matrices are stored row-major as `d × d` complex buffers. The
//! drive enters only through the coefficient `c` of `a†` in the Hamiltonian,
//! so the generator splits into a precomputed elementwise part and a
//! tridiagonal commutator.

use num_complex::Complex64 as C;

use super::TransmonModel;

#[derive(Debug, Clone)]
pub(crate) struct Kernel {
    pub d: usize,
    /// Elementwise coefficient multiplying ρ_jk (energies and anticommutators).
    diag: Vec<C>,
    /// √j for j = 0..d.
    sq: Vec<f64>,
    gamma_down: f64,
    gamma_up: f64,
}

impl Kernel {
    pub fn new(model: &TransmonModel) -> Self {
        let d = model.levels;
        let inv = |t: f64| if t.is_finite() { 1.0 / t } else { 0.0 };
        let gamma_down = (1.0 + model.n_bar) * inv(model.t1);
        let gamma_up = model.n_bar * inv(model.t1);
        let gamma_phi = inv(model.t_phi);
        let energy: Vec<f64> = (0..d).map(|j| 0.5 * model.alpha * (j * j.saturating_sub(1)) as f64).collect();
        // Diagonal of a a† in the truncated space: the top level has no partner.
        let up_occ: Vec<f64> = (0..d).map(|j| if j + 1 < d { (j + 1) as f64 } else { 0.0 }).collect();
        let mut diag = vec![C::new(0.0, 0.0); d * d];
        for j in 0..d {
            for k in 0..d {
                let decay = 0.5 * gamma_down * (j + k) as f64
                    + 0.5 * gamma_up * (up_occ[j] + up_occ[k])
                    + 0.5 * gamma_phi * ((j as f64) - (k as f64)).powi(2);
                diag[j * d + k] = C::new(-decay, -(energy[j] - energy[k]));
            }
        }
        Self { d, diag, sq: (0..=d).map(|j| (j as f64).sqrt()).collect(), gamma_down, gamma_up }
    }

    /// out = L(ρ) for drive coefficient `c` (H_{j+1,j} = c √(j+1)).
    #[inline]
    pub fn apply(&self, rho: &[C], c: C, out: &mut [C]) {
        let d = self.d;
        let cc = c.conj();
        let minus_i = C::new(0.0, -1.0);
        for j in 0..d {
            for k in 0..d {
                let idx = j * d + k;
                let mut v = self.diag[idx] * rho[idx];
                if j + 1 < d && k + 1 < d {
                    v += self.gamma_down * self.sq[j + 1] * self.sq[k + 1] * rho[idx + d + 1];
                }
                if j >= 1 && k >= 1 {
                    v += self.gamma_up * self.sq[j] * self.sq[k] * rho[idx - d - 1];
                }
                // Commutator with the tridiagonal drive V: (Vρ − ρV)_jk.
                let mut comm = C::new(0.0, 0.0);
                if j >= 1 {
                    comm += c * self.sq[j] * rho[idx - d];
                }
                if j + 1 < d {
                    comm += cc * self.sq[j + 1] * rho[idx + d];
                }
                if k >= 1 {
                    comm -= rho[idx - 1] * cc * self.sq[k];
                }
                if k + 1 < d {
                    comm -= rho[idx + 1] * c * self.sq[k + 1];
                }
                out[idx] = v + minus_i * comm;
            }
        }
    }
}

/// Drive coefficient of `a†` for rotated envelopes and detuning.
#[inline]
pub(crate) fn drive_coefficient(i_env: f64, q_env: f64, phase: f64, detuning: f64, t: f64) -> C {
    // ½(Ω_I + iΩ_Q) e^{−iφ} e^{−iΔt}
    C::new(0.5 * i_env, 0.5 * q_env) * C::from_polar(1.0, -(phase + detuning * t))
}

/// Workspace for repeated RK4 steps on a batch of matrices.
pub(crate) struct Rk4 {
    k1: Vec<C>,
    k2: Vec<C>,
    k3: Vec<C>,
    k4: Vec<C>,
    tmp: Vec<C>,
}

impl Rk4 {
    pub fn new(n: usize) -> Self {
        let z = vec![C::new(0.0, 0.0); n];
        Self { k1: z.clone(), k2: z.clone(), k3: z.clone(), k4: z.clone(), tmp: z }
    }

    /// One step of size `h` given drive coefficients at t, t + h/2, t + h.
    #[inline]
    pub fn step(&mut self, kernel: &Kernel, rho: &mut [C], h: f64, c0: C, ch: C, c1: C) {
        let n = rho.len();
        kernel.apply(rho, c0, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = rho[i] + self.k1[i] * (0.5 * h);
        }
        kernel.apply(&self.tmp, ch, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = rho[i] + self.k2[i] * (0.5 * h);
        }
        kernel.apply(&self.tmp, ch, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = rho[i] + self.k3[i] * h;
        }
        kernel.apply(&self.tmp, c1, &mut self.k4);
        let w = h / 6.0;
        for i in 0..n {
            rho[i] += (self.k1[i] + (self.k2[i] + self.k3[i]) * 2.0 + self.k4[i]) * w;
        }
    }
}

/// Integrates a batch of matrices through a drive sampled on the half-step grid.
///
/// `coeffs` has `2·steps + 1` entries at times `t0 + m·h/2`.
pub(crate) fn integrate_batch(kernel: &Kernel, states: &mut [Vec<C>], coeffs: &[C], h: f64) {
    let steps = (coeffs.len() - 1) / 2;
    let n = kernel.d * kernel.d;
    let mut rk = Rk4::new(n);
    for s in 0..steps {
        let (c0, ch, c1) = (coeffs[2 * s], coeffs[2 * s + 1], coeffs[2 * s + 2]);
        for st in states.iter_mut() {
            rk.step(kernel, st, h, c0, ch, c1);
        }
    }
}

/// Dense generator matrix of the drive-free dynamics acting on row-major vec(ρ).
pub(crate) fn free_generator(kernel: &Kernel) -> Vec<C> {
    let n = kernel.d * kernel.d;
    let mut m = vec![C::new(0.0, 0.0); n * n];
    let mut basis = vec![C::new(0.0, 0.0); n];
    let mut out = vec![C::new(0.0, 0.0); n];
    for col in 0..n {
        basis.iter_mut().for_each(|v| *v = C::new(0.0, 0.0));
        basis[col] = C::new(1.0, 0.0);
        kernel.apply(&basis, C::new(0.0, 0.0), &mut out);
        for row in 0..n {
            m[row * n + col] = out[row];
        }
    }
    m
}

pub(crate) fn matmul(a: &[C], b: &[C], n: usize) -> Vec<C> {
    let mut c = vec![C::new(0.0, 0.0); n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == C::new(0.0, 0.0) {
                continue;
            }
            let row_b = &b[k * n..(k + 1) * n];
            let row_c = &mut c[i * n..(i + 1) * n];
            for j in 0..n {
                row_c[j] += aik * row_b[j];
            }
        }
    }
    c
}

/// exp(M·t) for a dense n×n matrix by scaling and squaring of a Taylor series.
pub(crate) fn expm(m: &[C], n: usize, t: f64) -> Vec<C> {
    let norm = (0..n)
        .map(|i| (0..n).map(|j| m[i * n + j].norm()).sum::<f64>())
        .fold(0.0, f64::max)
        * t.abs();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scale = t / 2f64.powi(squarings as i32);
    let a: Vec<C> = m.iter().map(|v| v * scale).collect();
    let mut result = vec![C::new(0.0, 0.0); n * n];
    let mut term = vec![C::new(0.0, 0.0); n * n];
    for i in 0..n {
        result[i * n + i] = C::new(1.0, 0.0);
        term[i * n + i] = C::new(1.0, 0.0);
    }
    for k in 1..=20 {
        term = matmul(&term, &a, n);
        let inv = 1.0 / k as f64;
        term.iter_mut().for_each(|v| *v *= inv);
        let mut small = true;
        for (r, tv) in result.iter_mut().zip(&term) {
            *r += tv;
            if tv.norm() > 1e-18 {
                small = false;
            }
        }
        if small {
            break;
        }
    }
    for _ in 0..squarings {
        result = matmul(&result, &result, n);
    }
    result
}

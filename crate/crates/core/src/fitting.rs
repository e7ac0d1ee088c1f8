//! Small least-squares helpers shared by calibration and benchmarking.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Least-squares polynomial `c0 + c1 (x − x0) + c2 (x − x0)²` through the
/// points `idx − half ..= idx + half` (clamped to the data).
pub fn local_quadratic(xs: &[f64], ys: &[f64], idx: usize, half: usize) -> Option<(f64, [f64; 3])> {
    let lo = idx.saturating_sub(half);
    let hi = (idx + half).min(xs.len() - 1);
    if hi - lo < 2 {
        return None;
    }
    let x0 = xs[idx];
    let n = hi - lo + 1;
    let m = DMatrix::from_fn(n, 3, |r, c| (xs[lo + r] - x0).powi(c as i32));
    let y = DVector::from_iterator(n, ys[lo..=hi].iter().copied());
    let sol = m.svd(true, true).solve(&y, 1e-14).ok()?;
    Some((x0, [sol[0], sol[1], sol[2]]))
}

/// Vertex of the local quadratic around the discrete extremum at `idx`.
///
/// Returns `(x_vertex, curvature 2·c2)`. Falls back to the grid point when the
/// fit is not concave/convex as expected or the vertex leaves the fitted window.
pub fn quadratic_vertex(xs: &[f64], ys: &[f64], idx: usize, maximum: bool) -> (f64, f64) {
    let half = 2;
    let Some((x0, c)) = local_quadratic(xs, ys, idx, half) else {
        return (xs[idx], 0.0);
    };
    let right_shape = if maximum { c[2] < 0.0 } else { c[2] > 0.0 };
    if !right_shape {
        return (xs[idx], 2.0 * c[2]);
    }
    let v = x0 - c[1] / (2.0 * c[2]);
    let lo = xs[idx.saturating_sub(half)];
    let hi = xs[(idx + half).min(xs.len() - 1)];
    if v < lo.min(hi) || v > lo.max(hi) {
        return (xs[idx], 2.0 * c[2]);
    }
    (v, 2.0 * c[2])
}

/// Zero crossings of sampled data, each refined with a local quadratic fit.
///
/// Returns `(x, slope)` pairs in ascending order of `x`.
pub fn crossings(xs: &[f64], ys: &[f64]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for k in 0..xs.len().saturating_sub(1) {
        let (a, b) = (ys[k], ys[k + 1]);
        if a == 0.0 {
            out.push((xs[k], slope_at(xs, ys, k)));
            continue;
        }
        if a * b >= 0.0 {
            continue;
        }
        let linear = xs[k] - a * (xs[k + 1] - xs[k]) / (b - a);
        let idx = if a.abs() < b.abs() { k } else { k + 1 };
        let refined = local_quadratic(xs, ys, idx, 2).and_then(|(x0, c)| {
            let roots = quadratic_roots(c[2], c[1], c[0]);
            roots
                .into_iter()
                .map(|r| x0 + r)
                .filter(|r| *r >= xs[k] && *r <= xs[k + 1])
                .min_by(|p, q| (p - linear).abs().total_cmp(&(q - linear).abs()))
        });
        out.push((refined.unwrap_or(linear), (b - a) / (xs[k + 1] - xs[k])));
    }
    if let (Some(&x), Some(&y)) = (xs.last(), ys.last()) {
        if y == 0.0 && xs.len() > 1 {
            out.push((x, slope_at(xs, ys, xs.len() - 1)));
        }
    }
    out
}

fn slope_at(xs: &[f64], ys: &[f64], k: usize) -> f64 {
    let lo = k.saturating_sub(1);
    let hi = (k + 1).min(xs.len() - 1);
    (ys[hi] - ys[lo]) / (xs[hi] - xs[lo])
}

fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a.abs() < 1e-300 || (a * c).abs() < 1e-12 * b * b {
        if b == 0.0 {
            return Vec::new();
        }
        // Nearly linear: one Newton step from the linear root is enough.
        let r = -c / b;
        return vec![r - (a * r * r + b * r + c) / (2.0 * a * r + b)];
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    vec![q / a, c / q]
}

/// Result of a Levenberg–Marquardt run.
#[derive(Debug, Clone)]
pub struct LmResult {
    pub params: Vec<f64>,
    /// Sum of squared residuals.
    pub cost: f64,
    /// Covariance estimate `s² (JᵀJ)⁻¹` with `s² = cost / (n − p)`.
    pub covariance: DMatrix<f64>,
}

/// Minimises `Σ r_i(p)²` with a forward-difference Jacobian.
pub fn levenberg_marquardt<F>(residual: F, p0: &[f64], max_iter: usize) -> Result<LmResult>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let np = p0.len();
    let mut p = p0.to_vec();
    let mut r = residual(&p);
    let n = r.len();
    let mut cost: f64 = r.iter().map(|v| v * v).sum();
    if !cost.is_finite() {
        return Err(Error::Fit { reason: "non-finite initial residual".into(), residual: cost });
    }
    let mut lambda = 1e-3;
    let jacobian = |p: &[f64], r: &[f64]| {
        let mut j = DMatrix::<f64>::zeros(r.len(), np);
        for c in 0..np {
            let h = 1e-7 * p[c].abs().max(1e-7);
            let mut q = p.to_vec();
            q[c] += h;
            let rq = residual(&q);
            for i in 0..r.len() {
                j[(i, c)] = (rq[i] - r[i]) / h;
            }
        }
        j
    };
    for _ in 0..max_iter {
        let j = jacobian(&p, &r);
        let jt = j.transpose();
        let jtj = &jt * &j;
        let g = &jt * DVector::from_vec(r.clone());
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for d in 0..np {
                a[(d, d)] += lambda * jtj[(d, d)].max(1e-30);
            }
            let Some(step) = a.lu().solve(&(-&g)) else {
                lambda *= 10.0;
                continue;
            };
            let q: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let rq = residual(&q);
            let cq: f64 = rq.iter().map(|v| v * v).sum();
            if cq.is_finite() && cq <= cost {
                let rel = (cost - cq) / cost.max(1e-300);
                p = q;
                r = rq;
                cost = cq;
                lambda = (lambda * 0.3).max(1e-12);
                improved = rel > 1e-15;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    let j = jacobian(&p, &r);
    let jtj = j.transpose() * &j;
    let dof = n.saturating_sub(np).max(1) as f64;
    let covariance = jtj
        .clone()
        .try_inverse()
        .or_else(|| jtj.pseudo_inverse(1e-300).ok())
        .unwrap_or_else(|| DMatrix::from_element(np, np, f64::INFINITY))
        * (cost / dof);
    Ok(LmResult { params: p, cost, covariance })
}

/// Fit of `y = A + B pˣ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpFit {
    pub a: f64,
    pub b: f64,
    pub p: f64,
    pub sigma_p: f64,
    pub residual: f64,
}

fn linear_ab(xs: &[f64], ys: &[f64], p: f64) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let e: Vec<f64> = xs.iter().map(|x| p.powf(*x)).collect();
    let (se, see) = (e.iter().sum::<f64>(), e.iter().map(|v| v * v).sum::<f64>());
    let (sy, sey) = (ys.iter().sum::<f64>(), e.iter().zip(ys).map(|(a, b)| a * b).sum::<f64>());
    let det = n * see - se * se;
    let (a, b) = if det.abs() <= 1e-14 * n * see {
        (sy / n, 0.0)
    } else {
        ((see * sy - se * sey) / det, (n * sey - se * sy) / det)
    };
    let rss = xs.iter().zip(ys).zip(&e).map(|((_, y), ev)| (y - a - b * ev).powi(2)).sum();
    (a, b, rss)
}

/// Separable fit of `A + B pˣ`: a log-spaced grid over `1 − p`, a linear solve
/// for `A, B` at each grid point, then Levenberg–Marquardt refinement.
pub fn fit_exponential(xs: &[f64], ys: &[f64]) -> Result<ExpFit> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::Fit { reason: "need at least three points".into(), residual: f64::NAN });
    }
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(Error::Fit { reason: "non-finite data".into(), residual: f64::NAN });
    }
    let distinct = {
        let mut v = xs.to_vec();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v.len()
    };
    if distinct < 3 {
        return Err(Error::Fit { reason: "need at least three distinct lengths".into(), residual: f64::NAN });
    }
    let (ymin, ymax) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(*y), b.max(*y)));
    let scale = ys.iter().map(|y| y.abs()).fold(0.0, f64::max).max(1e-300);
    if ymax - ymin <= 1e-13 * scale {
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        return Ok(ExpFit { a: mean, b: 0.0, p: 1.0, sigma_p: 0.0, residual: 0.0 });
    }
    let xmax = xs.iter().copied().fold(0.0, f64::max).max(1.0);
    let mut best = (f64::INFINITY, 1.0);
    for k in 0..=400 {
        // 1 − p from 1e-7/x_max to 0.99, log-spaced.
        let q = (1e-7_f64).ln() + (k as f64 / 400.0) * ((0.99 * xmax).ln() - (1e-7_f64).ln());
        let p = 1.0 - q.exp() / xmax;
        let (_, _, rss) = linear_ab(xs, ys, p);
        if rss < best.0 {
            best = (rss, p);
        }
    }
    let (a0, b0, _) = linear_ab(xs, ys, best.1);
    let model = |q: &[f64]| -> Vec<f64> { xs.iter().zip(ys).map(|(x, y)| q[0] + q[1] * q[2].powf(*x) - y).collect() };
    let lm = levenberg_marquardt(model, &[a0, b0, best.1], 200)?;
    let (a, b, p) = (lm.params[0], lm.params[1], lm.params[2]);
    if !(p.is_finite() && a.is_finite() && b.is_finite()) {
        return Err(Error::Fit { reason: "non-finite parameters".into(), residual: lm.cost });
    }
    Ok(ExpFit { a, b, p, sigma_p: lm.covariance[(2, 2)].max(0.0).sqrt(), residual: lm.cost })
}

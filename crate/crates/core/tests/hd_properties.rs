use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use pulseforge::envelopes::{DragConfig, DragVariant, EnvelopeKind, EnvelopeSpec, apply_drag};
use pulseforge::fast_synth::{Interval, SuppressionProblem, basis_ft, solve_fast};
use pulseforge::hd_drag::{
    HdProblem, MAX_K, ef_problem, even_polynomial, hd_envelope_spec, solve_basis_coeffs, solve_betas, solve_hd,
};
use pulseforge::quad;
use pulseforge::spectrum::{analytic_iq_spectrum, drag_factor};

const ALPHA: f64 = -2.0 * PI * 212e6;

fn hd_problem() -> impl Strategy<Value = HdProblem> {
    (1usize..=MAX_K, prop::collection::vec(50e6..600e6f64, MAX_K), prop::collection::vec(0usize..3, MAX_K), 4e-9..30e-9f64)
        .prop_map(|(k, freqs, repeat, duration)| {
            // Reuse earlier frequencies to build multiplicities.
            let mut f = Vec::with_capacity(k);
            for j in 0..k {
                let v = if j > 0 && repeat[j] == 0 { f[j - 1] } else { freqs[j] };
                f.push(v);
            }
            HdProblem { k, suppressed_freqs: f, duration }
        })
}

/// `|P(f)|` relative to the sum of its term magnitudes.
fn relative_residual(beta: &[f64], f: f64) -> f64 {
    let u = (2.0 * PI * f).powi(2);
    let scale: f64 = beta.iter().enumerate().map(|(n, b)| (b * u.powi(n as i32)).abs()).sum();
    even_polynomial(beta, f).abs() / scale
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn polynomial_vanishes_at_suppressed_frequencies(p in hd_problem()) {
        let sol = solve_hd(&p).unwrap();
        prop_assert_eq!(sol.beta_even.len(), p.k + 1);
        prop_assert_eq!(sol.beta_even[0], 1.0);
        prop_assert!((sol.d_coeffs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for &f in &p.suppressed_freqs {
            prop_assert!(relative_residual(&sol.beta_even, f) < 1e-10, "|P({f:e})| = {:e}", relative_residual(&sol.beta_even, f));
        }
    }

    #[test]
    fn basis_has_smooth_endpoints(k in 0usize..=MAX_K, t_p in 4e-9..30e-9f64) {
        let d = solve_basis_coeffs(k).unwrap();
        let g = EnvelopeSpec { kind: EnvelopeKind::FastSeries { coeffs: d }, duration: t_p, amplitude: 1.0, rotation_angle: 1.0 };
        for m in 0..=(2 * k as u32 + 1) {
            let peak = (0..=400).map(|j| g.base_derivative(t_p * j as f64 / 400.0, m).abs()).fold(0.0, f64::max);
            for t in [0.0, t_p] {
                prop_assert!(g.base_derivative(t, m).abs() < 1e-9 * peak, "order {m} at {t:e}");
            }
        }
    }
}

/// Fourier integral of Ω_I − iΩ_Q computed directly from the time samples.
fn numerical_iq(spec: &EnvelopeSpec, drag: &DragConfig, f: f64, tol: f64) -> Complex64 {
    let w = 2.0 * PI * f;
    let re = quad::integrate(
        |t| {
            let (i, q) = apply_drag(spec, drag, t);
            i * (w * t).cos() - q * (w * t).sin()
        },
        0.0,
        spec.duration,
        tol,
    )
    .unwrap();
    let im = quad::integrate(
        |t| {
            let (i, q) = apply_drag(spec, drag, t);
            -i * (w * t).sin() - q * (w * t).cos()
        },
        0.0,
        spec.duration,
        tol,
    )
    .unwrap();
    Complex64::new(re, im)
}

#[test]
fn product_form_of_the_spectrum() {
    for k in 1..=3 {
        let t_p = 8e-9;
        let sol = solve_hd(&ef_problem(k, ALPHA, t_p)).unwrap();
        let spec = hd_envelope_spec(&sol, 2.0e8, t_p);
        let drag = DragConfig::new(0.8, ALPHA, DragVariant::DragL);
        let peak = spec.amplitude * t_p;
        let mut worst: f64 = 0.0;
        for j in 0..512 {
            let f = -1.5e9 + 3e9 * j as f64 / 511.0;
            let g: Complex64 = sol.d_coeffs.iter().enumerate().map(|(n, d)| basis_ft(n + 1, t_p, f) * *d).sum();
            let product = g * spec.amplitude * even_polynomial(&sol.beta_even, f) * drag_factor(&drag, f);
            let direct = numerical_iq(&spec, &drag, f, 1e-14 * peak);
            worst = worst.max((direct - product).norm() / peak);
            assert!((analytic_iq_spectrum(&spec, &drag, f).value - product).norm() < 1e-12 * peak);
        }
        assert!(worst < 1e-9, "K = {k}: {worst:e}");
    }
}

#[test]
fn single_zero_has_double_iq_zero() {
    let t_p = 6e-9;
    let sol = solve_hd(&ef_problem(1, ALPHA, t_p)).unwrap();
    assert!((sol.beta_even[1] * ALPHA * ALPHA - 1.0).abs() < 1e-14);
    let spec = hd_envelope_spec(&sol, 1.0, t_p);
    let drag = DragConfig::new(1.0, ALPHA, DragVariant::DragL);
    let peak = (0..2000).map(|j| analytic_iq_spectrum(&spec, &drag, -2e9 + 2e6 * j as f64).value.norm()).fold(0.0, f64::max);
    let f_ef = ALPHA / (2.0 * PI);
    assert!(analytic_iq_spectrum(&spec, &drag, f_ef).value.norm() < 1e-12 * peak);
    // P is even, so the mirrored frequency is suppressed as well.
    assert!(analytic_iq_spectrum(&spec, &drag, -f_ef).value.norm() < 1e-12 * peak);
}

#[test]
fn confluent_double_zero_coefficients() {
    let b = solve_betas(&ef_problem(2, ALPHA, 6e-9)).unwrap();
    let a2 = ALPHA * ALPHA;
    assert!((b[1] * a2 - 2.0).abs() < 1e-14);
    assert!((b[2] * a2 * a2 - 1.0).abs() < 1e-14);
}

#[test]
fn distinct_zeros_match_product_of_factors() {
    let (f1, f2) = (180e6, 420e6);
    let b = solve_betas(&HdProblem { k: 2, suppressed_freqs: vec![f1, f2], duration: 6e-9 }).unwrap();
    let (u1, u2) = ((2.0 * PI * f1).powi(2), (2.0 * PI * f2).powi(2));
    // (1 − u/u1)(1 − u/u2) = 1 − (1/u1 + 1/u2) u + u²/(u1 u2), and P uses (−u)ⁿ.
    assert!((b[1] / (1.0 / u1 + 1.0 / u2) - 1.0).abs() < 1e-13);
    assert!((b[2] * u1 * u2 - 1.0).abs() < 1e-13);
}

#[test]
fn single_zero_is_the_two_term_fast_limit() {
    let t_p = 8e-9;
    let f_a = ALPHA.abs() / (2.0 * PI);
    let problem = SuppressionProblem {
        n_terms: 2,
        intervals: vec![Interval::new(f_a - 0.5e3, f_a + 0.5e3, 1.0)],
        theta: PI / 2.0,
        duration: t_p,
    };
    let fast = solve_fast(&problem).unwrap();
    let fast_ratio = fast.coeffs[1] / fast.coeffs[0];

    let hd = solve_hd(&ef_problem(1, ALPHA, t_p)).unwrap();
    let (d1, d2) = (hd.d_coeffs[0], hd.d_coeffs[1]);
    let w1 = 2.0 * PI / t_p;
    let b2 = hd.beta_even[1];
    // g + β₂ g'' re-expanded on 1 − cos(2πnt/t_p): c_n = d_n (1 − β₂ n² ω₁²).
    let hd_ratio = d2 * (1.0 - 4.0 * b2 * w1 * w1) / (d1 * (1.0 - b2 * w1 * w1));
    assert!(((fast_ratio - hd_ratio) / hd_ratio).abs() < 1e-3, "{fast_ratio} vs {hd_ratio}");
}

#[test]
fn invalid_problems() {
    assert!(solve_hd(&HdProblem { k: 2, suppressed_freqs: vec![1e8], duration: 5e-9 }).is_err());
    assert!(solve_hd(&HdProblem { k: 1, suppressed_freqs: vec![-1e8], duration: 5e-9 }).is_err());
    assert!(solve_hd(&HdProblem { k: MAX_K + 1, suppressed_freqs: vec![1e8; MAX_K + 1], duration: 5e-9 }).is_err());
    assert!(solve_hd(&HdProblem { k: 1, suppressed_freqs: vec![1e8], duration: 0.0 }).is_err());
}

#[test]
fn envelope_area_tracks_amplitude() {
    let sol = solve_hd(&ef_problem(2, ALPHA, 10e-9)).unwrap();
    let s = hd_envelope_spec(&sol, 1.5e8, 10e-9);
    let area = quad::integrate(|t| pulseforge::envelopes::eval_envelope(&s, t), 0.0, 10e-9, 1e-15).unwrap();
    assert!((area - s.rotation_angle).abs() < 1e-9 * s.rotation_angle);
}

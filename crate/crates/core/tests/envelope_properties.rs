use std::f64::consts::PI;

use proptest::prelude::*;
use pulseforge::envelopes::{
    DragConfig, DragVariant, EnvelopeKind, EnvelopeSpec, SampledWaveform, apply_drag, eval_envelope, sample_count,
    sample_waveform,
};
use pulseforge::hd_drag::{ef_problem, hd_envelope_spec, solve_hd};
use pulseforge::quad;

const ALPHA: f64 = -2.0 * PI * 212e6;

fn family() -> impl Strategy<Value = EnvelopeSpec> {
    let t_p = 4e-9..40e-9f64;
    let theta = prop_oneof![Just(PI / 2.0), Just(PI), 0.1..3.0f64];
    (t_p, theta, 0usize..6, prop::collection::vec(-1.0..1.0f64, 1..6), 0usize..3, 0.12..0.3f64).prop_map(
        |(t_p, theta, pick, coeffs, k, sigma)| {
            let mut s = match pick {
                0 => EnvelopeSpec::cosine(t_p, theta),
                1 => EnvelopeSpec::gaussian(t_p, theta),
                2 => EnvelopeSpec {
                    kind: EnvelopeKind::Gaussian { sigma_ratio: sigma, subtract_offset: false },
                    duration: t_p,
                    amplitude: 1.0,
                    rotation_angle: theta,
                },
                3 => EnvelopeSpec {
                    kind: EnvelopeKind::FastSeries { coeffs: coeffs.iter().map(|c| c / t_p).collect() },
                    duration: t_p,
                    amplitude: 1.0,
                    rotation_angle: theta,
                },
                4 => hd_envelope_spec(&solve_hd(&ef_problem(k, ALPHA, t_p)).unwrap(), 1.0, t_p),
                _ => EnvelopeSpec {
                    // Rise fractions keep the 17 probe points off the rise/plateau joins.
                    kind: EnvelopeKind::SquareCosineRise { rise_time: [0.1, 0.2, 0.3][k] * t_p },
                    duration: t_p,
                    amplitude: 1.0,
                    rotation_angle: theta,
                },
            };
            if s.base_area().abs() > 0.0 {
                s.rotation_angle = theta;
                s.amplitude = s.area_theorem_amplitude().unwrap();
            }
            s
        },
    )
}

fn drag() -> impl Strategy<Value = DragConfig> {
    (0.2..1.5f64, prop_oneof![Just(DragVariant::DragL), Just(DragVariant::DragP)])
        .prop_map(|(beta, v)| DragConfig::new(beta, ALPHA, v))
}

fn has_plateau(s: &EnvelopeSpec) -> bool {
    matches!(s.kind, EnvelopeKind::SquareCosineRise { .. })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn vanishes_outside_support(s in family()) {
        let peak = s.peak_abs(256);
        for t in [-1e-9, -1e-12, s.duration * (1.0 + 1e-12), s.duration + 1e-9] {
            prop_assert_eq!(eval_envelope(&s, t), 0.0);
        }
        let closes = match s.kind {
            EnvelopeKind::Gaussian { subtract_offset, .. } => subtract_offset,
            _ => true,
        };
        if closes {
            prop_assert!(eval_envelope(&s, 0.0).abs() < 1e-12 * peak);
            prop_assert!(eval_envelope(&s, s.duration).abs() < 1e-12 * peak);
        }
    }

    #[test]
    fn drag_quadrature_has_zero_area(s in family(), d in drag()) {
        prop_assume!(!has_plateau(&s) || s.base_area() > 0.0);
        let q = |t: f64| apply_drag(&s, &d, t).1;
        let q_scale = (0..=512).map(|k| q(s.duration * k as f64 / 512.0).abs()).fold(0.0, f64::max);
        let area = quad::integrate(q, 0.0, s.duration, 1e-14 * q_scale * s.duration).unwrap();
        prop_assert!(area.abs() < 1e-10 * q_scale * s.duration, "area {area:e} scale {q_scale:e}");
    }

    #[test]
    fn derivatives_match_finite_differences(s in family(), d in drag()) {
        let h = 1e-6 * s.duration;
        let pts: Vec<f64> = (1..=17).map(|k| s.duration * k as f64 / 18.0).collect();
        let analytic: Vec<f64> = pts.iter().map(|&t| apply_drag(&s, &d, t).1 / d.derivative_gain()).collect();
        let numeric: Vec<f64> = pts.iter().map(|&t| (eval_envelope(&s, t + h) - eval_envelope(&s, t - h)) / (2.0 * h)).collect();
        let scale = analytic.iter().map(|v| v.abs()).fold(0.0, f64::max).max(s.peak_abs(64) / s.duration);
        for (a, n) in analytic.iter().zip(&numeric) {
            prop_assert!((a - n).abs() < 1e-6 * scale, "{a:e} vs {n:e}");
        }
    }

    #[test]
    fn fast_series_area_by_trapezoid(t_p in 4e-9..40e-9f64, coeffs in prop::collection::vec(-1.0..1.0f64, 1..6), amp in 0.1..3.0f64) {
        let coeffs: Vec<f64> = coeffs.iter().map(|c| c / t_p).collect();
        let sum: f64 = coeffs.iter().sum();
        prop_assume!(sum.abs() * t_p > 0.05);
        let s = EnvelopeSpec { kind: EnvelopeKind::FastSeries { coeffs }, duration: t_p, amplitude: amp, rotation_angle: 1.0 };
        let dt = t_p / 1023.0;
        let w = sample_waveform(&s, &DragConfig::none(), dt).unwrap();
        prop_assert_eq!(w.len(), 1024);
        let n = w.len();
        let trap = dt * (w.i_samples.iter().sum::<f64>() - 0.5 * (w.i_samples[0] + w.i_samples[n - 1]));
        let expected = amp * sum * t_p;
        prop_assert!(((trap - expected) / expected).abs() < 1e-3);
    }

    #[test]
    fn json_round_trip(s in family(), d in drag()) {
        let text = serde_json::to_string(&s).unwrap();
        let back: EnvelopeSpec = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, s);
        let text = serde_json::to_string(&d).unwrap();
        let back: DragConfig = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, d);
    }

    #[test]
    fn sampled_lengths_agree(s in family(), d in drag(), dt_frac in 0.001..0.2f64) {
        let w = sample_waveform(&s, &d, dt_frac * s.duration).unwrap();
        prop_assert_eq!(w.i_samples.len(), w.q_samples.len());
        prop_assert_eq!(w.len(), sample_count(s.duration, dt_frac * s.duration));
        prop_assert!(w.time(w.len() - 1) <= s.duration * (1.0 + 1e-9));
    }
}

#[test]
fn uncompensated_gaussian_endpoint() {
    let t_p = 20e-9;
    let sigma = 0.2 * t_p;
    let s = EnvelopeSpec {
        kind: EnvelopeKind::Gaussian { sigma_ratio: 0.2, subtract_offset: false },
        duration: t_p,
        amplitude: 3.0,
        rotation_angle: 1.0,
    };
    let expected = 3.0 * (-t_p * t_p / (8.0 * sigma * sigma)).exp();
    assert!((eval_envelope(&s, 0.0) - expected).abs() < 1e-15 * 3.0);
}

#[test]
fn awg_grid_for_reference_durations() {
    let dt = 1.0 / 2.4e9;
    assert_eq!(sample_count(6.25e-9, dt), 16);
    assert_eq!(sample_count(10e-9, dt), 25);
    assert_eq!(sample_count(5e-9, dt), 13);
}

#[test]
fn csv_columns_and_round_trip() {
    let s = EnvelopeSpec::cosine(10e-9, PI / 2.0);
    let w = sample_waveform(&s, &DragConfig::new(0.5, ALPHA, DragVariant::DragP), 1e-9).unwrap();
    let mut buf = Vec::new();
    w.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t_ns,I,Q");
    let back = SampledWaveform::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back.len(), w.len());
    assert!((back.dt - w.dt).abs() < 1e-21);
    for k in 0..w.len() {
        assert!((back.i_samples[k] - w.i_samples[k]).abs() <= 1e-12 * w.i_samples[5].abs());
    }
}

#[test]
fn invalid_specs_are_rejected() {
    let bad = [
        EnvelopeSpec { duration: 0.0, ..EnvelopeSpec::cosine(1e-9, 1.0) },
        EnvelopeSpec { amplitude: f64::NAN, ..EnvelopeSpec::cosine(1e-9, 1.0) },
        EnvelopeSpec { kind: EnvelopeKind::SquareCosineRise { rise_time: 6e-9 }, ..EnvelopeSpec::cosine(10e-9, 1.0) },
        EnvelopeSpec { kind: EnvelopeKind::Gaussian { sigma_ratio: 0.0, subtract_offset: true }, ..EnvelopeSpec::cosine(10e-9, 1.0) },
    ];
    for s in bad {
        assert!(s.validate().is_err(), "{s:?}");
    }
    assert!(DragConfig::new(1.0, 0.0, DragVariant::DragL).validate().is_err());
    assert!(DragConfig::new(1.0, 0.0, DragVariant::NoDrag).validate().is_ok());
}

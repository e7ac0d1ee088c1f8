use std::f64::consts::PI;

use proptest::prelude::*;
use pulseforge::envelopes::{DragConfig, DragVariant, EnvelopeKind, EnvelopeSpec, sample_waveform};
use pulseforge::fast_synth::{fast_envelope_spec, heuristic_hyperparams, solve_fast};
use pulseforge::hd_drag::{ef_problem, hd_envelope_spec, solve_hd};
use pulseforge::spectrum::{
    Component, SpectrumMethod, analytic_iq_spectrum, band_energy, component_spectrum, fft_spectrum, i_spectrum,
    spectrum_report,
};

const ALPHA: f64 = -2.0 * PI * 212e6;

fn envelope() -> impl Strategy<Value = EnvelopeSpec> {
    (5e-9..30e-9f64, 0usize..5, prop::collection::vec(-1.0..1.0f64, 1..5)).prop_map(|(t_p, pick, c)| match pick {
        0 => EnvelopeSpec::cosine(t_p, PI / 2.0),
        1 => EnvelopeSpec::gaussian(t_p, PI / 2.0),
        2 => EnvelopeSpec {
            kind: EnvelopeKind::FastSeries { coeffs: c.iter().map(|v| v / t_p).collect() },
            duration: t_p,
            amplitude: 1.0,
            rotation_angle: 1.0,
        },
        3 => hd_envelope_spec(&solve_hd(&ef_problem(1 + c.len() % 3, ALPHA, t_p)).unwrap(), 1.0 / t_p, t_p),
        _ => EnvelopeSpec {
            kind: EnvelopeKind::SquareCosineRise { rise_time: 0.3 * t_p },
            duration: t_p,
            amplitude: 1.0 / t_p,
            rotation_angle: 1.0,
        },
    })
}

fn peak_i(spec: &EnvelopeSpec) -> f64 {
    (0..200).map(|k| i_spectrum(spec, 5e6 * k as f64).value.norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn in_phase_magnitude_is_even(s in envelope(), f in 1e6..2e9f64) {
        let peak = peak_i(&s);
        let (pos, neg) = (i_spectrum(&s, f).value.norm(), i_spectrum(&s, -f).value.norm());
        prop_assert!((pos - neg).abs() < 1e-10 * peak, "{pos:e} vs {neg:e}");
    }

    #[test]
    fn drag_factor_zero(s in envelope(), beta in 0.2..2.0f64) {
        let d = DragConfig::new(beta, ALPHA, DragVariant::DragL);
        let peak = (0..400).map(|k| analytic_iq_spectrum(&s, &d, -2e9 + 1e7 * k as f64).value.norm()).fold(0.0, f64::max);
        let f0 = ALPHA / (2.0 * PI * beta);
        prop_assert!(analytic_iq_spectrum(&s, &d, f0).value.norm() < 1e-12 * peak);
    }

    #[test]
    fn band_energy_matches_trapezoid(s in envelope(), lo in -800e6..800e6f64, width in 5e6..400e6f64) {
        let d = DragConfig::new(0.7, ALPHA, DragVariant::DragP);
        for comp in [Component::I, Component::Iq] {
            let e = band_energy(&s, &d, lo, lo + width, comp).unwrap();
            let m = 2000;
            let h = width / m as f64;
            let trap: f64 = (0..=m)
                .map(|k| {
                    let w = if k == 0 || k == m { 0.5 } else { 1.0 };
                    w * h * component_spectrum(&s, &d, lo + h * k as f64, comp).norm_sqr()
                })
                .sum();
            prop_assert!(e >= 0.0);
            prop_assert!((e - trap).abs() <= 5e-3 * trap.max(1e-300), "{e:e} vs {trap:e}");
        }
    }
}

#[test]
fn closed_form_matches_direct_quadrature() {
    let t_p = 12e-9;
    let cos = EnvelopeSpec::cosine(t_p, PI / 2.0);
    assert_eq!(i_spectrum(&cos, 1e8).method, SpectrumMethod::Analytic);
    assert_eq!(i_spectrum(&EnvelopeSpec::gaussian(t_p, PI / 2.0), 1e8).method, SpectrumMethod::Numerical);
    for f in [0.0, 5e7, 2.12e8, 6e8, -3e8] {
        let w = 2.0 * PI * f;
        let env = |t: f64| pulseforge::envelopes::eval_envelope(&cos, t);
        let re = pulseforge::quad::integrate(|t| env(t) * (w * t).cos(), 0.0, t_p, 1e-14).unwrap();
        let im = pulseforge::quad::integrate(|t| -env(t) * (w * t).sin(), 0.0, t_p, 1e-14).unwrap();
        let direct = num_complex::Complex64::new(re, im);
        assert!((i_spectrum(&cos, f).value - direct).norm() < 1e-10 * PI / 2.0, "f = {f:e}");
    }
}

#[test]
fn fft_approximates_the_continuous_transform() {
    let t_p = 10e-9;
    let s = EnvelopeSpec::cosine(t_p, PI / 2.0);
    let d = DragConfig::new(0.5, ALPHA, DragVariant::DragP);
    let w = sample_waveform(&s, &d, t_p / 400.0).unwrap();
    let r = fft_spectrum(&w, 8192).unwrap();
    let dc = i_spectrum(&s, 0.0).value.norm();
    for (k, f) in r.freqs.iter().enumerate() {
        if f.abs() < 400e6 {
            let exact = analytic_iq_spectrum(&s, &d, *f).value.norm();
            assert!((r.amplitude_iq[k] - exact).abs() < 2e-3 * dc, "f = {f:e}");
        }
    }
    assert!(r.amplitude_i.iter().chain(&r.amplitude_iq).all(|v| *v >= 0.0));
}

#[test]
fn stronger_ef_weight_never_raises_ef_energy() {
    let t_p = 8e-9;
    let h = heuristic_hyperparams(ALPHA, DragVariant::DragL).unwrap();
    let mut last = f64::INFINITY;
    for w_ef in [0.5, 1.0, 2.0, 5.0, 10.0, 50.0, 200.0] {
        let p = pulseforge::fast_synth::HeuristicParams { w_ef, ..h }.problem(PI / 2.0, t_p);
        let spec = fast_envelope_spec(&solve_fast(&p).unwrap(), &p);
        let e = band_energy(&spec, &DragConfig::none(), h.f_l_ef, h.f_h_ef, Component::I).unwrap();
        assert!(e <= last * (1.0 + 1e-9), "w_ef = {w_ef}: {e:e} > {last:e}");
        last = e;
    }
}

#[test]
fn fast_suppresses_the_ef_band_relative_to_cosine() {
    let t_p = 6e-9;
    let h = heuristic_hyperparams(ALPHA, DragVariant::DragL).unwrap();
    let p = h.problem(PI / 2.0, t_p);
    let spec = fast_envelope_spec(&solve_fast(&p).unwrap(), &p);
    let d = DragConfig::new(1.0, ALPHA, DragVariant::DragL);
    let r = spectrum_report(&spec, &d, &[0.0, 1e8], &[(h.f_c, h.f_h_2), (-h.f_h_ef, -h.f_l_ef)]).unwrap();
    assert_eq!(r.band_energies.len(), 2);
    // The weighted objective trades high-band energy for a deeper ef-band notch.
    assert!(r.suppression_db[1].db < -10.0, "{:?}", r.suppression_db);
    assert!(r.suppression_db[0].db.is_finite());
    assert_eq!(r.amplitude_i.len(), 2);
}

#[test]
fn inverted_band_is_rejected() {
    let s = EnvelopeSpec::cosine(10e-9, 1.0);
    assert!(band_energy(&s, &DragConfig::none(), 2e8, 1e8, Component::I).is_err());
}

#[test]
fn spectrum_csv_header() {
    let s = EnvelopeSpec::cosine(10e-9, 1.0);
    let r = spectrum_report(&s, &DragConfig::none(), &[0.0, 1e8], &[]).unwrap();
    let mut buf = Vec::new();
    r.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next().unwrap(), "f_MHz,abs_I,abs_IQ");
    assert_eq!(text.lines().count(), 3);
}

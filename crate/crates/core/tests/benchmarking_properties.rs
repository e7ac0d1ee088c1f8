use std::f64::consts::PI;

use num_complex::Complex64 as C;
use proptest::prelude::*;
use pulseforge::benchmarking::{
    AssignmentMatrix, CharacterizationConfig, CliffordTable, REFERENCE_ASSIGNMENT, RbConfig, RbOutcome, RbSample, VzGate,
    c_distortion_characterization, correct_readout, decompose_clifford, fit_leakage_rb, fit_purity_rb, fit_rb,
    i_distortion_characterization, random_sequences, run_rb, run_rb_with_gates, sequence_unitary, to_virtual_z,
};
use pulseforge::distortion::DistortionModel;
use pulseforge::envelopes::{DragConfig, DragVariant, EnvelopeSpec};
use pulseforge::simulator::{
    CalibratedPulse, DEFAULT_DELAY, GateCalibration, GateSet, NativeGate, Superop, TransmonModel, idle_superop,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

type U = [C; 4];

fn mul(a: &U, b: &U) -> U {
    [a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3], a[2] * b[0] + a[3] * b[2], a[2] * b[1] + a[3] * b[3]]
}

/// Equal up to a global phase.
fn same_up_to_phase(a: &U, b: &U) -> bool {
    let t: C = (0..4).map(|k| a[k].conj() * b[k]).sum();
    (t.norm() / 2.0 - 1.0).abs() < 1e-10
}

fn rz(phi: f64) -> U {
    let z = C::new(0.0, 0.0);
    [C::from_polar(1.0, -phi / 2.0), z, z, C::from_polar(1.0, phi / 2.0)]
}

fn synthetic(lengths: &[usize], f: impl Fn(f64) -> (f64, f64, f64)) -> RbOutcome {
    let samples = lengths
        .iter()
        .map(|&l| {
            let (p_g, p_e, p_f) = f(l as f64);
            RbSample { length: l, sequence: 0, p_g, p_e, p_f, purity: 1.0 }
        })
        .collect();
    RbOutcome { lengths: lengths.to_vec(), samples, avg_gate_count: CliffordTable::get().avg_gate_count() }
}

fn cosine_pulse(model: &TransmonModel, t_g: f64, variant: DragVariant, beta: f64) -> CalibratedPulse {
    let spec = EnvelopeSpec::cosine(t_g - DEFAULT_DELAY, PI / 2.0);
    let drag = DragConfig::new(beta, model.alpha, variant);
    let calib = GateCalibration::initial(model, &spec, &drag).unwrap();
    CalibratedPulse::new(spec, drag, calib).unwrap()
}

#[test]
fn clifford_table_is_a_group() {
    let t = CliffordTable::get();
    assert_eq!(t.len(), 24);
    let us: Vec<U> = (0..24).map(|k| sequence_unitary(&decompose_clifford(k).unwrap())).collect();
    for a in 0..24 {
        assert!(same_up_to_phase(&us[a], &t.unitary(a)));
        for b in 0..24 {
            // Applying a then b.
            let prod = mul(&us[b], &us[a]);
            let hits = us.iter().filter(|u| same_up_to_phase(u, &prod)).count();
            assert_eq!(hits, 1, "{a}·{b} not closed");
            assert!(same_up_to_phase(&us[t.compose(a, b)], &prod));
        }
        assert!(same_up_to_phase(&mul(&us[t.inverse(a)], &us[a]), &NativeGate::I.unitary()));
    }
    assert_eq!(decompose_clifford(0).unwrap(), vec![NativeGate::I]);
    let avg = t.avg_gate_count();
    assert!((2.16..=2.26).contains(&avg), "{avg}");
}

#[test]
fn virtual_z_form_has_the_same_unitary() {
    for k in 0..24 {
        let gates = decompose_clifford(k).unwrap();
        let mut u = NativeGate::I.unitary();
        for g in to_virtual_z(&gates) {
            let step = match g {
                VzGate::Idle => NativeGate::I.unitary(),
                VzGate::XPulse(1) => NativeGate::X90.unitary(),
                VzGate::XPulse(_) => NativeGate::Xm90.unitary(),
                VzGate::VirtualZ(phi) => rz(phi),
            };
            u = mul(&step, &u);
        }
        assert!(same_up_to_phase(&u, &sequence_unitary(&gates)), "Clifford {k}");
        assert!(to_virtual_z(&gates).iter().all(|g| !matches!(g, VzGate::XPulse(s) if s.abs() != 1)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn recovery_closes_random_sequences(seq in prop::collection::vec(0usize..24, 0..60)) {
        let t = CliffordTable::get();
        let mut full = seq.clone();
        full.push(t.recovery(&seq));
        let u = sequence_unitary(&t.physical_sequence(&full));
        prop_assert!(same_up_to_phase(&u, &NativeGate::I.unitary()));
    }
}

#[test]
fn ideal_gates_return_to_ground() {
    let out = run_rb_with_gates(&GateSet::ideal(3, 6.25e-9, None), &RbConfig::default()).unwrap();
    for s in &out.samples {
        assert!((s.p_g - 1.0).abs() < 1e-12, "length {}: {}", s.length, s.p_g);
    }
    let fit = fit_rb(&out).unwrap();
    assert_eq!(fit.eps_gate, 0.0);
}

#[test]
fn injected_depolarizing_error_is_recovered() {
    // Qubit depolarizing ρ ↦ (1 − q)ρ + q𝟙/2 has average gate infidelity q/2.
    let eps = 1e-3;
    let gates = GateSet::ideal(2, 6.25e-9, Some(Superop::depolarizing(2, 2.0 * eps)));
    let fit = fit_rb(&run_rb_with_gates(&gates, &RbConfig::default()).unwrap()).unwrap();
    assert!((fit.eps_gate / eps - 1.0).abs() < 0.2, "{:e}", fit.eps_gate);
}

#[test]
fn synthetic_exponentials_are_inverted_exactly() {
    let lengths = [2, 8, 24, 60, 120, 240];
    let ng = CliffordTable::get().avg_gate_count();
    let out = synthetic(&lengths, |n| (0.5 + 0.5 * 0.99f64.powf(n), 0.0, 0.01 * (1.0 - 0.995f64.powf(n))));
    let rb = fit_rb(&out).unwrap();
    assert!((rb.p - 0.99).abs() < 1e-12 && (rb.a - 0.5).abs() < 1e-12 && (rb.b - 0.5).abs() < 1e-12);
    assert!((rb.eps_clifford - 5e-3).abs() < 1e-12);
    assert!((rb.eps_gate - 5e-3 / ng).abs() < 1e-13);
    let lk = fit_leakage_rb(&out).unwrap();
    assert!((lk.lambda1 - 0.995).abs() < 1e-12 && (lk.a_f - 0.01).abs() < 1e-12);
    assert!((lk.leakage_per_gate - 0.01 * 0.005 / ng).abs() < 1e-15);

    let flat = synthetic(&lengths, |_| (1.0, 0.0, 0.0));
    assert_eq!(fit_rb(&flat).unwrap().eps_gate, 0.0);
    assert_eq!(fit_leakage_rb(&flat).unwrap().leakage_per_gate, 0.0);
}

#[test]
fn noisy_fits_cover_the_truth() {
    let lengths = [2, 8, 24, 60, 120, 240];
    let truth: f64 = 0.995;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut covered = 0;
    for _ in 0..100 {
        let mut samples = Vec::new();
        for &l in &lengths {
            for s in 0..5 {
                let p = 0.5 + 0.45 * truth.powi(l as i32);
                let p_g = Binomial::new(1000, p).unwrap().sample(&mut rng) as f64 / 1000.0;
                samples.push(RbSample { length: l, sequence: s, p_g, p_e: 1.0 - p_g, p_f: 0.0, purity: 1.0 });
            }
        }
        let out = RbOutcome { lengths: lengths.to_vec(), samples, avg_gate_count: 2.2 };
        let fit = fit_rb(&out).unwrap();
        if (fit.p - truth).abs() <= 2.0 * fit.sigma_p {
            covered += 1;
        }
    }
    assert!(covered >= 90, "{covered}/100");
}

#[test]
fn seeded_runs_are_bit_identical() {
    let m = TransmonModel::default();
    let p = cosine_pulse(&m, 8e-9, DragVariant::DragL, 1.0);
    let cfg = RbConfig { lengths: vec![2, 16, 40], n_sequences: 5, seed: 9 };
    let a = run_rb(&m, &p, &cfg, 256).unwrap();
    let b = run_rb(&m, &p, &cfg, 256).unwrap();
    assert_eq!(a, b);
    assert_ne!(random_sequences(&[10], 3, 9), random_sequences(&[10], 3, 10));
}

#[test]
fn rb_error_bounds_the_incoherent_part() {
    let m = TransmonModel::default();
    // Deliberately miscalibrated amplitude adds a coherent error.
    let mut p = cosine_pulse(&m, 10e-9, DragVariant::DragP, 0.5);
    p.calib.amplitude *= 1.01;
    let out = run_rb(&m, &p, &RbConfig::default(), 512).unwrap();
    let (rb, pur) = (fit_rb(&out).unwrap(), fit_purity_rb(&out).unwrap());
    let sigma = 0.5 * rb.sigma_p / out.avg_gate_count;
    assert!(rb.eps_gate + sigma >= pur.eps_incoherent, "{:e} vs {:e}", rb.eps_gate, pur.eps_incoherent);
    assert!(rb.eps_gate > 2.0 * pur.eps_incoherent);
}

#[test]
fn purity_is_blind_to_unitary_errors() {
    let m = TransmonModel::default().closed().with_levels(2);
    let mut p = cosine_pulse(&m, 10e-9, DragVariant::NoDrag, 0.0);
    p.calib.amplitude *= 1.05;
    let out = run_rb(&m, &p, &RbConfig::default(), 512).unwrap();
    let pur = fit_purity_rb(&out).unwrap();
    assert!((pur.u - 1.0).abs() < 1e-9 && pur.eps_incoherent < 1e-9, "{pur:?}");
    let rb = fit_rb(&out).unwrap();
    assert!(rb.eps_gate > 1e-5, "{rb:?}");
}

#[test]
fn purity_matches_the_dephasing_floor() {
    let m = TransmonModel { t1: f64::INFINITY, n_bar: 0.0, levels: 3, ..TransmonModel::default() };
    let t_g = 20e-9;
    let gates = GateSet::ideal(3, t_g, Some(idle_superop(&m, t_g)));
    let out = run_rb_with_gates(&gates, &RbConfig { n_sequences: 100, ..RbConfig::default() }).unwrap();
    let (pur, rb) = (fit_purity_rb(&out).unwrap(), fit_rb(&out).unwrap());
    // Coherence decays at 1/(2T_φ), so the average infidelity per gate is t_g/(6T_φ).
    let expected = t_g / (6.0 * m.t_phi);
    assert!((pur.eps_incoherent / expected - 1.0).abs() < 0.2, "{:e} vs {expected:e}", pur.eps_incoherent);
    // With no coherent part the two estimators see the same error.
    assert!((pur.eps_incoherent / rb.eps_gate - 1.0).abs() < 0.2, "{:e} vs {:e}", pur.eps_incoherent, rb.eps_gate);
}

fn through_readout(out: &RbOutcome, beta: &AssignmentMatrix) -> RbOutcome {
    let mut o = out.clone();
    for s in &mut o.samples {
        let [g, e, f] = beta.measure([s.p_g, s.p_e, s.p_f]);
        (s.p_g, s.p_e, s.p_f) = (g, e, f);
    }
    o
}

#[test]
fn spam_moves_offsets_but_not_the_decay() {
    let m = TransmonModel::default();
    let p = cosine_pulse(&m, 6.25e-9, DragVariant::DragL, 1.0);
    let out = run_rb(&m, &p, &RbConfig::default(), 512).unwrap();
    let beta = AssignmentMatrix::new(REFERENCE_ASSIGNMENT).unwrap();
    let measured = through_readout(&out, &beta);

    let (clean, noisy) = (fit_rb(&out).unwrap(), fit_rb(&measured).unwrap());
    assert!((noisy.eps_gate / clean.eps_gate - 1.0).abs() < 0.05, "{:e} vs {:e}", noisy.eps_gate, clean.eps_gate);
    assert!((noisy.a - clean.a).abs() > 1e-3 && (noisy.b - clean.b).abs() > 1e-3);

    let (lk, lk_noisy) = (fit_leakage_rb(&out).unwrap(), fit_leakage_rb(&measured).unwrap());
    assert!((lk_noisy.leakage_per_gate / lk.leakage_per_gate - 1.0).abs() > 0.1, "raw readout should bias L_g");
    let mut corrected = measured.clone();
    for s in &mut corrected.samples {
        let [g, e, f] = correct_readout([s.p_g, s.p_e, s.p_f], &beta).unwrap();
        (s.p_g, s.p_e, s.p_f) = (g, e, f);
    }
    let lk_fixed = fit_leakage_rb(&corrected).unwrap();
    assert!((lk_fixed.leakage_per_gate / lk.leakage_per_gate - 1.0).abs() < 0.1);
}

#[test]
fn readout_correction_inverts_the_assignment_matrix() {
    let beta = AssignmentMatrix::new(REFERENCE_ASSIGNMENT).unwrap();
    for k in 0..3 {
        let mut e = [0.0; 3];
        e[k] = 1.0;
        let back = correct_readout(beta.measure(e), &beta).unwrap();
        for j in 0..3 {
            assert!((back[j] - e[j]).abs() < 1e-12);
        }
    }
    let p = [0.81, 0.15, 0.04];
    let back = correct_readout(beta.measure(p), &beta).unwrap();
    assert!(back.iter().zip(p).all(|(b, t)| (b - t).abs() < 1e-12));
    assert_eq!(correct_readout([0.2, 0.3, 0.5], &AssignmentMatrix::identity()).unwrap(), [0.2, 0.3, 0.5]);
    let singular = AssignmentMatrix { rows: [[0.5, 0.5, 0.0], [0.5, 0.5, 0.0], [0.0, 0.0, 1.0]] };
    assert!(correct_readout([0.3, 0.3, 0.4], &singular).is_err());
    assert!(AssignmentMatrix::new([[0.9, 0.2, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).is_err());
}

fn slow_pulse(m: &TransmonModel) -> CalibratedPulse {
    let spec = EnvelopeSpec::cosine(20e-9, PI / 2.0);
    let drag = DragConfig::new(0.5, m.alpha, DragVariant::DragP);
    CalibratedPulse::new(spec.clone(), drag, GateCalibration::initial(m, &spec, &drag).unwrap()).unwrap()
}

fn light_config() -> CharacterizationConfig {
    CharacterizationConfig { samples_per_pulse: 128, steps_per_pulse: 512, ..CharacterizationConfig::default() }
}

#[test]
fn axis_shift_is_absent_without_distortion_and_linear_in_a() {
    let m = TransmonModel::default();
    let p = slow_pulse(&m);
    let grid: Vec<f64> = (0..13).map(|k| -0.03 + 0.005 * k as f64).collect();
    let cfg = light_config();
    let none = i_distortion_characterization(&m, &p, &DistortionModel::identity(), &[0.0, 8e-9], &grid, &cfg).unwrap();
    assert!(none.scans.iter().all(|s| s.phi_s.abs() < 5e-4), "{:?}", none.scans.iter().map(|s| s.phi_s).collect::<Vec<_>>());

    let amps = [-0.01, -0.02, -0.04];
    let shifts: Vec<f64> = amps
        .iter()
        .map(|&a| i_distortion_characterization(&m, &p, &DistortionModel::intra(a, 8e-9), &[4e-9], &grid, &cfg).unwrap().scans[0].phi_s)
        .collect();
    // Least-squares line through the three points.
    let (mx, my) = (amps.iter().sum::<f64>() / 3.0, shifts.iter().sum::<f64>() / 3.0);
    let sxy: f64 = amps.iter().zip(&shifts).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = amps.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = shifts.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = sxy * sxy / (sxx * syy);
    assert!(r2 > 0.99, "R² = {r2}, shifts {shifts:?}");
}

#[test]
fn c_circuit_selects_cross_quadrature_distortion() {
    let m = TransmonModel::default();
    let p = slow_pulse(&m);
    let cfg = light_config();
    let reps = [1, 5, 10];
    let t_d = [0.0, 4e-9];
    let none = c_distortion_characterization(&m, &p, &DistortionModel::identity(), &t_d, &reps, &cfg).unwrap();
    let intra = c_distortion_characterization(&m, &p, &DistortionModel::intra(-0.028, 8e-9), &t_d, &reps, &cfg).unwrap();
    let cross = c_distortion_characterization(&m, &p, &DistortionModel::cross(0.02, 8e-9), &t_d, &reps, &cfg).unwrap();
    for row in none.p_e.iter().chain(&intra.p_e) {
        assert!(row.iter().all(|v| (v - 0.5).abs() < 0.02), "{row:?}");
    }
    for (c_row, n_row) in cross.p_e.iter().zip(&none.p_e) {
        let dev: Vec<f64> = c_row.iter().zip(n_row).map(|(c, n)| (c - n).abs()).collect();
        assert!(dev[2] > dev[0] && dev[2] > 0.02, "{dev:?}");
    }
}

use std::f64::consts::FRAC_PI_2;

use proptest::prelude::*;
use timeopt::circuit::Circuit;
use timeopt::gateset::{build_static_gateset, CalibrationConfig, DurationPolicy, GateSet};
use timeopt::linalg::{CMatrix, C64};
use timeopt::pulse::synthesize;
use timeopt::scheduler::compile;
use timeopt::sim::{
    choi_matrix, decoherence, ecr_unitary_qutrit, is_positive_semidefinite, leakage_population,
    min_eigenvalue, propagate_waveform, GateModel, NoiseModel, QubitParams, Simulator, StateOp,
    Superop,
};

fn projector(k: usize) -> CMatrix {
    let mut m = CMatrix::zeros(3, 3);
    m[(k, k)] = C64::ONE;
    m
}

fn params(t1: f64, t2: f64) -> QubitParams {
    QubitParams {
        t1_ns: Some(t1),
        t2_ns: Some(t2),
        ..QubitParams::default()
    }
}

#[test]
fn excited_population_follows_t1() {
    let p = params(180e3, 120e3);
    for t in [0.0, 10.0, 660.0, 5e3, 180e3, 1e6] {
        let out = decoherence(&p, t).apply(&projector(1));
        assert!((out[(1, 1)].re - (-t / 180e3).exp()).abs() <= 1e-9, "t={t}");
        assert!((out[(0, 0)].re + out[(1, 1)].re - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn coherence_follows_t2() {
    let p = params(100e3, 60e3);
    let mut plus = CMatrix::zeros(3, 3);
    for i in 0..2 {
        for j in 0..2 {
            plus[(i, j)] = C64::new(0.5, 0.0);
        }
    }
    for t in [0.0, 500.0, 60e3, 3e5] {
        let out = decoherence(&p, t).apply(&plus);
        assert!(
            (out[(0, 1)].norm() - 0.5 * (-t / 60e3).exp()).abs() <= 1e-9,
            "t={t}"
        );
    }
}

#[test]
fn idle_channels_compose_as_a_semigroup() {
    for p in [params(180e3, 120e3), params(50e3, 100e3), params(20e3, 5e3)] {
        for (a, b) in [(16.0, 48.0), (660.0, 1320.0), (1e4, 3.3e4)] {
            let joint = decoherence(&p, a + b);
            let split = decoherence(&p, a).then(&decoherence(&p, b));
            let diff = (&joint.matrix - &split.matrix)
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            assert!(diff <= 1e-12, "{diff:e}");
        }
    }
}

#[test]
fn idle_and_pulse_channels_have_psd_choi_matrices() {
    for p in [
        params(180e3, 120e3),
        params(50e3, 100e3),
        params(1e3, 0.2e3),
    ] {
        for t in [1.0, 100.0, 1e4, 1e6] {
            let j = decoherence(&p, t).choi();
            assert!(
                is_positive_semidefinite(&j, 1e-8),
                "min eig {}",
                min_eigenvalue(&j)
            );
        }
    }
    let nm = NoiseModel::default();
    let gs = GateSet::nominal(DurationPolicy::static_mode(32, 512), 2, 105e6).unwrap();
    let mut c = Circuit::new(2);
    c.u3(0, 1.1, 0.2, -0.4)
        .u3(1, 2.0, 0.5, 0.1)
        .ecr(0, 1)
        .u3(0, 0.4, 1.0, 2.0);
    let (sch, _) = compile(&c, &gs, true).unwrap();
    let sim = Simulator::new(&nm, GateModel::Pulse);
    for op in sch.ops.iter().filter(|o| o.kind.is_pulse()) {
        let j = sim.gate_channel(&sch, op).unwrap().choi();
        assert!(
            is_positive_semidefinite(&j, 1e-8),
            "min eig {}",
            min_eigenvalue(&j)
        );
    }
}

#[test]
fn two_qubit_gate_channel_is_completely_positive() {
    let nm = NoiseModel::default();
    let sim = Simulator::new(&nm, GateModel::Pulse);
    let decay = sim.idle_channel(0, 1320);
    let j = choi_matrix(9, |x| {
        let mut s = StateOp {
            n: 2,
            rho: x.clone(),
        };
        s.apply_unitary(&ecr_unitary_qutrit(), &[0, 1]);
        s.depolarize_pair(1.0 - nm.ecr_fidelity, 0, 1);
        s.apply_local(&decay, 0);
        s.apply_local(&decay, 1);
        s.rho
    });
    assert!(
        is_positive_semidefinite(&j, 1e-8),
        "min eig {}",
        min_eigenvalue(&j)
    );
    // Trace preservation: the partial trace over the output is the identity.
    for a in 0..9 {
        for b in 0..9 {
            let tr: C64 = (0..9).map(|r| j[(a * 9 + r, b * 9 + r)]).sum();
            let expect = if a == b { 1.0 } else { 0.0 };
            assert!((tr - C64::new(expect, 0.0)).norm() < 1e-12);
        }
    }
}

#[test]
fn unitary_superoperator_round_trip() {
    let u = timeopt::linalg::embed(
        &timeopt::linalg::to_dynamic(&timeopt::linalg::sx()),
        &[0],
        1,
        2,
    );
    let s = Superop::from_unitary(&u);
    let mut rho = CMatrix::zeros(2, 2);
    rho[(0, 0)] = C64::ONE;
    let out = s.apply(&rho);
    assert!((out[(1, 1)].re - 0.5).abs() < 1e-15);
}

#[test]
fn leakage_falls_with_duration_for_plain_gaussian_sx() {
    let nm = NoiseModel::noiseless();
    let cfg = CalibrationConfig::default();
    let durations = [32u64, 48, 64, 120];
    let gs = build_static_gateset(&durations, 1, &nm, &cfg).unwrap();
    let leak: Vec<f64> = durations
        .iter()
        .map(|&d| {
            let spec = gs.rotation_spec(0, FRAC_PI_2, d).unwrap();
            leakage_population(&propagate_waveform(
                &synthesize(&spec).unwrap(),
                nm.qubit(0),
            ))
        })
        .collect();
    assert!(leak.windows(2).all(|w| w[0] > w[1]), "{leak:?}");
}

#[test]
fn same_time_disjoint_ops_commute() {
    let nm = NoiseModel::default();
    let gs = GateSet::nominal(DurationPolicy::static_mode(32, 512), 3, 105e6).unwrap();
    let mut c = Circuit::new(3);
    c.u3(0, 0.9, 0.1, 0.2)
        .u3(1, 1.7, -0.3, 0.4)
        .u3(2, 2.5, 0.0, 1.0)
        .ecr(1, 2)
        .sx(0);
    let (sch, _) = compile(&c, &gs, false).unwrap();
    let sim = Simulator::new(&nm, GateModel::Pulse);
    let a = sim.final_state(&sch).unwrap();
    let mut permuted = sch.clone();
    let n = permuted.ops.len();
    for op in &mut permuted.ops {
        op.node = n - 1 - op.node;
    }
    let b = sim.final_state(&permuted).unwrap();
    let diff = (&a.rho - &b.rho)
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    assert!(diff <= 1e-12, "{diff:e}");
}

#[test]
fn noiseless_ideal_evolution_stays_pure_and_physical() {
    let nm = NoiseModel::noiseless();
    let gs = GateSet::nominal(DurationPolicy::static_mode(32, 512), 2, 105e6).unwrap();
    let mut c = Circuit::new(2);
    c.u3(0, 1.0, 2.0, 3.0).ecr(0, 1).u3(1, 0.5, 0.0, 0.0);
    let (sch, _) = compile(&c, &gs, true).unwrap();
    let s = Simulator::new(&nm, GateModel::Ideal)
        .with_physicality_checks(true)
        .final_state(&sch)
        .unwrap();
    let purity = (&s.rho * &s.rho).trace().re;
    assert!((purity - 1.0).abs() < 1e-12);
    let expect = c.unitary();
    let p00 = expect[(0, 0)].norm_sqr();
    assert!((s.p0() - p00).abs() < 1e-12);
}

#[test]
fn histogram_csv_and_sampling() {
    let nm = NoiseModel::noiseless();
    let gs = GateSet::nominal(DurationPolicy::static_mode(32, 512), 1, 105e6).unwrap();
    let mut c = Circuit::new(1);
    c.sx(0).measure_all();
    let (sch, _) = compile(&c, &gs, false).unwrap();
    let out = timeopt::sim::run_schedule(&sch, &nm, GateModel::Ideal, 2000, 3).unwrap();
    assert_eq!(out.counts.values().sum::<u64>(), 2000);
    assert!((out.counts["0"] as f64 / 2000.0 - 0.5).abs() < 0.05);
    let again = timeopt::sim::run_schedule(&sch, &nm, GateModel::Ideal, 2000, 3).unwrap();
    assert_eq!(out, again);
    let mut buf = Vec::new();
    out.write_histogram_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("bitstring,count,probability\n"));
}

#[test]
fn invalid_noise_models_are_config_errors() {
    let bad = NoiseModel::uniform(params(10.0, 30.0), 0.99);
    assert!(bad.validate(1).unwrap_err().is_config());
    let wrong_width = NoiseModel {
        qubits: vec![QubitParams::default(); 2],
        ..NoiseModel::default()
    };
    assert!(wrong_width.validate(3).is_err());
    let back = NoiseModel::from_json(&NoiseModel::default().to_json()).unwrap();
    assert_eq!(back, NoiseModel::default());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn decoherence_is_cptp(t1 in 1e2f64..1e6, ratio in 0.05f64..2.0, t in 0.0f64..1e6) {
        let p = params(t1, t1 * ratio);
        let ch = decoherence(&p, t);
        prop_assert!(is_positive_semidefinite(&ch.choi(), 1e-8));
        let out = ch.apply(&projector(2));
        prop_assert!((out.trace().re - 1.0).abs() < 1e-10);
    }

    #[test]
    fn semigroup_for_random_splits(t1 in 1e3f64..1e6, ratio in 0.1f64..2.0, a in 0.0f64..5e4, b in 0.0f64..5e4) {
        let p = params(t1, t1 * ratio);
        let joint = decoherence(&p, a + b);
        let split = decoherence(&p, a).then(&decoherence(&p, b));
        let diff = (&joint.matrix - &split.matrix).iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(diff <= 1e-12);
    }
}

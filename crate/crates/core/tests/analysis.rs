use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use qbc_core::analysis::{
    concealing_check, conditional_holdings, conditional_post_measurement_distance, prelim_one_report, prelim_two_check,
    monte_carlo, Experiment, McParams,
};
use qbc_core::linalg::{partial_trace, trace_distance};
use qbc_core::protocol::{BobAction, BobStrategySpec};
use qbc_core::rng::session_rng;
use qbc_core::states::{sz_total, z_product_ensemble, Axis, Bit, MeasurementBasis, Spin};

/// S_z distribution of an `n`-pair commitment by direct enumeration of the
/// z-product members.
fn sz_distribution(b: Bit, n: usize) -> BTreeMap<i64, f64> {
    let mut out = BTreeMap::new();
    for (state, q) in z_product_ensemble(b, n).unwrap().members() {
        let idx = state.amplitudes().iter().position(|a| a.norm() > 0.5).unwrap();
        let spins: Vec<Option<Spin>> =
            (0..2 * n).map(|k| Some(Spin::from_index((idx >> (2 * n - 1 - k)) & 1))).collect();
        *out.entry(sz_total(&spins).unwrap()).or_insert(0.0) += q;
    }
    out
}

#[test]
fn spin_sum_statistics_by_enumeration() {
    let d0 = sz_distribution(Bit::Zero, 2);
    assert_eq!(d0.len(), 1);
    assert_eq!(d0[&0], 1.0);
    let d1 = sz_distribution(Bit::One, 2);
    assert_eq!(d1, BTreeMap::from([(-4, 0.25), (0, 0.5), (4, 0.25)]));
    let tv: f64 = [-4, 0, 4].iter().map(|s| (d0.get(s).unwrap_or(&0.0) - d1[s]).abs()).sum::<f64>() / 2.0;
    assert_eq!(tv, 0.5);
}

#[test]
fn averaged_sequences_differ_only_through_the_spin_sum() {
    for n in 1..=4 {
        let r = prelim_one_report(n).unwrap();
        assert!(r.max_off_diagonal < 1e-12, "n={n}");
        assert!(r.max_class_spread < 1e-12, "n={n}");
        assert!((r.trace_distance_full - r.tv_distance_sz).abs() < 1e-9);
        assert!(r.tv_distance_sz <= r.trace_distance_full + 1e-9);
        let oracle = sz_distribution(Bit::One, n);
        for (s, p) in &r.sz_distribution[1] {
            assert!((oracle[s] - p).abs() < 1e-12, "n={n} s={s}");
        }
        assert_eq!(r.exact_sum, n <= 3);
    }
    let r = prelim_one_report(2).unwrap();
    assert!((r.trace_distance_full - 0.5).abs() < 1e-9);
}

#[test]
fn collapsed_pairs_look_alike_for_xy_axes() {
    let d = prelim_two_check(&[MeasurementBasis::xy(0.0), MeasurementBasis::xy(PI / 3.0)], &[Spin::Up, Spin::Down]).unwrap();
    assert!(d < 1e-9);
    for k in 0..16 {
        for alpha in [Spin::Up, Spin::Down] {
            let d = prelim_two_check(&[MeasurementBasis::xy(TAU * k as f64 / 16.0)], &[alpha]).unwrap();
            assert!(d < 1e-9);
        }
    }
    let z = conditional_post_measurement_distance(&[MeasurementBasis::Z], &[Spin::Up]).unwrap();
    assert_eq!(z, 1.0);
}

#[test]
fn honest_receiver_learns_nothing() {
    let mut rng = session_rng(40);
    for n in 1..=3 {
        for _ in 0..3 {
            assert!(concealing_check(n, &BobStrategySpec::Honest, true, &mut rng).unwrap().distance < 1e-9);
        }
    }
}

#[test]
fn ancilla_receiver_marginals_are_bit_independent() {
    let axis = Axis::new(0.3);
    let branches = vec![(axis, std::f64::consts::FRAC_1_SQRT_2), (axis.opposite(), std::f64::consts::FRAC_1_SQRT_2)];
    let actions = vec![
        BobAction::Ancilla { branches: branches.clone(), outcome: Spin::Up },
        BobAction::Ancilla { branches, outcome: Spin::Down },
    ];
    let r0 = conditional_holdings(Bit::Zero, &actions, true).unwrap();
    let r1 = conditional_holdings(Bit::One, &actions, true).unwrap();
    let particles = [0, 1, 2, 3];
    let chis = [4, 5];
    let d_particles = trace_distance(&partial_trace(&r0, &particles).unwrap(), &partial_trace(&r1, &particles).unwrap()).unwrap();
    let d_chis = trace_distance(&partial_trace(&r0, &chis).unwrap(), &partial_trace(&r1, &chis).unwrap()).unwrap();
    assert!(d_particles < 1e-9);
    assert!(d_chis < 1e-9);
}

#[test]
fn honest_sessions_never_reject() {
    let e = monte_carlo(Experiment::HonestCompleteness, &McParams::new(3, 2), 500, 1, 2).unwrap();
    assert_eq!(e.failures(), 0);
    assert_eq!(e.point, 1.0);
}

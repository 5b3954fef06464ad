//! One runner per experiment id, each producing a [`Report`].

use std::f64::consts::{FRAC_PI_2, TAU};

use anyhow::Result;
use rand::Rng;

use qbc_core::adversaries::cheating_unitary;
use qbc_core::analysis::{
    binding_curve, concealing_check, is_non_increasing, monte_carlo, prelim_one_report, prelim_two_check, Estimate,
    Experiment, McParams,
};
use qbc_core::linalg::{phase_minimized_sup_distance, CMatrix};
use qbc_core::protocol::BobAction;
use qbc_core::rng::session_rng;
use qbc_core::states::{Axis, Bit, MeasurementBasis, Spin};

use crate::config::{ExperimentId, RunConfig};
use crate::report::Report;

/// Threshold for the axis dependence of the cheating unitary.
pub const UA_MIN_DISTANCE: f64 = 0.1;
/// Grid points per axis sweep.
pub const AXIS_GRID: usize = 16;

pub fn run_experiment(id: ExperimentId, cfg: &RunConfig) -> Result<Report> {
    let mut r = match id {
        ExperimentId::Concealing => concealing(cfg)?,
        ExperimentId::Prelim1 => prelim1(cfg)?,
        ExperimentId::Prelim2 => prelim2(cfg)?,
        ExperimentId::UaDependence => ua_dependence(cfg)?,
        ExperimentId::CheatGuess => sampled(cfg, Experiment::GuessTestSet, |e| e.covers_reference() == Some(true))?,
        ExperimentId::CheatZ => sampled(cfg, Experiment::MeasureZ, |e| e.covers_reference() == Some(true))?,
        ExperimentId::CheatQuantum => sampled(cfg, Experiment::QuantumPass, |e| e.failures() == 0)?,
        ExperimentId::Honest => sampled(cfg, Experiment::HonestCompleteness, |e| e.failures() == 0)?,
        ExperimentId::BindingEprOracle => sampled(cfg, Experiment::EprOracle, |e| e.failures() == 0)?,
        ExperimentId::BindingRelabel => binding_relabel(cfg)?,
        ExperimentId::BindingEprBlind => binding_blind(cfg)?,
    };
    r.experiment = id;
    r.params.experiment = id;
    Ok(r)
}

fn params(cfg: &RunConfig) -> McParams {
    McParams { n: cfg.n, m: cfg.m, b: cfg.bit(), amplitudes: cfg.p_profile.clone() }
}

fn sampled(cfg: &RunConfig, exp: Experiment, pass: impl Fn(&Estimate) -> bool) -> Result<Report> {
    let e = monte_carlo(exp, &params(cfg), cfg.trials, cfg.seed, cfg.jobs)?;
    Ok(Report::sampled(cfg, &e, pass(&e), exp.is_counterfactual()))
}

/// Receiver's conditional holdings after the shuffle, one draw of his
/// private randomness.
fn concealing(cfg: &RunConfig) -> Result<Report> {
    let r = concealing_check(cfg.n, &cfg.bob_spec(), true, &mut session_rng(cfg.seed))?;
    Ok(Report::exact(cfg, r.distance, Some(0.0), r.distance < cfg.tolerance))
}

fn prelim1(cfg: &RunConfig) -> Result<Report> {
    let r = prelim_one_report(cfg.n)?;
    let pass = (r.trace_distance_full - r.tv_distance_sz).abs() < cfg.tolerance
        && r.max_off_diagonal < cfg.tolerance
        && r.max_class_spread < cfg.tolerance;
    Ok(Report::exact(cfg, r.trace_distance_full, Some(r.tv_distance_sz), pass))
}

/// Largest conditional distance over a rotated axis grid and every
/// outcome pattern.
fn prelim2(cfg: &RunConfig) -> Result<Report> {
    let mut worst: f64 = 0.0;
    for i in 0..AXIS_GRID {
        let bases: Vec<MeasurementBasis> =
            (0..cfg.n).map(|j| MeasurementBasis::xy(TAU * ((i + 5 * j) % AXIS_GRID) as f64 / AXIS_GRID as f64)).collect();
        for pattern in 0..1usize << cfg.n {
            let outcomes: Vec<Spin> = (0..cfg.n).map(|j| Spin::from_index((pattern >> j) & 1)).collect();
            worst = worst.max(prelim_two_check(&bases, &outcomes)?);
        }
    }
    Ok(Report::exact(cfg, worst, Some(0.0), worst < cfg.tolerance))
}

fn pair_unitaries(actions: &[BobAction]) -> Result<CMatrix> {
    let mut u = CMatrix::identity(1, 1);
    for a in actions {
        u = u.kronecker(&cheating_unitary(Bit::Zero, Bit::One, a)?);
    }
    Ok(u)
}

/// `U_A` for a random axis set and for the same set turned by π/2.
fn ua_dependence(cfg: &RunConfig) -> Result<Report> {
    let mut rng = session_rng(cfg.seed);
    let mut p = Vec::with_capacity(cfg.n);
    let mut q = Vec::with_capacity(cfg.n);
    for _ in 0..cfg.n {
        let axis = Axis::random(&mut rng);
        let outcome = if rng.random::<bool>() { Spin::Up } else { Spin::Down };
        p.push(BobAction::Measured { basis: MeasurementBasis::Xy { axis }, outcome });
        let turned = Axis::new(axis.theta() + FRAC_PI_2);
        q.push(BobAction::Measured { basis: MeasurementBasis::Xy { axis: turned }, outcome });
    }
    let d = phase_minimized_sup_distance(&pair_unitaries(&p)?, &pair_unitaries(&q)?);
    Ok(Report::exact(cfg, d, None, d > UA_MIN_DISTANCE))
}

/// Acceptance at `n`; passes when the curve over `1..=n` never rises.
fn binding_relabel(cfg: &RunConfig) -> Result<Report> {
    let ns: Vec<usize> = (1..=cfg.n).collect();
    let curve = binding_curve(Experiment::BindingRelabel, &params(cfg), &ns, cfg.trials, cfg.seed, cfg.jobs)?;
    let e = &curve.last().expect("n >= 1").1;
    Ok(Report::sampled(cfg, e, is_non_increasing(&curve), false))
}

/// Blind acceptance; passes when strictly below the oracle rate with
/// disjoint intervals.
fn binding_blind(cfg: &RunConfig) -> Result<Report> {
    let p = params(cfg);
    let blind = monte_carlo(Experiment::EprBlind, &p, cfg.trials, cfg.seed, cfg.jobs)?;
    let oracle = monte_carlo(Experiment::EprOracle, &p, cfg.trials, cfg.seed, cfg.jobs)?;
    let pass = blind.point < oracle.point && blind.separated_from(&oracle);
    Ok(Report::sampled(cfg, &blind, pass, false))
}

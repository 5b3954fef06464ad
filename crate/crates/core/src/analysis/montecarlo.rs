//! Seeded, parallel Monte Carlo over whole protocol sessions.

use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversaries::{build_alice, ClassicalRelabelAlice, GuessTestSetBob, MeasureZBob, QuantumAncillaBob};
use crate::error::{Error, Result};
use crate::protocol::{
    run_protocol_with, AliceStrategySpec, BobStrategySpec, HonestAlice, HonestBob, Knowledge, ProtocolConfig, Verdict,
};
use crate::rng::{trial_rng, SimRng};
use crate::states::Bit;

use super::estimate::Estimate;

pub const MIN_TRIALS: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    /// Receiver's guessed test set equals the real one.
    GuessTestSet,
    /// All-ẑ receiver passes the test phase.
    MeasureZ,
    /// Ancilla receiver passes the test phase.
    QuantumPass,
    /// Honest session accepts the committed bit.
    HonestCompleteness,
    /// Classical relabelling opens the flipped bit.
    BindingRelabel,
    /// Purification attack with the receiver's parameters handed over.
    EprOracle,
    /// Purification attack with guessed axes.
    EprBlind,
    /// All-ẑ receiver guesses the bit correctly, among sessions that passed the test.
    ZBobGuess,
    /// Fair coin; checks the interval machinery.
    Calibration,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::GuessTestSet,
        Experiment::MeasureZ,
        Experiment::QuantumPass,
        Experiment::HonestCompleteness,
        Experiment::BindingRelabel,
        Experiment::EprOracle,
        Experiment::EprBlind,
        Experiment::ZBobGuess,
        Experiment::Calibration,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::GuessTestSet => "guess_test_set",
            Experiment::MeasureZ => "measure_z",
            Experiment::QuantumPass => "quantum_pass",
            Experiment::HonestCompleteness => "honest_completeness",
            Experiment::BindingRelabel => "binding_relabel",
            Experiment::EprOracle => "epr_oracle",
            Experiment::EprBlind => "epr_blind",
            Experiment::ZBobGuess => "z_bob_guess",
            Experiment::Calibration => "calibration",
        }
    }

    pub fn is_counterfactual(self) -> bool {
        self == Experiment::EprOracle
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McParams {
    pub n: usize,
    pub m: usize,
    /// Committed bit; drawn per trial when absent.
    pub b: Option<Bit>,
    /// Branch amplitudes of the ancilla receiver.
    pub amplitudes: Vec<f64>,
}

impl McParams {
    pub fn new(n: usize, m: usize) -> Self {
        Self { n, m, b: None, amplitudes: vec![std::f64::consts::FRAC_1_SQRT_2; 2] }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Closed-form rate where one exists.
pub fn exact_reference(experiment: Experiment, p: &McParams) -> Option<f64> {
    match experiment {
        Experiment::GuessTestSet => Some(1.0 / binomial(p.n + p.m, p.m)),
        Experiment::MeasureZ => Some(0.5f64.powi(p.m as i32)),
        Experiment::QuantumPass | Experiment::HonestCompleteness | Experiment::EprOracle => Some(1.0),
        Experiment::Calibration => Some(0.5),
        Experiment::BindingRelabel | Experiment::EprBlind | Experiment::ZBobGuess => None,
    }
}

fn config(p: &McParams, b: Bit, seed: u64, alice: AliceStrategySpec, bob: BobStrategySpec) -> ProtocolConfig {
    ProtocolConfig { n: p.n, m: p.m, b, seed, alice, bob }
}

/// One trial; `None` means the trial does not count (conditioning).
fn trial(experiment: Experiment, p: &McParams, seed: u64, rng: &mut SimRng) -> Result<Option<bool>> {
    let b = p.b.unwrap_or_else(|| if rng.random::<bool>() { Bit::One } else { Bit::Zero });
    let honest = AliceStrategySpec::Honest;
    Ok(match experiment {
        Experiment::Calibration => Some(rng.random::<bool>()),
        Experiment::HonestCompleteness => {
            let cfg = config(p, b, seed, honest, BobStrategySpec::Honest);
            let t = run_protocol_with(&cfg, &mut HonestAlice, &mut HonestBob::new(), rng)?;
            Some(t.verdict == Verdict::Accepted { bit: b })
        }
        Experiment::GuessTestSet => {
            let cfg = config(p, b, seed, honest, BobStrategySpec::GuessTestSet);
            let mut bob = GuessTestSetBob::new(p.m);
            let t = run_protocol_with(&cfg, &mut HonestAlice, &mut bob, rng)?;
            Some(bob.guess() == t.test_set.as_slice())
        }
        Experiment::MeasureZ => {
            let cfg = config(p, b, seed, honest, BobStrategySpec::MeasureZ);
            let t = run_protocol_with(&cfg, &mut HonestAlice, &mut MeasureZBob::new(), rng)?;
            Some(t.test_verdict() == Some(true))
        }
        Experiment::ZBobGuess => {
            let cfg = config(p, b, seed, honest, BobStrategySpec::MeasureZ);
            let t = run_protocol_with(&cfg, &mut HonestAlice, &mut MeasureZBob::new(), rng)?;
            (t.test_verdict() == Some(true)).then(|| t.bob_guess == Some(b))
        }
        Experiment::QuantumPass => {
            let spec = BobStrategySpec::QuantumAncilla { k: p.amplitudes.len(), amplitudes: p.amplitudes.clone() };
            let cfg = config(p, b, seed, honest, spec);
            let mut bob = QuantumAncillaBob::new(p.amplitudes.clone())?;
            let t = run_protocol_with(&cfg, &mut HonestAlice, &mut bob, rng)?;
            Some(t.test_verdict() == Some(true))
        }
        Experiment::BindingRelabel => {
            let target = b.flip();
            let cfg = config(p, b, seed, AliceStrategySpec::ClassicalRelabel { target }, BobStrategySpec::Honest);
            let t = run_protocol_with(&cfg, &mut ClassicalRelabelAlice::new(target), &mut HonestBob::new(), rng)?;
            Some(t.verdict == Verdict::Accepted { bit: target })
        }
        Experiment::EprOracle | Experiment::EprBlind => {
            let knowledge = if experiment == Experiment::EprOracle { Knowledge::Oracle } else { Knowledge::Blind };
            let target = b.flip();
            let spec = AliceStrategySpec::Purification { target, knowledge };
            let cfg = config(p, b, seed, spec.clone(), BobStrategySpec::Honest);
            let mut alice = build_alice(&spec);
            let t = run_protocol_with(&cfg, alice.as_mut(), &mut HonestBob::new(), rng)?;
            Some(t.verdict == Verdict::Accepted { bit: target })
        }
    })
}

/// Runs `trials` independent sessions on `jobs` threads. Trial `i` draws
/// from stream `(seed, i)`, so the result does not depend on `jobs`.
pub fn monte_carlo(experiment: Experiment, params: &McParams, trials: u64, seed: u64, jobs: usize) -> Result<Estimate> {
    if trials < MIN_TRIALS {
        return Err(Error::Config(format!("at least {MIN_TRIALS} trials required")));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let outcomes: Vec<Option<bool>> = pool.install(|| {
        (0..trials)
            .into_par_iter()
            .map(|i| trial(experiment, params, seed, &mut trial_rng(seed, i)))
            .collect::<Result<_>>()
    })?;
    let counted = outcomes.iter().flatten().count() as u64;
    let successes = outcomes.iter().flatten().filter(|&&s| s).count() as u64;
    if counted == 0 {
        return Err(Error::Config("no trial met the experiment's condition".into()));
    }
    Ok(Estimate::from_counts(successes, counted, exact_reference(experiment, params)))
}

/// Acceptance of a bit-flip attempt for each `n`.
pub fn binding_curve(
    experiment: Experiment,
    template: &McParams,
    ns: &[usize],
    trials: u64,
    seed: u64,
    jobs: usize,
) -> Result<Vec<(usize, Estimate)>> {
    if !matches!(experiment, Experiment::BindingRelabel | Experiment::EprOracle | Experiment::EprBlind) {
        return Err(Error::Config(format!("{} is not a binding experiment", experiment.name())));
    }
    ns.iter()
        .map(|&n| {
            let p = McParams { n, ..template.clone() };
            monte_carlo(experiment, &p, trials, seed, jobs).map(|e| (n, e))
        })
        .collect()
}

/// Whether the estimates never increase along the curve, up to overlapping intervals.
pub fn is_non_increasing(curve: &[(usize, Estimate)]) -> bool {
    curve.windows(2).all(|w| w[1].1.point <= w[0].1.point || !w[1].1.separated_from(&w[0].1))
}

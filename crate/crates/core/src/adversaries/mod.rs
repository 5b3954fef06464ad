//! Cheating strategies for both parties.

pub mod alice;
pub mod bob;

use rand::Rng;

use crate::error::Result;
use crate::protocol::{
    AliceStrategy, AliceStrategySpec, BobAction, BobStrategy, BobStrategySpec, HonestAlice, HonestBob, ProtocolConfig,
};
use crate::states::{Axis, MeasurementBasis, Spin};

pub use alice::{
    best_relabel, cheating_unitary, purified_after, purified_block, purified_pair, ua_for_bob_params,
    ClassicalRelabelAlice, PurificationAlice, RelabelPlan,
};
pub use bob::{branch_axes, chi_ancilla_state, post_xi_state, GuessTestSetBob, MeasureZBob, QuantumAncillaBob};

pub fn build_alice(spec: &AliceStrategySpec) -> Box<dyn AliceStrategy> {
    match spec {
        AliceStrategySpec::Honest => Box::new(HonestAlice),
        AliceStrategySpec::ClassicalRelabel { target } => Box::new(ClassicalRelabelAlice::new(*target)),
        AliceStrategySpec::Purification { target, knowledge } => Box::new(PurificationAlice::new(*target, *knowledge)),
    }
}

pub fn build_bob(spec: &BobStrategySpec, m: usize) -> Result<Box<dyn BobStrategy>> {
    Ok(match spec {
        BobStrategySpec::Honest => Box::new(HonestBob::new()),
        BobStrategySpec::GuessTestSet => Box::new(GuessTestSetBob::new(m)),
        BobStrategySpec::MeasureZ => Box::new(MeasureZBob::new()),
        BobStrategySpec::QuantumAncilla { amplitudes, .. } => Box::new(QuantumAncillaBob::new(amplitudes.clone())?),
    })
}

pub fn build_strategies(cfg: &ProtocolConfig) -> Result<(Box<dyn AliceStrategy>, Box<dyn BobStrategy>)> {
    cfg.validate()?;
    Ok((build_alice(&cfg.alice), build_bob(&cfg.bob, cfg.m)?))
}

/// Draws the receiver's private randomness for one particle: the axis (or
/// axis branches) and a uniformly random reported outcome.
pub fn sample_bob_action<R: Rng + ?Sized>(spec: &BobStrategySpec, rng: &mut R) -> BobAction {
    let outcome = if rng.random::<bool>() { Spin::Up } else { Spin::Down };
    match spec {
        BobStrategySpec::Honest | BobStrategySpec::GuessTestSet => {
            BobAction::Measured { basis: MeasurementBasis::Xy { axis: Axis::random(rng) }, outcome }
        }
        BobStrategySpec::MeasureZ => BobAction::Measured { basis: MeasurementBasis::Z, outcome },
        BobStrategySpec::QuantumAncilla { amplitudes, .. } => BobAction::Ancilla {
            branches: branch_axes(amplitudes.len(), rng).into_iter().zip(amplitudes.iter().copied()).collect(),
            outcome,
        },
    }
}

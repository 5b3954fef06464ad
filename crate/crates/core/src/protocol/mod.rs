//! Two-party commitment protocol: committer (Alice) prepares Bell pairs, the
//! receiver (Bob) measures the second particles in the xy-plane, a random
//! subset is tested, the rest is shuffled and handed over, and the opening
//! is checked pair by pair.

pub mod engine;
pub mod lab;
pub mod message;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::states::{Axis, BellLabel, Bit, MeasEntry, MeasRecord, ParticleId, Permutation, Spin};

pub use engine::{
    alice_commit, alice_select_tests, alice_shuffle_and_send, alice_unveil, alice_verify_tests, bob_measure_phase,
    bob_verify_unveil, run_protocol, run_protocol_with, run_protocol_with_rng, AliceState, HonestAlice, HonestBob,
    UnveilCheck,
};
pub use lab::{BobAction, Lab, PairBlock, Register};
pub use message::{
    validate_schedule, CheckRecord, Message, MessageKind, Phase, ProtocolTranscript, Schedule, UnveilPayload, Verdict,
};

/// How the committer learns the receiver's parameters in the purification attack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Knowledge {
    /// Counterfactual: the true axes, outcomes and branch amplitudes are handed over.
    Oracle,
    /// Axes guessed uniformly at random; reported outcomes used as-is.
    Blind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BobStrategySpec {
    Honest,
    GuessTestSet,
    MeasureZ,
    QuantumAncilla { k: usize, amplitudes: Vec<f64> },
}

impl BobStrategySpec {
    /// Ancilla strategy with `k` equal-weight branches.
    pub fn quantum_uniform(k: usize) -> Self {
        BobStrategySpec::QuantumAncilla { k, amplitudes: vec![(1.0 / k as f64).sqrt(); k] }
    }

    pub fn validate(&self) -> Result<()> {
        if let BobStrategySpec::QuantumAncilla { k, amplitudes } = self {
            if *k < 2 {
                return Err(Error::Config("ancilla strategy needs K >= 2".into()));
            }
            if amplitudes.len() != *k {
                return Err(Error::Config(format!("expected {k} branch amplitudes, got {}", amplitudes.len())));
            }
            if amplitudes.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::Config("branch amplitudes must be finite and non-negative".into()));
            }
            let norm: f64 = amplitudes.iter().map(|p| p * p).sum();
            if (norm - 1.0).abs() > crate::linalg::TOL {
                return Err(Error::Config(format!("branch amplitudes have squared sum {norm}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AliceStrategySpec {
    Honest,
    /// Honest commitment, then opens `target` with the best classical declaration.
    ClassicalRelabel { target: Bit },
    /// Per-pair sign purification, rotated toward `target` before opening.
    Purification { target: Bit, knowledge: Knowledge },
}

impl AliceStrategySpec {
    /// The bit the committer tries to open.
    pub fn target(&self, committed: Bit) -> Bit {
        match self {
            AliceStrategySpec::Honest => committed,
            AliceStrategySpec::ClassicalRelabel { target } | AliceStrategySpec::Purification { target, .. } => *target,
        }
    }

    pub fn is_counterfactual(&self) -> bool {
        matches!(self, AliceStrategySpec::Purification { knowledge: Knowledge::Oracle, .. })
    }
}

/// Largest `n` for which the classical relabel search is run.
pub const RELABEL_MAX_N: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    /// Pairs kept for the commitment.
    pub n: usize,
    /// Pairs sacrificed for testing.
    pub m: usize,
    pub b: Bit,
    pub seed: u64,
    pub alice: AliceStrategySpec,
    pub bob: BobStrategySpec,
}

impl ProtocolConfig {
    pub fn honest(n: usize, m: usize, b: Bit, seed: u64) -> Self {
        Self { n, m, b, seed, alice: AliceStrategySpec::Honest, bob: BobStrategySpec::Honest }
    }

    /// `N = n + m`.
    pub fn total(&self) -> usize {
        self.n + self.m
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        self.bob.validate()?;
        if matches!(self.alice, AliceStrategySpec::ClassicalRelabel { .. }) && self.n > RELABEL_MAX_N {
            return Err(Error::Config(format!("classical relabel search supports n <= {RELABEL_MAX_N}")));
        }
        Ok(())
    }
}

/// Receiver behaviour plugged into the engine.
///
/// Particle handles identify pairs for the simulator's bookkeeping only; a
/// strategy must not use them to learn where shuffled particles came from.
pub trait BobStrategy {
    /// Step (1b): acts on the received second particles and returns the
    /// reported outcome for each.
    fn measure_phase(&mut self, lab: &mut Lab, particles: &[ParticleId], rng: &mut SimRng) -> Result<Vec<Spin>>;

    /// Step (1c): axes disclosed for the requested test pairs.
    fn disclose(&mut self, lab: &mut Lab, tested: &[usize], rng: &mut SimRng) -> Result<Vec<Axis>>;

    /// After step (1d): optionally inspects the received sequence and guesses the bit.
    fn after_commit(&mut self, _lab: &mut Lab, _shuffled: &[ParticleId], _rng: &mut SimRng) -> Result<Option<Bit>> {
        Ok(None)
    }

    /// Step (2b): the receiver's own measurement record for each remaining pair.
    fn verification_record(&mut self, lab: &mut Lab, remaining: &[usize], rng: &mut SimRng) -> Result<Vec<MeasEntry>>;

    fn record(&self) -> MeasRecord;

    /// What was physically done to each pair, for counterfactual analyses.
    fn actions(&self) -> Vec<BobAction>;
}

/// Information available to the committer when opening.
pub struct UnveilContext<'a> {
    pub committed: Bit,
    pub remaining: &'a [usize],
    pub labels: &'a [Option<BellLabel>],
    pub shuffle: &'a Permutation,
    /// Reported outcomes indexed by original pair.
    pub outcomes: &'a [Spin],
    /// The receiver's true actions per original pair, only in oracle mode.
    pub oracle: Option<&'a [BobAction]>,
}

/// Committer behaviour plugged into the engine.
pub trait AliceStrategy {
    /// Step (1a): prepares the pair blocks; returns labels known at this point.
    fn prepare(&mut self, b: Bit, count: usize, rng: &mut SimRng) -> Result<(Lab, Vec<Option<BellLabel>>)>;

    /// Fixes the label of a pair about to be tested.
    fn resolve_label(
        &mut self,
        lab: &mut Lab,
        pair: usize,
        labels: &mut [Option<BellLabel>],
        rng: &mut SimRng,
    ) -> Result<BellLabel>;

    fn wants_oracle(&self) -> bool {
        false
    }

    /// Step (2a).
    fn unveil(&mut self, ctx: UnveilContext<'_>, lab: &mut Lab, rng: &mut SimRng) -> Result<UnveilPayload>;
}

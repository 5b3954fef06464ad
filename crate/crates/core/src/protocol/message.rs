use serde::{Deserialize, Serialize};

use crate::linalg::StateVector;
use crate::states::{Axis, BellLabel, Bit, MeasRecord, ParticleId, Spin};

use super::lab::{Lab, Register};
use super::ProtocolConfig;

/// Amplitudes of one pair block, serialised as `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairShare {
    pub pair: usize,
    pub registers: Vec<Register>,
    pub amplitudes: Vec<[f64; 2]>,
}

impl PairShare {
    pub fn snapshot(lab: &Lab) -> Vec<PairShare> {
        lab.blocks()
            .iter()
            .enumerate()
            .map(|(pair, b)| PairShare {
                pair,
                registers: b.registers().to_vec(),
                amplitudes: amplitude_pairs(b.state()),
            })
            .collect()
    }
}

pub fn amplitude_pairs(s: &StateVector) -> Vec<[f64; 2]> {
    s.amplitudes().iter().map(|z| [z.re, z.im]).collect()
}

/// Classical content of the opening message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnveilPayload {
    pub bit: Bit,
    /// Slot `s` of the shuffled sequence came from position `recover[s]` of
    /// `Σ_n1 + Σ̃_n2`.
    pub recover: Vec<usize>,
    /// Claimed Bell state of each remaining pair, in original order.
    pub labels: Vec<BellLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Message {
    ParticlesB2 { particles: Vec<ParticleId>, shares: Vec<PairShare> },
    OutcomeReport { outcomes: Vec<Spin> },
    ReturnParticles { particles: Vec<ParticleId> },
    TestRequest { indices: Vec<usize> },
    AxisDisclosure { axes: Vec<Axis> },
    TestVerdict { pass: bool },
    ShuffledSequence { particles: Vec<ParticleId> },
    Unveil(UnveilPayload),
    FinalVerdict { accepted: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MessageKind {
    ParticlesB2,
    OutcomeReport,
    ReturnParticles,
    TestRequest,
    AxisDisclosure,
    TestVerdict,
    ShuffledSequence,
    Unveil,
    FinalVerdict,
}

impl Message {
    pub fn kind(&self) -> MessageKind {
        match self {
            Message::ParticlesB2 { .. } => MessageKind::ParticlesB2,
            Message::OutcomeReport { .. } => MessageKind::OutcomeReport,
            Message::ReturnParticles { .. } => MessageKind::ReturnParticles,
            Message::TestRequest { .. } => MessageKind::TestRequest,
            Message::AxisDisclosure { .. } => MessageKind::AxisDisclosure,
            Message::TestVerdict { .. } => MessageKind::TestVerdict,
            Message::ShuffledSequence { .. } => MessageKind::ShuffledSequence,
            Message::Unveil(_) => MessageKind::Unveil,
            Message::FinalVerdict { .. } => MessageKind::FinalVerdict,
        }
    }
}

pub const SCHEDULE: [MessageKind; 9] = [
    MessageKind::ParticlesB2,
    MessageKind::OutcomeReport,
    MessageKind::ReturnParticles,
    MessageKind::TestRequest,
    MessageKind::AxisDisclosure,
    MessageKind::TestVerdict,
    MessageKind::ShuffledSequence,
    MessageKind::Unveil,
    MessageKind::FinalVerdict,
];

/// Protocol grammar: the fixed schedule, optionally cut short right after a
/// failed test verdict.
#[derive(Debug, Clone, Default)]
pub struct Schedule {
    position: usize,
    terminated: bool,
}

impl Schedule {
    pub fn new() -> Self {
        Self::default()
    }

    /// Accepts the next message or explains why it is out of order.
    pub fn advance(&mut self, msg: &Message) -> Result<(), String> {
        if self.terminated {
            return Err(format!("{:?} after the session ended", msg.kind()));
        }
        let expected = SCHEDULE.get(self.position).copied();
        if expected != Some(msg.kind()) {
            return Err(format!("expected {expected:?}, got {:?}", msg.kind()));
        }
        self.position += 1;
        if matches!(msg, Message::TestVerdict { pass: false }) || self.position == SCHEDULE.len() {
            self.terminated = true;
        }
        Ok(())
    }

    pub fn is_complete(&self) -> bool {
        self.terminated
    }
}

/// Checks a whole message-kind sequence against the grammar.
pub fn validate_schedule(messages: &[Message]) -> Result<(), String> {
    let mut s = Schedule::new();
    for m in messages {
        s.advance(m)?;
    }
    if !s.is_complete() {
        return Err("session ended early".into());
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Commit,
    Test,
    Unveil,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Verdict {
    Accepted { bit: Bit },
    /// A physics check failed.
    Rejected { phase: Phase, reason: String },
    /// The message schedule or an interface contract was violated.
    Aborted { reason: String },
}

impl Verdict {
    pub fn accepted_bit(&self) -> Option<Bit> {
        match self {
            Verdict::Accepted { bit } => Some(*bit),
            _ => None,
        }
    }
}

/// Born probability that one verification measurement passes, evaluated just
/// before it is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub phase: Phase,
    pub pair: usize,
    pub probability: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolTranscript {
    pub config: ProtocolConfig,
    pub messages: Vec<Message>,
    /// Committer's private labels per original pair; `None` while undetermined.
    pub alice_labels: Vec<Option<BellLabel>>,
    pub bob_record: MeasRecord,
    pub test_set: Vec<usize>,
    pub checks: Vec<CheckRecord>,
    /// The receiver's guess of the bit before opening, if his strategy makes one.
    pub bob_guess: Option<Bit>,
    /// Set when the committer was handed the receiver's private parameters.
    pub counterfactual: bool,
    pub verdict: Verdict,
}

impl ProtocolTranscript {
    pub fn test_verdict(&self) -> Option<bool> {
        self.messages.iter().find_map(|m| match m {
            Message::TestVerdict { pass } => Some(*pass),
            _ => None,
        })
    }

    pub fn kinds(&self) -> Vec<MessageKind> {
        self.messages.iter().map(Message::kind).collect()
    }
}

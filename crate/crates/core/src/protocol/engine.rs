//! Honest parties, the step functions, and the session driver.

use rand::seq::index::sample;

use crate::error::{Error, Result};
use crate::rng::{session_rng, SimRng};
use crate::states::{
    bell, build_commit_sequence, partner_state, Axis, BellLabel, Bit, MeasEntry, MeasRecord, MeasurementBasis,
    ParticleId, Permutation, Spin,
};

use super::lab::{BobAction, Lab};
use super::message::{CheckRecord, Message, PairShare, Phase, ProtocolTranscript, Schedule, UnveilPayload, Verdict};
use super::{AliceStrategy, BobStrategy, ProtocolConfig, UnveilContext};

/// Committer's private bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct AliceState {
    pub b: Bit,
    pub labels: Vec<Option<BellLabel>>,
    pub outcomes: Vec<Spin>,
    pub tested: Vec<usize>,
    pub remaining: Vec<usize>,
    pub shuffle: Option<Permutation>,
}

impl AliceState {
    /// `Σ_n1 + Σ̃_n2` after discarding the tested pairs.
    pub fn unshuffled(&self) -> Vec<ParticleId> {
        self.remaining
            .iter()
            .map(|&p| ParticleId::first(p))
            .chain(self.remaining.iter().map(|&p| ParticleId::second(p)))
            .collect()
    }
}

/// Step (1a).
pub fn alice_commit(
    b: Bit,
    count: usize,
    alice: &mut dyn AliceStrategy,
    rng: &mut SimRng,
) -> Result<(AliceState, Lab, Message)> {
    let (lab, labels) = alice.prepare(b, count, rng)?;
    let state = AliceState {
        b,
        labels,
        outcomes: Vec::new(),
        tested: Vec::new(),
        remaining: (0..count).collect(),
        shuffle: None,
    };
    let msg = Message::ParticlesB2 {
        particles: (0..count).map(ParticleId::second).collect(),
        shares: PairShare::snapshot(&lab),
    };
    Ok((state, lab, msg))
}

/// Step (1b) for a receiver following the protocol. `policy` picks the basis
/// for particle `i`; anything outside the xy-plane is refused.
pub fn bob_measure_phase(
    lab: &mut Lab,
    particles: &[ParticleId],
    mut policy: impl FnMut(usize, &mut SimRng) -> MeasurementBasis,
    rng: &mut SimRng,
) -> Result<(MeasRecord, Message, Message)> {
    let mut record = MeasRecord::with_len(particles.len());
    let mut outcomes = Vec::with_capacity(particles.len());
    for (i, &id) in particles.iter().enumerate() {
        let basis = policy(i, rng);
        if !matches!(basis, MeasurementBasis::Xy { .. }) {
            return Err(Error::NonXyAxis);
        }
        let (outcome, _) = lab.measure_particle(id, basis, rng)?;
        record.entries[i] = Some(MeasEntry { basis, outcome });
        outcomes.push(outcome);
    }
    Ok((
        record,
        Message::OutcomeReport { outcomes },
        Message::ReturnParticles { particles: particles.to_vec() },
    ))
}

/// Step (1c): a uniformly random `m`-subset of `0..total`, sorted.
pub fn alice_select_tests(total: usize, m: usize, rng: &mut SimRng) -> Result<Message> {
    if m > total {
        return Err(Error::Config(format!("cannot test {m} of {total} pairs")));
    }
    let mut indices = sample(rng, total, m).into_vec();
    indices.sort_unstable();
    Ok(Message::TestRequest { indices })
}

/// Step (1c): one correlation check per tested pair, on the first particle.
pub fn alice_verify_tests(
    lab: &mut Lab,
    state: &mut AliceState,
    alice: &mut dyn AliceStrategy,
    tested: &[usize],
    axes: &[Axis],
    rng: &mut SimRng,
) -> Result<(Message, Vec<CheckRecord>)> {
    let mut checks = Vec::with_capacity(tested.len());
    if axes.len() != tested.len() {
        return Ok((Message::TestVerdict { pass: false }, checks));
    }
    let mut pass = true;
    for (&pair, &axis) in tested.iter().zip(axes) {
        let label = alice.resolve_label(lab, pair, &mut state.labels, rng)?;
        let target = partner_state(label, MeasurementBasis::Xy { axis }, state.outcomes[pair]);
        let (passed, probability) = lab.check_particle(ParticleId::first(pair), &target, rng)?;
        checks.push(CheckRecord { phase: Phase::Test, pair, probability, passed });
        pass &= passed;
    }
    Ok((Message::TestVerdict { pass }, checks))
}

/// Step (1d): drops tested pairs and sends the rest in uniformly random order.
pub fn alice_shuffle_and_send(state: &mut AliceState, rng: &mut SimRng) -> Result<Message> {
    let tested = state.tested.clone();
    state.remaining.retain(|p| !tested.contains(p));
    let ordered = state.unshuffled();
    let pi = Permutation::random(ordered.len(), rng);
    let particles = pi.apply(&ordered)?;
    state.shuffle = Some(pi);
    Ok(Message::ShuffledSequence { particles })
}

/// Step (2a) for an honest committer.
pub fn alice_unveil(state: &AliceState) -> Result<UnveilPayload> {
    let pi = state.shuffle.as_ref().ok_or_else(|| Error::Config("unveil before shuffle".into()))?;
    let labels = state
        .remaining
        .iter()
        .map(|&p| state.labels[p].ok_or_else(|| Error::Config(format!("label of pair {p} undetermined"))))
        .collect::<Result<_>>()?;
    Ok(UnveilPayload { bit: state.b, recover: pi.as_slice().to_vec(), labels })
}

/// Outcome of the receiver's opening check.
#[derive(Debug, Clone, PartialEq)]
pub struct UnveilCheck {
    pub accepted: bool,
    pub checks: Vec<CheckRecord>,
    pub reason: Option<String>,
}

impl UnveilCheck {
    fn reject(reason: impl Into<String>) -> Self {
        Self { accepted: false, checks: Vec::new(), reason: Some(reason.into()) }
    }
}

/// Step (2b). `knowledge[j]` is the receiver's record for `remaining[j]`.
pub fn bob_verify_unveil(
    lab: &mut Lab,
    remaining: &[usize],
    knowledge: &[MeasEntry],
    payload: &UnveilPayload,
    shuffled: &[ParticleId],
    rng: &mut SimRng,
) -> Result<UnveilCheck> {
    let n = remaining.len();
    if knowledge.len() != n {
        return Err(Error::DimensionMismatch("one record per remaining pair required".into()));
    }
    if payload.labels.len() != n {
        return Ok(UnveilCheck::reject(format!("expected {n} labels, got {}", payload.labels.len())));
    }
    if payload.labels.iter().any(|l| l.bit != payload.bit) {
        return Ok(UnveilCheck::reject("labels disagree with the unveiled bit"));
    }
    if payload.recover.len() != shuffled.len() {
        return Ok(UnveilCheck::reject("permutation has the wrong length"));
    }
    let pi = match Permutation::new(payload.recover.clone()) {
        Ok(p) => p,
        Err(e) => return Ok(UnveilCheck::reject(e.to_string())),
    };
    let recovered = pi.inverse().apply(shuffled)?;
    let mut out = UnveilCheck { accepted: true, checks: Vec::with_capacity(n), reason: None };
    for (j, (entry, label)) in knowledge.iter().zip(&payload.labels).enumerate() {
        let target = partner_state(*label, entry.basis, entry.outcome);
        let (passed, probability) = lab.check_particle(recovered[j], &target, rng)?;
        out.checks.push(CheckRecord { phase: Phase::Unveil, pair: remaining[j], probability, passed });
        if !passed && out.accepted {
            out.accepted = false;
            out.reason = Some(format!("wrong spin correlation in pair {}", remaining[j]));
        }
    }
    Ok(out)
}

/// Committer following the protocol.
#[derive(Debug, Clone, Default)]
pub struct HonestAlice;

impl AliceStrategy for HonestAlice {
    fn prepare(&mut self, b: Bit, count: usize, rng: &mut SimRng) -> Result<(Lab, Vec<Option<BellLabel>>)> {
        let seq = build_commit_sequence(b, count, rng)?;
        let labels = seq.pairs.iter().map(|p| Some(p.label)).collect();
        let lab = Lab::from_pairs(seq.pairs.iter().map(|p| bell(p.label)).collect())?;
        Ok((lab, labels))
    }

    fn resolve_label(
        &mut self,
        _lab: &mut Lab,
        pair: usize,
        labels: &mut [Option<BellLabel>],
        _rng: &mut SimRng,
    ) -> Result<BellLabel> {
        labels[pair].ok_or_else(|| Error::Config(format!("label of pair {pair} undetermined")))
    }

    fn unveil(&mut self, ctx: UnveilContext<'_>, _lab: &mut Lab, _rng: &mut SimRng) -> Result<UnveilPayload> {
        let labels = ctx
            .remaining
            .iter()
            .map(|&p| ctx.labels[p].ok_or_else(|| Error::Config(format!("label of pair {p} undetermined"))))
            .collect::<Result<_>>()?;
        Ok(UnveilPayload { bit: ctx.committed, recover: ctx.shuffle.as_slice().to_vec(), labels })
    }
}

/// Receiver following the protocol: uniformly random xy axes unless fixed.
#[derive(Debug, Clone, Default)]
pub struct HonestBob {
    axes: Option<Vec<Axis>>,
    record: MeasRecord,
}

impl HonestBob {
    pub fn new() -> Self {
        Self::default()
    }

    /// Uses `axes[i]` for particle `i`.
    pub fn with_axes(axes: Vec<Axis>) -> Self {
        Self { axes: Some(axes), record: MeasRecord::default() }
    }
}

pub(crate) fn entries_for(record: &MeasRecord, pairs: &[usize]) -> Result<Vec<MeasEntry>> {
    pairs
        .iter()
        .map(|&p| record.entries.get(p).copied().flatten().ok_or(Error::Unmeasured(p)))
        .collect()
}

pub(crate) fn disclosed_axes(record: &MeasRecord, tested: &[usize]) -> Result<Vec<Axis>> {
    entries_for(record, tested)?
        .into_iter()
        .map(|e| match e.basis {
            MeasurementBasis::Xy { axis } => Ok(axis),
            MeasurementBasis::Z => Err(Error::NonXyAxis),
        })
        .collect()
}

impl BobStrategy for HonestBob {
    fn measure_phase(&mut self, lab: &mut Lab, particles: &[ParticleId], rng: &mut SimRng) -> Result<Vec<Spin>> {
        let axes = self.axes.clone();
        if axes.as_ref().is_some_and(|a| a.len() != particles.len()) {
            return Err(Error::DimensionMismatch("one axis per particle required".into()));
        }
        let policy = |i: usize, rng: &mut SimRng| MeasurementBasis::Xy {
            axis: axes.as_ref().map_or_else(|| Axis::random(rng), |a| a[i]),
        };
        let (record, report, _) = bob_measure_phase(lab, particles, policy, rng)?;
        self.record = record;
        match report {
            Message::OutcomeReport { outcomes } => Ok(outcomes),
            _ => unreachable!(),
        }
    }

    fn disclose(&mut self, _lab: &mut Lab, tested: &[usize], _rng: &mut SimRng) -> Result<Vec<Axis>> {
        disclosed_axes(&self.record, tested)
    }

    fn verification_record(&mut self, _lab: &mut Lab, remaining: &[usize], _rng: &mut SimRng) -> Result<Vec<MeasEntry>> {
        entries_for(&self.record, remaining)
    }

    fn record(&self) -> MeasRecord {
        self.record.clone()
    }

    fn actions(&self) -> Vec<BobAction> {
        self.record
            .entries
            .iter()
            .flatten()
            .map(|e| BobAction::Measured { basis: e.basis, outcome: e.outcome })
            .collect()
    }
}

struct Session {
    schedule: Schedule,
    messages: Vec<Message>,
    checks: Vec<CheckRecord>,
}

impl Session {
    fn push(&mut self, msg: Message) -> std::result::Result<(), String> {
        self.schedule.advance(&msg)?;
        self.messages.push(msg);
        Ok(())
    }
}

/// Runs one session with the strategies named in `cfg`, seeded by `cfg.seed`.
pub fn run_protocol(cfg: &ProtocolConfig) -> Result<ProtocolTranscript> {
    let mut rng = session_rng(cfg.seed);
    run_protocol_with_rng(cfg, &mut rng)
}

pub fn run_protocol_with_rng(cfg: &ProtocolConfig, rng: &mut SimRng) -> Result<ProtocolTranscript> {
    let (mut alice, mut bob) = crate::adversaries::build_strategies(cfg)?;
    run_protocol_with(cfg, alice.as_mut(), bob.as_mut(), rng)
}

/// Runs one session with explicit strategy objects.
pub fn run_protocol_with(
    cfg: &ProtocolConfig,
    alice: &mut dyn AliceStrategy,
    bob: &mut dyn BobStrategy,
    rng: &mut SimRng,
) -> Result<ProtocolTranscript> {
    cfg.validate()?;
    let total = cfg.total();
    let mut s = Session { schedule: Schedule::new(), messages: Vec::new(), checks: Vec::new() };
    let mut bob_guess = None;
    let counterfactual = alice.wants_oracle();

    let (mut st, mut lab, msg) = alice_commit(cfg.b, total, alice, rng)?;
    let verdict = 'run: {
        macro_rules! send {
            ($msg:expr) => {
                if let Err(reason) = s.push($msg) {
                    break 'run Verdict::Aborted { reason };
                }
            };
        }
        send!(msg);

        let particles: Vec<ParticleId> = (0..total).map(ParticleId::second).collect();
        let outcomes = match bob.measure_phase(&mut lab, &particles, rng) {
            Ok(o) if o.len() == total => o,
            Ok(o) => break 'run Verdict::Aborted { reason: format!("{} outcomes for {total} particles", o.len()) },
            Err(Error::NonXyAxis) => break 'run Verdict::Aborted { reason: Error::NonXyAxis.to_string() },
            Err(e) => return Err(e),
        };
        st.outcomes = outcomes.clone();
        send!(Message::OutcomeReport { outcomes });
        send!(Message::ReturnParticles { particles });

        let request = alice_select_tests(total, cfg.m, rng)?;
        let Message::TestRequest { indices } = &request else { unreachable!() };
        st.tested = indices.clone();
        send!(request);
        let axes = match bob.disclose(&mut lab, &st.tested, rng) {
            Ok(a) => a,
            Err(Error::NonXyAxis) => Vec::new(),
            Err(e) => return Err(e),
        };
        send!(Message::AxisDisclosure { axes: axes.clone() });
        let tested = st.tested.clone();
        let (verdict_msg, checks) = alice_verify_tests(&mut lab, &mut st, alice, &tested, &axes, rng)?;
        s.checks.extend(checks);
        let passed = matches!(verdict_msg, Message::TestVerdict { pass: true });
        send!(verdict_msg);
        if !passed {
            let reason = if axes.len() == tested.len() { "test pair failed" } else { "missing axis disclosure" };
            break 'run Verdict::Rejected { phase: Phase::Test, reason: reason.into() };
        }

        let shuffled_msg = alice_shuffle_and_send(&mut st, rng)?;
        let Message::ShuffledSequence { particles: shuffled } = &shuffled_msg else { unreachable!() };
        let shuffled = shuffled.clone();
        send!(shuffled_msg);
        bob_guess = bob.after_commit(&mut lab, &shuffled, rng)?;

        let actions = bob.actions();
        let ctx = UnveilContext {
            committed: st.b,
            remaining: &st.remaining,
            labels: &st.labels,
            shuffle: st.shuffle.as_ref().expect("shuffled"),
            outcomes: &st.outcomes,
            oracle: counterfactual.then_some(actions.as_slice()),
        };
        let payload = alice.unveil(ctx, &mut lab, rng)?;
        for (&p, l) in st.remaining.iter().zip(&payload.labels) {
            st.labels[p].get_or_insert(*l);
        }
        send!(Message::Unveil(payload.clone()));

        let knowledge = bob.verification_record(&mut lab, &st.remaining, rng)?;
        let check = bob_verify_unveil(&mut lab, &st.remaining, &knowledge, &payload, &shuffled, rng)?;
        s.checks.extend(check.checks);
        send!(Message::FinalVerdict { accepted: check.accepted });
        if check.accepted {
            Verdict::Accepted { bit: payload.bit }
        } else {
            Verdict::Rejected { phase: Phase::Unveil, reason: check.reason.unwrap_or_default() }
        }
    };

    Ok(ProtocolTranscript {
        config: cfg.clone(),
        messages: s.messages,
        alice_labels: st.labels,
        bob_record: bob.record(),
        test_set: st.tested,
        checks: s.checks,
        bob_guess,
        counterfactual,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{partial_trace, DensityMatrix};
    use crate::states::Sign;

    fn honest(n: usize, m: usize, b: Bit, seed: u64) -> ProtocolTranscript {
        let cfg = ProtocolConfig::honest(n, m, b, seed);
        let mut rng = session_rng(seed);
        run_protocol_with(&cfg, &mut HonestAlice, &mut HonestBob::new(), &mut rng).unwrap()
    }

    #[test]
    fn honest_runs_accept() {
        assert_eq!(honest(3, 2, Bit::Zero, 1).verdict, Verdict::Accepted { bit: Bit::Zero });
        assert_eq!(honest(3, 2, Bit::One, 2).verdict, Verdict::Accepted { bit: Bit::One });
    }

    #[test]
    fn every_check_is_certain_for_honest_parties() {
        for seed in 0..20 {
            let t = honest(2, 2, Bit::One, seed);
            assert_eq!(t.checks.len(), 4);
            assert!(t.checks.iter().all(|c| (c.probability - 1.0).abs() < 1e-9));
        }
    }

    #[test]
    fn same_seed_same_transcript() {
        let a = serde_json::to_string(&honest(3, 2, Bit::Zero, 9)).unwrap();
        let b = serde_json::to_string(&honest(3, 2, Bit::Zero, 9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_pair_commit_carries_the_recorded_sign() {
        let mut rng = session_rng(4);
        let (st, lab, _) = alice_commit(Bit::Zero, 1, &mut HonestAlice, &mut rng).unwrap();
        let label = st.labels[0].unwrap();
        assert_eq!(label.bit, Bit::Zero);
        let (d, _) = lab.block(0).state().phase_distance(&bell(label));
        assert!(d < 1e-12);
    }

    #[test]
    fn second_particles_alone_are_maximally_mixed() {
        for b in [Bit::Zero, Bit::One] {
            for sign in [Sign::Plus, Sign::Minus] {
                let rho = DensityMatrix::from_pure(&bell(BellLabel::new(b, sign)));
                let r = partial_trace(&rho, &[1]).unwrap();
                let mixed = DensityMatrix::maximally_mixed(vec![2]);
                assert!(crate::linalg::max_abs_diff(r.entries(), mixed.entries()) < 1e-12);
            }
        }
    }

    #[test]
    fn z_axis_is_refused() {
        let mut rng = session_rng(0);
        let mut lab = Lab::from_pairs(vec![bell(BellLabel::new(Bit::Zero, Sign::Minus))]).unwrap();
        let r = bob_measure_phase(&mut lab, &[ParticleId::second(0)], |_, _| MeasurementBasis::Z, &mut rng);
        assert_eq!(r.unwrap_err(), Error::NonXyAxis);
    }

    #[test]
    fn test_subsets_are_uniform() {
        let mut rng = session_rng(11);
        let mut counts = std::collections::HashMap::new();
        let trials = 10_000;
        for _ in 0..trials {
            let Message::TestRequest { indices } = alice_select_tests(4, 2, &mut rng).unwrap() else { panic!() };
            *counts.entry(indices).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 6);
        let p = 1.0 / 6.0;
        let sd = (p * (1.0 - p) / trials as f64).sqrt();
        for c in counts.values() {
            assert!((*c as f64 / trials as f64 - p).abs() < 3.0 * sd + 1e-3);
        }
        let Message::TestRequest { indices } = alice_select_tests(3, 3, &mut rng).unwrap() else { panic!() };
        assert_eq!(indices, vec![0, 1, 2]);
        let Message::TestRequest { indices } = alice_select_tests(3, 0, &mut rng).unwrap() else { panic!() };
        assert!(indices.is_empty());
    }

    #[test]
    fn shuffle_discards_tests_and_keeps_the_multiset() {
        let mut rng = session_rng(3);
        let (mut st, _, _) = alice_commit(Bit::One, 5, &mut HonestAlice, &mut rng).unwrap();
        st.tested = vec![1, 3];
        let Message::ShuffledSequence { particles } = alice_shuffle_and_send(&mut st, &mut rng).unwrap() else {
            panic!()
        };
        assert_eq!(st.remaining, vec![0, 2, 4]);
        let mut sorted = particles.clone();
        sorted.sort();
        let mut expected = st.unshuffled();
        expected.sort();
        assert_eq!(sorted, expected);
        let payload = alice_unveil(&st).unwrap();
        let recovered = Permutation::new(payload.recover).unwrap().inverse().apply(&particles).unwrap();
        assert_eq!(recovered, st.unshuffled());
        assert!(payload.labels.iter().all(|l| l.bit == Bit::One));
    }

    #[test]
    fn malformed_permutation_is_rejected() {
        let mut rng = session_rng(5);
        let mut lab = Lab::from_pairs(vec![bell(BellLabel::new(Bit::Zero, Sign::Plus))]).unwrap();
        let entry = MeasEntry { basis: MeasurementBasis::xy(0.0), outcome: Spin::Up };
        let shuffled = [ParticleId::first(0), ParticleId::second(0)];
        for recover in [vec![0, 0], vec![0], vec![0, 1, 2]] {
            let payload = UnveilPayload { bit: Bit::Zero, recover, labels: vec![BellLabel::new(Bit::Zero, Sign::Plus)] };
            let r = bob_verify_unveil(&mut lab, &[0], &[entry], &payload, &shuffled, &mut rng).unwrap();
            assert!(!r.accepted);
        }
    }

    #[test]
    fn relabelled_pair_passes_with_squared_cosine() {
        for theta in [0.0, 0.4, 1.3, 2.9] {
            let label = BellLabel::new(Bit::Zero, Sign::Plus);
            let mut rng = session_rng(0);
            let mut lab = Lab::from_pairs(vec![bell(label)]).unwrap();
            let basis = MeasurementBasis::xy(theta);
            let (outcome, _) = lab.measure_particle(ParticleId::second(0), basis, &mut rng).unwrap();
            let target = partner_state(BellLabel::new(Bit::One, Sign::Plus), basis, outcome);
            let p = lab.block(0).probabilities(&[super::super::Register::First], &crate::protocol::lab::binary_projectors(&target)).unwrap()[0];
            assert!((p - theta.cos().powi(2)).abs() < 1e-9);
        }
    }
}

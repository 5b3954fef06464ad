use qbc_core::protocol::{
    run_protocol, validate_schedule, AliceStrategySpec, BobStrategySpec, Knowledge, Message, MessageKind, ProtocolConfig,
    Verdict,
};
use qbc_core::states::{Bit, Spin};

fn cfg(n: usize, m: usize, b: Bit, seed: u64, alice: AliceStrategySpec, bob: BobStrategySpec) -> ProtocolConfig {
    ProtocolConfig { n, m, b, seed, alice, bob }
}

#[test]
fn honest_sessions_pass_every_check_with_certainty() {
    for n in 1..=4 {
        for m in 0..=4 {
            for b in [Bit::Zero, Bit::One] {
                for seed in 0..3 {
                    let t = run_protocol(&ProtocolConfig::honest(n, m, b, seed)).unwrap();
                    assert_eq!(t.verdict, Verdict::Accepted { bit: b });
                    assert_eq!(t.checks.len(), n + m);
                    for c in &t.checks {
                        assert!((c.probability - 1.0).abs() < 1e-9, "n={n} m={m} p={}", c.probability);
                    }
                }
            }
        }
    }
}

#[test]
fn transcripts_replay_exactly() {
    let specs = [
        (AliceStrategySpec::Honest, BobStrategySpec::Honest),
        (AliceStrategySpec::ClassicalRelabel { target: Bit::One }, BobStrategySpec::Honest),
        (AliceStrategySpec::Purification { target: Bit::One, knowledge: Knowledge::Blind }, BobStrategySpec::quantum_uniform(2)),
        (AliceStrategySpec::Honest, BobStrategySpec::MeasureZ),
    ];
    for (alice, bob) in specs {
        let c = cfg(2, 2, Bit::Zero, 77, alice, bob);
        let a = serde_json::to_string(&run_protocol(&c).unwrap()).unwrap();
        let b = serde_json::to_string(&run_protocol(&c).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}

fn all_strategy_pairs() -> Vec<(AliceStrategySpec, BobStrategySpec)> {
    let alices = [
        AliceStrategySpec::Honest,
        AliceStrategySpec::ClassicalRelabel { target: Bit::One },
        AliceStrategySpec::Purification { target: Bit::One, knowledge: Knowledge::Oracle },
        AliceStrategySpec::Purification { target: Bit::One, knowledge: Knowledge::Blind },
    ];
    let bobs = [
        BobStrategySpec::Honest,
        BobStrategySpec::GuessTestSet,
        BobStrategySpec::MeasureZ,
        BobStrategySpec::quantum_uniform(2),
    ];
    alices.iter().flat_map(|a| bobs.iter().map(move |b| (a.clone(), b.clone()))).collect()
}

#[test]
fn every_strategy_pair_follows_the_message_grammar() {
    for (alice, bob) in all_strategy_pairs() {
        for seed in 0..8 {
            let c = cfg(2, 1, Bit::Zero, seed, alice.clone(), bob.clone());
            match run_protocol(&c) {
                Ok(t) => {
                    validate_schedule(&t.messages).unwrap_or_else(|e| panic!("{alice:?} vs {bob:?}: {e}"));
                    let full = t.messages.len() == 9;
                    assert_eq!(full, t.test_verdict() == Some(true));
                    assert_eq!(t.counterfactual, alice.is_counterfactual());
                }
                // With the receiver's real parameters in hand, the committed and
                // target states are only locally related for an xy-measuring receiver.
                Err(qbc_core::Error::NoLocalUnitary { .. }) => {
                    assert!(alice.is_counterfactual() && bob != BobStrategySpec::Honest);
                }
                Err(e) => panic!("{alice:?} vs {bob:?}: {e}"),
            }
        }
    }
}

#[test]
fn outcome_reports_are_unbiased_for_every_receiver() {
    let bobs = [
        BobStrategySpec::Honest,
        BobStrategySpec::GuessTestSet,
        BobStrategySpec::MeasureZ,
        BobStrategySpec::quantum_uniform(2),
    ];
    for bob in bobs {
        for b in [Bit::Zero, Bit::One] {
            let mut ups = 0usize;
            let mut total = 0usize;
            let mut seed = 0;
            while total < 10_000 {
                let t = run_protocol(&cfg(2, 2, b, seed, AliceStrategySpec::Honest, bob.clone())).unwrap();
                let Message::OutcomeReport { outcomes } = &t.messages[1] else { panic!() };
                ups += outcomes.iter().filter(|&&s| s == Spin::Up).count();
                total += outcomes.len();
                seed += 1;
            }
            let f = ups as f64 / total as f64;
            let sd = (0.25 / total as f64).sqrt();
            assert!((f - 0.5).abs() < 3.0 * sd, "{bob:?} b={b:?}: {f}");
        }
    }
}

#[test]
fn failed_test_stops_the_session() {
    let mut seen = false;
    for seed in 0..40 {
        let t = run_protocol(&cfg(1, 3, Bit::One, seed, AliceStrategySpec::Honest, BobStrategySpec::MeasureZ)).unwrap();
        if t.test_verdict() == Some(false) {
            seen = true;
            assert_eq!(t.kinds().last(), Some(&MessageKind::TestVerdict));
            assert!(matches!(t.verdict, Verdict::Rejected { .. }));
        }
    }
    assert!(seen);
}

#[test]
fn unveiled_labels_match_the_commitment() {
    let t = run_protocol(&ProtocolConfig::honest(3, 2, Bit::One, 8)).unwrap();
    let Some(Message::Unveil(payload)) = t.messages.iter().find(|m| m.kind() == MessageKind::Unveil) else { panic!() };
    assert!(payload.labels.iter().all(|l| l.bit == Bit::One));
    let remaining: Vec<usize> = (0..5).filter(|p| !t.test_set.contains(p)).collect();
    for (l, p) in payload.labels.iter().zip(remaining) {
        assert_eq!(Some(*l), t.alice_labels[p]);
    }
}

#[test]
fn transcripts_serialise_amplitudes_as_pairs() {
    let t = run_protocol(&ProtocolConfig::honest(1, 0, Bit::Zero, 3)).unwrap();
    let v: serde_json::Value = serde_json::to_value(&t).unwrap();
    let amps = &v["messages"][0]["shares"][0]["amplitudes"];
    assert_eq!(amps.as_array().unwrap().len(), 4);
    assert_eq!(amps[0].as_array().unwrap().len(), 2);
    assert!(v["config"].is_object() && v["verdict"].is_object());
}

#[test]
fn invalid_configs_are_refused() {
    assert!(run_protocol(&ProtocolConfig::honest(0, 2, Bit::Zero, 0)).is_err());
    let bad = cfg(1, 1, Bit::Zero, 0, AliceStrategySpec::Honest, BobStrategySpec::QuantumAncilla { k: 2, amplitudes: vec![0.5, 0.5] });
    assert!(run_protocol(&bad).is_err());
}

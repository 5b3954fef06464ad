use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::linalg::{phase_minimized_sup_distance, uhlmann_unitary, CMatrix, StateVector, C64};
use crate::protocol::{
    AliceStrategy, BobAction, HonestAlice, Knowledge, Lab, PairBlock, Register, UnveilContext, UnveilPayload,
};
use crate::rng::SimRng;
use crate::states::{all_permutations, bell, partner_state, Axis, BellLabel, Bit, MeasurementBasis, Permutation, Sign, Spin};

/// Angles at which an average over a uniform axis is exact for the
/// acceptance polynomials that arise here.
const AXIS_GRID: [f64; 4] = [0.0, FRAC_PI_2, 2.0 * FRAC_PI_2, 3.0 * FRAC_PI_2];

/// A classical opening of `target`: pairing of first particles to the
/// receiver's records plus one label per record.
#[derive(Debug, Clone, PartialEq)]
pub struct RelabelPlan {
    /// Record `j` is matched with the first particle of remaining pair `pairing[j]`.
    pub pairing: Vec<usize>,
    pub signs: Vec<Sign>,
    /// Acceptance probability averaged over the unknown axes.
    pub expected_acceptance: f64,
}

/// Exhaustive search for the declaration that maximises the expected
/// acceptance, given the true labels and the reported outcomes of the
/// remaining pairs. Ties keep the first candidate.
pub fn best_relabel(target: Bit, labels: &[BellLabel], outcomes: &[Spin]) -> Result<RelabelPlan> {
    let n = labels.len();
    if n == 0 || outcomes.len() != n {
        return Err(Error::DimensionMismatch("one label and outcome per remaining pair required".into()));
    }
    if n > crate::protocol::RELABEL_MAX_N {
        return Err(Error::TooLarge(format!("relabel search at n = {n}")));
    }
    // Conditional first-particle states for every grid angle, true and claimed.
    let actual: Vec<Vec<StateVector>> = (0..n)
        .map(|i| AXIS_GRID.iter().map(|&t| partner_state(labels[i], MeasurementBasis::xy(t), outcomes[i])).collect())
        .collect();
    let claimed = |j: usize, sign: Sign, t: usize| {
        partner_state(BellLabel::new(target, sign), MeasurementBasis::xy(AXIS_GRID[t]), outcomes[j])
    };
    let grid_points = AXIS_GRID.len().pow(n as u32);
    let mut best: Option<RelabelPlan> = None;
    for pairing in all_permutations(n) {
        for mask in 0..1usize << n {
            let signs: Vec<Sign> = (0..n).map(|j| if mask >> (n - 1 - j) & 1 == 0 { Sign::Plus } else { Sign::Minus }).collect();
            let mut total = 0.0;
            for g in 0..grid_points {
                let idx = |i: usize| (g / AXIS_GRID.len().pow((n - 1 - i) as u32)) % AXIS_GRID.len();
                let mut p = 1.0;
                for j in 0..n {
                    let a = &actual[pairing[j]][idx(pairing[j])];
                    p *= claimed(j, signs[j], idx(j)).inner(a).norm_sqr();
                    if p == 0.0 {
                        break;
                    }
                }
                total += p;
            }
            let expected = total / grid_points as f64;
            if best.as_ref().is_none_or(|b| expected > b.expected_acceptance + 1e-12) {
                best = Some(RelabelPlan { pairing: pairing.clone(), signs, expected_acceptance: expected });
            }
        }
    }
    Ok(best.expect("at least one candidate"))
}

/// Commits honestly, then opens `target` with the best classical declaration.
#[derive(Debug, Clone)]
pub struct ClassicalRelabelAlice {
    target: Bit,
    plan: Option<RelabelPlan>,
}

impl ClassicalRelabelAlice {
    pub fn new(target: Bit) -> Self {
        Self { target, plan: None }
    }

    pub fn plan(&self) -> Option<&RelabelPlan> {
        self.plan.as_ref()
    }
}

impl AliceStrategy for ClassicalRelabelAlice {
    fn prepare(&mut self, b: Bit, count: usize, rng: &mut SimRng) -> Result<(Lab, Vec<Option<BellLabel>>)> {
        HonestAlice.prepare(b, count, rng)
    }

    fn resolve_label(
        &mut self,
        lab: &mut Lab,
        pair: usize,
        labels: &mut [Option<BellLabel>],
        rng: &mut SimRng,
    ) -> Result<BellLabel> {
        HonestAlice.resolve_label(lab, pair, labels, rng)
    }

    fn unveil(&mut self, ctx: UnveilContext<'_>, _lab: &mut Lab, _rng: &mut SimRng) -> Result<UnveilPayload> {
        let n = ctx.remaining.len();
        let labels = ctx
            .remaining
            .iter()
            .map(|&p| ctx.labels[p].ok_or_else(|| Error::Config(format!("label of pair {p} undetermined"))))
            .collect::<Result<Vec<_>>>()?;
        let outcomes: Vec<Spin> = ctx.remaining.iter().map(|&p| ctx.outcomes[p]).collect();
        let plan = best_relabel(self.target, &labels, &outcomes)?;
        // Declared order D[i] = L[tau(i)]; slot s holds L[pi(s)], so d(s) = tau⁻¹(pi(s)).
        let tau: Vec<usize> = plan.pairing.iter().copied().chain(plan.pairing.iter().map(|&j| n + j)).collect();
        let tau_inv = Permutation::new(tau)?.inverse();
        let recover = ctx.shuffle.as_slice().iter().map(|&k| tau_inv.as_slice()[k]).collect();
        let declared = plan.signs.iter().map(|&s| BellLabel::new(self.target, s)).collect();
        self.plan = Some(plan);
        Ok(UnveilPayload { bit: self.target, recover, labels: declared })
    }
}

/// `(|b+⟩|0⟩ + |b−⟩|1⟩)/√2` on registers `[First, Second, AliceAncilla]`.
pub fn purified_pair(b: Bit) -> StateVector {
    let plus = bell(BellLabel::new(b, Sign::Plus)).kron(&StateVector::basis(2, 0));
    let minus = bell(BellLabel::new(b, Sign::Minus)).kron(&StateVector::basis(2, 1));
    let amps = (plus.amplitudes() + minus.amplitudes()) * C64::from(std::f64::consts::FRAC_1_SQRT_2);
    StateVector::new(vec![2, 2, 2], amps.iter().copied().collect()).expect("unit vector")
}

pub fn purified_block(b: Bit) -> PairBlock {
    PairBlock::new(purified_pair(b), vec![Register::First, Register::Second, Register::AliceAncilla]).expect("three registers")
}

/// Block state of one purified pair after the receiver's `action`.
pub fn purified_after(b: Bit, action: &BobAction) -> Result<PairBlock> {
    let mut block = purified_block(b);
    action
        .apply_projected(&mut block)?
        .ok_or_else(|| Error::InvalidState("receiver outcome impossible for this pair".into()))?;
    Ok(block)
}

/// Ancilla rotation taking the committed purification to the `target` one,
/// given the receiver's action on that pair.
pub fn cheating_unitary(committed: Bit, target: Bit, action: &BobAction) -> Result<CMatrix> {
    let psi0 = purified_after(committed, action)?;
    let psi1 = purified_after(target, action)?;
    let a = psi0.factor(Register::AliceAncilla)?;
    uhlmann_unitary(psi0.state(), psi1.state(), &[a])
}

/// `U_A` for two receiver parameter sets on a single pair, and their
/// phase-minimised sup-norm distance.
pub fn ua_for_bob_params(p: &BobAction, q: &BobAction) -> Result<(CMatrix, CMatrix, f64)> {
    let u = cheating_unitary(Bit::Zero, Bit::One, p)?;
    let v = cheating_unitary(Bit::Zero, Bit::One, q)?;
    let d = phase_minimized_sup_distance(&u, &v);
    Ok((u, v, d))
}

/// Keeps every sign in superposition with an ancilla, then rotates the
/// ancilla toward `target` before opening.
#[derive(Debug, Clone)]
pub struct PurificationAlice {
    target: Bit,
    knowledge: Knowledge,
    committed: Option<Bit>,
}

impl PurificationAlice {
    pub fn new(target: Bit, knowledge: Knowledge) -> Self {
        Self { target, knowledge, committed: None }
    }

    fn read_sign(lab: &mut Lab, pair: usize, rng: &mut SimRng) -> Result<Sign> {
        let (k, _) = lab.block_mut(pair).measure(&[Register::AliceAncilla], &MeasurementBasis::Z.projectors(), rng)?;
        Ok(if k == 0 { Sign::Plus } else { Sign::Minus })
    }
}

impl AliceStrategy for PurificationAlice {
    fn prepare(&mut self, b: Bit, count: usize, _rng: &mut SimRng) -> Result<(Lab, Vec<Option<BellLabel>>)> {
        if count == 0 {
            return Err(Error::Config("sequence needs at least one pair".into()));
        }
        self.committed = Some(b);
        Ok((Lab::from_blocks(vec![purified_block(b); count]), vec![None; count]))
    }

    fn resolve_label(
        &mut self,
        lab: &mut Lab,
        pair: usize,
        labels: &mut [Option<BellLabel>],
        rng: &mut SimRng,
    ) -> Result<BellLabel> {
        if let Some(l) = labels[pair] {
            return Ok(l);
        }
        let committed = self.committed.ok_or_else(|| Error::Config("label requested before commitment".into()))?;
        let label = BellLabel::new(committed, Self::read_sign(lab, pair, rng)?);
        labels[pair] = Some(label);
        Ok(label)
    }

    fn wants_oracle(&self) -> bool {
        self.knowledge == Knowledge::Oracle
    }

    fn unveil(&mut self, ctx: UnveilContext<'_>, lab: &mut Lab, rng: &mut SimRng) -> Result<UnveilPayload> {
        let mut labels = Vec::with_capacity(ctx.remaining.len());
        for &p in ctx.remaining {
            let action = match (self.knowledge, ctx.oracle) {
                (Knowledge::Oracle, Some(actions)) => actions[p].clone(),
                (Knowledge::Oracle, None) => return Err(Error::Config("oracle knowledge not supplied".into())),
                (Knowledge::Blind, _) => {
                    BobAction::Measured { basis: MeasurementBasis::Xy { axis: Axis::random(rng) }, outcome: ctx.outcomes[p] }
                }
            };
            let u = cheating_unitary(ctx.committed, self.target, &action)?;
            lab.block_mut(p).apply(&[Register::AliceAncilla], &u)?;
            labels.push(BellLabel::new(self.target, Self::read_sign(lab, p, rng)?));
        }
        Ok(UnveilPayload { bit: self.target, recover: ctx.shuffle.as_slice().to_vec(), labels })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::all_permutations;
    use crate::linalg::{partial_trace, trace_distance, DensityMatrix};

    #[test]
    fn permutations_are_lexicographic() {
        let p = all_permutations(3);
        assert_eq!(p.len(), 6);
        assert_eq!(p[0], vec![0, 1, 2]);
        assert_eq!(p[1], vec![0, 2, 1]);
        assert_eq!(p[5], vec![2, 1, 0]);
    }

    #[test]
    fn relabel_single_pair_averages_one_half() {
        for sign in [Sign::Plus, Sign::Minus] {
            for alpha in [Spin::Up, Spin::Down] {
                let plan = best_relabel(Bit::One, &[BellLabel::new(Bit::Zero, sign)], &[alpha]).unwrap();
                assert!((plan.expected_acceptance - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn relabel_grid_matches_dense_quadrature() {
        let labels = [BellLabel::new(Bit::Zero, Sign::Plus), BellLabel::new(Bit::Zero, Sign::Minus)];
        let outcomes = [Spin::Up, Spin::Down];
        let plan = best_relabel(Bit::One, &labels, &outcomes).unwrap();
        let steps = 96;
        let mut total = 0.0;
        for a in 0..steps {
            for b in 0..steps {
                let t = [a as f64 * std::f64::consts::TAU / steps as f64, b as f64 * std::f64::consts::TAU / steps as f64];
                let mut p = 1.0;
                for j in 0..2 {
                    let i = plan.pairing[j];
                    let actual = partner_state(labels[i], MeasurementBasis::xy(t[i]), outcomes[i]);
                    let claimed = partner_state(BellLabel::new(Bit::One, plan.signs[j]), MeasurementBasis::xy(t[j]), outcomes[j]);
                    p *= claimed.inner(&actual).norm_sqr();
                }
                total += p;
            }
        }
        assert!((total / (steps * steps) as f64 - plan.expected_acceptance).abs() < 1e-12);
    }

    #[test]
    fn relabel_toward_true_bit_is_certain() {
        let labels = [BellLabel::new(Bit::One, Sign::Minus), BellLabel::new(Bit::One, Sign::Plus)];
        let plan = best_relabel(Bit::One, &labels, &[Spin::Up, Spin::Up]).unwrap();
        assert_eq!(plan.pairing, vec![0, 1]);
        assert_eq!(plan.signs, vec![Sign::Minus, Sign::Plus]);
        assert!((plan.expected_acceptance - 1.0).abs() < 1e-12);
    }

    #[test]
    fn purified_pair_traces_to_the_commit_mixture() {
        for b in [Bit::Zero, Bit::One] {
            let rho = partial_trace(&DensityMatrix::from_pure(&purified_pair(b)), &[0, 1]).unwrap();
            let mix = DensityMatrix::mixture(&[
                (0.5, DensityMatrix::from_pure(&bell(BellLabel::new(b, Sign::Plus)))),
                (0.5, DensityMatrix::from_pure(&bell(BellLabel::new(b, Sign::Minus)))),
            ])
            .unwrap();
            assert!(trace_distance(&rho, &mix).unwrap() < 1e-12);
        }
    }

    #[test]
    fn cheating_unitary_maps_committed_to_target() {
        let action = BobAction::Measured { basis: MeasurementBasis::xy(0.7), outcome: Spin::Down };
        let u = cheating_unitary(Bit::Zero, Bit::One, &action).unwrap();
        let mut block = purified_after(Bit::Zero, &action).unwrap();
        block.apply(&[Register::AliceAncilla], &u).unwrap();
        let target = purified_after(Bit::One, &action).unwrap();
        assert!(block.state().phase_distance(target.state()).0 < 1e-9);
    }

    #[test]
    fn ua_depends_on_the_axis() {
        let p = BobAction::Measured { basis: MeasurementBasis::xy(0.0), outcome: Spin::Up };
        let q = BobAction::Measured { basis: MeasurementBasis::xy(FRAC_PI_2), outcome: Spin::Up };
        let (_, _, d) = ua_for_bob_params(&p, &q).unwrap();
        assert!(d > 0.1, "{d}");
        let (_, _, back) = ua_for_bob_params(&q, &p).unwrap();
        assert!((d - back).abs() < 1e-9);
        let (_, _, same) = ua_for_bob_params(&p, &p).unwrap();
        assert!(same < 1e-9);
    }
}

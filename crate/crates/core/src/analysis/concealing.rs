//! Exact conditional states of everything the receiver holds.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adversaries::sample_bob_action;
use crate::error::{Error, Result};
use crate::linalg::{symmetrize, trace_distance, DensityMatrix};
use crate::protocol::{BobAction, BobStrategySpec, PairBlock, Register};
use crate::states::{all_permutations, bell, BellLabel, Bit, MeasurementBasis, Sign, Spin};

/// Largest `n` handled exactly.
pub const EXACT_MAX_N: usize = 3;
/// Largest joint dimension handled exactly.
pub const EXACT_MAX_DIM: usize = 1024;

/// State of one pair's `[First, Second]` (plus `χ` if present) given the
/// receiver's action and its recorded outcome, averaged over the sign.
pub fn conditional_pair_state(b: Bit, action: &BobAction) -> Result<DensityMatrix> {
    let mut parts = Vec::with_capacity(2);
    let mut regs = vec![Register::First, Register::Second];
    for sign in [Sign::Plus, Sign::Minus] {
        let mut block = PairBlock::new(bell(BellLabel::new(b, sign)), vec![Register::First, Register::Second])?;
        let Some(w) = action.apply_projected(&mut block)? else { continue };
        if block.registers().contains(&Register::Chi) {
            regs = vec![Register::First, Register::Second, Register::Chi];
        }
        parts.push((0.5 * w, block.reduced(&regs)?));
    }
    if parts.is_empty() {
        return Err(Error::InvalidState(format!("recorded outcome impossible for b = {}", u8::from(b))));
    }
    DensityMatrix::mixture(&parts)?.renormalized()
}

/// Conditional state of the receiver's holdings after the shuffle step:
/// first and second particles of every kept pair, then any `χ` registers.
/// With `shuffle` the particle order is averaged over all `(2n)!`
/// reorderings; without it the order is `1_1 … 1_n 2_1 … 2_n`.
pub fn conditional_holdings(b: Bit, actions: &[BobAction], shuffle: bool) -> Result<DensityMatrix> {
    let n = actions.len();
    if n == 0 {
        return Err(Error::Config("need at least one pair".into()));
    }
    if n > EXACT_MAX_N {
        return Err(Error::TooLarge(format!("exact holdings at n = {n}")));
    }
    let pairs = actions.iter().map(|a| conditional_pair_state(b, a)).collect::<Result<Vec<_>>>()?;
    let dim: usize = pairs.iter().map(DensityMatrix::dim).product();
    if dim > EXACT_MAX_DIM {
        return Err(Error::TooLarge(format!("joint dimension {dim}")));
    }
    let mut joint = DensityMatrix::from_pure(&crate::linalg::StateVector::unit());
    let mut offsets = Vec::with_capacity(n);
    for p in &pairs {
        offsets.push(joint.dims().len());
        joint = joint.kron(p);
    }
    let firsts = offsets.iter().copied();
    let seconds = offsets.iter().map(|&o| o + 1);
    let chis = offsets.iter().zip(&pairs).filter(|(_, p)| p.dims().len() == 3).map(|(&o, _)| o + 2);
    let order: Vec<usize> = firsts.chain(seconds).chain(chis).collect();
    let ordered = joint.permute_factors(&order)?;
    if !shuffle {
        return Ok(ordered);
    }
    let particles: Vec<usize> = (0..2 * n).collect();
    symmetrize(&ordered, &particles, &all_permutations(2 * n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcealingReport {
    pub n: usize,
    pub shuffled: bool,
    pub actions: Vec<BobAction>,
    pub distance: f64,
}

/// Samples the receiver's private randomness once, then compares his exact
/// conditional holdings for the two bit values.
pub fn concealing_check<R: Rng + ?Sized>(
    n: usize,
    bob: &BobStrategySpec,
    shuffle: bool,
    rng: &mut R,
) -> Result<ConcealingReport> {
    bob.validate()?;
    let actions: Vec<BobAction> = (0..n).map(|_| sample_bob_action(bob, rng)).collect();
    concealing_distance(&actions, shuffle).map(|distance| ConcealingReport { n, shuffled: shuffle, actions, distance })
}

pub fn concealing_distance(actions: &[BobAction], shuffle: bool) -> Result<f64> {
    let r0 = conditional_holdings(Bit::Zero, actions, shuffle)?;
    let r1 = conditional_holdings(Bit::One, actions, shuffle)?;
    trace_distance(&r0, &r1)
}

/// Distance between the two bits' conditional `(first, collapsed second)`
/// states after the receiver measured with the given bases and outcomes.
/// Accepts any basis; the xy-plane restriction lives in [`prelim_two_check`].
pub fn conditional_post_measurement_distance(bases: &[MeasurementBasis], outcomes: &[Spin]) -> Result<f64> {
    if bases.len() != outcomes.len() {
        return Err(Error::DimensionMismatch("one outcome per basis required".into()));
    }
    let actions: Vec<BobAction> =
        bases.iter().zip(outcomes).map(|(&basis, &outcome)| BobAction::Measured { basis, outcome }).collect();
    concealing_distance(&actions, false)
}

/// Post-measurement comparison restricted to xy-plane axes.
pub fn prelim_two_check(bases: &[MeasurementBasis], outcomes: &[Spin]) -> Result<f64> {
    if bases.iter().any(|b| matches!(b, MeasurementBasis::Z)) {
        return Err(Error::NonXyAxis);
    }
    conditional_post_measurement_distance(bases, outcomes)
}

use std::f64::consts::TAU;

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{DensityMatrix, StateVector};
use crate::protocol::engine::{disclosed_axes, entries_for};
use crate::protocol::lab::attach_ancilla_registers;
use crate::protocol::{BobAction, BobStrategy, Lab, Register};
use crate::rng::SimRng;
use crate::states::{sz_total, Axis, Bit, MeasEntry, MeasRecord, MeasurementBasis, ParticleId, Spin};

/// Guesses the test set, measures the guessed particles honestly and the
/// rest along ẑ.
#[derive(Debug, Clone)]
pub struct GuessTestSetBob {
    m: usize,
    guess: Vec<usize>,
    record: MeasRecord,
}

impl GuessTestSetBob {
    pub fn new(m: usize) -> Self {
        Self { m, guess: Vec::new(), record: MeasRecord::default() }
    }

    /// The guessed test set, sorted.
    pub fn guess(&self) -> &[usize] {
        &self.guess
    }
}

impl BobStrategy for GuessTestSetBob {
    fn measure_phase(&mut self, lab: &mut Lab, particles: &[ParticleId], rng: &mut SimRng) -> Result<Vec<Spin>> {
        let total = particles.len();
        if self.m > total {
            return Err(Error::Config(format!("cannot guess {} of {total} pairs", self.m)));
        }
        let mut guess = sample(rng, total, self.m).into_vec();
        guess.sort_unstable();
        self.record = MeasRecord::with_len(total);
        let mut outcomes = Vec::with_capacity(total);
        for (i, &id) in particles.iter().enumerate() {
            let basis = if guess.contains(&i) { MeasurementBasis::Xy { axis: Axis::random(rng) } } else { MeasurementBasis::Z };
            let (outcome, _) = lab.measure_particle(id, basis, rng)?;
            self.record.entries[i] = Some(MeasEntry { basis, outcome });
            outcomes.push(outcome);
        }
        self.guess = guess;
        Ok(outcomes)
    }

    fn disclose(&mut self, _lab: &mut Lab, tested: &[usize], rng: &mut SimRng) -> Result<Vec<Axis>> {
        Ok(tested
            .iter()
            .map(|&p| match self.record.entries[p] {
                Some(MeasEntry { basis: MeasurementBasis::Xy { axis }, .. }) => axis,
                _ => Axis::random(rng),
            })
            .collect())
    }

    fn verification_record(&mut self, _lab: &mut Lab, remaining: &[usize], _rng: &mut SimRng) -> Result<Vec<MeasEntry>> {
        entries_for(&self.record, remaining)
    }

    fn record(&self) -> MeasRecord {
        self.record.clone()
    }

    fn actions(&self) -> Vec<BobAction> {
        measured_actions(&self.record)
    }
}

fn measured_actions(record: &MeasRecord) -> Vec<BobAction> {
    record.entries.iter().flatten().map(|e| BobAction::Measured { basis: e.basis, outcome: e.outcome }).collect()
}

/// Measures everything along ẑ, invents axes when asked, and guesses the bit
/// from the total spin of the returned sequence.
#[derive(Debug, Clone, Default)]
pub struct MeasureZBob {
    record: MeasRecord,
    sz: Option<i64>,
}

impl MeasureZBob {
    pub fn new() -> Self {
        Self::default()
    }

    /// Total z-spin of the shuffled sequence, once measured.
    pub fn sz(&self) -> Option<i64> {
        self.sz
    }
}

impl BobStrategy for MeasureZBob {
    fn measure_phase(&mut self, lab: &mut Lab, particles: &[ParticleId], rng: &mut SimRng) -> Result<Vec<Spin>> {
        self.record = MeasRecord::with_len(particles.len());
        let mut outcomes = Vec::with_capacity(particles.len());
        for (i, &id) in particles.iter().enumerate() {
            let (outcome, _) = lab.measure_particle(id, MeasurementBasis::Z, rng)?;
            self.record.entries[i] = Some(MeasEntry { basis: MeasurementBasis::Z, outcome });
            outcomes.push(outcome);
        }
        Ok(outcomes)
    }

    fn disclose(&mut self, _lab: &mut Lab, tested: &[usize], rng: &mut SimRng) -> Result<Vec<Axis>> {
        Ok(tested.iter().map(|_| Axis::random(rng)).collect())
    }

    /// `S_z ≠ 0` is only possible for `b = 1`; otherwise guesses 0.
    fn after_commit(&mut self, lab: &mut Lab, shuffled: &[ParticleId], rng: &mut SimRng) -> Result<Option<Bit>> {
        let spins = shuffled
            .iter()
            .map(|&id| lab.measure_particle(id, MeasurementBasis::Z, rng).map(|(s, _)| Some(s)))
            .collect::<Result<Vec<_>>>()?;
        let sz = sz_total(&spins)?;
        self.sz = Some(sz);
        Ok(Some(if sz == 0 { Bit::Zero } else { Bit::One }))
    }

    fn verification_record(&mut self, _lab: &mut Lab, remaining: &[usize], _rng: &mut SimRng) -> Result<Vec<MeasEntry>> {
        entries_for(&self.record, remaining)
    }

    fn record(&self) -> MeasRecord {
        self.record.clone()
    }

    fn actions(&self) -> Vec<BobAction> {
        measured_actions(&self.record)
    }
}

/// `K` axes evenly spread from a random start: `θ, θ + 2π/K, …`. For `K = 2`
/// this is `{ê, −ê}`.
pub fn branch_axes<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<Axis> {
    let start = Axis::random(rng).theta();
    (0..k).map(|j| Axis::new(start + TAU * j as f64 / k as f64)).collect()
}

/// Leaves the measurement axis in superposition: entangles each particle
/// with an axis register `χ` and an outcome register `ξ`, reads `ξ`, and
/// collapses `χ` only when the axis must be named.
#[derive(Debug, Clone)]
pub struct QuantumAncillaBob {
    amplitudes: Vec<f64>,
    branches: Vec<Vec<(Axis, f64)>>,
    outcomes: Vec<Spin>,
    record: MeasRecord,
}

impl QuantumAncillaBob {
    pub fn new(amplitudes: Vec<f64>) -> Result<Self> {
        crate::protocol::BobStrategySpec::QuantumAncilla { k: amplitudes.len(), amplitudes: amplitudes.clone() }.validate()?;
        Ok(Self { amplitudes, branches: Vec::new(), outcomes: Vec::new(), record: MeasRecord::default() })
    }

    /// Axis and amplitude of every branch, per particle.
    pub fn branches(&self) -> &[Vec<(Axis, f64)>] {
        &self.branches
    }

    fn collapse(&mut self, lab: &mut Lab, pair: usize, rng: &mut SimRng) -> Result<MeasEntry> {
        if let Some(e) = self.record.entries[pair] {
            return Ok(e);
        }
        let k = self.branches[pair].len();
        let projectors: Vec<_> = (0..k).map(|j| crate::linalg::projectors_from_basis(&[StateVector::basis(k, j)]).remove(0)).collect();
        let (j, _) = lab.block_mut(pair).measure(&[Register::Chi], &projectors, rng)?;
        let entry = MeasEntry { basis: MeasurementBasis::Xy { axis: self.branches[pair][j].0 }, outcome: self.outcomes[pair] };
        self.record.entries[pair] = Some(entry);
        Ok(entry)
    }
}

impl BobStrategy for QuantumAncillaBob {
    fn measure_phase(&mut self, lab: &mut Lab, particles: &[ParticleId], rng: &mut SimRng) -> Result<Vec<Spin>> {
        self.record = MeasRecord::with_len(particles.len());
        self.branches.clear();
        self.outcomes.clear();
        for &id in particles {
            let axes = branch_axes(self.amplitudes.len(), rng);
            let branches: Vec<(Axis, f64)> = axes.into_iter().zip(self.amplitudes.iter().copied()).collect();
            let block = lab.block_mut(id.pair);
            attach_ancilla_registers(block, &branches)?;
            let (a, _) = block.measure(&[Register::Xi], &MeasurementBasis::Z.projectors(), rng)?;
            self.branches.push(branches);
            self.outcomes.push(Spin::from_index(a));
        }
        Ok(self.outcomes.clone())
    }

    fn disclose(&mut self, lab: &mut Lab, tested: &[usize], rng: &mut SimRng) -> Result<Vec<Axis>> {
        for &p in tested {
            self.collapse(lab, p, rng)?;
        }
        disclosed_axes(&self.record, tested)
    }

    fn verification_record(&mut self, lab: &mut Lab, remaining: &[usize], rng: &mut SimRng) -> Result<Vec<MeasEntry>> {
        remaining.iter().map(|&p| self.collapse(lab, p, rng)).collect()
    }

    fn record(&self) -> MeasRecord {
        self.record.clone()
    }

    fn actions(&self) -> Vec<BobAction> {
        self.branches
            .iter()
            .zip(&self.outcomes)
            .map(|(b, &outcome)| BobAction::Ancilla { branches: b.clone(), outcome })
            .collect()
    }
}

/// Joint state of the retained `χ` registers of `pairs`.
pub fn chi_ancilla_state(lab: &Lab, pairs: &[usize]) -> Result<DensityMatrix> {
    pairs.iter().try_fold(DensityMatrix::from_pure(&StateVector::unit()), |acc, &p| {
        Ok(acc.kron(&lab.block(p).reduced(&[Register::Chi])?))
    })
}

/// Normalised state of `(particle, χ)` after the ancilla step on a lone
/// particle `phi`, given that `ξ` reads `alpha`.
pub fn post_xi_state(phi: &StateVector, branches: &[(Axis, f64)], alpha: Spin) -> Result<Option<StateVector>> {
    let mut block = crate::protocol::PairBlock::new(phi.clone(), vec![Register::Second])?;
    let action = BobAction::Ancilla { branches: branches.to_vec(), outcome: alpha };
    if action.apply_projected(&mut block)?.is_none() {
        return Ok(None);
    }
    let xi = block.factor(Register::Xi)?;
    let (_, rest) = block
        .state()
        .condition(xi, &StateVector::basis(2, alpha.index()))?
        .ok_or_else(|| Error::InvalidState("outcome register not in the recorded state".into()))?;
    Ok(Some(rest))
}

//! The physical state shared by both parties.
//!
//! Pairs never become entangled with each other in any implemented strategy,
//! so the joint state is kept exactly as a product of per-pair blocks. Each
//! block holds the two particles of one Bell pair plus whatever ancilla
//! registers either party has attached to it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    apply_unitary, complete_basis, measure, outcome_probabilities, project_state, projectors_from_basis, reduced_state, CMatrix,
    DensityMatrix, StateVector, C64,
};
use crate::states::{Axis, Member, MeasurementBasis, ParticleId, Spin};

/// Subsystem of a pair block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Register {
    First,
    Second,
    /// Committer's purification ancilla.
    AliceAncilla,
    /// Receiver's axis register, one level per branch.
    Chi,
    /// Receiver's outcome register.
    Xi,
}

impl From<Member> for Register {
    fn from(m: Member) -> Register {
        match m {
            Member::First => Register::First,
            Member::Second => Register::Second,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairBlock {
    state: StateVector,
    registers: Vec<Register>,
}

impl PairBlock {
    pub fn new(state: StateVector, registers: Vec<Register>) -> Result<Self> {
        if state.dims().len() != registers.len() {
            return Err(Error::DimensionMismatch("one register per factor required".into()));
        }
        Ok(Self { state, registers })
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }

    pub fn registers(&self) -> &[Register] {
        &self.registers
    }

    pub fn factor(&self, reg: Register) -> Result<usize> {
        self.registers
            .iter()
            .position(|&r| r == reg)
            .ok_or_else(|| Error::InvalidFactors(format!("register {reg:?} not present")))
    }

    fn factors(&self, regs: &[Register]) -> Result<Vec<usize>> {
        regs.iter().map(|&r| self.factor(r)).collect()
    }

    /// Appends a fresh register in state `init`.
    pub fn attach(&mut self, reg: Register, init: &StateVector) -> Result<()> {
        if self.registers.contains(&reg) {
            return Err(Error::InvalidFactors(format!("register {reg:?} already attached")));
        }
        self.state = self.state.kron(init);
        self.registers.push(reg);
        Ok(())
    }

    pub fn apply(&mut self, regs: &[Register], u: &CMatrix) -> Result<()> {
        let targets = self.factors(regs)?;
        self.state = apply_unitary(u, &targets, &self.state)?;
        Ok(())
    }

    pub fn probabilities(&self, regs: &[Register], projectors: &[CMatrix]) -> Result<Vec<f64>> {
        outcome_probabilities(&self.state, &self.factors(regs)?, projectors)
    }

    /// Samples a projective measurement; returns outcome index and its probability.
    pub fn measure<R: Rng + ?Sized>(
        &mut self,
        regs: &[Register],
        projectors: &[CMatrix],
        rng: &mut R,
    ) -> Result<(usize, f64)> {
        let m = measure(&self.state, &self.factors(regs)?, projectors, rng)?;
        self.state = m.post_state;
        Ok((m.outcome, m.probability))
    }

    /// Post-selects outcome `index`; returns its Born weight, or `None` if it
    /// cannot occur.
    pub fn project(&mut self, regs: &[Register], projectors: &[CMatrix], index: usize) -> Result<Option<f64>> {
        let targets = self.factors(regs)?;
        let w = self.state.born_probability(&projectors[index], &targets)?;
        if w < 1e-24 {
            return Ok(None);
        }
        self.state = project_state(&self.state, &targets, &projectors[index])?;
        Ok(Some(w))
    }

    pub fn reduced(&self, regs: &[Register]) -> Result<DensityMatrix> {
        reduced_state(&self.state, &self.factors(regs)?)
    }
}

/// Joint state of every pair in a session.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lab {
    blocks: Vec<PairBlock>,
}

impl Lab {
    /// One block per two-qubit pair state, registers `[First, Second]`.
    pub fn from_pairs(states: Vec<StateVector>) -> Result<Self> {
        let blocks = states
            .into_iter()
            .map(|s| PairBlock::new(s, vec![Register::First, Register::Second]))
            .collect::<Result<_>>()?;
        Ok(Self { blocks })
    }

    pub fn from_blocks(blocks: Vec<PairBlock>) -> Self {
        Self { blocks }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn block(&self, pair: usize) -> &PairBlock {
        &self.blocks[pair]
    }

    pub fn block_mut(&mut self, pair: usize) -> &mut PairBlock {
        &mut self.blocks[pair]
    }

    pub fn blocks(&self) -> &[PairBlock] {
        &self.blocks
    }

    pub fn measure_particle<R: Rng + ?Sized>(
        &mut self,
        id: ParticleId,
        basis: MeasurementBasis,
        rng: &mut R,
    ) -> Result<(Spin, f64)> {
        let (k, p) = self.blocks[id.pair].measure(&[id.member.into()], &basis.projectors(), rng)?;
        Ok((Spin::from_index(k), p))
    }

    /// Measures a particle in the basis `{|target⟩, |target⊥⟩}`; returns
    /// whether `|target⟩` was found and the prior probability of finding it.
    pub fn check_particle<R: Rng + ?Sized>(
        &mut self,
        id: ParticleId,
        target: &StateVector,
        rng: &mut R,
    ) -> Result<(bool, f64)> {
        let projectors = binary_projectors(target);
        let reg: Register = id.member.into();
        let prior = self.blocks[id.pair].probabilities(&[reg], &projectors)?[0];
        let (k, _) = self.blocks[id.pair].measure(&[reg], &projectors, rng)?;
        Ok((k == 0, prior))
    }
}

/// `{|t⟩⟨t|, I − |t⟩⟨t|}` for a single-qubit target state.
pub fn binary_projectors(target: &StateVector) -> Vec<CMatrix> {
    let p = projectors_from_basis(std::slice::from_ref(target)).remove(0);
    let q = CMatrix::identity(p.nrows(), p.ncols()) - &p;
    vec![p, q]
}

/// What the receiver did to the second particle of one pair during the
/// measurement phase. Used to rebuild the block state from the outside, as in
/// counterfactual (oracle) analyses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum BobAction {
    /// Direct projective measurement with the given result.
    Measured { basis: MeasurementBasis, outcome: Spin },
    /// Ancilla-assisted measurement with undetermined axis: branch `k` uses
    /// axis `branches[k].0` with amplitude `branches[k].1`; `outcome` is the
    /// value read from the outcome register.
    Ancilla { branches: Vec<(Axis, f64)>, outcome: Spin },
}

impl BobAction {
    /// Applies the action to a block by post-selection on the recorded
    /// outcome. Returns the Born weight of that outcome.
    pub fn apply_projected(&self, block: &mut PairBlock) -> Result<Option<f64>> {
        match self {
            BobAction::Measured { basis, outcome } => {
                block.project(&[Register::Second], &basis.projectors(), outcome.index())
            }
            BobAction::Ancilla { branches, outcome } => {
                attach_ancilla_registers(block, branches)?;
                block.project(&[Register::Xi], &MeasurementBasis::Z.projectors(), outcome.index())
            }
        }
    }
}

/// Attaches `χ` and `ξ` in their ready states and runs the branch unitary.
pub fn attach_ancilla_registers(block: &mut PairBlock, branches: &[(Axis, f64)]) -> Result<()> {
    let k = branches.len();
    block.attach(Register::Chi, &StateVector::basis(k, 0))?;
    block.attach(Register::Xi, &StateVector::basis(2, 0))?;
    let u = ancilla_unitary(branches)?;
    block.apply(&[Register::Second, Register::Chi, Register::Xi], &u)
}

/// Unitary on `particle ⊗ χ ⊗ ξ` whose action on `|φ⟩|χ_0⟩|ξ_↑⟩` is
/// `Σ_k Σ_α p_k |α ê_k⟩⟨α ê_k|φ⟩ |χ_k⟩|ξ_α⟩`. The remaining columns are a
/// Gram–Schmidt completion.
pub fn ancilla_unitary(branches: &[(Axis, f64)]) -> Result<CMatrix> {
    let k = branches.len();
    if k < 2 {
        return Err(Error::Config("ancilla strategy needs at least two branches".into()));
    }
    let norm: f64 = branches.iter().map(|(_, p)| p * p).sum();
    if (norm - 1.0).abs() > crate::linalg::TOL {
        return Err(Error::Config(format!("branch amplitudes have squared sum {norm}")));
    }
    let dim = 4 * k;
    let column = |phi: usize| {
        let phi_state = StateVector::basis(2, phi);
        let mut v = nalgebra::DVector::<C64>::zeros(dim);
        for (branch, (axis, p)) in branches.iter().enumerate() {
            for alpha in [Spin::Up, Spin::Down] {
                let e = crate::states::xy_eigenstate(*axis, alpha);
                let amp = e.inner(&phi_state) * *p;
                for (x, ex) in e.amplitudes().iter().enumerate() {
                    v[x * 2 * k + branch * 2 + alpha.index()] += amp * ex;
                }
            }
        }
        v
    };
    let inputs = [0, 2 * k];
    let fixed = vec![column(0), column(1)];
    let completed = complete_basis(&fixed, dim);
    let mut u = CMatrix::zeros(dim, dim);
    let mut rest = completed.iter().skip(2);
    for c in 0..dim {
        let col = match inputs.iter().position(|&i| i == c) {
            Some(j) => &fixed[j],
            None => rest.next().expect("complete basis"),
        };
        u.set_column(c, col);
    }
    Ok(u)
}

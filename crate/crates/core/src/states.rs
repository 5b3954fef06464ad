//! Bell pairs, xy-plane spin eigenstates, commitment sequences and the
//! bookkeeping types shared by the protocol and its analyses.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{projectors_from_basis, CMatrix, Ensemble, StateVector, C64};

/// Committed bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Bit {
    Zero,
    One,
}

impl Bit {
    pub fn flip(self) -> Bit {
        match self {
            Bit::Zero => Bit::One,
            Bit::One => Bit::Zero,
        }
    }
}

impl From<Bit> for u8 {
    fn from(b: Bit) -> u8 {
        match b {
            Bit::Zero => 0,
            Bit::One => 1,
        }
    }
}

impl TryFrom<u8> for Bit {
    type Error = Error;

    fn try_from(v: u8) -> Result<Bit> {
        match v {
            0 => Ok(Bit::Zero),
            1 => Ok(Bit::One),
            _ => Err(Error::Config(format!("bit must be 0 or 1, got {v}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Spin projection, `↑` or `↓`, along whatever axis was measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub fn value(self) -> i64 {
        match self {
            Spin::Up => 1,
            Spin::Down => -1,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Spin::Up => 0,
            Spin::Down => 1,
        }
    }

    pub fn from_index(i: usize) -> Spin {
        if i == 0 {
            Spin::Up
        } else {
            Spin::Down
        }
    }

    pub fn flip(self) -> Spin {
        match self {
            Spin::Up => Spin::Down,
            Spin::Down => Spin::Up,
        }
    }
}

/// One of the four Bell states `|b±⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BellLabel {
    pub bit: Bit,
    pub sign: Sign,
}

impl BellLabel {
    pub fn new(bit: Bit, sign: Sign) -> Self {
        Self { bit, sign }
    }

    pub fn all() -> [BellLabel; 4] {
        [
            BellLabel::new(Bit::Zero, Sign::Plus),
            BellLabel::new(Bit::Zero, Sign::Minus),
            BellLabel::new(Bit::One, Sign::Plus),
            BellLabel::new(Bit::One, Sign::Minus),
        ]
    }
}

/// Unit vector in the xy-plane at angle `theta` from x̂.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    theta: f64,
}

impl Axis {
    pub fn new(theta: f64) -> Self {
        Self { theta: theta.rem_euclid(TAU) }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::new(rng.random_range(0.0..TAU))
    }

    pub fn theta(self) -> f64 {
        self.theta
    }

    /// `-ê`.
    pub fn opposite(self) -> Self {
        Self::new(self.theta + std::f64::consts::PI)
    }

    /// Angles compared modulo 2π.
    pub fn approx_eq(self, other: Axis) -> bool {
        let d = (self.theta - other.theta).rem_euclid(TAU);
        d.min(TAU - d) < 1e-12
    }
}

/// Single-qubit measurement basis: z, or an axis in the xy-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "basis", rename_all = "lowercase")]
pub enum MeasurementBasis {
    Z,
    Xy { axis: Axis },
}

impl MeasurementBasis {
    pub fn xy(theta: f64) -> Self {
        MeasurementBasis::Xy { axis: Axis::new(theta) }
    }

    /// The eigenstate with the given projection.
    pub fn eigenstate(self, spin: Spin) -> StateVector {
        match self {
            MeasurementBasis::Z => z_eigenstate(spin),
            MeasurementBasis::Xy { axis } => xy_eigenstate(axis, spin),
        }
    }

    /// Projectors ordered `[↑, ↓]`.
    pub fn projectors(self) -> Vec<CMatrix> {
        projectors_from_basis(&[self.eigenstate(Spin::Up), self.eigenstate(Spin::Down)])
    }
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn z_eigenstate(spin: Spin) -> StateVector {
    StateVector::basis(2, spin.index())
}

/// Eigenstate of `cos θ σ_x + sin θ σ_y`: `(|↑z⟩ ± e^{iθ}|↓z⟩)/√2`.
pub fn xy_eigenstate(axis: Axis, spin: Spin) -> StateVector {
    let phase = C64::from_polar(spin.value() as f64 * FRAC_1_SQRT_2, axis.theta);
    StateVector::new(vec![2], vec![real(FRAC_1_SQRT_2), phase]).expect("unit vector")
}

/// `|0±⟩ = (|↑↓⟩ ± |↓↑⟩)/√2`, `|1±⟩ = (|↑↑⟩ ± |↓↓⟩)/√2`.
pub fn bell(label: BellLabel) -> StateVector {
    let h = FRAC_1_SQRT_2;
    let s = label.sign.value() * h;
    let amps = match label.bit {
        Bit::Zero => [0.0, h, s, 0.0],
        Bit::One => [h, 0.0, 0.0, s],
    };
    StateVector::new(vec![2, 2], amps.iter().map(|&x| real(x)).collect()).expect("unit vector")
}

/// State of the first particle of `|label⟩` after its partner was found with
/// projection `outcome` along `basis`.
pub fn partner_state(label: BellLabel, basis: MeasurementBasis, outcome: Spin) -> StateVector {
    bell(label)
        .condition(1, &basis.eigenstate(outcome))
        .expect("two-qubit state")
        .expect("Bell states have full-rank marginals")
        .1
}

/// Which member of a pair a particle is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Member {
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ParticleId {
    pub pair: usize,
    pub member: Member,
}

impl ParticleId {
    pub fn first(pair: usize) -> Self {
        Self { pair, member: Member::First }
    }

    pub fn second(pair: usize) -> Self {
        Self { pair, member: Member::Second }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub label: BellLabel,
    pub first: ParticleId,
    pub second: ParticleId,
}

/// Ordered sequence of Bell pairs, as prepared by the committer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSequence {
    pub bit: Bit,
    pub pairs: Vec<PairRecord>,
}

impl PairSequence {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Joint pure state, factors ordered `(1_1 2_1)(1_2 2_2)…`.
    pub fn joint(&self) -> StateVector {
        self.pairs.iter().fold(StateVector::unit(), |acc, p| acc.kron(&bell(p.label)))
    }

    /// First particles `Σ_1` followed by second particles `Σ_2`.
    pub fn split(&self) -> (Vec<ParticleId>, Vec<ParticleId>) {
        (self.pairs.iter().map(|p| p.first).collect(), self.pairs.iter().map(|p| p.second).collect())
    }
}

/// `{|b+⟩, |b−⟩; ½, ½}^N` with the realised signs recorded.
pub fn build_commit_sequence<R: Rng + ?Sized>(b: Bit, count: usize, rng: &mut R) -> Result<PairSequence> {
    if count == 0 {
        return Err(Error::Config("sequence needs at least one pair".into()));
    }
    let pairs = (0..count)
        .map(|i| {
            let sign = if rng.random::<bool>() { Sign::Plus } else { Sign::Minus };
            PairRecord { label: BellLabel::new(b, sign), first: ParticleId::first(i), second: ParticleId::second(i) }
        })
        .collect();
    Ok(PairSequence { bit: b, pairs })
}

fn uniform_product_ensemble(n: usize, choices: [StateVector; 2]) -> Result<Ensemble> {
    if n == 0 {
        return Err(Error::Config("need at least one pair".into()));
    }
    let q = 0.5f64.powi(n as i32);
    let members = (0..1usize << n)
        .map(|mask| {
            let state = (0..n).fold(StateVector::unit(), |acc, i| acc.kron(&choices[(mask >> (n - 1 - i)) & 1]));
            (state, q)
        })
        .collect();
    Ensemble::new(members)
}

/// Bob's view of an `n`-pair commitment to `b` before any measurement:
/// uniform over the `2^n` sign strings.
pub fn commit_ensemble(b: Bit, n: usize) -> Result<Ensemble> {
    uniform_product_ensemble(n, [bell(BellLabel::new(b, Sign::Plus)), bell(BellLabel::new(b, Sign::Minus))])
}

/// Equivalent z-basis product ensemble: `{|↑↓⟩,|↓↑⟩}` per pair for `b = 0`,
/// `{|↑↑⟩,|↓↓⟩}` for `b = 1`.
pub fn z_product_ensemble(b: Bit, n: usize) -> Result<Ensemble> {
    let (u, d) = (z_eigenstate(Spin::Up), z_eigenstate(Spin::Down));
    let choices = match b {
        Bit::Zero => [u.kron(&d), d.kron(&u)],
        Bit::One => [u.kron(&u), d.kron(&d)],
    };
    uniform_product_ensemble(n, choices)
}

/// Total z-spin in units of ħ/2 (`#↑ − #↓`).
pub fn sz_total(record: &[Option<Spin>]) -> Result<i64> {
    record
        .iter()
        .enumerate()
        .map(|(i, s)| s.map(Spin::value).ok_or(Error::Unmeasured(i)))
        .sum()
}

/// Bijection on positions; `apply` places `seq[p[i]]` at position `i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; map.len()];
        for &k in &map {
            if k >= map.len() || seen[k] {
                return Err(Error::InvalidPermutation(format!("{map:?} is not a bijection")));
            }
            seen[k] = true;
        }
        Ok(Self(map))
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut map: Vec<usize> = (0..n).collect();
        map.shuffle(rng);
        Self(map)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (i, &k) in self.0.iter().enumerate() {
            inv[k] = i;
        }
        Self(inv)
    }

    pub fn apply<T: Clone>(&self, seq: &[T]) -> Result<Vec<T>> {
        if seq.len() != self.0.len() {
            return Err(Error::InvalidPermutation(format!(
                "permutation of {} applied to {} items",
                self.0.len(),
                seq.len()
            )));
        }
        Ok(self.0.iter().map(|&k| seq[k].clone()).collect())
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Permutation::new(v)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Vec<usize> {
        p.0
    }
}

/// All permutations of `0..n` in lexicographic order.
pub fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                go(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::with_capacity(n), &mut vec![false; n], &mut out);
    out
}

/// Reorders `seq` by `pi` (a raw position map), validating bijectivity.
pub fn permute<T: Clone>(seq: &[T], pi: &[usize]) -> Result<Vec<T>> {
    Permutation::new(pi.to_vec())?.apply(seq)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasEntry {
    #[serde(flatten)]
    pub basis: MeasurementBasis,
    pub outcome: Spin,
}

/// Per-particle measurement log of one party; `None` for unmeasured particles.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MeasRecord {
    pub entries: Vec<Option<MeasEntry>>,
}

impl MeasRecord {
    pub fn with_len(n: usize) -> Self {
        Self { entries: vec![None; n] }
    }

    /// z outcomes, for `sz_total`.
    pub fn z_outcomes(&self) -> Vec<Option<Spin>> {
        self.entries
            .iter()
            .map(|e| match e {
                Some(MeasEntry { basis: MeasurementBasis::Z, outcome }) => Some(*outcome),
                _ => None,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{density_from_ensemble, max_abs_diff, DensityMatrix, TOL};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bell_amplitudes() {
        let h = FRAC_1_SQRT_2;
        let zp = bell(BellLabel::new(Bit::Zero, Sign::Plus));
        let om = bell(BellLabel::new(Bit::One, Sign::Minus));
        for (a, e) in zp.amplitudes().iter().zip([0.0, h, h, 0.0]) {
            assert!((a - real(e)).norm() < 1e-15);
        }
        for (a, e) in om.amplitudes().iter().zip([h, 0.0, 0.0, -h]) {
            assert!((a - real(e)).norm() < 1e-15);
        }
    }

    #[test]
    fn bell_states_are_orthonormal() {
        let all = BellLabel::all();
        for (i, a) in all.iter().enumerate() {
            for (j, b) in all.iter().enumerate() {
                let ip = bell(*a).inner(&bell(*b));
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((ip - real(expect)).norm() < TOL);
            }
        }
    }

    #[test]
    fn xy_eigenstates() {
        let x_up = xy_eigenstate(Axis::new(0.0), Spin::Up);
        assert!((x_up.amplitudes()[0] - real(FRAC_1_SQRT_2)).norm() < 1e-15);
        assert!((x_up.amplitudes()[1] - real(FRAC_1_SQRT_2)).norm() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let up_z = z_eigenstate(Spin::Up);
        for _ in 0..100 {
            let axis = Axis::random(&mut rng);
            let (u, d) = (xy_eigenstate(axis, Spin::Up), xy_eigenstate(axis, Spin::Down));
            assert!(u.inner(&d).norm() < TOL);
            assert!((u.inner(&up_z).norm_sqr() - 0.5).abs() < TOL);
            // eigenvector of cos θ σx + sin θ σy with eigenvalue +1
            let op = crate::linalg::pauli_x().scale(axis.theta().cos()) + crate::linalg::pauli_y().scale(axis.theta().sin());
            let image = &op * u.amplitudes();
            assert!((image - u.amplitudes()).norm() < TOL);
        }
    }

    #[test]
    fn z_eigenstates_measured_in_xy_are_even() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let basis = MeasurementBasis::Xy { axis: Axis::random(&mut rng) };
            for spin in [Spin::Up, Spin::Down] {
                let probs =
                    crate::linalg::outcome_probabilities(&z_eigenstate(spin), &[0], &basis.projectors()).unwrap();
                assert!((probs[0] - 0.5).abs() < TOL && (probs[1] - 0.5).abs() < TOL);
            }
        }
    }

    #[test]
    fn axis_normalisation_and_equality() {
        assert!(Axis::new(-0.5).approx_eq(Axis::new(TAU - 0.5)));
        assert!(Axis::new(0.0).approx_eq(Axis::new(TAU)));
        assert!(!Axis::new(0.0).approx_eq(Axis::new(1e-9)));
        assert!(Axis::new(0.3).opposite().opposite().approx_eq(Axis::new(0.3)));
    }

    #[test]
    fn singlet_partner_collapses_to_opposite_eigenstate() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let axis = Axis::random(&mut rng);
            for alpha in [Spin::Up, Spin::Down] {
                let got = partner_state(BellLabel::new(Bit::Zero, Sign::Minus), MeasurementBasis::Xy { axis }, alpha);
                assert!(got.phase_distance(&xy_eigenstate(axis, alpha.flip())).0 < TOL);
                let got = partner_state(BellLabel::new(Bit::Zero, Sign::Plus), MeasurementBasis::Xy { axis }, alpha);
                assert!(got.phase_distance(&xy_eigenstate(axis, alpha)).0 < TOL);
                let got = partner_state(BellLabel::new(Bit::One, Sign::Plus), MeasurementBasis::Xy { axis }, alpha);
                assert!(got.phase_distance(&xy_eigenstate(Axis::new(-axis.theta()), alpha)).0 < TOL);
            }
        }
    }

    #[test]
    fn commit_sequence_signs_are_fair() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let seq = build_commit_sequence(Bit::One, 10_000, &mut rng).unwrap();
        let plus = seq.pairs.iter().filter(|p| p.label.sign == Sign::Plus).count() as f64;
        let se = (0.25f64 / 10_000.0).sqrt();
        assert!((plus / 10_000.0 - 0.5).abs() < 3.0 * se);
        assert!(seq.pairs.iter().all(|p| p.label.bit == Bit::One));
        assert!(build_commit_sequence(Bit::One, 0, &mut rng).is_err());
    }

    #[test]
    fn zero_commitments_have_vanishing_sz() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let z = MeasurementBasis::Z.projectors();
        for _ in 0..50 {
            let seq = build_commit_sequence(Bit::Zero, 4, &mut rng).unwrap();
            let mut psi = seq.joint();
            let mut outcomes = vec![];
            for q in 0..8 {
                let m = crate::linalg::measure(&psi, &[q], &z, &mut rng).unwrap();
                outcomes.push(Some(Spin::from_index(m.outcome)));
                psi = m.post_state;
            }
            assert_eq!(sz_total(&outcomes).unwrap(), 0);
        }
    }

    #[test]
    fn z_product_ensembles_match_bell_mixtures_single_pair() {
        let e0 = z_product_ensemble(Bit::Zero, 1).unwrap();
        let up_down = z_eigenstate(Spin::Up).kron(&z_eigenstate(Spin::Down));
        let down_up = z_eigenstate(Spin::Down).kron(&z_eigenstate(Spin::Up));
        assert_eq!(e0.members()[0].0, up_down);
        assert_eq!(e0.members()[1].0, down_up);
        let e1 = z_product_ensemble(Bit::One, 1).unwrap();
        let up_up = z_eigenstate(Spin::Up).kron(&z_eigenstate(Spin::Up));
        assert_eq!(e1.members()[0].0, up_up);
        for b in [Bit::Zero, Bit::One] {
            let bell_mix = density_from_ensemble(&commit_ensemble(b, 1).unwrap());
            let z_mix = density_from_ensemble(&z_product_ensemble(b, 1).unwrap());
            assert!(max_abs_diff(bell_mix.entries(), z_mix.entries()) < TOL);
        }
    }

    #[test]
    fn sz_examples() {
        use Spin::*;
        assert_eq!(sz_total(&[Some(Up), Some(Down)]).unwrap(), 0);
        assert_eq!(sz_total(&[Some(Up), Some(Up), Some(Up), Some(Up)]).unwrap(), 4);
        assert_eq!(sz_total(&[Some(Up), None]), Err(Error::Unmeasured(1)));
    }

    #[test]
    fn permutations() {
        let seq = vec!['a', 'b', 'c', 'd'];
        assert_eq!(permute(&seq, &[0, 1, 2, 3]).unwrap(), seq);
        let p = Permutation::new(vec![2, 0, 3, 1]).unwrap();
        let shuffled = p.apply(&seq).unwrap();
        assert_eq!(shuffled, vec!['c', 'a', 'd', 'b']);
        assert_eq!(p.inverse().apply(&shuffled).unwrap(), seq);
        assert!(permute(&seq, &[0, 0, 1, 2]).is_err());
        assert!(permute(&seq, &[0, 1, 2]).is_err());
        assert!(permute(&seq, &[0, 1, 2, 4]).is_err());
    }

    #[test]
    fn permuted_pair_density_is_swap_conjugation() {
        let psi = xy_eigenstate(Axis::new(0.4), Spin::Up).kron(&z_eigenstate(Spin::Down));
        let rho = DensityMatrix::from_pure(&psi);
        let swapped_state = z_eigenstate(Spin::Down).kron(&xy_eigenstate(Axis::new(0.4), Spin::Up));
        let got = rho.permute_factors(&[1, 0]).unwrap();
        assert!(max_abs_diff(got.entries(), DensityMatrix::from_pure(&swapped_state).entries()) < TOL);
    }

    #[test]
    fn bit_serde_is_numeric() {
        assert_eq!(serde_json::to_string(&Bit::One).unwrap(), "1");
        assert_eq!(serde_json::from_str::<Bit>("0").unwrap(), Bit::Zero);
        assert!(serde_json::from_str::<Bit>("2").is_err());
    }
}

//! Dense complex linear algebra on small tensor-product Hilbert spaces.
//!
//! States carry an ordered list of factor dimensions. Amplitudes are stored
//! row-major over the factors, so the first factor is the most significant
//! digit of the flat basis index.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

/// Complex amplitude.
pub type C64 = Complex64;

/// Dense complex matrix used for operators and density matrices.
pub type CMatrix = DMatrix<C64>;

/// Tolerance for exact-physics identities.
pub const TOL: f64 = 1e-9;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

fn product(dims: &[usize]) -> usize {
    dims.iter().product()
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut out = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        out[k] = out[k + 1] * dims[k + 1];
    }
    out
}

/// Flat-index map for a factor reordering where new factor `j` is old factor
/// `order[j]`. Entry `i` holds the new position of old basis index `i`.
fn permutation_index_map(dims: &[usize], order: &[usize]) -> Vec<usize> {
    let old_strides = strides(dims);
    let new_dims: Vec<usize> = order.iter().map(|&k| dims[k]).collect();
    let new_strides = strides(&new_dims);
    // position of old factor k in the new ordering
    let mut new_pos = vec![0; dims.len()];
    for (j, &k) in order.iter().enumerate() {
        new_pos[k] = j;
    }
    (0..product(dims))
        .map(|i| {
            (0..dims.len())
                .map(|k| ((i / old_strides[k]) % dims[k]) * new_strides[new_pos[k]])
                .sum()
        })
        .collect()
}

fn check_factor_set(set: &[usize], nfactors: usize) -> Result<()> {
    let mut seen = vec![false; nfactors];
    for &k in set {
        if k >= nfactors {
            return Err(Error::InvalidFactors(format!(
                "factor {k} out of range for {nfactors} factors"
            )));
        }
        if seen[k] {
            return Err(Error::InvalidFactors(format!("factor {k} listed twice")));
        }
        seen[k] = true;
    }
    Ok(())
}

/// Factor order placing `front` first, then the remaining factors ascending.
fn front_order(front: &[usize], nfactors: usize) -> Vec<usize> {
    let mut order = front.to_vec();
    order.extend((0..nfactors).filter(|k| !front.contains(k)));
    order
}

fn inverse_order(order: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; order.len()];
    for (j, &k) in order.iter().enumerate() {
        inv[k] = j;
    }
    inv
}

fn is_finite(z: &C64) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Largest entrywise deviation of `u^† u` from the identity.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    let prod = u.adjoint() * u;
    max_abs_diff(&prod, &CMatrix::identity(u.nrows(), u.ncols()))
}

/// Pure state on a tensor product of finite-dimensional factors.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    dims: Vec<usize>,
    amps: DVector<C64>,
}

impl StateVector {
    /// Validates dimensions, finiteness and normalisation.
    pub fn new(dims: Vec<usize>, amps: Vec<C64>) -> Result<Self> {
        let state = Self::from_parts(dims, DVector::from_vec(amps))?;
        let norm = state.norm();
        if (norm - 1.0).abs() > TOL {
            return Err(Error::InvalidState(format!("norm {norm} differs from 1")));
        }
        Ok(state)
    }

    /// Builds a state and rescales it to unit norm.
    pub fn normalized(dims: Vec<usize>, amps: Vec<C64>) -> Result<Self> {
        let mut state = Self::from_parts(dims, DVector::from_vec(amps))?;
        let norm = state.norm();
        if norm < 1e-300 {
            return Err(Error::InvalidState("zero vector".into()));
        }
        state.amps.unscale_mut(norm);
        Ok(state)
    }

    fn from_parts(dims: Vec<usize>, amps: DVector<C64>) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::InvalidState("zero-dimensional factor".into()));
        }
        if product(&dims) != amps.len() {
            return Err(Error::DimensionMismatch(format!(
                "dims {dims:?} need {} amplitudes, got {}",
                product(&dims),
                amps.len()
            )));
        }
        if !amps.iter().all(is_finite) {
            return Err(Error::InvalidState("non-finite amplitude".into()));
        }
        Ok(Self { dims, amps })
    }

    /// Computational basis state `|index⟩` of a single factor of size `dim`.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut amps = DVector::zeros(dim);
        amps[index] = ONE;
        Self { dims: vec![dim], amps }
    }

    /// The one-dimensional trivial state, neutral element of `kron`.
    pub fn unit() -> Self {
        Self { dims: vec![], amps: DVector::from_element(1, ONE) }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps.dotc(&other.amps)
    }

    pub fn kron(&self, other: &StateVector) -> StateVector {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        StateVector { dims, amps: self.amps.kronecker(&other.amps) }
    }

    /// Reorders factors so that new factor `j` is old factor `order[j]`.
    pub fn permute_factors(&self, order: &[usize]) -> Result<StateVector> {
        if order.len() != self.dims.len() {
            return Err(Error::InvalidFactors("order length differs from factor count".into()));
        }
        check_factor_set(order, self.dims.len())?;
        let map = permutation_index_map(&self.dims, order);
        let mut amps = DVector::zeros(self.dim());
        for (i, &j) in map.iter().enumerate() {
            amps[j] = self.amps[i];
        }
        Ok(StateVector { dims: order.iter().map(|&k| self.dims[k]).collect(), amps })
    }

    /// Distance to `other` after removing the best global phase, together with
    /// the phase `e^{iφ}` maximising `|⟨self|other⟩|`.
    pub fn phase_distance(&self, other: &StateVector) -> (f64, C64) {
        let overlap = self.inner(other);
        let phase = if overlap.norm() < 1e-300 { ONE } else { overlap / overlap.norm() };
        ((&self.amps * phase - &other.amps).norm(), phase)
    }

    /// Contracts factor `factor` with `⟨bra|`, dropping it. Returns the Born
    /// weight of that outcome and the normalised remainder, or `None` when
    /// the weight vanishes.
    pub fn condition(&self, factor: usize, bra: &StateVector) -> Result<Option<(f64, StateVector)>> {
        check_factor_set(&[factor], self.dims.len())?;
        if bra.dim() != self.dims[factor] {
            return Err(Error::DimensionMismatch("bra does not match factor".into()));
        }
        let order = front_order(&[factor], self.dims.len());
        let moved = self.permute_factors(&order)?;
        let d = self.dims[factor];
        let rest = self.dim() / d;
        let mut out: DVector<C64> = DVector::zeros(rest);
        for x in 0..d {
            let c = bra.amps[x].conj();
            for r in 0..rest {
                out[r] += c * moved.amps[x * rest + r];
            }
        }
        let weight = out.norm_squared();
        if weight < 1e-24 {
            return Ok(None);
        }
        out.unscale_mut(weight.sqrt());
        Ok(Some((weight, StateVector { dims: moved.dims[1..].to_vec(), amps: out })))
    }

    /// Applies `op` to the listed factors without any unitarity check.
    /// The result is not renormalised.
    fn apply_raw(&self, op: &CMatrix, targets: &[usize]) -> Result<DVector<C64>> {
        check_factor_set(targets, self.dims.len())?;
        let dt: usize = targets.iter().map(|&k| self.dims[k]).product();
        if op.nrows() != dt || op.ncols() != dt {
            return Err(Error::DimensionMismatch(format!(
                "operator is {}x{}, targets span {dt}",
                op.nrows(),
                op.ncols()
            )));
        }
        let order = front_order(targets, self.dims.len());
        let moved = self.permute_factors(&order)?;
        let rest = self.dim() / dt;
        let block = DMatrix::from_fn(dt, rest, |a, r| moved.amps[a * rest + r]);
        let result = op * block;
        let mut amps = DVector::zeros(self.dim());
        for a in 0..dt {
            for r in 0..rest {
                amps[a * rest + r] = result[(a, r)];
            }
        }
        let back = StateVector { dims: moved.dims, amps }.permute_factors(&inverse_order(&order))?;
        Ok(back.amps)
    }

    /// Squared norm of `(P ⊗ I)|self⟩`.
    pub fn born_probability(&self, projector: &CMatrix, targets: &[usize]) -> Result<f64> {
        Ok(self.apply_raw(projector, targets)?.norm_squared())
    }
}

/// Mixed state on a tensor product of factors.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dims: Vec<usize>,
    entries: CMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(dims: Vec<usize>, entries: CMatrix) -> Result<Self> {
        let rho = Self::from_parts(dims, entries)?;
        rho.validate()?;
        Ok(rho)
    }

    pub(crate) fn from_parts(dims: Vec<usize>, entries: CMatrix) -> Result<Self> {
        let d = product(&dims);
        if entries.nrows() != d || entries.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "dims {dims:?} need a {d}x{d} matrix"
            )));
        }
        if !entries.iter().all(is_finite) {
            return Err(Error::InvalidState("non-finite entry".into()));
        }
        Ok(Self { dims, entries })
    }

    /// Checks the density-matrix invariants at tolerance [`TOL`].
    pub fn validate(&self) -> Result<()> {
        let herm = max_abs_diff(&self.entries, &self.entries.adjoint());
        if herm > TOL {
            return Err(Error::InvalidState(format!("not Hermitian ({herm:.3e})")));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > TOL {
            return Err(Error::InvalidState(format!("trace {tr}")));
        }
        let min = hermitian_eigenvalues(&self.entries).iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(())
    }

    pub fn from_pure(psi: &StateVector) -> Self {
        Self { dims: psi.dims.clone(), entries: &psi.amps * psi.amps.adjoint() }
    }

    /// Maximally mixed state on the given factors.
    pub fn maximally_mixed(dims: Vec<usize>) -> Self {
        let d = product(&dims);
        Self { dims, entries: CMatrix::identity(d, d).unscale(d as f64) }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace().re
    }

    pub fn kron(&self, other: &DensityMatrix) -> DensityMatrix {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        DensityMatrix { dims, entries: self.entries.kronecker(&other.entries) }
    }

    /// Reorders factors so that new factor `j` is old factor `order[j]`;
    /// this is conjugation by the corresponding permutation operator.
    pub fn permute_factors(&self, order: &[usize]) -> Result<DensityMatrix> {
        if order.len() != self.dims.len() {
            return Err(Error::InvalidFactors("order length differs from factor count".into()));
        }
        check_factor_set(order, self.dims.len())?;
        let map = permutation_index_map(&self.dims, order);
        Ok(DensityMatrix {
            dims: order.iter().map(|&k| self.dims[k]).collect(),
            entries: self.permuted_entries(&map),
        })
    }

    pub(crate) fn permuted_entries(&self, map: &[usize]) -> CMatrix {
        let d = self.dim();
        let mut out = CMatrix::zeros(d, d);
        for j in 0..d {
            for i in 0..d {
                out[(map[i], map[j])] = self.entries[(i, j)];
            }
        }
        out
    }

    /// Convex combination `Σ w_i ρ_i` of states sharing one factor layout.
    pub fn mixture(parts: &[(f64, DensityMatrix)]) -> Result<DensityMatrix> {
        let first = parts.first().ok_or_else(|| Error::InvalidState("empty mixture".into()))?;
        let mut acc = CMatrix::zeros(first.1.dim(), first.1.dim());
        for (w, rho) in parts {
            if rho.dims != first.1.dims {
                return Err(Error::DimensionMismatch("mixture members differ in dims".into()));
            }
            acc += rho.entries.scale(*w);
        }
        Ok(DensityMatrix { dims: first.1.dims.clone(), entries: acc })
    }

    /// Rescales to unit trace.
    pub fn renormalized(mut self) -> Result<DensityMatrix> {
        let tr = self.trace();
        if tr <= 1e-300 {
            return Err(Error::InvalidState("zero trace".into()));
        }
        self.entries.unscale_mut(tr);
        Ok(self)
    }
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let herm = (m + m.adjoint()).unscale(2.0);
    let mut vals: Vec<f64> = SymmetricEigen::new(herm).eigenvalues.iter().cloned().collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    vals
}

/// Convex mixture of pure states, `{|φ_1⟩, …; q_1, …}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    members: Vec<(StateVector, f64)>,
}

impl Ensemble {
    pub fn new(members: Vec<(StateVector, f64)>) -> Result<Self> {
        let first = members.first().ok_or_else(|| Error::InvalidState("empty ensemble".into()))?;
        let dims = first.0.dims().to_vec();
        if members.iter().any(|(s, _)| s.dims() != dims.as_slice()) {
            return Err(Error::DimensionMismatch("ensemble members differ in dims".into()));
        }
        if members.iter().any(|(_, p)| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidState("probability outside [0, 1]".into()));
        }
        let total: f64 = members.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > TOL {
            return Err(Error::InvalidState(format!("probabilities sum to {total}")));
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[(StateVector, f64)] {
        &self.members
    }

    pub fn dims(&self) -> &[usize] {
        self.members[0].0.dims()
    }
}

/// `Σ q_i |φ_i⟩⟨φ_i|`.
pub fn density_from_ensemble(e: &Ensemble) -> DensityMatrix {
    let d = e.members[0].0.dim();
    let mut acc = CMatrix::zeros(d, d);
    for (psi, q) in &e.members {
        acc += (&psi.amps * psi.amps.adjoint()).scale(*q);
    }
    DensityMatrix { dims: e.dims().to_vec(), entries: acc }
}

/// Reduced density matrix on `keep`, in the listed order.
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    if keep.is_empty() {
        return Err(Error::EmptyKeep);
    }
    check_factor_set(keep, rho.dims.len())?;
    let order = front_order(keep, rho.dims.len());
    let moved = rho.permute_factors(&order)?;
    let dk: usize = keep.iter().map(|&k| rho.dims[k]).product();
    let dr = rho.dim() / dk;
    let reduced = CMatrix::from_fn(dk, dk, |a, b| {
        (0..dr).map(|r| moved.entries[(a * dr + r, b * dr + r)]).sum()
    });
    Ok(DensityMatrix { dims: keep.iter().map(|&k| rho.dims[k]).collect(), entries: reduced })
}

/// Partial trace of a pure state, skipping the outer product of the full vector.
pub fn reduced_state(psi: &StateVector, keep: &[usize]) -> Result<DensityMatrix> {
    if keep.is_empty() {
        return Err(Error::EmptyKeep);
    }
    check_factor_set(keep, psi.dims.len())?;
    let order = front_order(keep, psi.dims.len());
    let moved = psi.permute_factors(&order)?;
    let dk: usize = keep.iter().map(|&k| psi.dims[k]).product();
    let dr = psi.dim() / dk;
    let m = DMatrix::from_fn(dk, dr, |a, r| moved.amps[a * dr + r]);
    Ok(DensityMatrix { dims: moved.dims[..keep.len()].to_vec(), entries: &m * m.adjoint() })
}

/// Average of `P ρ P†` over every reordering `P` of the listed factors,
/// which must share one dimension. The other factors stay in place.
pub fn symmetrize(rho: &DensityMatrix, factors: &[usize], perms: &[Vec<usize>]) -> Result<DensityMatrix> {
    check_factor_set(factors, rho.dims.len())?;
    if factors.windows(2).any(|w| rho.dims[w[0]] != rho.dims[w[1]]) {
        return Err(Error::DimensionMismatch("symmetrised factors differ in dimension".into()));
    }
    if perms.is_empty() || perms.iter().any(|p| p.len() != factors.len()) {
        return Err(Error::InvalidFactors("one permutation entry per symmetrised factor required".into()));
    }
    let d = rho.dim();
    let mut acc = CMatrix::zeros(d, d);
    let mut order: Vec<usize> = (0..rho.dims.len()).collect();
    for p in perms {
        for (slot, &k) in factors.iter().zip(p) {
            order[*slot] = factors[k];
        }
        let map = permutation_index_map(&rho.dims, &order);
        for j in 0..d {
            for i in 0..d {
                acc[(map[i], map[j])] += rho.entries[(i, j)];
            }
        }
    }
    acc.unscale_mut(perms.len() as f64);
    Ok(DensityMatrix { dims: rho.dims.clone(), entries: acc })
}

/// `½ Σ |λ_i(r0 − r1)|`.
pub fn trace_distance(r0: &DensityMatrix, r1: &DensityMatrix) -> Result<f64> {
    if r0.dims != r1.dims {
        return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", r0.dims, r1.dims)));
    }
    let diff = &r0.entries - &r1.entries;
    let d: f64 = hermitian_eigenvalues(&diff).iter().map(|l| l.abs()).sum::<f64>() / 2.0;
    Ok(d.clamp(0.0, 1.0))
}

/// Bipartite Schmidt decomposition `Σ_k c_k |a_k⟩|b_k⟩`.
#[derive(Debug, Clone)]
pub struct SchmidtForm {
    pub coefficients: Vec<f64>,
    pub basis_a: Vec<StateVector>,
    pub basis_b: Vec<StateVector>,
}

impl SchmidtForm {
    /// `Σ_k c_k |a_k⟩|b_k⟩` with the A-side factors first.
    pub fn reconstruct(&self) -> StateVector {
        let mut acc: Option<StateVector> = None;
        for ((c, a), b) in self.coefficients.iter().zip(&self.basis_a).zip(&self.basis_b) {
            let mut term = a.kron(b);
            term.amps.scale_mut(*c);
            match acc.as_mut() {
                Some(s) => s.amps += term.amps,
                None => acc = Some(term),
            }
        }
        acc.expect("Schmidt form has at least one term")
    }
}

/// Singular values below this are dropped from Schmidt forms.
const SCHMIDT_CUTOFF: f64 = 1e-12;

fn bipartite_matrix(psi: &StateVector, cut_a: &[usize]) -> Result<(CMatrix, Vec<usize>, Vec<usize>)> {
    let n = psi.dims.len();
    if cut_a.is_empty() || cut_a.len() >= n {
        return Err(Error::InvalidFactors("cut must be a proper nonempty subset".into()));
    }
    check_factor_set(cut_a, n)?;
    let order = front_order(cut_a, n);
    let moved = psi.permute_factors(&order)?;
    let dims_a = moved.dims[..cut_a.len()].to_vec();
    let dims_b = moved.dims[cut_a.len()..].to_vec();
    let (da, db) = (product(&dims_a), product(&dims_b));
    let m = DMatrix::from_fn(da, db, |a, b| moved.amps[a * db + b]);
    Ok((m, dims_a, dims_b))
}

pub fn schmidt(psi: &StateVector, cut_a: &[usize]) -> Result<SchmidtForm> {
    let (m, dims_a, dims_b) = bipartite_matrix(psi, cut_a)?;
    let svd = m.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^†");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let mut form = SchmidtForm { coefficients: vec![], basis_a: vec![], basis_b: vec![] };
    for k in idx {
        let c = svd.singular_values[k];
        if c <= SCHMIDT_CUTOFF {
            continue;
        }
        form.coefficients.push(c);
        form.basis_a.push(StateVector { dims: dims_a.clone(), amps: u.column(k).into_owned() });
        form.basis_b.push(StateVector {
            dims: dims_b.clone(),
            amps: v_t.row(k).transpose().into_owned(),
        });
    }
    Ok(form)
}

/// Extends an orthonormal family to a basis of `C^dim` by Gram–Schmidt over
/// the computational basis vectors taken in index order.
pub fn complete_basis(vectors: &[DVector<C64>], dim: usize) -> Vec<DVector<C64>> {
    let mut basis: Vec<DVector<C64>> = vectors.to_vec();
    for e in 0..dim {
        if basis.len() == dim {
            break;
        }
        let mut v = DVector::zeros(dim);
        v[e] = ONE;
        for _ in 0..2 {
            for b in &basis {
                let c = b.dotc(&v);
                v -= b * c;
            }
        }
        let norm = v.norm();
        if norm > 1e-6 {
            basis.push(v.unscale(norm));
        }
    }
    basis
}

fn orthonormalize(vectors: &mut [DVector<C64>]) {
    for i in 0..vectors.len() {
        for j in 0..i {
            let c = vectors[j].dotc(&vectors[i]);
            let proj = &vectors[j] * c;
            vectors[i] -= proj;
        }
        let norm = vectors[i].norm();
        vectors[i].unscale_mut(norm);
    }
}

/// Unitary `U` on the factors `cut_a` with `(U ⊗ I)|psi0⟩ = |psi1⟩`.
///
/// Both states are expanded against the B-side Schmidt vectors of `psi0`,
/// which fixes the pairing inside degenerate Schmidt blocks; the unused
/// directions are completed in computational-basis order.
pub fn uhlmann_unitary(psi0: &StateVector, psi1: &StateVector, cut_a: &[usize]) -> Result<CMatrix> {
    if psi0.dims != psi1.dims {
        return Err(Error::DimensionMismatch("states differ in dims".into()));
    }
    let (m0, dims_a, _) = bipartite_matrix(psi0, cut_a)?;
    let (m1, _, _) = bipartite_matrix(psi1, cut_a)?;
    // Reduced states on B (up to transpose), compared directly.
    let rb0 = m0.adjoint() * &m0;
    let rb1 = m1.adjoint() * &m1;
    let distance = max_abs_diff(&rb0, &rb1);
    if distance > TOL {
        return Err(Error::NoLocalUnitary { distance });
    }
    let form = schmidt(psi0, cut_a)?;
    let da = product(&dims_a);
    let src: Vec<DVector<C64>> = form.basis_a.iter().map(|a| a.amps.clone()).collect();
    let mut dst: Vec<DVector<C64>> = form
        .coefficients
        .iter()
        .zip(&form.basis_b)
        .map(|(c, b)| (&m1 * b.amps.map(|z| z.conj())).unscale(*c))
        .collect();
    orthonormalize(&mut dst);
    let src = complete_basis(&src, da);
    let dst = complete_basis(&dst, da);
    let mut u = CMatrix::zeros(da, da);
    for (s, d) in src.iter().zip(&dst) {
        u += d * s.adjoint();
    }
    Ok(u)
}

/// `(U ⊗ I)|s⟩` for a unitary `U` on the listed factors.
pub fn apply_unitary(u: &CMatrix, targets: &[usize], s: &StateVector) -> Result<StateVector> {
    let deviation = unitarity_defect(u);
    if deviation > TOL {
        return Err(Error::NotUnitary { deviation });
    }
    let amps = s.apply_raw(u, targets)?;
    Ok(StateVector { dims: s.dims.clone(), amps })
}

/// Rank-one projectors onto an orthonormal family.
pub fn projectors_from_basis(basis: &[StateVector]) -> Vec<CMatrix> {
    basis.iter().map(|v| &v.amps * v.amps.adjoint()).collect()
}

fn check_projectors(projectors: &[CMatrix], dim: usize) -> Result<()> {
    if projectors.is_empty() {
        return Err(Error::IncompleteMeasurement("no projectors".into()));
    }
    let mut sum = CMatrix::zeros(dim, dim);
    for p in projectors {
        if p.nrows() != dim || p.ncols() != dim {
            return Err(Error::DimensionMismatch("projector size differs from targets".into()));
        }
        if max_abs_diff(p, &p.adjoint()) > TOL || max_abs_diff(&(p * p), p) > TOL {
            return Err(Error::IncompleteMeasurement("operator is not an orthogonal projector".into()));
        }
        sum += p;
    }
    let dev = max_abs_diff(&sum, &CMatrix::identity(dim, dim));
    if dev > TOL {
        return Err(Error::IncompleteMeasurement(format!("projectors sum off identity by {dev:.3e}")));
    }
    Ok(())
}

/// Outcome of a projective measurement.
#[derive(Debug, Clone)]
pub struct Measurement {
    pub outcome: usize,
    pub probability: f64,
    pub post_state: StateVector,
}

/// Born probabilities of each projector on the listed factors.
pub fn outcome_probabilities(s: &StateVector, targets: &[usize], projectors: &[CMatrix]) -> Result<Vec<f64>> {
    check_factor_set(targets, s.dims.len())?;
    let dt: usize = targets.iter().map(|&k| s.dims[k]).product();
    check_projectors(projectors, dt)?;
    projectors.iter().map(|p| s.born_probability(p, targets)).collect()
}

/// Projective measurement with Born-rule sampling. Zero-probability branches
/// are never returned.
pub fn measure<R: Rng + ?Sized>(
    s: &StateVector,
    targets: &[usize],
    projectors: &[CMatrix],
    rng: &mut R,
) -> Result<Measurement> {
    let probs = outcome_probabilities(s, targets, projectors)?;
    let total: f64 = probs.iter().sum();
    let r = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut outcome = None;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 1e-15 {
            continue;
        }
        acc += p;
        outcome = Some(i);
        if r < acc {
            break;
        }
    }
    let outcome = outcome.ok_or_else(|| Error::InvalidState("all outcomes have zero weight".into()))?;
    let mut amps = s.apply_raw(&projectors[outcome], targets)?;
    let probability = amps.norm_squared();
    amps.unscale_mut(probability.sqrt());
    Ok(Measurement { outcome, probability, post_state: StateVector { dims: s.dims.clone(), amps } })
}

/// `(P ⊗ I)|s⟩` renormalised.
pub fn project_state(s: &StateVector, targets: &[usize], projector: &CMatrix) -> Result<StateVector> {
    let amps = s.apply_raw(projector, targets)?;
    let norm = amps.norm();
    if norm < 1e-12 {
        return Err(Error::InvalidState("projection annihilates the state".into()));
    }
    Ok(StateVector { dims: s.dims.clone(), amps: amps.unscale(norm) })
}

/// Uniform-box random state, for tests and property checks.
pub fn random_state<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> StateVector {
    let d = product(dims);
    let amps: Vec<C64> = (0..d)
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    StateVector::normalized(dims.to_vec(), amps).expect("nonzero random vector")
}

/// Pauli matrices.
pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> CMatrix {
    let i = C64::new(0.0, 1.0);
    CMatrix::from_row_slice(2, 2, &[ZERO, -i, i, ZERO])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

/// `min_φ max_ij |a_ij − e^{iφ} b_ij|`.
///
/// Coarse scan over the circle followed by golden-section refinement of the
/// best bracket.
pub fn phase_minimized_sup_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    let cost = |phi: f64| {
        let ph = C64::from_polar(1.0, phi);
        a.iter().zip(b.iter()).map(|(x, y)| (x - ph * y).norm()).fold(0.0, f64::max)
    };
    const STEPS: usize = 4096;
    let step = std::f64::consts::TAU / STEPS as f64;
    let (best, _) = (0..STEPS)
        .map(|k| (k, cost(k as f64 * step)))
        .fold((0, f64::INFINITY), |acc, (k, c)| if c < acc.1 { (k, c) } else { acc });
    let (mut lo, mut hi) = ((best as f64 - 1.0) * step, (best as f64 + 1.0) * step);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..80 {
        let x1 = hi - g * (hi - lo);
        let x2 = lo + g * (hi - lo);
        if cost(x1) < cost(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    cost(best as f64 * step).min(cost((lo + hi) / 2.0))
}

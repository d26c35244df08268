//! Dense ground-truth simulation for small systems.
//!
//! Basis index `b` encodes qubit `q` in bit `q` (little-endian). Every routine
//! here refuses more than [`MAX_DENSE_QUBITS`] qubits.
//!
//! Hamiltonian evolution never time-steps: the Hamiltonian is split into the
//! connected blocks of its sparsity graph and each block is diagonalized once,
//! so `e^{-itH}` is exact up to eigensolver roundoff for any `t`.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use crate::error::{Error, Result};
use crate::pauli::{KahanSum, Pauli, PauliExpectation, PauliString, SparsePauliOp};
use crate::states::{ProductState, StabLabel};

pub type C64 = Complex<f64>;

pub const MAX_DENSE_QUBITS: usize = 12;

const ONE: C64 = C64::new(1.0, 0.0);
const ZERO: C64 = C64::new(0.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

pub(crate) fn check_qubits(n: usize) -> Result<()> {
    if n > MAX_DENSE_QUBITS {
        Err(Error::TooManyQubits { n, max: MAX_DENSE_QUBITS })
    } else {
        Ok(())
    }
}

/// `(x mask, z mask, number of Y letters)`; `P|d⟩ = i^{#Y} (-1)^{z·d} |d ⊕ x⟩`.
pub(crate) fn masks(p: &PauliString) -> (usize, usize, u32) {
    let (mut x, mut z, mut ny) = (0usize, 0usize, 0u32);
    for (q, l) in p.iter_support() {
        match l {
            Pauli::X => x |= 1 << q,
            Pauli::Y => {
                x |= 1 << q;
                z |= 1 << q;
                ny += 1;
            }
            Pauli::Z => z |= 1 << q,
            Pauli::I => {}
        }
    }
    (x, z, ny)
}

fn i_pow(k: u32) -> C64 {
    match k % 4 {
        0 => ONE,
        1 => I,
        2 => -ONE,
        _ => -I,
    }
}

#[inline]
fn parity(v: usize) -> f64 {
    if v.count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Dense matrix of a sparse Pauli operator.
pub fn operator_matrix(op: &SparsePauliOp) -> Result<DMatrix<C64>> {
    let n = op.num_qubits();
    check_qubits(n)?;
    let dim = 1usize << n;
    let mut m = DMatrix::<C64>::zeros(dim, dim);
    for (p, c) in op.iter() {
        let (x, z, ny) = masks(p);
        let ph = i_pow(ny) * c;
        for d in 0..dim {
            m[(d ^ x, d)] += ph * parity(z & d);
        }
    }
    Ok(m)
}

/// Normalized statevector on at most [`MAX_DENSE_QUBITS`] qubits.
#[derive(Clone, Debug)]
pub struct DenseState {
    n: usize,
    amps: DVector<C64>,
}

impl DenseState {
    pub fn new(n: usize, amps: DVector<C64>) -> Result<Self> {
        check_qubits(n)?;
        if amps.len() != 1 << n {
            return Err(Error::mismatch(1 << n, amps.len()));
        }
        let norm = amps.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::Domain(format!("statevector norm {norm} is not 1")));
        }
        Ok(DenseState { n, amps })
    }

    pub fn from_product(state: &ProductState) -> Result<Self> {
        let n = state.len();
        check_qubits(n)?;
        let singles: Vec<[C64; 2]> = state
            .qubits()
            .iter()
            .map(|v| {
                let a0 = ((1.0 + v[2]) / 2.0).max(0.0).sqrt();
                let s = ((1.0 - v[2]) / 2.0).max(0.0).sqrt();
                let phi = v[1].atan2(v[0]);
                [C64::new(a0, 0.0), C64::from_polar(s, phi)]
            })
            .collect();
        let amps = DVector::from_fn(1 << n, |b, _| {
            singles.iter().enumerate().fold(ONE, |acc, (q, a)| acc * a[(b >> q) & 1])
        });
        Ok(DenseState { n, amps })
    }

    /// Left `n/2` qubits hold the even-parity superposition of x-basis strings
    /// (an even number of `→`); the right half is `|→↓←↑…⟩`.
    pub fn ghz_rotating(n: usize) -> Result<Self> {
        check_qubits(n)?;
        if n < 2 {
            return Err(Error::Domain("ghz_rotating needs at least 2 qubits".into()));
        }
        let left = n / 2;
        let right = ProductState::rotating(n - left);
        let right_state = DenseState::from_product(&right)?;
        // x-basis string s (bit = 1 means ←) contributes Π_q ⟨b_q|s_q⟩ to amplitude b
        let dim_l = 1usize << left;
        let norm = (2.0f64).powi(left as i32 - 1).sqrt().recip();
        let mut left_amps = vec![ZERO; dim_l];
        for s in 0..dim_l {
            let arrows_right = left - s.count_ones() as usize;
            if !arrows_right.is_multiple_of(2) {
                continue;
            }
            for (b, amp) in left_amps.iter_mut().enumerate() {
                // ⟨0|±⟩ = 1/√2, ⟨1|±⟩ = ±1/√2
                let sign = parity(b & s);
                *amp += C64::new(norm * sign * (0.5f64).powf(left as f64 / 2.0), 0.0);
            }
        }
        let amps = DVector::from_fn(1 << n, |b, _| left_amps[b & (dim_l - 1)] * right_state.amps[b >> left]);
        DenseState::new(n, amps)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix { n: self.n, mat: &self.amps * self.amps.adjoint() }
    }

    pub fn expectation(&self, op: &SparsePauliOp) -> Result<f64> {
        op.expectation(self)
    }

    /// Born samples of measuring qubit `q` in `bases[q]`.
    pub fn born_sample<R: Rng + ?Sized>(&self, bases: &[Pauli], rng: &mut R) -> Result<Vec<StabLabel>> {
        if bases.len() != self.n {
            return Err(Error::mismatch(self.n, bases.len()));
        }
        let mut rotated = self.amps.clone();
        for (q, &b) in bases.iter().enumerate() {
            apply_single(&mut rotated, q, &basis_change(b)?);
        }
        let probs: Vec<f64> = rotated.iter().map(|a| a.norm_sqr()).collect();
        Ok(sample_sequential(&probs, bases, rng))
    }
}

impl PauliExpectation for DenseState {
    fn num_qubits(&self) -> usize {
        self.n
    }

    fn pauli_expectation(&self, p: &PauliString) -> f64 {
        let (x, z, ny) = masks(p);
        let mut acc = ZERO;
        for (d, a) in self.amps.iter().enumerate() {
            acc += self.amps[d ^ x].conj() * a * parity(z & d);
        }
        (acc * i_pow(ny)).re
    }
}

/// Density matrix on at most [`MAX_DENSE_QUBITS`] qubits.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    n: usize,
    mat: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn new(n: usize, mat: DMatrix<C64>) -> Result<Self> {
        check_qubits(n)?;
        let dim = 1usize << n;
        if mat.nrows() != dim || mat.ncols() != dim {
            return Err(Error::mismatch(dim, mat.nrows()));
        }
        Ok(DensityMatrix { n, mat })
    }

    pub fn maximally_mixed(n: usize) -> Result<Self> {
        check_qubits(n)?;
        let dim = 1usize << n;
        Ok(DensityMatrix { n, mat: DMatrix::identity(dim, dim) / C64::new(dim as f64, 0.0) })
    }

    pub fn from_product(state: &ProductState) -> Result<Self> {
        Ok(DenseState::from_product(state)?.density())
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn purity(&self) -> f64 {
        self.mat.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `Tr(O ρ)`; errors if the imaginary residue exceeds `1e-10`.
    pub fn expectation(&self, op: &SparsePauliOp) -> Result<f64> {
        if op.num_qubits() != self.n {
            return Err(Error::mismatch(self.n, op.num_qubits()));
        }
        let mut re = KahanSum::default();
        let mut im = KahanSum::default();
        for (p, c) in op.iter() {
            let v = self.complex_pauli_expectation(p) * c;
            re.add(v.re);
            im.add(v.im);
        }
        if im.value().abs() > 1e-10 {
            return Err(Error::Numeric(format!("expectation has imaginary part {}", im.value())));
        }
        Ok(re.value())
    }

    fn complex_pauli_expectation(&self, p: &PauliString) -> C64 {
        let (x, z, ny) = masks(p);
        let dim = 1usize << self.n;
        let mut acc = ZERO;
        for d in 0..dim {
            acc += self.mat[(d, d ^ x)] * parity(z & d);
        }
        acc * i_pow(ny)
    }

    /// Reduced state on `keep` (in the given order); the rest is traced out.
    pub fn reduced(&self, keep: &[usize]) -> Result<DensityMatrix> {
        for &q in keep {
            if q >= self.n {
                return Err(Error::Domain(format!("qubit {q} out of range")));
            }
        }
        let l = keep.len();
        let rest: Vec<usize> = (0..self.n).filter(|q| !keep.contains(q)).collect();
        let compose = |a: usize, e: usize| -> usize {
            let mut b = 0usize;
            for (j, &q) in keep.iter().enumerate() {
                b |= ((a >> j) & 1) << q;
            }
            for (j, &q) in rest.iter().enumerate() {
                b |= ((e >> j) & 1) << q;
            }
            b
        };
        let mut out = DMatrix::<C64>::zeros(1 << l, 1 << l);
        for e in 0..1usize << rest.len() {
            for a in 0..1usize << l {
                for c in 0..1usize << l {
                    out[(a, c)] += self.mat[(compose(a, e), compose(c, e))];
                }
            }
        }
        DensityMatrix::new(l, out)
    }

    /// `Tr(P ρ)` for all `4^n` Pauli strings, indexed by `x_mask | z_mask << n`.
    pub fn all_pauli_expectations(&self) -> Vec<f64> {
        let n = self.n;
        let dim = 1usize << n;
        let mut out = vec![0.0; dim * dim];
        let mut g = vec![ZERO; dim];
        for x in 0..dim {
            for (d, gd) in g.iter_mut().enumerate() {
                *gd = self.mat[(d, d ^ x)];
            }
            walsh_hadamard(&mut g);
            for z in 0..dim {
                let ny = (x & z).count_ones();
                out[x | (z << n)] = (g[z] * i_pow(ny)).re;
            }
        }
        out
    }

    pub fn born_sample<R: Rng + ?Sized>(&self, bases: &[Pauli], rng: &mut R) -> Result<Vec<StabLabel>> {
        if bases.len() != self.n {
            return Err(Error::mismatch(self.n, bases.len()));
        }
        let mut m = self.mat.clone();
        for (q, &b) in bases.iter().enumerate() {
            let u = basis_change(b)?;
            conjugate_single(&mut m, q, &u);
        }
        let probs: Vec<f64> = (0..m.nrows()).map(|b| m[(b, b)].re.max(0.0)).collect();
        Ok(sample_sequential(&probs, bases, rng))
    }
}

impl PauliExpectation for DensityMatrix {
    fn num_qubits(&self) -> usize {
        self.n
    }

    fn pauli_expectation(&self, p: &PauliString) -> f64 {
        self.complex_pauli_expectation(p).re
    }
}

fn walsh_hadamard(v: &mut [C64]) {
    let mut h = 1;
    while h < v.len() {
        for i in (0..v.len()).step_by(2 * h) {
            for j in i..i + h {
                let (a, b) = (v[j], v[j + h]);
                v[j] = a + b;
                v[j + h] = a - b;
            }
        }
        h *= 2;
    }
}

/// `γ*(ρ) = 2^{-L} Σ_{Q ∈ {X,Y,Z}^L} Tr(Q ρ)²`.
pub fn nonidentity_purity(rho: &DensityMatrix) -> f64 {
    let n = rho.num_qubits();
    let full = (1usize << n) - 1;
    let all = rho.all_pauli_expectations();
    let s: KahanSum = (0..all.len())
        .filter(|&idx| ((idx & full) | (idx >> n)) == full)
        .map(|idx| all[idx] * all[idx])
        .collect();
    s.value() / (1u64 << n) as f64
}

/// Unitary taking the `basis` eigenbasis to the computational basis (`+1 ↦ |0⟩`).
fn basis_change(basis: Pauli) -> Result<[[C64; 2]; 2]> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    match basis {
        Pauli::Z => Ok([[ONE, ZERO], [ZERO, ONE]]),
        Pauli::X => Ok([[C64::new(h, 0.0), C64::new(h, 0.0)], [C64::new(h, 0.0), C64::new(-h, 0.0)]]),
        // H S†
        Pauli::Y => Ok([[C64::new(h, 0.0), C64::new(0.0, -h)], [C64::new(h, 0.0), C64::new(0.0, h)]]),
        Pauli::I => Err(Error::Domain("measurement basis must be X, Y or Z".into())),
    }
}

fn apply_single(v: &mut DVector<C64>, q: usize, u: &[[C64; 2]; 2]) {
    let bit = 1usize << q;
    for b in 0..v.len() {
        if b & bit == 0 {
            let (a0, a1) = (v[b], v[b | bit]);
            v[b] = u[0][0] * a0 + u[0][1] * a1;
            v[b | bit] = u[1][0] * a0 + u[1][1] * a1;
        }
    }
}

/// `m ← U_q m U_q†`.
fn conjugate_single(m: &mut DMatrix<C64>, q: usize, u: &[[C64; 2]; 2]) {
    let bit = 1usize << q;
    let dim = m.nrows();
    for col in 0..dim {
        for b in 0..dim {
            if b & bit == 0 {
                let (a0, a1) = (m[(b, col)], m[(b | bit, col)]);
                m[(b, col)] = u[0][0] * a0 + u[0][1] * a1;
                m[(b | bit, col)] = u[1][0] * a0 + u[1][1] * a1;
            }
        }
    }
    for row in 0..dim {
        for b in 0..dim {
            if b & bit == 0 {
                let (a0, a1) = (m[(row, b)], m[(row, b | bit)]);
                m[(row, b)] = a0 * u[0][0].conj() + a1 * u[0][1].conj();
                m[(row, b | bit)] = a0 * u[1][0].conj() + a1 * u[1][1].conj();
            }
        }
    }
}

/// Draws bits qubit by qubit from conditional marginals of `probs`.
fn sample_sequential<R: Rng + ?Sized>(probs: &[f64], bases: &[Pauli], rng: &mut R) -> Vec<StabLabel> {
    let n = bases.len();
    let mut fixed = 0usize;
    let mut out = Vec::with_capacity(n);
    for q in 0..n {
        let low_mask = (1usize << q) - 1;
        let (mut p0, mut p1) = (0.0, 0.0);
        for (b, &p) in probs.iter().enumerate() {
            if b & low_mask == fixed {
                if b >> q & 1 == 0 {
                    p0 += p;
                } else {
                    p1 += p;
                }
            }
        }
        let bit = if rng.random::<f64>() * (p0 + p1) < p0 { 0 } else { 1 };
        fixed |= bit << q;
        out.push(StabLabel::from_basis(bases[q], bit == 0));
    }
    out
}

/// Hermitian eigendecomposition, using the real solver when the matrix is real.
pub fn hermitian_eigh(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    if m.iter().all(|a| a.im == 0.0) {
        let re = m.map(|a| a.re);
        let eig = SymmetricEigen::new(re);
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors.map(|a| C64::new(a, 0.0)))
    } else {
        let eig = SymmetricEigen::new(m.clone());
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    }
}

/// Largest `|λ|` of the dense operator.
pub fn spectral_norm(op: &SparsePauliOp) -> Result<f64> {
    let spec = BlockSpectrum::new(op)?;
    Ok(spec.blocks.iter().flat_map(|b| b.values.iter()).fold(0.0_f64, |m, v| m.max(v.abs())))
}

struct Block {
    indices: Vec<usize>,
    values: Vec<f64>,
    vectors: DMatrix<C64>,
}

/// Eigendecomposition of a Hamiltonian, block by block over the connected
/// components of its sparsity graph.
pub struct BlockSpectrum {
    n: usize,
    blocks: Vec<Block>,
}

impl BlockSpectrum {
    pub fn new(h: &SparsePauliOp) -> Result<Self> {
        let n = h.num_qubits();
        check_qubits(n)?;
        let dim = 1usize << n;
        let terms: Vec<(usize, usize, C64)> = h
            .iter()
            .map(|(p, c)| {
                let (x, z, ny) = masks(p);
                (x, z, i_pow(ny) * c)
            })
            .collect();

        let mut parent: Vec<usize> = (0..dim).collect();
        fn find(parent: &mut [usize], mut a: usize) -> usize {
            while parent[a] != a {
                parent[a] = parent[parent[a]];
                a = parent[a];
            }
            a
        }
        for &(x, _, _) in &terms {
            if x == 0 {
                continue;
            }
            for d in 0..dim {
                let (ra, rb) = (find(&mut parent, d), find(&mut parent, d ^ x));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut slot = vec![usize::MAX; dim];
        for d in 0..dim {
            let r = find(&mut parent, d);
            if slot[r] == usize::MAX {
                slot[r] = groups.len();
                groups.push(Vec::new());
            }
            groups[slot[r]].push(d);
        }

        let mut local = vec![0usize; dim];
        let mut blocks = Vec::with_capacity(groups.len());
        for indices in groups {
            for (j, &d) in indices.iter().enumerate() {
                local[d] = j;
            }
            let size = indices.len();
            let mut m = DMatrix::<C64>::zeros(size, size);
            for (j, &d) in indices.iter().enumerate() {
                for &(x, z, ph) in &terms {
                    m[(local[d ^ x], j)] += ph * parity(z & d);
                }
            }
            let (values, vectors) = hermitian_eigh(&m);
            blocks.push(Block { indices, values, vectors });
        }
        Ok(BlockSpectrum { n, blocks })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.blocks.iter().flat_map(|b| b.values.iter().copied()).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// `e^{-itH} |ψ⟩`.
    pub fn evolve_state(&self, psi: &DenseState, t: f64) -> Result<DenseState> {
        if psi.n != self.n {
            return Err(Error::mismatch(self.n, psi.n));
        }
        let mut out = DVector::<C64>::zeros(psi.amps.len());
        for b in &self.blocks {
            let local = DVector::from_iterator(b.indices.len(), b.indices.iter().map(|&d| psi.amps[d]));
            let mut coeffs = b.vectors.ad_mul(&local);
            for (c, &lam) in coeffs.iter_mut().zip(&b.values) {
                *c *= C64::from_polar(1.0, -lam * t);
            }
            let back = &b.vectors * coeffs;
            for (j, &d) in b.indices.iter().enumerate() {
                out[d] = back[j];
            }
        }
        Ok(DenseState { n: self.n, amps: out })
    }

    /// Full `e^{-itH}`.
    pub fn unitary(&self, t: f64) -> DMatrix<C64> {
        let dim = 1usize << self.n;
        let mut u = DMatrix::<C64>::zeros(dim, dim);
        for b in &self.blocks {
            let mut scaled = b.vectors.clone();
            for (k, &lam) in b.values.iter().enumerate() {
                let ph = C64::from_polar(1.0, -lam * t);
                for v in scaled.column_mut(k).iter_mut() {
                    *v *= ph;
                }
            }
            let blk = scaled * b.vectors.adjoint();
            for (i, &di) in b.indices.iter().enumerate() {
                for (j, &dj) in b.indices.iter().enumerate() {
                    u[(di, dj)] = blk[(i, j)];
                }
            }
        }
        u
    }
}

/// A CPTP map on at most [`MAX_DENSE_QUBITS`] qubits.
pub enum DenseChannel {
    Identity(usize),
    Unitary(DMatrix<C64>),
    Hamiltonian { spectrum: BlockSpectrum, t: f64 },
    Kraus(Vec<DMatrix<C64>>),
}

impl DenseChannel {
    pub fn unitary(u: DMatrix<C64>) -> Result<Self> {
        let dim = u.nrows();
        if u.ncols() != dim || !dim.is_power_of_two() {
            return Err(Error::Domain("unitary must be square with power-of-two dimension".into()));
        }
        let err = (u.adjoint() * &u - DMatrix::<C64>::identity(dim, dim)).iter().fold(0.0_f64, |m, a| m.max(a.norm()));
        if err > 1e-8 {
            return Err(Error::Domain(format!("matrix is not unitary (deviation {err:.3e})")));
        }
        check_qubits(dim.trailing_zeros() as usize)?;
        Ok(DenseChannel::Unitary(u))
    }

    pub fn hamiltonian(h: &SparsePauliOp, t: f64) -> Result<Self> {
        Ok(DenseChannel::Hamiltonian { spectrum: BlockSpectrum::new(h)?, t })
    }

    pub fn kraus(ops: Vec<DMatrix<C64>>) -> Result<Self> {
        let first = ops.first().ok_or_else(|| Error::Domain("empty Kraus list".into()))?;
        let dim = first.nrows();
        if !dim.is_power_of_two() || ops.iter().any(|k| k.nrows() != dim || k.ncols() != dim) {
            return Err(Error::Domain("Kraus operators must share a square power-of-two shape".into()));
        }
        check_qubits(dim.trailing_zeros() as usize)?;
        let mut sum = DMatrix::<C64>::zeros(dim, dim);
        for k in &ops {
            sum += k.adjoint() * k;
        }
        let err = (sum - DMatrix::<C64>::identity(dim, dim)).iter().fold(0.0_f64, |m, a| m.max(a.norm()));
        if err > 1e-8 {
            return Err(Error::Domain(format!("Kraus list is not trace preserving (deviation {err:.3e})")));
        }
        Ok(DenseChannel::Kraus(ops))
    }

    pub fn num_qubits(&self) -> usize {
        match self {
            DenseChannel::Identity(n) => *n,
            DenseChannel::Unitary(u) => u.nrows().trailing_zeros() as usize,
            DenseChannel::Hamiltonian { spectrum, .. } => spectrum.n,
            DenseChannel::Kraus(k) => k[0].nrows().trailing_zeros() as usize,
        }
    }

    /// Output state for a pure input, when the channel keeps states pure.
    pub fn evolve_pure(&self, psi: &DenseState) -> Result<Option<DenseState>> {
        if psi.n != self.num_qubits() {
            return Err(Error::mismatch(self.num_qubits(), psi.n));
        }
        Ok(match self {
            DenseChannel::Identity(_) => Some(psi.clone()),
            DenseChannel::Unitary(u) => Some(DenseState { n: psi.n, amps: u * &psi.amps }),
            DenseChannel::Hamiltonian { spectrum, t } => Some(spectrum.evolve_state(psi, *t)?),
            DenseChannel::Kraus(_) => None,
        })
    }

    pub fn evolve(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.n != self.num_qubits() {
            return Err(Error::mismatch(self.num_qubits(), rho.n));
        }
        let mat = match self {
            DenseChannel::Identity(_) => rho.mat.clone(),
            DenseChannel::Unitary(u) => u * &rho.mat * u.adjoint(),
            DenseChannel::Hamiltonian { spectrum, t } => {
                let u = spectrum.unitary(*t);
                &u * &rho.mat * u.adjoint()
            }
            DenseChannel::Kraus(ks) => {
                let mut acc = DMatrix::<C64>::zeros(rho.mat.nrows(), rho.mat.ncols());
                for k in ks {
                    acc += k * &rho.mat * k.adjoint();
                }
                acc
            }
        };
        Ok(DensityMatrix { n: rho.n, mat })
    }

    /// Output of a product-state input, pure when possible.
    pub fn output(&self, input: &ProductState) -> Result<OutputState> {
        let psi = DenseState::from_product(input)?;
        match self.evolve_pure(&psi)? {
            Some(out) => Ok(OutputState::Pure(out)),
            None => Ok(OutputState::Mixed(self.evolve(&psi.density())?)),
        }
    }
}

pub enum OutputState {
    Pure(DenseState),
    Mixed(DensityMatrix),
}

impl OutputState {
    pub fn born_sample<R: Rng + ?Sized>(&self, bases: &[Pauli], rng: &mut R) -> Result<Vec<StabLabel>> {
        match self {
            OutputState::Pure(s) => s.born_sample(bases, rng),
            OutputState::Mixed(m) => m.born_sample(bases, rng),
        }
    }

    pub fn pauli_expectation(&self, p: &PauliString) -> f64 {
        match self {
            OutputState::Pure(s) => s.pauli_expectation(p),
            OutputState::Mixed(m) => m.pauli_expectation(p),
        }
    }
}

/// Single-qubit rotation `e^{-iθ P/2}` on qubit `q` of `n`, as a full unitary.
pub fn single_qubit_rotation(n: usize, q: usize, axis: Pauli, theta: f64) -> Result<DMatrix<C64>> {
    check_qubits(n)?;
    let p = SparsePauliOp::from_terms(n, [(PauliString::single(n, q, axis), 1.0)])?;
    let pm = operator_matrix(&p)?;
    let dim = 1usize << n;
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    Ok(DMatrix::<C64>::identity(dim, dim) * C64::new(c, 0.0) - pm * C64::new(0.0, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::all_strings_up_to_weight;
    use crate::rng::seeded;
    use crate::states::{sample_haar_product, sample_stab_product};

    fn op(terms: &[(&str, f64)]) -> SparsePauliOp {
        SparsePauliOp::from_labels(terms).unwrap()
    }

    #[test]
    fn product_expectation_matches_dense() {
        let mut rng = seeded(1);
        for _ in 0..10 {
            let s = sample_haar_product(6, &mut rng);
            let d = DenseState::from_product(&s).unwrap();
            let rho = d.density();
            for p in all_strings_up_to_weight(6, 3).iter().step_by(7) {
                let a = s.pauli_expectation(p);
                assert!((a - d.pauli_expectation(p)).abs() < 1e-10);
                assert!((a - rho.pauli_expectation(p)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn operator_matrix_single_qubit() {
        let m = operator_matrix(&op(&[("Y", 1.0)])).unwrap();
        assert_eq!(m[(1, 0)], I);
        assert_eq!(m[(0, 1)], -I);
    }

    #[test]
    fn spectral_norm_of_x_plus_z() {
        assert!((spectral_norm(&op(&[("Z", 1.0)])).unwrap() - 1.0).abs() < 1e-12);
        assert!((spectral_norm(&op(&[("X", 1.0), ("Z", 1.0)])).unwrap() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn dense_cap_enforced() {
        assert!(matches!(DensityMatrix::maximally_mixed(13), Err(Error::TooManyQubits { .. })));
        assert!(BlockSpectrum::new(&SparsePauliOp::zero(13)).is_err());
    }

    #[test]
    fn expectation_basics() {
        let rho = DensityMatrix::maximally_mixed(3).unwrap();
        assert!((rho.expectation(&op(&[("III", 1.0)])).unwrap() - 1.0).abs() < 1e-14);
        assert!(rho.expectation(&op(&[("XZI", 0.3), ("ZZZ", -1.0)])).unwrap().abs() < 1e-14);
    }

    #[test]
    fn z_rotation_on_plus() {
        // e^{-itZ}|+⟩ has ⟨X⟩ = cos 2t and ⟨Y⟩ = sin 2t
        let ch = DenseChannel::hamiltonian(&op(&[("Z", 1.0)]), 0.3).unwrap();
        let plus = ProductState::from_labels(&[StabLabel::XPlus]);
        let rho = ch.evolve(&DensityMatrix::from_product(&plus).unwrap()).unwrap();
        assert!((rho.pauli_expectation(&"X".parse().unwrap()) - (0.6f64).cos()).abs() < 1e-12);
        assert!((rho.pauli_expectation(&"Y".parse().unwrap()) - (0.6f64).sin()).abs() < 1e-12);
        assert!((rho.trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unitary_composes() {
        let h = op(&[("XX", 0.7), ("ZI", 0.3), ("IY", -0.4), ("YZ", 0.2)]);
        let spec = BlockSpectrum::new(&h).unwrap();
        let u1 = spec.unitary(1.3);
        let u2 = spec.unitary(2.6);
        let err = (&u1 * &u1 - u2).iter().fold(0.0_f64, |m, a| m.max(a.norm()));
        assert!(err < 1e-8);
    }

    #[test]
    fn block_spectrum_matches_full() {
        let h = op(&[("XXI", 0.25), ("YYI", 0.25), ("IXX", 0.25), ("IYY", 0.25), ("ZII", 0.5), ("IIZ", -0.3)]);
        let spec = BlockSpectrum::new(&h).unwrap();
        assert!(spec.blocks.len() > 1);
        let (mut full, _) = hermitian_eigh(&operator_matrix(&h).unwrap());
        full.sort_by(f64::total_cmp);
        for (a, b) in full.iter().zip(spec.eigenvalues()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn channel_validation() {
        let bad = DMatrix::<C64>::identity(2, 2) * C64::new(2.0, 0.0);
        assert!(DenseChannel::unitary(bad.clone()).is_err());
        assert!(DenseChannel::kraus(vec![bad]).is_err());
        let p = 0.3f64;
        let k0 = DMatrix::<C64>::identity(2, 2) * C64::new((1.0 - p).sqrt(), 0.0);
        let k1 = operator_matrix(&op(&[("Z", p.sqrt())])).unwrap();
        let ch = DenseChannel::kraus(vec![k0, k1]).unwrap();
        let plus = DensityMatrix::from_product(&ProductState::from_labels(&[StabLabel::XPlus])).unwrap();
        let out = ch.evolve(&plus).unwrap();
        assert!((out.trace() - 1.0).abs() < 1e-12);
        assert!((out.pauli_expectation(&"X".parse().unwrap()) - (1.0 - 2.0 * p)).abs() < 1e-12);
    }

    #[test]
    fn born_sample_deterministic_cases() {
        let mut rng = seeded(2);
        let zero = DenseState::from_product(&ProductState::all_zero(1)).unwrap();
        for _ in 0..50 {
            assert_eq!(zero.born_sample(&[Pauli::Z], &mut rng).unwrap(), vec![StabLabel::ZPlus]);
        }
        let yplus = DenseState::from_product(&ProductState::from_labels(&[StabLabel::YPlus])).unwrap();
        for _ in 0..50 {
            assert_eq!(yplus.born_sample(&[Pauli::Y], &mut rng).unwrap(), vec![StabLabel::YPlus]);
            assert_eq!(yplus.density().born_sample(&[Pauli::Y], &mut rng).unwrap(), vec![StabLabel::YPlus]);
        }
    }

    #[test]
    fn born_sample_plus_in_z_basis() {
        let mut rng = seeded(3);
        let plus = DenseState::from_product(&ProductState::from_labels(&[StabLabel::XPlus])).unwrap();
        let m = 20_000;
        let ups = (0..m).filter(|_| plus.born_sample(&[Pauli::Z], &mut rng).unwrap()[0] == StabLabel::ZPlus).count();
        let sigma = (0.25 / m as f64).sqrt();
        assert!((ups as f64 / m as f64 - 0.5).abs() < 3.0 * sigma);
    }

    #[test]
    fn bell_state_correlations() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let amps = DVector::from_vec(vec![C64::new(h, 0.0), ZERO, ZERO, C64::new(h, 0.0)]);
        let bell = DenseState::new(2, amps).unwrap();
        let mut rng = seeded(4);
        for _ in 0..200 {
            let s = bell.born_sample(&[Pauli::Z, Pauli::Z], &mut rng).unwrap();
            assert_eq!(s[0], s[1]);
            let x = bell.born_sample(&[Pauli::X, Pauli::X], &mut rng).unwrap();
            assert_eq!(x[0], x[1]);
        }
    }

    #[test]
    fn nonidentity_purity_values() {
        let mut rng = seeded(5);
        for l in 1..=3 {
            let s = sample_stab_product(l, &mut rng);
            let rho = DensityMatrix::from_product(&s).unwrap();
            assert!((nonidentity_purity(&rho) - 0.5f64.powi(l as i32)).abs() < 1e-12);
        }
        assert!(nonidentity_purity(&DensityMatrix::maximally_mixed(1).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn all_pauli_expectations_agree() {
        let mut rng = seeded(6);
        let s = sample_haar_product(3, &mut rng);
        let rho = DensityMatrix::from_product(&s).unwrap();
        let all = rho.all_pauli_expectations();
        for p in all_strings_up_to_weight(3, 3) {
            let (x, z, _) = masks(&p);
            assert!((all[x | (z << 3)] - s.pauli_expectation(&p)).abs() < 1e-12);
        }
    }

    #[test]
    fn reduced_state_of_product() {
        let mut rng = seeded(7);
        let s = sample_haar_product(4, &mut rng);
        let rho = DensityMatrix::from_product(&s).unwrap();
        let red = rho.reduced(&[2, 0]).unwrap();
        let p: PauliString = "XZ".parse().unwrap();
        let expect = s.bloch(2)[0] * s.bloch(0)[2];
        assert!((red.pauli_expectation(&p) - expect).abs() < 1e-12);
        assert!((red.trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ghz_rotating_closed_form() {
        // left half reduces to (|0…0⟩ + (-1)^L |1…1⟩)/√2
        for n in [4usize, 6] {
            let st = DenseState::ghz_rotating(n).unwrap();
            let l = n / 2;
            let rho = st.density().reduced(&(0..l).collect::<Vec<_>>()).unwrap();
            let all_z = PauliString::from_letters(&vec![Pauli::Z; l]);
            assert!((rho.pauli_expectation(&all_z) - if l % 2 == 0 { 1.0 } else { 0.0 }).abs() < 1e-12);
            let all_x = PauliString::from_letters(&vec![Pauli::X; l]);
            let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
            assert!((rho.pauli_expectation(&all_x) - sign).abs() < 1e-12);
        }
    }

    #[test]
    fn ghz_closed_form_matches_dense() {
        use crate::states::GhzRotatingState;
        for n in [2usize, 5, 6, 8] {
            let dense = DenseState::ghz_rotating(n).unwrap();
            let closed = GhzRotatingState::new(n).unwrap();
            for p in all_strings_up_to_weight(n, n.min(5)) {
                let (a, b) = (dense.pauli_expectation(&p), closed.pauli_expectation(&p));
                assert!((a - b).abs() < 1e-12, "n={n} {p}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn rotation_flips_z() {
        let u = single_qubit_rotation(2, 0, Pauli::X, std::f64::consts::PI).unwrap();
        let ch = DenseChannel::unitary(u).unwrap();
        let out = ch.output(&ProductState::all_zero(2)).unwrap();
        assert!((out.pauli_expectation(&"ZI".parse().unwrap()) + 1.0).abs() < 1e-12);
        assert!((out.pauli_expectation(&"IZ".parse().unwrap()) - 1.0).abs() < 1e-12);
    }
}

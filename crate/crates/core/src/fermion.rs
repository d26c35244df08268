//! Free-fermion dynamics of the open XY and transverse-field Ising chains.
//!
//! Majorana operators (0-based sites) are
//! `γ_{2i} = (Π_{j<i} Z_j) X_i` and `γ_{2i+1} = (Π_{j<i} Z_j) Y_i`,
//! so `Z_i = -i γ_{2i} γ_{2i+1}`. Both Hamiltonians are quadratic,
//! `H = (i/4) Σ_{ab} A_{ab} γ_a γ_b`, and the Heisenberg flow is linear:
//! `γ_a(t) = Σ_b R_{ab}(t) γ_b` with `R(t) = e^{At}`.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dense::{hermitian_eigh, C64};
use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliExpectation, PauliString, SparsePauliOp};
use crate::rng::seeded;
use crate::shadow::ProcessBackend;
use crate::states::ProductState;

/// Bilinears whose coefficient falls below this are not expanded.
pub const PRUNE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainKind {
    Xy,
    Ising,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum FieldSpec {
    Homogeneous { h: f64 },
    Disordered { low: f64, high: f64, seed: u64 },
}

impl FieldSpec {
    pub fn homogeneous() -> Self {
        FieldSpec::Homogeneous { h: 0.5 }
    }

    pub fn disordered(seed: u64) -> Self {
        FieldSpec::Disordered { low: -5.0, high: 5.0, seed }
    }

    /// One field per site; a disordered field is fixed by its seed.
    pub fn realize(&self, n: usize) -> Result<Vec<f64>> {
        match *self {
            FieldSpec::Homogeneous { h } => Ok(vec![h; n]),
            FieldSpec::Disordered { low, high, seed } => {
                if !(low < high) {
                    return Err(Error::Config(format!("empty field range [{low}, {high}]")));
                }
                let mut rng = seeded(seed);
                Ok((0..n).map(|_| rng.random_range(low..high)).collect())
            }
        }
    }
}

/// Serializable chain description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ChainKind,
    pub n: usize,
    pub field: FieldSpec,
}

impl ModelSpec {
    pub fn build(&self) -> Result<ChainModel> {
        ChainModel::new(self.kind, self.field.realize(self.n)?)
    }
}

/// An open chain with per-site fields `h_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainModel {
    kind: ChainKind,
    fields: Vec<f64>,
}

impl ChainModel {
    pub fn new(kind: ChainKind, fields: Vec<f64>) -> Result<Self> {
        if fields.is_empty() {
            return Err(Error::Domain("chain needs at least one site".into()));
        }
        if fields.iter().any(|h| !h.is_finite()) {
            return Err(Error::Domain("non-finite field".into()));
        }
        Ok(ChainModel { kind, fields })
    }

    pub fn kind(&self) -> ChainKind {
        self.kind
    }

    pub fn num_sites(&self) -> usize {
        self.fields.len()
    }

    pub fn fields(&self) -> &[f64] {
        &self.fields
    }

    /// The spin Hamiltonian as a Pauli sum.
    pub fn hamiltonian(&self) -> SparsePauliOp {
        let n = self.num_sites();
        let mut h = SparsePauliOp::zero(n);
        let pair = |i: usize, l: Pauli| PauliString::from_sparse(n, &[(i, l), (i + 1, l)]).expect("sites in range");
        for i in 0..n.saturating_sub(1) {
            match self.kind {
                ChainKind::Xy => {
                    h.add_term(pair(i, Pauli::X), 0.25).expect("finite");
                    h.add_term(pair(i, Pauli::Y), 0.25).expect("finite");
                }
                ChainKind::Ising => h.add_term(pair(i, Pauli::X), 0.5).expect("finite"),
            }
        }
        for (i, &hi) in self.fields.iter().enumerate() {
            h.add_term(PauliString::single(n, i, Pauli::Z), 0.5 * hi).expect("finite");
        }
        h
    }

    /// Antisymmetric `A` with `H = (i/4) Σ A_{ab} γ_a γ_b`.
    pub fn quadratic_form(&self) -> DMatrix<f64> {
        let n = self.num_sites();
        let mut a = DMatrix::<f64>::zeros(2 * n, 2 * n);
        let mut set = |r: usize, c: usize, v: f64| {
            a[(r, c)] += v;
            a[(c, r)] -= v;
        };
        for (i, &h) in self.fields.iter().enumerate() {
            set(2 * i, 2 * i + 1, -h);
        }
        for i in 0..n.saturating_sub(1) {
            match self.kind {
                ChainKind::Xy => {
                    set(2 * i + 1, 2 * i + 2, -0.5);
                    set(2 * i, 2 * i + 3, 0.5);
                }
                ChainKind::Ising => set(2 * i + 1, 2 * i + 2, -1.0),
            }
        }
        a
    }

    pub fn propagator(&self) -> Propagator {
        Propagator::new(&self.quadratic_form())
    }
}

/// Spectral form of `e^{At}` for a fixed antisymmetric generator.
pub struct Propagator {
    values: Vec<f64>,
    vectors: DMatrix<C64>,
}

impl Propagator {
    /// Diagonalizes the Hermitian matrix `iA`.
    pub fn new(a: &DMatrix<f64>) -> Self {
        let ia = a.map(|v| C64::new(0.0, v));
        let (values, vectors) = hermitian_eigh(&ia);
        Propagator { values, vectors }
    }

    /// Single-particle energies, the eigenvalues of `iA`.
    pub fn single_particle_energies(&self) -> &[f64] {
        &self.values
    }

    /// `R(t) = e^{At} = V e^{-iΛt} V†`.
    pub fn rotation(&self, t: f64) -> DMatrix<f64> {
        let mut scaled = self.vectors.clone();
        for (k, &lam) in self.values.iter().enumerate() {
            let ph = C64::from_polar(1.0, -lam * t);
            for v in scaled.column_mut(k).iter_mut() {
                *v *= ph;
            }
        }
        (scaled * self.vectors.adjoint()).map(|z| z.re)
    }
}

/// Sign and Pauli string of `-i γ_b γ_c` for `b < c`.
pub fn majorana_bilinear(n: usize, b: usize, c: usize) -> (f64, PauliString) {
    debug_assert!(b < c && c < 2 * n);
    let (p, beta) = (b / 2, b % 2);
    let (q, kappa) = (c / 2, c % 2);
    if p == q {
        return (1.0, PauliString::single(n, p, Pauli::Z));
    }
    let mut s = PauliString::identity(n);
    for j in p + 1..q {
        s.set(j, Pauli::Z);
    }
    s.set(q, if kappa == 0 { Pauli::X } else { Pauli::Y });
    if beta == 0 {
        s.set(p, Pauli::Y);
        (-1.0, s)
    } else {
        s.set(p, Pauli::X);
        (1.0, s)
    }
}

/// `Z_i(t)` expanded into Pauli strings from a precomputed rotation.
pub fn heisenberg_z_from_rotation(r: &DMatrix<f64>, i: usize) -> Result<SparsePauliOp> {
    let m = r.nrows();
    let n = m / 2;
    if i >= n {
        return Err(Error::Domain(format!("site {i} outside chain of {n}")));
    }
    let mut op = SparsePauliOp::zero(n);
    for b in 0..m {
        for c in b + 1..m {
            let w = r[(2 * i, b)] * r[(2 * i + 1, c)] - r[(2 * i, c)] * r[(2 * i + 1, b)];
            if w.abs() < PRUNE_TOL {
                continue;
            }
            let (sign, p) = majorana_bilinear(n, b, c);
            op.add_term(p, sign * w)?;
        }
    }
    Ok(op)
}

/// `Z_i(t) = e^{itH} Z_i e^{-itH}` as a Pauli sum.
pub fn heisenberg_z(model: &ChainModel, i: usize, t: f64) -> Result<SparsePauliOp> {
    heisenberg_z_from_rotation(&model.propagator().rotation(t), i)
}

/// `⟨s| Z_i(t) |s⟩` through the Pauli expansion.
pub fn expectation_z_t(model: &ChainModel, i: usize, t: f64, s: &ProductState) -> Result<f64> {
    heisenberg_z(model, i, t)?.expectation(s)
}

/// `M_{bc} = ⟨-i γ_b γ_c⟩` on a product state (zero diagonal).
pub fn majorana_covariance(state: &ProductState) -> DMatrix<f64> {
    let n = state.len();
    let mut m = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for p in 0..n {
        let [xp, yp, zp] = state.bloch(p);
        m[(2 * p, 2 * p + 1)] = zp;
        m[(2 * p + 1, 2 * p)] = -zp;
        // -iγ_{2p}γ_c starts with -Y_p, -iγ_{2p+1}γ_c with X_p
        let starts = [-yp, xp];
        let mut string = 1.0;
        for q in p + 1..n {
            if string == 0.0 {
                break;
            }
            let [xq, yq, zq] = state.bloch(q);
            let ends = [xq, yq];
            for (beta, &s) in starts.iter().enumerate() {
                for (kappa, &e) in ends.iter().enumerate() {
                    let v = s * string * e;
                    m[(2 * p + beta, 2 * q + kappa)] = v;
                    m[(2 * q + kappa, 2 * p + beta)] = -v;
                }
            }
            string *= zq;
        }
    }
    m
}

/// `⟨Z_i(t)⟩` for every site at once: `(R M Rᵀ)_{2i, 2i+1}`.
pub fn z_expectations(r: &DMatrix<f64>, state: &ProductState) -> Result<Vec<f64>> {
    let n = state.len();
    if r.nrows() != 2 * n {
        return Err(Error::mismatch(r.nrows() / 2, n));
    }
    let m = majorana_covariance(state);
    let mrt = m * r.transpose();
    Ok((0..n)
        .map(|i| {
            let row = r.row(2 * i);
            let col = mrt.column(2 * i + 1);
            row.iter().zip(col.iter()).map(|(a, b)| a * b).sum()
        })
        .collect())
}

/// Chain evolved for a fixed time; answers `Z_i` expectations exactly.
pub struct FermionBackend {
    spec: Option<ModelSpec>,
    model: ChainModel,
    t: f64,
    rotation: DMatrix<f64>,
}

impl FermionBackend {
    pub fn new(model: ChainModel, t: f64) -> Self {
        let rotation = model.propagator().rotation(t);
        FermionBackend { spec: None, model, t, rotation }
    }

    pub fn from_spec(spec: &ModelSpec, t: f64) -> Result<Self> {
        let mut b = Self::new(spec.build()?, t);
        b.spec = Some(spec.clone());
        Ok(b)
    }

    pub fn model(&self) -> &ChainModel {
        &self.model
    }

    pub fn rotation(&self) -> &DMatrix<f64> {
        &self.rotation
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// Exact `⟨Z_i(t)⟩` for each site over a batch of inputs.
    pub fn z_batch(&self, inputs: &[ProductState]) -> Result<Vec<Vec<f64>>> {
        inputs.par_iter().map(|s| z_expectations(&self.rotation, s)).collect()
    }
}

impl ProcessBackend for FermionBackend {
    fn num_qubits(&self) -> usize {
        self.model.num_sites()
    }

    fn describe(&self) -> serde_json::Value {
        let model = match &self.spec {
            Some(spec) => serde_json::to_value(spec).expect("model spec serializes"),
            None => serde_json::json!({
                "kind": self.model.kind,
                "n": self.model.num_sites(),
                "fields": self.model.fields,
            }),
        };
        serde_json::json!({"type": "chain", "model": model, "t": self.t})
    }

    fn output_expectations(&self, input: &ProductState, paulis: &[PauliString]) -> Result<Vec<f64>> {
        let z = z_expectations(&self.rotation, input)?;
        paulis
            .iter()
            .map(|p| {
                let support: Vec<(usize, Pauli)> = p.iter_support().collect();
                match support.as_slice() {
                    [] => Ok(1.0),
                    [(i, Pauli::Z)] => Ok(z[*i]),
                    _ => Err(Error::Unsupported(format!("free-fermion backend only evolves Z_i, not {p}"))),
                }
            })
            .collect()
    }
}

/// `⟨ψ|Z_i(t)|ψ⟩` for a general expectation provider (entangled inputs).
pub fn z_expectation_general<E: PauliExpectation + ?Sized>(r: &DMatrix<f64>, i: usize, state: &E) -> Result<f64> {
    heisenberg_z_from_rotation(r, i)?.expectation(state)
}

/// Largest `|R Rᵀ - I|` entry.
pub fn orthogonality_defect(r: &DMatrix<f64>) -> f64 {
    let d = r * r.transpose() - DMatrix::<f64>::identity(r.nrows(), r.ncols());
    d.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Many-body energies from single-particle ones: `E = ½ Σ_k ±ε_k` over positive `ε_k`.
pub fn many_body_spectrum(prop: &Propagator) -> Vec<f64> {
    let mut eps: Vec<f64> = prop.values.iter().copied().filter(|&v| v > 0.0).collect();
    eps.sort_by(f64::total_cmp);
    let mut out = vec![0.0];
    for e in eps {
        out = out.iter().flat_map(|&s| [s + 0.5 * e, s - 0.5 * e]).collect();
    }
    out.sort_by(f64::total_cmp);
    out
}

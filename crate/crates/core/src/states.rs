//! Single-qubit stabilizer labels, product states, and their samplers.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliExpectation, PauliString};

/// Bloch vectors must have unit length within this tolerance.
pub const BLOCH_TOL: f64 = 1e-12;

pub type Bloch = [f64; 3];

/// One of the six single-qubit stabilizer states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StabLabel {
    ZPlus,
    ZMinus,
    XPlus,
    XMinus,
    YPlus,
    YMinus,
}

impl StabLabel {
    pub const ALL: [StabLabel; 6] = [
        StabLabel::ZPlus,
        StabLabel::ZMinus,
        StabLabel::XPlus,
        StabLabel::XMinus,
        StabLabel::YPlus,
        StabLabel::YMinus,
    ];

    pub fn from_basis(basis: Pauli, plus: bool) -> Self {
        match (basis, plus) {
            (Pauli::X, true) => StabLabel::XPlus,
            (Pauli::X, false) => StabLabel::XMinus,
            (Pauli::Y, true) => StabLabel::YPlus,
            (Pauli::Y, false) => StabLabel::YMinus,
            (_, true) => StabLabel::ZPlus,
            (_, false) => StabLabel::ZMinus,
        }
    }

    pub fn basis(self) -> Pauli {
        match self {
            StabLabel::ZPlus | StabLabel::ZMinus => Pauli::Z,
            StabLabel::XPlus | StabLabel::XMinus => Pauli::X,
            StabLabel::YPlus | StabLabel::YMinus => Pauli::Y,
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            StabLabel::ZPlus | StabLabel::XPlus | StabLabel::YPlus => 1.0,
            _ => -1.0,
        }
    }

    pub fn bloch(self) -> Bloch {
        let mut v = [0.0; 3];
        v[self.basis().bloch_index().expect("stabilizer basis is non-identity")] = self.sign();
        v
    }

    /// `⟨s| P |s⟩` for a single-qubit letter.
    pub fn expectation(self, p: Pauli) -> f64 {
        match p {
            Pauli::I => 1.0,
            q if q == self.basis() => self.sign(),
            _ => 0.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StabLabel::ZPlus => "Z+",
            StabLabel::ZMinus => "Z-",
            StabLabel::XPlus => "X+",
            StabLabel::XMinus => "X-",
            StabLabel::YPlus => "Y+",
            StabLabel::YMinus => "Y-",
        }
    }
}

impl fmt::Display for StabLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StabLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StabLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("invalid stabilizer label {s:?}")))
    }
}

impl Serialize for StabLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for StabLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A pure product state stored as one unit Bloch vector per qubit.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductState {
    qubits: Vec<Bloch>,
}

impl ProductState {
    pub fn from_bloch(qubits: Vec<Bloch>) -> Result<Self> {
        for (i, v) in qubits.iter().enumerate() {
            let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if (norm - 1.0).abs() > BLOCH_TOL {
                return Err(Error::Domain(format!("qubit {i} Bloch vector has norm {norm}")));
            }
        }
        Ok(ProductState { qubits })
    }

    pub fn from_labels(labels: &[StabLabel]) -> Self {
        ProductState { qubits: labels.iter().map(|l| l.bloch()).collect() }
    }

    /// `|0…0⟩`.
    pub fn all_zero(n: usize) -> Self {
        Self::from_labels(&vec![StabLabel::ZPlus; n])
    }

    /// `|↓…↓↑…↑⟩` with the wall after site `n / 2`; `↓` has Bloch `z = -1`.
    pub fn domain_wall(n: usize) -> Self {
        let labels: Vec<StabLabel> =
            (0..n).map(|i| if i < n / 2 { StabLabel::ZMinus } else { StabLabel::ZPlus }).collect();
        Self::from_labels(&labels)
    }

    /// `|→↓←↑→↓←↑…⟩`: spins rotating clockwise in the x-z plane.
    pub fn rotating(n: usize) -> Self {
        let cycle = [StabLabel::XPlus, StabLabel::ZMinus, StabLabel::XMinus, StabLabel::ZPlus];
        Self::from_labels(&(0..n).map(|i| cycle[i % 4]).collect::<Vec<_>>())
    }

    pub fn len(&self) -> usize {
        self.qubits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.qubits.is_empty()
    }

    pub fn qubits(&self) -> &[Bloch] {
        &self.qubits
    }

    pub fn bloch(&self, i: usize) -> Bloch {
        self.qubits[i]
    }

    /// `Π_{i ∈ dom(P)} ⟨ψ_i| P_i |ψ_i⟩`, checked.
    pub fn expectation_of(&self, p: &PauliString) -> Result<f64> {
        if p.num_qubits() != self.len() {
            return Err(Error::mismatch(self.len(), p.num_qubits()));
        }
        Ok(self.pauli_expectation(p))
    }
}

impl PauliExpectation for ProductState {
    fn num_qubits(&self) -> usize {
        self.qubits.len()
    }

    fn pauli_expectation(&self, p: &PauliString) -> f64 {
        bloch_product(&self.qubits, p)
    }
}

/// The left `n/2` qubits in the even-parity superposition of x-basis strings
/// (an even number of `→`), the right half in [`ProductState::rotating`].
///
/// The left half equals `(|0…0⟩ + (-1)^L |1…1⟩)/√2` with `L = n/2`, which gives
/// closed-form Pauli expectations at any size.
#[derive(Clone, Debug, PartialEq)]
pub struct GhzRotatingState {
    left: usize,
    right: ProductState,
}

impl GhzRotatingState {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain("GHZ-like state needs at least 2 qubits".into()));
        }
        Ok(GhzRotatingState { left: n / 2, right: ProductState::rotating(n - n / 2) })
    }

    pub fn left_len(&self) -> usize {
        self.left
    }
}

impl PauliExpectation for GhzRotatingState {
    fn num_qubits(&self) -> usize {
        self.left + self.right.len()
    }

    fn pauli_expectation(&self, p: &PauliString) -> f64 {
        let (mut flips, mut zs, mut ys) = (0usize, 0usize, 0usize);
        let mut right = 1.0;
        for (q, l) in p.iter_support() {
            if q < self.left {
                match l {
                    Pauli::X => flips += 1,
                    Pauli::Y => {
                        flips += 1;
                        ys += 1;
                    }
                    _ => zs += 1,
                }
            } else {
                right *= self.right.bloch(q - self.left)[l.bloch_index().expect("non-identity")];
            }
        }
        if right == 0.0 {
            return 0.0;
        }
        let left = if flips == 0 {
            if zs % 2 == 0 {
                1.0
            } else {
                0.0
            }
        } else if flips == self.left && ys % 2 == 0 {
            let parity = if self.left.is_multiple_of(2) { 1.0 } else { -1.0 };
            let phase = if (ys / 2) % 2 == 0 { 1.0 } else { -1.0 };
            parity * phase
        } else {
            0.0
        };
        left * right
    }
}

pub(crate) fn bloch_product(qubits: &[Bloch], p: &PauliString) -> f64 {
    let mut acc = 1.0;
    for (q, l) in p.iter_support() {
        acc *= qubits[q][l.bloch_index().expect("support letters are non-identity")];
        if acc == 0.0 {
            break;
        }
    }
    acc
}

/// Uniform label per qubit, independent across qubits.
pub fn sample_stab_labels<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<StabLabel> {
    (0..n).map(|_| StabLabel::ALL[rng.random_range(0..6)]).collect()
}

pub fn sample_stab_product<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ProductState {
    ProductState::from_labels(&sample_stab_labels(n, rng))
}

/// Haar-random single-qubit pure state as a uniformly distributed unit Bloch vector.
pub fn sample_haar_qubit<R: Rng + ?Sized>(rng: &mut R) -> Bloch {
    loop {
        let v: [f64; 3] = [
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        ];
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if norm > 1e-8 {
            return [v[0] / norm, v[1] / norm, v[2] / norm];
        }
    }
}

pub fn sample_haar_product<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ProductState {
    ProductState { qubits: (0..n).map(|_| sample_haar_qubit(rng)).collect() }
}

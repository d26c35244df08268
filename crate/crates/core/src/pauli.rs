//! Sparse real-coefficient Pauli operators.
//!
//! A [`PauliString`] packs one letter from `{I, X, Y, Z}` per qubit into two
//! bits. A [`SparsePauliOp`] maps strings to nonzero real coefficients, which
//! makes every operator Hermitian by construction. Qubit `0` is the leftmost
//! character of the text form, so `"XIZ"` is `X` on qubit 0 and `Z` on qubit 2.

use std::collections::HashMap;
use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::BuildHasherDefault;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients smaller than this are treated as exact zeros.
pub const ZERO_TOL: f64 = 1e-15;

const LETTERS_PER_WORD: usize = 32;
const LOW_BITS: u64 = 0x5555_5555_5555_5555;

/// Deterministic hasher so that iteration order is reproducible across runs.
pub type PauliMap<V> = HashMap<PauliString, V, BuildHasherDefault<DefaultHasher>>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Pauli {
    I = 0,
    X = 1,
    Y = 2,
    Z = 3,
}

impl Pauli {
    pub const NON_IDENTITY: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    fn from_bits(bits: u64) -> Self {
        match bits & 0b11 {
            0 => Pauli::I,
            1 => Pauli::X,
            2 => Pauli::Y,
            _ => Pauli::Z,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Result<Self> {
        match c {
            'I' | 'i' => Ok(Pauli::I),
            'X' | 'x' => Ok(Pauli::X),
            'Y' | 'y' => Ok(Pauli::Y),
            'Z' | 'z' => Ok(Pauli::Z),
            other => Err(Error::Parse(format!("invalid Pauli letter {other:?}"))),
        }
    }

    /// Index into a Bloch vector `[x, y, z]`; `None` for the identity.
    pub fn bloch_index(self) -> Option<usize> {
        match self {
            Pauli::I => None,
            Pauli::X => Some(0),
            Pauli::Y => Some(1),
            Pauli::Z => Some(2),
        }
    }
}

/// An `n`-qubit Pauli word without phase.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    n: usize,
    words: Vec<u64>,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        PauliString { n, words: vec![0; n.div_ceil(LETTERS_PER_WORD).max(1)] }
    }

    pub fn from_letters(letters: &[Pauli]) -> Self {
        let mut p = Self::identity(letters.len());
        for (i, &l) in letters.iter().enumerate() {
            p.set(i, l);
        }
        p
    }

    /// Builds a string from `(qubit, letter)` pairs; later pairs overwrite earlier ones.
    pub fn from_sparse(n: usize, ops: &[(usize, Pauli)]) -> Result<Self> {
        let mut p = Self::identity(n);
        for &(q, l) in ops {
            if q >= n {
                return Err(Error::Domain(format!("qubit {q} out of range for n = {n}")));
            }
            p.set(q, l);
        }
        Ok(p)
    }

    pub fn single(n: usize, qubit: usize, letter: Pauli) -> Self {
        let mut p = Self::identity(n);
        p.set(qubit, letter);
        p
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn get(&self, qubit: usize) -> Pauli {
        debug_assert!(qubit < self.n);
        let (w, s) = (qubit / LETTERS_PER_WORD, 2 * (qubit % LETTERS_PER_WORD));
        Pauli::from_bits(self.words[w] >> s)
    }

    pub fn set(&mut self, qubit: usize, letter: Pauli) {
        assert!(qubit < self.n, "qubit {qubit} out of range for n = {}", self.n);
        let (w, s) = (qubit / LETTERS_PER_WORD, 2 * (qubit % LETTERS_PER_WORD));
        self.words[w] = (self.words[w] & !(0b11 << s)) | ((letter as u64) << s);
    }

    /// Number of non-identity letters, `|P|`.
    pub fn weight(&self) -> usize {
        self.words
            .iter()
            .map(|&w| ((w | (w >> 1)) & LOW_BITS).count_ones() as usize)
            .sum()
    }

    pub fn is_identity(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// `dom(P)`: the qubits carrying a non-identity letter, ascending.
    pub fn support(&self) -> Vec<usize> {
        self.iter_support().map(|(q, _)| q).collect()
    }

    /// Non-identity letters with their qubit index, ascending.
    pub fn iter_support(&self) -> impl Iterator<Item = (usize, Pauli)> + '_ {
        self.words.iter().enumerate().flat_map(move |(wi, &w)| {
            let mut mask = (w | (w >> 1)) & LOW_BITS;
            std::iter::from_fn(move || {
                if mask == 0 {
                    return None;
                }
                let bit = mask.trailing_zeros() as usize;
                mask &= mask - 1;
                let q = wi * LETTERS_PER_WORD + bit / 2;
                Some((q, Pauli::from_bits(w >> bit)))
            })
        })
    }

    pub fn letters(&self) -> Vec<Pauli> {
        (0..self.n).map(|q| self.get(q)).collect()
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.n {
            write!(f, "{}", self.get(q).as_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliString({self})")
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let letters = s.chars().map(Pauli::from_char).collect::<Result<Vec<_>>>()?;
        if letters.is_empty() {
            return Err(Error::Parse("empty Pauli string".into()));
        }
        Ok(Self::from_letters(&letters))
    }
}

impl Serialize for PauliString {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl std::iter::FromIterator<f64> for KahanSum {
    fn from_iter<T: IntoIterator<Item = f64>>(iter: T) -> Self {
        let mut acc = KahanSum::default();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Anything that can report `Tr(P ρ)` for Pauli strings on a fixed number of qubits.
pub trait PauliExpectation {
    fn num_qubits(&self) -> usize;

    /// `Tr(P ρ)`. Callers guarantee `p.num_qubits() == self.num_qubits()`.
    fn pauli_expectation(&self, p: &PauliString) -> f64;
}

/// Expansion coefficient and dimension of an operator, with `r = 2 d_e / (d_e + 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionProfile {
    pub c_e: usize,
    pub d_e: usize,
}

impl ExpansionProfile {
    pub fn r(&self) -> f64 {
        2.0 * self.d_e as f64 / (self.d_e as f64 + 1.0)
    }

    /// The profile every `k`-local operator satisfies: `c_e = 4^k`, `d_e = k`.
    pub fn general_k_local(k: usize) -> Self {
        ExpansionProfile { c_e: 4usize.pow(k as u32), d_e: k }
    }

    /// Bounded-degree `k`-local operators: `c_e = 4^k d`, `d_e = 1`.
    pub fn bounded_degree(k: usize, d: usize) -> Self {
        ExpansionProfile { c_e: 4usize.pow(k as u32) * d, d_e: 1 }
    }
}

#[derive(Serialize, Deserialize)]
struct TermRecord {
    p: PauliString,
    c: f64,
}

/// Real linear combination of Pauli strings on `n` qubits.
#[derive(Clone, Debug)]
pub struct SparsePauliOp {
    n: usize,
    terms: PauliMap<f64>,
}

impl PartialEq for SparsePauliOp {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.terms == other.terms
    }
}

impl SparsePauliOp {
    pub fn zero(n: usize) -> Self {
        SparsePauliOp { n, terms: PauliMap::default() }
    }

    pub fn from_terms<I>(n: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (PauliString, f64)>,
    {
        let mut op = Self::zero(n);
        for (p, c) in terms {
            op.add_term(p, c)?;
        }
        Ok(op)
    }

    /// Parses `[("XIZ", 0.5), ...]`-style pairs.
    pub fn from_labels(terms: &[(&str, f64)]) -> Result<Self> {
        let first = terms.first().ok_or_else(|| Error::Parse("no terms".into()))?;
        let n = first.0.chars().count();
        Self::from_terms(
            n,
            terms.iter().map(|(s, c)| Ok((s.parse::<PauliString>()?, *c))).collect::<Result<Vec<_>>>()?,
        )
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    /// Adds `c · P`, merging with an existing term and dropping it if it cancels.
    pub fn add_term(&mut self, p: PauliString, c: f64) -> Result<()> {
        if p.num_qubits() != self.n {
            return Err(Error::mismatch(self.n, p.num_qubits()));
        }
        if !c.is_finite() {
            return Err(Error::Domain(format!("non-finite coefficient {c} on {p}")));
        }
        let total = self.terms.get(&p).copied().unwrap_or(0.0) + c;
        if total.abs() < ZERO_TOL {
            self.terms.remove(&p);
        } else {
            self.terms.insert(p, total);
        }
        Ok(())
    }

    pub fn coefficient(&self, p: &PauliString) -> f64 {
        self.terms.get(p).copied().unwrap_or(0.0)
    }

    pub fn identity_coefficient(&self) -> f64 {
        self.coefficient(&PauliString::identity(self.n))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PauliString, f64)> {
        self.terms.iter().map(|(p, &c)| (p, c))
    }

    /// Terms ordered by (weight, string) for stable output.
    pub fn sorted_terms(&self) -> Vec<(PauliString, f64)> {
        let mut v: Vec<_> = self.terms.iter().map(|(p, &c)| (p.clone(), c)).collect();
        v.sort_by(|a, b| a.0.weight().cmp(&b.0.weight()).then_with(|| a.0.cmp(&b.0)));
        v
    }

    /// Largest term weight; zero for the empty operator.
    pub fn max_weight(&self) -> usize {
        self.terms.keys().map(PauliString::weight).max().unwrap_or(0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = Self::zero(self.n);
        for (p, c) in self.iter() {
            // cannot fail: same qubit count, finite product
            let _ = out.add_term(p.clone(), c * s);
        }
        out
    }

    pub fn plus(&self, other: &Self) -> Result<Self> {
        if other.n != self.n {
            return Err(Error::mismatch(self.n, other.n));
        }
        let mut out = self.clone();
        for (p, c) in other.iter() {
            out.add_term(p.clone(), c)?;
        }
        Ok(out)
    }

    /// Copy without the identity term.
    pub fn without_identity(&self) -> Self {
        let mut out = self.clone();
        out.terms.remove(&PauliString::identity(self.n));
        out
    }

    /// `(Σ_P |α_P|^p)^{1/p}`.
    pub fn pauli_norm(&self, p: f64) -> Result<f64> {
        if !(p >= 1.0) {
            return Err(Error::Domain(format!("Pauli-p norm needs p >= 1, got {p}")));
        }
        if p.is_infinite() {
            return Ok(self.terms.values().fold(0.0_f64, |m, c| m.max(c.abs())));
        }
        let s: KahanSum = self.terms.values().map(|c| c.abs().powf(p)).collect();
        Ok(s.value().powf(1.0 / p))
    }

    /// Keeps exactly the terms with `|P| <= k`.
    pub fn truncate(&self, k: usize) -> Self {
        SparsePauliOp {
            n: self.n,
            terms: self.terms.iter().filter(|(p, _)| p.weight() <= k).map(|(p, &c)| (p.clone(), c)).collect(),
        }
    }

    /// Terms of weight exactly `k`.
    pub fn homogeneous_part(&self, k: usize) -> Self {
        SparsePauliOp {
            n: self.n,
            terms: self.terms.iter().filter(|(p, _)| p.weight() == k).map(|(p, &c)| (p.clone(), c)).collect(),
        }
    }

    /// `Tr(O ρ)` through any Pauli-expectation provider.
    pub fn expectation<E: PauliExpectation + ?Sized>(&self, state: &E) -> Result<f64> {
        if state.num_qubits() != self.n {
            return Err(Error::mismatch(self.n, state.num_qubits()));
        }
        let s: KahanSum = self.terms.iter().map(|(p, &c)| c * state.pauli_expectation(p)).collect();
        Ok(s.value())
    }

    /// Exhaustive expansion coefficient for a given expansion dimension.
    ///
    /// `c_e` is the largest number of nonzero terms `P` with `Υ ⊆ dom(P)` or
    /// `dom(P) ⊆ Υ` over all `Υ` of size `d_e`.
    pub fn expansion_coefficient(&self, d_e: usize) -> Result<ExpansionProfile> {
        if d_e == 0 || d_e > self.n {
            return Err(Error::Domain(format!("expansion dimension {d_e} outside 1..={}", self.n)));
        }
        let supports: Vec<Vec<usize>> = self.terms.keys().map(PauliString::support).collect();
        let mut best = 0usize;
        let mut subset: Vec<usize> = (0..d_e).collect();
        let mut member = vec![false; self.n];
        loop {
            for &q in &subset {
                member[q] = true;
            }
            let count = supports
                .iter()
                .filter(|dom| {
                    let inside = dom.iter().filter(|&&q| member[q]).count();
                    inside == dom.len() || inside == d_e
                })
                .count();
            best = best.max(count);
            for &q in &subset {
                member[q] = false;
            }
            if !next_combination(&mut subset, self.n) {
                break;
            }
        }
        Ok(ExpansionProfile { c_e: best, d_e })
    }

    pub fn to_json(&self) -> serde_json::Value {
        let recs: Vec<TermRecord> = self.sorted_terms().into_iter().map(|(p, c)| TermRecord { p, c }).collect();
        serde_json::to_value(recs).expect("term records serialize")
    }

    /// Reads a JSON list of `{"p": "XIZY", "c": 0.5}` records.
    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let recs: Vec<TermRecord> = serde_json::from_value(value.clone())?;
        let n = recs.first().map(|r| r.p.num_qubits()).ok_or_else(|| Error::Parse("operator has no terms".into()))?;
        Self::from_terms(n, recs.into_iter().map(|r| (r.p, r.c)))
    }
}

/// Advances `c` to the next `k`-combination of `0..n` in lexicographic order.
pub(crate) fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// All Pauli strings on `n` qubits with weight at most `k`, identity first.
pub fn all_strings_up_to_weight(n: usize, k: usize) -> Vec<PauliString> {
    let mut out = vec![PauliString::identity(n)];
    for w in 1..=k.min(n) {
        let mut support: Vec<usize> = (0..w).collect();
        loop {
            let mut letters = vec![0usize; w];
            loop {
                let ops: Vec<(usize, Pauli)> =
                    support.iter().zip(&letters).map(|(&q, &l)| (q, Pauli::NON_IDENTITY[l])).collect();
                out.push(PauliString::from_sparse(n, &ops).expect("support within range"));
                if !advance_base3(&mut letters) {
                    break;
                }
            }
            if !next_combination(&mut support, n) {
                break;
            }
        }
    }
    out
}

/// Pauli strings whose support is a contiguous run of at most `k` qubits, identity first.
pub fn contiguous_strings_up_to_weight(n: usize, k: usize) -> Vec<PauliString> {
    let mut out = vec![PauliString::identity(n)];
    for w in 1..=k.min(n) {
        for start in 0..=n - w {
            let mut letters = vec![0usize; w];
            loop {
                let ops: Vec<(usize, Pauli)> =
                    letters.iter().enumerate().map(|(j, &l)| (start + j, Pauli::NON_IDENTITY[l])).collect();
                out.push(PauliString::from_sparse(n, &ops).expect("support within range"));
                if !advance_base3(&mut letters) {
                    break;
                }
            }
        }
    }
    out
}

fn advance_base3(digits: &mut [usize]) -> bool {
    for d in digits.iter_mut() {
        *d += 1;
        if *d < 3 {
            return true;
        }
        *d = 0;
    }
    false
}

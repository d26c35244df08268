//! Pauli feature sets and sparse design matrices.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{all_strings_up_to_weight, contiguous_strings_up_to_weight, PauliExpectation, PauliString};
use crate::states::{ProductState, StabLabel};

/// Which Pauli strings of weight `<= k` enter the model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Locality {
    /// Every string with `|P| <= k`.
    #[default]
    All,
    /// Strings whose support is a contiguous run on the chain.
    Contiguous,
}

/// An input state of a training row.
#[derive(Clone, Debug, PartialEq)]
pub enum TrainState {
    Stab(Vec<StabLabel>),
    Product(ProductState),
}

impl PauliExpectation for TrainState {
    fn num_qubits(&self) -> usize {
        match self {
            TrainState::Stab(l) => l.len(),
            TrainState::Product(p) => p.len(),
        }
    }

    fn pauli_expectation(&self, p: &PauliString) -> f64 {
        match self {
            TrainState::Stab(labels) => {
                let mut acc = 1.0;
                for (q, l) in p.iter_support() {
                    acc *= labels[q].expectation(l);
                    if acc == 0.0 {
                        break;
                    }
                }
                acc
            }
            TrainState::Product(s) => s.pauli_expectation(p),
        }
    }
}

/// One labelled example `(ρ_ℓ, y_ℓ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainRow {
    pub state: TrainState,
    pub y: f64,
}

impl TrainRow {
    pub fn stab(labels: Vec<StabLabel>, y: f64) -> Self {
        TrainRow { state: TrainState::Stab(labels), y }
    }

    pub fn product(state: ProductState, y: f64) -> Self {
        TrainRow { state: TrainState::Product(state), y }
    }
}

/// Strings sharing one support; `slots` is indexed by the base-3 code of the letters.
#[derive(Clone, Debug)]
struct SupportGroup {
    support: Vec<usize>,
    slots: Vec<Option<u32>>,
}

/// An ordered list of Pauli strings, sorted by weight so that every
/// truncation `|P| <= k'` is a prefix.
#[derive(Clone, Debug)]
pub struct FeatureSet {
    n: usize,
    strings: Vec<PauliString>,
    groups: Vec<SupportGroup>,
}

impl FeatureSet {
    pub fn new(n: usize, k: usize, locality: Locality) -> Self {
        let strings = match locality {
            Locality::All => all_strings_up_to_weight(n, k),
            Locality::Contiguous => contiguous_strings_up_to_weight(n, k),
        };
        Self::from_strings(n, strings).expect("generated strings are distinct and sized")
    }

    pub fn from_strings(n: usize, mut strings: Vec<PauliString>) -> Result<Self> {
        strings.sort_by_key(PauliString::weight);
        let mut by_support: BTreeMap<Vec<usize>, Vec<Option<u32>>> = BTreeMap::new();
        for (idx, p) in strings.iter().enumerate() {
            if p.num_qubits() != n {
                return Err(Error::mismatch(n, p.num_qubits()));
            }
            let support = p.support();
            let slots = by_support.entry(support).or_insert_with_key(|s| vec![None; 3usize.pow(s.len() as u32)]);
            let slot = &mut slots[letter_code(p.iter_support().map(|(_, l)| l.bloch_index().expect("support")))];
            if slot.is_some() {
                return Err(Error::Domain(format!("duplicate feature {p}")));
            }
            *slot = Some(idx as u32);
        }
        let groups = by_support.into_iter().map(|(support, slots)| SupportGroup { support, slots }).collect();
        Ok(FeatureSet { n, strings, groups })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }

    pub fn strings(&self) -> &[PauliString] {
        &self.strings
    }

    pub fn max_weight(&self) -> usize {
        self.strings.last().map_or(0, PauliString::weight)
    }

    /// Number of leading features with `|P| <= k`.
    pub fn prefix_len(&self, k: usize) -> usize {
        self.strings.partition_point(|p| p.weight() <= k)
    }

    /// Nonzero feature values `Tr(P ρ)` for one input, sorted by feature index.
    pub fn row(&self, state: &TrainState) -> Result<Vec<(u32, f64)>> {
        if state.num_qubits() != self.n {
            return Err(Error::mismatch(self.n, state.num_qubits()));
        }
        let mut out = Vec::new();
        match state {
            TrainState::Stab(labels) => {
                // a stabilizer product has exactly one nonvanishing string per support
                for g in &self.groups {
                    let code = letter_code(g.support.iter().map(|&q| labels[q].basis().bloch_index().expect("basis")));
                    if let Some(idx) = g.slots[code] {
                        let sign: f64 = g.support.iter().map(|&q| labels[q].sign()).product();
                        out.push((idx, sign));
                    }
                }
                out.sort_unstable_by_key(|e| e.0);
            }
            TrainState::Product(s) => {
                for (idx, p) in self.strings.iter().enumerate() {
                    let v = s.pauli_expectation(p);
                    if v != 0.0 {
                        out.push((idx as u32, v));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Dense feature vector for any Pauli-expectation provider.
    pub fn dense_row<E: PauliExpectation + ?Sized>(&self, state: &E) -> Result<Vec<f64>> {
        if state.num_qubits() != self.n {
            return Err(Error::mismatch(self.n, state.num_qubits()));
        }
        Ok(self.strings.iter().map(|p| state.pauli_expectation(p)).collect())
    }
}

fn letter_code(letters: impl Iterator<Item = usize>) -> usize {
    let mut code = 0;
    let mut scale = 1;
    for l in letters {
        code += l * scale;
        scale *= 3;
    }
    code
}

/// Row-major sparse rows, kept for re-slicing into column-major designs.
#[derive(Clone, Debug)]
pub struct SparseRows {
    cols: usize,
    rows: Vec<Vec<(u32, f64)>>,
}

impl SparseRows {
    pub fn build(features: &FeatureSet, states: &[&TrainState]) -> Result<Self> {
        use rayon::prelude::*;
        let rows = states.par_iter().map(|s| features.row(s)).collect::<Result<Vec<_>>>()?;
        Ok(SparseRows { cols: features.len(), rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[(u32, f64)] {
        &self.rows[i]
    }

    /// Column-major design for the listed rows, in that order.
    pub fn design(&self, select: &[usize]) -> Design {
        let mut counts = vec![0usize; self.cols + 1];
        for &r in select {
            for &(c, _) in &self.rows[r] {
                counts[c as usize + 1] += 1;
            }
        }
        for j in 0..self.cols {
            counts[j + 1] += counts[j];
        }
        let nnz = counts[self.cols];
        let mut fill = counts.clone();
        let mut row_idx = vec![0u32; nnz];
        let mut vals = vec![0.0; nnz];
        for (new_r, &r) in select.iter().enumerate() {
            for &(c, v) in &self.rows[r] {
                let slot = &mut fill[c as usize];
                row_idx[*slot] = new_r as u32;
                vals[*slot] = v;
                *slot += 1;
            }
        }
        Design { rows: select.len(), col_ptr: counts, row_idx, vals }
    }

    pub fn full_design(&self) -> Design {
        self.design(&(0..self.rows.len()).collect::<Vec<_>>())
    }
}

/// Compressed sparse column matrix of feature values.
#[derive(Clone, Debug)]
pub struct Design {
    rows: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<u32>,
    vals: Vec<f64>,
}

impl Design {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.col_ptr.len() - 1
    }

    pub fn column(&self, j: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.col_ptr[j], self.col_ptr[j + 1]);
        (&self.row_idx[a..b], &self.vals[a..b])
    }

    /// `X α` using the first `coef.len()` columns.
    pub fn apply(&self, coef: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        for (j, &c) in coef.iter().enumerate() {
            if c != 0.0 {
                let (ri, v) = self.column(j);
                for (&r, &x) in ri.iter().zip(v) {
                    out[r as usize] += c * x;
                }
            }
        }
        out
    }

    /// `(1/N) Xᵀ y` and `(1/N) Σ_ℓ X_{ℓP}²` per column.
    pub fn moments(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let inv = 1.0 / self.rows as f64;
        (0..self.cols())
            .map(|j| {
                let (ri, v) = self.column(j);
                let (mut xy, mut xx) = (0.0, 0.0);
                for (&r, &x) in ri.iter().zip(v) {
                    xy += x * y[r as usize];
                    xx += x * x;
                }
                (xy * inv, xx * inv)
            })
            .unzip()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::states::{sample_haar_product, sample_stab_labels};

    #[test]
    fn prefix_matches_weight_truncation() {
        let f = FeatureSet::new(5, 3, Locality::All);
        assert_eq!(f.prefix_len(0), 1);
        assert_eq!(f.prefix_len(1), 1 + 15);
        assert_eq!(f.prefix_len(2), 1 + 15 + 90);
        let c = FeatureSet::new(50, 4, Locality::Contiguous);
        assert_eq!(c.len(), 1 + 50 * 3 + 49 * 9 + 48 * 27 + 47 * 81);
    }

    #[test]
    fn stab_fast_path_agrees_with_dense() {
        let mut rng = seeded(3);
        let f = FeatureSet::new(6, 3, Locality::All);
        for _ in 0..20 {
            let st = TrainState::Stab(sample_stab_labels(6, &mut rng));
            let dense = f.dense_row(&st).unwrap();
            let mut sparse = vec![0.0; f.len()];
            for (i, v) in f.row(&st).unwrap() {
                sparse[i as usize] = v;
            }
            assert_eq!(dense, sparse);
        }
    }

    #[test]
    fn design_moments() {
        let mut rng = seeded(4);
        let f = FeatureSet::new(4, 2, Locality::Contiguous);
        let states: Vec<TrainState> = (0..30).map(|_| TrainState::Product(sample_haar_product(4, &mut rng))).collect();
        let refs: Vec<&TrainState> = states.iter().collect();
        let rows = SparseRows::build(&f, &refs).unwrap();
        let d = rows.full_design();
        let y: Vec<f64> = (0..30).map(|i| i as f64 / 7.0).collect();
        let (xy, xx) = d.moments(&y);
        for (j, p) in f.strings().iter().enumerate() {
            let direct: f64 = states.iter().zip(&y).map(|(s, yy)| s.pauli_expectation(p) * yy).sum::<f64>() / 30.0;
            let sq: f64 = states.iter().map(|s| s.pauli_expectation(p).powi(2)).sum::<f64>() / 30.0;
            assert!((xy[j] - direct).abs() < 1e-12 && (xx[j] - sq).abs() < 1e-12);
        }
        let sub = rows.design(&[5, 2]);
        assert_eq!(sub.rows(), 2);
        assert_eq!(sub.apply(&[1.0]), vec![1.0, 1.0]);
    }
}

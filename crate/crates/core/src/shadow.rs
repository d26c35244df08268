//! Randomized Pauli measurements and classical shadows of states and processes.
//!
//! A process shadow is a list of experiments. Each one prepares a uniformly
//! random product of single-qubit stabilizer states, sends it through the
//! unknown channel and records either a randomized Pauli measurement of the
//! output (snapshot mode) or shot-noisy expectation values of a fixed list of
//! observables (expectation mode).

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::{Rng, RngCore};
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dense::{DenseChannel, OutputState};
use crate::error::{Error, Result};
use crate::pauli::{KahanSum, Pauli, PauliString, SparsePauliOp};
use crate::rng::substream;
use crate::states::{sample_stab_labels, ProductState, StabLabel};

/// `‖P‖_shadow = 3^{|P|/2}`.
pub fn shadow_norm_pauli(p: &PauliString) -> f64 {
    3f64.powf(p.weight() as f64 / 2.0)
}

/// Single-snapshot estimate `Σ_Q a_Q Π_{i ∈ dom(Q)} 3⟨s_i|Q_i|s_i⟩`.
///
/// Qubits outside `dom(Q)` contribute `Tr(3|s⟩⟨s| - I) = 1`.
pub fn snapshot_estimate(labels: &[StabLabel], op: &SparsePauliOp) -> f64 {
    let s: KahanSum = op
        .iter()
        .map(|(p, c)| {
            let mut v = c;
            for (q, l) in p.iter_support() {
                v *= 3.0 * labels[q].expectation(l);
                if v == 0.0 {
                    break;
                }
            }
            v
        })
        .collect();
    s.value()
}

/// Mean of [`snapshot_estimate`] over a set of snapshots.
pub fn shadow_estimate<S: AsRef<[StabLabel]>>(snapshots: &[S], op: &SparsePauliOp) -> Result<f64> {
    if snapshots.is_empty() {
        return Err(Error::Empty("shadow has no snapshots".into()));
    }
    for s in snapshots {
        if s.as_ref().len() != op.num_qubits() {
            return Err(Error::mismatch(op.num_qubits(), s.as_ref().len()));
        }
    }
    let s: KahanSum = snapshots.iter().map(|s| snapshot_estimate(s.as_ref(), op)).collect();
    Ok(s.value() / snapshots.len() as f64)
}

/// Uniform per-qubit measurement bases.
pub fn random_bases<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Pauli> {
    (0..n).map(|_| Pauli::NON_IDENTITY[rng.random_range(0..3)]).collect()
}

/// Classical shadow of a single state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateShadow {
    pub n: usize,
    pub snapshots: Vec<Vec<StabLabel>>,
}

impl StateShadow {
    /// `count` randomized Pauli measurements of `state`; snapshot `ℓ` uses substream `ℓ`.
    pub fn collect(state: &OutputState, n: usize, count: usize, seed: u64) -> Result<Self> {
        let snapshots = (0..count)
            .into_par_iter()
            .map(|l| {
                let mut rng = substream(seed, l as u64);
                let bases = random_bases(n, &mut rng);
                state.born_sample(&bases, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(StateShadow { n, snapshots })
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn estimate(&self, op: &SparsePauliOp) -> Result<f64> {
        shadow_estimate(&self.snapshots, op)
    }
}

/// A channel that can be queried on product-state inputs.
pub trait ProcessBackend: Sync {
    fn num_qubits(&self) -> usize;

    /// JSON description stored in dataset headers.
    fn describe(&self) -> Value;

    /// Exact `Tr(P E(ρ_in))` for each requested string.
    fn output_expectations(&self, input: &ProductState, paulis: &[PauliString]) -> Result<Vec<f64>>;

    /// One randomized Pauli measurement of `E(ρ_in)` in the given bases.
    fn measure(&self, _input: &ProductState, _bases: &[Pauli], _rng: &mut dyn RngCore) -> Result<Vec<StabLabel>> {
        Err(Error::Unsupported("this backend cannot sample measurement outcomes".into()))
    }
}

/// Dense-oracle backend, able to sample exact measurement outcomes.
pub struct DenseBackend {
    channel: DenseChannel,
    description: Value,
}

impl DenseBackend {
    pub fn new(channel: DenseChannel, description: Value) -> Self {
        DenseBackend { channel, description }
    }

    pub fn channel(&self) -> &DenseChannel {
        &self.channel
    }
}

impl ProcessBackend for DenseBackend {
    fn num_qubits(&self) -> usize {
        self.channel.num_qubits()
    }

    fn describe(&self) -> Value {
        self.description.clone()
    }

    fn output_expectations(&self, input: &ProductState, paulis: &[PauliString]) -> Result<Vec<f64>> {
        let out = self.channel.output(input)?;
        Ok(paulis.iter().map(|p| out.pauli_expectation(p)).collect())
    }

    fn measure(&self, input: &ProductState, bases: &[Pauli], rng: &mut dyn RngCore) -> Result<Vec<StabLabel>> {
        self.channel.output(input)?.born_sample(bases, rng)
    }
}

/// A named observable recorded in expectation-mode datasets.
#[derive(Clone, Debug, PartialEq)]
pub struct Observable {
    pub id: String,
    pub op: SparsePauliOp,
}

impl Observable {
    pub fn new(id: impl Into<String>, op: SparsePauliOp) -> Self {
        Observable { id: id.into(), op }
    }

    /// `Z_1, …, Z_n` with ids `"Z_1"…"Z_n"`.
    pub fn all_z(n: usize) -> Vec<Observable> {
        (0..n)
            .map(|i| {
                let op = SparsePauliOp::from_terms(n, [(PauliString::single(n, i, Pauli::Z), 1.0)])
                    .expect("single term is valid");
                Observable::new(format!("Z_{}", i + 1), op)
            })
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
struct ObservableRecord {
    id: String,
    n: usize,
    terms: Value,
}

impl Serialize for Observable {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ObservableRecord { id: self.id.clone(), n: self.op.num_qubits(), terms: self.op.to_json() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Observable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rec = ObservableRecord::deserialize(d)?;
        let op = if rec.terms.as_array().is_some_and(|a| a.is_empty()) {
            SparsePauliOp::zero(rec.n)
        } else {
            SparsePauliOp::from_json(&rec.terms).map_err(serde::de::Error::custom)?
        };
        if op.num_qubits() != rec.n {
            return Err(serde::de::Error::custom(format!("observable {} has the wrong qubit count", rec.id)));
        }
        Ok(Observable { id: rec.id, op })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShadowMode {
    Snapshot,
    Expectation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowHeader {
    pub n: usize,
    pub mode: ShadowMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<u32>,
    pub seed: u64,
    pub channel: Value,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub observables: Vec<Observable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRow {
    #[serde(rename = "in")]
    pub input: Vec<StabLabel>,
    #[serde(rename = "out")]
    pub output: Vec<StabLabel>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectationRow {
    #[serde(rename = "in")]
    pub input: Vec<StabLabel>,
    pub y: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ShadowRows {
    Snapshot(Vec<SnapshotRow>),
    Expectation(Vec<ExpectationRow>),
}

/// The dataset `S_N(E)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProcessShadow {
    pub header: ShadowHeader,
    pub rows: ShadowRows,
}

/// What to record per experiment.
#[derive(Clone, Debug)]
pub enum CollectMode {
    Snapshot,
    Expectation { observables: Vec<Observable>, shots: u32 },
}

/// Mean of `shots` ±1 outcomes whose exact mean is `exact`.
pub fn shot_noise_mean<R: Rng + ?Sized>(exact: f64, shots: u32, rng: &mut R) -> Result<f64> {
    if shots == 0 {
        return Err(Error::Config("shot count must be positive".into()));
    }
    let p = ((1.0 + exact) / 2.0).clamp(0.0, 1.0);
    let binom = Binomial::new(shots as u64, p).map_err(|e| Error::Numeric(e.to_string()))?;
    let plus = binom.sample(rng) as f64;
    Ok(2.0 * plus / shots as f64 - 1.0)
}

/// `Σ_Q a_Q ŷ_Q` with independent shot noise on every non-identity term.
pub fn noisy_expectation<R: Rng + ?Sized>(
    op: &SparsePauliOp,
    exact: &BTreeMap<PauliString, f64>,
    shots: u32,
    rng: &mut R,
) -> Result<f64> {
    let mut acc = KahanSum::default();
    for (p, c) in op.sorted_terms() {
        if p.is_identity() {
            acc.add(c);
            continue;
        }
        let e = *exact.get(&p).ok_or_else(|| Error::Domain(format!("missing expectation for {p}")))?;
        acc.add(c * shot_noise_mean(e, shots, rng)?);
    }
    Ok(acc.value())
}

/// Runs `count` experiments; experiment `ℓ` draws everything from substream `ℓ` of `seed`.
pub fn collect_process_shadow<B: ProcessBackend + ?Sized>(
    backend: &B,
    count: usize,
    mode: &CollectMode,
    seed: u64,
) -> Result<ProcessShadow> {
    let n = backend.num_qubits();
    let (rows, shots, observables) = match mode {
        CollectMode::Snapshot => {
            let rows = (0..count)
                .into_par_iter()
                .map(|l| {
                    let mut rng = substream(seed, l as u64);
                    let input = sample_stab_labels(n, &mut rng);
                    let bases = random_bases(n, &mut rng);
                    let output = backend.measure(&ProductState::from_labels(&input), &bases, &mut rng)?;
                    Ok(SnapshotRow { input, output })
                })
                .collect::<Result<Vec<_>>>()?;
            (ShadowRows::Snapshot(rows), None, Vec::new())
        }
        CollectMode::Expectation { observables, shots } => {
            if observables.is_empty() {
                return Err(Error::Config("expectation mode needs at least one observable".into()));
            }
            for o in observables {
                if o.op.num_qubits() != n {
                    return Err(Error::mismatch(n, o.op.num_qubits()));
                }
            }
            let mut strings: Vec<PauliString> = observables
                .iter()
                .flat_map(|o| o.op.iter().map(|(p, _)| p.clone()))
                .filter(|p| !p.is_identity())
                .collect();
            strings.sort();
            strings.dedup();
            let rows = (0..count)
                .into_par_iter()
                .map(|l| {
                    let mut rng = substream(seed, l as u64);
                    let input = sample_stab_labels(n, &mut rng);
                    let exact_vals = backend.output_expectations(&ProductState::from_labels(&input), &strings)?;
                    let exact: BTreeMap<PauliString, f64> = strings.iter().cloned().zip(exact_vals).collect();
                    let mut y = BTreeMap::new();
                    for o in observables {
                        y.insert(o.id.clone(), noisy_expectation(&o.op, &exact, *shots, &mut rng)?);
                    }
                    Ok(ExpectationRow { input, y })
                })
                .collect::<Result<Vec<_>>>()?;
            (ShadowRows::Expectation(rows), Some(*shots), observables.clone())
        }
    };
    Ok(ProcessShadow {
        header: ShadowHeader { n, mode: shadow_mode(mode), shots, seed, channel: backend.describe(), observables, provenance: None },
        rows,
    })
}

fn shadow_mode(mode: &CollectMode) -> ShadowMode {
    match mode {
        CollectMode::Snapshot => ShadowMode::Snapshot,
        CollectMode::Expectation { .. } => ShadowMode::Expectation,
    }
}

impl ProcessShadow {
    pub fn num_qubits(&self) -> usize {
        self.header.n
    }

    pub fn len(&self) -> usize {
        match &self.rows {
            ShadowRows::Snapshot(r) => r.len(),
            ShadowRows::Expectation(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn inputs(&self) -> Vec<&[StabLabel]> {
        match &self.rows {
            ShadowRows::Snapshot(r) => r.iter().map(|x| x.input.as_slice()).collect(),
            ShadowRows::Expectation(r) => r.iter().map(|x| x.input.as_slice()).collect(),
        }
    }

    /// Output snapshots, as a state shadow of the average output.
    pub fn outputs(&self) -> Result<Vec<&[StabLabel]>> {
        match &self.rows {
            ShadowRows::Snapshot(r) => Ok(r.iter().map(|x| x.output.as_slice()).collect()),
            ShadowRows::Expectation(_) => Err(Error::Unsupported("expectation-mode rows hold no snapshots".into())),
        }
    }

    /// Per-experiment labels `y_ℓ(O)`: the snapshot estimate in snapshot mode,
    /// the recorded value for observable `id` in expectation mode.
    pub fn labels(&self, op: &SparsePauliOp, id: Option<&str>) -> Result<Vec<f64>> {
        if op.num_qubits() != self.header.n {
            return Err(Error::mismatch(self.header.n, op.num_qubits()));
        }
        match &self.rows {
            ShadowRows::Snapshot(r) => Ok(r.iter().map(|x| snapshot_estimate(&x.output, op)).collect()),
            ShadowRows::Expectation(r) => {
                let id = match id {
                    Some(id) => id.to_string(),
                    None => self
                        .header
                        .observables
                        .iter()
                        .find(|o| &o.op == op)
                        .map(|o| o.id.clone())
                        .ok_or_else(|| Error::Domain("observable was not recorded in this dataset".into()))?,
                };
                r.iter()
                    .map(|x| x.y.get(&id).copied().ok_or_else(|| Error::Domain(format!("row lacks observable {id}"))))
                    .collect()
            }
        }
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer(&mut w, &self.header)?;
        w.write_all(b"\n")?;
        match &self.rows {
            ShadowRows::Snapshot(rows) => {
                for r in rows {
                    serde_json::to_writer(&mut w, r)?;
                    w.write_all(b"\n")?;
                }
            }
            ShadowRows::Expectation(rows) => {
                for r in rows {
                    serde_json::to_writer(&mut w, r)?;
                    w.write_all(b"\n")?;
                }
            }
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header_line = lines.next().ok_or_else(|| Error::Parse("dataset has no header".into()))??;
        let header: ShadowHeader = serde_json::from_str(&header_line)?;
        let n = header.n;
        let check = |v: &[StabLabel]| if v.len() == n { Ok(()) } else { Err(Error::mismatch(n, v.len())) };
        let body: Vec<String> = lines.collect::<std::io::Result<Vec<_>>>()?;
        let body = body.into_iter().filter(|l| !l.trim().is_empty());
        let rows = match header.mode {
            ShadowMode::Snapshot => {
                let rows = body
                    .map(|l| {
                        let row: SnapshotRow = serde_json::from_str(&l)?;
                        check(&row.input)?;
                        check(&row.output)?;
                        Ok(row)
                    })
                    .collect::<Result<Vec<_>>>()?;
                ShadowRows::Snapshot(rows)
            }
            ShadowMode::Expectation => {
                let rows = body
                    .map(|l| {
                        let row: ExpectationRow = serde_json::from_str(&l)?;
                        check(&row.input)?;
                        Ok(row)
                    })
                    .collect::<Result<Vec<_>>>()?;
                ShadowRows::Expectation(rows)
            }
        };
        Ok(ProcessShadow { header, rows })
    }

    /// Rows `range` as a new dataset with the same header.
    pub fn slice(&self, range: std::ops::Range<usize>) -> ProcessShadow {
        let rows = match &self.rows {
            ShadowRows::Snapshot(r) => ShadowRows::Snapshot(r[range].to_vec()),
            ShadowRows::Expectation(r) => ShadowRows::Expectation(r[range].to_vec()),
        };
        ProcessShadow { header: self.header.clone(), rows }
    }
}

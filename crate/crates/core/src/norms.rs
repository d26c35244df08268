//! Constants and checks for the inequalities between Pauli-p norms and the spectral norm.

use serde::{Deserialize, Serialize};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::dense::spectral_norm;
use crate::error::{Error, Result};
use crate::pauli::{all_strings_up_to_weight, SparsePauliOp};

/// Which closed-form constant to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConstantKind {
    GeneralKLocal { k: usize },
    BoundedDegree { k: usize, d: usize },
    Expansion { c_e: usize, d_e: usize, k: usize },
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|x| x as f64).product()
}

/// `C(k)`, `C(k, d)` or `C(c_e, d_e, k)`.
pub fn constant(kind: ConstantKind) -> Result<f64> {
    let positive = |name: &str, v: usize| {
        if v == 0 {
            Err(Error::Domain(format!("{name} must be at least 1")))
        } else {
            Ok(v as f64)
        }
    };
    let s6 = 6f64.sqrt();
    let s3 = 3f64.sqrt();
    match kind {
        ConstantKind::Expansion { c_e, d_e, k } => {
            let (c, d, kf) = (positive("c_e", c_e)?, positive("d_e", d_e)?, positive("k", k)?);
            let r = 2.0 * d / (d + 1.0);
            Ok((2.0 * factorial(k)).sqrt()
                / (c.powf(1.0 / (2.0 * d)) * kf.powf(kf + 1.5 + 1.0 / r) * (s6 + 2.0 * s3).powf(kf)))
        }
        ConstantKind::GeneralKLocal { k } => {
            let kf = positive("k", k)?;
            Ok((2.0 * factorial(k)).sqrt()
                / (2.0 * kf.powf(kf + 1.5 + (kf + 1.0) / (2.0 * kf)) * (s6 + 2.0 * s3).powf(kf)))
        }
        ConstantKind::BoundedDegree { k, d } => {
            let (kf, df) = (positive("k", k)?, positive("d", d)?);
            Ok((2.0 * factorial(k)).sqrt() / (df.sqrt() * kf.powf(kf + 2.5) * (2.0 * s6 + 4.0 * s3).powf(kf)))
        }
    }
}

/// Largest number of terms acting on any one qubit.
pub fn degree(op: &SparsePauliOp) -> usize {
    let mut counts = vec![0usize; op.num_qubits()];
    for (p, _) in op.iter() {
        for q in p.support() {
            counts[q] += 1;
        }
    }
    counts.into_iter().max().unwrap_or(0)
}

/// Largest number of groups touching any one qubit, where each group is a
/// few-body term given by its qubit support.
pub fn degree_of_groups(n: usize, groups: &[Vec<usize>]) -> Result<usize> {
    let mut counts = vec![0usize; n];
    for g in groups {
        for &q in g {
            *counts.get_mut(q).ok_or_else(|| Error::Domain(format!("qubit {q} out of range")))? += 1;
        }
    }
    Ok(counts.into_iter().max().unwrap_or(0))
}

/// Which inequality to test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InequalityKind {
    KLocal,
    BoundedDegree,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub k: usize,
    pub d: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Compares `(1/3)·C·‖O‖_{Pauli,p}` against `‖O‖`; `k` and `d` are read off the operator.
pub fn verify_inequality(op: &SparsePauliOp, kind: InequalityKind) -> Result<NormReport> {
    let k = op.max_weight().max(1);
    let d = degree(op).max(1);
    let (c, p) = match kind {
        InequalityKind::KLocal => {
            (constant(ConstantKind::GeneralKLocal { k })?, 2.0 * k as f64 / (k as f64 + 1.0))
        }
        InequalityKind::BoundedDegree => (constant(ConstantKind::BoundedDegree { k, d })?, 1.0),
    };
    let lhs = c * op.pauli_norm(p)? / 3.0;
    let rhs = spectral_norm(op)?;
    Ok(NormReport { k, d, lhs, rhs, holds: lhs <= rhs + 1e-12 })
}

/// Random operator with `|P| <= k`: each string is kept with a random density
/// and given a standard normal coefficient. Never returns the zero operator.
pub fn random_k_local<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> SparsePauliOp {
    let strings = all_strings_up_to_weight(n, k);
    let density: f64 = rng.random_range(0.02..1.0);
    loop {
        let mut op = SparsePauliOp::zero(n);
        for p in &strings {
            if rng.random::<f64>() < density {
                let c: f64 = rng.sample(StandardNormal);
                op.add_term(p.clone(), c).expect("finite coefficient on matching register");
            }
        }
        if !op.without_identity().is_empty() {
            return op;
        }
    }
}

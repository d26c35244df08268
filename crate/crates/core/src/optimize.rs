//! Randomized product-state optimizer for `k`-local Hamiltonians.
//!
//! One run splits `H = α_I I + Σ_κ H_κ`, keeps the heaviest slice `κ*` in
//! `ℓ_r`, draws `κ* - 1` layers of Haar-random replica states, picks the last
//! layer by single-qubit local optimization against the polarized coefficients
//! `β_{i,p}`, sweeps the one-parameter family `ρ(t)` and finally samples a pure
//! product state from `ρ(t*)`. The output beats the Haar average `α_I` by a
//! margin that grows with the `ℓ_r` norm of the coefficients, in expectation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms::{constant, ConstantKind};
use crate::pauli::{ExpansionProfile, KahanSum, Pauli, PauliString, SparsePauliOp};
use crate::states::{sample_haar_qubit, Bloch, ProductState};

pub const GRID_POINTS: usize = 10_001;

/// `H = α_I I + Σ_κ H_κ` with the chosen slice.
#[derive(Clone, Debug)]
pub struct SliceDecomposition {
    pub alpha_identity: f64,
    /// `slices[κ - 1] = H_κ`.
    pub slices: Vec<SparsePauliOp>,
    pub kappa_star: usize,
    pub r: f64,
}

impl SliceDecomposition {
    pub fn k(&self) -> usize {
        self.slices.len()
    }

    pub fn chosen(&self) -> &SparsePauliOp {
        &self.slices[self.kappa_star - 1]
    }
}

/// Splits `H` by weight and picks `κ* = argmax_κ Σ_{|P|=κ} |α_P|^r` (smallest on ties).
pub fn select_slice(h: &SparsePauliOp, r: f64) -> Result<SliceDecomposition> {
    let k = h.max_weight();
    if k == 0 {
        return Err(Error::Domain("Hamiltonian has no non-identity term".into()));
    }
    let slices: Vec<SparsePauliOp> = (1..=k).map(|w| h.homogeneous_part(w)).collect();
    let mut best = (0usize, f64::NEG_INFINITY);
    for (idx, s) in slices.iter().enumerate() {
        let mass: KahanSum = s.iter().map(|(_, c)| c.abs().powf(r)).collect();
        if mass.value() > best.1 {
            best = (idx + 1, mass.value());
        }
    }
    Ok(SliceDecomposition { alpha_identity: h.identity_coefficient(), slices, kappa_star: best.0, r })
}

/// `m_j(σ) = (1/L) Σ_s σ_s n_{(s,j)}` for each qubit `j`.
fn mixed_bloch(replicas: &[Vec<Bloch>], signs: &[f64]) -> Vec<Bloch> {
    let n = replicas.first().map_or(0, Vec::len);
    let l = replicas.len() as f64;
    (0..n)
        .map(|j| {
            let mut v = [0.0; 3];
            for (layer, &s) in replicas.iter().zip(signs) {
                for a in 0..3 {
                    v[a] += s * layer[j][a] / l;
                }
            }
            v
        })
        .collect()
}

fn sign_patterns(len: usize) -> impl Iterator<Item = Vec<f64>> {
    (0..1usize << len).map(move |mask| (0..len).map(|s| if mask >> s & 1 == 1 { -1.0 } else { 1.0 }).collect())
}

/// `β_{i,p}` for every qubit, by exact enumeration over the `2^{κ*-1}` sign patterns.
///
/// `replicas[s][j]` is the Bloch vector of `ψ_{(s,j)}` for `s < κ* - 1`. For
/// `κ* = 1` the result is the bare single-qubit coefficients.
pub fn compute_beta(slice: &SparsePauliOp, replicas: &[Vec<Bloch>]) -> Vec<Bloch> {
    let n = slice.num_qubits();
    let mut beta = vec![[0.0; 3]; n];
    if replicas.is_empty() {
        for (p, c) in slice.iter() {
            for (i, l) in p.iter_support() {
                beta[i][l.bloch_index().expect("support is non-identity")] += c;
            }
        }
        return beta;
    }
    let patterns: Vec<Vec<f64>> = sign_patterns(replicas.len()).collect();
    let weight = 1.0 / patterns.len() as f64;
    for signs in &patterns {
        let sign_product: f64 = signs.iter().product();
        let m = mixed_bloch(replicas, signs);
        for (p, c) in slice.iter() {
            let support: Vec<(usize, Pauli)> = p.iter_support().collect();
            for (pos, &(i, l)) in support.iter().enumerate() {
                let mut v = c * sign_product * weight;
                for (other, &(j, lj)) in support.iter().enumerate() {
                    if other != pos {
                        v *= m[j][lj.bloch_index().expect("support is non-identity")];
                    }
                }
                beta[i][l.bloch_index().expect("support is non-identity")] += v;
            }
        }
    }
    beta
}

/// Unit Bloch vector maximizing `Σ_p β_p ⟨p⟩`; `(0,0,1)` when `β ≈ 0`.
pub fn local_optimize(beta: Bloch) -> Bloch {
    let norm = (beta[0] * beta[0] + beta[1] * beta[1] + beta[2] * beta[2]).sqrt();
    if norm < 1e-14 {
        [0.0, 0.0, 1.0]
    } else {
        [beta[0] / norm, beta[1] / norm, beta[2] / norm]
    }
}

/// Replica layers, the final sign draw and the induced per-qubit direction.
#[derive(Clone, Debug)]
pub struct PolarizationDraw {
    /// `κ*` layers of `n` Bloch vectors; the last layer is locally optimized.
    pub replicas: Vec<Vec<Bloch>>,
    pub sigma: Vec<f64>,
    pub beta: Vec<Bloch>,
}

impl PolarizationDraw {
    /// Bloch vectors of `ρ(1)`: `(1/κ*) Σ_s σ_s n_{(s,j)}`; `ρ(t)` scales them by `t`.
    pub fn family_bloch(&self) -> Vec<Bloch> {
        mixed_bloch(&self.replicas, &self.sigma)
    }
}

/// Haar layers, `β`, local optimization and a fresh sign draw.
pub fn draw_polarization<R: Rng + ?Sized>(slices: &SliceDecomposition, rng: &mut R) -> PolarizationDraw {
    let n = slices.chosen().num_qubits();
    let mut replicas: Vec<Vec<Bloch>> =
        (0..slices.kappa_star - 1).map(|_| (0..n).map(|_| sample_haar_qubit(rng)).collect()).collect();
    let beta = compute_beta(slices.chosen(), &replicas);
    replicas.push(beta.iter().map(|&b| local_optimize(b)).collect());
    let sigma = (0..slices.kappa_star).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    PolarizationDraw { replicas, sigma, beta }
}

fn product_of(bloch: &[Bloch], p: &PauliString) -> f64 {
    let mut v = 1.0;
    for (q, l) in p.iter_support() {
        v *= bloch[q][l.bloch_index().expect("support is non-identity")];
    }
    v
}

/// `a_0 = α_I`, `a_κ = Tr(H_κ ρ(1))`, so that `Tr(H ρ(t)) = Σ_κ a_κ t^κ`.
pub fn family_polynomial(slices: &SliceDecomposition, draw: &PolarizationDraw) -> Vec<f64> {
    let bloch = draw.family_bloch();
    let mut a = vec![slices.alpha_identity];
    for s in &slices.slices {
        let sum: KahanSum = s.iter().map(|(p, c)| c * product_of(&bloch, p)).collect();
        a.push(sum.value());
    }
    a
}

pub fn eval_polynomial(a: &[f64], t: f64) -> f64 {
    a.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}

/// `argmax |f(t) - a_0|` over 10001 uniform points of `[-1, 1]`; ties go to the
/// smallest `|t|`, then to positive `t`.
pub fn sweep_t(a: &[f64]) -> f64 {
    let half = (GRID_POINTS - 1) / 2;
    let a0 = a.first().copied().unwrap_or(0.0);
    let mut best = (0.0, f64::NEG_INFINITY);
    for m in 0..=half {
        let t = m as f64 / half as f64;
        for cand in [t, -t] {
            let v = (eval_polynomial(a, cand) - a0).abs();
            if v > best.1 {
                best = (cand, v);
            }
        }
    }
    best.0
}

/// Draws each qubit from the eigendecomposition of `(I + v·σ)/2`.
pub fn sample_from_mixed<R: Rng + ?Sized>(bloch: &[Bloch], rng: &mut R) -> ProductState {
    let qubits = bloch
        .iter()
        .map(|v| {
            let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            let axis = if len < 1e-14 { [0.0, 0.0, 1.0] } else { [v[0] / len, v[1] / len, v[2] / len] };
            let plus = rng.random::<f64>() < (1.0 + len.min(1.0)) / 2.0;
            let s = if plus { 1.0 } else { -1.0 };
            [s * axis[0], s * axis[1], s * axis[2]]
        })
        .collect();
    ProductState::from_bloch(qubits).expect("eigenvectors are unit vectors")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Max,
    Min,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub state: Vec<Bloch>,
    pub value: f64,
    pub direction: Direction,
    pub t_star: f64,
    pub margin: f64,
    pub kappa_star: usize,
}

/// One full randomized run.
pub fn optimize<R: Rng + ?Sized>(h: &SparsePauliOp, profile: ExpansionProfile, rng: &mut R) -> Result<OptResult> {
    let slices = select_slice(h, profile.r())?;
    let draw = draw_polarization(&slices, rng);
    let a = family_polynomial(&slices, &draw);
    let t_star = sweep_t(&a);
    let direction = if eval_polynomial(&a, t_star) - slices.alpha_identity > 0.0 { Direction::Max } else { Direction::Min };
    let mixed: Vec<Bloch> = draw.family_bloch().iter().map(|v| [t_star * v[0], t_star * v[1], t_star * v[2]]).collect();
    let state = sample_from_mixed(&mixed, rng);
    let value = h.expectation(&state)?;
    Ok(OptResult {
        state: state.qubits().to_vec(),
        value,
        direction,
        t_star,
        margin: value - slices.alpha_identity,
        kappa_star: slices.kappa_star,
    })
}

/// `C(c_e, d_e, k) (Σ_{P≠I} |α_P|^r)^{1/r}`: the guaranteed mean `|margin|`.
pub fn theorem_bound(h: &SparsePauliOp, profile: ExpansionProfile) -> Result<f64> {
    let k = h.max_weight().max(1);
    let c = constant(ConstantKind::Expansion { c_e: profile.c_e.max(1), d_e: profile.d_e, k })?;
    Ok(c * h.without_identity().pauli_norm(profile.r())?)
}

/// The symmetrized lift of a homogeneous `k`-local operator to `n k` qubits;
/// replica `s`, qubit `i` maps to `s n + i`.
pub fn polarize(op: &SparsePauliOp) -> Result<SparsePauliOp> {
    let n = op.num_qubits();
    let k = op.max_weight();
    if op.iter().any(|(p, _)| p.weight() != k) {
        return Err(Error::Domain("polarization needs a homogeneous operator".into()));
    }
    let mut perm: Vec<usize> = (0..k).collect();
    let mut perms = Vec::new();
    loop {
        perms.push(perm.clone());
        if !next_permutation(&mut perm) {
            break;
        }
    }
    let scale = 1.0 / perms.len() as f64;
    let mut out = SparsePauliOp::zero(n * k);
    for (p, c) in op.iter() {
        let support: Vec<(usize, Pauli)> = p.iter_support().collect();
        for pi in &perms {
            let ops: Vec<(usize, Pauli)> = support.iter().enumerate().map(|(s, &(i, l))| (pi[s] * n + i, l)).collect();
            out.add_term(PauliString::from_sparse(n * k, &ops)?, c * scale)?;
        }
    }
    Ok(out)
}

fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Right-hand side of the polarization identity:
/// `(k^k/k!) E_σ[σ_1⋯σ_k Tr(O ⊗_i {I/2 + (t/k) Σ_s σ_s (ρ_{(s,i)} - I/2)})]`.
pub fn polarization_rhs(op: &SparsePauliOp, replicas: &[Vec<Bloch>], t: f64) -> f64 {
    let k = replicas.len();
    let kf = k as f64;
    let factorial: f64 = (1..=k).map(|x| x as f64).product();
    let patterns: Vec<Vec<f64>> = sign_patterns(k).collect();
    let mut acc = KahanSum::default();
    for signs in &patterns {
        let sign_product: f64 = signs.iter().product();
        let m: Vec<Bloch> = mixed_bloch(replicas, signs).into_iter().map(|v| [t * v[0], t * v[1], t * v[2]]).collect();
        let tr: KahanSum = op.iter().map(|(p, c)| c * product_of(&m, p)).collect();
        acc.add(sign_product * tr.value());
    }
    kf.powf(kf) / factorial * acc.value() / patterns.len() as f64
}

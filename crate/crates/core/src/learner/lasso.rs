//! `ℓ₁`-regularized regression over Pauli features by cyclic coordinate descent.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::{Design, FeatureSet, SparseRows, TrainState};
use crate::error::{Error, Result};
use crate::pauli::SparsePauliOp;
use crate::rng::seeded;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LassoOptions {
    /// Stop once a full sweep moves no coefficient by more than this.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions { tol: 1e-7, max_sweeps: 10_000 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LassoFit {
    pub coef: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
}

fn soft_threshold(g: f64, a: f64) -> f64 {
    if g > a {
        g - a
    } else if g < -a {
        g + a
    } else {
        0.0
    }
}

/// `(1/2N) ‖y − Xα‖² + a ‖α‖₁` over the first `coef.len()` columns.
pub fn lasso_objective(design: &Design, y: &[f64], coef: &[f64], a: f64) -> f64 {
    let pred = design.apply(coef);
    let rss: f64 = pred.iter().zip(y).map(|(p, t)| (t - p).powi(2)).sum();
    rss / (2.0 * design.rows() as f64) + a * coef.iter().map(|c| c.abs()).sum::<f64>()
}

struct Solver<'a> {
    design: &'a Design,
    norms: Vec<f64>,
    coef: Vec<f64>,
    resid: Vec<f64>,
    inv_n: f64,
    a: f64,
}

impl Solver<'_> {
    fn update(&mut self, j: usize) -> f64 {
        let (ri, v) = self.design.column(j);
        if self.norms[j] == 0.0 {
            let old = std::mem::take(&mut self.coef[j]);
            return old.abs();
        }
        let mut g = 0.0;
        for (&r, &x) in ri.iter().zip(v) {
            g += x * self.resid[r as usize];
        }
        g = g * self.inv_n + self.norms[j] * self.coef[j];
        let new = soft_threshold(g, self.a) / self.norms[j];
        let d = new - self.coef[j];
        if d != 0.0 {
            for (&r, &x) in ri.iter().zip(v) {
                self.resid[r as usize] -= d * x;
            }
            self.coef[j] = new;
        }
        d.abs()
    }

    fn sweep(&mut self, cols: impl Iterator<Item = usize>) -> f64 {
        let mut change = 0.0_f64;
        for j in cols {
            change = change.max(self.update(j));
        }
        change
    }
}

/// Minimizes the LASSO objective over the first `cols` columns of `design`.
///
/// Alternates full sweeps with sweeps restricted to the nonzero coefficients;
/// each of either kind counts toward `max_sweeps`.
pub fn lasso_fit(
    design: &Design,
    cols: usize,
    y: &[f64],
    a: f64,
    warm: Option<&[f64]>,
    opts: &LassoOptions,
) -> Result<LassoFit> {
    if !(a >= 0.0) || !a.is_finite() {
        return Err(Error::Domain(format!("regularization strength must be finite and >= 0, got {a}")));
    }
    if y.len() != design.rows() {
        return Err(Error::mismatch(design.rows(), y.len()));
    }
    if cols > design.cols() {
        return Err(Error::mismatch(design.cols(), cols));
    }
    if design.rows() == 0 {
        return Err(Error::Empty("no rows to fit".into()));
    }
    let inv_n = 1.0 / design.rows() as f64;
    let norms: Vec<f64> = (0..cols).map(|j| design.column(j).1.iter().map(|x| x * x).sum::<f64>() * inv_n).collect();
    let coef = match warm {
        Some(w) if w.len() == cols => w.to_vec(),
        Some(w) => return Err(Error::mismatch(cols, w.len())),
        None => vec![0.0; cols],
    };
    let pred = design.apply(&coef);
    let resid = y.iter().zip(&pred).map(|(t, p)| t - p).collect();
    let mut s = Solver { design, norms, coef, resid, inv_n, a };
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < opts.max_sweeps {
        let change = s.sweep(0..cols);
        sweeps += 1;
        if change < opts.tol {
            converged = true;
            break;
        }
        while sweeps < opts.max_sweeps {
            let active: Vec<usize> = (0..cols).filter(|&j| s.coef[j] != 0.0).collect();
            let change = s.sweep(active.into_iter());
            sweeps += 1;
            if change < opts.tol {
                break;
            }
        }
    }
    Ok(LassoFit { coef: s.coef, sweeps, converged })
}

/// Fits each `a` in the given order, warm-starting from the previous solution.
pub fn lasso_path(design: &Design, cols: usize, y: &[f64], a_seq: &[f64], opts: &LassoOptions) -> Result<Vec<LassoFit>> {
    let mut out: Vec<LassoFit> = Vec::with_capacity(a_seq.len());
    for &a in a_seq {
        let warm = out.last().map(|f| f.coef.as_slice());
        out.push(lasso_fit(design, cols, y, a, warm, opts)?);
    }
    Ok(out)
}

/// Hyperparameter grid for cross-validation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvGrid {
    pub k: Vec<usize>,
    pub a: Vec<f64>,
}

impl Default for CvGrid {
    fn default() -> Self {
        CvGrid { k: vec![1, 2, 3, 4], a: (3..=15).rev().map(|e| 2f64.powi(-e)).collect() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvScore {
    pub k: usize,
    pub a: f64,
    pub rmse: f64,
}

#[derive(Clone, Debug)]
pub struct CvResult {
    pub k: usize,
    pub a: f64,
    pub scores: Vec<CvScore>,
    pub model: SparsePauliOp,
}

struct Fold {
    train: Design,
    val: Design,
    train_rows: Vec<usize>,
    val_rows: Vec<usize>,
}

/// Shared inputs and fold split; reusable across many label vectors.
pub struct LassoProblem {
    features: FeatureSet,
    full: Design,
    folds: Vec<Fold>,
}

impl LassoProblem {
    pub fn new(features: FeatureSet, states: &[&TrainState], folds: usize, seed: u64) -> Result<Self> {
        if folds < 2 {
            return Err(Error::Config(format!("cross-validation needs at least 2 folds, got {folds}")));
        }
        if states.len() < folds {
            return Err(Error::Domain(format!("{} rows cannot fill {folds} folds", states.len())));
        }
        let rows = SparseRows::build(&features, states)?;
        let mut order: Vec<usize> = (0..rows.len()).collect();
        order.shuffle(&mut seeded(seed));
        let folds = (0..folds)
            .map(|f| {
                let mut val_rows: Vec<usize> = order.iter().skip(f).step_by(folds).copied().collect();
                val_rows.sort_unstable();
                let mut in_val = vec![false; rows.len()];
                for &r in &val_rows {
                    in_val[r] = true;
                }
                let train_rows: Vec<usize> = (0..rows.len()).filter(|&r| !in_val[r]).collect();
                Fold { train: rows.design(&train_rows), val: rows.design(&val_rows), train_rows, val_rows }
            })
            .collect();
        Ok(LassoProblem { full: rows.full_design(), features, folds })
    }

    pub fn features(&self) -> &FeatureSet {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.full.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.full.rows() == 0
    }

    /// Grid search by mean fold RMSE (ties to smaller `k`, then larger `a`), then a refit on all rows.
    pub fn cross_validate(&self, y: &[f64], grid: &CvGrid, opts: &LassoOptions) -> Result<CvResult> {
        if y.len() != self.full.rows() {
            return Err(Error::mismatch(self.full.rows(), y.len()));
        }
        if grid.k.is_empty() || grid.a.is_empty() {
            return Err(Error::Config("empty hyperparameter grid".into()));
        }
        let mut ks = grid.k.clone();
        ks.sort_unstable();
        ks.dedup();
        if ks[0] == 0 || *ks.last().unwrap() > self.features.max_weight().max(1) {
            return Err(Error::Config(format!("k grid must lie in 1..={}", self.features.max_weight())));
        }
        let a_desc = descending(&grid.a)?;
        let jobs: Vec<(usize, usize)> = (0..self.folds.len()).flat_map(|f| ks.iter().map(move |&k| (f, k))).collect();
        let rmses = jobs
            .par_iter()
            .map(|&(f, k)| {
                let fold = &self.folds[f];
                let y_tr: Vec<f64> = fold.train_rows.iter().map(|&r| y[r]).collect();
                let y_val: Vec<f64> = fold.val_rows.iter().map(|&r| y[r]).collect();
                let path = lasso_path(&fold.train, self.features.prefix_len(k), &y_tr, &a_desc, opts)?;
                Ok(path.iter().map(|fit| rmse(&fold.val.apply(&fit.coef), &y_val)).collect::<Vec<f64>>())
            })
            .collect::<Result<Vec<_>>>()?;
        let mut scores = Vec::with_capacity(ks.len() * a_desc.len());
        for (ki, &k) in ks.iter().enumerate() {
            for (ai, &a) in a_desc.iter().enumerate() {
                let mean = (0..self.folds.len()).map(|f| rmses[f * ks.len() + ki][ai]).sum::<f64>()
                    / self.folds.len() as f64;
                scores.push(CvScore { k, a, rmse: mean });
            }
        }
        let best = scores.iter().fold(scores[0], |b, s| if s.rmse < b.rmse { *s } else { b });
        let upto: Vec<f64> = a_desc.iter().copied().filter(|&a| a >= best.a).collect();
        let path = lasso_path(&self.full, self.features.prefix_len(best.k), y, &upto, opts)?;
        let coef = &path.last().expect("grid contains the best a").coef;
        Ok(CvResult { k: best.k, a: best.a, scores, model: self.to_operator(coef)? })
    }

    /// Single fit on all rows.
    pub fn fit(&self, y: &[f64], k: usize, a: f64, opts: &LassoOptions) -> Result<SparsePauliOp> {
        let fit = lasso_fit(&self.full, self.features.prefix_len(k), y, a, None, opts)?;
        self.to_operator(&fit.coef)
    }

    fn to_operator(&self, coef: &[f64]) -> Result<SparsePauliOp> {
        let strings = self.features.strings();
        SparsePauliOp::from_terms(
            self.features.num_qubits(),
            coef.iter().enumerate().filter(|(_, c)| **c != 0.0).map(|(j, &c)| (strings[j].clone(), c)),
        )
    }
}

fn descending(a: &[f64]) -> Result<Vec<f64>> {
    if a.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::Config("regularization grid must be finite and non-negative".into()));
    }
    let mut v = a.to_vec();
    v.sort_by(|x, y| y.total_cmp(x));
    v.dedup();
    Ok(v)
}

pub(crate) fn rmse(pred: &[f64], y: &[f64]) -> f64 {
    (pred.iter().zip(y).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / y.len().max(1) as f64).sqrt()
}

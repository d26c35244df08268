//! End-to-end chain experiments: collect data, fit one model per site, score it.

use serde::{Deserialize, Serialize};

use crate::dense::{BlockSpectrum, DenseState};
use crate::error::{Error, Result};
use crate::fermion::{heisenberg_z_from_rotation, z_expectations, ChainKind, FermionBackend, FieldSpec, ModelSpec};
use crate::learner::{CvGrid, FeatureSet, LassoOptions, LassoProblem, Locality, TrainState};
use crate::pauli::{Pauli, PauliExpectation, PauliString, SparsePauliOp};
use crate::rng::seeded;
use crate::shadow::{collect_process_shadow, CollectMode, Observable};
use crate::states::{sample_stab_product, GhzRotatingState, ProductState};

/// How to train per-site models of `Z_i(t)` on a chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainExperiment {
    pub model: ModelSpec,
    pub t: f64,
    pub train: usize,
    #[serde(default = "default_shots")]
    pub shots: u32,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default)]
    pub grid: CvGrid,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub lasso: LassoOptions,
    pub seed: u64,
}

fn default_shots() -> u32 {
    500
}

fn default_k_max() -> usize {
    4
}

fn default_folds() -> usize {
    2
}

impl ChainExperiment {
    pub fn new(model: ModelSpec, t: f64, train: usize, seed: u64) -> Self {
        ChainExperiment {
            model,
            t,
            train,
            shots: default_shots(),
            k_max: default_k_max(),
            grid: CvGrid::default(),
            folds: default_folds(),
            lasso: LassoOptions::default(),
            seed,
        }
    }

    pub fn xy_homogeneous(n: usize, t: f64, train: usize, seed: u64) -> Self {
        Self::new(ModelSpec { kind: ChainKind::Xy, n, field: FieldSpec::homogeneous() }, t, train, seed)
    }
}

/// Fitted `Z_i(t)` models for a set of sites, plus the exact backend.
pub struct ChainModels {
    pub backend: FermionBackend,
    pub sites: Vec<usize>,
    pub models: Vec<SparsePauliOp>,
    pub chosen: Vec<(usize, f64)>,
}

/// Collects expectation-mode data for all `Z_i` and cross-validates a LASSO model per listed site.
pub fn train_chain(exp: &ChainExperiment, sites: &[usize]) -> Result<ChainModels> {
    let n = exp.model.n;
    if let Some(&s) = sites.iter().find(|&&s| s >= n) {
        return Err(Error::Domain(format!("site {s} outside a chain of {n}")));
    }
    let backend = FermionBackend::from_spec(&exp.model, exp.t)?;
    let observables = Observable::all_z(n);
    let mode = CollectMode::Expectation { observables: observables.clone(), shots: exp.shots };
    let data = collect_process_shadow(&backend, exp.train, &mode, exp.seed)?;
    let states: Vec<TrainState> = data.inputs().into_iter().map(|l| TrainState::Stab(l.to_vec())).collect();
    let refs: Vec<&TrainState> = states.iter().collect();
    let k_max = exp.k_max.min(n);
    let problem = LassoProblem::new(FeatureSet::new(n, k_max, Locality::Contiguous), &refs, exp.folds, exp.seed)?;
    let grid = CvGrid { k: exp.grid.k.iter().map(|&k| k.min(k_max)).collect(), a: exp.grid.a.clone() };
    let mut models = Vec::with_capacity(sites.len());
    let mut chosen = Vec::with_capacity(sites.len());
    for &i in sites {
        let o = &observables[i];
        let y = data.labels(&o.op, Some(&o.id))?;
        let fit = problem.cross_validate(&y, &grid, &exp.lasso)?;
        chosen.push((fit.k, fit.a));
        models.push(fit.model);
    }
    Ok(ChainModels { backend, sites: sites.to_vec(), models, chosen })
}

impl ChainModels {
    pub fn num_sites(&self) -> usize {
        self.backend.model().num_sites()
    }

    /// Predicted `⟨Z_i(t)⟩` for each fitted site.
    pub fn predict<E: PauliExpectation + ?Sized>(&self, state: &E) -> Result<Vec<f64>> {
        self.models.iter().map(|m| m.expectation(state)).collect()
    }

    /// Exact `⟨Z_i(t)⟩` for each fitted site on a product input.
    pub fn exact_product(&self, state: &ProductState) -> Result<Vec<f64>> {
        let z = z_expectations(self.backend.rotation(), state)?;
        Ok(self.sites.iter().map(|&i| z[i]).collect())
    }

    /// Exact `⟨Z_i(t)⟩` for any input with Pauli expectations, through the Heisenberg expansion.
    pub fn exact_general<E: PauliExpectation + ?Sized>(&self, state: &E) -> Result<Vec<f64>> {
        self.sites.iter().map(|&i| heisenberg_z_from_rotation(self.backend.rotation(), i)?.expectation(state)).collect()
    }

    /// RMSE over every (state, site) pair.
    pub fn rmse(&self, states: &[ProductState]) -> Result<f64> {
        let mut se = 0.0;
        let mut count = 0usize;
        for s in states {
            for (p, e) in self.predict(s)?.into_iter().zip(self.exact_product(s)?) {
                se += (p - e).powi(2);
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::Empty("no test pairs".into()));
        }
        Ok((se / count as f64).sqrt())
    }
}

/// Held-out uniform stabilizer-product inputs, on a stream independent of training.
pub fn test_states(n: usize, count: usize, seed: u64) -> Vec<ProductState> {
    let mut rng = seeded(seed ^ 0x7e57_7e57_7e57_7e57);
    (0..count).map(|_| sample_stab_product(n, &mut rng)).collect()
}

/// Exact `⟨Z_i(t)⟩` on the GHZ-like input by dense evolution (`n <= 12`).
pub fn dense_ghz_z(model: &ModelSpec, t: f64) -> Result<Vec<f64>> {
    let chain = model.build()?;
    let spectrum = BlockSpectrum::new(&chain.hamiltonian())?;
    let psi = spectrum.evolve_state(&DenseState::ghz_rotating(model.n)?, t)?;
    let n = model.n;
    Ok((0..n).map(|i| psi.pauli_expectation(&PauliString::single(n, i, Pauli::Z))).collect())
}

/// Closed-form GHZ-like input for any size.
pub fn ghz_input(n: usize) -> Result<GhzRotatingState> {
    GhzRotatingState::new(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_chain_learns_and_cross_checks() {
        let mut exp = ChainExperiment::xy_homogeneous(6, 2.0, 600, 1);
        exp.grid = CvGrid { k: vec![1, 2], a: vec![2f64.powi(-10), 2f64.powi(-6)] };
        let models = train_chain(&exp, &[0, 3]).unwrap();
        assert_eq!(models.models.len(), 2);
        let test = test_states(6, 30, 1);
        assert!(models.rmse(&test).unwrap() < 0.5);
        let s = &test[0];
        let a = models.exact_product(s).unwrap();
        let b = models.exact_general(s).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10);
        }
        assert!(train_chain(&exp, &[6]).is_err());
    }

    #[test]
    fn dense_and_closed_form_ghz_agree() {
        let spec = ModelSpec { kind: ChainKind::Ising, n: 6, field: FieldSpec::homogeneous() };
        let dense = dense_ghz_z(&spec, 1.3).unwrap();
        let backend = FermionBackend::from_spec(&spec, 1.3).unwrap();
        let ghz = ghz_input(6).unwrap();
        for (i, d) in dense.iter().enumerate() {
            let c = heisenberg_z_from_rotation(backend.rotation(), i).unwrap().expectation(&ghz).unwrap();
            assert!((c - d).abs() < 1e-9, "site {i}: {c} vs {d}");
        }
    }
}

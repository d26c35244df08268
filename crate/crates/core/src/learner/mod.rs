//! Learning low-weight Pauli models of unknown observables and of Heisenberg-evolved observables.
//!
//! All learners consume `(ρ_ℓ, y_ℓ)` pairs and produce a [`LearnedObservable`]
//! `Ô = Σ_P α̂_P P` whose prediction on a state only needs its `k`-body marginals.

mod features;
mod lasso;

pub use features::{Design, FeatureSet, Locality, SparseRows, TrainRow, TrainState};
pub use lasso::{lasso_fit, lasso_objective, lasso_path, CvGrid, CvResult, CvScore, LassoFit, LassoOptions, LassoProblem};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dense::DensityMatrix;
use crate::error::{Error, Result};
use crate::norms::{constant, degree, ConstantKind};
use crate::pauli::{KahanSum, PauliExpectation, PauliString, SparsePauliOp};
use crate::shadow::ProcessShadow;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LearnerMode {
    #[serde(rename = "appendixD-setting1")]
    ObservableSetting1,
    #[serde(rename = "appendixD-setting2")]
    ObservableSetting2,
    #[serde(rename = "processE-setting1")]
    ProcessSetting1,
    #[serde(rename = "processE-setting2")]
    ProcessSetting2,
    #[serde(rename = "lasso")]
    Lasso,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerConfig {
    pub mode: LearnerMode,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon_prime: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Overrides the weight cutoff derived from `epsilon`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Overrides the derived filter scale `ε̃`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tilde_eps: Option<f64>,
    #[serde(default)]
    pub locality: Locality,
    #[serde(default)]
    pub grid: CvGrid,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub lasso: LassoOptions,
    /// Seed for fold assignment.
    #[serde(default)]
    pub seed: u64,
}

fn default_epsilon() -> f64 {
    0.1
}

fn default_delta() -> f64 {
    0.05
}

fn default_folds() -> usize {
    2
}

impl LearnerConfig {
    pub fn new(mode: LearnerMode) -> Self {
        LearnerConfig {
            mode,
            epsilon: default_epsilon(),
            epsilon_prime: default_epsilon(),
            delta: default_delta(),
            k: None,
            tilde_eps: None,
            locality: Locality::All,
            grid: CvGrid::default(),
            folds: default_folds(),
            lasso: LassoOptions::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("epsilon", self.epsilon), ("epsilon_prime", self.epsilon_prime), ("delta", self.delta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if self.k == Some(0) {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if let Some(t) = self.tilde_eps {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("tilde_eps must be positive, got {t}")));
            }
        }
        if self.folds < 2 {
            return Err(Error::Config("folds must be at least 2".into()));
        }
        Ok(())
    }

    /// `⌈log_{1.5}(1/ε)⌉` in setting 1, `⌈log_{1.5}(2/ε)⌉` in setting 2.
    pub fn weight_cutoff(&self) -> usize {
        if let Some(k) = self.k {
            return k;
        }
        let target = match self.mode {
            LearnerMode::ObservableSetting2 | LearnerMode::ProcessSetting2 => 2.0 / self.epsilon,
            _ => 1.0 / self.epsilon,
        };
        ((target.ln() / 1.5f64.ln()) - 1e-12).ceil().max(1.0) as usize
    }
}

/// Empirical `x̂_P` and `β̂_P` for a list of Pauli strings.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterStats {
    pub paulis: Vec<PauliString>,
    pub x: Vec<f64>,
    pub beta: Vec<f64>,
}

impl FilterStats {
    /// Replaces `β̂_P` with its value `(1/3)^{|P|}` under uniform stabilizer-product inputs.
    pub fn with_analytic_beta(mut self) -> Self {
        self.beta = self.paulis.iter().map(|p| 3f64.powi(-(p.weight() as i32))).collect();
        self
    }
}

/// `x̂_P = (1/N) Σ_ℓ Tr(P ρ_ℓ) y_ℓ` and `β̂_P = (1/N) Σ_ℓ Tr(P ρ_ℓ)²`.
pub fn estimate_stats(rows: &[TrainRow], features: &FeatureSet) -> Result<FilterStats> {
    if rows.is_empty() {
        return Err(Error::Empty("no training rows".into()));
    }
    let states: Vec<&TrainState> = rows.iter().map(|r| &r.state).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.y).collect();
    let (x, beta) = SparseRows::build(features, &states)?.full_design().moments(&y);
    Ok(FilterStats { paulis: features.strings().to_vec(), x, beta })
}

/// The three-branch filter for a single Pauli coefficient.
pub fn filter_coefficient(x: f64, beta: f64, eta: f64, tilde_eps: f64) -> f64 {
    if beta <= 2.0 * tilde_eps || x.abs() / beta.sqrt() <= 2.0 * eta * tilde_eps.sqrt() {
        0.0
    } else {
        x / beta
    }
}

fn check_scales(eta: f64, tilde_eps: f64) -> Result<()> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::Domain(format!("eta must be finite and non-negative, got {eta}")));
    }
    if !(tilde_eps > 0.0 && tilde_eps.is_finite()) {
        return Err(Error::Domain(format!("tilde_eps must be positive, got {tilde_eps}")));
    }
    Ok(())
}

/// Applies [`filter_coefficient`] to every string in `stats`.
pub fn filter_coefficients(stats: &FilterStats, eta: f64, tilde_eps: f64) -> Result<SparsePauliOp> {
    check_scales(eta, tilde_eps)?;
    build_op(stats, |x, b| filter_coefficient(x, b, eta, tilde_eps))
}

/// Keeps `x̂_P / β̂_P` whenever `β̂_P > 2ε̃`, with no magnitude test.
pub fn filter_small_beta(stats: &FilterStats, tilde_eps: f64) -> Result<SparsePauliOp> {
    check_scales(0.0, tilde_eps)?;
    build_op(stats, |x, b| if b <= 2.0 * tilde_eps { 0.0 } else { x / b })
}

fn build_op(stats: &FilterStats, rule: impl Fn(f64, f64) -> f64) -> Result<SparsePauliOp> {
    let n = stats.paulis.first().map_or(0, PauliString::num_qubits);
    SparsePauliOp::from_terms(
        n,
        stats
            .paulis
            .iter()
            .zip(stats.x.iter().zip(&stats.beta))
            .map(|(p, (&x, &b))| (p.clone(), rule(x, b)))
            .filter(|(_, c)| *c != 0.0),
    )
}

/// A learned model `h(ρ) = Tr(Ô ρ)`, optionally clipped to `[−Θ̂, Θ̂]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LearnedObservable {
    pub coefficients: SparsePauliOp,
    /// `None` disables clipping.
    pub theta_hat: Option<f64>,
    pub config: Value,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    n: usize,
    coefficients: Value,
    theta_hat: Option<f64>,
    #[serde(default)]
    config: Value,
}

impl LearnedObservable {
    pub fn zero(n: usize, theta_hat: Option<f64>, config: Value) -> Self {
        LearnedObservable { coefficients: SparsePauliOp::zero(n), theta_hat, config }
    }

    pub fn num_qubits(&self) -> usize {
        self.coefficients.num_qubits()
    }

    fn clip(&self, v: f64) -> f64 {
        match self.theta_hat {
            Some(t) => v.clamp(-t, t),
            None => v,
        }
    }

    /// `h(ρ)` from exact Pauli expectations.
    pub fn predict<E: PauliExpectation + ?Sized>(&self, state: &E) -> Result<f64> {
        Ok(self.clip(self.coefficients.expectation(state)?))
    }

    /// `h(ρ)` from a fallible source of `Tr(P ρ)`, such as a table of marginals.
    pub fn predict_with<F>(&self, mut expectation: F) -> Result<f64>
    where
        F: FnMut(&PauliString) -> Result<f64>,
    {
        let mut acc = KahanSum::default();
        for (p, c) in self.coefficients.sorted_terms() {
            acc.add(c * expectation(&p)?);
        }
        Ok(self.clip(acc.value()))
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(ModelFile {
            n: self.num_qubits(),
            coefficients: self.coefficients.to_json(),
            theta_hat: self.theta_hat,
            config: self.config.clone(),
        })
        .expect("model serializes")
    }

    pub fn from_json(value: &Value) -> Result<Self> {
        let file: ModelFile = serde_json::from_value(value.clone())?;
        let empty = file.coefficients.as_array().is_some_and(Vec::is_empty);
        let coefficients =
            if empty { SparsePauliOp::zero(file.n) } else { SparsePauliOp::from_json(&file.coefficients)? };
        if coefficients.num_qubits() != file.n {
            return Err(Error::mismatch(file.n, coefficients.num_qubits()));
        }
        if let Some(t) = file.theta_hat {
            if !(t >= 0.0) {
                return Err(Error::Parse(format!("theta_hat must be non-negative, got {t}")));
            }
        }
        Ok(LearnedObservable { coefficients, theta_hat: file.theta_hat, config: file.config })
    }
}

/// Reduced density matrices on chosen supports, answering `Tr(P ρ)` for
/// strings supported inside one of them.
#[derive(Clone, Debug, Default)]
pub struct Marginals {
    n: usize,
    rdms: BTreeMap<Vec<usize>, DensityMatrix>,
}

impl Marginals {
    pub fn new(n: usize) -> Self {
        Marginals { n, rdms: BTreeMap::new() }
    }

    /// Stores the marginal of `rho` on every listed support.
    pub fn from_state(rho: &DensityMatrix, supports: impl IntoIterator<Item = Vec<usize>>) -> Result<Self> {
        let mut m = Marginals::new(rho.num_qubits());
        for mut s in supports {
            s.sort_unstable();
            s.dedup();
            let r = rho.reduced(&s)?;
            m.rdms.insert(s, r);
        }
        Ok(m)
    }

    pub fn insert(&mut self, mut support: Vec<usize>, rdm: DensityMatrix) -> Result<()> {
        support.sort_unstable();
        if support.iter().any(|&q| q >= self.n) {
            return Err(Error::Domain("support outside the register".into()));
        }
        if rdm.num_qubits() != support.len() {
            return Err(Error::mismatch(support.len(), rdm.num_qubits()));
        }
        self.rdms.insert(support, rdm);
        Ok(())
    }

    pub fn expectation(&self, p: &PauliString) -> Result<f64> {
        if p.num_qubits() != self.n {
            return Err(Error::mismatch(self.n, p.num_qubits()));
        }
        let support = p.support();
        if support.is_empty() {
            return Ok(1.0);
        }
        let (dom, rdm) = self
            .rdms
            .iter()
            .find(|(dom, _)| support.iter().all(|q| dom.binary_search(q).is_ok()))
            .ok_or_else(|| Error::Domain(format!("no marginal covers {p}")))?;
        let local: Vec<_> = p.iter_support().map(|(q, l)| (dom.binary_search(&q).expect("covered"), l)).collect();
        Ok(rdm.pauli_expectation(&PauliString::from_sparse(dom.len(), &local)?))
    }
}

/// `ln ε̃ = (k+1) ln(ε′/12) + 2k ln(C(k)/3)`.
fn ln_tilde_eps_observable(epsilon_prime: f64, k: usize) -> Result<f64> {
    let ck = constant(ConstantKind::GeneralKLocal { k })?;
    Ok((k as f64 + 1.0) * (epsilon_prime / 12.0).ln() + 2.0 * k as f64 * (ck / 3.0).ln())
}

fn from_ln(ln: f64) -> Result<f64> {
    let v = ln.exp();
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numeric(format!("filter scale exp({ln}) is not representable")))
    }
}

fn split_states(rows: &[TrainRow]) -> (Vec<&TrainState>, Vec<f64>) {
    (rows.iter().map(|r| &r.state).collect(), rows.iter().map(|r| r.y).collect())
}

/// Learns `O^unk` from `(ρ_ℓ, Tr(O^unk ρ_ℓ))` pairs.
pub fn learn_observable(rows: &[TrainRow], config: &LearnerConfig) -> Result<LearnedObservable> {
    config.validate()?;
    if rows.len() < 10 {
        return Err(Error::Domain(format!("need at least 10 rows, got {}", rows.len())));
    }
    let n = rows[0].state.num_qubits();
    if let Some(r) = rows.iter().find(|r| r.state.num_qubits() != n) {
        return Err(Error::mismatch(n, r.state.num_qubits()));
    }
    let provenance = serde_json::to_value(config)?;
    let k = config.weight_cutoff().min(n);
    let features = FeatureSet::new(n, k, config.locality);
    match config.mode {
        LearnerMode::ObservableSetting1 => {
            let n_tr = 4 * rows.len() / 5;
            let (train, val) = rows.split_at(n_tr);
            let theta = train.iter().fold(0.0_f64, |m, r| m.max(r.y.abs()));
            if theta == 0.0 {
                return Ok(LearnedObservable::zero(n, Some(0.0), provenance));
            }
            let ln_eps = match config.tilde_eps {
                Some(t) => t.ln(),
                None => ln_tilde_eps_observable(config.epsilon_prime, config.weight_cutoff())?,
            };
            let tilde_eps = from_ln(ln_eps)?;
            let r_max = (-ln_eps / 2f64.ln()).ceil().max(0.0) as i32;
            let stats = estimate_stats(train, &features)?;
            let (val_states, val_y) = split_states(val);
            let val_design = SparseRows::build(&features, &val_states)?.full_design();
            let mut best: Option<(f64, Vec<f64>)> = None;
            for j in 0..=r_max {
                let eta = 2f64.powi(j) * theta;
                let coef: Vec<f64> = stats
                    .x
                    .iter()
                    .zip(&stats.beta)
                    .map(|(&x, &b)| filter_coefficient(x, b, eta, tilde_eps))
                    .collect();
                let pred = val_design.apply(&coef);
                let mse = pred.iter().zip(&val_y).map(|(p, y)| (p.clamp(-theta, theta) - y).powi(2)).sum::<f64>()
                    / val_y.len() as f64;
                if best.as_ref().is_none_or(|(b, _)| mse < *b) {
                    best = Some((mse, coef));
                }
            }
            let coef = best.expect("grid is nonempty").1;
            let op = SparsePauliOp::from_terms(
                n,
                features.strings().iter().cloned().zip(coef).filter(|(_, c)| *c != 0.0),
            )?;
            Ok(LearnedObservable { coefficients: op, theta_hat: Some(theta), config: provenance })
        }
        LearnerMode::ObservableSetting2 => {
            if rows.iter().all(|r| r.y == 0.0) {
                return Ok(LearnedObservable::zero(n, None, provenance));
            }
            let tilde_eps = match config.tilde_eps {
                Some(t) => t,
                None => from_ln(config.epsilon.ln() - 6f64.ln() - config.weight_cutoff() as f64 * (n as f64).ln())?,
            };
            let stats = estimate_stats(rows, &features)?;
            Ok(LearnedObservable { coefficients: filter_small_beta(&stats, tilde_eps)?, theta_hat: None, config: provenance })
        }
        LearnerMode::Lasso => {
            let (states, y) = split_states(rows);
            let model = lasso_model(n, &states, &y, config)?;
            Ok(LearnedObservable { coefficients: model, theta_hat: None, config: provenance })
        }
        other => Err(Error::Config(format!("{other:?} learns processes, not observables"))),
    }
}

fn lasso_model(n: usize, states: &[&TrainState], y: &[f64], config: &LearnerConfig) -> Result<SparsePauliOp> {
    if y.iter().all(|v| *v == 0.0) {
        return Ok(SparsePauliOp::zero(n));
    }
    let k_max = config.grid.k.iter().copied().max().unwrap_or(1).min(n);
    let grid = CvGrid { k: config.grid.k.iter().map(|&k| k.min(n)).collect(), a: config.grid.a.clone() };
    let problem = LassoProblem::new(FeatureSet::new(n, k_max, config.locality), states, config.folds, config.seed)?;
    Ok(problem.cross_validate(y, &grid, &config.lasso)?.model)
}

/// The filter scale `ε̃` for process learning in either setting.
pub fn process_tilde_eps(config: &LearnerConfig, n: usize, observable: &SparsePauliOp) -> Result<f64> {
    if let Some(t) = config.tilde_eps {
        return Ok(t);
    }
    let k = config.weight_cutoff();
    let kappa = observable.max_weight().max(1);
    let d = degree(observable).max(1);
    let ckd = constant(ConstantKind::BoundedDegree { k: kappa, d })?;
    let kf = k as f64;
    let ln = match config.mode {
        LearnerMode::ProcessSetting1 => {
            let ck = constant(ConstantKind::GeneralKLocal { k })?;
            (kf + 1.0) * (config.epsilon_prime / (6.0 * 2f64.powf(kf))).ln()
                + 2.0 * (ckd / 3.0).ln()
                + 2.0 * kf * (ck / 3.0).ln()
        }
        LearnerMode::ProcessSetting2 => {
            config.epsilon.ln() - (9.0 * 2f64.powf(kf + 1.0)).ln() - kf * (n as f64).ln() + 2.0 * (ckd / 3.0).ln()
        }
        other => return Err(Error::Config(format!("{other:?} has no process filter scale"))),
    };
    from_ln(ln)
}

/// Learns `h(ρ, O) ≈ Tr(O E(ρ))` from a process shadow.
pub fn learn_process(shadow: &ProcessShadow, observable: &SparsePauliOp, config: &LearnerConfig) -> Result<LearnedObservable> {
    let y = shadow.labels(observable, None)?;
    learn_process_labels(shadow, observable, &y, config)
}

/// As [`learn_process`], with labels `y_ℓ(O)` already extracted.
pub fn learn_process_labels(
    shadow: &ProcessShadow,
    observable: &SparsePauliOp,
    y: &[f64],
    config: &LearnerConfig,
) -> Result<LearnedObservable> {
    config.validate()?;
    let n = shadow.num_qubits();
    if observable.num_qubits() != n {
        return Err(Error::mismatch(n, observable.num_qubits()));
    }
    if shadow.is_empty() {
        return Err(Error::Empty("process shadow has no rows".into()));
    }
    if y.len() != shadow.len() {
        return Err(Error::mismatch(shadow.len(), y.len()));
    }
    let provenance = serde_json::to_value(config)?;
    let states: Vec<TrainState> = shadow.inputs().into_iter().map(|l| TrainState::Stab(l.to_vec())).collect();
    let refs: Vec<&TrainState> = states.iter().collect();
    if config.mode == LearnerMode::Lasso {
        let model = lasso_model(n, &refs, y, config)?;
        return Ok(LearnedObservable { coefficients: model, theta_hat: None, config: provenance });
    }
    let tilde_eps = process_tilde_eps(config, n, observable)?;
    let eta = observable.pauli_norm(1.0)?;
    let features = FeatureSet::new(n, config.weight_cutoff().min(n), config.locality);
    let (x, _) = SparseRows::build(&features, &refs)?.full_design().moments(y);
    let stats = FilterStats { paulis: features.strings().to_vec(), x, beta: Vec::new() }.with_analytic_beta();
    Ok(LearnedObservable { coefficients: filter_coefficients(&stats, eta, tilde_eps)?, theta_hat: None, config: provenance })
}

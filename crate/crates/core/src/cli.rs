//! Command-line harness: data generation, training, prediction, optimizer runs,
//! norm checks and figure data.
//!
//! Every command reads an optional JSON config, needs a seed (from `--seed` or
//! the config), and stamps its output with the config hash, the seed and the
//! crate version.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::dense::{single_qubit_rotation, DenseChannel};
use crate::error::{Error, Result};
use crate::experiments::{dense_ghz_z, ghz_input, test_states, train_chain, ChainExperiment, ChainModels};
use crate::fermion::{ChainKind, FermionBackend, FieldSpec, ModelSpec};
use crate::learner::{
    learn_observable, learn_process_labels, CvGrid, LearnedObservable, LearnerConfig, LearnerMode, TrainRow,
};
use crate::norms::{random_k_local, verify_inequality, InequalityKind};
use crate::optimize::{optimize, theorem_bound, Direction};
use crate::pauli::{Pauli, SparsePauliOp};
use crate::rng::substream;
use crate::shadow::{
    collect_process_shadow, CollectMode, DenseBackend, Observable, ProcessBackend, ProcessShadow, ShadowMode,
};
use crate::states::{Bloch, ProductState, StabLabel};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "procshadow", version, about = "Learn quantum processes from randomized product-state data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON experiment config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the config's `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run randomized experiments on a channel and write a JSONL dataset.
    GenData,
    /// Fit a model for one observable from a dataset.
    Learn {
        #[arg(long)]
        data: Option<PathBuf>,
        /// Observable id, e.g. `Z_3`.
        #[arg(long)]
        observable: Option<String>,
    },
    /// Evaluate a model on a JSONL file of input states.
    Predict {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        states: Option<PathBuf>,
    },
    /// Run the randomized product-state optimizer on a Hamiltonian.
    Optimize {
        #[arg(long)]
        hamiltonian: Option<PathBuf>,
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Check both norm inequalities on random local operators.
    VerifyNorms {
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Regenerate the data behind a figure as CSV.
    ReproduceFig {
        #[arg(value_enum)]
        which: Figure,
    },
    /// Time the main kernels.
    Bench,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    #[value(name = "2b")]
    ErrorVsSize,
    #[value(name = "2c")]
    ErrorVsTime,
    #[value(name = "2d")]
    ErrorVsLength,
    #[value(name = "3")]
    DomainWall,
    #[value(name = "4")]
    Entangled,
}

/// Channel under study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ChannelSpec {
    Identity { n: usize },
    Hamiltonian { hamiltonian: Value, t: f64 },
    Rotation { n: usize, qubit: usize, axis: char, theta: f64 },
    Chain { model: ModelSpec, t: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub count: usize,
    pub mode: ShadowMode,
    #[serde(default)]
    pub shots: Option<u32>,
    #[serde(default)]
    pub path: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSpec {
    #[serde(default)]
    pub hamiltonian: Option<PathBuf>,
    #[serde(default)]
    pub runs: Option<usize>,
    /// Expansion dimension; the operator's maximum weight when absent.
    #[serde(default)]
    pub d_e: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormsSpec {
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub trials: Option<usize>,
}

/// Figure settings; absent fields take the figure's defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FigureSpec {
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub t: Option<f64>,
    #[serde(default)]
    pub train: Option<usize>,
    #[serde(default)]
    pub sizes: Option<Vec<usize>>,
    #[serde(default)]
    pub times: Option<Vec<f64>>,
    #[serde(default)]
    pub lengths: Option<Vec<usize>>,
    #[serde(default)]
    pub shots: Option<u32>,
    #[serde(default)]
    pub test: Option<usize>,
    /// 0-based sites to fit; all sites when absent.
    #[serde(default)]
    pub sites: Option<Vec<usize>>,
    #[serde(default)]
    pub grid: Option<CvGrid>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub channel: Option<ChannelSpec>,
    #[serde(default)]
    pub dataset: Option<DatasetSpec>,
    #[serde(default)]
    pub observables: Option<Vec<Observable>>,
    #[serde(default)]
    pub learner: Option<LearnerConfig>,
    /// Observable id to learn.
    #[serde(default)]
    pub target: Option<String>,
    #[serde(default)]
    pub model: Option<PathBuf>,
    #[serde(default)]
    pub states: Option<PathBuf>,
    #[serde(default)]
    pub optimize: Option<OptimizeSpec>,
    #[serde(default)]
    pub norms: Option<NormsSpec>,
    #[serde(default)]
    pub figure: Option<FigureSpec>,
}

/// Config hash, seed and version attached to every output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub seed: u64,
    pub version: String,
}

impl Provenance {
    fn csv_preamble(&self) -> String {
        format!(
            "# procshadow {}\n# config_sha256={}\n# seed={}\n",
            self.version, self.config_sha256, self.seed
        )
    }
}

struct Context {
    config: ExperimentConfig,
    provenance: Provenance,
    out: Option<PathBuf>,
}

impl Context {
    fn writer(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(BufWriter::new(io::stdout())),
        })
    }

    fn seed(&self) -> u64 {
        self.provenance.seed
    }
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Exit status for an error: 3 for numerical failures, 2 for everything else.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numeric(_) => 3,
        _ => 2,
    }
}

/// Parses arguments, runs the command and returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        // a pool may already exist when several commands run in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let raw = match &cli.config {
        Some(p) => std::fs::read(p).map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?,
        None => b"{}".to_vec(),
    };
    let config: ExperimentConfig =
        serde_json::from_slice(&raw).map_err(|e| Error::Config(format!("config: {e}")))?;
    let seed = cli
        .seed
        .or(config.seed)
        .ok_or_else(|| Error::Config("a seed is required (--seed or \"seed\" in the config)".into()))?;
    let provenance = Provenance { config_sha256: sha256_hex(&raw), seed, version: VERSION.to_string() };
    let ctx = Context { config, provenance, out: cli.out };
    match cli.command {
        Command::GenData => gen_data(&ctx),
        Command::Learn { data, observable } => learn(&ctx, data, observable),
        Command::Predict { model, states } => predict(&ctx, model, states),
        Command::Optimize { hamiltonian, runs } => run_optimize(&ctx, hamiltonian, runs),
        Command::VerifyNorms { k, n, trials } => verify_norms(&ctx, k, n, trials),
        Command::ReproduceFig { which } => reproduce_fig(&ctx, which),
        Command::Bench => bench(&ctx),
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn required<T: Clone>(v: Option<T>, what: &str) -> Result<T> {
    v.ok_or_else(|| Error::Config(format!("missing {what}")))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))
}

/// Builds the backend for a channel spec.
pub fn build_backend(spec: &ChannelSpec) -> Result<Box<dyn ProcessBackend>> {
    let describe = serde_json::to_value(spec)?;
    Ok(match spec {
        ChannelSpec::Identity { n } => Box::new(DenseBackend::new(DenseChannel::Identity(*n), describe)),
        ChannelSpec::Hamiltonian { hamiltonian, t } => {
            let h = SparsePauliOp::from_json(hamiltonian)?;
            Box::new(DenseBackend::new(DenseChannel::hamiltonian(&h, *t)?, describe))
        }
        ChannelSpec::Rotation { n, qubit, axis, theta } => {
            let axis = Pauli::from_char(*axis)?;
            if *qubit >= *n {
                return Err(Error::Config(format!("rotation qubit {qubit} outside {n} qubits")));
            }
            Box::new(DenseBackend::new(DenseChannel::unitary(single_qubit_rotation(*n, *qubit, axis, *theta)?)?, describe))
        }
        ChannelSpec::Chain { model, t } => Box::new(FermionBackend::from_spec(model, *t)?),
    })
}

fn gen_data(ctx: &Context) -> Result<()> {
    let channel = required(ctx.config.channel.clone(), "\"channel\" in the config")?;
    let dataset = required(ctx.config.dataset.clone(), "\"dataset\" in the config")?;
    let backend = build_backend(&channel)?;
    let mode = match dataset.mode {
        ShadowMode::Snapshot => CollectMode::Snapshot,
        ShadowMode::Expectation => CollectMode::Expectation {
            observables: ctx.config.observables.clone().unwrap_or_else(|| Observable::all_z(backend.num_qubits())),
            shots: required(dataset.shots, "\"dataset.shots\" for expectation mode")?,
        },
    };
    let mut data = collect_process_shadow(backend.as_ref(), dataset.count, &mode, ctx.seed())?;
    data.header.provenance = Some(serde_json::to_value(&ctx.provenance)?);
    let mut w = ctx.writer()?;
    data.write_jsonl(&mut w)?;
    w.flush()?;
    Ok(())
}

fn learn(ctx: &Context, data: Option<PathBuf>, observable: Option<String>) -> Result<()> {
    let path = data.or_else(|| ctx.config.dataset.as_ref().and_then(|d| d.path.clone()));
    let path = required(path, "dataset path (--data or \"dataset.path\")")?;
    let shadow = ProcessShadow::read_jsonl(open(&path)?)?;
    let mut cfg = required(ctx.config.learner.clone(), "\"learner\" in the config")?;
    cfg.seed = ctx.seed();
    let id = observable.or_else(|| ctx.config.target.clone());
    let target = resolve_observable(&shadow, ctx.config.observables.as_deref(), id.as_deref())?;
    let y = shadow.labels(&target.op, Some(&target.id))?;
    let mut model = match cfg.mode {
        LearnerMode::ObservableSetting1 | LearnerMode::ObservableSetting2 => {
            let rows: Vec<TrainRow> =
                shadow.inputs().into_iter().zip(&y).map(|(l, &y)| TrainRow::stab(l.to_vec(), y)).collect();
            learn_observable(&rows, &cfg)?
        }
        _ => learn_process_labels(&shadow, &target.op, &y, &cfg)?,
    };
    model.config = json!({"learner": cfg, "observable": target.id});
    let mut file = model.to_json();
    file["provenance"] = serde_json::to_value(&ctx.provenance)?;
    let mut w = ctx.writer()?;
    serde_json::to_writer_pretty(&mut w, &file)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn resolve_observable(shadow: &ProcessShadow, configured: Option<&[Observable]>, id: Option<&str>) -> Result<Observable> {
    let recorded = &shadow.header.observables;
    let pool: Vec<Observable> = recorded.iter().cloned().chain(configured.unwrap_or(&[]).iter().cloned()).collect();
    match id {
        Some(id) => pool
            .into_iter()
            .find(|o| o.id == id)
            .ok_or_else(|| Error::Config(format!("observable {id} is neither recorded nor configured"))),
        None => pool.into_iter().next().ok_or_else(|| Error::Config("no observable to learn; name one".into())),
    }
}

/// One input state per line: `{"labels": [...]}`, `{"bloch": [[x, y, z], ...]}`,
/// or a dataset row with an `"in"` field. Dataset headers are skipped.
#[derive(Deserialize)]
#[serde(untagged)]
enum StateRecord {
    Labels { labels: Vec<StabLabel> },
    Bloch { bloch: Vec<Bloch> },
    Row {
        #[serde(rename = "in")]
        input: Vec<StabLabel>,
    },
    Header {
        #[serde(rename = "mode")]
        _mode: ShadowMode,
    },
}

/// Reads the state file format accepted by `predict`.
pub fn read_states<R: BufRead>(r: R) -> Result<Vec<ProductState>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: StateRecord =
            serde_json::from_str(&line).map_err(|e| Error::Parse(format!("states line {}: {e}", i + 1)))?;
        match rec {
            StateRecord::Labels { labels } | StateRecord::Row { input: labels } => {
                out.push(ProductState::from_labels(&labels))
            }
            StateRecord::Bloch { bloch } => out.push(ProductState::from_bloch(bloch)?),
            StateRecord::Header { .. } => {}
        }
    }
    Ok(out)
}

fn predict(ctx: &Context, model: Option<PathBuf>, states: Option<PathBuf>) -> Result<()> {
    let model_path = required(model.or_else(|| ctx.config.model.clone()), "model path (--model or \"model\")")?;
    let states_path = required(states.or_else(|| ctx.config.states.clone()), "states path (--states or \"states\")")?;
    let value: Value = serde_json::from_reader(open(&model_path)?)?;
    let model = LearnedObservable::from_json(&value)?;
    let states = read_states(open(&states_path)?)?;
    let preds = states.par_iter().map(|s| model.predict(s)).collect::<Result<Vec<_>>>()?;
    let mut w = ctx.writer()?;
    w.write_all(ctx.provenance.csv_preamble().as_bytes())?;
    writeln!(w, "index,prediction")?;
    for (i, p) in preds.iter().enumerate() {
        writeln!(w, "{i},{}", fmt_f64(*p))?;
    }
    w.flush()?;
    Ok(())
}

/// Summary of repeated optimizer runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizeReport {
    pub provenance: Provenance,
    pub n: usize,
    pub k: usize,
    pub c_e: usize,
    pub d_e: usize,
    pub runs: usize,
    pub maximizing_runs: usize,
    pub mean_abs_margin: f64,
    pub std_error: f64,
    pub theorem_bound: f64,
    pub bound_met: bool,
}

fn run_optimize(ctx: &Context, hamiltonian: Option<PathBuf>, runs: Option<usize>) -> Result<()> {
    let spec = ctx.config.optimize.clone().unwrap_or_default();
    let path = required(hamiltonian.or(spec.hamiltonian), "Hamiltonian (--hamiltonian or \"optimize.hamiltonian\")")?;
    let value: Value = serde_json::from_reader(open(&path)?)?;
    let h = SparsePauliOp::from_json(&value)?;
    let runs = runs.or(spec.runs).unwrap_or(1000);
    if runs == 0 {
        return Err(Error::Config("runs must be positive".into()));
    }
    let k = h.max_weight().max(1);
    let profile = h.expansion_coefficient(spec.d_e.unwrap_or(k).min(h.num_qubits()))?;
    let seed = ctx.seed();
    let results = (0..runs)
        .into_par_iter()
        .map(|r| optimize(&h, profile, &mut substream(seed, r as u64)))
        .collect::<Result<Vec<_>>>()?;
    let margins: Vec<f64> = results.iter().map(|r| r.margin.abs()).collect();
    let mean = margins.iter().sum::<f64>() / runs as f64;
    let var = margins.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (runs.max(2) - 1) as f64;
    let std_error = (var / runs as f64).sqrt();
    let bound = theorem_bound(&h, profile)?;
    let report = OptimizeReport {
        provenance: ctx.provenance.clone(),
        n: h.num_qubits(),
        k,
        c_e: profile.c_e,
        d_e: profile.d_e,
        runs,
        maximizing_runs: results.iter().filter(|r| r.direction == Direction::Max).count(),
        mean_abs_margin: mean,
        std_error,
        theorem_bound: bound,
        bound_met: mean + 3.0 * std_error >= bound,
    };
    let mut w = ctx.writer()?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn verify_norms(ctx: &Context, k: Option<usize>, n: Option<usize>, trials: Option<usize>) -> Result<()> {
    let spec = ctx.config.norms.clone().unwrap_or_default();
    let k = k.or(spec.k).unwrap_or(2);
    let n = n.or(spec.n).unwrap_or(4);
    let trials = trials.or(spec.trials).unwrap_or(500);
    if k == 0 || n == 0 || k > n {
        return Err(Error::Config(format!("need 1 <= k <= n, got k = {k}, n = {n}")));
    }
    let seed = ctx.seed();
    let reports = (0..trials)
        .into_par_iter()
        .map(|i| {
            let op = random_k_local(n, k, &mut substream(seed, i as u64));
            Ok((
                verify_inequality(&op, InequalityKind::KLocal)?,
                verify_inequality(&op, InequalityKind::BoundedDegree)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut w = ctx.writer()?;
    w.write_all(ctx.provenance.csv_preamble().as_bytes())?;
    writeln!(w, "instance_id,inequality,k,d,lhs,rhs,holds")?;
    let mut violations = 0;
    for (i, (kl, bd)) in reports.iter().enumerate() {
        for (name, r) in [("k-local", kl), ("bounded-degree", bd)] {
            violations += usize::from(!r.holds);
            writeln!(w, "{i},{name},{},{},{},{},{}", r.k, r.d, fmt_f64(r.lhs), fmt_f64(r.rhs), r.holds)?;
        }
    }
    w.flush()?;
    if violations > 0 {
        return Err(Error::Numeric(format!("{violations} norm inequality violations")));
    }
    Ok(())
}

fn chain_models(seed: u64) -> Vec<(String, ModelSpec)> {
    let mut out = Vec::new();
    for kind in [ChainKind::Xy, ChainKind::Ising] {
        for (label, field) in [("homogeneous", FieldSpec::homogeneous()), ("disordered", FieldSpec::disordered(seed))] {
            let name = format!("{}-{label}", if kind == ChainKind::Xy { "xy" } else { "ising" });
            out.push((name, ModelSpec { kind, n: 0, field }));
        }
    }
    out
}

fn experiment(fig: &FigureSpec, model: ModelSpec, t: f64, train: usize, seed: u64) -> ChainExperiment {
    let mut exp = ChainExperiment::new(model, t, train, seed);
    if let Some(s) = fig.shots {
        exp.shots = s;
    }
    if let Some(g) = &fig.grid {
        exp.grid = g.clone();
    }
    exp
}

fn fit_sites(fig: &FigureSpec, exp: &ChainExperiment) -> Result<ChainModels> {
    let n = exp.model.n;
    let sites = fig.sites.clone().unwrap_or_else(|| (0..n).collect());
    train_chain(exp, &sites)
}

fn reproduce_fig(ctx: &Context, which: Figure) -> Result<()> {
    let fig = ctx.config.figure.clone().unwrap_or_default();
    let seed = ctx.seed();
    let n = fig.n.unwrap_or(50);
    let t = fig.t.unwrap_or(1e6);
    let train = fig.train.unwrap_or(10_000);
    let test_count = fig.test.unwrap_or(200);
    let mut w = ctx.writer()?;
    w.write_all(ctx.provenance.csv_preamble().as_bytes())?;
    let rmse_row = |w: &mut dyn Write, name: &str, model: ModelSpec, n: usize, t: f64, train: usize| -> Result<()> {
        let exp = experiment(&fig, ModelSpec { n, ..model }, t, train, seed);
        let fitted = fit_sites(&fig, &exp)?;
        let rmse = fitted.rmse(&test_states(n, test_count, seed))?;
        writeln!(w, "{name},{n},{},{train},{}", fmt_f64(t), fmt_f64(rmse))?;
        w.flush()?;
        Ok(())
    };
    match which {
        Figure::ErrorVsSize => {
            writeln!(w, "model,n,t,N,rmse")?;
            for (name, model) in chain_models(seed) {
                for &size in fig.sizes.as_deref().unwrap_or(&[100, 1000, 10_000]) {
                    rmse_row(&mut w, &name, model.clone(), n, t, size)?;
                }
            }
        }
        Figure::ErrorVsTime => {
            writeln!(w, "model,n,t,N,rmse")?;
            let default_times: Vec<f64> = (0..=6).map(|e| 10f64.powi(e)).collect();
            for (name, model) in chain_models(seed) {
                for &time in fig.times.as_deref().unwrap_or(&default_times) {
                    rmse_row(&mut w, &name, model.clone(), n, time, train)?;
                }
            }
        }
        Figure::ErrorVsLength => {
            writeln!(w, "model,n,t,N,rmse")?;
            let model = ModelSpec { kind: ChainKind::Xy, n: 0, field: FieldSpec::homogeneous() };
            for &len in fig.lengths.as_deref().unwrap_or(&[10, 20, 30, 40, 50]) {
                rmse_row(&mut w, "xy-homogeneous", model.clone(), len, t, train)?;
            }
        }
        Figure::DomainWall | Figure::Entangled => {
            writeln!(w, "site,t,predicted,exact")?;
            let default_times = [0.0, 1.0, 2.0, 5.0, 10.0, 20.0, 1e6];
            let model = ModelSpec { kind: ChainKind::Xy, n, field: FieldSpec::homogeneous() };
            for &time in fig.times.as_deref().unwrap_or(&default_times) {
                let fitted = fit_sites(&fig, &experiment(&fig, model.clone(), time, train, seed))?;
                let (pred, exact) = if which == Figure::DomainWall {
                    let s = ProductState::domain_wall(n);
                    (fitted.predict(&s)?, fitted.exact_product(&s)?)
                } else {
                    let ghz = ghz_input(n)?;
                    let exact = if n <= crate::dense::MAX_DENSE_QUBITS {
                        let all = dense_ghz_z(&model, time)?;
                        fitted.sites.iter().map(|&i| all[i]).collect()
                    } else {
                        fitted.exact_general(&ghz)?
                    };
                    (fitted.predict(&ghz)?, exact)
                };
                for ((site, p), e) in fitted.sites.iter().zip(pred).zip(exact) {
                    writeln!(w, "{},{},{},{}", site + 1, fmt_f64(time), fmt_f64(p), fmt_f64(e))?;
                }
                w.flush()?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn bench(ctx: &Context) -> Result<()> {
    let seed = ctx.seed();
    let mut timings: Vec<(&str, f64)> = Vec::new();
    let mut time = |name: &'static str, f: &mut dyn FnMut() -> Result<()>| -> Result<()> {
        let start = Instant::now();
        f()?;
        timings.push((name, start.elapsed().as_secs_f64()));
        Ok(())
    };
    let spec = ModelSpec { kind: ChainKind::Xy, n: 50, field: FieldSpec::homogeneous() };
    time("fermion_rotation_n50", &mut || FermionBackend::from_spec(&spec, 1e6).map(drop))?;
    let backend = FermionBackend::from_spec(&spec, 1e6)?;
    time("collect_expectation_n50_N2000", &mut || {
        let mode = CollectMode::Expectation { observables: Observable::all_z(50), shots: 500 };
        collect_process_shadow(&backend, 2000, &mode, seed).map(drop)
    })?;
    time("dense_identity_snapshots_n8_N2000", &mut || {
        collect_process_shadow(&DenseBackend::new(DenseChannel::Identity(8), Value::Null), 2000, &CollectMode::Snapshot, seed)
            .map(drop)
    })?;
    time("lasso_cv_one_site_n50_N2000", &mut || {
        train_chain(&ChainExperiment::xy_homogeneous(50, 1e6, 2000, seed), &[25]).map(drop)
    })?;
    time("optimize_100_runs_n6", &mut || {
        let h = random_k_local(6, 2, &mut substream(seed, 0));
        let profile = h.expansion_coefficient(2)?;
        (0..100).try_for_each(|r| optimize(&h, profile, &mut substream(seed, r + 1)).map(drop))
    })?;
    let mut w = ctx.writer()?;
    w.write_all(ctx.provenance.csv_preamble().as_bytes())?;
    writeln!(w, "kernel,seconds")?;
    for (name, s) in timings {
        writeln!(w, "{name},{}", fmt_f64(s))?;
    }
    w.flush()?;
    Ok(())
}

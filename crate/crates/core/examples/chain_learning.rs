//! Learn `⟨Z_i(t)⟩` of a long-time evolved XY chain from noisy product-state data.
//!
//! ```bash
//! cargo run --release --example chain_learning -- 50 10000 5
//! ```
//! Arguments: chain length, training-set size, number of target sites.

use std::time::Instant;

use procshadow::fermion::{z_expectations, ChainKind, FermionBackend, FieldSpec, ModelSpec};
use procshadow::learner::{CvGrid, FeatureSet, LassoOptions, LassoProblem, Locality, TrainState};
use procshadow::rng::seeded;
use procshadow::shadow::{collect_process_shadow, CollectMode, Observable};
use procshadow::states::sample_stab_product;

fn main() -> procshadow::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let n = args.first().copied().unwrap_or(20);
    let count = args.get(1).copied().unwrap_or(2000);
    let targets = args.get(2).copied().unwrap_or(4).min(n);

    let spec = ModelSpec { kind: ChainKind::Xy, n, field: FieldSpec::homogeneous() };
    let backend = FermionBackend::from_spec(&spec, 1e6)?;
    let observables = Observable::all_z(n);
    let start = Instant::now();
    let data = collect_process_shadow(&backend, count, &CollectMode::Expectation { observables, shots: 500 }, 7)?;
    println!("collected {count} experiments in {:.2?}", start.elapsed());

    let states: Vec<TrainState> = data.inputs().into_iter().map(|l| TrainState::Stab(l.to_vec())).collect();
    let refs: Vec<&TrainState> = states.iter().collect();
    let start = Instant::now();
    let problem = LassoProblem::new(FeatureSet::new(n, 4, Locality::Contiguous), &refs, 2, 0)?;
    println!("{} features, design built in {:.2?}", problem.features().len(), start.elapsed());

    let mut rng = seeded(99);
    let test: Vec<_> = (0..200).map(|_| sample_stab_product(n, &mut rng)).collect();
    let exact: Vec<Vec<f64>> = test.iter().map(|s| z_expectations(backend.rotation(), s)).collect::<Result<_, _>>()?;

    let sites: Vec<usize> = (0..targets).map(|j| j * n / targets).collect();
    for i in sites {
        let start = Instant::now();
        let id = format!("Z_{}", i + 1);
        let y = data.labels(&observables_for(n, i), Some(&id))?;
        let fit = problem.cross_validate(&y, &CvGrid::default(), &LassoOptions::default())?;
        let baseline = (exact.iter().map(|e| e[i] * e[i]).sum::<f64>() / test.len() as f64).sqrt();
        let mse: f64 = test
            .iter()
            .zip(&exact)
            .map(|(s, e)| (fit.model.expectation(s).unwrap() - e[i]).powi(2))
            .sum::<f64>()
            / test.len() as f64;
        println!(
            "site {id}: k = {}, a = 2^{}, {} terms, test RMSE {:.4} vs {:.4} predicting zero ({:.2?})",
            fit.k,
            fit.a.log2(),
            fit.model.len(),
            mse.sqrt(),
            baseline,
            start.elapsed()
        );
    }
    Ok(())
}

fn observables_for(n: usize, i: usize) -> procshadow::SparsePauliOp {
    Observable::all_z(n).swap_remove(i).op
}

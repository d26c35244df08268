//! Learn an unknown observable from (random product state, expectation value) pairs.

use procshadow::learner::{learn_observable, LearnerConfig, LearnerMode, TrainRow};
use procshadow::rng::seeded;
use procshadow::states::{sample_haar_product, sample_stab_labels};
use procshadow::{ProductState, Result, SparsePauliOp};

fn main() -> Result<()> {
    let n = 6;
    let truth = SparsePauliOp::from_labels(&[("ZIIIII", 0.8), ("IXXIII", -0.5), ("IIIYZI", 0.3), ("IIIIIX", 0.2)])?;
    let mut rng = seeded(1);
    let rows: Vec<TrainRow> = (0..5000)
        .map(|_| {
            let labels = sample_stab_labels(n, &mut rng);
            let y = truth.expectation(&ProductState::from_labels(&labels)).unwrap();
            TrainRow::stab(labels, y)
        })
        .collect();

    let mut config = LearnerConfig::new(LearnerMode::ObservableSetting1);
    config.k = Some(2);
    config.seed = 3;
    let model = learn_observable(&rows, &config)?;
    println!("learned {} terms, clip at {:?}", model.coefficients.len(), model.theta_hat);
    for (p, c) in model.coefficients.sorted_terms() {
        println!("  {p}: {c:+.4} (true {:+.4})", truth.coefficient(&p));
    }

    let test: Vec<_> = (0..500).map(|_| sample_haar_product(n, &mut rng)).collect();
    let mse = test.iter().map(|s| (model.predict(s).unwrap() - truth.expectation(s).unwrap()).powi(2)).sum::<f64>()
        / test.len() as f64;
    println!("MSE on Haar-random product states: {mse:.5}");
    Ok(())
}

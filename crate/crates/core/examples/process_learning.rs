//! Learn how a channel transforms an observable from a snapshot dataset, then predict.

use procshadow::dense::{DenseChannel, DenseState};
use procshadow::learner::{learn_process, LearnerConfig, LearnerMode};
use procshadow::rng::seeded;
use procshadow::shadow::{collect_process_shadow, CollectMode, DenseBackend};
use procshadow::states::sample_haar_product;
use procshadow::{Result, SparsePauliOp};

fn main() -> Result<()> {
    let n = 4;
    let h = SparsePauliOp::from_labels(&[("XXII", 0.5), ("IYYI", 0.5), ("IIZZ", 0.5), ("ZIII", 0.2)])?;
    let backend = DenseBackend::new(DenseChannel::hamiltonian(&h, 0.4)?, serde_json::Value::Null);
    let data = collect_process_shadow(&backend, 100_000, &CollectMode::Snapshot, 9)?;

    let target = SparsePauliOp::from_labels(&[("ZIII", 1.0)])?;
    let mut config = LearnerConfig::new(LearnerMode::ProcessSetting2);
    config.epsilon = 0.3;
    let model = learn_process(&data, &target, &config)?;
    println!("learned E†(Z_1) with {} terms", model.coefficients.len());

    let channel = DenseChannel::hamiltonian(&h, 0.4)?;
    let mut rng = seeded(5);
    let mut se = 0.0;
    let mut sq = 0.0;
    let count = 300;
    for j in 0..count {
        let s = sample_haar_product(n, &mut rng);
        let exact = match channel.evolve_pure(&DenseState::from_product(&s)?)? {
            Some(out) => out.expectation(&target)?,
            None => unreachable!("a Hamiltonian channel keeps states pure"),
        };
        let predicted = model.predict(&s)?;
        if j < 5 {
            println!("predicted {predicted:+.4}, exact {exact:+.4}");
        }
        se += (predicted - exact).powi(2);
        sq += exact * exact;
    }
    println!("RMSE over {count} Haar-random inputs: {:.4} (predicting zero: {:.4})", (se / count as f64).sqrt(), (sq / count as f64).sqrt());
    Ok(())
}

//! Classical shadow of an entangled three-qubit state: many observables from one dataset.

use procshadow::dense::DenseChannel;
use procshadow::shadow::StateShadow;
use procshadow::{ProductState, Result, SparsePauliOp, StabLabel};

fn main() -> Result<()> {
    let h = SparsePauliOp::from_labels(&[("XXI", 1.0), ("IYY", 0.7), ("ZIZ", -0.4)])?;
    let input = ProductState::from_labels(&[StabLabel::ZPlus, StabLabel::XPlus, StabLabel::ZMinus]);
    let state = DenseChannel::hamiltonian(&h, 0.8)?.output(&input)?;

    let observables = ["ZII", "IZI", "XXI", "ZIZ", "XYZ"];
    for count in [100, 1_000, 10_000, 100_000] {
        let shadow = StateShadow::collect(&state, 3, count, 42)?;
        let worst = observables
            .iter()
            .map(|o| {
                let op = SparsePauliOp::from_labels(&[(o, 1.0)]).unwrap();
                let exact = state.pauli_expectation(&o.parse().unwrap());
                (shadow.estimate(&op).unwrap() - exact).abs()
            })
            .fold(0.0, f64::max);
        println!("N = {count:>6}: worst error over {} observables = {worst:.4}", observables.len());
    }
    Ok(())
}

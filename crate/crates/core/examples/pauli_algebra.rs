//! Build sparse Pauli operators, evaluate them on product states and compare norms.

use procshadow::norms::degree;
use procshadow::states::ProductState;
use procshadow::{Result, SparsePauliOp, StabLabel};

fn main() -> Result<()> {
    let h = SparsePauliOp::from_labels(&[("XXII", 0.25), ("YYII", 0.25), ("IZZI", -0.5), ("IIIZ", 0.3), ("IIII", 1.0)])?;
    println!("H has {} terms on {} qubits, max weight {}, degree {}", h.len(), h.num_qubits(), h.max_weight(), degree(&h));
    for p in [1.0, 4.0 / 3.0, 2.0] {
        println!("  Pauli-{p:.3} norm (identity dropped): {:.6}", h.without_identity().pauli_norm(p)?);
    }

    let state = ProductState::from_labels(&[StabLabel::XPlus, StabLabel::XPlus, StabLabel::ZMinus, StabLabel::ZPlus]);
    println!("⟨H⟩ on |++10⟩ = {:.6}", h.expectation(&state)?);
    let low: Vec<String> = h.truncate(1).sorted_terms().iter().map(|(p, c)| format!("{c:+} {p}")).collect();
    println!("weight <= 1 part: {}", low.join(" "));
    println!("JSON: {}", h.to_json());
    Ok(())
}

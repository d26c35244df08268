//! Free-fermion dynamics of the XY chain at sizes far beyond the dense limit.

use procshadow::fermion::{heisenberg_z, z_expectations, ChainKind, FermionBackend, FieldSpec, ModelSpec};
use procshadow::{ProductState, Result};

fn main() -> Result<()> {
    let n = 50;
    let spec = ModelSpec { kind: ChainKind::Xy, n, field: FieldSpec::homogeneous() };
    let wall = ProductState::domain_wall(n);
    for t in [0.0, 5.0, 20.0, 1e6] {
        let backend = FermionBackend::from_spec(&spec, t)?;
        let z = z_expectations(backend.rotation(), &wall)?;
        let total: f64 = z.iter().sum();
        let middle: Vec<String> = z[n / 2 - 4..n / 2 + 4].iter().map(|v| format!("{v:+.3}")).collect();
        println!("t = {t:>9}: middle sites [{}], Σ⟨Z_i⟩ = {total:+.6}", middle.join(" "));
    }
    let model = spec.build()?;
    for t in [0.5, 2.0, 8.0] {
        println!("Z_25(t = {t}) has {} Pauli terms", heisenberg_z(&model, 24, t)?.len());
    }
    Ok(())
}

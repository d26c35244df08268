//! The exact statevector backend: spectra, time evolution, reduced states and purity.

use procshadow::dense::{nonidentity_purity, spectral_norm, BlockSpectrum, DenseState};
use procshadow::{Pauli, PauliExpectation, PauliString, ProductState, Result, SparsePauliOp};

fn main() -> Result<()> {
    let n = 6;
    let mut h = SparsePauliOp::zero(n);
    for i in 0..n - 1 {
        for l in [Pauli::X, Pauli::Y] {
            h.add_term(PauliString::from_sparse(n, &[(i, l), (i + 1, l)])?, 0.25)?;
        }
    }
    for i in 0..n {
        h.add_term(PauliString::single(n, i, Pauli::Z), 0.25)?;
    }
    let spectrum = BlockSpectrum::new(&h)?;
    let e = spectrum.eigenvalues();
    println!("ground energy {:.6}, spectral norm {:.6}", e.iter().cloned().fold(f64::INFINITY, f64::min), spectral_norm(&h)?);

    let psi0 = DenseState::from_product(&ProductState::domain_wall(n))?;
    for t in [0.0, 0.5, 1.0, 2.0, 4.0] {
        let psi = spectrum.evolve_state(&psi0, t)?;
        let z: Vec<String> =
            (0..n).map(|i| format!("{:+.3}", psi.pauli_expectation(&PauliString::single(n, i, Pauli::Z)))).collect();
        let pair = psi.density().reduced(&[2, 3])?;
        println!("t = {t:>3}: ⟨Z_i⟩ = [{}], non-identity purity of sites 3-4 = {:.4}", z.join(", "), nonidentity_purity(&pair));
    }
    Ok(())
}

//! The Pauli-p norm lower bounds on the spectral norm, on random local operators.

use procshadow::norms::{random_k_local, verify_inequality, InequalityKind};
use procshadow::rng::seeded;
use procshadow::Result;

fn main() -> Result<()> {
    let mut rng = seeded(4);
    for k in 1..=3 {
        let n = 5;
        let mut slack = f64::INFINITY;
        let mut violations = 0;
        for _ in 0..200 {
            let op = random_k_local(n, k, &mut rng);
            for kind in [InequalityKind::KLocal, InequalityKind::BoundedDegree] {
                let r = verify_inequality(&op, kind)?;
                violations += usize::from(!r.holds);
                slack = slack.min(r.rhs / r.lhs);
            }
        }
        println!("k = {k}, n = {n}: {violations} violations, tightest ‖O‖ / bound = {slack:.1}");
    }
    Ok(())
}

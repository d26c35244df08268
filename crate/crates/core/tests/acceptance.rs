//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line, then asserts.

use std::io::Write;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;

use procshadow::dense::{operator_matrix, BlockSpectrum, DenseChannel, DenseState, DensityMatrix};
use procshadow::experiments::{dense_ghz_z, ghz_input, test_states, train_chain, ChainExperiment};
use procshadow::fermion::{z_expectations, ChainKind, FermionBackend, FieldSpec, ModelSpec};
use procshadow::norms::{constant, random_k_local, verify_inequality, ConstantKind, InequalityKind};
use procshadow::optimize::{optimize, polarization_rhs, polarize};
use procshadow::pauli::all_strings_up_to_weight;
use procshadow::learner::filter_coefficient;
use procshadow::rng::seeded;
use procshadow::shadow::{snapshot_estimate, StateShadow};
use procshadow::states::{sample_haar_product, Bloch, StabLabel};
use procshadow::{ExpansionProfile, Pauli, PauliExpectation, PauliString, ProductState, SparsePauliOp};

fn report(id: u32, name: &str, pass: bool, detail: &str, start: Instant) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "[{verdict}] criterion {id:>2} {name}: {detail} ({:.1?})", start.elapsed());
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

fn all_labels(n: usize) -> Vec<Vec<StabLabel>> {
    (0..6usize.pow(n as u32))
        .map(|mut code| {
            (0..n)
                .map(|_| {
                    let l = StabLabel::ALL[code % 6];
                    code /= 6;
                    l
                })
                .collect()
        })
        .collect()
}

fn all_bases(n: usize) -> Vec<Vec<Pauli>> {
    (0..3usize.pow(n as u32))
        .map(|mut code| {
            (0..n)
                .map(|_| {
                    let b = Pauli::NON_IDENTITY[code % 3];
                    code /= 3;
                    b
                })
                .collect()
        })
        .collect()
}

/// `⊗_i (I + s_i B_i)/2` written out in the Pauli basis.
fn projector(outcome: &[StabLabel]) -> SparsePauliOp {
    let n = outcome.len();
    let mut op = SparsePauliOp::from_terms(n, [(PauliString::identity(n), 1.0)]).unwrap();
    for (q, l) in outcome.iter().enumerate() {
        let factor = SparsePauliOp::from_terms(
            n,
            [(PauliString::identity(n), 0.5), (PauliString::single(n, q, l.basis()), 0.5 * l.sign())],
        )
        .unwrap();
        op = multiply_commuting(&op, &factor);
    }
    op
}

/// Product of operators whose terms act on disjoint qubits.
fn multiply_commuting(a: &SparsePauliOp, b: &SparsePauliOp) -> SparsePauliOp {
    let n = a.num_qubits();
    let mut out = SparsePauliOp::zero(n);
    for (p, c) in a.iter() {
        for (q, d) in b.iter() {
            let mut s = p.clone();
            for (i, l) in q.iter_support() {
                assert_eq!(s.get(i), Pauli::I);
                s.set(i, l);
            }
            out.add_term(s, c * d).unwrap();
        }
    }
    out
}

#[test]
fn c01_shadow_unbiased_by_enumeration() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for n in 1..=2 {
        let paulis = all_strings_up_to_weight(n, 2);
        let outcomes = all_labels(n);
        for input in all_labels(n) {
            let rho = DensityMatrix::from_product(&ProductState::from_labels(&input)).unwrap();
            for p in &paulis {
                let op = SparsePauliOp::from_terms(n, [(p.clone(), 1.0)]).unwrap();
                let exact = rho.expectation(&op).unwrap();
                let mut mean = 0.0;
                for bases in all_bases(n) {
                    for s in outcomes.iter().filter(|s| s.iter().zip(&bases).all(|(l, b)| l.basis() == *b)) {
                        let prob = rho.expectation(&projector(s)).unwrap() / 3f64.powi(n as i32);
                        mean += prob * snapshot_estimate(s, &op);
                    }
                }
                worst = worst.max((mean - exact).abs());
            }
        }
    }
    let pass = worst <= 1e-12;
    report(1, "shadow unbiasedness", pass, &format!("max |E[est] - Tr(Pρ)| = {worst:.2e} (tol 1e-12)"), start);
    assert!(pass);
}

#[test]
fn c02_shadow_std_scales_as_inverse_sqrt() {
    let start = Instant::now();
    let n = 3;
    let h = SparsePauliOp::from_labels(&[("XXI", 1.0), ("IYY", 0.7), ("ZIZ", -0.4), ("ZII", 0.3)]).unwrap();
    let channel = DenseChannel::hamiltonian(&h, 0.9).unwrap();
    let input = ProductState::from_labels(&[StabLabel::ZPlus, StabLabel::XPlus, StabLabel::YMinus]);
    let state = channel.output(&input).unwrap();
    let obs = SparsePauliOp::from_labels(&[("ZZI", 1.0), ("IIX", 0.5), ("YIZ", -0.8)]).unwrap();
    let trials = 200;
    let sizes = [100usize, 1000, 10_000];
    let mut points = Vec::new();
    for (si, &size) in sizes.iter().enumerate() {
        let est: Vec<f64> = (0..trials)
            .map(|t| {
                let seed = 1_000_003 * si as u64 + t as u64;
                StateShadow::collect(&state, n, size, seed).unwrap().estimate(&obs).unwrap()
            })
            .collect();
        points.push(((size as f64).ln(), mean_std(&est).1.ln()));
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / 3.0;
    let my = points.iter().map(|p| p.1).sum::<f64>() / 3.0;
    let slope = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / points.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let pass = (slope + 0.5).abs() <= 0.1;
    report(2, "shadow concentration", pass, &format!("log-log slope {slope:.4} (target -0.5 ± 0.1)"), start);
    assert!(pass);
}

fn random_homogeneous<R: Rng>(n: usize, k: usize, rng: &mut R) -> SparsePauliOp {
    loop {
        let op = random_k_local(n, k, rng).homogeneous_part(k);
        if !op.is_empty() {
            return op;
        }
    }
}

#[test]
fn c03_polarization_identity() {
    let start = Instant::now();
    let mut rng = seeded(3);
    let (mut worst_polar, mut worst_frob) = (0.0f64, 0.0f64);
    for inst in 0..100 {
        let k = 1 + inst % 3;
        let n = rng.random_range(k..=4);
        let o = random_homogeneous(n, k, &mut rng);
        let pol = polarize(&o).unwrap();
        let replicas: Vec<Vec<Bloch>> = (0..k).map(|_| sample_haar_product(n, &mut rng).qubits().to_vec()).collect();
        let flat = ProductState::from_bloch(replicas.concat()).unwrap();
        let t: f64 = rng.random_range(-1.5..1.5);
        let lhs = t.powi(k as i32) * pol.expectation(&flat).unwrap();
        let rhs = polarization_rhs(&o, &replicas, t);
        worst_polar = worst_polar.max((lhs - rhs).abs());

        let kfact: f64 = (1..=k).map(|x| x as f64).product();
        let sq = |op: &SparsePauliOp| op.iter().map(|(_, c)| c * c).sum::<f64>();
        worst_frob = worst_frob.max((sq(&o) - kfact * sq(&pol)).abs());
        if n * k <= 8 {
            let tr2 = |op: &SparsePauliOp| {
                let m = operator_matrix(op).unwrap();
                (&m * &m).trace().re / m.nrows() as f64
            };
            worst_frob = worst_frob.max((tr2(&o) - kfact * tr2(&pol)).abs());
        }
    }
    let pass = worst_polar <= 1e-9 && worst_frob <= 1e-9;
    let detail = format!("identity max dev {worst_polar:.2e}, Frobenius max dev {worst_frob:.2e} (tol 1e-9)");
    report(3, "polarization identity", pass, &detail, start);
    assert!(pass);
}

#[test]
fn c04_khintchine_sandwich() {
    let start = Instant::now();
    let mut rng = seeded(4);
    let samples = 100_000;
    let mut failures = Vec::new();
    let mut closest = f64::INFINITY;
    for inst in 0..20 {
        let n = 1 + inst % 4;
        let terms = (0..n).flat_map(|q| Pauli::NON_IDENTITY.map(|l| (q, l))).collect::<Vec<_>>();
        let o = SparsePauliOp::from_terms(
            n,
            terms.into_iter().map(|(q, l)| (PauliString::single(n, q, l), rng.sample::<f64, _>(StandardNormal))),
        )
        .unwrap();
        let l_norm = o.iter().map(|(_, c)| c * c).sum::<f64>().sqrt();
        let values: Vec<f64> =
            (0..samples).map(|_| o.expectation(&sample_haar_product(n, &mut rng)).unwrap().abs()).collect();
        let (m, s) = mean_std(&values);
        let sigma = s / (samples as f64).sqrt();
        let (lo, hi) = (l_norm / 6f64.sqrt(), l_norm / 3f64.sqrt());
        closest = closest.min(((m - lo) / sigma).min((hi - m) / sigma));
        if m + 3.0 * sigma < lo || m - 3.0 * sigma > hi {
            failures.push(inst);
        }
    }
    let pass = failures.is_empty();
    let detail = format!("{} of 20 outside the band; nearest edge {closest:.1}σ inside", failures.len());
    report(4, "Khintchine sandwich", pass, &detail, start);
    assert!(pass, "instances {failures:?}");
}

#[test]
fn c05_optimizer_guarantee() {
    let start = Instant::now();
    let mut rng = seeded(5);
    let runs = 2000;
    let c2 = constant(ConstantKind::GeneralKLocal { k: 2 }).unwrap();
    let mut failures = Vec::new();
    let mut min_ratio = f64::INFINITY;
    for inst in 0..20 {
        let n = 2 + inst % 5;
        let h = random_k_local(n, 2, &mut rng);
        let margins: Vec<f64> = (0..runs)
            .map(|_| optimize(&h, ExpansionProfile::general_k_local(2), &mut rng).unwrap().margin.abs())
            .collect();
        let (m, s) = mean_std(&margins);
        let bound = c2 * h.without_identity().pauli_norm(4.0 / 3.0).unwrap();
        min_ratio = min_ratio.min(m / bound);
        if m + 3.0 * s / (runs as f64).sqrt() < bound {
            failures.push(inst);
        }
    }
    let pass = failures.is_empty();
    let detail = format!("{} of 20 below C(2)·‖H‖_(4/3); smallest mean/bound ratio {min_ratio:.1}", failures.len());
    report(5, "optimizer guarantee", pass, &detail, start);
    assert!(pass, "instances {failures:?}");
}

#[test]
fn c06_norm_inequalities() {
    let start = Instant::now();
    let mut rng = seeded(6);
    let per_cell = 500;
    let (mut checked, mut violations) = (0usize, Vec::new());
    for k in 1..=3 {
        for n in 2..=6 {
            if k > n {
                continue;
            }
            for _ in 0..per_cell {
                let op = random_k_local(n, k, &mut rng);
                for kind in [InequalityKind::KLocal, InequalityKind::BoundedDegree] {
                    let r = verify_inequality(&op, kind).unwrap();
                    checked += 1;
                    if !r.holds {
                        violations.push((k, n, kind, r.lhs, r.rhs));
                    }
                }
            }
        }
    }
    let pass = violations.is_empty();
    let detail = format!("{} violations over {checked} checks ({per_cell} per (k, n) and inequality)", violations.len());
    report(6, "norm inequalities", pass, &detail, start);
    assert!(pass, "{violations:?}");
}

#[test]
fn c07_mse_and_extraction_identities() {
    let start = Instant::now();
    let mut rng = seeded(7);
    let n = 2;
    let paulis = all_strings_up_to_weight(n, 2);
    let states: Vec<DensityMatrix> =
        all_labels(n).iter().map(|l| DensityMatrix::from_product(&ProductState::from_labels(l)).unwrap()).collect();
    let random_op = |rng: &mut rand_chacha::ChaCha8Rng| {
        SparsePauliOp::from_terms(n, paulis.iter().map(|p| (p.clone(), rng.sample::<f64, _>(StandardNormal)))).unwrap()
    };
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (o1, o2) = (random_op(&mut rng), random_op(&mut rng));
        let diff = o1.plus(&o2.scaled(-1.0)).unwrap();
        let mse = states
            .iter()
            .map(|rho| (rho.expectation(&o1).unwrap() - rho.expectation(&o2).unwrap()).powi(2))
            .sum::<f64>()
            / 36.0;
        let closed: f64 = diff.iter().map(|(p, c)| 3f64.powi(-(p.weight() as i32)) * c * c).sum();
        worst = worst.max((mse - closed).abs());
        for p in &paulis {
            let single = SparsePauliOp::from_terms(n, [(p.clone(), 1.0)]).unwrap();
            let corr = states
                .iter()
                .map(|rho| rho.expectation(&o1).unwrap() * rho.expectation(&single).unwrap())
                .sum::<f64>()
                / 36.0;
            worst = worst.max((corr - 3f64.powi(-(p.weight() as i32)) * o1.coefficient(p)).abs());
        }
    }
    let pass = worst <= 1e-12;
    report(7, "MSE / extraction identities", pass, &format!("max deviation {worst:.2e} (tol 1e-12)"), start);
    assert!(pass);
}

/// Worst estimate error for one term over a grid of admissible perturbations.
fn adversarial_term(alpha: f64, beta: f64, eta: f64, eps: f64) -> f64 {
    let shrink = 1.0 - 1e-9;
    let grid = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let x = alpha * beta;
    let mut worst = 0.0f64;
    for u in grid {
        for v in grid {
            let xh = x + u * shrink * eta * eps;
            let bh = beta + v * shrink * eps;
            let ah = filter_coefficient(xh, bh, eta, eps);
            worst = worst.max(beta * (ah - alpha).powi(2));
        }
    }
    worst
}

#[test]
fn c08_filter_error_bounds() {
    let start = Instant::now();
    let mut rng = seeded(8);
    let (mut instances, mut failures) = (0usize, Vec::new());
    let mut max_agg_ratio = 0.0f64;
    let mut max_term_ratio = 0.0f64;
    for r in [1.0, 4.0 / 3.0, 1.5] {
        for eta in [1.0f64, 8.0] {
            for eps in [1e-1f64, 1e-2, 1e-3, 1e-4] {
                for _ in 0..50 {
                    let m = rng.random_range(1..=200usize);
                    let w: Vec<f64> = (0..m).map(|_| -rng.random::<f64>().ln()).collect();
                    let total: f64 = w.iter().sum();
                    let mut agg = 0.0;
                    let mut term_max = 0.0f64;
                    for wi in &w {
                        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                        let alpha: f64 = sign * (wi / total).powf(1.0 / r) * (1.0 - 1e-12);
                        let beta: f64 = match rng.random_range(0..3) {
                            0 => rng.random(),
                            1 => (2.0 * eps * rng.random_range(0.0..2.0)).min(1.0),
                            _ => ((2.0 * eta * eps.sqrt() / alpha.abs()).powi(2) * rng.random_range(0.25..4.0)).min(1.0),
                        };
                        let e = adversarial_term(alpha, beta, eta, eps);
                        agg += e;
                        term_max = term_max.max(e);
                    }
                    let agg_bound = 6.0 * eta.powf(2.0 - r) * eps.powf(1.0 - r / 2.0);
                    let term_bound = 9.0 * eta * eta * eps;
                    max_agg_ratio = max_agg_ratio.max(agg / agg_bound);
                    max_term_ratio = max_term_ratio.max(term_max / term_bound);
                    instances += 1;
                    if agg > agg_bound || term_max > term_bound {
                        failures.push((r, eta, eps, agg, term_max));
                    }
                }
            }
        }
    }
    let pass = failures.is_empty();
    let detail = format!(
        "{} of {instances} instances violate; worst aggregate/bound {max_agg_ratio:.3}, per-term/bound {max_term_ratio:.3}",
        failures.len()
    );
    report(8, "filter error bounds", pass, &detail, start);
    assert!(pass, "{failures:?}");
}

#[test]
fn c09_fermion_matches_dense() {
    let start = Instant::now();
    let mut rng = seeded(9);
    let times = [0.1, 1.0, 10.0, 1e6];
    let mut worst = 0.0f64;
    for pair in 0..20 {
        let kind = if pair % 2 == 0 { ChainKind::Xy } else { ChainKind::Ising };
        let n = rng.random_range(2..=10);
        let field = if pair % 4 < 2 { FieldSpec::homogeneous() } else { FieldSpec::disordered(pair as u64) };
        let spec = ModelSpec { kind, n, field };
        let t = times[pair % 4];
        let state = sample_haar_product(n, &mut rng);
        let backend = FermionBackend::from_spec(&spec, t).unwrap();
        let fast = z_expectations(backend.rotation(), &state).unwrap();
        let spectrum = BlockSpectrum::new(&spec.build().unwrap().hamiltonian()).unwrap();
        let psi = spectrum.evolve_state(&DenseState::from_product(&state).unwrap(), t).unwrap();
        for (i, f) in fast.iter().enumerate() {
            let d = psi.pauli_expectation(&PauliString::single(n, i, Pauli::Z));
            worst = worst.max((f - d).abs());
        }
    }
    let pass = worst < 1e-8;
    report(9, "fermion vs dense", pass, &format!("max |Δ⟨Z_i(t)⟩| = {worst:.2e} over 20 pairs (tol 1e-8)"), start);
    assert!(pass);
}

fn chain_rmse(n: usize, train: usize, seed: u64) -> f64 {
    let exp = ChainExperiment::xy_homogeneous(n, 1e6, train, seed);
    let sites: Vec<usize> = (0..n).collect();
    let models = train_chain(&exp, &sites).unwrap();
    models.rmse(&test_states(n, 200, seed)).unwrap()
}

#[test]
fn c10_end_to_end_trend() {
    let start = Instant::now();
    let seed = 10;
    let by_size: Vec<f64> = [100, 1000, 10_000].iter().map(|&train| chain_rmse(50, train, seed)).collect();
    let monotone = by_size.windows(2).all(|w| w[1] <= w[0]);
    let last = by_size[2];
    let by_n = [chain_rmse(10, 10_000, seed), chain_rmse(30, 10_000, seed), last];
    let lo = by_n.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = by_n.iter().cloned().fold(0.0, f64::max);
    let pass = monotone && last < 0.25 && hi < 2.0 * lo;
    let detail = format!(
        "RMSE at n=50 for N=1e2,1e3,1e4: {:.4}, {:.4}, {:.4}; at N=1e4 for n=10,30,50: {:.4}, {:.4}, {:.4} (ratio {:.2})",
        by_size[0],
        by_size[1],
        by_size[2],
        by_n[0],
        by_n[1],
        by_n[2],
        hi / lo
    );
    report(10, "end-to-end learning trend", pass, &detail, start);
    assert!(pass);
}

#[test]
fn c11_structured_state_generalization() {
    let start = Instant::now();
    let times = [0.0, 1.0, 3.0, 10.0, 100.0, 1e6];
    let tol = 0.3;

    let n = 50;
    let wall = ProductState::domain_wall(n);
    let mut wall_worst = 0.0f64;
    for (j, &t) in times.iter().enumerate() {
        let exp = ChainExperiment::xy_homogeneous(n, t, 10_000, 110 + j as u64);
        let models = train_chain(&exp, &(0..n).collect::<Vec<_>>()).unwrap();
        let pred = models.predict(&wall).unwrap();
        let exact = models.exact_product(&wall).unwrap();
        for (p, e) in pred.iter().zip(&exact) {
            wall_worst = wall_worst.max((p - e).abs());
        }
    }

    let n = 10;
    let ghz = ghz_input(n).unwrap();
    let mut ghz_worst = 0.0f64;
    for (j, &t) in times.iter().enumerate() {
        let exp = ChainExperiment::xy_homogeneous(n, t, 10_000, 120 + j as u64);
        let models = train_chain(&exp, &(0..n).collect::<Vec<_>>()).unwrap();
        let pred = models.predict(&ghz).unwrap();
        let exact = dense_ghz_z(&exp.model, t).unwrap();
        for (p, e) in pred.iter().zip(&exact) {
            ghz_worst = ghz_worst.max((p - e).abs());
        }
    }
    let pass = wall_worst < tol && ghz_worst < tol;
    let detail =
        format!("max |error| domain wall n=50: {wall_worst:.4}, GHZ-like n=10: {ghz_worst:.4} (tol {tol}) over t ∈ {times:?}");
    report(11, "structured-state generalization", pass, &detail, start);
    assert!(pass);
}

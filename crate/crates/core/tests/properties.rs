use proptest::prelude::*;
use rand::Rng;

use procshadow::dense::{spectral_norm, DenseState};
use procshadow::fermion::{orthogonality_defect, z_expectations, ChainKind, FermionBackend, FieldSpec, ModelSpec};
use procshadow::learner::{
    filter_coefficient, lasso_fit, lasso_objective, FeatureSet, LassoOptions, Locality, SparseRows, TrainState,
};
use procshadow::norms::{constant, random_k_local, ConstantKind};
use procshadow::optimize::polarize;
use procshadow::rng::seeded;
use procshadow::shadow::snapshot_estimate;
use procshadow::states::{sample_haar_product, sample_stab_labels};
use procshadow::{Pauli, PauliString, ProductState, SparsePauliOp};

fn letter() -> impl Strategy<Value = Pauli> {
    prop_oneof![Just(Pauli::I), Just(Pauli::X), Just(Pauli::Y), Just(Pauli::Z)]
}

fn pauli_string(max_n: usize) -> impl Strategy<Value = PauliString> {
    prop::collection::vec(letter(), 1..=max_n).prop_map(|l| PauliString::from_letters(&l))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pauli_string_text_roundtrip(p in pauli_string(70)) {
        let back: PauliString = p.to_string().parse().unwrap();
        prop_assert_eq!(back.weight(), p.support().len());
        prop_assert_eq!(back, p);
    }

    #[test]
    fn operator_json_roundtrip(seed in any::<u64>(), n in 1usize..6, k in 1usize..4) {
        let op = random_k_local(n, k.min(n), &mut seeded(seed));
        let back = SparsePauliOp::from_json(&op.to_json()).unwrap();
        prop_assert_eq!(back, op);
    }

    #[test]
    fn pauli_norms_decrease_in_p(seed in any::<u64>(), n in 1usize..6, p in 1.0f64..2.0, dp in 0.0f64..2.0) {
        let op = random_k_local(n, 2.min(n), &mut seeded(seed));
        prop_assert!(op.pauli_norm(p + dp).unwrap() <= op.pauli_norm(p).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn product_expectation_is_bounded_by_spectral_norm(seed in any::<u64>(), n in 1usize..6) {
        let mut rng = seeded(seed);
        let op = random_k_local(n, 3.min(n), &mut rng);
        let state = sample_haar_product(n, &mut rng);
        let v = op.expectation(&state).unwrap();
        prop_assert!(v.abs() <= spectral_norm(&op).unwrap() + 1e-10);
        prop_assert!(v.abs() <= op.pauli_norm(1.0).unwrap() + 1e-12);
        let dense = DenseState::from_product(&state).unwrap().expectation(&op).unwrap();
        prop_assert!((v - dense).abs() < 1e-10);
    }

    #[test]
    fn snapshot_of_identity_is_its_coefficient(seed in any::<u64>(), n in 1usize..30, c in -5.0f64..5.0) {
        let labels = sample_stab_labels(n, &mut seeded(seed));
        let op = SparsePauliOp::from_terms(n, [(PauliString::identity(n), c)]).unwrap();
        prop_assert_eq!(snapshot_estimate(&labels, &op), c);
    }

    #[test]
    fn snapshot_estimate_is_bounded(seed in any::<u64>(), p in pauli_string(12)) {
        let labels = sample_stab_labels(p.num_qubits(), &mut seeded(seed));
        let op = SparsePauliOp::from_terms(p.num_qubits(), [(p.clone(), 1.0)]).unwrap();
        let v = snapshot_estimate(&labels, &op);
        prop_assert!(v == 0.0 || (v.abs() - 3f64.powi(p.weight() as i32)).abs() < 1e-9);
    }

    #[test]
    fn filter_either_zeroes_or_divides(x in -10.0f64..10.0, beta in -0.1f64..1.0, eta in 0.01f64..10.0, eps in 1e-6f64..0.2) {
        let a = filter_coefficient(x, beta, eta, eps);
        if beta <= 2.0 * eps {
            prop_assert_eq!(a, 0.0);
        } else {
            prop_assert!(a == 0.0 || a == x / beta);
        }
    }

    #[test]
    fn fermion_rotation_is_orthogonal_and_z_bounded(seed in any::<u64>(), n in 2usize..40, t in 0.0f64..1e3, ising in any::<bool>()) {
        let kind = if ising { ChainKind::Ising } else { ChainKind::Xy };
        let spec = ModelSpec { kind, n, field: FieldSpec::disordered(seed) };
        let backend = FermionBackend::from_spec(&spec, t).unwrap();
        prop_assert!(orthogonality_defect(backend.rotation()) < 1e-9);
        let state = sample_haar_product(n, &mut seeded(seed));
        for z in z_expectations(backend.rotation(), &state).unwrap() {
            prop_assert!(z.abs() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn polarization_scales_squared_coefficients(seed in any::<u64>(), n in 1usize..5, k in 1usize..4) {
        let k = k.min(n);
        let o = random_k_local(n, k, &mut seeded(seed)).homogeneous_part(k);
        prop_assume!(!o.is_empty());
        let pol = polarize(&o).unwrap();
        let sq = |op: &SparsePauliOp| op.iter().map(|(_, c)| c * c).sum::<f64>();
        let kfact: f64 = (1..=k).map(|x| x as f64).product();
        prop_assert!((sq(&o) - kfact * sq(&pol)).abs() < 1e-9 * (1.0 + sq(&o)));
        prop_assert_eq!(pol.num_qubits(), n * k);
    }

    #[test]
    fn norm_constants_are_positive_and_shrink(k in 1usize..8, d in 1usize..10) {
        let c = constant(ConstantKind::GeneralKLocal { k }).unwrap();
        let next = constant(ConstantKind::GeneralKLocal { k: k + 1 }).unwrap();
        prop_assert!(c > 0.0 && next < c);
        let b = constant(ConstantKind::BoundedDegree { k, d }).unwrap();
        let denser = constant(ConstantKind::BoundedDegree { k, d: d + 1 }).unwrap();
        prop_assert!(b > 0.0 && denser < b);
    }

    #[test]
    fn stabilizer_rows_match_dense_rows(seed in any::<u64>(), n in 1usize..9, k in 1usize..4, contiguous in any::<bool>()) {
        let locality = if contiguous { Locality::Contiguous } else { Locality::All };
        let features = FeatureSet::new(n, k.min(n), locality);
        let labels = sample_stab_labels(n, &mut seeded(seed));
        let dense = features.dense_row(&ProductState::from_labels(&labels)).unwrap();
        let sparse = features.row(&TrainState::Stab(labels)).unwrap();
        let mut expanded = vec![0.0; features.len()];
        for (j, v) in sparse {
            expanded[j as usize] = v;
        }
        prop_assert_eq!(expanded, dense);
        for w in 0..=features.max_weight() {
            let len = features.prefix_len(w);
            prop_assert!(features.strings()[..len].iter().all(|p| p.weight() <= w));
        }
    }

    #[test]
    fn lasso_never_worse_than_zero(seed in any::<u64>(), a in 1e-5f64..0.5) {
        let mut rng = seeded(seed);
        let n = 4;
        let states: Vec<TrainState> = (0..60).map(|_| TrainState::Stab(sample_stab_labels(n, &mut rng))).collect();
        let refs: Vec<&TrainState> = states.iter().collect();
        let features = FeatureSet::new(n, 2, Locality::All);
        let design = SparseRows::build(&features, &refs).unwrap().full_design();
        let y: Vec<f64> = (0..60).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fit = lasso_fit(&design, features.len(), &y, a, None, &LassoOptions::default()).unwrap();
        let zero = vec![0.0; features.len()];
        prop_assert!(lasso_objective(&design, &y, &fit.coef, a) <= lasso_objective(&design, &y, &zero, a) + 1e-12);
    }
}

#[test]
fn pauli_letters_parse() {
    for l in [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z] {
        assert_eq!(Pauli::from_char(l.as_char()).unwrap(), l);
    }
    assert!(Pauli::from_char('Q').is_err());
}

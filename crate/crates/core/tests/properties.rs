//! Property-based checks over randomized inputs.

use proptest::prelude::*;

use pfp_core::information::{mutual_information, CqState};
use pfp_core::linalg::{hermitian_eig, trace_norm_distance, ComplexMatrix};
use pfp_core::ri::parse_ri;
use pfp_core::rng::CounterRng;
use pfp_core::sample;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// (A ⊗ B)(C ⊗ D) = AC ⊗ BD for arbitrary small complex matrices.
    #[test]
    fn tensor_mixed_product(seed in any::<u64>(), da in 1usize..4, db in 1usize..4) {
        let mut rng = CounterRng::new(seed);
        let a = sample::random_hermitian(da, &mut rng);
        let c = sample::random_hermitian(da, &mut rng);
        let b = sample::random_hermitian(db, &mut rng);
        let d = sample::random_hermitian(db, &mut rng);
        let lhs = a.tensor(&b).matmul(&c.tensor(&d)).unwrap();
        let rhs = a.matmul(&c).unwrap().tensor(&b.matmul(&d).unwrap());
        prop_assert!(lhs.approx_eq(&rhs, 1e-10));
    }

    /// Trace distance is symmetric, nonnegative, and zero only on equal
    /// operators.
    #[test]
    fn trace_distance_metric_axioms(seed in any::<u64>(), dim in 2usize..6) {
        let mut rng = CounterRng::new(seed);
        let rho = sample::random_density_matrix(dim, &mut rng);
        let sigma = sample::random_density_matrix(dim, &mut rng);
        let d1 = trace_norm_distance(&rho, &sigma).unwrap();
        let d2 = trace_norm_distance(&sigma, &rho).unwrap();
        prop_assert!((d1 - d2).abs() < 1e-10);
        prop_assert!(d1 >= 0.0);
        prop_assert!(trace_norm_distance(&rho, &rho).unwrap() < 1e-10);
        // Random full-rank states essentially never coincide.
        prop_assert!(d1 > 1e-6);
    }

    /// Eigendecomposition reconstructs arbitrary Hermitian inputs.
    #[test]
    fn eigendecomposition_reconstructs(seed in any::<u64>(), dim in 1usize..9) {
        let mut rng = CounterRng::new(seed);
        let m = sample::random_hermitian(dim, &mut rng);
        let eig = hermitian_eig(&m).unwrap();
        prop_assert!(eig.reconstruct().sub(&m).frobenius_norm() < 1e-9);
    }

    /// Mutual information is invariant under relabeling the classical
    /// symbols.
    #[test]
    fn mutual_information_relabeling(seed in any::<u64>(), rot in 1usize..3) {
        let mut rng = CounterRng::new(seed);
        let raw: Vec<f64> = (0..3).map(|_| rng.next_f64() + 1e-3).collect();
        let total: f64 = raw.iter().sum();
        let probs: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let states: Vec<ComplexMatrix> =
            (0..3).map(|_| sample::random_density_matrix(2, &mut rng)).collect();
        let base = mutual_information(&CqState::new(probs.clone(), states.clone()).unwrap()).unwrap();
        let perm: Vec<usize> = (0..3).map(|i| (i + rot) % 3).collect();
        let p2: Vec<f64> = perm.iter().map(|&i| probs[i]).collect();
        let s2: Vec<ComplexMatrix> = perm.iter().map(|&i| states[i].clone()).collect();
        let rotated = mutual_information(&CqState::new(p2, s2).unwrap()).unwrap();
        prop_assert!((base - rotated).abs() < 1e-9);
    }

    /// Printing a parsed resource inequality is a fixed point of
    /// parse-then-print.
    #[test]
    fn ri_canonical_form_round_trips(key in 0.0f64..4.0, bit in 0.0f64..4.0, pad in 0usize..4) {
        let spaces = " ".repeat(pad);
        let text = format!("<N>{spaces}+{spaces}{key}[cc]*{spaces}>={spaces}{bit}[c->c]*");
        let once = parse_ri(&text).unwrap();
        let printed = once.to_string();
        let twice = parse_ri(&printed).unwrap();
        prop_assert_eq!(&printed, &twice.to_string());
        prop_assert_eq!(once.lhs, twice.lhs);
        prop_assert_eq!(once.rhs, twice.rhs);
    }
}

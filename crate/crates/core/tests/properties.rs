use num_complex::Complex64;
use proptest::prelude::*;
use qdesc_core::circuit_file::{parse_circuit, to_text};
use qdesc_core::engine::{evolve, evolve_global, run_with_trace, Circuit};
use qdesc_core::experiments::{differential_check, random_circuit};
use qdesc_core::pauli::{PauliString, PauliSum};
use qdesc_core::provenance::{locality_audit, numerical_dependence_check, structural_tags};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pauli_string(n: usize) -> impl Strategy<Value = PauliString> {
    let mask = (1u64 << n) - 1;
    (any::<u64>(), any::<u64>(), 0u32..4)
        .prop_map(move |(x, z, k)| PauliString::from_masks(n, x & mask, z & mask, k).unwrap())
}

/// Sums with small integer coefficients so that products are exact in floating point.
fn int_sum(n: usize) -> impl Strategy<Value = PauliSum> {
    prop::collection::vec((pauli_string(n), -3i32..=3, -3i32..=3), 0..6).prop_map(move |terms| {
        PauliSum::from_terms(n, terms.into_iter().map(|(p, re, im)| (Complex64::new(re as f64, im as f64), p)))
            .unwrap()
    })
}

proptest! {
    #[test]
    fn symplectic_product_matches_dense(a in pauli_string(3), b in pauli_string(3)) {
        let ab = a.mul(&b).unwrap().to_dense().unwrap();
        let dense = a.to_dense().unwrap() * b.to_dense().unwrap();
        prop_assert!((ab - dense).iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn product_is_associative(a in int_sum(3), b in int_sum(3), c in int_sum(3)) {
        let left = a.mul(&b).unwrap().mul(&c).unwrap();
        let right = a.mul(&b.mul(&c).unwrap()).unwrap();
        prop_assert!(left.max_abs_diff(&right).unwrap() == 0.0);
    }

    #[test]
    fn adjoint_is_an_involution(a in int_sum(4)) {
        prop_assert!(a.adjoint().adjoint().bitwise_eq(&a));
        let dense = a.to_dense().unwrap();
        prop_assert!((a.adjoint().to_dense().unwrap() - dense.adjoint()).iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn dense_round_trip(a in int_sum(3)) {
        let back = PauliSum::from_dense(&a.to_dense().unwrap()).unwrap();
        prop_assert!(back.max_abs_diff(&a).unwrap() < 1e-12);
    }

    #[test]
    fn display_parse_round_trip(a in int_sum(4)) {
        let back = qdesc_core::pauli::parse_sum(&a.to_string(), 4).unwrap();
        prop_assert!(back.bitwise_eq(&a));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn step_and_global_agree(seed in any::<u64>(), n in 1usize..=4, depth in 0usize..=10) {
        let c = random_circuit(n, depth, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let d = evolve_global(&c).unwrap().max_abs_diff(&evolve(&c).unwrap()).unwrap();
        prop_assert!(d <= 1e-9, "diff {d}");
    }

    #[test]
    fn locality_holds(seed in any::<u64>(), depth in 0usize..=12) {
        let c = random_circuit(5, depth, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert!(locality_audit(&run_with_trace(&c).unwrap()).is_empty());
    }

    #[test]
    fn file_round_trip(seed in any::<u64>(), n in 1usize..=5, depth in 0usize..=8) {
        let c = random_circuit(n, depth, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let text = to_text(&c);
        let back = parse_circuit(&text).unwrap();
        prop_assert_eq!(to_text(&back), text);
        let d = evolve(&back).unwrap().max_abs_diff(&evolve(&c).unwrap()).unwrap();
        prop_assert!(d == 0.0);
    }
}

#[test]
fn random_six_wire_sweep() {
    for seed in 0..100u64 {
        let c = random_circuit(6, 20, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let r = differential_check(&c).unwrap();
        assert!(r.passed, "seed {seed}: {r:?}");
    }
}

#[test]
fn structural_tags_are_sound() {
    for seed in 0..10u64 {
        let c = random_circuit(3, 8, &mut ChaCha8Rng::seed_from_u64(1000 + seed)).unwrap();
        let tags = structural_tags(&c);
        for p in c.parameter_table().keys() {
            for t in [c.depth() / 2, c.depth()] {
                for w in 1..=3 {
                    if numerical_dependence_check(&c, w, t, p, 4, seed).unwrap() {
                        assert!(tags[t][w - 1].contains(p), "seed {seed}: q{w}({t}) depends on {p} untagged");
                    }
                }
            }
        }
    }
}

#[test]
fn empty_circuit_evolves_to_identity_descriptors() {
    let c = Circuit::empty(3).unwrap();
    let set = evolve(&c).unwrap();
    assert_eq!(set.time(), 0);
    for w in 1..=3 {
        assert_eq!(set.descriptor(w).z().expectation_zero(), Complex64::new(1.0, 0.0));
    }
}

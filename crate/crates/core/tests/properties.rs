//! Randomized invariants of the numerical building blocks.

mod common;

use common::*;
use musb::model::{build_problem, ProblemSpec};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn integrate_then_differentiate_is_identity(seed in any::<u64>(), terms in 1usize..12, v in 0u32..4) {
        let p = divisible_polynomial(&mut rng(seed), 4, terms);
        prop_assert!(roundtrip_exact(&p, v));
    }

    #[test]
    fn lu_solution_multiplies_back(seed in any::<u64>(), n in 1usize..40) {
        prop_assert!(lu_multiply_back(&mut rng(seed), n) <= 1e-8);
    }

    #[test]
    fn eigenvectors_rebuild_the_matrix(seed in any::<u64>(), n in 1usize..30) {
        prop_assert!(eigen_reconstruction(&mut rng(seed), n) <= 1e-10);
    }

    #[test]
    fn psd_projection_is_idempotent(seed in any::<u64>(), n in 1usize..30) {
        prop_assert!(psd_idempotence(&mut rng(seed), n) <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn split_volumes_sum_to_one(seed in any::<u64>(), dim in 1usize..20) {
        prop_assert!(volume_conservation(&mut rng(seed), dim, 10_000) <= 1e-9);
    }
}

#[test]
fn lifted_gradient_matches_central_differences() {
    let system = build_problem(&ProblemSpec::new(3, &[2, 1, 1, 1, 1])).unwrap();
    let worst = gradient_vs_differences(&system, 20, 7);
    assert!(worst <= 1e-6, "relative error {worst:e}");
}

#[test]
fn level_two_values_dominate_level_one() {
    let system = build_problem(&ProblemSpec::new(2, &[2, 1, 1, 1])).unwrap();
    let gap = containment_gap(&system, 100, 3);
    assert!(gap <= 1e-9, "level-1 value exceeds level-2 by {gap:e}");
}

#[test]
fn newton_solutions_survive_pruning() {
    let (solutions, pruned, inside) = soundness(&ProblemSpec::new(3, &[1, 1, 1, 1, 1]), 300, 4);
    assert!(solutions > 0 && pruned > 0, "solutions={solutions} pruned={pruned}");
    assert_eq!(inside, 0);
}

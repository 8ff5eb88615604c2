mod common;

use common::checks;
use proptest::prelude::*;

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig { cases: n, failure_persistence: None, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(cases(128))]

    #[test]
    fn positive_homogeneity(seed in any::<u64>()) {
        prop_assert_eq!(checks::homogeneity(seed), Ok(()));
    }

    #[test]
    fn sum_rule(seed in any::<u64>()) {
        prop_assert_eq!(checks::sum_rule(seed), Ok(()));
    }

    #[test]
    fn max_rule(seed in any::<u64>()) {
        prop_assert_eq!(checks::max_rule(seed), Ok(()));
    }

    #[test]
    fn max_min_affine_lower_bound(seed in any::<u64>()) {
        prop_assert_eq!(checks::max_min_lower_bound(seed), Ok(()));
    }

    #[test]
    fn monotone_comparison(seed in any::<u64>()) {
        prop_assert_eq!(checks::monotone_comparison(seed), Ok(()));
    }

    #[test]
    fn exact_rules_match_estimator(seed in any::<u64>()) {
        prop_assert_eq!(checks::min_affine_agreement(seed, 1), Ok(()));
        prop_assert_eq!(checks::norm_linear_agreement(seed, 1), Ok(()));
    }

    #[test]
    fn derivative_chain(seed in any::<u64>()) {
        prop_assert_eq!(checks::derivative_chain(seed), Ok(()));
    }

    #[test]
    fn gordan_exclusivity(seed in any::<u64>()) {
        prop_assert_eq!(checks::gordan(seed, None), Ok(()));
    }
}

proptest! {
    #![proptest_config(cases(100))]

    #[test]
    fn finite_descent_iff(seed in any::<u64>()) {
        prop_assert_eq!(checks::descent_iff(seed), Ok(()));
    }

    #[test]
    fn finite_certificates_match_brute_force(seed in any::<u64>()) {
        prop_assert_eq!(checks::certificates(seed), Ok(()));
    }

    #[test]
    fn finite_descent_terminates_at_minimum(seed in any::<u64>()) {
        prop_assert_eq!(checks::finite_descent(seed), Ok(()));
    }
}

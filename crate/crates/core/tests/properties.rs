//! Invariant suites: distance matrix, agglomeration, IC on noise-free data,
//! and the specification statistic.

mod common;

use common::props::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn distance_matrix_invariants((n, t_len, seed) in distance_args()) {
        distance_invariants(n, t_len, seed)?;
    }

    #[test]
    fn ic_on_noise_free_panels((m, seed) in ic_args()) {
        ic_zero_noise(m, seed)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn agglomeration_counts_and_equivariance((n, seed, rule) in agglomeration_args()) {
        agglomeration(n, seed, rule)?;
    }

    #[test]
    fn banded_q_matches_double_loop((g, cols, h3, seed) in q_args()) {
        q_banded(g, cols, h3, seed)?;
    }

    #[test]
    fn q_std_is_scale_free((g, cols, h3, seed, log_c) in scale_args()) {
        q_std_scale(g, cols, h3, seed, log_c)?;
    }
}

//! Instance selection and matching re-derived by exhaustive brute force.
//!
//! The library uses sorted per-author lookups; these tests redo every
//! qualification decision with naive full scans over the comment list and
//! demand exact agreement, then verify every matched pair's invariants
//! post hoc.

mod common;

use common::{check_matching, naive_its_selection, naive_treatments, random_corpus};
use modcausal::df::{match_controls, select_treatments, MatchConfig, Scenario};
use modcausal::its::select_its_instances;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

#[test]
fn its_selection_equals_brute_force_on_random_corpora() {
    for seed in 0..5 {
        let corpus = random_corpus(seed);
        for k in [1, 2, 3] {
            let fast = select_its_instances(&corpus, k);
            let naive = naive_its_selection(&corpus, k);
            assert_eq!(fast, naive, "seed {seed} k {k}");
        }
    }
}

#[test]
fn df_treatment_selection_equals_brute_force() {
    for seed in 0..5 {
        let corpus = random_corpus(seed);
        for scenario in [Scenario::NonAffected, Scenario::Affected] {
            let fast = select_treatments(&corpus, scenario);
            let naive = naive_treatments(&corpus, scenario);
            assert_eq!(fast, naive, "seed {seed} scenario {scenario}");
        }
    }
}

#[test]
fn matching_satisfies_invariants_and_minimal_gaps() {
    for seed in 0..5 {
        let corpus = random_corpus(seed);
        for scenario in [Scenario::NonAffected, Scenario::Affected] {
            check_matching(&corpus, scenario, &format!("seed {seed} {scenario}"));
        }
    }
}

#[test]
fn matching_invariant_under_treatment_order_permutation() {
    let corpus = random_corpus(11);
    let treatments = select_treatments(&corpus, Scenario::NonAffected);
    let reference = match_controls(
        &corpus,
        &treatments,
        Scenario::NonAffected,
        &MatchConfig::default(),
    );
    let mut rng = ChaCha12Rng::seed_from_u64(99);
    for _ in 0..3 {
        let mut shuffled = treatments.clone();
        shuffled.shuffle(&mut rng);
        let permuted = match_controls(
            &corpus,
            &shuffled,
            Scenario::NonAffected,
            &MatchConfig::default(),
        );
        assert_eq!(reference, permuted);
    }
}

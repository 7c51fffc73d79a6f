mod common;

use std::collections::BTreeSet;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ultraclust::hypergraph::{
    enumerate_hyperedges, hyperedge, minimal_enclosing_r_ball, r_balls, ClusterHypergraph,
    HyperedgeOptions, LowerBound, MetricSet,
};
use ultraclust::{build_cluster_tree, chain_distance_matrix, merge_trees, ClusterTree, Error, Execution};

struct Instance {
    rows: Vec<Vec<Vec<ultraclust::Rational>>>,
    trees: Vec<ClusterTree>,
}

fn instance(seed: u64, n: usize, k: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<_> = (0..k).map(|_| random_dissimilarity(&mut rng, n)).collect();
    let trees = rows
        .iter()
        .enumerate()
        .map(|(s, r)| build_cluster_tree(&chain_distance_matrix(&matrix(&format!("m{s}"), r))))
        .collect();
    Instance { rows, trees }
}

fn oracle_balls(inst: &Instance) -> Vec<BTreeSet<Set>> {
    inst.rows
        .iter()
        .map(|r| closed_balls(&epsilon_chain_distance(r)))
        .collect()
}

fn populated(inst: &Instance, lower_bound: LowerBound) -> ClusterHypergraph {
    let mut h = merge_trees(&inst.trees).unwrap();
    h.populate_hyperedges(&HyperedgeOptions {
        lower_bound,
        ..HyperedgeOptions::default()
    })
    .unwrap();
    h
}

proptest! {
    #![proptest_config(cases(48))]

    #[test]
    fn enumeration_matches_definition(seed in any::<u64>(), n in 1usize..=8, k in 1usize..=3) {
        let inst = instance(seed, n, k);
        let balls = oracle_balls(&inst);
        let h = populated(&inst, LowerBound::Inclusive);
        let vertices: BTreeSet<Set> = (0..h.vertices().len()).map(|v| set_of(&h, v)).collect();
        let expected_vertices: BTreeSet<Set> = balls.iter().flatten().cloned().collect();
        prop_assert_eq!(vertices, expected_vertices);
        let mut expected = brute_force_hyperedges(&balls, false);
        expected.sort();
        prop_assert_eq!(library_edges(&h), expected);
    }

    #[test]
    fn strict_lower_bound_matches_definition(seed in any::<u64>(), n in 1usize..=7, k in 1usize..=3) {
        let inst = instance(seed, n, k);
        let h = populated(&inst, LowerBound::Strict);
        let mut expected = brute_force_hyperedges(&oracle_balls(&inst), true);
        expected.sort();
        prop_assert_eq!(library_edges(&h), expected);
    }

    #[test]
    fn restriction_recovers_each_tree(seed in any::<u64>(), n in 1usize..=9, k in 1usize..=4) {
        let inst = instance(seed, n, k);
        let h = merge_trees(&inst.trees).unwrap();
        for (s, tree) in inst.trees.iter().enumerate() {
            let balls: BTreeSet<Set> = (0..h.vertices().len())
                .filter(|&v| h.ball_membership(v).contains(s))
                .map(|v| set_of(&h, v))
                .collect();
            let clusters: BTreeSet<Set> = tree.member_sets().iter().map(|m| m.iter().collect()).collect();
            prop_assert_eq!(balls, clusters);
            let edges: BTreeSet<(Set, Set)> = h
                .two_edges()
                .iter()
                .filter(|e| e.metric == s)
                .map(|e| (set_of(&h, e.child), set_of(&h, e.parent)))
                .collect();
            let sets = tree.member_sets();
            let tree_edges: BTreeSet<(Set, Set)> = tree
                .cover_edges()
                .into_iter()
                .map(|(c, p)| (sets[c].iter().collect(), sets[p].iter().collect()))
                .collect();
            prop_assert_eq!(edges, tree_edges);
        }
        for v in 0..h.vertices().len() {
            prop_assert!(!h.ball_membership(v).is_empty());
        }
    }

    #[test]
    fn r_balls_shrink_as_subfamilies_grow(seed in any::<u64>(), n in 1usize..=8, k in 2usize..=4) {
        let inst = instance(seed, n, k);
        let h = merge_trees(&inst.trees).unwrap();
        for small in 1u64..(1 << k) {
            for big in 1u64..(1 << k) {
                if small & big == small {
                    let a: BTreeSet<usize> = r_balls(&h, MetricSet::from_bits(small)).unwrap().into_iter().collect();
                    let b: BTreeSet<usize> = r_balls(&h, MetricSet::from_bits(big)).unwrap().into_iter().collect();
                    prop_assert!(b.is_subset(&a));
                }
            }
        }
    }

    #[test]
    fn hyperedges_are_unique_and_bounded(seed in any::<u64>(), n in 2usize..=9, k in 1usize..=4) {
        let inst = instance(seed, n, k);
        let h = populated(&inst, LowerBound::Inclusive);
        let keys: BTreeSet<_> = h
            .hyperedges()
            .iter()
            .map(|e| (e.min_ball, e.max_ball, e.members.clone()))
            .collect();
        prop_assert_eq!(keys.len(), h.hyperedges().len());
        for e in h.hyperedges() {
            prop_assert!(e.a_dimension >= 1 && e.b_dimension >= 1);
            prop_assert!(e.a_dimension < e.members.len());
            let again = hyperedge(&h, e.subfamily, e.min_ball, LowerBound::Inclusive).unwrap();
            prop_assert_eq!(&again.members, &e.members);
            prop_assert_eq!(again.max_ball, e.max_ball);
        }
    }

    #[test]
    fn enumeration_is_schedule_independent(seed in any::<u64>(), n in 2usize..=9, k in 1usize..=4) {
        let inst = instance(seed, n, k);
        let h = merge_trees(&inst.trees).unwrap();
        let opts = |execution| HyperedgeOptions { execution, ..HyperedgeOptions::default() };
        prop_assert_eq!(
            enumerate_hyperedges(&h, &opts(Execution::Sequential)).unwrap(),
            enumerate_hyperedges(&h, &opts(Execution::Parallel)).unwrap()
        );
    }
}

fn triangle_pair() -> ClusterHypergraph {
    let a1 = labeled("a1", &["A", "B", "C"], &[&[0, 3, 4], &[3, 0, 5], &[4, 5, 0]]);
    let b1 = labeled("b1", &["A", "B", "C"], &[&[0, 4, 3], &[4, 0, 5], &[3, 5, 0]]);
    let trees: Vec<_> = [a1, b1].iter().map(|m| build_cluster_tree(&chain_distance_matrix(m))).collect();
    merge_trees(&trees).unwrap()
}

#[test]
fn r_balls_and_enclosing_balls_in_triangle_pair() {
    let h = triangle_pair();
    let both = h.subfamily(&["a1", "b1"]).unwrap();
    let names: Vec<String> = r_balls(&h, both).unwrap().into_iter().map(|v| name(&h, v)).collect();
    assert_eq!(names, ["A", "B", "C", "ABC"]);
    let b = h.vertex_by_labels(&["B"]).unwrap();
    let j = minimal_enclosing_r_ball(&h, both, b).unwrap().unwrap();
    assert_eq!(name(&h, j), "ABC");
    let top = h.vertex_by_labels(&["A", "B", "C"]).unwrap();
    assert_eq!(minimal_enclosing_r_ball(&h, both, top).unwrap(), None);
    let err = hyperedge(&h, both, top, LowerBound::Inclusive).unwrap_err();
    assert!(err.to_string().contains("maximal"), "{err}");
    let ab = h.vertex_by_labels(&["A", "B"]).unwrap();
    assert!(matches!(
        minimal_enclosing_r_ball(&h, both, ab),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn duplicate_metric_ids_rejected() {
    let a1 = labeled("a1", &["A", "B"], &[&[0, 1], &[1, 0]]);
    let t = build_cluster_tree(&chain_distance_matrix(&a1));
    assert!(matches!(merge_trees(&[t.clone(), t]), Err(Error::DuplicateMetric(_))));
}

#[test]
fn mismatched_points_rejected() {
    let a = labeled("a", &["A", "B"], &[&[0, 1], &[1, 0]]);
    let b = labeled("b", &["A", "C"], &[&[0, 1], &[1, 0]]);
    let trees: Vec<_> = [a, b].iter().map(|m| build_cluster_tree(&chain_distance_matrix(m))).collect();
    assert!(merge_trees(&trees).is_err());
}

#[test]
fn subfamily_cap() {
    let inst = instance(7, 5, 3);
    let h = merge_trees(&inst.trees).unwrap();
    let opts = HyperedgeOptions {
        max_subfamilies: 6,
        ..HyperedgeOptions::default()
    };
    assert!(matches!(enumerate_hyperedges(&h, &opts), Err(Error::CapExceeded { .. })));
}

/// A- and B-dimension can disagree; look for instances among small random
/// families and check the disagreement against the oracle.
#[test]
fn search_for_dimension_divergence() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut divergent = 0;
    for _ in 0..300 {
        let n = rng.gen_range(3..=6);
        let k = rng.gen_range(1..=3);
        let inst = instance(rng.gen(), n, k);
        let h = populated(&inst, LowerBound::Inclusive);
        for e in h.hyperedges() {
            if e.a_dimension != e.b_dimension {
                divergent += 1;
            }
        }
        let mut expected = brute_force_hyperedges(&oracle_balls(&inst), false);
        expected.sort();
        assert_eq!(library_edges(&h), expected);
    }
    println!("hyperedges with a_dimension != b_dimension: {divergent}");
    assert!(divergent > 0);
}

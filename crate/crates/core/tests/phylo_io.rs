mod common;

use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ultraclust::hypergraph::{HyperedgeOptions, LowerBound};
use ultraclust::io::{
    abstract_from_json, hypergraph_to_json, read_marker_csv, read_matrix_tsv, tree_from_json,
    tree_to_json, write_matrix_tsv,
};
use ultraclust::phylo::{default_grid, sweep_trees, weight_sweep, weighted_distance, WeightVector};
use ultraclust::product::AbstractHypergraph;
use ultraclust::{build_cluster_tree, chain_distance_matrix, merge_trees, Execution, UltrametricMatrix};

const MARKERS: &str = "genome,m1,m2\nA,0,0\nB,1,0\nC,0,1\nD,1,1\n";

fn top_dimensions(grid: &[WeightVector]) -> (usize, usize, usize) {
    let table = read_marker_csv(MARKERS).unwrap();
    let sweep = weight_sweep(&table, grid, Execution::default()).unwrap();
    let mut h = merge_trees(&sweep_trees(&sweep)).unwrap();
    h.populate_hyperedges(&HyperedgeOptions::default()).unwrap();
    let top = h
        .hyperedges()
        .iter()
        .filter(|e| name(&h, e.max_ball) == "ABCD" && name(&h, e.min_ball) == "A")
        .max_by_key(|e| e.members.len())
        .unwrap();
    (sweep.family.len(), top.a_dimension, top.b_dimension)
}

#[test]
fn two_marker_sweep_has_dimension_two() {
    let grid = default_grid(2, &r(1, 1000), false).unwrap();
    assert_eq!(top_dimensions(&grid), (2, 2, 2));
}

#[test]
fn uniform_weights_add_a_star_tree() {
    let grid = default_grid(2, &r(1, 1000), true).unwrap();
    let (family, a, b) = top_dimensions(&grid);
    assert_eq!(family, 3);
    assert_eq!((a, b), (2, 3));
}

#[test]
fn scaling_weights_keeps_the_tree() {
    let table = read_marker_csv(MARKERS).unwrap();
    for w in [[r(1, 1), r(1, 1000)], [r(2, 3), r(5, 1)], [r(1, 1), r(1, 1)]] {
        let w = WeightVector::new(w.to_vec()).unwrap();
        let base = build_cluster_tree(&chain_distance_matrix(&weighted_distance(&table, &w).unwrap()));
        for f in [r(1, 7), r(3, 1), r(1000, 1)] {
            let scaled = w.scaled(&f).unwrap();
            let m = weighted_distance(&table, &scaled).unwrap();
            let tree = build_cluster_tree(&chain_distance_matrix(&m));
            assert_eq!(tree.member_sets(), base.member_sets());
        }
    }
}

#[test]
fn single_marker_weight_is_degenerate() {
    let table = read_marker_csv(MARKERS).unwrap();
    let w = WeightVector::new(vec![r(1, 1), r(0, 1)]).unwrap();
    let err = weighted_distance(&table, &w).unwrap_err().to_string();
    assert!(err.contains("m2"), "{err}");
}

proptest! {
    #![proptest_config(cases(48))]

    #[test]
    fn tree_json_round_trip(seed in any::<u64>(), n in 1usize..=32) {
        let rows = random_ultrametric(&mut ChaCha8Rng::seed_from_u64(seed), n);
        let tree = build_cluster_tree(&UltrametricMatrix::new(matrix("u", &rows)).unwrap());
        let value = tree_to_json(&tree);
        let text = serde_json::to_string(&value).unwrap();
        let back = tree_from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        prop_assert_eq!(&back, &tree);
        prop_assert_eq!(serde_json::to_string(&tree_to_json(&back)).unwrap(), text);
    }

    #[test]
    fn matrix_tsv_round_trip(seed in any::<u64>(), n in 1usize..=10) {
        let m = matrix("m", &random_dissimilarity(&mut ChaCha8Rng::seed_from_u64(seed), n));
        let back = read_matrix_tsv(&write_matrix_tsv(&m), "m").unwrap().into_metric().unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn hypergraph_json_reads_back_as_the_same_structure(seed in any::<u64>(), n in 2usize..=7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trees: Vec<_> = (0..2)
            .map(|s| {
                let rows = random_dissimilarity(&mut rng, n);
                build_cluster_tree(&chain_distance_matrix(&matrix(&format!("m{s}"), &rows)))
            })
            .collect();
        let mut h = merge_trees(&trees).unwrap();
        h.populate_hyperedges(&HyperedgeOptions::default()).unwrap();
        let value = hypergraph_to_json(&h, LowerBound::Inclusive, None);
        let read = abstract_from_json(&value).unwrap();
        let direct = AbstractHypergraph::from_cluster_hypergraph(&h);
        prop_assert_eq!(read.vertex_count(), direct.vertex_count());
        let map: Vec<usize> = direct
            .vertices
            .iter()
            .map(|v| read.vertex_index(v).unwrap())
            .collect();
        prop_assert!(ultraclust::product::hypergraph_isomorphic(&direct, &read, &map).unwrap());
    }
}

//! Multi-metric single-linkage clustering.
//!
//! Each metric on a finite point set yields a tree of chain-distance balls
//! ([`dendrogram`]). Merging the trees of a metric family, with set-equal
//! clusters identified, gives a partially ordered cluster hypergraph whose
//! hyperedges and their A/B-dimensions are computed in [`hypergraph`].
//! [`padic`] and [`phylo`] generate metric families from finite p-adic
//! models and genetic-marker tables.

#![allow(clippy::needless_range_loop)]

pub mod dendrogram;
pub mod error;
pub mod exec;
pub mod hypergraph;
pub mod io;
pub mod metric;
pub mod padic;
pub mod phylo;
pub mod product;
pub mod rational;

pub use dendrogram::{ball, build_cluster_tree, tree_to_ultrametric, Cluster, ClusterTree, Members};
pub use error::{Error, ErrorClass, Result};
pub use exec::Execution;
pub use hypergraph::{
    enumerate_hyperedges, is_compatible, merge_trees, ClusterHypergraph, Hyperedge,
    HyperedgeOptions, LowerBound, MetricSet,
};
pub use metric::{
    chain_distance_matrix, epsilon_connected, is_ultrametric, validate_metric, DissimilarityTable,
    MetricMatrix, PointSet, UltrametricMatrix,
};
pub use product::{hypergraph_product, AbstractHypergraph};
pub use rational::{format_rational, parse_rational, Rational};

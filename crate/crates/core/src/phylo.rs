//! Metric families from genetic-marker tables.
//!
//! Each marker gives a (possibly degenerate) genome distance; a weight vector
//! combines them into `d = Σ w_j d_j`. Sweeping weights yields a family of
//! metrics, deduplicated by the cluster tree each one induces.

use std::collections::HashMap;

use num_traits::{One, Zero};

use crate::dendrogram::{build_cluster_tree, ClusterTree, Members};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::metric::{chain_distance_matrix, DissimilarityTable, MetricMatrix, PointSet};
use crate::rational::{format_rational, is_negative, Rational};

/// Per-marker symbol distance.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum MarkerKernel {
    /// 0 for equal symbols, 1 otherwise.
    #[default]
    Mismatch,
    /// Explicit symmetric table; equal symbols are at distance 0.
    Table(HashMap<(String, String), Rational>),
}

impl MarkerKernel {
    fn distance(&self, a: &str, b: &str) -> Result<Rational> {
        if a == b {
            return Ok(Rational::zero());
        }
        match self {
            MarkerKernel::Mismatch => Ok(Rational::one()),
            MarkerKernel::Table(table) => table
                .get(&(a.to_string(), b.to_string()))
                .or_else(|| table.get(&(b.to_string(), a.to_string())))
                .cloned()
                .ok_or_else(|| Error::Precondition(format!("no kernel distance for {a:?}/{b:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkerTable {
    genomes: PointSet,
    markers: Vec<String>,
    /// `values[genome][marker]`.
    values: Vec<Vec<String>>,
    kernels: Vec<MarkerKernel>,
}

impl MarkerTable {
    pub fn new(genomes: PointSet, markers: Vec<String>, values: Vec<Vec<String>>) -> Result<Self> {
        if genomes.len() < 2 {
            return Err(Error::Precondition("a marker table needs at least 2 genomes".into()));
        }
        if markers.is_empty() {
            return Err(Error::Precondition("a marker table needs at least 1 marker".into()));
        }
        if values.len() != genomes.len() {
            return Err(Error::Precondition(format!(
                "{} value rows for {} genomes",
                values.len(),
                genomes.len()
            )));
        }
        for (g, row) in values.iter().enumerate() {
            if row.len() != markers.len() {
                return Err(Error::Precondition(format!(
                    "genome {:?} has {} values for {} markers",
                    genomes.label(g),
                    row.len(),
                    markers.len()
                )));
            }
            if let Some(m) = row.iter().position(|v| v.trim().is_empty()) {
                return Err(Error::Precondition(format!(
                    "missing value for genome {:?}, marker {:?}",
                    genomes.label(g),
                    markers[m]
                )));
            }
        }
        let kernels = vec![MarkerKernel::Mismatch; markers.len()];
        Ok(MarkerTable {
            genomes,
            markers,
            values,
            kernels,
        })
    }

    pub fn set_kernel(&mut self, marker: usize, kernel: MarkerKernel) -> Result<()> {
        self.check_marker(marker)?;
        if let MarkerKernel::Table(t) = &kernel {
            if let Some(bad) = t.values().find(|v| is_negative(v)) {
                return Err(Error::Precondition(format!(
                    "negative kernel distance {}",
                    format_rational(bad)
                )));
            }
        }
        self.kernels[marker] = kernel;
        Ok(())
    }

    pub fn genomes(&self) -> &PointSet {
        &self.genomes
    }

    pub fn markers(&self) -> &[String] {
        &self.markers
    }

    pub fn marker_index(&self, name: &str) -> Option<usize> {
        self.markers.iter().position(|m| m == name)
    }

    pub fn value(&self, genome: usize, marker: usize) -> &str {
        &self.values[genome][marker]
    }

    fn check_marker(&self, marker: usize) -> Result<()> {
        if marker < self.markers.len() {
            Ok(())
        } else {
            Err(Error::Precondition(format!(
                "marker index {marker} out of range for {} markers",
                self.markers.len()
            )))
        }
    }
}

/// Nonnegative marker weights, not all zero.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WeightVector(Vec<Rational>);

impl WeightVector {
    pub fn new(weights: Vec<Rational>) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| is_negative(w)) {
            return Err(Error::Precondition(format!("negative weight {}", format_rational(w))));
        }
        if weights.iter().all(Zero::is_zero) {
            return Err(Error::Precondition("weights must not all be zero".into()));
        }
        Ok(WeightVector(weights))
    }

    pub fn weights(&self) -> &[Rational] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `w(1,1/1000)`.
    pub fn label(&self) -> String {
        let parts: Vec<String> = self.0.iter().map(format_rational).collect();
        format!("w({})", parts.join(","))
    }

    pub fn scaled(&self, factor: &Rational) -> Result<Self> {
        WeightVector::new(self.0.iter().map(|w| w * factor).collect())
    }
}

/// Distance between genomes on one marker; may be zero off the diagonal.
pub fn marker_distance(table: &MarkerTable, marker: usize) -> Result<DissimilarityTable> {
    table.check_marker(marker)?;
    let n = table.genomes.len();
    let kernel = &table.kernels[marker];
    let mut rows = vec![vec![Rational::zero(); n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = kernel.distance(table.value(i, marker), table.value(j, marker))?;
            rows[i][j] = d.clone();
            rows[j][i] = d;
        }
    }
    Ok(DissimilarityTable::new(
        table.genomes.clone(),
        table.markers[marker].clone(),
        rows,
    ))
}

/// `d(X, Y) = Σ_j w_j d_j(X, Y)`; fails when two genomes are at distance 0.
pub fn weighted_distance(table: &MarkerTable, weights: &WeightVector) -> Result<MetricMatrix> {
    if weights.len() != table.markers.len() {
        return Err(Error::Precondition(format!(
            "{} weights for {} markers",
            weights.len(),
            table.markers.len()
        )));
    }
    let per_marker: Vec<DissimilarityTable> = (0..table.markers.len())
        .map(|j| marker_distance(table, j))
        .collect::<Result<_>>()?;
    let n = table.genomes.len();
    let mut rows = vec![vec![Rational::zero(); n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let total: Rational = per_marker
                .iter()
                .zip(weights.weights())
                .map(|(d, w)| w * &d.rows[i][j])
                .sum();
            if total.is_zero() {
                let unused: Vec<&str> = per_marker
                    .iter()
                    .zip(weights.weights())
                    .enumerate()
                    .filter(|(_, (d, w))| w.is_zero() && !d.rows[i][j].is_zero())
                    .map(|(k, _)| table.markers[k].as_str())
                    .collect();
                return Err(Error::Precondition(format!(
                    "genomes {:?} and {:?} are indistinguishable under {}; zero-weight markers separating them: {:?}",
                    table.genomes.label(i),
                    table.genomes.label(j),
                    weights.label(),
                    unused
                )));
            }
            rows[i][j] = total.clone();
            rows[j][i] = total;
        }
    }
    DissimilarityTable::new(table.genomes.clone(), weights.label(), rows).into_metric()
}

/// The `N` axis-dominant vectors (one weight 1, the rest `epsilon`),
/// optionally followed by the uniform vector.
pub fn default_grid(markers: usize, epsilon: &Rational, include_uniform: bool) -> Result<Vec<WeightVector>> {
    if markers == 0 {
        return Err(Error::Precondition("no markers".into()));
    }
    let mut grid: Vec<WeightVector> = (0..markers)
        .map(|j| {
            WeightVector::new(
                (0..markers)
                    .map(|k| if k == j { Rational::one() } else { epsilon.clone() })
                    .collect(),
            )
        })
        .collect::<Result<_>>()?;
    let uniform = WeightVector::new(vec![Rational::one(); markers])?;
    if include_uniform && !grid.contains(&uniform) {
        grid.push(uniform);
    }
    Ok(grid)
}

/// One tree-equivalence class of a weight sweep.
#[derive(Debug, Clone)]
pub struct SweepMetric {
    /// Weighted metric of the first generating vector.
    pub metric: MetricMatrix,
    pub tree: ClusterTree,
    /// Generating vectors in grid order.
    pub provenance: Vec<WeightVector>,
}

#[derive(Debug, Clone)]
pub struct Sweep {
    /// Ordered by the first provenance vector, lexicographically.
    pub family: Vec<SweepMetric>,
    /// Grid vectors that were skipped, with the reason.
    pub skipped: Vec<(WeightVector, String)>,
}

type TreeKey = Vec<(Members, Option<Members>)>;

fn tree_key(tree: &ClusterTree) -> TreeKey {
    tree.clusters()
        .iter()
        .enumerate()
        .map(|(c, cluster)| {
            (
                cluster.members.clone(),
                tree.parent(c).map(|p| tree.clusters()[p].members.clone()),
            )
        })
        .collect()
}

/// Evaluates every grid vector and keeps one metric per distinct induced
/// cluster tree.
pub fn weight_sweep(table: &MarkerTable, grid: &[WeightVector], exec: Execution) -> Result<Sweep> {
    if grid.is_empty() {
        return Err(Error::Precondition("empty weight grid".into()));
    }
    let evaluated = exec::map_slice(exec, grid, |w| {
        weighted_distance(table, w).map(|m| {
            let tree = build_cluster_tree(&chain_distance_matrix(&m));
            (m, tree)
        })
    });
    let mut classes: Vec<(TreeKey, SweepMetric)> = Vec::new();
    let mut skipped = Vec::new();
    for (w, result) in grid.iter().zip(evaluated) {
        match result {
            Err(Error::Precondition(reason)) => skipped.push((w.clone(), reason)),
            Err(e) => return Err(e),
            Ok((metric, tree)) => {
                let key = tree_key(&tree);
                match classes.iter_mut().find(|(k, _)| *k == key) {
                    Some((_, class)) => class.provenance.push(w.clone()),
                    None => classes.push((
                        key,
                        SweepMetric {
                            metric,
                            tree,
                            provenance: vec![w.clone()],
                        },
                    )),
                }
            }
        }
    }
    if classes.is_empty() {
        return Err(Error::Precondition(
            "every weight vector in the grid is degenerate".into(),
        ));
    }
    let mut family: Vec<SweepMetric> = classes.into_iter().map(|(_, c)| c).collect();
    family.sort_by(|a, b| a.provenance[0].cmp(&b.provenance[0]));
    Ok(Sweep { family, skipped })
}

/// Trees of a sweep, ready for merging.
pub fn sweep_trees(sweep: &Sweep) -> Vec<ClusterTree> {
    sweep.family.iter().map(|s| s.tree.clone()).collect()
}

//! The partially ordered cluster hypergraph of a metric family.
//!
//! Vertices are the distinct member sets of all per-metric cluster trees.
//! Two-edges are the cover edges of each tree, labeled by metric. For a
//! subfamily `r` of metrics, an `r`-ball is a vertex that is a ball of every
//! metric in `r`; each `r`-ball `I` below the top has a unique smallest
//! `r`-ball `J` above it, and the hyperedge `(I, J)` collects every vertex
//! between them that is a ball of at least one metric in `r`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::dendrogram::{size_order, ClusterTree, Members};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::metric::PointSet;
use crate::rational::Rational;

pub type VertexId = usize;

/// Maximum number of metrics in one hypergraph.
pub const MAX_METRICS: usize = 64;

/// Default cap on the number of subfamilies enumerated.
pub const DEFAULT_MAX_SUBFAMILIES: u64 = 4095;

/// A set of metric indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct MetricSet(u64);

impl MetricSet {
    pub fn empty() -> Self {
        MetricSet(0)
    }

    pub fn single(metric: usize) -> Self {
        assert!(metric < MAX_METRICS);
        MetricSet(1 << metric)
    }

    pub fn all(count: usize) -> Self {
        assert!(count <= MAX_METRICS);
        if count == MAX_METRICS {
            MetricSet(u64::MAX)
        } else {
            MetricSet((1u64 << count) - 1)
        }
    }

    pub fn from_bits(bits: u64) -> Self {
        MetricSet(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn from_indices(indices: impl IntoIterator<Item = usize>) -> Self {
        indices
            .into_iter()
            .fold(MetricSet(0), |acc, i| acc.union(MetricSet::single(i)))
    }

    pub fn contains(self, metric: usize) -> bool {
        metric < MAX_METRICS && self.0 & (1 << metric) != 0
    }

    pub fn insert(&mut self, metric: usize) {
        *self = self.union(MetricSet::single(metric));
    }

    pub fn union(self, other: MetricSet) -> MetricSet {
        MetricSet(self.0 | other.0)
    }

    pub fn intersects(self, other: MetricSet) -> bool {
        self.0 & other.0 != 0
    }

    pub fn is_subset(self, other: MetricSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..MAX_METRICS).filter(move |&i| self.contains(i))
    }
}

/// Lower-bound convention for B-dimension: does `J_k = I` count?
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LowerBound {
    /// `I ⊆ J_k ⊊ J`.
    #[default]
    Inclusive,
    /// `I ⊊ J_k ⊊ J`.
    Strict,
}

#[derive(Debug, Clone, Copy)]
pub struct HyperedgeOptions {
    pub lower_bound: LowerBound,
    pub max_subfamilies: u64,
    pub execution: Execution,
}

impl Default for HyperedgeOptions {
    fn default() -> Self {
        HyperedgeOptions {
            lower_bound: LowerBound::Inclusive,
            max_subfamilies: DEFAULT_MAX_SUBFAMILIES,
            execution: Execution::default(),
        }
    }
}

/// A cover edge of one metric's tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TwoEdge {
    pub child: VertexId,
    pub parent: VertexId,
    pub metric: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hyperedge {
    /// Canonical subfamily: the union of all generating subfamilies, which
    /// itself generates this hyperedge.
    pub subfamily: MetricSet,
    /// Every subfamily that generates this `(I, J, members)`.
    pub provenance: Vec<MetricSet>,
    pub min_ball: VertexId,
    pub max_ball: VertexId,
    /// Sorted vertex ids.
    pub members: Vec<VertexId>,
    pub a_dimension: usize,
    pub b_dimension: usize,
}

#[derive(Debug, Clone)]
pub struct ClusterHypergraph {
    points: PointSet,
    metric_ids: Vec<String>,
    vertices: Vec<Members>,
    index: HashMap<Members, VertexId>,
    ball_membership: Vec<MetricSet>,
    two_edges: Vec<TwoEdge>,
    /// `[metric][vertex]`: parent in that metric's tree.
    tree_parent: Vec<Vec<Option<VertexId>>>,
    /// `[metric][vertex]`: children in that metric's tree.
    tree_children: Vec<Vec<Vec<VertexId>>>,
    /// `[metric][vertex]`: diameter when the vertex is a ball of that metric.
    diameters: Vec<Vec<Option<Rational>>>,
    hyperedges: Vec<Hyperedge>,
}

/// Merges per-metric cluster trees, identifying set-equal clusters.
pub fn merge_trees(trees: &[ClusterTree]) -> Result<ClusterHypergraph> {
    let first = trees
        .first()
        .ok_or_else(|| Error::Precondition("merge_trees needs at least one tree".into()))?;
    if trees.len() > MAX_METRICS {
        return Err(Error::CapExceeded {
            what: "metric count",
            actual: trees.len() as u128,
            cap: MAX_METRICS as u128,
        });
    }
    let points = first.points().clone();
    let mut metric_ids: Vec<String> = Vec::with_capacity(trees.len());
    for t in trees {
        if t.points() != &points {
            return Err(Error::PointSetMismatch(
                first.metric_id().to_string(),
                t.metric_id().to_string(),
            ));
        }
        if metric_ids.iter().any(|id| id == t.metric_id()) {
            return Err(Error::DuplicateMetric(t.metric_id().to_string()));
        }
        metric_ids.push(t.metric_id().to_string());
    }

    let mut vertices: Vec<Members> = trees.iter().flat_map(|t| t.member_sets()).collect();
    vertices.sort_by(size_order);
    vertices.dedup();
    let index: HashMap<Members, VertexId> = vertices
        .iter()
        .enumerate()
        .map(|(v, m)| (m.clone(), v))
        .collect();

    let k = trees.len();
    let nv = vertices.len();
    let mut ball_membership = vec![MetricSet::empty(); nv];
    let mut tree_parent = vec![vec![None; nv]; k];
    let mut tree_children = vec![vec![Vec::new(); nv]; k];
    let mut diameters = vec![vec![None; nv]; k];
    let mut two_edges = Vec::new();
    for (s, t) in trees.iter().enumerate() {
        let ids: Vec<VertexId> = t.clusters().iter().map(|c| index[&c.members]).collect();
        for (c, cluster) in t.clusters().iter().enumerate() {
            ball_membership[ids[c]].insert(s);
            diameters[s][ids[c]] = Some(cluster.diameter.clone());
        }
        for (c, p) in t.cover_edges() {
            let (child, parent) = (ids[c], ids[p]);
            tree_parent[s][child] = Some(parent);
            tree_children[s][parent].push(child);
            two_edges.push(TwoEdge {
                child,
                parent,
                metric: s,
            });
        }
    }
    for per_metric in &mut tree_children {
        for kids in per_metric.iter_mut() {
            kids.sort_unstable();
        }
    }
    two_edges.sort();
    Ok(ClusterHypergraph {
        points,
        metric_ids,
        vertices,
        index,
        ball_membership,
        two_edges,
        tree_parent,
        tree_children,
        diameters,
        hyperedges: Vec::new(),
    })
}

impl ClusterHypergraph {
    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn metric_ids(&self) -> &[String] {
        &self.metric_ids
    }

    pub fn metric_count(&self) -> usize {
        self.metric_ids.len()
    }

    /// Vertices in canonical order: by size, then lexicographically.
    pub fn vertices(&self) -> &[Members] {
        &self.vertices
    }

    pub fn vertex(&self, id: VertexId) -> &Members {
        &self.vertices[id]
    }

    pub fn vertex_id(&self, members: &Members) -> Option<VertexId> {
        self.index.get(members).copied()
    }

    /// Looks a vertex up by its member labels.
    pub fn vertex_by_labels<S: AsRef<str>>(&self, labels: &[S]) -> Option<VertexId> {
        let idx: Option<Vec<usize>> = labels
            .iter()
            .map(|l| self.points.index_of(l.as_ref()))
            .collect();
        self.vertex_id(&Members::new(idx?))
    }

    pub fn ball_membership(&self, v: VertexId) -> MetricSet {
        self.ball_membership[v]
    }

    pub fn two_edges(&self) -> &[TwoEdge] {
        &self.two_edges
    }

    pub fn tree_parent(&self, metric: usize, v: VertexId) -> Option<VertexId> {
        self.tree_parent[metric][v]
    }

    pub fn tree_children(&self, metric: usize, v: VertexId) -> &[VertexId] {
        &self.tree_children[metric][v]
    }

    pub fn diameter(&self, metric: usize, v: VertexId) -> Option<&Rational> {
        self.diameters[metric][v].as_ref()
    }

    pub fn hyperedges(&self) -> &[Hyperedge] {
        &self.hyperedges
    }

    pub fn metric_index(&self, id: &str) -> Result<usize> {
        self.metric_ids
            .iter()
            .position(|m| m == id)
            .ok_or_else(|| Error::UnknownMetric(id.to_string()))
    }

    /// Subfamily from metric ids.
    pub fn subfamily<S: AsRef<str>>(&self, ids: &[S]) -> Result<MetricSet> {
        let mut set = MetricSet::empty();
        for id in ids {
            set.insert(self.metric_index(id.as_ref())?);
        }
        Ok(set)
    }

    fn check_subfamily(&self, subfamily: MetricSet) -> Result<()> {
        if subfamily.is_empty() {
            return Err(Error::Precondition("subfamily must be nonempty".into()));
        }
        if !subfamily.is_subset(MetricSet::all(self.metric_count())) {
            let bad = subfamily.iter().find(|&i| i >= self.metric_count()).unwrap();
            return Err(Error::UnknownMetric(format!("#{bad}")));
        }
        Ok(())
    }

    fn is_r_ball(&self, subfamily: MetricSet, v: VertexId) -> bool {
        subfamily.is_subset(self.ball_membership[v])
    }

    /// Enumerates hyperedges and stores them on the hypergraph.
    pub fn populate_hyperedges(&mut self, options: &HyperedgeOptions) -> Result<()> {
        self.hyperedges = enumerate_hyperedges(self, options)?;
        Ok(())
    }

    /// Display form of a vertex such as `{A,B}`.
    pub fn display_vertex(&self, v: VertexId) -> String {
        self.vertices[v].display(&self.points)
    }
}

impl fmt::Display for ClusterHypergraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "hypergraph over {} points, metrics {:?}", self.points.len(), self.metric_ids)?;
        for e in &self.two_edges {
            writeln!(
                f,
                "  {} -> {} [{}]",
                self.display_vertex(e.child),
                self.display_vertex(e.parent),
                self.metric_ids[e.metric]
            )?;
        }
        for e in &self.hyperedges {
            let members: Vec<String> = e.members.iter().map(|&v| self.display_vertex(v)).collect();
            writeln!(f, "  edge {} (A={}, B={})", members.join(" "), e.a_dimension, e.b_dimension)?;
        }
        Ok(())
    }
}

/// Vertices that are balls of every metric in `subfamily`.
pub fn r_balls(h: &ClusterHypergraph, subfamily: MetricSet) -> Result<Vec<VertexId>> {
    h.check_subfamily(subfamily)?;
    Ok((0..h.vertices.len())
        .filter(|&v| h.is_r_ball(subfamily, v))
        .collect())
}

/// The unique smallest `r`-ball strictly containing `I`, if any.
pub fn minimal_enclosing_r_ball(
    h: &ClusterHypergraph,
    subfamily: MetricSet,
    lower: VertexId,
) -> Result<Option<VertexId>> {
    h.check_subfamily(subfamily)?;
    if !h.is_r_ball(subfamily, lower) {
        return Err(Error::Precondition(format!(
            "{} is not a ball of every metric in the subfamily",
            h.display_vertex(lower)
        )));
    }
    let inner = &h.vertices[lower];
    let candidates: Vec<VertexId> = (0..h.vertices.len())
        .filter(|&v| h.is_r_ball(subfamily, v) && inner.is_strict_subset(&h.vertices[v]))
        .collect();
    let minimal: Vec<VertexId> = candidates
        .iter()
        .copied()
        .filter(|&v| {
            !candidates
                .iter()
                .any(|&w| h.vertices[w].is_strict_subset(&h.vertices[v]))
        })
        .collect();
    match minimal.as_slice() {
        [] => Ok(None),
        [j] => Ok(Some(*j)),
        _ => Err(Error::Internal(format!(
            "{} has {} incomparable minimal enclosing balls",
            h.display_vertex(lower),
            minimal.len()
        ))),
    }
}

fn hyperedge_members(
    h: &ClusterHypergraph,
    subfamily: MetricSet,
    lower: VertexId,
    upper: VertexId,
) -> Vec<VertexId> {
    let (i, j) = (&h.vertices[lower], &h.vertices[upper]);
    (0..h.vertices.len())
        .filter(|&k| {
            h.ball_membership[k].intersects(subfamily)
                && i.is_subset(&h.vertices[k])
                && h.vertices[k].is_subset(j)
        })
        .collect()
}

/// The hyperedge generated by `subfamily` at the `r`-ball `lower`.
pub fn hyperedge(
    h: &ClusterHypergraph,
    subfamily: MetricSet,
    lower: VertexId,
    lower_bound: LowerBound,
) -> Result<Hyperedge> {
    let upper = minimal_enclosing_r_ball(h, subfamily, lower)?.ok_or_else(|| {
        Error::Precondition(format!("{} is maximal", h.display_vertex(lower)))
    })?;
    let mut e = Hyperedge {
        subfamily,
        provenance: vec![subfamily],
        min_ball: lower,
        max_ball: upper,
        members: hyperedge_members(h, subfamily, lower, upper),
        a_dimension: 0,
        b_dimension: 0,
    };
    e.a_dimension = a_dimension(h, &e);
    e.b_dimension = b_dimension(h, &e, lower_bound);
    Ok(e)
}

/// Every hyperedge over every nonempty subfamily, deduplicated on
/// `(I, J, members)` and sorted by `(|members|, I, J)`.
pub fn enumerate_hyperedges(
    h: &ClusterHypergraph,
    options: &HyperedgeOptions,
) -> Result<Vec<Hyperedge>> {
    let k = h.metric_count();
    let count = (1u128 << k) - 1;
    if count > options.max_subfamilies as u128 {
        return Err(Error::CapExceeded {
            what: "subfamily count",
            actual: count,
            cap: options.max_subfamilies as u128,
        });
    }
    let subfamilies: Vec<MetricSet> = (1..=count as u64).map(MetricSet::from_bits).collect();
    let found = exec::map_slice(options.execution, &subfamilies, |&sub| {
        let mut out = Vec::new();
        for lower in 0..h.vertices.len() {
            if !h.is_r_ball(sub, lower) {
                continue;
            }
            let upper = minimal_enclosing_r_ball(h, sub, lower)?;
            if let Some(upper) = upper {
                out.push((lower, upper, hyperedge_members(h, sub, lower, upper)));
            }
        }
        Ok::<_, Error>((sub, out))
    });

    let mut merged: BTreeMap<(VertexId, VertexId, Vec<VertexId>), Vec<MetricSet>> = BTreeMap::new();
    for result in found {
        let (sub, edges) = result?;
        for key in edges {
            merged.entry(key).or_default().push(sub);
        }
    }
    let mut edges: Vec<Hyperedge> = merged
        .into_iter()
        .map(|((lower, upper, members), mut provenance)| {
            provenance.sort();
            let subfamily = provenance
                .iter()
                .fold(MetricSet::empty(), |acc, &s| acc.union(s));
            let mut e = Hyperedge {
                subfamily,
                provenance,
                min_ball: lower,
                max_ball: upper,
                members,
                a_dimension: 0,
                b_dimension: 0,
            };
            e.a_dimension = a_dimension(h, &e);
            e.b_dimension = b_dimension(h, &e, options.lower_bound);
            e
        })
        .collect();
    edges.sort_by(|a, b| {
        a.members
            .len()
            .cmp(&b.members.len())
            .then_with(|| h.vertices[a.min_ball].cmp(&h.vertices[b.min_ball]))
            .then_with(|| h.vertices[a.max_ball].cmp(&h.vertices[b.max_ball]))
            .then_with(|| a.members.cmp(&b.members))
    });
    Ok(edges)
}

/// Longest strictly increasing chain from `I` to `J` inside the member poset.
pub fn a_dimension(h: &ClusterHypergraph, e: &Hyperedge) -> usize {
    // Vertex ids are in size order, so every strict subset precedes its
    // supersets in `members`.
    let sets: Vec<&Members> = e.members.iter().map(|&v| &h.vertices[v]).collect();
    let mut longest: Vec<Option<usize>> = vec![None; sets.len()];
    for x in 0..sets.len() {
        if e.members[x] == e.min_ball {
            longest[x] = Some(0);
            continue;
        }
        longest[x] = (0..x)
            .filter(|&y| sets[y].is_strict_subset(sets[x]))
            .filter_map(|y| longest[y].map(|l| l + 1))
            .max();
    }
    let top = e.members.iter().position(|&v| v == e.max_ball).unwrap();
    longest[top].unwrap_or(0)
}

/// Number of distinct maximal proper subballs of `J`, over the metrics of the
/// subfamily, that contain `I`.
pub fn b_dimension(h: &ClusterHypergraph, e: &Hyperedge, lower_bound: LowerBound) -> usize {
    let inner = &h.vertices[e.min_ball];
    let mut found: Vec<VertexId> = e
        .subfamily
        .iter()
        .flat_map(|r| h.tree_children[r][e.max_ball].iter().copied())
        .filter(|&k| match lower_bound {
            LowerBound::Inclusive => inner.is_subset(&h.vertices[k]),
            LowerBound::Strict => inner.is_strict_subset(&h.vertices[k]),
        })
        .collect();
    found.sort_unstable();
    found.dedup();
    found.len()
}

/// Outcome of [`is_compatible`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Compatibility {
    pub compatible: bool,
    /// Two vertices whose nonempty intersection is not a vertex.
    pub witness: Option<(VertexId, VertexId, Members)>,
}

/// Whether every nonempty pairwise intersection of vertices is a vertex.
pub fn is_compatible(h: &ClusterHypergraph) -> Compatibility {
    for a in 0..h.vertices.len() {
        for b in a + 1..h.vertices.len() {
            let meet = h.vertices[a].intersection(&h.vertices[b]);
            if !meet.is_empty() && !h.index.contains_key(&meet) {
                return Compatibility {
                    compatible: false,
                    witness: Some((a, b, meet)),
                };
            }
        }
    }
    Compatibility {
        compatible: true,
        witness: None,
    }
}

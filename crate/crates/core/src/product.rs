//! Abstract hypergraphs, their direct product, and isomorphism checks.
//!
//! The product of `(Γ₁, E₁)` and `(Γ₂, E₂)` has vertex set `Γ₁ × Γ₂` and edge
//! set `Γ₁ × E₂ ∪ E₁ × Γ₂ ∪ E₁ × E₂`, where a vertex times an edge is the edge
//! copied at that vertex and an edge times an edge is the set of all pairwise
//! products. Directed two-edges are carried along the same way.

use std::collections::{BTreeSet, HashMap};

use crate::dendrogram::{ClusterTree, Members};
use crate::error::{Error, Result};
use crate::hypergraph::ClusterHypergraph;

/// A hypergraph with named vertices, directed two-edges and hyperedges given
/// as sorted vertex lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbstractHypergraph {
    pub vertices: Vec<String>,
    pub two_edges: BTreeSet<(usize, usize)>,
    pub edges: BTreeSet<Vec<usize>>,
}

impl AbstractHypergraph {
    pub fn new(
        vertices: Vec<String>,
        two_edges: impl IntoIterator<Item = (usize, usize)>,
        edges: impl IntoIterator<Item = Vec<usize>>,
    ) -> Result<Self> {
        let n = vertices.len();
        let two_edges: BTreeSet<(usize, usize)> = two_edges.into_iter().collect();
        let mut sorted_edges = BTreeSet::new();
        for mut e in edges {
            e.sort_unstable();
            e.dedup();
            if e.is_empty() || e.iter().any(|&v| v >= n) {
                return Err(Error::Precondition("hyperedge refers to an unknown vertex".into()));
            }
            sorted_edges.insert(e);
        }
        if two_edges.iter().any(|&(a, b)| a >= n || b >= n || a == b) {
            return Err(Error::Precondition("two-edge refers to an unknown vertex".into()));
        }
        Ok(AbstractHypergraph {
            vertices,
            two_edges,
            edges: sorted_edges,
        })
    }

    /// One vertex, no edges: the identity of the product.
    pub fn single_vertex(name: impl Into<String>) -> Self {
        AbstractHypergraph {
            vertices: vec![name.into()],
            two_edges: BTreeSet::new(),
            edges: BTreeSet::new(),
        }
    }

    /// A cluster tree as a graph: cover edges are both the two-edges and the
    /// (two-member) hyperedges.
    pub fn from_tree(tree: &ClusterTree) -> Self {
        let vertices = tree
            .clusters()
            .iter()
            .map(|c| c.members.display(tree.points()))
            .collect();
        let two_edges: BTreeSet<(usize, usize)> = tree.cover_edges().into_iter().collect();
        let edges = two_edges.iter().map(|&(c, p)| vec![c, p]).collect();
        AbstractHypergraph {
            vertices,
            two_edges,
            edges,
        }
    }

    /// Forgets metric labels on two-edges; hyperedges are the stored ones.
    pub fn from_cluster_hypergraph(h: &ClusterHypergraph) -> Self {
        let vertices = (0..h.vertices().len()).map(|v| h.display_vertex(v)).collect();
        let two_edges = h.two_edges().iter().map(|e| (e.child, e.parent)).collect();
        let edges = h.hyperedges().iter().map(|e| e.members.clone()).collect();
        AbstractHypergraph {
            vertices,
            two_edges,
            edges,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex_index(&self, name: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v == name)
    }
}

/// Direct product; vertex `(a, b)` gets index `a * |Γ₂| + b` and name `a×b`.
pub fn hypergraph_product(left: &AbstractHypergraph, right: &AbstractHypergraph) -> AbstractHypergraph {
    let width = right.vertex_count();
    let id = |a: usize, b: usize| a * width + b;
    let mut vertices = Vec::with_capacity(left.vertex_count() * width);
    for a in &left.vertices {
        for b in &right.vertices {
            vertices.push(format!("{a}×{b}"));
        }
    }
    let mut two_edges = BTreeSet::new();
    for a in 0..left.vertex_count() {
        for &(c, p) in &right.two_edges {
            two_edges.insert((id(a, c), id(a, p)));
        }
    }
    for &(c, p) in &left.two_edges {
        for b in 0..width {
            two_edges.insert((id(c, b), id(p, b)));
        }
    }
    let mut edges = BTreeSet::new();
    for a in 0..left.vertex_count() {
        for e in &right.edges {
            edges.insert(sorted(e.iter().map(|&k| id(a, k))));
        }
    }
    for e in &left.edges {
        for b in 0..width {
            edges.insert(sorted(e.iter().map(|&k| id(k, b))));
        }
    }
    for e1 in &left.edges {
        for e2 in &right.edges {
            edges.insert(sorted(
                e1.iter().flat_map(|&k1| e2.iter().map(move |&k2| id(k1, k2))),
            ));
        }
    }
    AbstractHypergraph {
        vertices,
        two_edges,
        edges,
    }
}

fn sorted(it: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut v: Vec<usize> = it.collect();
    v.sort_unstable();
    v
}

/// True iff `map` (a bijection, `map[v₁] = v₂`) carries the vertices,
/// two-edges and hyperedges of `g1` exactly onto those of `g2`.
pub fn hypergraph_isomorphic(
    g1: &AbstractHypergraph,
    g2: &AbstractHypergraph,
    map: &[usize],
) -> Result<bool> {
    let n = g1.vertex_count();
    if map.len() != n {
        return Err(Error::Precondition(format!(
            "vertex map has {} entries for {} vertices",
            map.len(),
            n
        )));
    }
    let mut seen = vec![false; g2.vertex_count()];
    for &t in map {
        if t >= seen.len() || std::mem::replace(&mut seen[t], true) {
            return Err(Error::Precondition("vertex map is not injective".into()));
        }
    }
    if n != g2.vertex_count() {
        // An injective map between sets of different sizes is not a bijection.
        return Err(Error::Precondition("vertex map is not surjective".into()));
    }
    let two: BTreeSet<(usize, usize)> = g1.two_edges.iter().map(|&(a, b)| (map[a], map[b])).collect();
    if two != g2.two_edges {
        return Ok(false);
    }
    let edges: BTreeSet<Vec<usize>> = g1
        .edges
        .iter()
        .map(|e| sorted(e.iter().map(|&v| map[v])))
        .collect();
    Ok(edges == g2.edges)
}

/// Per-vertex invariants preserved by any isomorphism.
fn signature(g: &AbstractHypergraph, v: usize) -> (usize, usize, Vec<usize>) {
    let out = g.two_edges.iter().filter(|e| e.0 == v).count();
    let inc = g.two_edges.iter().filter(|e| e.1 == v).count();
    let mut sizes: Vec<usize> = g
        .edges
        .iter()
        .filter(|e| e.binary_search(&v).is_ok())
        .map(Vec::len)
        .collect();
    sizes.sort_unstable();
    (out, inc, sizes)
}

/// Backtracking search for an isomorphism, for graphs of at most
/// `max_vertices` vertices.
pub fn find_isomorphism(
    g1: &AbstractHypergraph,
    g2: &AbstractHypergraph,
    max_vertices: usize,
) -> Result<Option<Vec<usize>>> {
    let n = g1.vertex_count();
    if n > max_vertices {
        return Err(Error::CapExceeded {
            what: "vertex count for isomorphism search",
            actual: n as u128,
            cap: max_vertices as u128,
        });
    }
    if n != g2.vertex_count()
        || g1.two_edges.len() != g2.two_edges.len()
        || g1.edges.len() != g2.edges.len()
    {
        return Ok(None);
    }
    let sig1: Vec<_> = (0..n).map(|v| signature(g1, v)).collect();
    let sig2: Vec<_> = (0..n).map(|v| signature(g2, v)).collect();

    struct Search<'a> {
        g1: &'a AbstractHypergraph,
        g2: &'a AbstractHypergraph,
        sig1: &'a [(usize, usize, Vec<usize>)],
        sig2: &'a [(usize, usize, Vec<usize>)],
        map: Vec<Option<usize>>,
        used: Vec<bool>,
    }

    impl Search<'_> {
        fn consistent(&self, v: usize, t: usize) -> bool {
            self.g1.two_edges.iter().all(|&(a, b)| {
                let (ma, mb) = (
                    if a == v { Some(t) } else { self.map[a] },
                    if b == v { Some(t) } else { self.map[b] },
                );
                match (ma, mb) {
                    (Some(x), Some(y)) if a == v || b == v => self.g2.two_edges.contains(&(x, y)),
                    _ => true,
                }
            })
        }

        fn run(&mut self, v: usize) -> bool {
            if v == self.map.len() {
                let map: Vec<usize> = self.map.iter().map(|m| m.unwrap()).collect();
                return hypergraph_isomorphic(self.g1, self.g2, &map).unwrap_or(false);
            }
            for t in 0..self.used.len() {
                if self.used[t] || self.sig1[v] != self.sig2[t] || !self.consistent(v, t) {
                    continue;
                }
                self.map[v] = Some(t);
                self.used[t] = true;
                if self.run(v + 1) {
                    return true;
                }
                self.map[v] = None;
                self.used[t] = false;
            }
            false
        }
    }

    let mut search = Search {
        g1,
        g2,
        sig1: &sig1,
        sig2: &sig2,
        map: vec![None; n],
        used: vec![false; n],
    };
    Ok(search
        .run(0)
        .then(|| search.map.iter().map(|m| m.unwrap()).collect()))
}

/// Vertex map from a cluster hypergraph onto the product of two cluster
/// trees, induced by a map from its points to pairs of factor points.
///
/// A vertex with point set `S` goes to the product vertex `(S₁, S₂)` with
/// `S₁ × S₂` equal to the image of `S`.
pub fn product_vertex_map(
    h: &ClusterHypergraph,
    left: &ClusterTree,
    right: &ClusterTree,
    point_map: &HashMap<String, (String, String)>,
) -> Result<Vec<usize>> {
    let width = right.len();
    let mut out = Vec::with_capacity(h.vertices().len());
    for v in h.vertices() {
        let mut image = BTreeSet::new();
        for p in v.iter() {
            let label = h.points().label(p);
            let (a, b) = point_map
                .get(label)
                .ok_or_else(|| Error::Precondition(format!("point {label:?} is not mapped")))?;
            let a = left
                .points()
                .index_of(a)
                .ok_or_else(|| Error::Precondition(format!("unknown left point {a:?}")))?;
            let b = right
                .points()
                .index_of(b)
                .ok_or_else(|| Error::Precondition(format!("unknown right point {b:?}")))?;
            image.insert((a, b));
        }
        let first: Members = Members::new(image.iter().map(|&(a, _)| a));
        let second: Members = Members::new(image.iter().map(|&(_, b)| b));
        if first.len() * second.len() != image.len() {
            return Err(Error::Precondition(format!(
                "{} is not a product set",
                v.display(h.points())
            )));
        }
        let (Some(a), Some(b)) = (left.find(&first), right.find(&second)) else {
            return Err(Error::Precondition(format!(
                "{} has no product vertex",
                v.display(h.points())
            )));
        };
        out.push(a * width + b);
    }
    Ok(out)
}

//! Per-metric cluster trees and the tree/ultrametric duality.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::metric::{minimum_spanning_tree, MetricMatrix, PointSet, UltrametricMatrix};
use crate::rational::{format_rational, is_negative, Rational};

/// A set of point indices, kept sorted and duplicate free.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Members(Vec<u32>);

impl Members {
    pub fn new(indices: impl IntoIterator<Item = usize>) -> Self {
        let mut v: Vec<u32> = indices.into_iter().map(|i| i as u32).collect();
        v.sort_unstable();
        v.dedup();
        Members(v)
    }

    pub fn singleton(index: usize) -> Self {
        Members(vec![index as u32])
    }

    pub fn full(n: usize) -> Self {
        Members((0..n as u32).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().map(|&i| i as usize)
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.binary_search(&(index as u32)).is_ok()
    }

    pub fn is_subset(&self, other: &Members) -> bool {
        if self.len() > other.len() {
            return false;
        }
        let mut it = other.0.iter();
        'outer: for x in &self.0 {
            for y in it.by_ref() {
                match y.cmp(x) {
                    Ordering::Less => continue,
                    Ordering::Equal => continue 'outer,
                    Ordering::Greater => return false,
                }
            }
            return false;
        }
        true
    }

    pub fn is_strict_subset(&self, other: &Members) -> bool {
        self.len() < other.len() && self.is_subset(other)
    }

    pub fn intersection(&self, other: &Members) -> Members {
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                Ordering::Less => i += 1,
                Ordering::Greater => j += 1,
                Ordering::Equal => {
                    out.push(self.0[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        Members(out)
    }

    pub fn union(&self, other: &Members) -> Members {
        Members::new(self.iter().chain(other.iter()))
    }

    /// Member labels sorted lexicographically.
    pub fn labels<'a>(&self, points: &'a PointSet) -> Vec<&'a str> {
        let mut out: Vec<&str> = self.iter().map(|i| points.label(i)).collect();
        out.sort_unstable();
        out
    }

    /// Compact display such as `{A,B}`.
    pub fn display(&self, points: &PointSet) -> String {
        format!("{{{}}}", self.labels(points).join(","))
    }
}

/// Smaller sets first, then lexicographic on indices.
pub fn size_order(a: &Members, b: &Members) -> Ordering {
    a.len().cmp(&b.len()).then_with(|| a.cmp(b))
}

/// A ball of one ultrametric. Identity is the member set alone.
#[derive(Debug, Clone)]
pub struct Cluster {
    pub members: Members,
    pub diameter: Rational,
}

impl PartialEq for Cluster {
    fn eq(&self, other: &Self) -> bool {
        self.members == other.members
    }
}

impl Eq for Cluster {}

/// The partially ordered tree of all balls of one ultrametric.
#[derive(Debug, Clone)]
pub struct ClusterTree {
    metric_id: String,
    points: PointSet,
    clusters: Vec<Cluster>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    root: usize,
    leaf_of: Vec<usize>,
}

impl PartialEq for ClusterTree {
    fn eq(&self, other: &Self) -> bool {
        self.metric_id == other.metric_id
            && self.points == other.points
            && self.clusters.len() == other.clusters.len()
            && self
                .clusters
                .iter()
                .zip(&other.clusters)
                .all(|(a, b)| a.members == b.members && a.diameter == b.diameter)
            && self.parent == other.parent
    }
}

impl Eq for ClusterTree {}

struct Components {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl Components {
    fn new(n: usize) -> Self {
        Components {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> usize {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return a;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
        a
    }
}

/// Builds the tree of all distinct balls of `u`.
///
/// Balls at threshold `t` are the components of the spanning-tree edges of
/// rank `<= t`. Merges are processed one level at a time; each component that
/// changes within a level becomes a new cluster whose children are the
/// components it absorbed.
pub fn build_cluster_tree(u: &UltrametricMatrix) -> ClusterTree {
    let m: &MetricMatrix = u;
    let n = m.n();
    let mut edges = minimum_spanning_tree(m);
    edges.sort_by_key(|&(_, _, r)| r);

    let mut clusters: Vec<Cluster> = (0..n)
        .map(|i| Cluster {
            members: Members::singleton(i),
            diameter: Rational::zero(),
        })
        .collect();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    // Cluster currently represented by each component root, and its points.
    let mut current: Vec<usize> = (0..n).collect();
    let mut points_of: Vec<Vec<u32>> = (0..n as u32).map(|i| vec![i]).collect();
    let mut dsu = Components::new(n);

    let mut start = 0;
    while start < edges.len() {
        let rank = edges[start].2;
        let end = start + edges[start..].iter().take_while(|e| e.2 == rank).count();
        let mut absorbed: HashMap<usize, Vec<usize>> = HashMap::new();
        let mut touched_points: HashMap<usize, Vec<u32>> = HashMap::new();
        let mut roots_before = Vec::new();
        for &(a, b, _) in &edges[start..end] {
            roots_before.push(dsu.find(a));
            roots_before.push(dsu.find(b));
        }
        roots_before.sort_unstable();
        roots_before.dedup();
        let before: Vec<(usize, usize, Vec<u32>)> = roots_before
            .iter()
            .map(|&r| (r, current[r], std::mem::take(&mut points_of[r])))
            .collect();
        for &(a, b, _) in &edges[start..end] {
            dsu.union(a, b);
        }
        for (old_root, cluster, pts) in before {
            let new_root = dsu.find(old_root);
            absorbed.entry(new_root).or_default().push(cluster);
            touched_points.entry(new_root).or_default().extend(pts);
        }
        let mut new_roots: Vec<usize> = absorbed.keys().copied().collect();
        new_roots.sort_unstable();
        for root in new_roots {
            let kids = absorbed.remove(&root).unwrap();
            let pts = touched_points.remove(&root).unwrap();
            let id = clusters.len();
            clusters.push(Cluster {
                members: Members::new(pts.iter().map(|&p| p as usize)),
                diameter: m.levels()[rank as usize].clone(),
            });
            children.push(kids);
            current[root] = id;
            points_of[root] = pts;
        }
        start = end;
    }

    let mut parent = vec![None; clusters.len()];
    for (id, kids) in children.iter().enumerate() {
        for &k in kids {
            parent[k] = Some(id);
        }
    }
    ClusterTree::assemble(m.metric_id().to_string(), m.points().clone(), clusters, parent)
}

impl ClusterTree {
    /// Sorts clusters into canonical order and derives the child lists.
    fn assemble(
        metric_id: String,
        points: PointSet,
        clusters: Vec<Cluster>,
        parent: Vec<Option<usize>>,
    ) -> ClusterTree {
        let mut order: Vec<usize> = (0..clusters.len()).collect();
        order.sort_by(|&a, &b| size_order(&clusters[a].members, &clusters[b].members));
        let mut position = vec![0; clusters.len()];
        for (new, &old) in order.iter().enumerate() {
            position[old] = new;
        }
        let parent: Vec<Option<usize>> = order
            .iter()
            .map(|&old| parent[old].map(|p| position[p]))
            .collect();
        let clusters: Vec<Cluster> = order.iter().map(|&old| clusters[old].clone()).collect();
        let mut children = vec![Vec::new(); clusters.len()];
        for (c, p) in parent.iter().enumerate() {
            if let Some(p) = p {
                children[*p].push(c);
            }
        }
        let root = clusters.len() - 1;
        let mut leaf_of = vec![usize::MAX; points.len()];
        for (id, c) in clusters.iter().enumerate() {
            if c.members.len() == 1 {
                leaf_of[c.members.iter().next().unwrap()] = id;
            }
        }
        ClusterTree {
            metric_id,
            points,
            clusters,
            parent,
            children,
            root,
            leaf_of,
        }
    }

    /// Rebuilds a tree from its cluster family, checking that it is laminar,
    /// contains every singleton and the full set, and has strictly increasing
    /// diameters along inclusion.
    pub fn from_clusters(
        metric_id: impl Into<String>,
        points: PointSet,
        clusters: Vec<Cluster>,
    ) -> Result<ClusterTree> {
        let n = points.len();
        let mut clusters = clusters;
        clusters.sort_by(|a, b| size_order(&a.members, &b.members));
        if clusters.windows(2).any(|w| w[0].members == w[1].members) {
            return Err(Error::Precondition("duplicate cluster".into()));
        }
        for c in &clusters {
            if c.members.is_empty() || c.members.iter().any(|i| i >= n) {
                return Err(Error::Precondition("cluster members out of range".into()));
            }
            if (c.members.len() == 1) != c.diameter.is_zero() || is_negative(&c.diameter) {
                return Err(Error::Precondition(format!(
                    "cluster {} has diameter {}",
                    c.members.display(&points),
                    format_rational(&c.diameter)
                )));
            }
        }
        for i in 0..n {
            if clusters.binary_search_by(|c| size_order(&c.members, &Members::singleton(i))).is_err() {
                return Err(Error::Precondition(format!(
                    "point {:?} has no singleton cluster",
                    points.label(i)
                )));
            }
        }
        if clusters.last().map(|c| c.members.len()) != Some(n) {
            return Err(Error::Precondition("the full point set is not a cluster".into()));
        }
        let mut parent = vec![None; clusters.len()];
        for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                let (a, b) = (&clusters[i].members, &clusters[j].members);
                let meet = a.intersection(b);
                if meet.is_empty() {
                    continue;
                }
                if meet != *a {
                    return Err(Error::Precondition(format!(
                        "clusters {} and {} overlap without nesting",
                        a.display(&points),
                        b.display(&points)
                    )));
                }
                if parent[i].is_none() {
                    parent[i] = Some(j);
                }
            }
        }
        for (c, p) in parent.iter().enumerate() {
            if let Some(p) = *p {
                if clusters[c].members.len() > 1 && clusters[c].diameter >= clusters[p].diameter {
                    return Err(Error::Precondition(format!(
                        "diameter does not increase from {} to {}",
                        clusters[c].members.display(&points),
                        clusters[p].members.display(&points)
                    )));
                }
            }
        }
        Ok(ClusterTree::assemble(metric_id.into(), points, clusters, parent))
    }

    pub fn metric_id(&self) -> &str {
        &self.metric_id
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    /// Clusters in canonical order: by size, then lexicographically.
    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent(&self, cluster: usize) -> Option<usize> {
        self.parent[cluster]
    }

    pub fn children(&self, cluster: usize) -> &[usize] {
        &self.children[cluster]
    }

    /// `(child, parent)` pairs nested without intermediates.
    pub fn cover_edges(&self) -> Vec<(usize, usize)> {
        self.parent
            .iter()
            .enumerate()
            .filter_map(|(c, p)| p.map(|p| (c, p)))
            .collect()
    }

    pub fn find(&self, members: &Members) -> Option<usize> {
        self.clusters
            .binary_search_by(|c| size_order(&c.members, members))
            .ok()
    }

    pub fn leaf(&self, point: usize) -> usize {
        self.leaf_of[point]
    }

    /// The minimal cluster containing both points.
    pub fn sup(&self, a: usize, b: usize) -> usize {
        let mut x = self.leaf(a);
        while !self.clusters[x].members.contains(b) {
            x = self.parent[x].expect("root contains every point");
        }
        x
    }

    pub fn member_sets(&self) -> Vec<Members> {
        self.clusters.iter().map(|c| c.members.clone()).collect()
    }
}

impl fmt::Display for ClusterTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "tree {}", self.metric_id)?;
        for (c, p) in self.cover_edges() {
            writeln!(
                f,
                "  {} -> {}",
                self.clusters[c].members.display(&self.points),
                self.clusters[p].members.display(&self.points)
            )?;
        }
        Ok(())
    }
}

/// `{j : u(center, j) <= radius}`.
pub fn ball(u: &UltrametricMatrix, center: usize, radius: &Rational) -> Result<Members> {
    u.points().check_index(center)?;
    if is_negative(radius) {
        return Err(Error::Precondition("radius must be nonnegative".into()));
    }
    Ok(Members::new(
        (0..u.n()).filter(|&j| u.value(center, j) <= radius),
    ))
}

/// The ultrametric `d(a, b) = F(sup(a, b))` of a cluster tree.
///
/// `F` must be positive on non-singleton clusters and strictly increasing
/// from each non-singleton child to its parent; values on singletons are
/// ignored.
pub fn tree_to_ultrametric<F>(tree: &ClusterTree, f: F) -> Result<UltrametricMatrix>
where
    F: Fn(&Cluster) -> Rational,
{
    let values: Vec<Rational> = tree.clusters.iter().map(&f).collect();
    for (c, p) in tree.cover_edges() {
        let child = &tree.clusters[c];
        let ok = if child.members.len() == 1 {
            values[p] > Rational::zero()
        } else {
            values[c] > Rational::zero() && values[c] < values[p]
        };
        if !ok {
            return Err(Error::Precondition(format!(
                "F is not increasing on edge {} -> {}",
                child.members.display(&tree.points),
                tree.clusters[p].members.display(&tree.points)
            )));
        }
    }
    let mut levels: Vec<Rational> = tree
        .clusters
        .iter()
        .zip(&values)
        .filter(|(c, _)| c.members.len() > 1)
        .map(|(_, v)| v.clone())
        .collect();
    levels.sort();
    levels.dedup();
    let n = tree.points.len();
    let mut ranks = vec![u32::MAX; n * n.saturating_sub(1) / 2];
    for (id, cluster) in tree.clusters.iter().enumerate() {
        let kids = &tree.children[id];
        if kids.len() < 2 {
            continue;
        }
        let rank = levels.binary_search(&values[id]).unwrap() as u32;
        for (x, &ka) in kids.iter().enumerate() {
            for &kb in &kids[x + 1..] {
                for a in tree.clusters[ka].members.iter() {
                    for b in tree.clusters[kb].members.iter() {
                        let (i, j) = if a < b { (a, b) } else { (b, a) };
                        ranks[crate::metric::condensed_index(n, i, j)] = rank;
                    }
                }
            }
        }
        debug_assert!(cluster.members.len() > 1);
    }
    let m = MetricMatrix::from_ranks(tree.points.clone(), tree.metric_id.clone(), levels, ranks)?;
    Ok(UltrametricMatrix::from_trusted(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{chain_distance_matrix, DissimilarityTable};
    use crate::rational::int;

    fn ultra(labels: &[&str], rows: &[&[i64]]) -> UltrametricMatrix {
        let points = PointSet::new(labels.iter().copied()).unwrap();
        let rows = rows
            .iter()
            .map(|r| r.iter().map(|&v| int(v)).collect())
            .collect();
        UltrametricMatrix::new(DissimilarityTable::new(points, "u", rows).into_metric().unwrap()).unwrap()
    }

    fn sets(t: &ClusterTree) -> Vec<String> {
        t.clusters()
            .iter()
            .map(|c| c.members.labels(t.points()).concat())
            .collect()
    }

    #[test]
    fn single_point_tree() {
        let points = PointSet::new(["x"]).unwrap();
        let m = DissimilarityTable::new(points, "u", vec![vec![int(0)]])
            .into_metric()
            .unwrap();
        let t = build_cluster_tree(&UltrametricMatrix::new(m).unwrap());
        assert_eq!(t.len(), 1);
        assert!(t.cover_edges().is_empty());
        assert_eq!(t.root(), 0);
    }

    #[test]
    fn uniform_metric_gives_star() {
        let u = ultra(&["a", "b", "c"], &[&[0, 2, 2], &[2, 0, 2], &[2, 2, 0]]);
        let t = build_cluster_tree(&u);
        assert_eq!(sets(&t), ["a", "b", "c", "abc"]);
        assert_eq!(t.children(t.root()).len(), 3);
    }

    #[test]
    fn nested_levels() {
        // ab at 1, abc at 2, abcd at 3.
        let u = ultra(
            &["a", "b", "c", "d"],
            &[&[0, 1, 2, 3], &[1, 0, 2, 3], &[2, 2, 0, 3], &[3, 3, 3, 0]],
        );
        let t = build_cluster_tree(&u);
        assert_eq!(sets(&t), ["a", "b", "c", "d", "ab", "abc", "abcd"]);
        let ab = t.find(&Members::new([0, 1])).unwrap();
        assert_eq!(t.clusters()[ab].diameter, int(1));
        assert_eq!(t.sup(0, 2), t.find(&Members::new([0, 1, 2])).unwrap());
        assert_eq!(t.sup(3, 3), t.leaf(3));
    }

    #[test]
    fn ball_queries() {
        let u = ultra(&["a", "b", "c"], &[&[0, 1, 4], &[1, 0, 4], &[4, 4, 0]]);
        assert_eq!(ball(&u, 0, &int(0)).unwrap(), Members::singleton(0));
        assert_eq!(ball(&u, 0, &int(1)).unwrap(), Members::new([0, 1]));
        assert_eq!(ball(&u, 2, &int(9)).unwrap(), Members::full(3));
        assert!(ball(&u, 5, &int(1)).is_err());
    }

    #[test]
    fn duality_rejects_flat_f() {
        let u = ultra(
            &["a", "b", "c"],
            &[&[0, 1, 2], &[1, 0, 2], &[2, 2, 0]],
        );
        let t = build_cluster_tree(&u);
        let err = tree_to_ultrametric(&t, |_| int(1)).unwrap_err();
        assert!(err.to_string().contains("{a,b} -> {a,b,c}"), "{err}");
        let back = tree_to_ultrametric(&t, |c| c.diameter.clone()).unwrap();
        assert_eq!(back, u);
    }

    #[test]
    fn star_with_unit_root() {
        let u = ultra(&["a", "b", "c"], &[&[0, 5, 5], &[5, 0, 5], &[5, 5, 0]]);
        let t = build_cluster_tree(&u);
        let flat = tree_to_ultrametric(&t, |_| int(1)).unwrap();
        assert_eq!(flat.levels(), &[int(1)]);
    }

    #[test]
    fn from_clusters_validates() {
        let points = PointSet::new(["a", "b", "c"]).unwrap();
        let c = |m: &[usize], d: i64| Cluster {
            members: Members::new(m.iter().copied()),
            diameter: int(d),
        };
        let good = vec![c(&[0], 0), c(&[1], 0), c(&[2], 0), c(&[0, 1], 1), c(&[0, 1, 2], 2)];
        let t = ClusterTree::from_clusters("m", points.clone(), good).unwrap();
        assert_eq!(t.cover_edges().len(), 4);
        let overlapping = vec![
            c(&[0], 0),
            c(&[1], 0),
            c(&[2], 0),
            c(&[0, 1], 1),
            c(&[1, 2], 1),
            c(&[0, 1, 2], 2),
        ];
        assert!(ClusterTree::from_clusters("m", points.clone(), overlapping).is_err());
        let missing_root = vec![c(&[0], 0), c(&[1], 0), c(&[2], 0), c(&[0, 1], 1)];
        assert!(ClusterTree::from_clusters("m", points, missing_root).is_err());
    }

    #[test]
    fn chain_then_tree() {
        let points = PointSet::new(["a", "b", "c"]).unwrap();
        let m = DissimilarityTable::new(
            points,
            "m",
            vec![
                vec![int(0), int(1), int(5)],
                vec![int(1), int(0), int(1)],
                vec![int(5), int(1), int(0)],
            ],
        )
        .into_metric()
        .unwrap();
        let t = build_cluster_tree(&chain_distance_matrix(&m));
        assert_eq!(sets(&t), ["a", "b", "c", "abc"]);
    }

    #[test]
    fn members_set_ops() {
        let a = Members::new([1, 3, 5]);
        let b = Members::new([0, 1, 2, 3, 5]);
        assert!(a.is_subset(&b) && a.is_strict_subset(&b));
        assert!(!b.is_subset(&a));
        assert!(!Members::new([1, 4]).is_subset(&b));
        assert_eq!(a.intersection(&Members::new([3, 4, 5])), Members::new([3, 5]));
        assert_eq!(a.union(&Members::new([0])), Members::new([0, 1, 3, 5]));
    }
}

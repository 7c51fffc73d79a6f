//! Finite metric input, validation and the chain-distance ultrametric.
//!
//! A [`MetricMatrix`] stores its distinct off-diagonal values once, in
//! ascending order, and every cell as a rank into that table. Rank order is
//! value order, so comparisons on the hot paths are integer comparisons while
//! every value stays an exact [`Rational`].

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::Deref;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::rational::{format_rational, is_negative, Rational};

/// Ordered, labeled finite point set. Labels are distinct and nonempty.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PointSet {
    labels: Vec<String>,
}

impl PointSet {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::Precondition("a point set needs at least one point".into()));
        }
        let mut seen = HashMap::with_capacity(labels.len());
        for (i, label) in labels.iter().enumerate() {
            if label.is_empty() {
                return Err(Error::Precondition(format!("point {i} has an empty label")));
            }
            if let Some(prev) = seen.insert(label.as_str(), i) {
                return Err(Error::Precondition(format!(
                    "duplicate point label {label:?} at positions {prev} and {i}"
                )));
            }
        }
        Ok(PointSet { labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn check_index(&self, index: usize) -> Result<()> {
        if index < self.len() {
            Ok(())
        } else {
            Err(Error::PointIndex {
                index,
                n: self.len(),
            })
        }
    }

    /// Same labels, possibly in a different order.
    pub fn same_members(&self, other: &PointSet) -> bool {
        let mut a = self.labels.clone();
        let mut b = other.labels.clone();
        a.sort();
        b.sort();
        a == b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rule {
    NonzeroDiagonal,
    Asymmetric,
    ZeroOffDiagonal,
    Negative,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::NonzeroDiagonal => "nonzero diagonal",
            Rule::Asymmetric => "asymmetry",
            Rule::ZeroOffDiagonal => "zero off-diagonal distance",
            Rule::Negative => "negative distance",
        })
    }
}

/// One broken matrix invariant, located at `(i, j)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Violation {
    pub rule: Rule,
    pub i: usize,
    pub j: usize,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at ({}, {})", self.rule, self.i, self.j)
    }
}

/// A square table of rationals that has not been validated yet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DissimilarityTable {
    pub points: PointSet,
    pub metric_id: String,
    pub rows: Vec<Vec<Rational>>,
}

impl DissimilarityTable {
    pub fn new(points: PointSet, metric_id: impl Into<String>, rows: Vec<Vec<Rational>>) -> Self {
        DissimilarityTable {
            points,
            metric_id: metric_id.into(),
            rows,
        }
    }

    pub fn validate(&self) -> Result<Vec<Violation>> {
        validate_metric(self)
    }

    /// Validates and converts into a [`MetricMatrix`].
    pub fn into_metric(self) -> Result<MetricMatrix> {
        let violations = self.validate()?;
        if !violations.is_empty() {
            return Err(Error::InvalidMetric {
                metric_id: self.metric_id,
                violations,
            });
        }
        let rows = &self.rows;
        MetricMatrix::from_fn(self.points.clone(), self.metric_id.clone(), |i, j| {
            rows[i][j].clone()
        })
    }
}

/// Checks every [`MetricMatrix`] invariant and reports each violation.
///
/// A table that is not `n × n` for its point set is a structural error
/// rather than a violation. The triangle inequality is not checked here; see
/// [`triangle_violations`].
pub fn validate_metric(table: &DissimilarityTable) -> Result<Vec<Violation>> {
    let n = table.points.len();
    if table.rows.len() != n {
        return Err(Error::Shape(format!(
            "{} rows for {} points in {:?}",
            table.rows.len(),
            n,
            table.metric_id
        )));
    }
    if let Some((i, row)) = table.rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(Error::Shape(format!(
            "row {i} has {} entries, expected {n} in {:?}",
            row.len(),
            table.metric_id
        )));
    }
    let mut out = Vec::new();
    for i in 0..n {
        if !table.rows[i][i].is_zero() {
            out.push(Violation {
                rule: Rule::NonzeroDiagonal,
                i,
                j: i,
            });
        }
        for j in i + 1..n {
            let (a, b) = (&table.rows[i][j], &table.rows[j][i]);
            if a != b {
                out.push(Violation {
                    rule: Rule::Asymmetric,
                    i,
                    j,
                });
            }
            if is_negative(a) || is_negative(b) {
                out.push(Violation {
                    rule: Rule::Negative,
                    i,
                    j,
                });
            } else if a.is_zero() || b.is_zero() {
                out.push(Violation {
                    rule: Rule::ZeroOffDiagonal,
                    i,
                    j,
                });
            }
        }
    }
    Ok(out)
}

#[inline]
pub(crate) fn condensed_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// A validated symmetric, non-degenerate dissimilarity on a [`PointSet`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricMatrix {
    points: PointSet,
    metric_id: String,
    levels: Vec<Rational>,
    ranks: Vec<u32>,
    zero: Rational,
}

impl MetricMatrix {
    /// Builds a matrix from `f(i, j)` evaluated for `i < j`.
    pub fn from_fn<F>(points: PointSet, metric_id: impl Into<String>, f: F) -> Result<Self>
    where
        F: Fn(usize, usize) -> Rational,
    {
        let metric_id = metric_id.into();
        let n = points.len();
        let mut values = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        let mut violations = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                if is_negative(&v) {
                    violations.push(Violation {
                        rule: Rule::Negative,
                        i,
                        j,
                    });
                } else if v.is_zero() {
                    violations.push(Violation {
                        rule: Rule::ZeroOffDiagonal,
                        i,
                        j,
                    });
                }
                values.push(v);
            }
        }
        if !violations.is_empty() {
            return Err(Error::InvalidMetric {
                metric_id,
                violations,
            });
        }
        let mut levels = values.clone();
        levels.sort();
        levels.dedup();
        let lookup: BTreeMap<&Rational, u32> = levels
            .iter()
            .enumerate()
            .map(|(r, v)| (v, r as u32))
            .collect();
        let ranks = values.iter().map(|v| lookup[v]).collect();
        Ok(MetricMatrix {
            points,
            metric_id,
            levels,
            ranks,
            zero: Rational::zero(),
        })
    }

    /// Builds a matrix from an ascending level table and condensed ranks.
    pub(crate) fn from_ranks(
        points: PointSet,
        metric_id: String,
        levels: Vec<Rational>,
        ranks: Vec<u32>,
    ) -> Result<Self> {
        let n = points.len();
        if ranks.len() != n * n.saturating_sub(1) / 2 {
            return Err(Error::Internal("condensed rank table has the wrong length".into()));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) || levels.first().is_some_and(|l| !(l > &Rational::zero())) {
            return Err(Error::Internal("level table must be positive and strictly ascending".into()));
        }
        if ranks.iter().any(|&r| r as usize >= levels.len()) {
            return Err(Error::Internal("rank outside the level table".into()));
        }
        let mut m = MetricMatrix {
            points,
            metric_id,
            levels,
            ranks,
            zero: Rational::zero(),
        };
        m.compact_levels();
        Ok(m)
    }

    /// Drops levels no cell refers to.
    fn compact_levels(&mut self) {
        let mut used = vec![false; self.levels.len()];
        for &r in &self.ranks {
            used[r as usize] = true;
        }
        if used.iter().all(|&u| u) {
            return;
        }
        let mut remap = vec![u32::MAX; self.levels.len()];
        let mut levels = Vec::new();
        for (r, level) in self.levels.iter().enumerate() {
            if used[r] {
                remap[r] = levels.len() as u32;
                levels.push(level.clone());
            }
        }
        for r in &mut self.ranks {
            *r = remap[*r as usize];
        }
        self.levels = levels;
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn metric_id(&self) -> &str {
        &self.metric_id
    }

    pub fn with_metric_id(mut self, metric_id: impl Into<String>) -> Self {
        self.metric_id = metric_id.into();
        self
    }

    /// Distinct off-diagonal values, ascending.
    pub fn levels(&self) -> &[Rational] {
        &self.levels
    }

    /// Rank of `(i, j)` in [`levels`](Self::levels); `None` on the diagonal.
    #[inline]
    pub fn rank(&self, i: usize, j: usize) -> Option<u32> {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Less => Some(self.ranks[condensed_index(self.n(), i, j)]),
            std::cmp::Ordering::Greater => Some(self.ranks[condensed_index(self.n(), j, i)]),
        }
    }

    pub fn value(&self, i: usize, j: usize) -> &Rational {
        match self.rank(i, j) {
            None => &self.zero,
            Some(r) => &self.levels[r as usize],
        }
    }

    pub fn max_value(&self) -> Rational {
        self.levels.last().cloned().unwrap_or_else(Rational::zero)
    }

    pub fn to_rows(&self) -> Vec<Vec<Rational>> {
        let n = self.n();
        (0..n)
            .map(|i| (0..n).map(|j| self.value(i, j).clone()).collect())
            .collect()
    }

    /// The sub-matrix on `indices`, in that order.
    pub fn restrict(&self, indices: &[usize]) -> Result<MetricMatrix> {
        for &i in indices {
            self.points.check_index(i)?;
        }
        let points = PointSet::new(indices.iter().map(|&i| self.points.label(i).to_string()))?;
        MetricMatrix::from_fn(points, self.metric_id.clone(), |a, b| {
            self.value(indices[a], indices[b]).clone()
        })
    }

    /// Reorders rows and columns to follow `target`, which must hold the same labels.
    pub fn reorder_to(&self, target: &PointSet) -> Result<MetricMatrix> {
        if !self.points.same_members(target) {
            return Err(Error::PointSetMismatch(
                self.metric_id.clone(),
                "target point set".into(),
            ));
        }
        let indices: Vec<usize> = target
            .labels()
            .iter()
            .map(|l| self.points.index_of(l).expect("same members"))
            .collect();
        self.restrict(&indices)
    }

    pub(crate) fn ranks_condensed(&self) -> &[u32] {
        &self.ranks
    }
}

/// Triples `(i, j, k)` where `m(i, j) > m(i, k) + m(k, j)`.
///
/// Chain distance does not need the triangle inequality; this is an optional
/// extra check for callers who want a strict metric.
pub fn triangle_violations(m: &MetricMatrix) -> Vec<(usize, usize, usize)> {
    let n = m.n();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in 0..n {
                if k != i && k != j && m.value(i, j) > &(m.value(i, k) + m.value(k, j)) {
                    out.push((i, j, k));
                }
            }
        }
    }
    out
}

/// True iff `a` and `b` are joined by a chain whose steps are all `<= eps`.
///
/// Plain breadth-first reachability on the threshold graph; kept free of any
/// spanning-tree machinery so it can serve as an oracle for
/// [`chain_distance_matrix`].
pub fn epsilon_connected(m: &MetricMatrix, a: usize, b: usize, eps: &Rational) -> Result<bool> {
    m.points().check_index(a)?;
    m.points().check_index(b)?;
    if is_negative(eps) {
        return Err(Error::Precondition("eps must be nonnegative".into()));
    }
    if a == b {
        return Ok(true);
    }
    let n = m.n();
    let mut seen = vec![false; n];
    let mut queue = std::collections::VecDeque::from([a]);
    seen[a] = true;
    while let Some(x) = queue.pop_front() {
        for y in 0..n {
            if !seen[y] && m.value(x, y) <= eps {
                if y == b {
                    return Ok(true);
                }
                seen[y] = true;
                queue.push_back(y);
            }
        }
    }
    Ok(false)
}

/// A [`MetricMatrix`] known to satisfy the strong triangle inequality.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UltrametricMatrix(MetricMatrix);

impl UltrametricMatrix {
    /// Checks ultrametricity in `O(n²)` via the minimax characterisation: a
    /// matrix is an ultrametric iff it equals its own chain distance.
    pub fn new(m: MetricMatrix) -> Result<Self> {
        let chain = chain_distance_ranks(&m, Execution::default());
        if chain.as_slice() == m.ranks_condensed() {
            Ok(UltrametricMatrix(m))
        } else {
            Err(Error::NotUltrametric(m.metric_id().to_string()))
        }
    }

    pub(crate) fn from_trusted(m: MetricMatrix) -> Self {
        debug_assert!(chain_distance_ranks(&m, Execution::Sequential) == m.ranks_condensed());
        UltrametricMatrix(m)
    }

    pub fn into_inner(self) -> MetricMatrix {
        self.0
    }

    pub fn as_metric(&self) -> &MetricMatrix {
        &self.0
    }
}

impl Deref for UltrametricMatrix {
    type Target = MetricMatrix;

    fn deref(&self) -> &MetricMatrix {
        &self.0
    }
}

/// Exhaustive strong-triangle check over all triples.
pub fn is_ultrametric(m: &MetricMatrix) -> bool {
    is_ultrametric_with(m, Execution::default())
}

pub fn is_ultrametric_with(m: &MetricMatrix, exec: Execution) -> bool {
    let n = m.n();
    exec::all_range(exec, n, |i| {
        for j in i + 1..n {
            let ij = m.rank(i, j).unwrap();
            for k in j + 1..n {
                let jk = m.rank(j, k).unwrap();
                let ik = m.rank(i, k).unwrap();
                // The largest side of every triangle must occur at least twice.
                let top = ij.max(jk).max(ik);
                let count = (ij == top) as u8 + (jk == top) as u8 + (ik == top) as u8;
                if count < 2 {
                    return false;
                }
            }
        }
        true
    })
}

/// Minimum spanning tree of the complete graph by Prim's algorithm on ranks.
/// Returns `(parent, rank)` edges for every vertex except the start.
pub(crate) fn minimum_spanning_tree(m: &MetricMatrix) -> Vec<(usize, usize, u32)> {
    let n = m.n();
    let mut in_tree = vec![false; n];
    let mut best = vec![u32::MAX; n];
    let mut via = vec![0usize; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    if n == 0 {
        return edges;
    }
    in_tree[0] = true;
    let mut last = 0;
    for _ in 1..n {
        let mut next = usize::MAX;
        let mut next_rank = u32::MAX;
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            let r = m.rank(last, v).unwrap();
            if r < best[v] {
                best[v] = r;
                via[v] = last;
            }
            if best[v] < next_rank || next == usize::MAX {
                next_rank = best[v];
                next = v;
            }
        }
        in_tree[next] = true;
        edges.push((via[next], next, next_rank));
        last = next;
    }
    edges
}

/// Condensed chain-distance ranks: the largest edge rank on the spanning-tree
/// path between each pair, which is the minimax path weight.
fn chain_distance_ranks(m: &MetricMatrix, exec: Execution) -> Vec<u32> {
    let n = m.n();
    let mut adjacency: Vec<Vec<(usize, u32)>> = vec![Vec::new(); n];
    for (a, b, r) in minimum_spanning_tree(m) {
        adjacency[a].push((b, r));
        adjacency[b].push((a, r));
    }
    let rows = exec::map_range(exec, n, |source| {
        let mut bottleneck = vec![u32::MAX; n];
        bottleneck[source] = 0;
        let mut stack = vec![source];
        let mut seen = vec![false; n];
        seen[source] = true;
        while let Some(x) = stack.pop() {
            for &(y, r) in &adjacency[x] {
                if !seen[y] {
                    seen[y] = true;
                    bottleneck[y] = if x == source { r } else { bottleneck[x].max(r) };
                    stack.push(y);
                }
            }
        }
        bottleneck.split_off(source + 1)
    });
    rows.into_iter().flatten().collect()
}

/// The single-linkage (chain-distance) ultrametric of `m`.
pub fn chain_distance_matrix(m: &MetricMatrix) -> UltrametricMatrix {
    chain_distance_matrix_with(m, Execution::default())
}

pub fn chain_distance_matrix_with(m: &MetricMatrix, exec: Execution) -> UltrametricMatrix {
    let ranks = chain_distance_ranks(m, exec);
    let out = MetricMatrix::from_ranks(
        m.points().clone(),
        m.metric_id().to_string(),
        m.levels().to_vec(),
        ranks,
    )
    .expect("chain distance reuses valid levels");
    UltrametricMatrix(out)
}

impl fmt::Display for MetricMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.n() {
            let row: Vec<String> = (0..self.n())
                .map(|j| format_rational(self.value(i, j)))
                .collect();
            writeln!(f, "{}\t{}", self.points.label(i), row.join("\t"))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn table(rows: &[&[i64]]) -> DissimilarityTable {
        let n = rows.len();
        let points = PointSet::new((0..n).map(|i| format!("p{i}"))).unwrap();
        let rows = rows
            .iter()
            .map(|r| r.iter().map(|&v| int(v)).collect())
            .collect();
        DissimilarityTable::new(points, "m", rows)
    }

    fn metric(rows: &[&[i64]]) -> MetricMatrix {
        table(rows).into_metric().unwrap()
    }

    #[test]
    fn smallest_valid_metric() {
        assert!(table(&[&[0, 1], &[1, 0]]).validate().unwrap().is_empty());
    }

    #[test]
    fn reports_asymmetry() {
        let v = table(&[&[0, 1], &[2, 0]]).validate().unwrap();
        assert_eq!(
            v,
            vec![Violation {
                rule: Rule::Asymmetric,
                i: 0,
                j: 1
            }]
        );
    }

    #[test]
    fn reports_zero_off_diagonal() {
        let v = table(&[&[0, 0], &[0, 0]]).validate().unwrap();
        assert_eq!(
            v,
            vec![Violation {
                rule: Rule::ZeroOffDiagonal,
                i: 0,
                j: 1
            }]
        );
    }

    #[test]
    fn shape_error_is_structural() {
        let mut t = table(&[&[0, 1], &[1, 0]]);
        t.rows[1].pop();
        assert!(matches!(t.validate(), Err(Error::Shape(_))));
        t.rows.pop();
        assert!(matches!(t.validate(), Err(Error::Shape(_))));
    }

    #[test]
    fn duplicate_labels_rejected() {
        assert!(PointSet::new(["a", "b", "a"]).is_err());
        assert!(PointSet::new(Vec::<String>::new()).is_err());
    }

    #[test]
    fn epsilon_chains() {
        let m = metric(&[&[0, 1, 5], &[1, 0, 1], &[5, 1, 0]]);
        assert!(epsilon_connected(&m, 0, 0, &int(0)).unwrap());
        assert!(epsilon_connected(&m, 0, 2, &int(1)).unwrap());
        assert!(!epsilon_connected(&m, 0, 2, &ratio(1, 2)).unwrap());
        assert!(epsilon_connected(&m, 0, 7, &int(1)).is_err());
    }

    #[test]
    fn chain_distance_small_cases() {
        let two = metric(&[&[0, 3], &[3, 0]]);
        assert_eq!(chain_distance_matrix(&two).value(0, 1), &int(3));

        let three = metric(&[&[0, 1, 5], &[1, 0, 1], &[5, 1, 0]]);
        let u = chain_distance_matrix(&three);
        assert_eq!(u.value(0, 2), &int(1));
        assert_eq!(u.levels(), &[int(1)]);
        assert!(is_ultrametric(&u));
    }

    #[test]
    fn ultrametric_checks() {
        assert!(!is_ultrametric(&metric(&[&[0, 1, 5], &[1, 0, 1], &[5, 1, 0]])));
        let ok = metric(&[&[0, 1, 2], &[1, 0, 2], &[2, 2, 0]]);
        assert!(is_ultrametric(&ok));
        assert!(UltrametricMatrix::new(ok).is_ok());
        assert!(UltrametricMatrix::new(metric(&[&[0, 1, 5], &[1, 0, 1], &[5, 1, 0]])).is_err());
    }

    #[test]
    fn restrict_and_reorder() {
        let m = metric(&[&[0, 1, 5], &[1, 0, 2], &[5, 2, 0]]);
        let r = m.restrict(&[2, 0]).unwrap();
        assert_eq!(r.points().labels(), &["p2", "p0"]);
        assert_eq!(r.value(0, 1), &int(5));
        assert_eq!(r.levels(), &[int(5)]);
        let target = PointSet::new(["p2", "p1", "p0"]).unwrap();
        let o = m.reorder_to(&target).unwrap();
        assert_eq!(o.value(0, 1), &int(2));
        assert_eq!(o.value(1, 2), &int(1));
    }

    #[test]
    fn triangle_check_is_optional() {
        let m = metric(&[&[0, 1, 5], &[1, 0, 1], &[5, 1, 0]]);
        assert_eq!(triangle_violations(&m), vec![(0, 2, 1)]);
    }
}

//! Brute-force oracles and random instance generators shared by the
//! integration tests. Nothing here calls into the library's algorithms.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;
use ultraclust::hypergraph::ClusterHypergraph;
use ultraclust::{MetricMatrix, PointSet, Rational};

pub type Set = BTreeSet<usize>;

pub fn r(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

pub fn points(n: usize) -> PointSet {
    PointSet::new((0..n).map(|i| format!("p{i:02}"))).unwrap()
}

pub fn matrix(id: &str, rows: &[Vec<Rational>]) -> MetricMatrix {
    let labels: Vec<String> = (0..rows.len()).map(|i| format!("p{i:02}")).collect();
    let pts = PointSet::new(labels).unwrap();
    MetricMatrix::from_fn(pts, id, |i, j| rows[i][j].clone()).unwrap()
}

pub fn labeled(id: &str, labels: &[&str], rows: &[&[i64]]) -> MetricMatrix {
    let pts = PointSet::new(labels.iter().copied()).unwrap();
    MetricMatrix::from_fn(pts, id, |i, j| Rational::from_integer(rows[i][j].into())).unwrap()
}

/// Symmetric, zero diagonal, positive off-diagonal; few distinct values so
/// ties are common.
pub fn random_dissimilarity<R: Rng>(rng: &mut R, n: usize) -> Vec<Vec<Rational>> {
    let denom = rng.gen_range(1..=3);
    let top = rng.gen_range(2..=6);
    let mut rows = vec![vec![Rational::from_integer(0.into()); n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = r(rng.gen_range(1..=top), denom);
            rows[i][j] = v.clone();
            rows[j][i] = v;
        }
    }
    rows
}

/// Random ultrametric from random agglomeration at strictly increasing heights.
pub fn random_ultrametric<R: Rng>(rng: &mut R, n: usize) -> Vec<Vec<Rational>> {
    let mut rows = vec![vec![Rational::from_integer(0.into()); n]; n];
    let mut groups: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut height = r(0, 1);
    while groups.len() > 1 {
        height += r(rng.gen_range(1..=4), rng.gen_range(1..=3));
        groups.shuffle(rng);
        let take = rng.gen_range(2..=groups.len().min(4));
        let merged: Vec<Vec<usize>> = groups.drain(..take).collect();
        for a in 0..merged.len() {
            for b in a + 1..merged.len() {
                for &x in &merged[a] {
                    for &y in &merged[b] {
                        rows[x][y] = height.clone();
                        rows[y][x] = height.clone();
                    }
                }
            }
        }
        groups.push(merged.concat());
    }
    rows
}

fn connected_within(d: &[Vec<Rational>], a: usize, b: usize, eps: &Rational) -> bool {
    let n = d.len();
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([a]);
    seen[a] = true;
    while let Some(x) = queue.pop_front() {
        if x == b {
            return true;
        }
        for y in 0..n {
            if !seen[y] && d[x][y] <= *eps {
                seen[y] = true;
                queue.push_back(y);
            }
        }
    }
    false
}

/// Smallest `ε` among the matrix values such that an ε-chain joins `a` and `b`.
pub fn epsilon_chain_distance(d: &[Vec<Rational>]) -> Vec<Vec<Rational>> {
    let n = d.len();
    let values: BTreeSet<Rational> = d.iter().flatten().cloned().collect();
    let mut out = vec![vec![Rational::from_integer(0.into()); n]; n];
    for a in 0..n {
        for b in 0..n {
            if a != b {
                out[a][b] = values
                    .iter()
                    .find(|eps| connected_within(d, a, b, eps))
                    .cloned()
                    .unwrap();
            }
        }
    }
    out
}

pub fn is_ultrametric_rows(u: &[Vec<Rational>]) -> bool {
    let n = u.len();
    (0..n).all(|x| {
        (0..n).all(|y| (0..n).all(|z| u[x][z] <= std::cmp::max(&u[x][y], &u[y][z]).clone()))
    })
}

/// Every closed ball `{y : u(x, y) ≤ ρ}` of an ultrametric.
pub fn closed_balls(u: &[Vec<Rational>]) -> BTreeSet<Set> {
    let n = u.len();
    let mut out = BTreeSet::new();
    for x in 0..n {
        for rho in &u[x] {
            out.insert((0..n).filter(|&y| u[x][y] <= *rho).collect());
        }
    }
    out
}

/// Largest distance inside a set.
pub fn diameter(u: &[Vec<Rational>], s: &Set) -> Rational {
    let mut best = r(0, 1);
    for &a in s {
        for &b in s {
            if u[a][b] > best {
                best = u[a][b].clone();
            }
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct OracleEdge {
    pub lower: Set,
    pub upper: Set,
    pub members: BTreeSet<Set>,
    /// Generating subfamilies as bitmasks, ascending.
    pub provenance: Vec<u64>,
    pub a_dimension: usize,
    pub b_dimension: usize,
}

fn longest_chain(members: &BTreeSet<Set>, from: &Set, to: &Set) -> usize {
    if from == to {
        return 0;
    }
    members
        .iter()
        .filter(|k| *k != from && from.is_subset(k) && k.is_subset(to))
        .map(|k| 1 + longest_chain(members, k, to))
        .max()
        .unwrap_or(0)
}

/// Hyperedges straight from the definition: every subfamily, every pair
/// `I ⊊ J` of subfamily balls with no subfamily ball strictly between.
pub fn brute_force_hyperedges(balls: &[BTreeSet<Set>], strict_lower: bool) -> Vec<OracleEdge> {
    let k = balls.len();
    let all: BTreeSet<Set> = balls.iter().flatten().cloned().collect();
    let mut found: BTreeMap<(Set, Set, BTreeSet<Set>), Vec<u64>> = BTreeMap::new();
    for mask in 1u64..(1 << k) {
        let in_family = |s: usize| mask >> s & 1 == 1;
        let r_balls: Vec<&Set> = all
            .iter()
            .filter(|v| (0..k).filter(|&s| in_family(s)).all(|s| balls[s].contains(*v)))
            .collect();
        for lower in &r_balls {
            for upper in &r_balls {
                if lower == upper || !lower.is_subset(upper) {
                    continue;
                }
                let between = r_balls.iter().any(|m| {
                    *m != *lower && *m != *upper && lower.is_subset(m) && m.is_subset(upper)
                });
                if between {
                    continue;
                }
                let members: BTreeSet<Set> = all
                    .iter()
                    .filter(|v| lower.is_subset(v) && v.is_subset(upper))
                    .filter(|v| (0..k).any(|s| in_family(s) && balls[s].contains(*v)))
                    .cloned()
                    .collect();
                found
                    .entry(((*lower).clone(), (*upper).clone(), members))
                    .or_default()
                    .push(mask);
            }
        }
    }
    found
        .into_iter()
        .map(|((lower, upper, members), provenance)| {
            let union = provenance.iter().fold(0, |a, b| a | b);
            let mut children = BTreeSet::new();
            for s in (0..k).filter(|&s| union >> s & 1 == 1) {
                for c in &balls[s] {
                    let proper = c != &upper && c.is_subset(&upper);
                    let maximal = !balls[s]
                        .iter()
                        .any(|m| m != c && m != &upper && c.is_subset(m) && m.is_subset(&upper));
                    let above = lower.is_subset(c) && (!strict_lower || c != &lower);
                    if proper && maximal && above {
                        children.insert(c.clone());
                    }
                }
            }
            OracleEdge {
                a_dimension: longest_chain(&members, &lower, &upper),
                b_dimension: children.len(),
                lower,
                upper,
                members,
                provenance,
            }
        })
        .collect()
}

pub fn set_of(h: &ClusterHypergraph, v: usize) -> Set {
    h.vertex(v).iter().collect()
}

/// The library's hyperedges in the oracle's shape.
pub fn library_edges(h: &ClusterHypergraph) -> Vec<OracleEdge> {
    let mut out: Vec<OracleEdge> = h
        .hyperedges()
        .iter()
        .map(|e| {
            let mut provenance: Vec<u64> = e.provenance.iter().map(|s| s.bits()).collect();
            provenance.sort_unstable();
            OracleEdge {
                lower: set_of(h, e.min_ball),
                upper: set_of(h, e.max_ball),
                members: e.members.iter().map(|&v| set_of(h, v)).collect(),
                provenance,
                a_dimension: e.a_dimension,
                b_dimension: e.b_dimension,
            }
        })
        .collect();
    out.sort();
    out
}

/// Label string of a vertex, e.g. `AB`.
pub fn name(h: &ClusterHypergraph, v: usize) -> String {
    h.vertex(v).labels(h.points()).concat()
}

pub fn cases(n: u32) -> proptest::test_runner::Config {
    proptest::test_runner::Config {
        cases: n,
        failure_persistence: None,
        ..Default::default()
    }
}

//! Finite-precision model of `Z_p^d` with deformed max-metrics.
//!
//! Points are the residues `(Z/p^m)^d`. A deformed metric weights each
//! coordinate's p-adic absolute value by `q_i ∈ (1/p, 1]` and takes the
//! maximum; an optional unimodular integer matrix `A` twists it to
//! `s(x, y) = d_q(Ax, Ay)`.

use num_bigint::BigInt;
use num_traits::One;

use crate::dendrogram::Members;
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::metric::{MetricMatrix, PointSet};
use crate::rational::{format_rational, Rational};

pub const DEFAULT_POINT_CAP: u64 = 4096;
pub const DEFAULT_FAMILY_CAP: u64 = 720;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PAdicConfig {
    p: u64,
    d: usize,
    m: u32,
    modulus: u64,
    size: u64,
}

fn is_prime(p: u64) -> bool {
    p >= 2 && (2..).take_while(|k| k * k <= p).all(|k| !p.is_multiple_of(k))
}

impl PAdicConfig {
    pub fn new(p: u64, d: usize, m: u32) -> Result<Self> {
        Self::with_cap(p, d, m, DEFAULT_POINT_CAP)
    }

    pub fn with_cap(p: u64, d: usize, m: u32, cap: u64) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::Precondition(format!("p = {p} is not prime")));
        }
        if d == 0 || m == 0 {
            return Err(Error::Precondition("d and m must be at least 1".into()));
        }
        let exponent = (m as u128) * (d as u128);
        let size = (p as u128).checked_pow(exponent.min(u32::MAX as u128) as u32);
        match size {
            Some(size) if size <= cap as u128 => Ok(PAdicConfig {
                p,
                d,
                m,
                modulus: p.pow(m),
                size: size as u64,
            }),
            _ => Err(Error::CapExceeded {
                what: "point count p^(m·d)",
                actual: size.unwrap_or(u128::MAX),
                cap: cap as u128,
            }),
        }
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    /// `p^m`.
    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    /// Number of modeled points, `p^(m·d)`.
    pub fn size(&self) -> usize {
        self.size as usize
    }

    /// Coordinates of point `index`; coordinate 0 varies fastest.
    pub fn coords(&self, index: usize) -> Vec<u64> {
        let mut rest = index as u64;
        (0..self.d)
            .map(|_| {
                let c = rest % self.modulus;
                rest /= self.modulus;
                c
            })
            .collect()
    }

    pub fn index_of(&self, coords: &[u64]) -> usize {
        coords
            .iter()
            .rev()
            .fold(0u64, |acc, &c| acc * self.modulus + c % self.modulus) as usize
    }

    pub fn label(&self, index: usize) -> String {
        let parts: Vec<String> = self.coords(index).iter().map(u64::to_string).collect();
        format!("({})", parts.join(","))
    }

    pub fn point_set(&self) -> PointSet {
        PointSet::new((0..self.size()).map(|i| self.label(i))).expect("labels are distinct")
    }

    /// p-adic valuation of a residue, `None` for zero.
    pub fn valuation(&self, x: u64) -> Option<u32> {
        let mut x = x % self.modulus;
        if x == 0 {
            return None;
        }
        let mut v = 0;
        while x.is_multiple_of(self.p) {
            x /= self.p;
            v += 1;
        }
        Some(v)
    }

    /// `p^-k` as a rational.
    fn inverse_power(&self, k: u32) -> Rational {
        Rational::new(BigInt::one(), BigInt::from(self.p).pow(k))
    }

    /// Points with every coordinate divisible by `p^k`, the model of `p^k Z_p^d`.
    pub fn scaled_lattice(&self, k: u32) -> Members {
        let step = if k >= self.m { self.modulus } else { self.p.pow(k) };
        Members::new((0..self.size()).filter(|&i| self.coords(i).iter().all(|c| c % step == 0)))
    }
}

/// `|x|_p` for a residue mod `p^m`; zero when `x ≡ 0`.
pub fn padic_abs(cfg: &PAdicConfig, x: u64) -> Rational {
    match cfg.valuation(x) {
        None => Rational::from_integer(BigInt::from(0)),
        Some(v) => cfg.inverse_power(v),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeformedMetric {
    pub id: String,
    /// One weight per coordinate, each in `(1/p, 1]`.
    pub q: Vec<Rational>,
    /// Row-major `d × d` twist, reduced mod `p^m`.
    pub twist: Option<Vec<Vec<u64>>>,
}

/// Determinant of `a` modulo the prime `p`, by elimination over `F_p`.
fn det_mod_prime(a: &[Vec<u64>], p: u64) -> u64 {
    let n = a.len();
    let mut m: Vec<Vec<u64>> = a.iter().map(|r| r.iter().map(|x| x % p).collect()).collect();
    let pow = |mut b: u64, mut e: u64| {
        let mut r = 1u64;
        b %= p;
        while e > 0 {
            if e & 1 == 1 {
                r = r * b % p;
            }
            b = b * b % p;
            e >>= 1;
        }
        r
    };
    let mut det = 1u64;
    for col in 0..n {
        let Some(pivot) = (col..n).find(|&r| m[r][col] != 0) else {
            return 0;
        };
        if pivot != col {
            m.swap(pivot, col);
            det = (p - det) % p;
        }
        det = det * m[col][col] % p;
        let inv = pow(m[col][col], p - 2);
        for r in col + 1..n {
            let factor = m[r][col] * inv % p;
            for c in col..n {
                m[r][c] = (m[r][c] + p * p - factor * m[col][c] % p) % p;
            }
        }
    }
    det
}

impl DeformedMetric {
    pub fn new(
        cfg: &PAdicConfig,
        id: impl Into<String>,
        q: Vec<Rational>,
        twist: Option<Vec<Vec<i64>>>,
    ) -> Result<Self> {
        if q.len() != cfg.d {
            return Err(Error::Precondition(format!(
                "expected {} q values, got {}",
                cfg.d,
                q.len()
            )));
        }
        let low = cfg.inverse_power(1);
        let one = Rational::one();
        if let Some(bad) = q.iter().find(|v| !(**v > low && **v <= one)) {
            return Err(Error::Precondition(format!(
                "q = {} is outside (1/{}, 1]",
                format_rational(bad),
                cfg.p
            )));
        }
        let twist = match twist {
            None => None,
            Some(rows) => {
                if rows.len() != cfg.d || rows.iter().any(|r| r.len() != cfg.d) {
                    return Err(Error::Precondition(format!("twist must be {0}×{0}", cfg.d)));
                }
                let modulus = cfg.modulus as i64;
                let reduced: Vec<Vec<u64>> = rows
                    .iter()
                    .map(|r| r.iter().map(|&x| x.rem_euclid(modulus) as u64).collect())
                    .collect();
                if det_mod_prime(&reduced, cfg.p) == 0 {
                    return Err(Error::Precondition(format!(
                        "twist determinant is divisible by {}",
                        cfg.p
                    )));
                }
                Some(reduced)
            }
        };
        Ok(DeformedMetric {
            id: id.into(),
            q,
            twist,
        })
    }

    /// Coordinatewise difference `x - y`, twisted when a matrix is present.
    fn difference(&self, cfg: &PAdicConfig, x: &[u64], y: &[u64]) -> Vec<u64> {
        let m = cfg.modulus;
        let diff: Vec<u64> = x.iter().zip(y).map(|(a, b)| (a % m + m - b % m) % m).collect();
        match &self.twist {
            None => diff,
            Some(a) => a
                .iter()
                .map(|row| {
                    (row
                        .iter()
                        .zip(&diff)
                        .map(|(&r, &v)| r as u128 * v as u128)
                        .sum::<u128>()
                        % m as u128) as u64
                })
                .collect(),
        }
    }

    /// Applies the twist to a point, or returns it unchanged.
    pub fn transform(&self, cfg: &PAdicConfig, x: &[u64]) -> Vec<u64> {
        let zero = vec![0; cfg.d];
        self.difference(cfg, x, &zero)
    }
}

/// `max_i q_i · |(A(x - y))_i|_p`.
pub fn deformed_distance(cfg: &PAdicConfig, x: &[u64], y: &[u64], metric: &DeformedMetric) -> Rational {
    metric
        .difference(cfg, x, y)
        .iter()
        .zip(&metric.q)
        .map(|(&c, q)| q * padic_abs(cfg, c))
        .max()
        .unwrap_or_else(|| Rational::from_integer(BigInt::from(0)))
}

/// Default strictly increasing weights `q_i = 1/p + (1 - 1/p)·i/d`, `i = 1..d`.
pub fn default_q(cfg: &PAdicConfig) -> Vec<Rational> {
    let low = cfg.inverse_power(1);
    let span = Rational::one() - &low;
    (1..=cfg.d)
        .map(|i| &low + &span * Rational::new(BigInt::from(i), BigInt::from(cfg.d)))
        .collect()
}

/// A set in the ball chain between `pZ_p^d` and `Z_p^d`: coordinates marked
/// free are unconstrained, the rest are divisible by `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BallDescriptor {
    pub free: Vec<bool>,
}

impl BallDescriptor {
    pub fn dimension(&self) -> usize {
        self.free.iter().filter(|&&f| f).count()
    }

    pub fn points(&self, cfg: &PAdicConfig) -> Members {
        Members::new((0..cfg.size()).filter(|&i| {
            cfg.coords(i)
                .iter()
                .zip(&self.free)
                .all(|(c, &free)| free || c % cfg.p == 0)
        }))
    }
}

/// Coordinates grouped by equal `q`, groups in ascending `q`.
fn q_groups(q: &[Rational]) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..q.len()).collect();
    order.sort_by(|&a, &b| q[a].cmp(&q[b]).then(a.cmp(&b)));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in order {
        match groups.last_mut() {
            Some(g) if q[g[0]] == q[i] => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    groups
}

/// The chain of balls between `pZ_p^d` and `Z_p^d` of the metric with
/// weights `q`: stage `a` frees the `a` coordinates of smallest weight.
/// Equal weights free their coordinates together, so the chain is shorter.
pub fn partial_ball_sequence(q: &[Rational]) -> Vec<BallDescriptor> {
    let mut free = vec![false; q.len()];
    let mut out = vec![BallDescriptor { free: free.clone() }];
    for group in q_groups(q) {
        for i in group {
            free[i] = true;
        }
        out.push(BallDescriptor { free: free.clone() });
    }
    out
}

/// Complete chain of `d + 1` nested balls; fails with the tied coordinate
/// groups when the weights are not pairwise distinct.
pub fn ball_sequence(q: &[Rational]) -> Result<Vec<BallDescriptor>> {
    let groups = q_groups(q);
    let tied: Vec<Vec<usize>> = groups.into_iter().filter(|g| g.len() > 1).collect();
    if !tied.is_empty() {
        return Err(Error::Precondition(format!(
            "equal q values give a partial flag; tied coordinates {tied:?}"
        )));
    }
    Ok(partial_ball_sequence(q))
}

fn next_permutation(perm: &mut [usize]) -> bool {
    let Some(i) = (1..perm.len()).rev().find(|&i| perm[i - 1] < perm[i]) else {
        return false;
    };
    let j = (i..perm.len()).rev().find(|&j| perm[j] > perm[i - 1]).unwrap();
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

/// One metric per assignment of the strictly increasing `base_q` to the
/// coordinates, in lexicographic permutation order. The metric id lists the
/// 1-based rank of each coordinate's weight, so `s12` gives coordinate 1 the
/// smallest weight.
pub fn permutation_family(
    cfg: &PAdicConfig,
    base_q: &[Rational],
    cap: u64,
) -> Result<Vec<DeformedMetric>> {
    if base_q.len() != cfg.d {
        return Err(Error::Precondition(format!(
            "expected {} q values, got {}",
            cfg.d,
            base_q.len()
        )));
    }
    if base_q.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Precondition("base q values must be strictly increasing".into()));
    }
    let count = (1..=cfg.d as u128).product::<u128>();
    if count > cap as u128 {
        return Err(Error::CapExceeded {
            what: "permutation family size d!",
            actual: count,
            cap: cap as u128,
        });
    }
    let sep = if cfg.d >= 10 { "-" } else { "" };
    let mut perm: Vec<usize> = (0..cfg.d).collect();
    let mut out = Vec::new();
    loop {
        let id: Vec<String> = perm.iter().map(|r| (r + 1).to_string()).collect();
        let q = perm.iter().map(|&r| base_q[r].clone()).collect();
        out.push(DeformedMetric::new(cfg, format!("s{}", id.join(sep)), q, None)?);
        if !next_permutation(&mut perm) {
            break;
        }
    }
    Ok(out)
}

/// Distance matrices of `family` on all points of `cfg`.
///
/// Every distance is `q_i · p^-v` for some coordinate `i` and valuation `v`,
/// so each cell is stored as the rank of the largest such term.
pub fn metric_matrices(
    cfg: &PAdicConfig,
    family: &[DeformedMetric],
    exec: Execution,
) -> Result<Vec<MetricMatrix>> {
    let points = cfg.point_set();
    let n = cfg.size();
    let coords: Vec<Vec<u64>> = (0..n).map(|i| cfg.coords(i)).collect();
    family
        .iter()
        .map(|metric| {
            let mut levels: Vec<Rational> = Vec::new();
            for q in &metric.q {
                for v in 0..cfg.m {
                    levels.push(q * cfg.inverse_power(v));
                }
            }
            levels.sort();
            levels.dedup();
            let term_rank: Vec<Vec<u32>> = metric
                .q
                .iter()
                .map(|q| {
                    (0..cfg.m)
                        .map(|v| levels.binary_search(&(q * cfg.inverse_power(v))).unwrap() as u32)
                        .collect()
                })
                .collect();
            let rows = exec::map_range(exec, n, |i| {
                (i + 1..n)
                    .map(|j| {
                        metric
                            .difference(cfg, &coords[i], &coords[j])
                            .iter()
                            .enumerate()
                            .filter_map(|(k, &c)| cfg.valuation(c).map(|v| term_rank[k][v as usize]))
                            .max()
                            .ok_or_else(|| Error::Internal("distinct points at distance zero".into()))
                    })
                    .collect::<Result<Vec<u32>>>()
            });
            let mut ranks = Vec::with_capacity(n * n.saturating_sub(1) / 2);
            for row in rows {
                ranks.extend(row?);
            }
            MetricMatrix::from_ranks(points.clone(), metric.id.clone(), levels, ranks)
        })
        .collect()
}

/// Point set of `cfg` with the distance matrix of every metric in `family`.
pub fn enumerate_points(
    cfg: &PAdicConfig,
    family: &[DeformedMetric],
) -> Result<(PointSet, Vec<MetricMatrix>)> {
    Ok((cfg.point_set(), metric_matrices(cfg, family, Execution::default())?))
}

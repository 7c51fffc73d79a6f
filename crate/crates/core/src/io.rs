//! File formats: TSV distance matrices, CSV marker tables, JSON exports and
//! Graphviz DOT.
//!
//! All writers are deterministic; every JSON document carries
//! `schema_version` and `kind`.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dendrogram::{Cluster, ClusterTree, Members};
use crate::error::{Error, Result};
use crate::hypergraph::{ClusterHypergraph, Compatibility, LowerBound};
use crate::metric::{DissimilarityTable, MetricMatrix, PointSet};
use crate::phylo::{MarkerKernel, MarkerTable, Sweep, WeightVector};
use crate::product::AbstractHypergraph;
use crate::rational::{format_rational, parse_rational, Rational};

pub const SCHEMA_VERSION: u32 = 1;

/// Parses a distance matrix.
///
/// The first non-comment line holds the point labels (optionally preceded by
/// an empty corner cell); each following line is a label and `n` rational
/// entries. Lines starting with `#` and blank lines are ignored.
pub fn read_matrix_tsv(text: &str, metric_id: &str) -> Result<DissimilarityTable> {
    let ctx = |line: usize| format!("{metric_id}: line {line}");
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    let (header_line, header) = lines
        .next()
        .ok_or_else(|| Error::format(metric_id, "empty matrix file"))?;
    let mut labels: Vec<&str> = header.split('\t').map(str::trim).collect();
    if labels.first() == Some(&"") {
        labels.remove(0);
    }
    let points = PointSet::new(labels.iter().copied())
        .map_err(|e| Error::format(ctx(header_line), e.to_string()))?;
    let n = points.len();
    let mut rows: Vec<Option<Vec<Rational>>> = vec![None; n];
    for (line_no, line) in lines {
        let cells: Vec<&str> = line.split('\t').collect();
        let label = cells[0].trim();
        let index = points.index_of(label).ok_or_else(|| {
            Error::format(ctx(line_no), format!("row label {label:?} is not in the header"))
        })?;
        if rows[index].is_some() {
            return Err(Error::format(ctx(line_no), format!("duplicate row {label:?}")));
        }
        if cells.len() != n + 1 {
            return Err(Error::format(
                ctx(line_no),
                format!("row {label:?} has {} entries, expected {n}", cells.len() - 1),
            ));
        }
        let values = cells[1..]
            .iter()
            .map(|c| parse_rational(c))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::format(ctx(line_no), format!("row {label:?}: {e}")))?;
        rows[index] = Some(values);
    }
    let rows = rows
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            r.ok_or_else(|| Error::format(metric_id, format!("missing row for {:?}", points.label(i))))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DissimilarityTable::new(points, metric_id, rows))
}

pub fn write_matrix_tsv(m: &MetricMatrix) -> String {
    let mut out = m.points().labels().join("\t");
    out.push('\n');
    out.push_str(&m.to_string());
    out
}

fn labels_of(members: &Members, points: &PointSet) -> Vec<String> {
    members.labels(points).into_iter().map(String::from).collect()
}

fn members_from_labels(labels: &[String], points: &PointSet) -> Result<Members> {
    let idx = labels
        .iter()
        .map(|l| {
            points
                .index_of(l)
                .ok_or_else(|| Error::format("json", format!("unknown point {l:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Members::new(idx))
}

/// Export order: by size, then by sorted label list.
fn label_order(points: &PointSet) -> impl Fn(&Members, &Members) -> std::cmp::Ordering + '_ {
    move |a, b| {
        a.len()
            .cmp(&b.len())
            .then_with(|| a.labels(points).cmp(&b.labels(points)))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TreeClusterJson {
    members: Vec<String>,
    diameter: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct EdgeJson {
    child: Vec<String>,
    parent: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TreeJson {
    schema_version: u32,
    kind: String,
    metric_id: String,
    points: Vec<String>,
    clusters: Vec<TreeClusterJson>,
    cover_edges: Vec<EdgeJson>,
}

pub fn tree_to_json(tree: &ClusterTree) -> Value {
    let points = tree.points();
    let order = label_order(points);
    let mut ids: Vec<usize> = (0..tree.len()).collect();
    ids.sort_by(|&a, &b| order(&tree.clusters()[a].members, &tree.clusters()[b].members));
    let clusters = ids
        .iter()
        .map(|&c| TreeClusterJson {
            members: labels_of(&tree.clusters()[c].members, points),
            diameter: format_rational(&tree.clusters()[c].diameter),
        })
        .collect();
    let mut edges = tree.cover_edges();
    let rank: HashMap<usize, usize> = ids.iter().enumerate().map(|(r, &c)| (c, r)).collect();
    edges.sort_by_key(|&(c, p)| (rank[&c], rank[&p]));
    let cover_edges = edges
        .iter()
        .map(|&(c, p)| EdgeJson {
            child: labels_of(&tree.clusters()[c].members, points),
            parent: labels_of(&tree.clusters()[p].members, points),
        })
        .collect();
    serde_json::to_value(TreeJson {
        schema_version: SCHEMA_VERSION,
        kind: "cluster_tree".into(),
        metric_id: tree.metric_id().into(),
        points: points.labels().to_vec(),
        clusters,
        cover_edges,
    })
    .expect("tree json")
}

fn check_header(value: &Value, kind: &str) -> Result<()> {
    let version = value.get("schema_version").and_then(Value::as_u64);
    if version != Some(SCHEMA_VERSION as u64) {
        return Err(Error::format("json", format!("unsupported schema_version {version:?}")));
    }
    let found = value.get("kind").and_then(Value::as_str);
    if found != Some(kind) {
        return Err(Error::format("json", format!("expected kind {kind:?}, found {found:?}")));
    }
    Ok(())
}

/// Re-imports a tree written by [`tree_to_json`], checking its cover edges.
pub fn tree_from_json(value: &Value) -> Result<ClusterTree> {
    check_header(value, "cluster_tree")?;
    let doc: TreeJson = serde_json::from_value(value.clone())?;
    let points = PointSet::new(doc.points)?;
    let clusters = doc
        .clusters
        .iter()
        .map(|c| {
            Ok(Cluster {
                members: members_from_labels(&c.members, &points)?,
                diameter: parse_rational(&c.diameter)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let tree = ClusterTree::from_clusters(doc.metric_id, points, clusters)?;
    let mut expected: Vec<(Members, Members)> = tree
        .cover_edges()
        .into_iter()
        .map(|(c, p)| (tree.clusters()[c].members.clone(), tree.clusters()[p].members.clone()))
        .collect();
    let mut given = doc
        .cover_edges
        .iter()
        .map(|e| {
            Ok((
                members_from_labels(&e.child, tree.points())?,
                members_from_labels(&e.parent, tree.points())?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    expected.sort();
    given.sort();
    if expected != given {
        return Err(Error::format("json", "cover edges do not match the cluster family"));
    }
    Ok(tree)
}

fn lower_bound_name(lb: LowerBound) -> &'static str {
    match lb {
        LowerBound::Inclusive => "inclusive",
        LowerBound::Strict => "strict",
    }
}

pub fn hypergraph_to_json(
    h: &ClusterHypergraph,
    lower_bound: LowerBound,
    compatibility: Option<&Compatibility>,
) -> Value {
    let points = h.points();
    let order = label_order(points);
    let labels = |v: usize| labels_of(h.vertex(v), points);
    let metrics = |set: crate::hypergraph::MetricSet| -> Vec<&str> {
        set.iter().map(|s| h.metric_ids()[s].as_str()).collect()
    };
    let mut ids: Vec<usize> = (0..h.vertices().len()).collect();
    ids.sort_by(|&a, &b| order(h.vertex(a), h.vertex(b)));
    let rank: HashMap<usize, usize> = ids.iter().enumerate().map(|(r, &v)| (v, r)).collect();

    let vertices: Vec<Value> = ids
        .iter()
        .map(|&v| {
            let diameters: BTreeMap<&str, String> = h
                .ball_membership(v)
                .iter()
                .map(|s| {
                    (
                        h.metric_ids()[s].as_str(),
                        format_rational(h.diameter(s, v).expect("ball has a diameter")),
                    )
                })
                .collect();
            json!({
                "members": labels(v),
                "ball_of": metrics(h.ball_membership(v)),
                "diameters": diameters,
            })
        })
        .collect();
    let mut two = h.two_edges().to_vec();
    two.sort_by_key(|e| (rank[&e.child], rank[&e.parent], e.metric));
    let two_edges: Vec<Value> = two
        .iter()
        .map(|e| {
            json!({
                "child": labels(e.child),
                "parent": labels(e.parent),
                "metric": h.metric_ids()[e.metric],
            })
        })
        .collect();
    let hyperedges: Vec<Value> = h
        .hyperedges()
        .iter()
        .map(|e| {
            let mut members = e.members.clone();
            members.sort_by_key(|v| rank[v]);
            json!({
                "min_ball": labels(e.min_ball),
                "max_ball": labels(e.max_ball),
                "members": members.iter().map(|&v| labels(v)).collect::<Vec<_>>(),
                "subfamily": metrics(e.subfamily),
                "provenance": e.provenance.iter().map(|&s| metrics(s)).collect::<Vec<_>>(),
                "a_dimension": e.a_dimension,
                "b_dimension": e.b_dimension,
            })
        })
        .collect();
    let compatibility = compatibility.map(|c| {
        json!({
            "compatible": c.compatible,
            "witness": c.witness.as_ref().map(|(a, b, meet)| json!({
                "left": labels(*a),
                "right": labels(*b),
                "intersection": labels_of(meet, points),
            })),
        })
    });
    json!({
        "schema_version": SCHEMA_VERSION,
        "kind": "cluster_hypergraph",
        "points": points.labels(),
        "metrics": h.metric_ids(),
        "b_dimension_lower_bound": lower_bound_name(lower_bound),
        "vertices": vertices,
        "two_edges": two_edges,
        "hyperedges": hyperedges,
        "compatibility": compatibility,
    })
}

fn string_list(value: &Value, what: &str) -> Result<Vec<String>> {
    value
        .as_array()
        .ok_or_else(|| Error::format("json", format!("{what} must be a list")))?
        .iter()
        .map(|v| {
            v.as_str()
                .map(String::from)
                .ok_or_else(|| Error::format("json", format!("{what} must hold strings")))
        })
        .collect()
}

/// Reads a tree or hypergraph export as an [`AbstractHypergraph`] whose
/// vertex names are `{A,B}`-style label sets.
pub fn abstract_from_json(value: &Value) -> Result<AbstractHypergraph> {
    match value.get("kind").and_then(Value::as_str) {
        Some("cluster_tree") => Ok(AbstractHypergraph::from_tree(&tree_from_json(value)?)),
        Some("cluster_hypergraph") => {
            check_header(value, "cluster_hypergraph")?;
            let name = |v: &Value, what: &str| -> Result<String> {
                Ok(format!("{{{}}}", string_list(v, what)?.join(",")))
            };
            let field = |key: &str| -> Result<&Vec<Value>> {
                value
                    .get(key)
                    .and_then(Value::as_array)
                    .ok_or_else(|| Error::format("json", format!("missing {key}")))
            };
            let vertices: Vec<String> = field("vertices")?
                .iter()
                .map(|v| name(&v["members"], "vertex members"))
                .collect::<Result<_>>()?;
            let index: HashMap<&str, usize> = vertices
                .iter()
                .enumerate()
                .map(|(i, v)| (v.as_str(), i))
                .collect();
            let lookup = |v: &Value, what: &str| -> Result<usize> {
                let n = name(v, what)?;
                index
                    .get(n.as_str())
                    .copied()
                    .ok_or_else(|| Error::format("json", format!("unknown vertex {n}")))
            };
            let two_edges = field("two_edges")?
                .iter()
                .map(|e| Ok((lookup(&e["child"], "child")?, lookup(&e["parent"], "parent")?)))
                .collect::<Result<Vec<_>>>()?;
            let edges = field("hyperedges")?
                .iter()
                .map(|e| {
                    e["members"]
                        .as_array()
                        .ok_or_else(|| Error::format("json", "hyperedge members must be a list"))?
                        .iter()
                        .map(|m| lookup(m, "member"))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            AbstractHypergraph::new(vertices.clone(), two_edges, edges)
        }
        other => Err(Error::format("json", format!("unsupported kind {other:?}"))),
    }
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

pub fn tree_to_dot(tree: &ClusterTree) -> String {
    let mut out = format!("digraph \"{}\" {{\n  rankdir=BT;\n", dot_escape(tree.metric_id()));
    for (i, c) in tree.clusters().iter().enumerate() {
        let _ = writeln!(
            out,
            "  c{i} [label=\"{}\\n{}\"];",
            dot_escape(&c.members.display(tree.points())),
            format_rational(&c.diameter)
        );
    }
    for (c, p) in tree.cover_edges() {
        let _ = writeln!(out, "  c{c} -> c{p};");
    }
    out.push_str("}\n");
    out
}

/// Two-edges colored by metric; hyperedges of three or more members drawn as
/// dashed `cluster_*` subgraphs.
pub fn hypergraph_to_dot(h: &ClusterHypergraph) -> String {
    let mut out = String::from("digraph hypergraph {\n  rankdir=BT;\n  compound=true;\n");
    for (i, m) in h.metric_ids().iter().enumerate() {
        let _ = writeln!(
            out,
            "  // metric {} color {}",
            dot_escape(m),
            PALETTE[i % PALETTE.len()]
        );
    }
    for v in 0..h.vertices().len() {
        let _ = writeln!(out, "  v{v} [label=\"{}\"];", dot_escape(&h.display_vertex(v)));
    }
    for e in h.two_edges() {
        let _ = writeln!(
            out,
            "  v{} -> v{} [color=\"{}\", label=\"{}\"];",
            e.child,
            e.parent,
            PALETTE[e.metric % PALETTE.len()],
            dot_escape(&h.metric_ids()[e.metric])
        );
    }
    for (k, e) in h.hyperedges().iter().enumerate().filter(|(_, e)| e.members.len() > 2) {
        let _ = writeln!(
            out,
            "  subgraph cluster_{k} {{\n    style=dashed;\n    label=\"A={} B={}\";",
            e.a_dimension, e.b_dimension
        );
        for v in &e.members {
            let _ = writeln!(out, "    v{v};");
        }
        out.push_str("  }\n");
    }
    out.push_str("}\n");
    out
}

/// Parses a marker table: header `genome,<marker>...`, one row per genome.
pub fn read_marker_csv(text: &str) -> Result<MarkerTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::format("marker table", e.to_string()))?
        .clone();
    if headers.len() < 2 {
        return Err(Error::format(
            "marker table",
            "header needs a genome column and at least one marker",
        ));
    }
    let markers: Vec<String> = headers.iter().skip(1).map(String::from).collect();
    let mut genomes = Vec::new();
    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format("marker table", e.to_string()))?;
        let ctx = format!("marker table row {}", i + 2);
        if record.len() != headers.len() {
            return Err(Error::format(
                ctx,
                format!("{} cells, expected {}", record.len(), headers.len()),
            ));
        }
        genomes.push(record[0].to_string());
        values.push(record.iter().skip(1).map(String::from).collect());
    }
    MarkerTable::new(PointSet::new(genomes)?, markers, values)
}

/// Applies a kernel file: lines `marker<TAB>symbol<TAB>symbol<TAB>distance`.
pub fn apply_kernel_tsv(table: &mut MarkerTable, text: &str) -> Result<()> {
    let mut per_marker: BTreeMap<usize, HashMap<(String, String), Rational>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let ctx = format!("kernel line {}", i + 1);
        let cells: Vec<&str> = line.split('\t').map(str::trim).collect();
        let [marker, a, b, d] = cells.as_slice() else {
            return Err(Error::format(ctx, "expected marker, symbol, symbol, distance"));
        };
        let m = table
            .marker_index(marker)
            .ok_or_else(|| Error::format(&ctx, format!("unknown marker {marker:?}")))?;
        let d = parse_rational(d).map_err(|e| Error::format(&ctx, e.to_string()))?;
        per_marker
            .entry(m)
            .or_default()
            .insert((a.to_string(), b.to_string()), d);
    }
    for (m, kernel) in per_marker {
        table.set_kernel(m, MarkerKernel::Table(kernel))?;
    }
    Ok(())
}

/// Parses a sweep grid: a JSON list of weight vectors given as rational strings.
pub fn read_grid_json(text: &str) -> Result<Vec<WeightVector>> {
    let raw: Vec<Vec<String>> = serde_json::from_str(text)?;
    raw.into_iter()
        .map(|w| {
            let weights = w
                .iter()
                .map(|s| parse_rational(s))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            WeightVector::new(weights)
        })
        .collect()
}

pub fn sweep_to_json(sweep: &Sweep) -> Value {
    let family: Vec<Value> = sweep
        .family
        .iter()
        .map(|s| {
            json!({
                "metric_id": s.metric.metric_id(),
                "provenance": s.provenance.iter().map(WeightVector::label).collect::<Vec<_>>(),
                "tree": tree_to_json(&s.tree),
            })
        })
        .collect();
    let skipped: Vec<Value> = sweep
        .skipped
        .iter()
        .map(|(w, reason)| json!({ "weights": w.label(), "reason": reason }))
        .collect();
    json!({
        "schema_version": SCHEMA_VERSION,
        "kind": "weight_sweep",
        "family": family,
        "skipped": skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dendrogram::build_cluster_tree;
    use crate::metric::chain_distance_matrix;
    use crate::rational::int;

    const SQUARE: &str = "A\tB\tC\n\
        A\t0\t1\t2.5\n\
        B\t1\t0\t5/2\n\
        C\t2.5\t5/2\t0\n";

    #[test]
    fn reads_matrix() {
        let t = read_matrix_tsv(SQUARE, "m").unwrap();
        assert_eq!(t.points.labels(), &["A", "B", "C"]);
        assert_eq!(t.rows[0][2], t.rows[1][2]);
        let m = t.into_metric().unwrap();
        let again = read_matrix_tsv(&write_matrix_tsv(&m), "m").unwrap();
        assert_eq!(again.into_metric().unwrap(), m);
    }

    #[test]
    fn accepts_corner_cell_and_comments() {
        let text = "# comment\n\tA\tB\nB\t1\t0\nA\t0\t1\n";
        let t = read_matrix_tsv(text, "m").unwrap();
        assert_eq!(t.rows[0][1], int(1));
    }

    #[test]
    fn malformed_rows_name_the_line() {
        let bad = "A\tB\nA\t0\t1\nB\t1\n";
        let err = read_matrix_tsv(bad, "m").unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("\"B\""), "{err}");
        let bad = "A\tB\nA\t0\tx\nB\t1\t0\n";
        let err = read_matrix_tsv(bad, "m").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        let missing = "A\tB\nA\t0\t1\n";
        assert!(read_matrix_tsv(missing, "m").is_err());
    }

    #[test]
    fn tree_json_round_trip() {
        let m = read_matrix_tsv(SQUARE, "m").unwrap().into_metric().unwrap();
        let tree = build_cluster_tree(&chain_distance_matrix(&m));
        let value = tree_to_json(&tree);
        assert_eq!(value["clusters"][3]["members"], json!(["A", "B"]));
        assert_eq!(value["clusters"][4]["diameter"], json!("5/2"));
        let back = tree_from_json(&value).unwrap();
        assert_eq!(back, tree);
        let mut broken = value.clone();
        broken["cover_edges"].as_array_mut().unwrap().pop();
        assert!(tree_from_json(&broken).is_err());
        broken["schema_version"] = json!(99);
        assert!(tree_from_json(&broken).is_err());
    }

    #[test]
    fn marker_csv() {
        let t = read_marker_csv("genome,m1,m2\nA,0,0\nB,1,0\n").unwrap();
        assert_eq!(t.markers(), &["m1", "m2"]);
        assert_eq!(t.value(1, 0), "1");
        assert!(read_marker_csv("genome,m1\nA,0\n").is_err());
        assert!(read_marker_csv("genome,m1\nA,0\nB,\n").is_err());
    }

    #[test]
    fn grid_json() {
        let g = read_grid_json(r#"[["1","1/1000"],["0.001","1"]]"#).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g[0].label(), "w(1,1/1000)");
        assert_eq!(g[1].label(), "w(1/1000,1)");
        assert!(read_grid_json(r#"[["0","0"]]"#).is_err());
    }

    #[test]
    fn kernel_file() {
        let mut t = read_marker_csv("genome,m1\nA,x\nB,y\n").unwrap();
        apply_kernel_tsv(&mut t, "m1\tx\ty\t3/2\n").unwrap();
        let d = crate::phylo::marker_distance(&t, 0).unwrap();
        assert_eq!(d.rows[0][1], crate::rational::ratio(3, 2));
        assert!(apply_kernel_tsv(&mut t, "zz\tx\ty\t1\n").is_err());
        assert!(apply_kernel_tsv(&mut t, "m1\tx\ty\n").is_err());
    }
}

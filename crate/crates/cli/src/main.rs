use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use ultraclust::hypergraph::{is_compatible, merge_trees, HyperedgeOptions, LowerBound};
use ultraclust::io;
use ultraclust::padic::{self, DeformedMetric, PAdicConfig};
use ultraclust::phylo::{self, WeightVector};
use ultraclust::product::{find_isomorphism, hypergraph_product};
use ultraclust::{
    build_cluster_tree, chain_distance_matrix, parse_rational, ClusterTree, Error, ErrorClass,
    Execution, MetricMatrix, Rational, Result,
};

#[derive(Parser)]
#[command(name = "ultraclust", version, about = "Multi-metric single-linkage cluster hypergraphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Largest number of metric subfamilies to enumerate.
    #[arg(long, global = true, default_value_t = ultraclust::hypergraph::DEFAULT_MAX_SUBFAMILIES,
          value_parser = clap::value_parser!(u64).range(1..))]
    max_subfamilies: u64,
    /// Count only children strictly above the lower ball for B-dimension.
    #[arg(long, global = true)]
    b_dim_strict_lower: bool,
    /// Run single-threaded.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Dot,
    Tsv,
}

#[derive(Subcommand)]
enum Command {
    /// Build the cluster tree of each matrix.
    Cluster {
        #[arg(required = true)]
        matrices: Vec<PathBuf>,
    },
    /// Merge the trees of several matrices and enumerate hyperedges.
    Hypergraph {
        #[arg(required = true)]
        matrices: Vec<PathBuf>,
    },
    /// Generate metric families on (Z/p^m)^d.
    Padic(PadicArgs),
    /// Sweep marker weights over a genome table.
    Phylo(PhyloArgs),
    /// Check that a hypergraph is isomorphic to the product of two trees.
    ProductCheck {
        /// Tree JSON for the left factor.
        left: PathBuf,
        /// Tree JSON for the right factor.
        right: PathBuf,
        /// Tree or hypergraph JSON to compare against.
        target: PathBuf,
        #[arg(long, default_value_t = 12)]
        max_vertices: usize,
    },
}

#[derive(Args)]
struct PadicArgs {
    #[arg(long)]
    p: u64,
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 1)]
    m: u32,
    /// Strictly increasing base weights, comma separated.
    #[arg(long, value_delimiter = ',')]
    q: Option<Vec<String>>,
    /// Integer d×d matrix applied before the distance, rows separated by `;`.
    #[arg(long)]
    twist: Option<String>,
    #[arg(long, value_enum, default_value_t = Emit::Pipeline)]
    emit: Emit,
    #[arg(long, default_value_t = padic::DEFAULT_POINT_CAP)]
    max_points: u64,
    #[arg(long, default_value_t = padic::DEFAULT_FAMILY_CAP)]
    max_family: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Emit {
    Matrices,
    Pipeline,
}

#[derive(Args)]
struct PhyloArgs {
    /// CSV marker table.
    #[arg(long)]
    table: PathBuf,
    /// JSON weight grid; defaults to one vector per marker.
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Symbol distance table, `marker<TAB>a<TAB>b<TAB>distance`.
    #[arg(long)]
    kernel: Option<PathBuf>,
    /// Weight of the non-dominant markers in the default grid.
    #[arg(long, default_value = "1/1000")]
    epsilon: String,
    /// Add the uniform vector to the default grid.
    #[arg(long)]
    with_uniform: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Input => 2,
                ErrorClass::Cap => 3,
                ErrorClass::Internal => 4,
            })
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::format(path.display().to_string(), e.to_string()))
}

fn emit(common: &Common, text: &str) -> Result<()> {
    match &common.out {
        Some(path) => fs::write(path, text).map_err(|e| Error::format(path.display().to_string(), e.to_string())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json");
    s.push('\n');
    s
}

fn execution(common: &Common) -> Execution {
    if common.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    }
}

fn options(common: &Common) -> HyperedgeOptions {
    HyperedgeOptions {
        lower_bound: if common.b_dim_strict_lower {
            LowerBound::Strict
        } else {
            LowerBound::Inclusive
        },
        max_subfamilies: common.max_subfamilies,
        execution: execution(common),
    }
}

/// Loads matrices, reordering each to the label order of the first.
fn load_matrices(paths: &[PathBuf]) -> Result<Vec<MetricMatrix>> {
    let mut out: Vec<MetricMatrix> = Vec::new();
    for path in paths {
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let table = io::read_matrix_tsv(&read(path)?, &id)?;
        let m = table.into_metric()?;
        let m = match out.first() {
            Some(first) => {
                if !m.points().same_members(first.points()) {
                    return Err(Error::PointSetMismatch(
                        first.metric_id().to_string(),
                        m.metric_id().to_string(),
                    ));
                }
                m.reorder_to(first.points())?
            }
            None => m,
        };
        out.push(m);
    }
    Ok(out)
}

fn trees_of(matrices: &[MetricMatrix]) -> Vec<ClusterTree> {
    matrices
        .iter()
        .map(|m| build_cluster_tree(&chain_distance_matrix(m)))
        .collect()
}

fn hypergraph_output(common: &Common, trees: &[ClusterTree]) -> Result<(String, Value)> {
    let mut h = merge_trees(trees)?;
    let opts = options(common);
    h.populate_hyperedges(&opts)?;
    let compat = is_compatible(&h);
    let value = io::hypergraph_to_json(&h, opts.lower_bound, Some(&compat));
    let text = match common.format {
        Format::Dot => io::hypergraph_to_dot(&h),
        _ => pretty(&value),
    };
    Ok((text, value))
}

fn reject_tsv(common: &Common, what: &str) -> Result<()> {
    if common.format == Format::Tsv {
        return Err(Error::Precondition(format!("tsv output is not available for {what}")));
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let common = &cli.common;
    match &cli.command {
        Command::Cluster { matrices } => {
            let matrices = load_matrices(matrices)?;
            let trees = trees_of(&matrices);
            let text = match common.format {
                Format::Json => {
                    if trees.len() == 1 {
                        pretty(&io::tree_to_json(&trees[0]))
                    } else {
                        pretty(&Value::Array(trees.iter().map(io::tree_to_json).collect()))
                    }
                }
                Format::Dot => trees.iter().map(io::tree_to_dot).collect(),
                Format::Tsv => matrices
                    .iter()
                    .map(|m| {
                        let u = chain_distance_matrix(m);
                        format!("# {}\n{}", m.metric_id(), io::write_matrix_tsv(&u))
                    })
                    .collect(),
            };
            emit(common, &text)
        }
        Command::Hypergraph { matrices } => {
            reject_tsv(common, "hypergraph")?;
            let matrices = load_matrices(matrices)?;
            if matrices.len() == 1 {
                eprintln!("warning: a single metric gives a hypergraph equal to its tree");
            }
            let (text, _) = hypergraph_output(common, &trees_of(&matrices))?;
            emit(common, &text)
        }
        Command::Padic(args) => run_padic(common, args),
        Command::Phylo(args) => run_phylo(common, args),
        Command::ProductCheck {
            left,
            right,
            target,
            max_vertices,
        } => {
            reject_tsv(common, "product-check")?;
            let load = |p: &PathBuf| -> Result<Value> { Ok(serde_json::from_str(&read(p)?)?) };
            let left = io::tree_from_json(&load(left)?)?;
            let right = io::tree_from_json(&load(right)?)?;
            let target = io::abstract_from_json(&load(target)?)?;
            let product = hypergraph_product(
                &ultraclust::AbstractHypergraph::from_tree(&left),
                &ultraclust::AbstractHypergraph::from_tree(&right),
            );
            let map = find_isomorphism(&product, &target, *max_vertices)?;
            let mapping = map.as_ref().map(|m| {
                m.iter()
                    .enumerate()
                    .map(|(i, &j)| json!([product.vertices[i], target.vertices[j]]))
                    .collect::<Vec<_>>()
            });
            let value = json!({
                "schema_version": io::SCHEMA_VERSION,
                "kind": "product_check",
                "isomorphic": map.is_some(),
                "product_vertices": product.vertex_count(),
                "target_vertices": target.vertex_count(),
                "map": mapping,
            });
            emit(common, &pretty(&value))
        }
    }
}

fn parse_twist(text: &str, d: usize) -> Result<Vec<Vec<i64>>> {
    let rows: Vec<Vec<i64>> = text
        .split(';')
        .map(|row| {
            row.split(',')
                .map(|c| {
                    c.trim()
                        .parse::<i64>()
                        .map_err(|e| Error::format("--twist", format!("{c:?}: {e}")))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(Error::format("--twist", format!("expected a {d}x{d} matrix")));
    }
    Ok(rows)
}

fn run_padic(common: &Common, args: &PadicArgs) -> Result<()> {
    let cfg = PAdicConfig::with_cap(args.p, args.d, args.m, args.max_points)?;
    let base_q: Vec<Rational> = match &args.q {
        Some(q) => q.iter().map(|s| parse_rational(s)).collect::<std::result::Result<_, _>>()?,
        None => padic::default_q(&cfg),
    };
    let mut family = padic::permutation_family(&cfg, &base_q, args.max_family)?;
    if let Some(t) = &args.twist {
        let twist = parse_twist(t, args.d)?;
        family = family
            .into_iter()
            .map(|m| DeformedMetric::new(&cfg, format!("{}t", m.id), m.q, Some(twist.clone())))
            .collect::<Result<_>>()?;
    }
    let matrices = padic::metric_matrices(&cfg, &family, execution(common))?;
    match args.emit {
        Emit::Matrices => {
            if common.format != Format::Tsv {
                return Err(Error::Precondition("--emit matrices needs --format tsv".into()));
            }
            match &common.out {
                Some(dir) => {
                    fs::create_dir_all(dir)?;
                    for m in &matrices {
                        fs::write(dir.join(format!("{}.tsv", m.metric_id())), io::write_matrix_tsv(m))?;
                    }
                    Ok(())
                }
                None => {
                    for m in &matrices {
                        print!("# {}\n{}", m.metric_id(), io::write_matrix_tsv(m));
                    }
                    Ok(())
                }
            }
        }
        Emit::Pipeline => {
            reject_tsv(common, "the padic pipeline")?;
            let (text, _) = hypergraph_output(common, &trees_of(&matrices))?;
            emit(common, &text)
        }
    }
}

fn run_phylo(common: &Common, args: &PhyloArgs) -> Result<()> {
    reject_tsv(common, "phylo")?;
    let mut table = io::read_marker_csv(&read(&args.table)?)?;
    if let Some(k) = &args.kernel {
        io::apply_kernel_tsv(&mut table, &read(k)?)?;
    }
    let grid: Vec<WeightVector> = match &args.grid {
        Some(g) => io::read_grid_json(&read(g)?)?,
        None => {
            let eps = parse_rational(&args.epsilon)?;
            phylo::default_grid(table.markers().len(), &eps, args.with_uniform)?
        }
    };
    let sweep = phylo::weight_sweep(&table, &grid, execution(common))?;
    for (w, reason) in &sweep.skipped {
        eprintln!("warning: skipped {}: {reason}", w.label());
    }
    let trees = phylo::sweep_trees(&sweep);
    let (text, hypergraph) = hypergraph_output(common, &trees)?;
    let text = match common.format {
        Format::Dot => text,
        _ => pretty(&json!({
            "schema_version": io::SCHEMA_VERSION,
            "kind": "phylo_run",
            "sweep": io::sweep_to_json(&sweep),
            "hypergraph": hypergraph,
        })),
    };
    emit(common, &text)
}

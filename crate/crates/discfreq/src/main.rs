//! Command-line front end: generators, exact oracles, partitioning, the
//! local oracle, and the estimator wired into reproducible experiments.
//! All JSON output is UTF-8 with sorted keys and a `schema_version` field;
//! every subcommand is deterministic given `--seed`.

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use discfreq::disc::exact_frequency_vector;
use discfreq::estimator::{self, EstimateParams};
use discfreq::generate::{self, Family};
use discfreq::graph::{load_graph_file, save_graph, Graph, GraphError};
use discfreq::local_oracle::{query_cost_profile, GlobalPartitionOracle, OracleConfig, OracleSession};
use discfreq::partition::{global_partition, verify_partition, PartitionParams};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "discfreq", version, about = "Sublinear k-disc frequency estimation on bounded-degree graphs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a benchmark graph in the text format.
    Gen(GenArgs),
    /// Exact k-disc frequency vector of a graph file.
    Exact(ExactArgs),
    /// Run the global greedy decomposition and report parts, cut and checks.
    Partition(PartitionArgs),
    /// Sample-based frequency estimation via the partition oracle.
    Estimate(EstimateArgs),
    /// Per-query cost statistics of the local oracle over graph sizes.
    OracleProfile(ProfileArgs),
    /// Decompose and verify; nonzero exit with a reason on any failed check.
    Verify(PartitionArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct CommonArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    family: Family,
    /// Vertex count (triangle count for the triangles family).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    w: Option<usize>,
    #[arg(long)]
    h: Option<usize>,
    /// Degree bound; defaults to the family's natural bound.
    #[arg(long)]
    d_max: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExactArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(short, long)]
    k: usize,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct PartitionArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    phi: f64,
    #[arg(long)]
    rho: usize,
    #[arg(long, default_value_t = 1)]
    retries: usize,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OracleKind {
    Local,
    Global,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    epsilon: f64,
    #[arg(short, long)]
    k: usize,
    /// Decomposition threshold; defaults to epsilon / (2 B(d,k)).
    #[arg(long)]
    phi: Option<f64>,
    #[arg(long)]
    rho: Option<usize>,
    /// Family whose default part-size cap supplies rho when --rho is absent.
    #[arg(long)]
    family: Option<Family>,
    /// Fixed sample size, skipping the pilot.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    failure_budget: f64,
    #[arg(long, value_enum, default_value_t = OracleKind::Local)]
    oracle: OracleKind,
    /// Also compute the exact vector and report the realized l1 errors.
    #[arg(long)]
    evaluate: bool,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct ProfileArgs {
    /// Comma-separated square-grid vertex counts, e.g. 1024,4096,16384.
    #[arg(long, required = true, value_delimiter = ',')]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 0.5)]
    phi: f64,
    #[arg(long, default_value_t = 16)]
    rho: usize,
    /// Comma-separated seeds, one profiling run per (seed, size) cell.
    #[arg(long, default_value = "0", value_delimiter = ',')]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = 32)]
    queries: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            let reason = json!({
                "schema_version": SCHEMA_VERSION,
                "error": err.to_string(),
            });
            eprintln!("{reason}");
            ExitCode::FAILURE
        }
    }
}

type CliError = Box<dyn std::error::Error>;

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.cmd {
        Cmd::Gen(args) => cmd_gen(args),
        Cmd::Exact(args) => cmd_exact(args),
        Cmd::Partition(args) => cmd_partition(args, false),
        Cmd::Verify(args) => cmd_partition(args, true),
        Cmd::Estimate(args) => cmd_estimate(args),
        Cmd::OracleProfile(args) => cmd_oracle_profile(args),
    }
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, content)?,
        None => {
            let stdout = std::io::stdout();
            writeln!(stdout.lock(), "{}", content.trim_end())?;
        }
    }
    Ok(())
}

/// Serializes with sorted keys and a schema_version injected at top level.
fn to_sorted_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut v = serde_json::to_value(value)?;
    if let serde_json::Value::Object(map) = &mut v {
        map.insert("schema_version".into(), json!(SCHEMA_VERSION));
    }
    Ok(serde_json::to_string_pretty(&v)?)
}

fn build_family(args: &GenArgs) -> Result<Graph, GraphError> {
    let need_n = || {
        args.n
            .ok_or_else(|| GraphError::InvalidParams("--n is required for this family".into()))
    };
    match args.family {
        Family::Grid => {
            let (w, h) = match (args.w, args.h) {
                (Some(w), Some(h)) => (w, h),
                _ => return Err(GraphError::InvalidParams("grid needs --w and --h".into())),
            };
            generate::grid(w, h, args.d_max.unwrap_or(4))
        }
        Family::Path => generate::path(need_n()?, args.d_max.unwrap_or(2)),
        Family::Cycle => generate::cycle(need_n()?, args.d_max.unwrap_or(2)),
        Family::CompleteCapped => {
            let n = need_n()?;
            generate::complete(n, args.d_max.unwrap_or(n.saturating_sub(1)))
        }
        Family::DisjointTriangles => generate::disjoint_triangles(need_n()?, args.d_max.unwrap_or(2)),
        Family::BinaryTree => generate::binary_tree(need_n()?, args.d_max.unwrap_or(3)),
    }
}

fn cmd_gen(args: GenArgs) -> Result<ExitCode, CliError> {
    let g = build_family(&args)?;
    let mut buf = Vec::new();
    save_graph(&g, &mut buf)?;
    emit(&args.out, std::str::from_utf8(&buf)?)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_exact(args: ExactArgs) -> Result<ExitCode, CliError> {
    let g = load_graph_file(&args.graph)?;
    let vector = exact_frequency_vector(&g, args.k)?;
    #[derive(Serialize)]
    struct ExactOut {
        k: usize,
        n: usize,
        type_count: usize,
        frequency_vector: discfreq::FrequencyVector,
    }
    let out = ExactOut {
        k: args.k,
        n: g.vertex_count(),
        type_count: vector.type_count(),
        frequency_vector: vector,
    };
    emit(&args.common.out, &to_sorted_json(&out)?)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_partition(args: PartitionArgs, verify_only: bool) -> Result<ExitCode, CliError> {
    let g = load_graph_file(&args.graph)?;
    let params = PartitionParams::new(args.phi, args.rho)?;
    let run = global_partition(&g, &params, args.common.seed, args.retries);
    let report = verify_partition(&g, &run.partition, &params);

    #[derive(Serialize)]
    struct PartitionOut {
        seed: u64,
        phi: f64,
        rho: usize,
        n: usize,
        part_count: usize,
        part_sizes: Vec<usize>,
        parts: Vec<Vec<u32>>,
        cut_edge_count: usize,
        cut_fraction: f64,
        verification: discfreq::partition::VerificationReport,
    }
    let out = PartitionOut {
        seed: args.common.seed,
        phi: args.phi,
        rho: args.rho,
        n: g.vertex_count(),
        part_count: run.partition.parts().len(),
        part_sizes: run.partition.parts().iter().map(|p| p.len()).collect(),
        parts: if verify_only {
            Vec::new()
        } else {
            run.partition
                .parts()
                .iter()
                .map(|p| p.members().iter().map(|v| v.raw()).collect())
                .collect()
        },
        cut_edge_count: run.cut.cut_edge_count,
        cut_fraction: run.cut.cut_fraction,
        verification: report,
    };
    let passed = out.verification.all_passed();
    emit(&args.common.out, &to_sorted_json(&out)?)?;
    if passed {
        Ok(ExitCode::SUCCESS)
    } else {
        let reason = json!({
            "schema_version": SCHEMA_VERSION,
            "error": "partition verification failed",
            "failed_checks": out
                .verification
                .checks
                .iter()
                .filter(|c| !c.passed)
                .map(|c| c.name)
                .collect::<Vec<_>>(),
        });
        eprintln!("{reason}");
        Ok(ExitCode::from(2))
    }
}

fn cmd_estimate(args: EstimateArgs) -> Result<ExitCode, CliError> {
    let g = load_graph_file(&args.graph)?;
    let d = g.degree_bound().max(1);
    let phi = match args.phi {
        Some(p) => p,
        None => estimator::choose_phi(args.epsilon, d, args.k),
    };
    let rho = match (args.rho, args.family) {
        (Some(r), _) => r,
        (None, Some(family)) => generate::default_rho(family, phi)?,
        (None, None) => {
            return Err(GraphError::InvalidParams(
                "estimate needs --rho or --family to derive the part-size cap".into(),
            )
            .into())
        }
    };
    let pparams = PartitionParams::new(phi, rho)?;
    let mut eparams = EstimateParams::new(args.epsilon, args.k);
    eparams.sample_size_override = args.samples;
    eparams.failure_budget = args.failure_budget;

    let report = match args.oracle {
        OracleKind::Local => {
            let cfg = OracleConfig::new(pparams, args.common.seed, d);
            let session = OracleSession::new(&g, cfg);
            estimator::estimate(&g, &eparams, &session, phi, rho, args.common.seed)?
        }
        OracleKind::Global => {
            let run = global_partition(&g, &pparams, args.common.seed, 1);
            let oracle = GlobalPartitionOracle::new(&run.partition);
            estimator::estimate(&g, &eparams, &oracle, phi, rho, args.common.seed)?
        }
    };

    let evaluation = if args.evaluate {
        Some(estimator::evaluate(&g, &report, args.k)?)
    } else {
        None
    };

    #[derive(Serialize)]
    struct EstimateOut {
        #[serde(flatten)]
        report: estimator::EstimateReport,
        #[serde(skip_serializing_if = "Option::is_none")]
        evaluation: Option<estimator::Evaluation>,
    }
    let out = EstimateOut { report, evaluation };
    emit(&args.common.out, &to_sorted_json(&out)?)?;
    match &out.evaluation {
        Some(eval) if !eval.passed => Ok(ExitCode::from(2)),
        _ => Ok(ExitCode::SUCCESS),
    }
}

fn cmd_oracle_profile(args: ProfileArgs) -> Result<ExitCode, CliError> {
    let params = PartitionParams::new(args.phi, args.rho)?;
    let mut csv = String::from("seed,size,queries,min,median,max,mean\n");
    for &seed in &args.seeds {
        for &size in &args.sizes {
            let side = (size as f64).sqrt().round() as usize;
            if side * side != size {
                return Err(GraphError::InvalidParams(format!(
                    "size {size} is not a square grid vertex count"
                ))
                .into());
            }
            let g = generate::grid(side, side, 4)?;
            let cfg = OracleConfig::new(params, seed, g.degree_bound());
            let profile = query_cost_profile(&g, cfg, args.queries, seed)?;
            csv.push_str(&format!(
                "{seed},{size},{},{},{},{},{:.3}\n",
                args.queries, profile.min, profile.median, profile.max, profile.mean
            ));
        }
    }
    emit(&args.out, &csv)?;
    Ok(ExitCode::SUCCESS)
}

//! `gridohm`: effective resistance queries, error maps, cache benchmarks,
//! netlist export and the built-in self test.
//!
//! Exit codes: 0 success, 1 self-test failure, 2 invalid arguments,
//! 3 solver or quadrature failure, 4 unwritable output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use gridohm::bench::run_bench;
use gridohm::report::{error_map, evaluate};
use gridohm::selftest::{self, SelftestOptions};
use gridohm::{emit_netlist, CorrectionCache, GridSpec, HybridConfig, Method, NodeCoord, EULER_GAMMA};

#[derive(Debug)]
enum CliError {
    Invalid(String),
    Solver(String),
    Output(String),
    SelftestFailed(usize),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::SelftestFailed(_) => 1,
            CliError::Invalid(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Output(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Invalid(m) => write!(f, "invalid arguments: {m}"),
            CliError::Solver(m) => write!(f, "solver failure: {m}"),
            CliError::Output(m) => write!(f, "cannot write output: {m}"),
            CliError::SelftestFailed(n) => write!(f, "{n} self-test check(s) failed"),
        }
    }
}

impl From<gridohm::Error> for CliError {
    fn from(e: gridohm::Error) -> Self {
        use gridohm::Error as E;
        match e {
            E::Domain(_) | E::InvalidGrid(_) | E::InvalidNode { .. } => CliError::Invalid(e.to_string()),
            E::QuadratureNonConvergence { .. } | E::DegenerateTheta(_) | E::SolverFailure(_) => {
                CliError::Solver(e.to_string())
            }
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(name = "gridohm", version, about = "Effective resistance of anisotropic 2D resistor grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Resistance between two nodes, printed as JSON.
    Resistance(ResistanceArgs),
    /// Per-node relative error against the Laplacian oracle, written as CSV.
    Errormap(ErrormapArgs),
    /// Random hybrid queries with latency and cache statistics.
    Bench(BenchArgs),
    /// SPICE netlist measuring the resistance between two nodes.
    Netlist(NetlistArgs),
    /// Runs the built-in invariant checks.
    Selftest(SelftestArgs),
}

/// Grid geometry and unit resistances. `--alpha` alone implies `r_v = 1`,
/// `r_h = alpha`.
#[derive(Args, Debug, Clone)]
struct GridArgs {
    #[arg(long)]
    lx: usize,
    #[arg(long)]
    ly: usize,
    /// Horizontal unit resistance in ohms.
    #[arg(long)]
    rh: Option<f64>,
    /// Vertical unit resistance in ohms.
    #[arg(long)]
    rv: Option<f64>,
    /// Anisotropy r_h / r_v.
    #[arg(long)]
    alpha: Option<f64>,
}

impl GridArgs {
    fn grid(&self) -> CliResult<GridSpec> {
        let (rh, rv) = match (self.alpha, self.rh, self.rv) {
            (Some(alpha), None, None) => (alpha, 1.0),
            (alpha, rh, rv) => {
                let (rh, rv) = (rh.unwrap_or(1.0), rv.unwrap_or(1.0));
                if let Some(alpha) = alpha {
                    if !((rh / rv - alpha).abs() <= 1e-12 * alpha.abs()) {
                        return Err(CliError::Invalid(format!(
                            "--alpha {alpha} is inconsistent with --rh {rh} / --rv {rv}"
                        )));
                    }
                }
                (rh, rv)
            }
        };
        Ok(GridSpec::new(self.lx, self.ly, rh, rv)?)
    }
}

fn parse_node(s: &str) -> Result<NodeCoord, String> {
    let (x, y) = s.split_once(',').ok_or_else(|| format!("expected x,y, got {s:?}"))?;
    let coord = |v: &str| v.trim().parse::<i64>().map_err(|e| format!("bad coordinate {v:?}: {e}"));
    Ok(NodeCoord::new(coord(x)?, coord(y)?))
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum MethodArg {
    Theta,
    Hybrid,
    Oracle,
    AnalyticInfinite,
    ExactInfinite,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Theta => Method::Theta,
            MethodArg::Hybrid => Method::Hybrid,
            MethodArg::Oracle => Method::Oracle,
            MethodArg::AnalyticInfinite => Method::AnalyticInfinite,
            MethodArg::ExactInfinite => Method::ExactInfinite,
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum MapMethodArg {
    Theta,
    Hybrid,
}

#[derive(Args)]
struct ResistanceArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, value_parser = parse_node)]
    src: NodeCoord,
    #[arg(long, value_parser = parse_node)]
    dst: NodeCoord,
    #[arg(long, value_enum, default_value = "hybrid")]
    method: MethodArg,
}

#[derive(Args)]
struct ErrormapArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, value_parser = parse_node, default_value = "0,0")]
    src: NodeCoord,
    #[arg(long, value_enum, default_value = "hybrid")]
    method: MapMethodArg,
    /// CSV destination.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; 1 runs serially. Defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 1000)]
    queries: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    cache_capacity: usize,
    /// Optional CSV of every query and its resistance.
    #[arg(long)]
    values_out: Option<PathBuf>,
}

#[derive(Args)]
struct NetlistArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, value_parser = parse_node)]
    src: NodeCoord,
    #[arg(long, value_parser = parse_node)]
    dst: NodeCoord,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SelftestArgs {
    /// Skip the 50x50 oracle sweeps.
    #[arg(long)]
    fast: bool,
    /// Perturbs the Euler-Mascheroni constant; the run must then fail.
    #[arg(long, hide = true)]
    mutate_gamma: bool,
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}

fn print_json<T: Serialize>(value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn cmd_resistance(args: ResistanceArgs) -> CliResult<()> {
    let grid = args.grid.grid()?;
    let cache = CorrectionCache::default();
    let start = Instant::now();
    let result = evaluate(args.method.into(), args.src, args.dst, &grid, &cache, &HybridConfig::default())?;
    print_json(&json!({
        "resistance_ohms": result.resistance_ohms,
        "method": result.method,
        "corrections_applied": result.corrections_applied,
        "wall_time_ms": start.elapsed().as_secs_f64() * 1e3,
        "cache": result.cache,
    }))
}

fn cmd_errormap(args: ErrormapArgs) -> CliResult<()> {
    let grid = args.grid.grid()?;
    grid.check(args.src)?;
    let method = match args.method {
        MapMethodArg::Theta => Method::Theta,
        MapMethodArg::Hybrid => Method::Hybrid,
    };
    let mut out = create(&args.out)?;
    let cache = CorrectionCache::default();
    let cfg = HybridConfig::default();
    let report = match args.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| CliError::Invalid(e.to_string()))?
            .install(|| error_map(&grid, args.src, method, &cache, &cfg)),
        None => error_map(&grid, args.src, method, &cache, &cfg),
    }?;

    let write_err = |e: std::io::Error| CliError::Output(format!("{}: {e}", args.out.display()));
    {
        let mut csv = csv::Writer::from_writer(&mut out);
        let csv_err = |e: csv::Error| CliError::Output(format!("{}: {e}", args.out.display()));
        csv.write_record(["x", "y", "r_method", "r_oracle", "rel_error_percent"]).map_err(csv_err)?;
        for e in &report.per_node {
            csv.write_record([
                e.x.to_string(),
                e.y.to_string(),
                e.r_method.to_string(),
                e.r_oracle.to_string(),
                (100.0 * e.rel_error).to_string(),
            ])
            .map_err(csv_err)?;
        }
        csv.flush().map_err(write_err)?;
    }
    out.flush().map_err(write_err)?;

    print_json(&json!({
        "grid": report.grid,
        "source": report.source,
        "method": report.method,
        "nodes": report.per_node.len(),
        "mean_rel_error": report.mean_rel_error,
        "max_rel_error": report.max_rel_error,
        "max_error_node": report.max_error_node,
        "max_on_axis_rel_error": report.max_on_axis_rel_error,
        "max_off_axis_rel_error": report.max_off_axis_rel_error,
        "cache": report.cache,
        "wall_time_ms": report.wall_time_ms,
        "out": args.out,
    }))
}

fn cmd_bench(args: BenchArgs) -> CliResult<()> {
    let grid = args.grid.grid()?;
    if args.cache_capacity == 0 {
        return Err(CliError::Invalid("--cache-capacity must be at least 1".into()));
    }
    let mut values_out = args.values_out.as_deref().map(create).transpose()?;
    let cfg = HybridConfig {
        cache_capacity: args.cache_capacity,
        ..Default::default()
    };
    let report = run_bench(&grid, args.queries, args.seed, &cfg)?;
    if let (Some(out), Some(path)) = (values_out.as_mut(), args.values_out.as_deref()) {
        let write_err = |e: std::io::Error| CliError::Output(format!("{}: {e}", path.display()));
        writeln!(out, "sx,sy,dx,dy,resistance_ohms").map_err(write_err)?;
        for q in &report.results {
            writeln!(
                out,
                "{},{},{},{},{}",
                q.source.x, q.source.y, q.target.x, q.target.y, q.resistance_ohms
            )
            .map_err(write_err)?;
        }
        out.flush().map_err(write_err)?;
    }
    print_json(&report)
}

fn cmd_netlist(args: NetlistArgs) -> CliResult<()> {
    let grid = args.grid.grid()?;
    let text = emit_netlist(&grid, args.src, args.dst)?;
    let mut out = create(&args.out)?;
    let write_err = |e: std::io::Error| CliError::Output(format!("{}: {e}", args.out.display()));
    out.write_all(text.as_bytes()).map_err(write_err)?;
    out.flush().map_err(write_err)?;
    print_json(&json!({
        "out": args.out,
        "resistor_cards": grid.edge_count(),
    }))
}

fn cmd_selftest(args: SelftestArgs) -> CliResult<()> {
    let opts = SelftestOptions {
        fast: args.fast,
        euler_gamma: if args.mutate_gamma { EULER_GAMMA * (1.0 + 1e-3) } else { EULER_GAMMA },
    };
    let start = Instant::now();
    let checks = selftest::run(&opts);
    for c in &checks {
        println!("{} {:<32} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!(
        "{} of {} checks passed in {:.1} s",
        checks.len() - failed,
        checks.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::SelftestFailed(failed))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Resistance(a) => cmd_resistance(a),
        Command::Errormap(a) => cmd_errormap(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Netlist(a) => cmd_netlist(a),
        Command::Selftest(a) => cmd_selftest(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gridohm: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

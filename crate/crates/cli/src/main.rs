//! `pgo`: generate synthetic pose graphs, solve them, score estimates and
//! run size sweeps.

mod bench;
mod manifest;

use clap::{Args, Parser, Subcommand, ValueEnum};
use manifest::RunManifest;
use pgo_core::solver::{auto_beta, odometry_init};
use pgo_core::{
    chordal_init, estimate_lipschitz, evaluate, gen_cube, gen_ring, parse_g2o, solve, write_g2o_string, CubeSpec,
    KappaMode, NoiseSpec, PgoError, PoseGraph, PoseSet, SolverConfig, Status,
};
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

pub const EXIT_CONVERGED: u8 = 0;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_MAX_ITER: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;

#[derive(Parser)]
#[command(name = "pgo", version, about = "Pose graph optimization with a parallel splitting ADMM")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and its ground truth.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Solve a g2o pose graph.
    Solve(SolveArgs),
    /// Compare an estimate against ground truth.
    Eval(EvalArgs),
    /// Sweep dataset sizes and report accuracy and timing as CSV.
    Bench(bench::BenchArgs),
}

#[derive(Args, Clone)]
pub struct NoiseArgs {
    /// Rotation noise level.
    #[arg(long, default_value_t = 0.01)]
    pub sigma_r: f64,
    /// Translation noise standard deviation.
    #[arg(long, default_value_t = 0.01)]
    pub sigma_t: f64,
    #[arg(long, value_enum, default_value_t = KappaArg::Matched)]
    pub kappa_mode: KappaArg,
    /// Exact measurements.
    #[arg(long)]
    pub noiseless: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl NoiseArgs {
    pub fn spec(&self, seed: u64) -> NoiseSpec {
        NoiseSpec {
            sigma_t: self.sigma_t,
            sigma_r: self.sigma_r,
            kappa_mode: self.kappa_mode.into(),
            seed,
            noiseless: self.noiseless,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum KappaArg {
    Matched,
    PaperLiteral,
}

impl From<KappaArg> for KappaMode {
    fn from(k: KappaArg) -> Self {
        match k {
            KappaArg::Matched => KappaMode::Matched,
            KappaArg::PaperLiteral => KappaMode::PaperLiteral,
        }
    }
}

#[derive(Subcommand)]
enum GenKind {
    Ring {
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[command(flatten)]
        noise: NoiseArgs,
        /// Output prefix; writes PREFIX.g2o and PREFIX.truth.g2o.
        #[arg(long)]
        out: PathBuf,
    },
    Cube {
        #[arg(long, default_value_t = 7)]
        nhat: usize,
        /// Loop-closure probability.
        #[arg(long, default_value_t = 0.3)]
        p: f64,
        #[command(flatten)]
        noise: NoiseArgs,
        /// Divide sigma-t by nhat.
        #[arg(long)]
        relative_sigma_t: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Clone)]
pub struct SolveArgs {
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// `chordal`, `odometry`, `file` (vertex records of the input) or a g2o path.
    #[arg(long, default_value = "chordal")]
    pub init: String,
    /// Penalty for both splitting constraints, or `auto`.
    #[arg(long, default_value = "1")]
    pub beta: String,
    /// Separate penalty on the translation constraint.
    #[arg(long)]
    pub beta2: Option<f64>,
    #[arg(long, default_value_t = 1.4)]
    pub tau: f64,
    #[arg(long, default_value_t = 1.0)]
    pub h1: f64,
    /// Proximal weight for the q, t and s blocks.
    #[arg(long, default_value_t = 1e-3)]
    pub h: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, default_value_t = 300)]
    pub max_iter: usize,
    #[arg(long, env = "PGO_THREADS", default_value_t = 0)]
    pub threads: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Weight residuals by the mean information of the input edges.
    #[arg(long)]
    pub use_info: bool,
    /// Weight on the scalar part of the translation residual.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Write 0 in the trace's ms column so traces compare byte for byte.
    #[arg(long)]
    pub no_timing: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Rerun the configuration recorded in a manifest.
    #[arg(long, conflicts_with = "input")]
    pub replay: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    est: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// Measurement graph; adds the edge losses.
    #[arg(long)]
    graph: Option<PathBuf>,
}

/// Error with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub msg: String,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError { code: EXIT_USAGE, msg: msg.into() }
    }
}

impl From<PgoError> for CliError {
    fn from(e: PgoError) -> Self {
        let code = match e {
            PgoError::Numerical { .. } | PgoError::NoRealEigenvalue { .. } | PgoError::Degenerate(_) => EXIT_NUMERICAL,
            _ => EXIT_USAGE,
        };
        CliError { code, msg: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::usage(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

pub fn read_g2o(path: &Path) -> CliResult<(PoseGraph, Option<PoseSet>)> {
    let file = File::open(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    let data = parse_g2o(BufReader::new(file)).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    for w in &data.warnings {
        eprintln!("warning: {}: {w}", path.display());
    }
    Ok((data.graph, data.poses))
}

fn write_pair(prefix: &Path, graph: &PoseGraph, truth: &PoseSet) -> CliResult<()> {
    let start = odometry_init(graph)?;
    let base = prefix.as_os_str().to_owned();
    let mut g = base.clone();
    g.push(".g2o");
    let mut t = base;
    t.push(".truth.g2o");
    std::fs::write(&g, write_g2o_string(graph, &start)?)?;
    std::fs::write(&t, write_g2o_string(graph, truth)?)?;
    eprintln!("wrote {} and {} (n={}, m={})", Path::new(&g).display(), Path::new(&t).display(), graph.n(), graph.m());
    Ok(())
}

fn cmd_gen(kind: GenKind) -> CliResult<u8> {
    match kind {
        GenKind::Ring { n, noise, out } => {
            let (truth, graph) = gen_ring(n, &noise.spec(noise.seed))?;
            write_pair(&out, &graph, &truth)?;
        }
        GenKind::Cube { nhat, p, mut noise, relative_sigma_t, out } => {
            if relative_sigma_t && nhat > 0 {
                noise.sigma_t /= nhat as f64;
            }
            let (truth, graph) = gen_cube(&CubeSpec { n_hat: nhat, p_cube: p }, &noise.spec(noise.seed))?;
            write_pair(&out, &graph, &truth)?;
        }
    }
    Ok(EXIT_CONVERGED)
}

/// Resolved solver settings for one run.
pub fn build_config(args: &SolveArgs, graph: &PoseGraph) -> CliResult<(SolverConfig, bool)> {
    let mut cfg = SolverConfig {
        tau: args.tau,
        h1: args.h1,
        h2: args.h,
        h3: args.h,
        h4: args.h,
        tol: args.tol,
        max_iter: args.max_iter,
        threads: args.threads,
        seed: args.seed,
        record_time: !args.no_timing,
        ..SolverConfig::default()
    };
    cfg.sigma1 = SolverConfig::sigma1_from(args.c, 1.0);
    if args.use_info && !cfg.use_information_weights(graph, args.c) {
        eprintln!("warning: input carries no information matrices, using unit weights");
    }
    let auto = args.beta.trim().eq_ignore_ascii_case("auto");
    let beta = if auto {
        auto_beta(&estimate_lipschitz(graph, &cfg))
    } else {
        args.beta.parse::<f64>().map_err(|_| CliError::usage(format!("--beta expects a number or `auto`, got `{}`", args.beta)))?
    };
    cfg.beta1 = beta;
    cfg.beta2 = args.beta2.unwrap_or(beta);
    cfg.validate()?;
    Ok((cfg, auto))
}

fn initial_poses(args: &SolveArgs, graph: &PoseGraph, file_poses: Option<PoseSet>) -> CliResult<PoseSet> {
    match args.init.as_str() {
        "chordal" => Ok(chordal_init(graph)?),
        "odometry" => Ok(odometry_init(graph)?),
        "file" => file_poses.ok_or_else(|| CliError::usage("--init file: input has no vertex records")),
        path => {
            let (_, poses) = read_g2o(Path::new(path))?;
            poses.ok_or_else(|| CliError::usage(format!("{path}: no vertex records")))
        }
    }
}

fn cmd_solve(mut args: SolveArgs) -> CliResult<u8> {
    if let Some(path) = args.replay.clone() {
        let text = std::fs::read_to_string(&path)?;
        let m: RunManifest = serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        args = m.to_args(&args);
    }
    let input = args.input.clone().ok_or_else(|| CliError::usage("missing --in"))?;
    let (graph, file_poses) = read_g2o(&input)?;
    let (cfg, auto) = build_config(&args, &graph)?;
    let init = initial_poses(&args, &graph, file_poses)?;

    let clock = Instant::now();
    let out = solve(&graph, &cfg, Some(&init)).map_err(|e| {
        if let PgoError::Numerical { vertex, .. } = &e {
            let id = graph.vertex_ids().get(*vertex).copied().unwrap_or(*vertex as i64);
            eprintln!("numerical failure at vertex id {id}");
        }
        CliError::from(e)
    })?;
    let wall_ms = clock.elapsed().as_secs_f64() * 1e3;

    if let Some(path) = &args.out {
        std::fs::write(path, write_g2o_string(&graph, &out.poses)?)?;
    }
    if let Some(path) = &args.trace {
        std::fs::write(path, out.trace.to_csv())?;
    }
    if let Some(path) = &args.manifest {
        let m = RunManifest::new(&args, &input, &cfg, auto, &out, wall_ms);
        std::fs::write(path, serde_json::to_string_pretty(&m).expect("manifest serializes") + "\n")?;
    }
    eprintln!(
        "{:?} after {} iterations, e = {:.3e}, beta = {}, {:.1} ms",
        out.status,
        out.iterations(),
        out.final_residual(),
        cfg.beta1,
        wall_ms
    );
    Ok(match out.status {
        Status::Converged => EXIT_CONVERGED,
        Status::MaxIter => EXIT_MAX_ITER,
    })
}

fn cmd_eval(args: EvalArgs) -> CliResult<u8> {
    let (_, est) = read_g2o(&args.est)?;
    let (_, truth) = read_g2o(&args.truth)?;
    let est = est.ok_or_else(|| CliError::usage(format!("{}: no vertex records", args.est.display())))?;
    let truth = truth.ok_or_else(|| CliError::usage(format!("{}: no vertex records", args.truth.display())))?;
    let graph = args.graph.as_deref().map(read_g2o).transpose()?.map(|(g, _)| g);
    let report = evaluate(&est, &truth, graph.as_ref())?;
    println!("{}", serde_json::to_string(&report).expect("report serializes"));
    Ok(EXIT_CONVERGED)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Command::Gen { kind } => cmd_gen(kind),
        Command::Solve(args) => cmd_solve(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Bench(args) => bench::run(args),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.msg);
            ExitCode::from(e.code)
        }
    }
}

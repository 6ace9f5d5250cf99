//! Size sweeps over synthetic datasets.

use crate::{CliError, NoiseArgs, EXIT_CONVERGED};
use clap::{Args, ValueEnum};
use pgo_core::{evaluate, gen_cube, gen_ring, solve, CubeSpec, SolverConfig};
use std::fmt::Write as _;
use std::path::PathBuf;

#[derive(Clone, Copy, ValueEnum)]
pub enum Suite {
    Ring,
    Cube,
}

#[derive(Args)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value_t = Suite::Cube)]
    suite: Suite,
    /// Ring vertex counts or cube side lengths.
    #[arg(long, value_delimiter = ',', default_values_t = [3usize, 4, 5, 6, 7, 8])]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, env = "PGO_THREADS", default_value_t = 0)]
    threads: usize,
    /// Loop-closure probability for the cube suite.
    #[arg(long, default_value_t = 0.3)]
    p: f64,
    #[command(flatten)]
    noise: NoiseArgs,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 300)]
    max_iter: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub const HEADER: &str = "size,repeat,n,m,iters,time_ms,ms_per_iter,rel_err,nrmse";

struct Row {
    n: usize,
    m: usize,
    iters: usize,
    time_ms: f64,
    rel_err: f64,
    nrmse: f64,
}

impl Row {
    fn ms_per_iter(&self) -> f64 {
        self.time_ms / self.iters.max(1) as f64
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

pub fn run(args: BenchArgs) -> Result<u8, CliError> {
    if args.repeats == 0 {
        return Err(CliError::usage("--repeats must be positive"));
    }
    let cfg = SolverConfig {
        tol: args.tol,
        max_iter: args.max_iter,
        threads: args.threads,
        ..SolverConfig::default()
    }
    .with_beta(args.beta);
    cfg.validate()?;

    let mut rows: Vec<(usize, Vec<Row>)> = Vec::new();
    for &size in &args.sizes {
        let mut reps = Vec::new();
        for r in 0..args.repeats {
            let noise = args.noise.spec(args.noise.seed.wrapping_add(r as u64));
            let (truth, graph) = match args.suite {
                Suite::Ring => gen_ring(size, &noise)?,
                Suite::Cube => gen_cube(&CubeSpec { n_hat: size, p_cube: args.p }, &noise)?,
            };
            let out = solve(&graph, &cfg, None)?;
            let report = evaluate(&out.poses, &truth, None)?;
            let time_ms = out.trace.records.iter().map(|x| x.ms).sum();
            reps.push(Row { n: graph.n(), m: graph.m(), iters: out.iterations(), time_ms, rel_err: report.rel_err, nrmse: report.nrmse });
        }
        rows.push((size, reps));
    }

    let mut csv = String::from(HEADER);
    csv.push('\n');
    for (size, reps) in &rows {
        for (r, x) in reps.iter().enumerate() {
            let _ = writeln!(
                csv,
                "{size},{r},{},{},{},{:.3},{:.4},{:.6e},{:.6e}",
                x.n, x.m, x.iters, x.time_ms, x.ms_per_iter(), x.rel_err, x.nrmse
            );
        }
    }
    for (size, reps) in &rows {
        let med = |f: &dyn Fn(&Row) -> f64| median(reps.iter().map(f).collect());
        let _ = writeln!(
            csv,
            "{size},median,{},{},{},{:.3},{:.4},{:.6e},{:.6e}",
            med(&|x| x.n as f64),
            med(&|x| x.m as f64),
            med(&|x| x.iters as f64),
            med(&|x| x.time_ms),
            med(&|x| x.ms_per_iter()),
            med(&|x| x.rel_err),
            med(&|x| x.nrmse)
        );
    }
    match &args.out {
        Some(path) => std::fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(EXIT_CONVERGED)
}

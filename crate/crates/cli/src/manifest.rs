//! JSON record of one solver run, enough to rerun it.

use crate::SolveArgs;
use pgo_core::{SolveOutput, SolverConfig, Status};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Command-line settings as given, before `auto` is resolved.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunArgs {
    pub input: PathBuf,
    pub init: String,
    pub beta: String,
    pub beta2: Option<f64>,
    pub tau: f64,
    pub h1: f64,
    pub h: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub threads: usize,
    pub seed: u64,
    pub use_info: bool,
    pub c: f64,
    pub no_timing: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub args: RunArgs,
    /// Resolved configuration.
    pub config: SolverConfig,
    pub beta_mode: String,
    /// Curvature bounds and penalty thresholds; infinite values appear as null.
    #[serde(default, skip_deserializing)]
    pub estimates: serde_json::Value,
    pub status: Option<Status>,
    pub iterations: usize,
    pub final_e: f64,
    pub wall_ms: f64,
}

impl RunManifest {
    pub fn new(args: &SolveArgs, input: &Path, cfg: &SolverConfig, auto: bool, out: &SolveOutput, wall_ms: f64) -> Self {
        RunManifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            args: RunArgs {
                input: input.to_path_buf(),
                init: args.init.clone(),
                beta: args.beta.clone(),
                beta2: args.beta2,
                tau: args.tau,
                h1: args.h1,
                h: args.h,
                tol: args.tol,
                max_iter: args.max_iter,
                threads: args.threads,
                seed: args.seed,
                use_info: args.use_info,
                c: args.c,
                no_timing: args.no_timing,
            },
            config: cfg.clone(),
            beta_mode: if auto { "auto" } else { "fixed" }.to_string(),
            estimates: serde_json::to_value(out.estimates).unwrap_or_default(),
            status: Some(out.status),
            iterations: out.iterations(),
            final_e: out.final_residual(),
            wall_ms,
        }
    }

    /// Recorded settings, keeping the output paths of `current`.
    pub fn to_args(&self, current: &SolveArgs) -> SolveArgs {
        let a = &self.args;
        SolveArgs {
            input: Some(a.input.clone()),
            init: a.init.clone(),
            beta: a.beta.clone(),
            beta2: a.beta2,
            tau: a.tau,
            h1: a.h1,
            h: a.h,
            tol: a.tol,
            max_iter: a.max_iter,
            threads: a.threads,
            seed: a.seed,
            use_info: a.use_info,
            c: a.c,
            no_timing: a.no_timing,
            replay: None,
            ..current.clone()
        }
    }
}

//! Browser bindings: generate a dataset, solve it and hand flat arrays back
//! to the page.

use pgo_core::{evaluate, gauge_align, gen_cube, gen_ring, sample_vmf_s3, solve, CubeSpec, NoiseSpec, PoseSet, SolverConfig, UnitQuat};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

/// Result of one generate-and-solve run. Positions are flattened `x, y, z`
/// triples, gauge-aligned to the ground truth.
#[wasm_bindgen]
pub struct DemoRun {
    truth: Vec<f64>,
    init: Vec<f64>,
    estimate: Vec<f64>,
    edges: Vec<u32>,
    residuals: Vec<f64>,
    iterations: usize,
    converged: bool,
    rel_err: f64,
    nrmse: f64,
}

#[wasm_bindgen]
impl DemoRun {
    pub fn truth(&self) -> Vec<f64> {
        self.truth.clone()
    }
    pub fn init(&self) -> Vec<f64> {
        self.init.clone()
    }
    pub fn estimate(&self) -> Vec<f64> {
        self.estimate.clone()
    }
    /// Flattened `i, j` vertex pairs.
    pub fn edges(&self) -> Vec<u32> {
        self.edges.clone()
    }
    /// Residual `e` after each iteration.
    pub fn residuals(&self) -> Vec<f64> {
        self.residuals.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn iterations(&self) -> usize {
        self.iterations
    }
    #[wasm_bindgen(getter)]
    pub fn converged(&self) -> bool {
        self.converged
    }
    #[wasm_bindgen(getter)]
    pub fn rel_err(&self) -> f64 {
        self.rel_err
    }
    #[wasm_bindgen(getter)]
    pub fn nrmse(&self) -> f64 {
        self.nrmse
    }
}

fn flat(poses: &PoseSet) -> Vec<f64> {
    poses.translations().flat_map(|t| [t.x, t.y, t.z]).collect()
}

fn run(truth: PoseSet, graph: pgo_core::PoseGraph, beta: f64, max_iter: usize) -> Result<DemoRun, JsError> {
    let cfg = SolverConfig { max_iter, threads: 1, record_time: false, ..SolverConfig::default() }.with_beta(beta);
    let out = solve(&graph, &cfg, None)?;
    let report = evaluate(&out.poses, &truth, None)?;
    Ok(DemoRun {
        truth: flat(&truth),
        init: flat(&gauge_align(&out.init, &truth)?),
        estimate: flat(&gauge_align(&out.poses, &truth)?),
        edges: graph.edges().iter().flat_map(|e| [e.i as u32, e.j as u32]).collect(),
        residuals: out.trace.records.iter().map(|r| r.e).collect(),
        iterations: out.iterations(),
        converged: out.status == pgo_core::Status::Converged,
        rel_err: report.rel_err,
        nrmse: report.nrmse,
    })
}

/// Noisy ring of `n` poses, solved from the chordal start.
#[wasm_bindgen]
pub fn solve_ring(n: usize, sigma_r: f64, sigma_t: f64, seed: u64, beta: f64, max_iter: usize) -> Result<DemoRun, JsError> {
    let (truth, graph) = gen_ring(n, &NoiseSpec::new(sigma_t, sigma_r, seed))?;
    run(truth, graph, beta, max_iter)
}

/// Noisy `n_hat³` grid with random loop closures.
#[wasm_bindgen]
pub fn solve_cube(n_hat: usize, p: f64, sigma_r: f64, sigma_t: f64, seed: u64, beta: f64, max_iter: usize) -> Result<DemoRun, JsError> {
    let (truth, graph) = gen_cube(&CubeSpec { n_hat, p_cube: p }, &NoiseSpec::new(sigma_t, sigma_r, seed))?;
    run(truth, graph, beta, max_iter)
}

/// Rotation angles in degrees of `count` von Mises-Fisher draws around the
/// identity.
#[wasm_bindgen]
pub fn vmf_angles(kappa: f64, count: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let q = sample_vmf_s3(UnitQuat::IDENTITY, kappa, &mut rng);
            2.0 * q.quat().w.abs().min(1.0).acos().to_degrees()
        })
        .collect()
}

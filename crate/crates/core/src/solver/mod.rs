//! The splitting ADMM iteration for pose graph optimization.
//!
//! Rotations are duplicated into a unit block `p` and a free block `q`,
//! translations into `t` and `s`. Each sweep updates the four primal blocks
//! vertex by vertex in closed form and then takes an over-relaxed dual step.

mod blocks;
mod chordal;
mod config;
mod lipschitz;
mod lyapunov;
mod par;

pub use blocks::{
    assemble_p, assemble_q, assemble_s, assemble_t, augmented_lagrangian, constraint_violation, edge_terms,
    objective, residual, step, update_duals, update_p, update_q, update_s, update_t, Iterate,
};
pub use chordal::{chordal_init, odometry_init, project_to_so3};
pub use config::SolverConfig;
pub use lipschitz::{auto_beta, edge_bound_f, edge_bound_g, estimate_lipschitz, relaxation_constants, LipschitzEstimates};
pub use lyapunov::{block_weights, lyapunov_psi};

use crate::error::{PgoError, Result};
use crate::graph::{Pose, PoseGraph, PoseSet};
use crate::quat::{Quat, UnitQuat, Vec4};
use par::Stopwatch;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Converged,
    MaxIter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterRecord {
    pub k: usize,
    pub e: f64,
    pub psi: f64,
    pub viol_pq: f64,
    pub viol_ts: f64,
    pub dlambda: f64,
    pub dz: f64,
    pub ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IterTrace {
    pub records: Vec<IterRecord>,
}

impl IterTrace {
    pub const CSV_HEADER: &'static str = "k,e,psi,viol_pq,viol_ts,dlambda,dz,ms";

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterRecord> {
        self.records.last()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{:e},{:e},{:e},{:e},{:e},{:e},{:.3}\n",
                r.k, r.e, r.psi, r.viol_pq, r.viol_ts, r.dlambda, r.dz, r.ms
            ));
        }
        out
    }
}

/// Current and previous iterates plus the iteration counter.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub x: Iterate,
    pub prev: Iterate,
    pub k: usize,
}

impl SolverState {
    pub fn new(init: &PoseSet) -> Self {
        let rot: Vec<Vec4> = init.rotations().map(|q| q.to_vec4()).collect();
        let tr: Vec<_> = init.translations().collect();
        let x = Iterate::from_poses(&rot, &tr);
        SolverState { prev: x.clone(), x, k: 0 }
    }

    /// `(p̃, t)` as poses.
    pub fn poses(&self) -> PoseSet {
        let poses = self
            .x
            .p
            .iter()
            .zip(&self.x.t)
            .map(|(p, t)| Pose::new(UnitQuat::normalize(Quat::from_vec4(p)).unwrap_or(UnitQuat::IDENTITY), *t))
            .collect();
        PoseSet::new(poses)
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub poses: PoseSet,
    pub trace: IterTrace,
    pub status: Status,
    pub state: SolverState,
    pub estimates: LipschitzEstimates,
    /// The graph as solved, with measurement signs matched to the start.
    pub graph: PoseGraph,
    pub init: PoseSet,
}

impl SolveOutput {
    pub fn iterations(&self) -> usize {
        self.state.k
    }

    pub fn final_residual(&self) -> f64 {
        self.trace.last().map_or(0.0, |r| r.e)
    }
}

/// Flips each measured rotation whose sign disagrees with the initial
/// rotations, so that `⟨qⱼ, qᵢ ⊗ q̃ᵢⱼ⟩ ≥ 0` on every edge. The rotation
/// residual is not invariant to the sign of `q̃ᵢⱼ`, and a flipped
/// measurement would pull its edge toward the antipode.
pub fn align_measurement_signs(graph: &PoseGraph, init: &PoseSet) -> Result<PoseGraph> {
    graph.map_edges(|_, e| {
        let pred = init.poses[e.i].q.compose(e.q);
        let mut out = e.clone();
        if pred.quat().dot(init.poses[e.j].q.quat()) < 0.0 {
            out.q = e.q.neg();
        }
        out
    })
}

/// Runs the iteration from `init`, or from the chordal estimate when absent.
pub fn solve(graph: &PoseGraph, cfg: &SolverConfig, init: Option<&PoseSet>) -> Result<SolveOutput> {
    cfg.validate()?;
    let init = match init {
        Some(p) if p.len() != graph.n() => {
            return Err(PgoError::SizeMismatch(format!("init has {} poses, graph has {} vertices", p.len(), graph.n())))
        }
        Some(p) => p.clone(),
        None => chordal_init(graph)?,
    };
    let graph = align_measurement_signs(graph, &init)?;
    let estimates = estimate_lipschitz(&graph, cfg);
    let mut state = SolverState::new(&init);
    let mut trace = IterTrace::default();
    let mut status = Status::MaxIter;

    par::with_threads(cfg.threads, || -> Result<()> {
        while state.k < cfg.max_iter {
            let clock = Stopwatch::start();
            let next = step(&state.x, &graph, cfg)?;
            let ms = if cfg.record_time { clock.ms() } else { 0.0 };
            let prev = std::mem::replace(&mut state.x, next);
            state.prev = prev;
            state.k += 1;
            let e = residual(&state.x, &state.prev, cfg);
            let psi = lyapunov_psi(&state.x, &state.prev, &graph, cfg, &estimates);
            let (viol_pq, viol_ts) = constraint_violation(&state.x);
            let dlambda = state.x.lambda.iter().zip(&state.prev.lambda).map(|(a, b)| (a - b).norm_squared()).sum::<f64>().sqrt();
            let dz = state.x.z.iter().zip(&state.prev.z).map(|(a, b)| (a - b).norm_squared()).sum::<f64>().sqrt();
            trace.records.push(IterRecord { k: state.k, e, psi, viol_pq, viol_ts, dlambda, dz, ms });
            if !e.is_finite() {
                return Err(PgoError::Numerical { vertex: 0, msg: format!("residual became {e} at iteration {}", state.k) });
            }
            if e < cfg.tol {
                status = Status::Converged;
                break;
            }
        }
        Ok(())
    })?;

    Ok(SolveOutput { poses: state.poses(), trace, status, state, estimates, graph, init })
}

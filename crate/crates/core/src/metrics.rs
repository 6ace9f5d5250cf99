//! Estimate quality against ground truth and against the measurements.

use crate::error::{PgoError, Result};
use crate::graph::{Pose, PoseGraph, PoseSet};
use crate::quat::{dist_angle, rotate};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdgeLosses {
    /// Σθ² over edges, θ the rotation disagreement in degrees.
    pub loss_theta: f64,
    /// Σ(θ/2)².
    pub loss_q: f64,
    /// Σ‖R̂ᵢᵀ(t̂ⱼ − t̂ᵢ) − tᵢⱼ‖².
    pub loss_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub rel_err: f64,
    pub nrmse: f64,
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    pub losses: Option<EdgeLosses>,
}

fn check_len(est: &PoseSet, truth: &PoseSet) -> Result<()> {
    if est.len() != truth.len() {
        return Err(PgoError::SizeMismatch(format!("estimate has {} poses, truth has {}", est.len(), truth.len())));
    }
    Ok(())
}

/// Moves `est` by the rigid transform that maps its pose 0 onto truth pose
/// 0, then picks each quaternion's sign to be nearest the truth.
pub fn gauge_align(est: &PoseSet, truth: &PoseSet) -> Result<PoseSet> {
    check_len(est, truth)?;
    if est.is_empty() {
        return Ok(est.clone());
    }
    let (e0, t0) = (est.poses[0], truth.poses[0]);
    let rot = t0.q.compose(e0.q.conj());
    let poses = est
        .poses
        .iter()
        .zip(&truth.poses)
        .map(|(e, t)| {
            let mut q = rot.compose(e.q);
            if q.quat().dot(t.q.quat()) < 0.0 {
                q = q.neg();
            }
            Pose::new(q, rotate(rot, &(e.t - e0.t)) + t0.t)
        })
        .collect();
    Ok(PoseSet::new(poses))
}

fn stacked_errors(est: &PoseSet, truth: &PoseSet) -> (f64, f64) {
    let mut dq = 0.0;
    let mut dt = 0.0;
    for (e, t) in est.poses.iter().zip(&truth.poses) {
        dq += (e.q.quat() - t.q.quat()).norm_squared();
        dt += (e.t - t.t).norm_squared();
    }
    (dq.sqrt(), dt.sqrt())
}

/// `(‖q̂ − q⁰‖ + ‖t̂ − t⁰‖) / (‖q⁰‖ + ‖t⁰‖)` on aligned inputs.
pub fn rel_err(est: &PoseSet, truth: &PoseSet) -> Result<f64> {
    check_len(est, truth)?;
    let (dq, dt) = stacked_errors(est, truth);
    let nq = truth.poses.iter().map(|p| p.q.quat().norm_squared()).sum::<f64>().sqrt();
    let nt = truth.poses.iter().map(|p| p.t.norm_squared()).sum::<f64>().sqrt();
    let den = nq + nt;
    if den == 0.0 {
        return Err(PgoError::Degenerate("ground truth has zero norm".into()));
    }
    Ok((dq + dt) / den)
}

/// Same numerator as [`rel_err`], divided by the truth translation range
/// over all coordinates times `√n`.
pub fn nrmse(est: &PoseSet, truth: &PoseSet) -> Result<f64> {
    check_len(est, truth)?;
    let coords = truth.poses.iter().flat_map(|p| p.t.iter().copied());
    let (lo, hi) = coords.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| (lo.min(c), hi.max(c)));
    let range = hi - lo;
    if !(range > 0.0) {
        return Err(PgoError::Degenerate("ground truth translations have zero range".into()));
    }
    let (dq, dt) = stacked_errors(est, truth);
    Ok((dq + dt) / (range * (truth.len() as f64).sqrt()))
}

/// Per-edge rotation disagreement in degrees and translation residual.
pub fn edge_errors(est: &PoseSet, graph: &PoseGraph) -> Result<Vec<(f64, f64)>> {
    if est.len() != graph.n() {
        return Err(PgoError::SizeMismatch(format!("estimate has {} poses, graph has {} vertices", est.len(), graph.n())));
    }
    Ok(graph
        .edges()
        .iter()
        .map(|e| {
            let (a, b) = (&est.poses[e.i], &est.poses[e.j]);
            let theta = dist_angle(a.q.conj().compose(b.q), e.q).to_degrees();
            let dt = rotate(a.q.conj(), &(b.t - a.t)) - e.t;
            (theta, dt.norm_squared())
        })
        .collect())
}

pub fn edge_losses(est: &PoseSet, graph: &PoseGraph) -> Result<EdgeLosses> {
    let errs = edge_errors(est, graph)?;
    let loss_theta: f64 = errs.iter().map(|(th, _)| th * th).sum();
    let loss_t = errs.iter().map(|(_, t)| t).sum();
    Ok(EdgeLosses { loss_theta, loss_q: loss_theta / 4.0, loss_t })
}

/// Aligns `est` to `truth` and computes every metric; edge losses only
/// when a graph is given.
pub fn evaluate(est: &PoseSet, truth: &PoseSet, graph: Option<&PoseGraph>) -> Result<EvalReport> {
    let aligned = gauge_align(est, truth)?;
    Ok(EvalReport {
        rel_err: rel_err(&aligned, truth)?,
        nrmse: nrmse(&aligned, truth)?,
        losses: graph.map(|g| edge_losses(est, g)).transpose()?,
    })
}

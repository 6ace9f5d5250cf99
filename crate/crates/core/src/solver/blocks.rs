//! Per-vertex coefficient assembly and the four primal block updates.
//!
//! Every update reads one immutable iterate and returns a fresh array, so
//! the per-vertex solves can run in any order on any number of threads.

use super::config::SolverConfig;
use super::par::par_map_result;
use crate::error::{PgoError, Result};
use crate::graph::PoseGraph;
use crate::quat::{conj_matrix, quat_mul, Mat3, Mat4, Quat, Vec3, Vec4};
use crate::sphereqp::{solve_eig, solve_scalar, SphereQP};

/// The six variable blocks: `p` on the sphere, `q` its unconstrained copy,
/// `t` and `s` the translation copies, and the multipliers `λ`, `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub p: Vec<Vec4>,
    pub q: Vec<Vec4>,
    pub t: Vec<Vec3>,
    pub s: Vec<Vec3>,
    pub lambda: Vec<Vec4>,
    pub z: Vec<Vec3>,
}

impl Iterate {
    /// `p = q` from the rotations, `t = s` from the translations, zero duals.
    pub fn from_poses(rotations: &[Vec4], translations: &[Vec3]) -> Self {
        let n = rotations.len();
        Iterate {
            p: rotations.to_vec(),
            q: rotations.to_vec(),
            t: translations.to_vec(),
            s: translations.to_vec(),
            lambda: vec![Vec4::zeros(); n],
            z: vec![Vec3::zeros(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }
}

const ONE: Vec4 = Vec4::new(1.0, 0.0, 0.0, 0.0);

fn embed(v: &Vec3) -> Vec4 {
    Vec4::new(0.0, v.x, v.y, v.z)
}

fn quat(v: &Vec4) -> Quat {
    Quat::from_vec4(v)
}

/// `q̃ t̃ p̃*` as a 4-vector.
fn sandwich(q: &Vec4, t: &Vec3, p: &Vec4) -> Vec4 {
    quat_mul(quat_mul(quat(q), Quat::pure(t)), quat(p).conj()).to_vec4()
}

fn symmetrize(a: Mat4) -> Mat4 {
    (a + a.transpose()) * 0.5
}

/// Quadratic and linear terms of the p-subproblem at vertex `i`:
/// minimize `½pᵀAp + bᵀp` over the unit sphere.
pub fn assemble_p(i: usize, x: &Iterate, graph: &PoseGraph, cfg: &SolverConfig) -> (Mat4, Vec4) {
    let d = conj_matrix();
    let mut a = Mat4::identity() * (cfg.beta1 + cfg.h1);
    let mut b = -x.q[i] * cfg.beta1 - x.lambda[i] - x.p[i] * cfg.h1;
    let mq = quat(&x.q[i]).m_matrix();
    for &e in graph.out_edges(i) {
        let edge = graph.edge(e);
        let g1 = mq * Quat::pure(&edge.t).m_matrix() * d;
        let g1s = g1.transpose() * cfg.sigma1;
        a += g1s * g1 * 2.0;
        b -= g1s * embed(&(x.t[edge.j] - x.s[i])) * 2.0;
    }
    for &e in graph.in_edges(i) {
        let edge = graph.edge(e);
        let g2 = edge.q.quat().w_matrix() * quat(&x.q[edge.i]).w_matrix() * d;
        let g2s = g2.transpose() * cfg.sigma2;
        a += g2s * g2 * 2.0;
        b -= g2s * ONE * 2.0;
    }
    (symmetrize(a), b)
}

/// The q-subproblem at vertex `i` is `A q = b`.
pub fn assemble_q(i: usize, x: &Iterate, graph: &PoseGraph, cfg: &SolverConfig) -> (Mat4, Vec4) {
    let mut a = Mat4::identity() * (cfg.beta1 + cfg.h2);
    let mut b = x.p[i] * cfg.beta1 - x.lambda[i] + x.q[i] * cfg.h2;
    let wp_t = quat(&x.p[i]).w_matrix().transpose();
    for &e in graph.out_edges(i) {
        let edge = graph.edge(e);
        let g3 = wp_t * Quat::pure(&edge.t).w_matrix();
        let g4 = edge.q.quat().w_matrix() * quat(&x.p[edge.j]).m_matrix().transpose();
        let g3s = g3.transpose() * cfg.sigma1;
        let g4s = g4.transpose() * cfg.sigma2;
        a += (g3s * g3 + g4s * g4) * 2.0;
        b += (g3s * embed(&(x.t[edge.j] - x.s[i])) + g4s * ONE) * 2.0;
    }
    (symmetrize(a), b)
}

/// The t-subproblem at vertex `i` is `A t = b`, coupling through in-edges.
pub fn assemble_t(i: usize, x: &Iterate, graph: &PoseGraph, cfg: &SolverConfig) -> (Mat3, Vec3) {
    let sh = cfg.sigma1_hat();
    let cross = cfg.sigma1_cross();
    let mut a = Mat3::identity() * (cfg.beta2 + cfg.h3);
    let mut b = x.s[i] * cfg.beta2 + x.z[i] + x.t[i] * cfg.h3;
    for &e in graph.in_edges(i) {
        let edge = graph.edge(e);
        let l = edge.i;
        let c = sandwich(&x.q[l], &edge.t, &x.p[l]);
        let cv = Vec3::new(c[1], c[2], c[3]);
        a += sh * 2.0;
        b += sh * (x.s[l] + cv) * 2.0 + cross * (2.0 * c[0]);
    }
    (a, b)
}

/// The s-subproblem at vertex `i` is `A s = b`, coupling through out-edges.
pub fn assemble_s(i: usize, x: &Iterate, graph: &PoseGraph, cfg: &SolverConfig) -> (Mat3, Vec3) {
    let sh = cfg.sigma1_hat();
    let cross = cfg.sigma1_cross();
    let mut a = Mat3::identity() * (cfg.beta2 + cfg.h4);
    let mut b = x.t[i] * cfg.beta2 - x.z[i] + x.s[i] * cfg.h4;
    for &e in graph.out_edges(i) {
        let edge = graph.edge(e);
        let c = sandwich(&x.q[i], &edge.t, &x.p[i]);
        let cv = Vec3::new(c[1], c[2], c[3]);
        a += sh * 2.0;
        b += sh * (x.t[edge.j] - cv) * 2.0 - cross * (2.0 * c[0]);
    }
    (a, b)
}

fn numerical(vertex: usize, msg: &str) -> PgoError {
    PgoError::Numerical { vertex, msg: msg.to_string() }
}

pub fn update_p(x: &Iterate, graph: &PoseGraph, cfg: &SolverConfig) -> Result<Vec<Vec4>> {
    let scalar = cfg.scalar_weights();
    par_map_result(x.len(), |i| {
        let (a, b) = assemble_p(i, x, graph, cfg);
        let sol = if scalar && b.norm() > 0.0 {
            solve_scalar(a.trace() / 4.0, &b)
        } else {
            solve_eig(&SphereQP::new(a, b)).map_err(|e| numerical(i, &e.to_string()))?
        };
        let n = sol.x.norm();
        if !n.is_finite() || n == 0.0 {
            return Err(numerical(i, "p-update produced a non-finite point"));
        }
        Ok(sol.x / n)
    })
}

pub fn update_q(x: &Iterate, graph: &PoseGraph, cfg: &SolverConfig) -> Result<Vec<Vec4>> {
    par_map_result(x.len(), |i| {
        let (a, b) = assemble_q(i, x, graph, cfg);
        a.cholesky().map(|c| c.solve(&b)).filter(|v| v.iter().all(|t| t.is_finite())).ok_or_else(|| numerical(i, "q-block matrix is not positive definite"))
    })
}

pub fn update_t(x: &Iterate, graph: &PoseGraph, cfg: &SolverConfig) -> Result<Vec<Vec3>> {
    par_map_result(x.len(), |i| {
        let (a, b) = assemble_t(i, x, graph, cfg);
        a.cholesky().map(|c| c.solve(&b)).filter(|v| v.iter().all(|t| t.is_finite())).ok_or_else(|| numerical(i, "t-block matrix is not positive definite"))
    })
}

pub fn update_s(x: &Iterate, graph: &PoseGraph, cfg: &SolverConfig) -> Result<Vec<Vec3>> {
    par_map_result(x.len(), |i| {
        let (a, b) = assemble_s(i, x, graph, cfg);
        a.cholesky().map(|c| c.solve(&b)).filter(|v| v.iter().all(|t| t.is_finite())).ok_or_else(|| numerical(i, "s-block matrix is not positive definite"))
    })
}

/// `λ ← λ − τβ₁(p − q)`, `z ← z − τβ₂(t − s)`.
pub fn update_duals(x: &Iterate, cfg: &SolverConfig) -> (Vec<Vec4>, Vec<Vec3>) {
    let lambda = x.lambda.iter().zip(x.p.iter().zip(&x.q)).map(|(l, (p, q))| l - (p - q) * (cfg.tau * cfg.beta1)).collect();
    let z = x.z.iter().zip(x.t.iter().zip(&x.s)).map(|(z, (t, s))| z - (t - s) * (cfg.tau * cfg.beta2)).collect();
    (lambda, z)
}

/// One full sweep p → q → t → s → duals.
pub fn step(x: &Iterate, graph: &PoseGraph, cfg: &SolverConfig) -> Result<Iterate> {
    let mut next = x.clone();
    next.p = update_p(&next, graph, cfg)?;
    next.q = update_q(&next, graph, cfg)?;
    next.t = update_t(&next, graph, cfg)?;
    next.s = update_s(&next, graph, cfg)?;
    let (lambda, z) = update_duals(&next, cfg);
    next.lambda = lambda;
    next.z = z;
    Ok(next)
}

fn sq_diff<const D: usize>(a: &[nalgebra::SVector<f64, D>], b: &[nalgebra::SVector<f64, D>]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).norm_squared()).sum()
}

/// `e = ‖Δλ‖²/β₁ + ‖Δz‖²/β₂ + β₁‖Δq‖² + β₂‖Δt‖²`.
pub fn residual(cur: &Iterate, prev: &Iterate, cfg: &SolverConfig) -> f64 {
    sq_diff(&cur.lambda, &prev.lambda) / cfg.beta1
        + sq_diff(&cur.z, &prev.z) / cfg.beta2
        + cfg.beta1 * sq_diff(&cur.q, &prev.q)
        + cfg.beta2 * sq_diff(&cur.t, &prev.t)
}

/// Translation and rotation residual terms of one edge.
pub fn edge_terms(e: usize, x: &Iterate, graph: &PoseGraph, cfg: &SolverConfig) -> (f64, f64) {
    let edge = graph.edge(e);
    let (i, j) = (edge.i, edge.j);
    let r = embed(&(x.t[j] - x.s[i])) - sandwich(&x.q[i], &edge.t, &x.p[i]);
    let w = quat_mul(quat_mul(quat(&x.p[j]).conj(), quat(&x.q[i])), edge.q.quat()).to_vec4() - ONE;
    (r.dot(&(cfg.sigma1 * r)), w.dot(&(cfg.sigma2 * w)))
}

/// Split objective `f + g`.
pub fn objective(x: &Iterate, graph: &PoseGraph, cfg: &SolverConfig) -> f64 {
    (0..graph.m()).map(|e| edge_terms(e, x, graph, cfg)).map(|(f, g)| f + g).sum()
}

/// Augmented Lagrangian with both penalty terms.
pub fn augmented_lagrangian(x: &Iterate, graph: &PoseGraph, cfg: &SolverConfig) -> f64 {
    let mut val = objective(x, graph, cfg);
    for i in 0..x.len() {
        let dpq = x.p[i] - x.q[i];
        let dts = x.t[i] - x.s[i];
        val += -x.lambda[i].dot(&dpq) + 0.5 * cfg.beta1 * dpq.norm_squared();
        val += -x.z[i].dot(&dts) + 0.5 * cfg.beta2 * dts.norm_squared();
    }
    val
}

/// Largest `‖pᵢ − qᵢ‖` and `‖tᵢ − sᵢ‖`.
pub fn constraint_violation(x: &Iterate) -> (f64, f64) {
    let pq = x.p.iter().zip(&x.q).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
    let ts = x.t.iter().zip(&x.s).map(|(t, s)| (t - s).norm()).fold(0.0, f64::max);
    (pq, ts)
}

use super::blocks::{augmented_lagrangian, Iterate};
use super::config::SolverConfig;
use super::lipschitz::LipschitzEstimates;
use crate::graph::PoseGraph;
use nalgebra::SVector;

fn sq_diff<const D: usize>(a: &[SVector<f64, D>], b: &[SVector<f64, D>]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).norm_squared()).sum()
}

/// Scalar weights `m₁..m₄` of the iterate differences in Ψ. The rotation
/// blocks use β₁ and the translation blocks β₂.
pub fn block_weights(cfg: &SolverConfig, est: &LipschitzEstimates) -> [f64; 4] {
    let a2 = est.alpha2;
    let lf2 = est.l_f * est.l_f;
    let lg2 = est.l_g * est.l_g;
    [
        0.5 * cfg.h1 - a2 / cfg.beta1 * (7.0 * lf2 + 4.0 * lg2),
        cfg.h2 - a2 / cfg.beta1 * (7.0 * lf2 + 4.0 * lg2 + 4.0 * cfg.h2 * cfg.h2),
        cfg.h3 - 3.0 * a2 / cfg.beta2 * lf2,
        cfg.h4 - a2 / cfg.beta2 * (3.0 * lf2 + 3.0 * cfg.h4 * cfg.h4),
    ]
}

/// `Ψᵏ = 𝓛(xᵏ, λᵏ) + α₁/(τβ)‖Δλᵏ‖² + Σ‖Δxᵢᵏ‖²_{Mᵢ}`.
pub fn lyapunov_psi(cur: &Iterate, prev: &Iterate, graph: &PoseGraph, cfg: &SolverConfig, est: &LipschitzEstimates) -> f64 {
    let m = block_weights(cfg, est);
    augmented_lagrangian(cur, graph, cfg)
        + est.alpha1 / (cfg.tau * cfg.beta1) * sq_diff(&cur.lambda, &prev.lambda)
        + est.alpha1 / (cfg.tau * cfg.beta2) * sq_diff(&cur.z, &prev.z)
        + m[0] * sq_diff(&cur.p, &prev.p)
        + m[1] * sq_diff(&cur.q, &prev.q)
        + m[2] * sq_diff(&cur.t, &prev.t)
        + m[3] * sq_diff(&cur.s, &prev.s)
}

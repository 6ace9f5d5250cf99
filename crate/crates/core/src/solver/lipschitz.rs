//! Curvature bounds for the split objective and the penalty thresholds
//! above which the Lyapunov function is guaranteed to decrease.
//!
//! Bounds hold on the set where `p`, `q` have norm at most one and every
//! edge satisfies `‖tⱼ − sᵢ‖ ≤ ‖tᵢⱼ‖ + 1`.

use super::config::SolverConfig;
use crate::graph::PoseGraph;
use crate::quat::{Mat4, Vec3};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LipschitzEstimates {
    pub l_f: f64,
    pub l_g: f64,
    /// Curvature of `g` in the `q` block alone.
    pub l_g2: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub beta_prime: f64,
    pub beta_double_prime: f64,
}

impl LipschitzEstimates {
    pub fn beta_threshold(&self) -> f64 {
        self.beta_prime.max(self.beta_double_prime)
    }
}

fn spectral_norm(m: &Mat4) -> f64 {
    m.symmetric_eigenvalues().amax()
}

/// Bound on the Hessian norm of one translation term over its 14 variables.
pub fn edge_bound_f(t_ij: &Vec3, sigma1_norm: f64) -> f64 {
    let t = t_ij.norm();
    let jac_sq = 2.0 * t * t + 2.0;
    let rho = 2.0 * t + 1.0;
    2.0 * sigma1_norm * jac_sq + 2.0 * sigma1_norm * rho * t
}

/// Bound on the Hessian norm of one rotation term over its 8 variables.
pub fn edge_bound_g(sigma2_norm: f64) -> f64 {
    8.0 * sigma2_norm
}

pub fn relaxation_constants(tau: f64) -> (f64, f64, f64) {
    let gap = 1.0 - (1.0 - tau).abs();
    ((1.0 - tau).abs() / gap, tau / (gap * gap), tau / gap)
}

pub fn estimate_lipschitz(graph: &PoseGraph, cfg: &SolverConfig) -> LipschitzEstimates {
    let s1 = spectral_norm(&cfg.sigma1);
    let s2 = spectral_norm(&cfg.sigma2);
    let n = graph.n();
    let mut load_f = vec![0.0; n];
    let mut load_g = vec![0.0; n];
    for e in graph.edges() {
        let bf = edge_bound_f(&e.t, s1);
        let bg = edge_bound_g(s2);
        load_f[e.i] += bf;
        load_f[e.j] += bf;
        load_g[e.i] += bg;
        load_g[e.j] += bg;
    }
    let l_f = load_f.iter().copied().fold(0.0, f64::max);
    let l_g = load_g.iter().copied().fold(0.0, f64::max);
    let max_out = (0..n).map(|i| graph.out_edges(i).len()).max().unwrap_or(0);
    let l_g2 = 2.0 * s2 * max_out as f64;

    let (alpha1, alpha2, alpha3) = relaxation_constants(cfg.tau);
    let (k1, k2, k3, k4) = (cfg.h1, cfg.h2, cfg.h3, cfg.h4);
    let div = |num: f64, k: f64| if num == 0.0 { 0.0 } else if k > 0.0 { num / k } else { f64::INFINITY };
    let lf2 = l_f * l_f;
    let lg2 = l_g * l_g;
    let beta_prime = [
        2.0 * (l_f + l_g2),
        div(2.0 * alpha2 * (7.0 * lf2 + 4.0 * lg2), k1),
        div(alpha2 * (7.0 * lf2 + 4.0 * lg2) + (4.0 * alpha2 + 2.0) * k2 * k2, k2),
        div((3.0 * alpha2 + 2.0) * lf2, k3),
        div((3.0 * alpha2 + 2.0) * lf2 + (3.0 * alpha2 + 1.0) * k4 * k4, k4),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let beta_double_prime = [
        div(2.0 * alpha2 * (7.0 * lf2 + 4.0 * lg2), k1),
        div(alpha2 * (7.0 * lf2 + 4.0 * lg2 + 8.0 * k2 * k2), k2),
        div(7.0 * alpha2 * lf2, k3),
        div(alpha2 * (7.0 * lf2 + 6.0 * k4 * k4), k4),
    ]
    .into_iter()
    .fold(0.0, f64::max);

    LipschitzEstimates { l_f, l_g, l_g2, alpha1, alpha2, alpha3, beta_prime, beta_double_prime }
}

/// Penalty satisfying the descent condition: `max(1, 1.05·max(β′, β″))`.
pub fn auto_beta(est: &LipschitzEstimates) -> f64 {
    (1.05 * est.beta_threshold()).max(1.0)
}

use crate::error::{PgoError, Result};
use crate::graph::PoseGraph;
use crate::quat::{Mat3, Mat4, Vec3};
use serde::{Deserialize, Serialize};

/// Penalty, relaxation and weighting parameters of the splitting iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Penalty on `p = q`.
    pub beta1: f64,
    /// Penalty on `t = s`.
    pub beta2: f64,
    /// Dual over-relaxation, in (0, 2).
    pub tau: f64,
    /// Proximal weights `γ₁..γ₄` for the p, q, t and s blocks.
    pub h1: f64,
    pub h2: f64,
    pub h3: f64,
    pub h4: f64,
    /// Translation-residual weight, `diag(c, Ω⁻¹)`.
    #[serde(with = "mat4_rows")]
    pub sigma1: Mat4,
    /// Rotation-residual weight.
    #[serde(with = "mat4_rows")]
    pub sigma2: Mat4,
    pub tol: f64,
    pub max_iter: usize,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
    pub seed: u64,
    /// Record wall time per iteration. Off gives traces that are identical
    /// across runs.
    pub record_time: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            beta1: 1.0,
            beta2: 1.0,
            tau: 1.4,
            h1: 1.0,
            h2: 1e-3,
            h3: 1e-3,
            h4: 1e-3,
            sigma1: Mat4::identity(),
            sigma2: Mat4::identity(),
            tol: 1e-4,
            max_iter: 300,
            threads: 0,
            seed: 0,
            record_time: true,
        }
    }
}

impl SolverConfig {
    /// `Σ₁ = diag(c, ω·I₃)`.
    pub fn sigma1_from(c: f64, omega_inv: f64) -> Mat4 {
        let mut m = Mat4::identity() * omega_inv;
        m[(0, 0)] = c;
        m
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta1 = beta;
        self.beta2 = beta;
        self
    }

    /// Replaces Σ₁, Σ₂ by scalar weights taken from the mean diagonal of
    /// the graph's information matrices. Returns false when the graph
    /// carries none.
    pub fn use_information_weights(&mut self, graph: &PoseGraph, c: f64) -> bool {
        match graph.mean_information() {
            Some((trans, rot)) => {
                self.sigma1 = Self::sigma1_from(c, trans);
                // the quaternion residual is half the small-angle error
                self.sigma2 = Mat4::identity() * (4.0 * rot);
                true
            }
            None => false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PgoError::InvalidConfig(m));
        if !(self.beta1 > 0.0 && self.beta1.is_finite() && self.beta2 > 0.0 && self.beta2.is_finite()) {
            return bad(format!("beta must be positive, got ({}, {})", self.beta1, self.beta2));
        }
        if !(self.tau > 0.0 && self.tau < 2.0) {
            return bad(format!("tau must lie in (0, 2), got {}", self.tau));
        }
        for (name, h) in [("h1", self.h1), ("h2", self.h2), ("h3", self.h3), ("h4", self.h4)] {
            if !(h >= 0.0 && h.is_finite()) {
                return bad(format!("{name} must be >= 0, got {h}"));
            }
        }
        for (name, m) in [("sigma1", &self.sigma1), ("sigma2", &self.sigma2)] {
            if (m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
                return bad(format!("{name} is not symmetric"));
            }
            let min = m.symmetric_eigenvalues().min();
            if !(min >= -1e-12 * m.amax().max(1.0)) {
                return bad(format!("{name} is not positive semidefinite"));
            }
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        Ok(())
    }

    /// True when both weights are multiples of the identity, so the sphere
    /// subproblem has a scalar quadratic term.
    pub fn scalar_weights(&self) -> bool {
        let is_scalar = |m: &Mat4| (m - Mat4::identity() * m[(0, 0)]).amax() <= 1e-15 * m[(0, 0)].abs().max(1.0);
        is_scalar(&self.sigma1) && is_scalar(&self.sigma2)
    }

    pub(crate) fn sigma1_hat(&self) -> Mat3 {
        self.sigma1.fixed_view::<3, 3>(1, 1).into_owned()
    }

    pub(crate) fn sigma1_cross(&self) -> Vec3 {
        self.sigma1.fixed_view::<3, 1>(1, 0).into_owned()
    }
}

mod mat4_rows {
    use crate::quat::Mat4;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Mat4, s: S) -> Result<S::Ok, S::Error> {
        let rows: [[f64; 4]; 4] = std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)]));
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mat4, D::Error> {
        let rows = <[[f64; 4]; 4]>::deserialize(d)?;
        Ok(Mat4::from_fn(|r, c| rows[r][c]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = SolverConfig::default();
        c.validate().unwrap();
        assert!(c.scalar_weights());
    }

    #[test]
    fn rejects_tau_out_of_range() {
        for tau in [0.0, 2.0, 2.5, -1.0] {
            let c = SolverConfig { tau, ..Default::default() };
            assert!(c.validate().is_err());
        }
    }

    #[test]
    fn sigma1_layout() {
        let m = SolverConfig::sigma1_from(2.0, 5.0);
        assert_eq!(m[(0, 0)], 2.0);
        assert_eq!(m[(3, 3)], 5.0);
        let c = SolverConfig { sigma1: m, ..Default::default() };
        assert!(!c.scalar_weights());
        assert_eq!(c.sigma1_hat(), Mat3::identity() * 5.0);
    }
}

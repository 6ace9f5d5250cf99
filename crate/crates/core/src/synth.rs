//! Synthetic pose graphs: a circular ring and a cube lattice, with Gaussian
//! translation noise and von Mises–Fisher rotation noise.

use crate::error::{PgoError, Result};
use crate::graph::{Edge, Pose, PoseGraph, PoseSet};
use crate::quat::{Quat, UnitQuat, Vec3, Vec4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// How the rotation noise level `σ_r` maps onto the vMF concentration `κ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KappaMode {
    /// `κ = σ_r² / 2`.
    PaperLiteral,
    /// `κ = 2 / σ_r²`, so the tangent covariance `1/κ` equals `σ_r²/2`.
    #[default]
    Matched,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma_t: f64,
    pub sigma_r: f64,
    pub kappa_mode: KappaMode,
    pub seed: u64,
    /// Generate exact measurements, ignoring both sigmas.
    #[serde(default)]
    pub noiseless: bool,
}

impl NoiseSpec {
    pub fn new(sigma_t: f64, sigma_r: f64, seed: u64) -> Self {
        NoiseSpec { sigma_t, sigma_r, kappa_mode: KappaMode::Matched, seed, noiseless: false }
    }

    pub fn noiseless(seed: u64) -> Self {
        NoiseSpec { sigma_t: 0.0, sigma_r: 1.0, kappa_mode: KappaMode::Matched, seed, noiseless: true }
    }

    pub fn kappa(&self) -> f64 {
        match self.kappa_mode {
            KappaMode::PaperLiteral => 0.5 * self.sigma_r * self.sigma_r,
            KappaMode::Matched => 2.0 / (self.sigma_r * self.sigma_r),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma_t >= 0.0 && self.sigma_t.is_finite()) {
            return Err(PgoError::InvalidConfig(format!("sigma_t must be >= 0, got {}", self.sigma_t)));
        }
        if !(self.sigma_r > 0.0 && self.sigma_r.is_finite()) {
            return Err(PgoError::InvalidConfig(format!("sigma_r must be > 0, got {}", self.sigma_r)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubeSpec {
    /// Vertices per side.
    pub n_hat: usize,
    /// Probability of closing each candidate loop.
    pub p_cube: f64,
}

impl CubeSpec {
    /// `E[m] = 2(2n̂³ − 3n̂² + 1) p + n̂³ − 1`.
    pub fn expected_edges(&self) -> f64 {
        let k = self.n_hat as f64;
        2.0 * (2.0 * k.powi(3) - 3.0 * k * k + 1.0) * self.p_cube + k.powi(3) - 1.0
    }

    /// Standard deviation of the edge count (sum of independent Bernoullis).
    pub fn edge_count_std(&self) -> f64 {
        let k = self.n_hat as f64;
        let trials = 2.0 * (2.0 * k.powi(3) - 3.0 * k * k + 1.0);
        (trials * self.p_cube * (1.0 - self.p_cube)).sqrt()
    }
}

/// Draws from vMF(μ, κ) on the 3-sphere.
///
/// The component along `μ` is drawn by Wood's rejection scheme, the tangent
/// direction uniformly, and the result is reflected from `e₁` onto `μ`.
pub fn sample_vmf_s3<R: Rng + ?Sized>(mu: UnitQuat, kappa: f64, rng: &mut R) -> UnitQuat {
    const DIM_M1: f64 = 3.0;
    let kappa = kappa.max(0.0);
    // b = (−2κ + √(4κ² + 9)) / 3, written without cancellation
    let b = DIM_M1 / (2.0 * kappa + (4.0 * kappa * kappa + DIM_M1 * DIM_M1).sqrt());
    let x0 = (1.0 - b) / (1.0 + b);
    let c = kappa * x0 + DIM_M1 * (1.0 - x0 * x0).ln();
    let beta = Beta::new(1.5, 1.5).expect("valid beta parameters");

    let w = loop {
        let z: f64 = beta.sample(rng);
        let w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
        let u: f64 = rng.random();
        if kappa * w + DIM_M1 * (1.0 - x0 * w).ln() - c >= u.ln() {
            break w.clamp(-1.0, 1.0);
        }
    };

    let v = loop {
        let g = Vec3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
        let n = g.norm();
        if n > 1e-12 {
            break g / n;
        }
    };
    let r = (1.0 - w * w).max(0.0).sqrt();
    let sample = Vec4::new(w, r * v.x, r * v.y, r * v.z);

    // Householder reflection swapping e₁ and μ.
    let mu = mu.to_vec4();
    let u = Vec4::new(1.0, 0.0, 0.0, 0.0) - mu;
    let un = u.norm_squared();
    let out = if un < 1e-24 { sample } else { sample - u * (2.0 * u.dot(&sample) / un) };
    UnitQuat::normalize(Quat::from_vec4(&out)).unwrap_or(mu_fallback(mu))
}

fn mu_fallback(mu: Vec4) -> UnitQuat {
    UnitQuat::from_vec4(&mu).unwrap_or(UnitQuat::IDENTITY)
}

struct NoiseSource {
    rng: ChaCha8Rng,
    spec: NoiseSpec,
    kappa: f64,
}

impl NoiseSource {
    fn new(spec: &NoiseSpec) -> Self {
        NoiseSource { rng: ChaCha8Rng::seed_from_u64(spec.seed), spec: *spec, kappa: spec.kappa() }
    }

    /// Measurement of the relative pose from `a` to `b`.
    fn measure(&mut self, a: &Pose, b: &Pose) -> (UnitQuat, Vec3) {
        let rel_t = a.q.conj().to_rotation_matrix() * (b.t - a.t);
        let rel_q = a.q.conj().compose(b.q);
        if self.spec.noiseless {
            return (rel_q, rel_t);
        }
        let eps_t = Vec3::new(
            self.rng.sample::<f64, _>(StandardNormal),
            self.rng.sample::<f64, _>(StandardNormal),
            self.rng.sample::<f64, _>(StandardNormal),
        ) * self.spec.sigma_t;
        let eps_q = sample_vmf_s3(UnitQuat::IDENTITY, self.kappa, &mut self.rng);
        (rel_q.compose(eps_q), rel_t + eps_t)
    }
}

/// Single loop of radius 2 with `n` odometric edges `(i, i+1 mod n)`.
pub fn gen_ring(n: usize, noise: &NoiseSpec) -> Result<(PoseSet, PoseGraph)> {
    if n < 3 {
        return Err(PgoError::InvalidConfig(format!("ring needs n >= 3, got {n}")));
    }
    noise.validate()?;
    const RADIUS: f64 = 2.0;
    let truth: Vec<Pose> = (0..n)
        .map(|i| {
            let phi = 2.0 * PI * i as f64 / n as f64;
            let t = Vec3::new(RADIUS * phi.cos(), RADIUS * phi.sin(), 0.0);
            let q = UnitQuat::from_axis_angle(&Vec3::z(), phi + 0.5 * PI);
            Pose::new(q, t)
        })
        .collect();
    let mut src = NoiseSource::new(noise);
    let edges = (0..n)
        .map(|i| {
            let j = (i + 1) % n;
            let (q, t) = src.measure(&truth[i], &truth[j]);
            Edge::new(i, j, q, t)
        })
        .collect();
    Ok((PoseSet::new(truth), PoseGraph::new(n, edges)?))
}

fn lattice_index(n_hat: usize, x: usize, y: usize, z: usize) -> usize {
    x + n_hat * (y + n_hat * z)
}

/// Boustrophedon order over the lattice: consecutive entries are adjacent.
fn snake_path(n_hat: usize) -> Vec<(usize, usize, usize)> {
    let mut path = Vec::with_capacity(n_hat.pow(3));
    for z in 0..n_hat {
        for yy in 0..n_hat {
            let y = if z % 2 == 0 { yy } else { n_hat - 1 - yy };
            let row = z * n_hat + yy;
            for xx in 0..n_hat {
                let x = if row.is_multiple_of(2) { xx } else { n_hat - 1 - xx };
                path.push((x, y, z));
            }
        }
    }
    path
}

fn heading_for(dir: Vec3) -> UnitQuat {
    let x = Vec3::x();
    let d = dir.normalize();
    let c = x.dot(&d);
    if c > 1.0 - 1e-12 {
        UnitQuat::IDENTITY
    } else if c < -1.0 + 1e-12 {
        UnitQuat::from_axis_angle(&Vec3::z(), PI)
    } else {
        UnitQuat::from_axis_angle(&x.cross(&d), c.acos())
    }
}

/// `n̂³` vertices on a lattice spanning `[-1, 1]³`, visited along a
/// boustrophedon backbone. Every other lattice-adjacent pair gets a closure
/// edge in each direction independently with probability `p_cube`.
pub fn gen_cube(spec: &CubeSpec, noise: &NoiseSpec) -> Result<(PoseSet, PoseGraph)> {
    if spec.n_hat < 2 {
        return Err(PgoError::InvalidConfig(format!("cube needs n_hat >= 2, got {}", spec.n_hat)));
    }
    if !(0.0..=1.0).contains(&spec.p_cube) {
        return Err(PgoError::InvalidConfig(format!("p_cube must lie in [0, 1], got {}", spec.p_cube)));
    }
    noise.validate()?;
    let k = spec.n_hat;
    let n = k.pow(3);
    let spacing = 2.0 / (k - 1) as f64;
    let path = snake_path(k);
    // vertex order = path order
    let mut vertex_of = vec![0usize; n];
    for (v, &(x, y, z)) in path.iter().enumerate() {
        vertex_of[lattice_index(k, x, y, z)] = v;
    }
    let pos = |(x, y, z): (usize, usize, usize)| {
        Vec3::new(x as f64 * spacing - 1.0, y as f64 * spacing - 1.0, z as f64 * spacing - 1.0)
    };
    let truth: Vec<Pose> = (0..n)
        .map(|v| {
            let dir = if v + 1 < n { pos(path[v + 1]) - pos(path[v]) } else { pos(path[v]) - pos(path[v - 1]) };
            Pose::new(heading_for(dir), pos(path[v]))
        })
        .collect();

    let mut src = NoiseSource::new(noise);
    let mut edges = Vec::new();
    for v in 0..n - 1 {
        let (q, t) = src.measure(&truth[v], &truth[v + 1]);
        edges.push(Edge::new(v, v + 1, q, t));
    }
    // loop closures use their own stream so the backbone does not depend on p_cube
    let mut coin = ChaCha8Rng::seed_from_u64(noise.seed ^ 0x9e37_79b9_7f4a_7c15);
    for z in 0..k {
        for y in 0..k {
            for x in 0..k {
                let a = vertex_of[lattice_index(k, x, y, z)];
                let neighbours = [(x + 1, y, z), (x, y + 1, z), (x, y, z + 1)];
                for &(nx, ny, nz) in &neighbours {
                    if nx >= k || ny >= k || nz >= k {
                        continue;
                    }
                    let b = vertex_of[lattice_index(k, nx, ny, nz)];
                    if a.abs_diff(b) == 1 {
                        continue; // backbone
                    }
                    for (from, to) in [(a, b), (b, a)] {
                        if coin.random::<f64>() < spec.p_cube {
                            let (q, t) = src.measure(&truth[from], &truth[to]);
                            edges.push(Edge::new(from, to, q, t));
                        }
                    }
                }
            }
        }
    }
    Ok((PoseSet::new(truth), PoseGraph::new(n, edges)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quat::dist_angle;

    #[test]
    fn kappa_modes() {
        let mut s = NoiseSpec::new(0.01, 0.1, 0);
        assert!((s.kappa() - 200.0).abs() < 1e-9);
        s.kappa_mode = KappaMode::PaperLiteral;
        assert!((s.kappa() - 0.005).abs() < 1e-15);
    }

    #[test]
    fn vmf_uniform_mean_is_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let mut acc = Vec4::zeros();
        for _ in 0..n {
            acc += sample_vmf_s3(UnitQuat::IDENTITY, 0.0, &mut rng).to_vec4();
        }
        assert!((acc / n as f64).norm() <= 0.02);
    }

    #[test]
    fn vmf_concentrates() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mu = UnitQuat::IDENTITY;
        for _ in 0..10_000 {
            let q = sample_vmf_s3(mu, 1e6, &mut rng);
            assert!(mu.to_vec4().dot(&q.to_vec4()).clamp(-1.0, 1.0).acos() <= 0.02);
        }
    }

    #[test]
    fn vmf_respects_mean_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mu = UnitQuat::from_axis_angle(&Vec3::new(1.0, -2.0, 0.5), 2.0);
        let mut acc = Vec4::zeros();
        for _ in 0..20_000 {
            acc += sample_vmf_s3(mu, 50.0, &mut rng).to_vec4();
        }
        let mean = acc.normalize();
        assert!(mean.dot(&mu.to_vec4()) > 0.999);
    }

    #[test]
    fn ring_structure() {
        let (truth, g) = gen_ring(100, &NoiseSpec::new(0.01, 0.01, 1)).unwrap();
        assert_eq!((g.n(), g.m()), (100, 100));
        assert_eq!(truth.len(), 100);
        for e in g.edges() {
            assert!((e.q.quat().norm() - 1.0).abs() <= 1e-12);
        }
        assert!(gen_ring(2, &NoiseSpec::new(0.01, 0.01, 1)).is_err());
        assert!(gen_ring(5, &NoiseSpec::new(0.01, 0.0, 1)).is_err());
    }

    #[test]
    fn noiseless_ring_reproduces_truth_relatives() {
        let (truth, g) = gen_ring(12, &NoiseSpec::noiseless(0)).unwrap();
        for e in g.edges() {
            let (a, b) = (&truth.poses[e.i], &truth.poses[e.j]);
            let q = a.q.conj().compose(b.q);
            assert!(dist_angle(q, e.q) < 1e-12);
            // q̃_ij = q̃_i* q̃_j exactly, so the rotation residual vanishes with sign
            assert!((q.quat() - e.q.quat()).norm() < 1e-12);
            let t = a.q.conj().to_rotation_matrix() * (b.t - a.t);
            assert!((t - e.t).norm() < 1e-12);
        }
    }

    #[test]
    fn ring_is_deterministic() {
        let a = gen_ring(50, &NoiseSpec::new(0.05, 0.03, 42)).unwrap();
        let b = gen_ring(50, &NoiseSpec::new(0.05, 0.03, 42)).unwrap();
        assert_eq!(a, b);
        let c = gen_ring(50, &NoiseSpec::new(0.05, 0.03, 43)).unwrap();
        assert_ne!(a.1, c.1);
    }

    #[test]
    fn cube_expected_edges() {
        assert!((CubeSpec { n_hat: 7, p_cube: 0.3 }.expected_edges() - 666.0).abs() < 1e-9);
        assert!((CubeSpec { n_hat: 2, p_cube: 0.3 }.expected_edges() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn cube_backbone_only() {
        for k in 2..6 {
            let (truth, g) = gen_cube(&CubeSpec { n_hat: k, p_cube: 0.0 }, &NoiseSpec::new(0.01, 0.01, 3)).unwrap();
            assert_eq!(g.m(), k.pow(3) - 1);
            assert_eq!(truth.len(), k.pow(3));
            // backbone steps are lattice-adjacent
            let spacing = 2.0 / (k - 1) as f64;
            for v in 0..truth.len() - 1 {
                let d = (truth.poses[v + 1].t - truth.poses[v].t).norm();
                assert!((d - spacing).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cube_full_closure_count() {
        let (_, g) = gen_cube(&CubeSpec { n_hat: 4, p_cube: 1.0 }, &NoiseSpec::new(0.01, 0.01, 3)).unwrap();
        assert_eq!(g.m() as f64, CubeSpec { n_hat: 4, p_cube: 1.0 }.expected_edges());
        assert!(g.ensure_connected().is_ok());
    }
}

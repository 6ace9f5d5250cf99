//! Minimization of `bᵀx + ½xᵀAx` over the unit sphere in ℝ⁴.
//!
//! The multiplier is the rightmost real eigenvalue of an 8×8 matrix built
//! from `A` and `b`. It is then polished on the secular equation of `A`'s
//! eigendecomposition so the returned point satisfies the KKT system to
//! working precision.

use crate::error::{PgoError, Result};
use crate::quat::{Mat4, Vec4};
use nalgebra::{SMatrix, Schur, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

type Mat8 = SMatrix<f64, 8, 8>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereQP {
    pub a: Mat4,
    pub b: Vec4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolvePath {
    Scalar,
    Eigen,
    HardCase,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereQPSolution {
    pub x: Vec4,
    pub lambda: f64,
    pub objective: f64,
    pub path: SolvePath,
}

impl SphereQP {
    pub fn new(a: Mat4, b: Vec4) -> Self {
        SphereQP { a, b }
    }

    pub fn objective(&self, x: &Vec4) -> f64 {
        self.b.dot(x) + 0.5 * x.dot(&(self.a * x))
    }

    /// `Some(α)` when `A = αI` to within 1e-12.
    pub fn scalar_part(&self) -> Option<f64> {
        let alpha = self.a.trace() / 4.0;
        let tol = 1e-12 * alpha.abs().max(1.0);
        let dev = (self.a - Mat4::identity() * alpha).amax();
        (dev <= tol).then_some(alpha)
    }

    /// `Q = [[A, −bbᵀ], [−I, A]]`; the multiplier satisfies `Qy = −λy`.
    pub fn companion(&self) -> Mat8 {
        let mut q = Mat8::zeros();
        q.fixed_view_mut::<4, 4>(0, 0).copy_from(&self.a);
        q.fixed_view_mut::<4, 4>(0, 4).copy_from(&(-(self.b * self.b.transpose())));
        q.fixed_view_mut::<4, 4>(4, 0).copy_from(&(-Mat4::identity()));
        q.fixed_view_mut::<4, 4>(4, 4).copy_from(&self.a);
        q
    }

    /// Scalar path when applicable, eigenvalue path otherwise.
    pub fn solve(&self) -> Result<SphereQPSolution> {
        if let Some(alpha) = self.scalar_part() {
            if self.b.norm() > 0.0 {
                return Ok(solve_scalar(alpha, &self.b));
            }
        }
        solve_eig(self)
    }
}

/// `x = −b/‖b‖`, `λ = ‖b‖ − α` for `A = αI` and `b ≠ 0`.
pub fn solve_scalar(alpha: f64, b: &Vec4) -> SphereQPSolution {
    let nb = b.norm();
    let x = -b / nb;
    SphereQPSolution { x, lambda: nb - alpha, objective: -nb + 0.5 * alpha, path: SolvePath::Scalar }
}

/// Rightmost real eigenvalue of `−Q`.
fn rightmost_multiplier(prob: &SphereQP) -> Result<Option<f64>> {
    let q = prob.companion();
    let scale = 1.0 + q.norm();
    let Some(schur) = Schur::try_new(-q, 1e-15, 10_000) else {
        log::warn!("schur decomposition did not converge, using secular equation only");
        return Ok(None);
    };
    let eigs = schur.complex_eigenvalues();
    let pick = |tol: f64| {
        eigs.iter()
            .filter(|z| z.im.abs() <= tol)
            .max_by(|u, v| u.re.total_cmp(&v.re).then(v.im.abs().total_cmp(&u.im.abs())))
            .map(|z| z.re)
    };
    // a double real root splits into a conjugate pair of size ~√ε
    match pick(1e-8 * scale).or_else(|| pick(1e-6 * scale)) {
        Some(l) => Ok(Some(l)),
        None => Err(PgoError::NoRealEigenvalue { spectrum: eigs.iter().map(|z| (-z.re, -z.im)).collect() }),
    }
}

/// Exact minimizer via the 8×8 eigenvalue characterization, including the
/// hard case where `b` has no component in `A`'s bottom eigenspace.
pub fn solve_eig(prob: &SphereQP) -> Result<SphereQPSolution> {
    if !(prob.a.iter().all(|v| v.is_finite()) && prob.b.iter().all(|v| v.is_finite())) {
        return Err(PgoError::Degenerate("non-finite sphere subproblem data".into()));
    }
    let a_sym = (prob.a + prob.a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(a_sym);
    let mut order: [usize; 4] = [0, 1, 2, 3];
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let d: [f64; 4] = order.map(|k| eig.eigenvalues[k]);
    let v: [Vec4; 4] = order.map(|k| eig.eigenvectors.column(k).into_owned());
    let c: [f64; 4] = v.map(|vk| vk.dot(&prob.b));

    let a_norm = d[0].abs().max(d[3].abs()).max(1.0);
    let b_norm = prob.b.norm();
    let lo = -d[0];
    let lambda_eig = rightmost_multiplier(prob)?;

    let gap_tol = 1e-8 * a_norm;
    if let Some(l) = lambda_eig {
        if (l - lo).abs() <= gap_tol {
            log::trace!("near-singular shifted matrix, lambda = {l}");
        }
    }
    let bottom: Vec<usize> = (0..4).filter(|&k| d[k] - d[0] <= gap_tol).collect();
    let c_bottom = bottom.iter().map(|&k| c[k] * c[k]).sum::<f64>().sqrt();

    // hard case: b has no weight on the bottom eigenspace and the
    // pseudo-inverse solution at λ = −d_min lies inside the sphere
    if c_bottom <= 1e-9 * b_norm.max(1.0) {
        let mut xp = Vec4::zeros();
        for k in 0..4 {
            if !bottom.contains(&k) {
                xp -= v[k] * (c[k] / (d[k] + lo));
            }
        }
        let np2 = xp.norm_squared();
        if np2 <= 1.0 {
            let alpha = (1.0 - np2).sqrt();
            let null = v[bottom[0]];
            let plus = xp + null * alpha;
            let minus = xp - null * alpha;
            let cb = c[bottom[0]];
            let x = if cb != 0.0 {
                if cb < 0.0 { plus } else { minus }
            } else if first_significant_positive(&plus) || !first_significant_positive(&minus) {
                plus
            } else {
                minus
            };
            let x = x / x.norm();
            return Ok(SphereQPSolution { x, lambda: lo, objective: prob.objective(&x), path: SolvePath::HardCase });
        }
    }

    let lambda = secular_root(&d, &c, lo, lo + b_norm, lambda_eig);
    let mut x = Vec4::zeros();
    for k in 0..4 {
        x -= v[k] * (c[k] / (d[k] + lambda));
    }
    if !x.iter().all(|t| t.is_finite()) || x.norm() == 0.0 {
        return Err(PgoError::Degenerate("sphere subproblem produced a non-finite point".into()));
    }
    Ok(SphereQPSolution { x, lambda, objective: prob.objective(&x), path: SolvePath::Eigen })
}

fn first_significant_positive(x: &Vec4) -> bool {
    x.iter().find(|t| t.abs() > 1e-12).is_none_or(|t| *t > 0.0)
}

/// Root of `1/‖x(λ)‖ − 1` on `(lo, hi]`, safeguarded Newton with bisection.
fn secular_root(d: &[f64; 4], c: &[f64; 4], lo: f64, hi: f64, guess: Option<f64>) -> f64 {
    let phi = |l: f64| {
        let mut s = 0.0;
        let mut s3 = 0.0;
        for k in 0..4 {
            let r = d[k] + l;
            s += c[k] * c[k] / (r * r);
            s3 += c[k] * c[k] / (r * r * r);
        }
        (1.0 / s.sqrt() - 1.0, s3 / (s * s.sqrt()))
    };
    let (mut a, mut b) = (lo, hi);
    let mut l = guess.unwrap_or(0.5 * (lo + hi));
    if !(l > a && l <= b) {
        l = 0.5 * (a + b);
    }
    for _ in 0..200 {
        let (f, df) = phi(l);
        if !f.is_finite() {
            l = 0.5 * (a + b);
            continue;
        }
        if f == 0.0 {
            return l;
        }
        if f < 0.0 {
            a = l;
        } else {
            b = l;
        }
        let mut next = l - f / df;
        if !(next > a && next < b) || !next.is_finite() {
            next = 0.5 * (a + b);
        }
        if (next - l).abs() <= 1e-16 * (1.0 + l.abs()) {
            return next;
        }
        l = next;
    }
    l
}

/// Best objective over `samples` uniform sphere points, each refined by 50
/// projected-gradient steps. Deterministic in `seed`, and sample streams are
/// prefixes of each other, so the value never increases with `samples`.
pub fn brute_oracle(prob: &SphereQP, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a_norm = prob.a.symmetric_eigenvalues().amax();
    let step = 1.0 / (a_norm + prob.b.norm() + 1e-12);
    // One projected-gradient step is x <- normalize(m x + c). Samples advance
    // four at a time as matrix columns; each column evolves independently.
    let m = Mat4::identity() - prob.a * step;
    let c = -prob.b * step;
    let samples = samples.max(1);
    let mut best = f64::INFINITY;
    let mut done = 0;
    while done < samples {
        let live = (samples - done).min(4);
        let mut x = Mat4::zeros();
        let mut valid = [false; 4];
        for (k, ok) in valid.iter_mut().enumerate().take(live) {
            let g = Vec4::from_fn(|_, _| StandardNormal.sample(&mut rng));
            let n = g.norm();
            if n > 0.0 {
                x.set_column(k, &(g / n));
                *ok = true;
            }
        }
        for (k, ok) in valid.iter().enumerate() {
            if !ok {
                x[(0, k)] = 1.0;
            }
        }
        let mut frozen = [false; 4];
        for _ in 0..50 {
            let y = m * x;
            for (k, stuck) in frozen.iter_mut().enumerate() {
                if *stuck {
                    continue;
                }
                let col = y.column(k) + c;
                let ny = col.norm();
                if ny == 0.0 {
                    *stuck = true;
                    continue;
                }
                x.set_column(k, &(col * (1.0 / ny)));
            }
        }
        for (k, ok) in valid.iter().enumerate().take(live) {
            if *ok {
                best = best.min(prob.objective(&x.column(k).into_owned()));
            }
        }
        done += live;
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kkt(prob: &SphereQP, s: &SphereQPSolution) -> (f64, f64, f64) {
        let shifted = prob.a + Mat4::identity() * s.lambda;
        let res = (shifted * s.x + prob.b).norm();
        let min_eig = SymmetricEigen::new(shifted).eigenvalues.min();
        (res, min_eig, (s.x.norm() - 1.0).abs())
    }

    #[test]
    fn scalar_examples() {
        let s = solve_scalar(1.0, &Vec4::new(2.0, 0.0, 0.0, 0.0));
        assert_eq!(s.x, Vec4::new(-1.0, 0.0, 0.0, 0.0));
        assert_eq!(s.lambda, 1.0);
        let s = solve_scalar(3.0, &Vec4::new(0.0, 0.0, 0.0, -5.0));
        assert_eq!(s.x, Vec4::new(0.0, 0.0, 0.0, 1.0));
        assert_eq!(s.lambda, 2.0);
    }

    #[test]
    fn diagonal_example() {
        let prob = SphereQP::new(Mat4::from_diagonal(&Vec4::new(1.0, 2.0, 3.0, 4.0)), Vec4::x());
        let s = solve_eig(&prob).unwrap();
        assert!((s.x - Vec4::new(-1.0, 0.0, 0.0, 0.0)).norm() < 1e-12);
        assert!(s.lambda.abs() < 1e-12);
    }

    #[test]
    fn pure_eigenvector_is_hard_case() {
        let prob = SphereQP::new(Mat4::from_diagonal(&Vec4::new(1.0, 2.0, 3.0, 4.0)), Vec4::zeros());
        let s = solve_eig(&prob).unwrap();
        assert_eq!(s.path, SolvePath::HardCase);
        assert!((s.x.abs() - Vec4::x()).norm() < 1e-12);
        assert!((s.lambda + 1.0).abs() < 1e-12);
        // deterministic sign
        assert!(s.x[0] > 0.0);
    }

    #[test]
    fn scalar_and_eigen_paths_agree() {
        let prob = SphereQP::new(Mat4::identity() * 2.5, Vec4::new(0.3, -1.0, 0.2, 0.7));
        let a = prob.solve().unwrap();
        let b = solve_eig(&prob).unwrap();
        assert_eq!(a.path, SolvePath::Scalar);
        assert!((a.x - b.x).norm() < 1e-9);
        assert!((a.lambda - b.lambda).abs() < 1e-9);
    }

    #[test]
    fn multiplier_is_root_of_companion() {
        let a = Mat4::new(2.0, 0.3, -0.1, 0.0, 0.3, -1.0, 0.5, 0.2, -0.1, 0.5, 0.7, 0.0, 0.0, 0.2, 0.0, 3.0);
        let prob = SphereQP::new(a, Vec4::new(0.4, 0.1, -0.3, 0.9));
        let s = solve_eig(&prob).unwrap();
        let shifted = prob.companion() + Mat8::identity() * s.lambda;
        let sv = shifted.singular_values();
        assert!(sv.min() <= 1e-6 * sv.max());
        let (res, me, un) = kkt(&prob, &s);
        assert!(res <= 1e-8 && me >= -1e-8 && un <= 1e-10);
    }

    #[test]
    fn oracle_matches_closed_forms() {
        let b = Vec4::new(0.5, -0.2, 0.1, 0.3);
        let prob = SphereQP::new(Mat4::identity(), b);
        assert!((brute_oracle(&prob, 2000, 1) - (-b.norm() + 0.5)).abs() < 1e-6);
        let prob = SphereQP::new(Mat4::from_diagonal(&Vec4::new(3.0, -2.0, 1.0, 0.5)), Vec4::zeros());
        assert!((brute_oracle(&prob, 2000, 1) - 0.5 * -2.0).abs() < 1e-6);
    }

    #[test]
    fn oracle_monotone_in_samples() {
        let a = Mat4::new(1.0, 2.0, 0.0, 0.0, 2.0, -1.0, 0.0, 0.5, 0.0, 0.0, 0.2, 0.0, 0.0, 0.5, 0.0, 1.5);
        let prob = SphereQP::new(a, Vec4::new(0.1, 0.0, 0.2, -0.3));
        let mut last = f64::INFINITY;
        for n in [1, 10, 100, 1000] {
            let v = brute_oracle(&prob, n, 9);
            assert!(v <= last);
            last = v;
        }
    }
}

//! Two-stage linear initialization: relaxed rotation synchronization on
//! unconstrained 3×3 blocks, then translations with rotations held fixed.
//! Vertex 0 is anchored at the identity pose.

use crate::error::{PgoError, Result};
use crate::graph::{Pose, PoseGraph, PoseSet};
use crate::quat::{Mat3, UnitQuat, Vec3};
use std::collections::VecDeque;

const CG_TOL: f64 = 1e-14;

/// Preconditioned conjugate gradients on `K x = b` with a diagonal
/// preconditioner. `apply` writes `K x` into its second argument.
fn pcg(apply: impl Fn(&[f64], &mut [f64]), diag: &[f64], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if b_norm == 0.0 {
        return x;
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut kp = vec![0.0; n];
    let mut rz = r.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>();
    for _ in 0..(10 * n).max(100) {
        apply(&p, &mut kp);
        let pkp = p.iter().zip(&kp).map(|(a, b)| a * b).sum::<f64>();
        if pkp <= 0.0 {
            break;
        }
        let alpha = rz / pkp;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * kp[k];
        }
        if r.iter().map(|v| v * v).sum::<f64>().sqrt() <= CG_TOL * b_norm {
            break;
        }
        for k in 0..n {
            z[k] = r[k] / diag[k];
        }
        let rz_new = r.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>();
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    x
}

fn degrees(graph: &PoseGraph) -> Vec<f64> {
    let mut deg = vec![0.0; graph.n()];
    for e in graph.edges() {
        deg[e.i] += 1.0;
        deg[e.j] += 1.0;
    }
    deg
}

/// Nearest rotation in Frobenius norm.
pub fn project_to_so3(m: &Mat3) -> Mat3 {
    let svd = m.svd(true, true);
    let (u, vt) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let mut fix = Mat3::identity();
    fix[(2, 2)] = (u * vt).determinant().signum();
    u * fix * vt
}

fn solve_rotations(graph: &PoseGraph) -> Vec<Mat3> {
    let n = graph.n();
    let meas: Vec<Mat3> = graph.edges().iter().map(|e| e.q.to_rotation_matrix().transpose()).collect();
    // per edge: r = x_j − B x_i with B = R̃ᵀ
    let apply_full = |x: &[f64], out: &mut [f64]| {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (e, b) in graph.edges().iter().zip(&meas) {
            let xi = Vec3::from_column_slice(&x[3 * e.i..3 * e.i + 3]);
            let xj = Vec3::from_column_slice(&x[3 * e.j..3 * e.j + 3]);
            let r = xj - b * xi;
            let back = b.transpose() * r;
            for k in 0..3 {
                out[3 * e.j + k] += r[k];
                out[3 * e.i + k] -= back[k];
            }
        }
    };
    let apply = |x: &[f64], out: &mut [f64]| {
        apply_full(x, out);
        out[..3].iter_mut().for_each(|v| *v = 0.0);
    };
    let deg = degrees(graph);
    let diag: Vec<f64> = (0..3 * n).map(|k| if k < 3 { 1.0 } else { deg[k / 3].max(1.0) }).collect();

    let mut rows = Vec::with_capacity(3);
    for r in 0..3 {
        let mut anchor = vec![0.0; 3 * n];
        anchor[r] = 1.0;
        let mut rhs = vec![0.0; 3 * n];
        apply_full(&anchor, &mut rhs);
        rhs.iter_mut().for_each(|v| *v = -*v);
        rhs[..3].iter_mut().for_each(|v| *v = 0.0);
        let mut x = pcg(apply, &diag, &rhs);
        x[r] = 1.0;
        rows.push(x);
    }
    (0..n)
        .map(|i| Mat3::from_fn(|r, c| rows[r][3 * i + c]))
        .map(|m| project_to_so3(&m))
        .collect()
}

fn solve_translations(graph: &PoseGraph, rot: &[Mat3]) -> Vec<Vec3> {
    let n = graph.n();
    let deg = degrees(graph);
    let apply = |x: &[f64], out: &mut [f64]| {
        out.iter_mut().for_each(|v| *v = 0.0);
        for e in graph.edges() {
            let r = x[e.j] - x[e.i];
            out[e.j] += r;
            out[e.i] -= r;
        }
        out[0] = 0.0;
    };
    let diag: Vec<f64> = deg.iter().map(|d| d.max(1.0)).collect();
    let mut coords = Vec::with_capacity(3);
    for c in 0..3 {
        let mut rhs = vec![0.0; n];
        for e in graph.edges() {
            let d = (rot[e.i] * e.t)[c];
            rhs[e.j] += d;
            rhs[e.i] -= d;
        }
        rhs[0] = 0.0;
        coords.push(pcg(apply, &diag, &rhs));
    }
    (0..n).map(|i| Vec3::new(coords[0][i], coords[1][i], coords[2][i])).collect()
}

/// Chooses quaternion signs along a breadth-first tree so that
/// `⟨qⱼ, qᵢ ⊗ qᵢⱼ⟩ ≥ 0` on every tree edge.
fn align_signs(graph: &PoseGraph, q: &mut [UnitQuat]) {
    let n = graph.n();
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(v) = queue.pop_front() {
        for &e in graph.out_edges(v).iter().chain(graph.in_edges(v)) {
            let edge = graph.edge(e);
            let other = if edge.i == v { edge.j } else { edge.i };
            if seen[other] {
                continue;
            }
            seen[other] = true;
            if q[edge.j].quat().dot(q[edge.i].compose(edge.q).quat()) < 0.0 {
                q[other] = q[other].neg();
            }
            queue.push_back(other);
        }
    }
}

/// Composes measurements along a breadth-first spanning tree from vertex 0.
/// This is the usual dead-reckoning guess stored in benchmark files.
pub fn odometry_init(graph: &PoseGraph) -> Result<PoseSet> {
    let n = graph.n();
    graph.ensure_connected()?;
    let mut poses = vec![Pose::IDENTITY; n];
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    if n > 0 {
        seen[0] = true;
    }
    while let Some(v) = queue.pop_front() {
        for &e in graph.out_edges(v).iter().chain(graph.in_edges(v)) {
            let edge = graph.edge(e);
            let other = if edge.i == v { edge.j } else { edge.i };
            if seen[other] {
                continue;
            }
            seen[other] = true;
            let base = poses[v];
            poses[other] = if edge.i == v {
                Pose::new(base.q.compose(edge.q), base.t + base.q.to_rotation_matrix() * edge.t)
            } else {
                let q = base.q.compose(edge.q.conj());
                Pose::new(q, base.t - q.to_rotation_matrix() * edge.t)
            };
            queue.push_back(other);
        }
    }
    Ok(PoseSet::new(poses))
}

pub fn chordal_init(graph: &PoseGraph) -> Result<PoseSet> {
    let n = graph.n();
    if n == 0 {
        return Err(PgoError::InvalidGraph("empty graph".into()));
    }
    graph.ensure_connected()?;
    let rot = solve_rotations(graph);
    let t = solve_translations(graph, &rot);
    let mut q: Vec<UnitQuat> = rot.iter().map(UnitQuat::from_rotation_matrix).collect();
    align_signs(graph, &mut q);
    if t.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
        return Err(PgoError::Numerical { vertex: 0, msg: "chordal initialization diverged".into() });
    }
    Ok(PoseSet::new(q.into_iter().zip(t).map(|(q, t)| Pose::new(q, t)).collect()))
}

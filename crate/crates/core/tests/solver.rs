use pgo_core::quat::tangent_project;
use pgo_core::solver::{augmented_lagrangian, objective, update_duals, update_p, update_q, update_s, update_t, Iterate};
use pgo_core::{evaluate, gen_cube, gen_ring, solve, CubeSpec, NoiseSpec, PgoError, PoseSet, Quat, SolverConfig, Status, UnitQuat};

#[test]
fn block_updates_never_raise_the_lagrangian() {
    let (_, graph) = gen_cube(&CubeSpec { n_hat: 3, p_cube: 0.4 }, &NoiseSpec::new(0.1, 0.1, 5)).unwrap();
    let cfg = SolverConfig::default();
    let out = solve(&graph, &SolverConfig { max_iter: 1, tol: 1e-300, ..cfg.clone() }, None).unwrap();
    let graph = out.graph;
    let mut x = out.state.x;
    for _ in 0..20 {
        let mut vals = vec![augmented_lagrangian(&x, &graph, &cfg)];
        x.p = update_p(&x, &graph, &cfg).unwrap();
        vals.push(augmented_lagrangian(&x, &graph, &cfg));
        x.q = update_q(&x, &graph, &cfg).unwrap();
        vals.push(augmented_lagrangian(&x, &graph, &cfg));
        x.t = update_t(&x, &graph, &cfg).unwrap();
        vals.push(augmented_lagrangian(&x, &graph, &cfg));
        x.s = update_s(&x, &graph, &cfg).unwrap();
        vals.push(augmented_lagrangian(&x, &graph, &cfg));
        for w in vals.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{vals:?}");
        }
        let (lambda, z) = update_duals(&x, &cfg);
        x.lambda = lambda;
        x.z = z;
    }
}

#[test]
fn truth_is_a_fixed_point() {
    let (truth, graph) = gen_ring(20, &NoiseSpec::noiseless(1)).unwrap();
    let out = solve(&graph, &SolverConfig::default(), Some(&truth)).unwrap();
    assert_eq!(out.status, Status::Converged);
    assert!(out.iterations() <= 5);
    assert!(out.trace.records.iter().all(|r| r.viol_pq <= 1e-6));
    assert!(evaluate(&out.poses, &truth, None).unwrap().rel_err < 1e-9);
}

#[test]
fn iterates_stay_on_the_sphere() {
    let (_, graph) = gen_ring(40, &NoiseSpec::new(0.1, 0.05, 2)).unwrap();
    let out = solve(&graph, &SolverConfig { max_iter: 30, ..SolverConfig::default() }, None).unwrap();
    assert!(out.state.x.p.iter().all(|p| (p.norm() - 1.0).abs() <= 1e-9));
}

fn fd<const D: usize>(v: &nalgebra::SVector<f64, D>, f: impl Fn(&nalgebra::SVector<f64, D>) -> f64) -> nalgebra::SVector<f64, D> {
    let h = 1e-6;
    nalgebra::SVector::from_fn(|k, _| {
        let (mut a, mut b) = (*v, *v);
        a[k] += h;
        b[k] -= h;
        (f(&a) - f(&b)) / (2.0 * h)
    })
}

/// Stationarity of the Lagrangian and feasibility at the returned iterate.
fn kkt_residual(x: &Iterate, graph: &pgo_core::PoseGraph, cfg: &SolverConfig) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let with = |edit: &dyn Fn(&mut Iterate)| {
            let mut y = x.clone();
            edit(&mut y);
            objective(&y, graph, cfg)
        };
        let gp = fd(&x.p[i], |v| with(&|y| y.p[i] = *v)) - x.lambda[i];
        let gq = fd(&x.q[i], |v| with(&|y| y.q[i] = *v)) + x.lambda[i];
        let gt = fd(&x.t[i], |v| with(&|y| y.t[i] = *v)) - x.z[i];
        let gs = fd(&x.s[i], |v| with(&|y| y.s[i] = *v)) + x.z[i];
        let pi = UnitQuat::normalize(Quat::from_vec4(&x.p[i])).unwrap();
        let gp = tangent_project(pi, Quat::from_vec4(&gp)).norm();
        worst = worst.max(gp).max(gq.amax()).max(gt.amax()).max(gs.amax());
        worst = worst.max((x.p[i] - x.q[i]).amax()).max((x.t[i] - x.s[i]).amax());
    }
    worst
}

#[test]
fn converged_ring_satisfies_kkt() {
    for (sr, st) in [(0.01, 0.01), (0.03, 0.05), (0.05, 0.1)] {
        let (_, graph) = gen_ring(100, &NoiseSpec::new(st, sr, 0)).unwrap();
        let cfg = SolverConfig::default();
        let out = solve(&graph, &cfg, None).unwrap();
        assert_eq!(out.status, Status::Converged);
        let r = kkt_residual(&out.state.x, &out.graph, &cfg);
        assert!(r <= 1e-2, "σ=({sr},{st}): KKT residual {r}");
    }
}

#[test]
fn thread_count_does_not_change_the_trace() {
    let (_, graph) = gen_cube(&CubeSpec { n_hat: 4, p_cube: 0.3 }, &NoiseSpec::new(0.03, 0.05, 6)).unwrap();
    let run = |threads| {
        let cfg = SolverConfig { threads, record_time: false, ..SolverConfig::default() };
        let out = solve(&graph, &cfg, None).unwrap();
        (out.trace.to_csv(), out.poses)
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(8));
}

#[test]
fn init_must_match_graph() {
    let (_, graph) = gen_ring(10, &NoiseSpec::noiseless(0)).unwrap();
    let err = solve(&graph, &SolverConfig::default(), Some(&PoseSet::identity(9))).unwrap_err();
    assert!(matches!(err, PgoError::SizeMismatch(_)));
}

#[test]
fn invalid_config_is_rejected_before_work() {
    let (_, graph) = gen_ring(10, &NoiseSpec::noiseless(0)).unwrap();
    let cfg = SolverConfig { tau: 2.0, ..SolverConfig::default() };
    assert!(matches!(solve(&graph, &cfg, None), Err(PgoError::InvalidConfig(_))));
}

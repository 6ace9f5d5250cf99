use pgo_core::graph::Edge;
use pgo_core::quat::Vec3;
use pgo_core::{parse_g2o, write_g2o_string, Pose, PoseGraph, PoseSet, Quat, UnitQuat};
use proptest::prelude::*;
use std::io::BufReader;

fn unit() -> impl Strategy<Value = UnitQuat> {
    prop::array::uniform4(-1.0f64..1.0)
        .prop_filter("non-zero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-3)
        .prop_map(|v| UnitQuat::normalize(Quat::new(v[0], v[1], v[2], v[3])).unwrap())
}

fn vec3() -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-50.0f64..50.0).prop_map(|v| Vec3::new(v[0], v[1], v[2]))
}

fn graph_and_poses() -> impl Strategy<Value = (PoseGraph, PoseSet)> {
    (2usize..12).prop_flat_map(|n| {
        let poses = prop::collection::vec((unit(), vec3()), n);
        let extra = prop::collection::vec((0..n, 0..n, unit(), vec3()), 0..n);
        let chain = prop::collection::vec((unit(), vec3()), n - 1);
        (poses, chain, extra).prop_map(move |(poses, chain, extra)| {
            let mut edges: Vec<Edge> = chain.into_iter().enumerate().map(|(i, (q, t))| Edge::new(i, i + 1, q, t)).collect();
            edges.extend(extra.into_iter().filter(|(i, j, _, _)| i != j).map(|(i, j, q, t)| Edge::new(i, j, q, t)));
            let graph = PoseGraph::new(n, edges).unwrap();
            (graph, PoseSet::new(poses.into_iter().map(|(q, t)| Pose::new(q, t)).collect()))
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn write_then_parse_round_trips((graph, poses) in graph_and_poses()) {
        let text = write_g2o_string(&graph, &poses).unwrap();
        let back = parse_g2o(BufReader::new(text.as_bytes())).unwrap();
        prop_assert!(back.warnings.is_empty());
        prop_assert_eq!(back.graph.n(), graph.n());
        prop_assert_eq!(back.graph.m(), graph.m());
        for (a, b) in back.graph.edges().iter().zip(graph.edges()) {
            prop_assert_eq!((a.i, a.j), (b.i, b.j));
            // parsing renormalizes, which may move the last bit
            prop_assert!((a.q.quat() - b.q.quat()).norm() <= 1e-15);
            prop_assert_eq!(a.t, b.t);
        }
        let back_poses = back.poses.unwrap();
        for (a, b) in back_poses.poses.iter().zip(&poses.poses) {
            prop_assert!((a.q.quat() - b.q.quat()).norm() <= 1e-15);
            prop_assert_eq!(a.t, b.t);
        }
    }
}

#[test]
fn bundled_fixture_parses() {
    let read = |name: &str| {
        let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name);
        parse_g2o(BufReader::new(std::fs::File::open(path).unwrap())).unwrap()
    };
    let data = read("sphere200.g2o");
    assert_eq!((data.graph.n(), data.graph.m()), (200, 550));
    assert!(data.warnings.is_empty());
    assert!(data.graph.edges().iter().all(|e| e.info.is_some()));
    let (trans, rot) = data.graph.mean_information().unwrap();
    assert_eq!((trans, rot), (100.0, 400.0));
    assert!(data.graph.ensure_connected().is_ok());
    let truth = read("sphere200.truth.g2o");
    assert_eq!(truth.poses.unwrap().len(), 200);
}

#[test]
fn truncated_edge_reports_line() {
    let text = "VERTEX_SE3:QUAT 0 0 0 0 0 0 0 1\nVERTEX_SE3:QUAT 1 1 0 0 0 0 0 1\nEDGE_SE3:QUAT 0 1 1 0 0 0 0\n";
    let err = parse_g2o(BufReader::new(text.as_bytes())).unwrap_err();
    assert!(err.to_string().starts_with("line 3"), "{err}");
}

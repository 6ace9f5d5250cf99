use pgo_core::{gen_cube, CubeSpec, NoiseSpec};

#[test]
fn cube_edge_count_matches_expectation() {
    let spec = CubeSpec { n_hat: 5, p_cube: 0.3 };
    let draws = 200;
    let mean = (0..draws).map(|s| gen_cube(&spec, &NoiseSpec::new(0.01, 0.01, s)).unwrap().1.m() as f64).sum::<f64>() / draws as f64;
    let se = spec.edge_count_std() / (draws as f64).sqrt();
    assert!((mean - spec.expected_edges()).abs() < 4.0 * se, "mean {mean}, expected {}", spec.expected_edges());
}

//! Pose graph optimization on unit quaternions with a parallel splitting
//! ADMM.
//!
//! ```
//! use pgo_core::{gen_ring, solve, evaluate, NoiseSpec, SolverConfig};
//!
//! let (truth, graph) = gen_ring(30, &NoiseSpec::new(0.01, 0.01, 7)).unwrap();
//! let out = solve(&graph, &SolverConfig::default(), None).unwrap();
//! let report = evaluate(&out.poses, &truth, Some(&graph)).unwrap();
//! assert!(report.rel_err < 0.1);
//! ```

pub mod error;
pub mod graph;
pub mod metrics;
pub mod quat;
pub mod solver;
pub mod sphereqp;
pub mod synth;

pub use error::{PgoError, Result};
pub use graph::{parse_g2o, partition_edges, write_g2o, write_g2o_string, Edge, G2oData, Pose, PoseGraph, PoseSet};
pub use metrics::{edge_losses, evaluate, gauge_align, nrmse, rel_err, EdgeLosses, EvalReport};
pub use quat::{Quat, UnitQuat};
pub use solver::{chordal_init, estimate_lipschitz, solve, IterTrace, LipschitzEstimates, SolveOutput, SolverConfig, SolverState, Status};
pub use sphereqp::{brute_oracle, solve_eig, solve_scalar, SphereQP, SphereQPSolution};
pub use synth::{gen_cube, gen_ring, sample_vmf_s3, CubeSpec, KappaMode, NoiseSpec};

//! Pose-graph data model and g2o (`VERTEX_SE3:QUAT` / `EDGE_SE3:QUAT`) I/O.

use crate::error::{PgoError, Result};
use crate::quat::{Quat, UnitQuat, Vec3};
use nalgebra::Matrix6;
use std::collections::HashMap;
use std::io::{BufRead, Write};

/// Quaternions whose norm deviates more than this from 1 are reported.
const RENORMALIZE_WARN_TOL: f64 = 1e-3;

/// A directed relative-pose measurement from vertex `i` to vertex `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    /// Relative rotation `q_ij`.
    pub q: UnitQuat,
    /// Relative translation `t_ij`, expressed in the frame of `i`.
    pub t: Vec3,
    /// Optional 6×6 information matrix in g2o order `[x y z qx qy qz]`.
    pub info: Option<Matrix6<f64>>,
}

impl Edge {
    pub fn new(i: usize, j: usize, q: UnitQuat, t: Vec3) -> Self {
        Edge { i, j, q, t, info: None }
    }
}

/// An absolute pose: rotation plus translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub q: UnitQuat,
    pub t: Vec3,
}

impl Pose {
    pub const IDENTITY: Pose = Pose { q: UnitQuat::IDENTITY, t: Vec3::new(0.0, 0.0, 0.0) };

    pub fn new(q: UnitQuat, t: Vec3) -> Self {
        Pose { q, t }
    }
}

/// One pose per vertex.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PoseSet {
    pub poses: Vec<Pose>,
}

impl PoseSet {
    pub fn new(poses: Vec<Pose>) -> Self {
        PoseSet { poses }
    }

    pub fn identity(n: usize) -> Self {
        PoseSet { poses: vec![Pose::IDENTITY; n] }
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn rotations(&self) -> impl Iterator<Item = UnitQuat> + '_ {
        self.poses.iter().map(|p| p.q)
    }

    pub fn translations(&self) -> impl Iterator<Item = Vec3> + '_ {
        self.poses.iter().map(|p| p.t)
    }
}

/// Directed pose graph with per-vertex in/out edge partitions.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseGraph {
    n: usize,
    edges: Vec<Edge>,
    out_edges: Vec<Vec<usize>>,
    in_edges: Vec<Vec<usize>>,
    /// Original vertex ids (used when writing back to g2o).
    vertex_ids: Vec<i64>,
}

impl PoseGraph {
    pub fn new(n: usize, edges: Vec<Edge>) -> Result<Self> {
        let ids = (0..n as i64).collect();
        Self::with_ids(n, edges, ids)
    }

    pub fn with_ids(n: usize, edges: Vec<Edge>, vertex_ids: Vec<i64>) -> Result<Self> {
        if vertex_ids.len() != n {
            return Err(PgoError::SizeMismatch(format!("{} ids for {n} vertices", vertex_ids.len())));
        }
        for (k, e) in edges.iter().enumerate() {
            if e.i >= n || e.j >= n {
                return Err(PgoError::InvalidGraph(format!("edge {k} ({}, {}) out of range for n = {n}", e.i, e.j)));
            }
            if e.i == e.j {
                return Err(PgoError::InvalidGraph(format!("edge {k} is a self-loop on vertex {}", e.i)));
            }
            if !e.t.iter().all(|v| v.is_finite()) {
                return Err(PgoError::InvalidGraph(format!("edge {k} has a non-finite translation")));
            }
        }
        let (out_edges, in_edges) = partition_edges(n, &edges);
        Ok(PoseGraph { n, edges, out_edges, in_edges, vertex_ids })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, k: usize) -> &Edge {
        &self.edges[k]
    }

    /// Indices of edges `(i, j)` leaving vertex `i`.
    pub fn out_edges(&self, i: usize) -> &[usize] {
        &self.out_edges[i]
    }

    /// Indices of edges `(l, i)` entering vertex `i`.
    pub fn in_edges(&self, i: usize) -> &[usize] {
        &self.in_edges[i]
    }

    pub fn vertex_ids(&self) -> &[i64] {
        &self.vertex_ids
    }

    /// Rebuilds the graph with every edge passed through `f`.
    pub fn map_edges(&self, mut f: impl FnMut(usize, &Edge) -> Edge) -> Result<PoseGraph> {
        let edges = self.edges.iter().enumerate().map(|(k, e)| f(k, e)).collect();
        PoseGraph::with_ids(self.n, edges, self.vertex_ids.clone())
    }

    /// Number of weakly connected components.
    pub fn components(&self) -> usize {
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut count = self.n;
        for e in &self.edges {
            let (a, b) = (find(&mut parent, e.i), find(&mut parent, e.j));
            if a != b {
                parent[a] = b;
                count -= 1;
            }
        }
        count
    }

    pub fn ensure_connected(&self) -> Result<()> {
        match self.components() {
            0 | 1 => Ok(()),
            c => Err(PgoError::Disconnected { components: c }),
        }
    }

    /// Mean translational and rotational diagonal information over all edges
    /// that carry an information matrix.
    pub fn mean_information(&self) -> Option<(f64, f64)> {
        let infos: Vec<_> = self.edges.iter().filter_map(|e| e.info.as_ref()).collect();
        if infos.is_empty() {
            return None;
        }
        let k = infos.len() as f64 * 3.0;
        let trans = infos.iter().map(|m| m[(0, 0)] + m[(1, 1)] + m[(2, 2)]).sum::<f64>() / k;
        let rot = infos.iter().map(|m| m[(3, 3)] + m[(4, 4)] + m[(5, 5)]).sum::<f64>() / k;
        Some((trans, rot))
    }
}

/// Splits edge indices into `(out_edges, in_edges)` per vertex:
/// `out_edges[i] = {e : e.i = i}`, `in_edges[i] = {e : e.j = i}`.
pub fn partition_edges(n: usize, edges: &[Edge]) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    let mut out_edges = vec![Vec::new(); n];
    let mut in_edges = vec![Vec::new(); n];
    for (k, e) in edges.iter().enumerate() {
        out_edges[e.i].push(k);
        in_edges[e.j].push(k);
    }
    (out_edges, in_edges)
}

/// Result of reading a g2o file.
#[derive(Debug, Clone)]
pub struct G2oData {
    pub graph: PoseGraph,
    /// Vertex poses, when the file carries `VERTEX_SE3:QUAT` records.
    pub poses: Option<PoseSet>,
    pub warnings: Vec<String>,
}

fn parse_numbers(fields: &[&str], line: usize) -> Result<Vec<f64>> {
    fields
        .iter()
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| PgoError::Parse { line, msg: format!("invalid number {s:?}") })
                .and_then(|v| {
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(PgoError::Parse { line, msg: format!("non-finite value {s:?}") })
                    }
                })
        })
        .collect()
}

fn parse_id(s: &str, line: usize) -> Result<i64> {
    s.parse::<i64>().map_err(|_| PgoError::Parse { line, msg: format!("invalid vertex id {s:?}") })
}

/// g2o stores `[qx qy qz qw]`.
fn quat_from_g2o(v: &[f64], line: usize, warnings: &mut Vec<String>) -> Result<UnitQuat> {
    let q = Quat::new(v[3], v[0], v[1], v[2]);
    let norm = q.norm();
    if (norm - 1.0).abs() > RENORMALIZE_WARN_TOL {
        let msg = format!("line {line}: quaternion norm {norm} renormalized");
        log::warn!("{msg}");
        warnings.push(msg);
    }
    UnitQuat::normalize(q).ok_or(PgoError::Parse { line, msg: "zero quaternion".into() })
}

fn info_from_upper(v: &[f64]) -> Matrix6<f64> {
    let mut m = Matrix6::zeros();
    let mut k = 0;
    for r in 0..6 {
        for c in r..6 {
            m[(r, c)] = v[k];
            m[(c, r)] = v[k];
            k += 1;
        }
    }
    m
}

/// Parses a g2o stream. Unknown record types are skipped with a warning;
/// `#` starts a comment.
pub fn parse_g2o<R: BufRead>(reader: R) -> Result<G2oData> {
    struct RawEdge {
        a: i64,
        b: i64,
        q: UnitQuat,
        t: Vec3,
        info: Option<Matrix6<f64>>,
        line: usize,
    }

    let mut warnings = Vec::new();
    let mut vertex_index: HashMap<i64, usize> = HashMap::new();
    let mut vertex_ids = Vec::new();
    let mut poses = Vec::new();
    let mut raw_edges = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let content = line.split('#').next().unwrap_or("");
        let fields: Vec<&str> = content.split_whitespace().collect();
        let Some(&tag) = fields.first() else { continue };
        match tag {
            "VERTEX_SE3:QUAT" => {
                if fields.len() != 9 {
                    return Err(PgoError::Parse {
                        line: lineno,
                        msg: format!("VERTEX_SE3:QUAT expects 8 fields, got {}", fields.len() - 1),
                    });
                }
                let id = parse_id(fields[1], lineno)?;
                let v = parse_numbers(&fields[2..], lineno)?;
                if vertex_index.contains_key(&id) {
                    return Err(PgoError::DuplicateVertex { id, line: lineno });
                }
                let q = quat_from_g2o(&v[3..7], lineno, &mut warnings)?;
                vertex_index.insert(id, vertex_ids.len());
                vertex_ids.push(id);
                poses.push(Pose::new(q, Vec3::new(v[0], v[1], v[2])));
            }
            "EDGE_SE3:QUAT" => {
                if fields.len() != 10 && fields.len() != 31 {
                    return Err(PgoError::Parse {
                        line: lineno,
                        msg: format!("EDGE_SE3:QUAT expects 9 or 30 fields, got {}", fields.len() - 1),
                    });
                }
                let a = parse_id(fields[1], lineno)?;
                let b = parse_id(fields[2], lineno)?;
                let v = parse_numbers(&fields[3..], lineno)?;
                let q = quat_from_g2o(&v[3..7], lineno, &mut warnings)?;
                let info = (v.len() == 28).then(|| info_from_upper(&v[7..]));
                raw_edges.push(RawEdge { a, b, q, t: Vec3::new(v[0], v[1], v[2]), info, line: lineno });
            }
            other => {
                let msg = format!("line {lineno}: unsupported record {other} skipped");
                log::warn!("{msg}");
                warnings.push(msg);
            }
        }
    }

    let have_vertices = !vertex_ids.is_empty();
    if !have_vertices {
        let mut ids: Vec<i64> = raw_edges.iter().flat_map(|e| [e.a, e.b]).collect();
        ids.sort_unstable();
        ids.dedup();
        for id in ids {
            vertex_index.insert(id, vertex_ids.len());
            vertex_ids.push(id);
        }
    }

    let mut edges = Vec::with_capacity(raw_edges.len());
    for e in raw_edges {
        let lookup = |id: i64| {
            vertex_index.get(&id).copied().ok_or(PgoError::Parse {
                line: e.line,
                msg: format!("edge references unknown vertex {id}"),
            })
        };
        let (i, j) = (lookup(e.a)?, lookup(e.b)?);
        if i == j {
            return Err(PgoError::Parse { line: e.line, msg: format!("self-loop on vertex {}", e.a) });
        }
        edges.push(Edge { i, j, q: e.q, t: e.t, info: e.info });
    }

    let n = vertex_ids.len();
    let graph = PoseGraph::with_ids(n, edges, vertex_ids)?;
    let poses = have_vertices.then(|| PoseSet::new(poses));
    Ok(G2oData { graph, poses, warnings })
}

fn fmt_num(v: f64) -> String {
    // shortest representation that reparses to the same f64
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v}")
    }
}

fn write_pose_fields(out: &mut String, t: &Vec3, q: UnitQuat) {
    let q = q.quat();
    for v in [t.x, t.y, t.z, q.x, q.y, q.z, q.w] {
        out.push(' ');
        out.push_str(&fmt_num(v));
    }
}

/// Writes vertex records followed by edge records. Edges without an
/// information matrix are written with the identity.
pub fn write_g2o<W: Write>(mut w: W, graph: &PoseGraph, poses: &PoseSet) -> Result<()> {
    if poses.len() != graph.n() {
        return Err(PgoError::SizeMismatch(format!("{} poses for {} vertices", poses.len(), graph.n())));
    }
    let ids = graph.vertex_ids();
    let mut line = String::with_capacity(256);
    for (k, p) in poses.poses.iter().enumerate() {
        line.clear();
        line.push_str("VERTEX_SE3:QUAT ");
        line.push_str(&ids[k].to_string());
        write_pose_fields(&mut line, &p.t, p.q);
        writeln!(w, "{line}")?;
    }
    for e in graph.edges() {
        line.clear();
        line.push_str(&format!("EDGE_SE3:QUAT {} {}", ids[e.i], ids[e.j]));
        write_pose_fields(&mut line, &e.t, e.q);
        let info = e.info.unwrap_or_else(Matrix6::identity);
        for r in 0..6 {
            for c in r..6 {
                line.push(' ');
                line.push_str(&fmt_num(info[(r, c)]));
            }
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn write_g2o_string(graph: &PoseGraph, poses: &PoseSet) -> Result<String> {
    let mut buf = Vec::new();
    write_g2o(&mut buf, graph, poses)?;
    Ok(String::from_utf8(buf).expect("g2o output is ASCII"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<G2oData> {
        parse_g2o(s.as_bytes())
    }

    #[test]
    fn single_vertex() {
        let d = parse("VERTEX_SE3:QUAT 0 0 0 0 0 0 0 1\n").unwrap();
        assert_eq!(d.graph.n(), 1);
        assert_eq!(d.graph.m(), 0);
        assert_eq!(d.poses.unwrap().poses[0], Pose::IDENTITY);
    }

    #[test]
    fn one_edge_layout() {
        let mut info = String::new();
        for r in 0..6 {
            for c in r..6 {
                info.push_str(if r == c { " 1" } else { " 0" });
            }
        }
        let text = format!(
            "# comment\nVERTEX_SE3:QUAT 0 0 0 0 0 0 0 1\nVERTEX_SE3:QUAT 1 1 0 0 0 0 0 1\nEDGE_SE3:QUAT 0 1 1 0 0 0 0 0 1{info}\n"
        );
        let d = parse(&text).unwrap();
        let e = d.graph.edge(0);
        assert_eq!((e.i, e.j), (0, 1));
        assert_eq!(e.t, Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(e.q, UnitQuat::IDENTITY);
        assert_eq!(e.info.unwrap(), Matrix6::identity());
    }

    #[test]
    fn sparse_ids_are_remapped_in_order() {
        let text = "VERTEX_SE3:QUAT 10 0 0 0 0 0 0 1\nVERTEX_SE3:QUAT 4 1 0 0 0 0 0 1\nEDGE_SE3:QUAT 10 4 1 0 0 0 0 0 1\n";
        let d = parse(text).unwrap();
        assert_eq!(d.graph.vertex_ids(), &[10, 4]);
        assert_eq!((d.graph.edge(0).i, d.graph.edge(0).j), (0, 1));
        assert!(d.graph.edge(0).info.is_none());
        let out = write_g2o_string(&d.graph, d.poses.as_ref().unwrap()).unwrap();
        assert!(out.starts_with("VERTEX_SE3:QUAT 10 "));
        assert!(out.contains("EDGE_SE3:QUAT 10 4 "));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse("VERTEX_SE3:QUAT 0 0 0 0 0 0 0 1\nVERTEX_SE3:QUAT 1 0 0 x 0 0 0 1\n").unwrap_err();
        assert!(matches!(err, PgoError::Parse { line: 2, .. }), "{err}");
        let err = parse("VERTEX_SE3:QUAT 0 0 0 0 0 0 0 1\nVERTEX_SE3:QUAT 0 0 0 0 0 0 0 1\n").unwrap_err();
        assert!(matches!(err, PgoError::DuplicateVertex { id: 0, line: 2 }));
        let err = parse("EDGE_SE3:QUAT 0 1 1 0 0\n").unwrap_err();
        assert!(matches!(err, PgoError::Parse { line: 1, .. }));
        let err = parse("VERTEX_SE3:QUAT 0 0 0 0 0 0 0 1\nEDGE_SE3:QUAT 0 7 1 0 0 0 0 0 1\n").unwrap_err();
        assert!(matches!(err, PgoError::Parse { line: 2, .. }));
    }

    #[test]
    fn non_unit_quaternion_warns_and_renormalizes() {
        let d = parse("VERTEX_SE3:QUAT 0 0 0 0 0 0 0 2\n").unwrap();
        assert_eq!(d.warnings.len(), 1);
        assert_eq!(d.poses.unwrap().poses[0].q, UnitQuat::IDENTITY);
        let d = parse("VERTEX_SE3:QUAT 0 0 0 0 0 0 0 1.0000001\n").unwrap();
        assert!(d.warnings.is_empty());
    }

    #[test]
    fn writer_prints_identity_in_xyzw_order() {
        let g = PoseGraph::new(2, vec![]).unwrap();
        let out = write_g2o_string(&g, &PoseSet::identity(2)).unwrap();
        assert_eq!(out, "VERTEX_SE3:QUAT 0 0 0 0 0 0 0 1\nVERTEX_SE3:QUAT 1 0 0 0 0 0 0 1\n");
        assert!(write_g2o_string(&g, &PoseSet::identity(3)).is_err());
    }

    #[test]
    fn partition_single_edge_and_ring() {
        let g = PoseGraph::new(3, vec![Edge::new(0, 1, UnitQuat::IDENTITY, Vec3::x())]).unwrap();
        assert_eq!(g.out_edges(0), &[0]);
        assert_eq!(g.in_edges(1), &[0]);
        assert!(g.in_edges(0).is_empty() && g.out_edges(1).is_empty() && g.out_edges(2).is_empty());
        assert_eq!(g.components(), 2);
        assert!(g.ensure_connected().is_err());

        let n = 7;
        let ring = (0..n).map(|i| Edge::new(i, (i + 1) % n, UnitQuat::IDENTITY, Vec3::x())).collect();
        let g = PoseGraph::new(n, ring).unwrap();
        for i in 0..n {
            assert_eq!(g.out_edges(i).len(), 1);
            assert_eq!(g.in_edges(i).len(), 1);
        }
        assert!(g.ensure_connected().is_ok());
    }

    #[test]
    fn rejects_self_loops_and_out_of_range() {
        assert!(PoseGraph::new(2, vec![Edge::new(1, 1, UnitQuat::IDENTITY, Vec3::x())]).is_err());
        assert!(PoseGraph::new(2, vec![Edge::new(0, 2, UnitQuat::IDENTITY, Vec3::x())]).is_err());
    }

    #[test]
    fn mean_information_blocks() {
        let mut info = Matrix6::identity();
        info[(0, 0)] = 4.0;
        info[(4, 4)] = 7.0;
        let mut e = Edge::new(0, 1, UnitQuat::IDENTITY, Vec3::x());
        e.info = Some(info);
        let g = PoseGraph::new(2, vec![e]).unwrap();
        let (t, r) = g.mean_information().unwrap();
        assert!((t - 2.0).abs() < 1e-15 && (r - 3.0).abs() < 1e-15);
    }
}

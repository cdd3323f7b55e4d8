//! Critical point trajectories as the zero set of the piecewise-linear
//! spacetime field.
//!
//! Each triangle-by-interval prism is cut into three tetrahedra. The zero set
//! crosses a tetrahedron along a segment that enters and leaves through two of
//! its faces; which faces are crossed is decided by the same perturbed sign
//! test used for 2D extraction, with spacetime vertex `k * V + v` for mesh
//! vertex `v` in frame `k`. Linking crossed faces through shared tetrahedra
//! yields paths and closed loops.

use std::collections::{BTreeMap, HashMap};

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::critical::{triangle_zero, CriticalPoint};
use crate::error::{Error, Result};
use crate::field::{dist, TimeVaryingField, Vec2};
use crate::merge_tree::RobustnessValue;
use crate::predicates::{origin_in_triangle, zero_barycentric};

/// Tolerance for matching slice nodes to critical points, relative to `L`.
pub const SLICE_MATCH_REL: f64 = 1e-6;

/// A tetrahedron of the spacetime mesh, by spacetime vertex id.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpacetimeTet {
    pub vertices: [u64; 4],
    /// `interval * triangle_count + triangle`.
    pub prism: usize,
    pub local: u8,
}

impl SpacetimeTet {
    /// Spacetime point `(x, y, t)` of vertex `k` of this tetrahedron.
    pub fn point(&self, field: &TimeVaryingField, k: usize) -> [f64; 3] {
        spacetime_point(field, self.vertices[k])
    }

    /// Field value attached to vertex `k`.
    pub fn vector(&self, field: &TimeVaryingField, k: usize) -> Vec2 {
        spacetime_vector(field, self.vertices[k])
    }

    /// Signed volume times six.
    pub fn volume6(&self, field: &TimeVaryingField) -> f64 {
        let p = [0, 1, 2, 3].map(|k| self.point(field, k));
        let d = |k: usize| [p[k][0] - p[0][0], p[k][1] - p[0][1], p[k][2] - p[0][2]];
        let (a, b, c) = (d(1), d(2), d(3));
        a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
            + a[2] * (b[0] * c[1] - b[1] * c[0])
    }

    /// The four faces, each as ascending vertex ids.
    pub fn faces(&self) -> [[u64; 3]; 4] {
        let v = self.vertices;
        [
            [v[1], v[2], v[3]],
            [v[0], v[2], v[3]],
            [v[0], v[1], v[3]],
            [v[0], v[1], v[2]],
        ]
        .map(|mut f| {
            f.sort_unstable();
            f
        })
    }
}

fn split(field: &TimeVaryingField, id: u64) -> (usize, usize) {
    let nv = field.mesh.vertex_count() as u64;
    ((id / nv) as usize, (id % nv) as usize)
}

fn spacetime_point(field: &TimeVaryingField, id: u64) -> [f64; 3] {
    let (k, v) = split(field, id);
    let p = field.mesh.vertices()[v];
    [p[0], p[1], field.frames[k].time]
}

fn spacetime_vector(field: &TimeVaryingField, id: u64) -> Vec2 {
    let (k, v) = split(field, id);
    field.frames[k].vectors[v]
}

/// The three tetrahedra of one prism. With corners sorted `a < b < c`, every
/// quad face is cut from its lower-id bottom corner to its higher-id top
/// corner, so neighboring prisms agree on shared faces.
fn prism_tets(field: &TimeVaryingField, interval: usize, triangle: usize) -> [SpacetimeTet; 3] {
    let nv = field.mesh.vertex_count() as u64;
    let mut tri = field.mesh.triangles()[triangle].map(|v| v as u64);
    tri.sort_unstable();
    let [a, b, c] = tri;
    let (lo, hi) = (interval as u64 * nv, (interval as u64 + 1) * nv);
    let prism = interval * field.mesh.triangle_count() + triangle;
    let tet = |vertices, local| SpacetimeTet {
        vertices,
        prism,
        local,
    };
    [
        tet([a + lo, b + lo, c + lo, c + hi], 0),
        tet([a + lo, b + lo, b + hi, c + hi], 1),
        tet([a + lo, a + hi, b + hi, c + hi], 2),
    ]
}

/// All tetrahedra, ordered by interval, triangle, and local index.
pub fn build_spacetime_mesh(field: &TimeVaryingField) -> Result<Vec<SpacetimeTet>> {
    if field.frame_count() < 2 {
        return Err(Error::InvalidArgument(
            "tracking needs at least two frames".into(),
        ));
    }
    let nt = field.mesh.triangle_count();
    Ok((0..field.frame_count() - 1)
        .flat_map(|k| (0..nt).flat_map(move |t| prism_tets(field, k, t)))
        .collect())
}

fn face_punctured(field: &TimeVaryingField, face: [u64; 3]) -> bool {
    origin_in_triangle(face.map(|id| spacetime_vector(field, id)), face).is_some()
}

/// One point of a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryNode {
    /// Position along the trajectory; not necessarily time order.
    pub index: usize,
    pub x: f64,
    pub y: f64,
    pub t: f64,
    /// Frame index when the node lies on a time slice.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slice: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cp_id: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<i32>,
    #[serde(default, rename = "minR", skip_serializing_if = "Option::is_none")]
    pub min_r: Option<RobustnessValue>,
}

impl TrajectoryNode {
    /// A slice node carrying its own robustness annotation.
    pub fn is_annotated(&self) -> bool {
        self.slice.is_some() && self.min_r.is_some()
    }
}

/// Where a trajectory came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Provenance {
    /// A piece of trajectory `source` covering the listed inclusive node
    /// index ranges of the source.
    Piece {
        source: usize,
        ranges: Vec<[usize; 2]>,
    },
    Original(OriginalTag),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OriginalTag {
    Original,
}

impl Provenance {
    pub fn original() -> Self {
        Provenance::Original(OriginalTag::Original)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub id: usize,
    pub provenance: Provenance,
    /// Whether the last node connects back to the first.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub closed: bool,
    pub nodes: Vec<TrajectoryNode>,
}

impl Trajectory {
    pub fn annotated(&self) -> impl Iterator<Item = &TrajectoryNode> {
        self.nodes.iter().filter(|n| n.is_annotated())
    }

    /// `max t - min t` over all nodes.
    pub fn time_extent(&self) -> f64 {
        let (lo, hi) = self
            .nodes
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), n| {
                (lo.min(n.t), hi.max(n.t))
            });
        if lo.is_finite() {
            hi - lo
        } else {
            0.0
        }
    }
}

/// Zero-set trajectories of `field`, ordered by their first node.
///
/// Crossed faces are found in parallel; linking them is sequential.
pub fn extract_trajectories(field: &TimeVaryingField) -> Result<Vec<Trajectory>> {
    let nt = field.mesh.triangle_count();
    let intervals = field
        .frame_count()
        .checked_sub(1)
        .filter(|&k| k > 0)
        .ok_or_else(|| Error::InvalidArgument("tracking needs at least two frames".into()))?;

    let links: Vec<[[u64; 3]; 2]> = (0..intervals * nt)
        .into_par_iter()
        .flat_map_iter(|prism| {
            prism_tets(field, prism / nt, prism % nt)
                .into_iter()
                .flat_map(|tet| {
                    let hit: Vec<[u64; 3]> = tet
                        .faces()
                        .into_iter()
                        .filter(|&f| face_punctured(field, f))
                        .collect();
                    match hit.len() {
                        0 => vec![],
                        2 => vec![[hit[0], hit[1]]],
                        4 => {
                            warn!("tetrahedron {:?} has four crossed faces", tet.vertices);
                            vec![[hit[0], hit[1]], [hit[2], hit[3]]]
                        }
                        n => {
                            warn!("tetrahedron {:?} has {n} crossed faces", tet.vertices);
                            vec![]
                        }
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect();

    let mut keys: Vec<[u64; 3]> = links.iter().flatten().copied().collect();
    keys.sort_unstable();
    keys.dedup();
    let index: HashMap<[u64; 3], usize> = keys.iter().enumerate().map(|(i, &k)| (k, i)).collect();
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); keys.len()];
    for [a, b] in &links {
        let (a, b) = (index[a], index[b]);
        adjacency[a].push(b);
        adjacency[b].push(a);
    }
    for (i, adj) in adjacency.iter().enumerate() {
        if adj.len() > 2 {
            warn!("face {:?} joins {} segments", keys[i], adj.len());
        }
    }

    let tri_index: HashMap<[usize; 3], usize> = field
        .mesh
        .triangles()
        .iter()
        .enumerate()
        .map(|(t, tri)| {
            let mut s = *tri;
            s.sort_unstable();
            (s, t)
        })
        .collect();
    let nodes: Vec<TrajectoryNode> = keys
        .par_iter()
        .map(|&face| face_node(field, face, &tri_index))
        .collect();
    let order_key = |i: usize| (nodes[i].t, nodes[i].x, nodes[i].y, i);
    let cmp = |a: usize, b: usize| {
        let (ka, kb) = (order_key(a), order_key(b));
        ka.0.total_cmp(&kb.0)
            .then(ka.1.total_cmp(&kb.1))
            .then(ka.2.total_cmp(&kb.2))
            .then(ka.3.cmp(&kb.3))
    };

    let mut visited = vec![false; keys.len()];
    let mut chains: Vec<(Vec<usize>, bool)> = Vec::new();
    // Open paths first, each from its lower endpoint.
    let mut endpoints: Vec<usize> = (0..keys.len())
        .filter(|&i| adjacency[i].len() == 1)
        .collect();
    endpoints.sort_by(|&a, &b| cmp(a, b));
    for start in endpoints {
        if !visited[start] {
            chains.push((walk(start, None, &adjacency, &mut visited), false));
        }
    }
    // Whatever remains lies on closed loops.
    let mut rest: Vec<usize> = (0..keys.len()).filter(|&i| !visited[i]).collect();
    rest.sort_by(|&a, &b| cmp(a, b));
    for start in rest {
        if visited[start] {
            continue;
        }
        let first = adjacency[start].iter().copied().min_by(|&a, &b| cmp(a, b));
        let mut chain = vec![start];
        visited[start] = true;
        if let Some(next) = first {
            chain.extend(walk(next, Some(start), &adjacency, &mut visited));
        }
        chains.push((chain, adjacency[start].len() == 2));
    }

    chains.sort_by(|a, b| cmp(a.0[0], b.0[0]));
    Ok(chains
        .into_iter()
        .enumerate()
        .map(|(id, (chain, closed))| Trajectory {
            id,
            provenance: Provenance::original(),
            closed,
            nodes: chain
                .iter()
                .enumerate()
                .map(|(index, &i)| TrajectoryNode {
                    index,
                    ..nodes[i].clone()
                })
                .collect(),
        })
        .collect())
}

fn walk(
    start: usize,
    prev: Option<usize>,
    adjacency: &[Vec<usize>],
    visited: &mut [bool],
) -> Vec<usize> {
    let mut chain = Vec::new();
    let (mut cur, mut prev) = (start, prev);
    loop {
        if visited[cur] {
            break;
        }
        visited[cur] = true;
        chain.push(cur);
        let Some(&next) = adjacency[cur]
            .iter()
            .find(|&&n| Some(n) != prev && !visited[n])
        else {
            break;
        };
        prev = Some(cur);
        cur = next;
    }
    chain
}

fn face_node(
    field: &TimeVaryingField,
    face: [u64; 3],
    tri_index: &HashMap<[usize; 3], usize>,
) -> TrajectoryNode {
    let parts = face.map(|id| split(field, id));
    let horizontal = parts.iter().all(|p| p.0 == parts[0].0);
    if horizontal {
        let k = parts[0].0;
        let tri = parts.map(|p| p.1);
        if let Some(&t) = tri_index.get(&tri) {
            if let Some((_, pos)) = triangle_zero(&field.frames[k], &field.mesh, t) {
                return TrajectoryNode {
                    index: 0,
                    x: pos[0],
                    y: pos[1],
                    t: field.frames[k].time,
                    slice: Some(k),
                    cp_id: None,
                    degree: None,
                    min_r: None,
                };
            }
        }
    }
    let l = zero_barycentric(face.map(|id| spacetime_vector(field, id)));
    let p = face.map(|id| spacetime_point(field, id));
    let mix = |c: usize| l[0] * p[0][c] + l[1] * p[1][c] + l[2] * p[2][c];
    TrajectoryNode {
        index: 0,
        x: mix(0),
        y: mix(1),
        t: mix(2),
        slice: horizontal.then_some(parts[0].0),
        cp_id: None,
        degree: None,
        min_r: None,
    }
}

/// Per-frame critical points and their robustness, used to annotate slices.
#[derive(Clone, Debug, Default)]
pub struct SliceCatalog {
    /// Critical points of each frame, indexed by frame.
    pub cps: Vec<Vec<CriticalPoint>>,
    pub min_r: BTreeMap<(usize, usize), RobustnessValue>,
}

/// Matches each slice node to a critical point of its frame and copies its
/// degree and minR; other nodes inherit from the annotated node nearest in
/// time among the two bracketing it, the earlier one on ties. Returns the
/// number of slice nodes left unmatched.
pub fn slice_annotate(traj: &mut Trajectory, catalog: &SliceCatalog, diameter: f64) -> usize {
    let tol = SLICE_MATCH_REL * diameter;
    let mut unmatched = 0;
    for node in &mut traj.nodes {
        node.cp_id = None;
        node.degree = None;
        node.min_r = None;
        let Some(k) = node.slice else { continue };
        let found = catalog.cps.get(k).and_then(|cps| {
            cps.iter()
                .map(|cp| (dist(cp.position, [node.x, node.y]), cp))
                .filter(|(d, _)| *d <= tol)
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .map(|(_, cp)| cp)
        });
        match found {
            Some(cp) => {
                node.cp_id = Some(cp.id);
                node.degree = Some(cp.degree);
                node.min_r = catalog.min_r.get(&(k, cp.id)).copied();
            }
            None => {
                warn!(
                    "trajectory {} node {}: no critical point of frame {k} at ({}, {})",
                    traj.id, node.index, node.x, node.y
                );
                unmatched += 1;
            }
        }
    }

    let sources: Vec<usize> = (0..traj.nodes.len())
        .filter(|&i| traj.nodes[i].slice.is_some() && traj.nodes[i].degree.is_some())
        .collect();
    if sources.is_empty() {
        return unmatched;
    }
    let mut next_source = 0;
    for i in 0..traj.nodes.len() {
        while next_source < sources.len() && sources[next_source] < i {
            next_source += 1;
        }
        if sources.get(next_source) == Some(&i) {
            continue;
        }
        let before = next_source.checked_sub(1).map(|k| sources[k]);
        let after = sources.get(next_source).copied();
        let t = traj.nodes[i].t;
        let from = match (before, after) {
            (Some(b), Some(a)) => {
                if (traj.nodes[a].t - t).abs() < (traj.nodes[b].t - t).abs() {
                    a
                } else {
                    b
                }
            }
            (Some(b), None) => b,
            (None, Some(a)) => a,
            (None, None) => unreachable!(),
        };
        let (degree, min_r) = (traj.nodes[from].degree, traj.nodes[from].min_r);
        traj.nodes[i].degree = degree;
        traj.nodes[i].min_r = min_r;
    }
    unmatched
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critical::extract_critical_points;
    use crate::field::TriangleMesh;
    use crate::synth::sample_field;

    fn steady() -> TimeVaryingField {
        let mesh = TriangleMesh::grid(10, 10, [0.0, 0.0], 1.0, 1.0).unwrap();
        sample_field(mesh, &[0.0, 1.0, 2.0, 3.0], |x, y, _| {
            [x - 0.43, -(y - 0.57)]
        })
        .unwrap()
    }

    #[test]
    fn six_tets_for_two_triangles() {
        let mesh = TriangleMesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap();
        let field = sample_field(mesh, &[0.0, 1.0], |x, y, _| [x, y]).unwrap();
        let tets = build_spacetime_mesh(&field).unwrap();
        assert_eq!(tets.len(), 6);
        assert!(tets.iter().all(|t| t.volume6(&field).abs() > 0.0));
    }

    #[test]
    fn one_frame_is_rejected() {
        let mesh = TriangleMesh::grid(1, 1, [0.0, 0.0], 1.0, 1.0).unwrap();
        let field = sample_field(mesh, &[0.0], |x, y, _| [x, y]).unwrap();
        assert!(build_spacetime_mesh(&field).is_err());
        assert!(extract_trajectories(&field).is_err());
    }

    #[test]
    fn steady_zero_is_vertical() {
        let field = steady();
        let trajs = extract_trajectories(&field).unwrap();
        assert_eq!(trajs.len(), 1);
        let nodes = &trajs[0].nodes;
        assert_eq!(nodes.first().unwrap().t, 0.0);
        assert_eq!(nodes.last().unwrap().t, 3.0);
        for n in nodes {
            assert!(
                (n.x - 0.43).abs() < 1e-9 && (n.y - 0.57).abs() < 1e-9,
                "{n:?}"
            );
        }
        assert_eq!(nodes.iter().filter(|n| n.slice.is_some()).count(), 4);
    }

    #[test]
    fn annotation_inherits_nearest_slice() {
        let field = steady();
        let mut trajs = extract_trajectories(&field).unwrap();
        let mut catalog = SliceCatalog::default();
        for frame in &field.frames {
            let cps = extract_critical_points(frame, &field.mesh);
            catalog.min_r.insert(
                (frame.frame_index, 0),
                RobustnessValue::Finite(frame.time + 1.0),
            );
            catalog.cps.push(cps);
        }
        let traj = &mut trajs[0];
        assert_eq!(slice_annotate(traj, &catalog, field.mesh.diameter()), 0);
        for n in &traj.nodes {
            assert_eq!(n.degree, Some(-1));
            let nearest = n.t.round().min(3.0);
            let expected = if (n.t - n.t.floor() - 0.5).abs() < 1e-12 {
                n.t.floor() + 1.0
            } else {
                nearest + 1.0
            };
            assert_eq!(n.min_r, Some(RobustnessValue::Finite(expected)), "{n:?}");
        }
    }

    #[test]
    fn json_shape() {
        let traj = Trajectory {
            id: 3,
            provenance: Provenance::Piece {
                source: 1,
                ranges: vec![[0, 4], [7, 9]],
            },
            closed: false,
            nodes: vec![TrajectoryNode {
                index: 0,
                x: 1.0,
                y: 2.0,
                t: 0.0,
                slice: Some(0),
                cp_id: Some(0),
                degree: Some(1),
                min_r: Some(RobustnessValue::Unbounded),
            }],
        };
        let text = serde_json::to_string(&traj).unwrap();
        assert!(text.contains(r#""minR":"inf""#), "{text}");
        let back: Trajectory = serde_json::from_str(&text).unwrap();
        assert_eq!(back, traj);
        let orig: Provenance = serde_json::from_str(r#""original""#).unwrap();
        assert_eq!(orig, Provenance::original());
    }
}

//! Zeros of the piecewise-linear field and their Poincaré indices.

use std::f64::consts::TAU;

use log::warn;

use crate::error::{Error, Result};
use crate::field::{cross, interpolate, sub, FieldFrame, TriangleMesh, Vec2};
use crate::predicates::{origin_in_triangle, sweep_angle, zero_barycentric};

/// Winding sums farther than this from an integer are rejected.
const WINDING_SLACK: f64 = 0.25;

/// An isolated zero of the field inside one triangle.
#[derive(Clone, Debug, PartialEq)]
pub struct CriticalPoint {
    /// Index within its frame, in triangle order.
    pub id: usize,
    pub frame_index: usize,
    pub position: Vec2,
    pub triangle: usize,
    /// `+1` for sources, sinks and centers; `-1` for saddles.
    pub degree: i32,
    pub barycentric: [f64; 3],
}

pub(crate) fn triangle_vectors(frame: &FieldFrame, tri: [usize; 3]) -> [Vec2; 3] {
    tri.map(|v| frame.vectors[v])
}

/// Locates the zero inside triangle `t`, if any.
pub(crate) fn triangle_zero(
    frame: &FieldFrame,
    mesh: &TriangleMesh,
    t: usize,
) -> Option<([f64; 3], Vec2)> {
    let tri = mesh.triangles()[t];
    let vectors = triangle_vectors(frame, tri);
    origin_in_triangle(vectors, tri.map(|v| v as u64))?;
    let bary = zero_barycentric(vectors);
    let [a, b, c] = mesh.triangle_points(t);
    let position = [
        bary[0] * a[0] + bary[1] * b[0] + bary[2] * c[0],
        bary[0] * a[1] + bary[1] * b[1] + bary[2] * c[1],
    ];
    Some((bary, position))
}

/// Extracts every zero of the field, at most one per triangle.
pub fn extract_critical_points(frame: &FieldFrame, mesh: &TriangleMesh) -> Vec<CriticalPoint> {
    let mut out = Vec::new();
    for t in 0..mesh.triangle_count() {
        let Some((barycentric, position)) = triangle_zero(frame, mesh, t) else {
            continue;
        };
        let degree = match triangle_winding(frame, mesh, t) {
            Ok(d) => d,
            Err(e) => {
                warn!("frame {} triangle {t}: {e}", frame.frame_index);
                continue;
            }
        };
        if degree == 0 {
            warn!(
                "frame {} triangle {t}: discarding zero of degree 0",
                frame.frame_index
            );
            continue;
        }
        out.push(CriticalPoint {
            id: out.len(),
            frame_index: frame.frame_index,
            position,
            triangle: t,
            degree,
            barycentric,
        });
    }
    out
}

/// Winding number of the field along the counterclockwise boundary of triangle `t`.
pub fn triangle_winding(frame: &FieldFrame, mesh: &TriangleMesh, t: usize) -> Result<i32> {
    let tri = mesh.triangles()[t];
    let total: f64 = (0..3)
        .map(|k| {
            let (i, j) = (tri[k], tri[(k + 1) % 3]);
            sweep_angle(frame.vectors[i], i as u64, frame.vectors[j], j as u64)
        })
        .sum();
    round_winding(total)
}

/// Degree of `cp`, measured on the boundary of its containing triangle.
pub fn degree(cp: &CriticalPoint, frame: &FieldFrame, mesh: &TriangleMesh) -> Result<i32> {
    triangle_winding(frame, mesh, cp.triangle)
}

fn round_winding(total: f64) -> Result<i32> {
    let turns = total / TAU;
    let rounded = turns.round();
    if (turns - rounded).abs() > WINDING_SLACK {
        return Err(Error::IllConditionedDegree(total));
    }
    Ok(rounded as i32)
}

/// Winding number of the field along a closed counterclockwise polyline.
///
/// Every loop segment is split where it crosses a mesh edge, so the field is
/// linear on each piece and the swept angle is exact.
pub fn region_degree(loop_points: &[Vec2], frame: &FieldFrame, mesh: &TriangleMesh) -> Result<i32> {
    let mut points = loop_points.to_vec();
    if points.len() > 1 && points.first() == points.last() {
        points.pop();
    }
    if points.len() < 3 {
        return Err(Error::InvalidArgument(
            "loop needs at least 3 points".into(),
        ));
    }
    let scale = frame
        .vectors
        .iter()
        .map(|v| v[0].hypot(v[1]))
        .fold(0.0, f64::max);
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let edges = mesh.edges();
    let verts = mesh.vertices();

    let mut samples: Vec<Vec2> = Vec::new();
    for k in 0..points.len() {
        let (p, q) = (points[k], points[(k + 1) % points.len()]);
        let d = sub(q, p);
        let mut params = vec![0.0];
        for &[u, v] in &edges {
            let (a, b) = (verts[u], verts[v]);
            let e = sub(b, a);
            let denom = cross(d, e);
            if denom == 0.0 {
                continue;
            }
            let ap = sub(a, p);
            let s = cross(ap, e) / denom;
            let r = cross(ap, d) / denom;
            if s > 0.0 && s < 1.0 && (-1e-12..=1.0 + 1e-12).contains(&r) {
                params.push(s);
            }
        }
        params.sort_by(f64::total_cmp);
        params.dedup();
        for s in params {
            let x = [p[0] + s * d[0], p[1] + s * d[1]];
            samples.push(interpolate(frame, mesh, x)?);
        }
    }

    let mut total = 0.0;
    for k in 0..samples.len() {
        let (a, b) = (samples[k], samples[(k + 1) % samples.len()]);
        if segment_origin_distance(a, b) <= tol {
            return Err(Error::DegenerateLoop(tol));
        }
        total += cross(a, b).atan2(a[0] * b[0] + a[1] * b[1]);
    }
    round_winding(total)
}

fn segment_origin_distance(a: Vec2, b: Vec2) -> f64 {
    let d = sub(b, a);
    let len2 = d[0] * d[0] + d[1] * d[1];
    let s = if len2 == 0.0 {
        0.0
    } else {
        (-(a[0] * d[0] + a[1] * d[1]) / len2).clamp(0.0, 1.0)
    };
    (a[0] + s * d[0]).hypot(a[1] + s * d[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::magnitude_field;

    fn sample(mesh: &TriangleMesh, f: impl Fn(f64, f64) -> Vec2) -> FieldFrame {
        FieldFrame::new(
            0,
            0.0,
            mesh.vertices().iter().map(|p| f(p[0], p[1])).collect(),
        )
    }

    /// Brute-force winding: 360 samples per triangle edge of the exact field.
    fn brute_winding(tri: [Vec2; 3], f: impl Fn(f64, f64) -> Vec2) -> f64 {
        let mut total = 0.0;
        let n = 360;
        let mut prev = f(tri[0][0], tri[0][1]);
        for k in 0..3 {
            let (p, q) = (tri[k], tri[(k + 1) % 3]);
            for s in 1..=n {
                let s = s as f64 / n as f64;
                let cur = f(p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1]));
                total += cross(prev, cur).atan2(prev[0] * cur[0] + prev[1] * cur[1]);
                prev = cur;
            }
        }
        total / TAU
    }

    #[test]
    fn constant_field_has_no_zeros() {
        let mesh = TriangleMesh::grid(4, 4, [0.0, 0.0], 1.0, 1.0).unwrap();
        let frame = sample(&mesh, |_, _| [1.0, 0.0]);
        assert!(extract_critical_points(&frame, &mesh).is_empty());
    }

    #[test]
    fn linear_zero_at_center() {
        let mesh = TriangleMesh::grid(5, 5, [0.0, 0.0], 1.0, 1.0).unwrap();
        let frame = sample(&mesh, |x, y| [x - 0.5, y - 0.5]);
        let cps = extract_critical_points(&frame, &mesh);
        assert_eq!(cps.len(), 1);
        assert!((cps[0].position[0] - 0.5).abs() < 1e-9);
        assert!((cps[0].position[1] - 0.5).abs() < 1e-9);
        assert_eq!(cps[0].degree, 1);
    }

    #[test]
    fn zero_on_grid_vertex_is_reported_once() {
        // (0.5, 0.5) is a mesh vertex of the 4x4 grid, shared by six triangles.
        let mesh = TriangleMesh::grid(4, 4, [0.0, 0.0], 1.0, 1.0).unwrap();
        for f in [
            |x: f64, y: f64| [x - 0.5, y - 0.5],
            |x: f64, y: f64| [x - 0.5, 0.5 - y],
            |x: f64, y: f64| [0.5 - y, x - 0.5],
        ] {
            let frame = sample(&mesh, f);
            let cps = extract_critical_points(&frame, &mesh);
            assert_eq!(cps.len(), 1);
            assert!((cps[0].position[0] - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn nowhere_zero_field() {
        let f = |x: f64, y: f64| [x * x + y * y + 1.0, 1.0];
        let mesh = TriangleMesh::grid(8, 8, [-1.0, -1.0], 2.0, 2.0).unwrap();
        // Oracle: the minimum magnitude over a fine scan is bounded away from 0.
        let min = (0..=200)
            .flat_map(|i| (0..=200).map(move |j| (i, j)))
            .map(|(i, j)| {
                let v = f(-1.0 + i as f64 / 100.0, -1.0 + j as f64 / 100.0);
                v[0].hypot(v[1])
            })
            .fold(f64::INFINITY, f64::min);
        assert!(min > 0.0);
        assert!(extract_critical_points(&sample(&mesh, f), &mesh).is_empty());
    }

    #[test]
    fn canonical_degrees_match_brute_force() {
        let mesh = TriangleMesh::grid(6, 6, [-1.03, -0.97], 2.0, 2.0).unwrap();
        type Canonical = fn(f64, f64) -> Vec2;
        let fields: [(Canonical, i32); 4] = [
            (|x, y| [x, y], 1),
            (|x, y| [-x, -y], 1),
            (|x, y| [x, -y], -1),
            (|x, y| [-y, x], 1),
        ];
        for (f, expected) in fields {
            let frame = sample(&mesh, f);
            let cps = extract_critical_points(&frame, &mesh);
            assert_eq!(cps.len(), 1);
            let brute = brute_winding(mesh.triangle_points(cps[0].triangle), f);
            assert_eq!(brute.round() as i32, expected);
            assert_eq!(degree(&cps[0], &frame, &mesh).unwrap(), expected);
        }
    }

    #[test]
    fn region_degrees() {
        let mesh = TriangleMesh::grid(16, 8, [0.0, 0.0], 4.0, 2.0).unwrap();
        let square =
            |x0: f64, y0: f64, x1: f64, y1: f64| vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]];
        let constant = sample(&mesh, |_, _| [1.0, 0.0]);
        assert_eq!(
            region_degree(&square(0.3, 0.3, 1.7, 1.7), &constant, &mesh).unwrap(),
            0
        );

        // Source at (1.03, 1.01), saddle at (2.97, 1.01) via product form.
        let pair = sample(&mesh, |x, y| [(x - 1.03) * (x - 2.97), y - 1.01]);
        let cps = extract_critical_points(&pair, &mesh);
        assert_eq!(cps.iter().map(|c| c.degree).sum::<i32>(), 0);
        assert_eq!(cps.len(), 2);
        assert_eq!(
            region_degree(&square(0.1, 0.1, 3.9, 1.9), &pair, &mesh).unwrap(),
            0
        );
        assert_eq!(
            region_degree(&square(0.1, 0.1, 2.0, 1.9), &pair, &mesh).unwrap(),
            -1
        );

        // i(z - z1)(z - z2): a center at each of z1, z2.
        let centers = sample(&mesh, |x, y| {
            let (p, q) = ([x - 1.03, y - 1.01], [x - 2.97, y - 1.01]);
            let re = p[0] * q[0] - p[1] * q[1];
            let im = p[0] * q[1] + p[1] * q[0];
            [-im, re]
        });
        assert_eq!(
            region_degree(&square(0.1, 0.1, 3.9, 1.9), &centers, &mesh).unwrap(),
            2
        );
    }

    #[test]
    fn loop_through_zero_is_degenerate() {
        let mesh = TriangleMesh::grid(4, 4, [0.0, 0.0], 1.0, 1.0).unwrap();
        let frame = sample(&mesh, |x, y| [x - 0.5, y - 0.25]);
        let lp = vec![[0.25, 0.25], [0.75, 0.25], [0.75, 0.75], [0.25, 0.75]];
        assert!(matches!(
            region_degree(&lp, &frame, &mesh),
            Err(Error::DegenerateLoop(_))
        ));
    }

    #[test]
    fn extracted_points_are_zeros_of_interpolant() {
        let mesh = TriangleMesh::grid(10, 10, [0.0, 0.0], 1.0, 1.0).unwrap();
        let frame = sample(&mesh, |x, y| {
            [
                (6.0 * x).sin() * (5.0 * y).cos(),
                (4.0 * x + 1.0).cos() + 0.3 * y,
            ]
        });
        let scale = magnitude_field(&frame).into_iter().fold(0.0, f64::max);
        let cps = extract_critical_points(&frame, &mesh);
        assert!(!cps.is_empty());
        for cp in cps {
            let v = interpolate(&frame, &mesh, cp.position).unwrap();
            assert!(v[0].hypot(v[1]) <= 1e-9 * scale);
            assert!((cp.barycentric.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }
}

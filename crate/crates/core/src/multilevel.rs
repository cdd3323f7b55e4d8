//! Multilevel robustness: classic robustness recomputed on balls of growing
//! radius around a critical point, plus the exact step-function oracle and a
//! deterministic parallel task farm.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use log::warn;
use rayon::prelude::*;

use crate::critical::{extract_critical_points, CriticalPoint};
use crate::error::{Error, Result};
use crate::field::{dist, magnitude_field, FieldFrame, TimeVaryingField, TriangleMesh, Vec2};
use crate::merge_tree::{build_merge_tree, classic_robustness, RobustnessValue, UnionFind};

/// Offset past each breakpoint at which the oracle evaluates, relative to `L`.
pub const ORACLE_OFFSET_REL: f64 = 1e-6;

/// Radius of level `level` out of `levels`: `L * (level + 1) / levels`.
pub fn level_radius(diameter: f64, level: usize, levels: usize) -> f64 {
    diameter * (level + 1) as f64 / levels as f64
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeighborhoodSpec {
    pub center: Vec2,
    pub radius: f64,
    pub level: usize,
    pub levels: usize,
}

impl NeighborhoodSpec {
    pub fn new(center: Vec2, diameter: f64, level: usize, levels: usize) -> Result<Self> {
        if levels == 0 || level >= levels {
            return Err(Error::InvalidArgument(format!(
                "level {level} out of range for {levels} levels"
            )));
        }
        Ok(Self {
            center,
            radius: level_radius(diameter, level, levels),
            level,
            levels,
        })
    }
}

/// The part of a mesh inside a ball, with vertex order preserved.
#[derive(Clone, Debug)]
pub struct SubDomain {
    pub mesh: TriangleMesh,
    /// Full-mesh index of each sub-mesh vertex, ascending.
    pub vertex_ids: Vec<usize>,
    /// Retained critical points; `triangle` indexes the sub-mesh.
    pub cps: Vec<CriticalPoint>,
}

/// Keeps the triangles whose three vertices lie within `radius` of `center`,
/// plus `center`'s own triangle, restricted to the connected piece that holds
/// `center`.
pub fn restrict_to_ball(
    mesh: &TriangleMesh,
    cps: &[CriticalPoint],
    center: &CriticalPoint,
    radius: f64,
) -> SubDomain {
    let tris = mesh.triangles();
    let nv = mesh.vertex_count();
    let inside: Vec<bool> = mesh
        .vertices()
        .iter()
        .map(|&v| dist(v, center.position) <= radius)
        .collect();
    let mut keep: Vec<usize> = (0..tris.len())
        .filter(|&t| t == center.triangle || tris[t].iter().all(|&v| inside[v]))
        .collect();

    let mut uf = UnionFind::new(nv);
    for &t in &keep {
        let [a, b, c] = tris[t];
        uf.union(a, b);
        uf.union(a, c);
    }
    let root = uf.find(tris[center.triangle][0]);
    keep.retain(|&t| uf.find(tris[t][0]) == root);

    let mut vertex_map = vec![usize::MAX; nv];
    for &t in &keep {
        for v in tris[t] {
            vertex_map[v] = 0;
        }
    }
    let vertex_ids: Vec<usize> = (0..nv).filter(|&v| vertex_map[v] != usize::MAX).collect();
    for (k, &v) in vertex_ids.iter().enumerate() {
        vertex_map[v] = k;
    }
    let mut triangle_map = vec![usize::MAX; tris.len()];
    for (k, &t) in keep.iter().enumerate() {
        triangle_map[t] = k;
    }

    let vertices: Vec<Vec2> = vertex_ids.iter().map(|&v| mesh.vertices()[v]).collect();
    let triangles = keep
        .iter()
        .map(|&t| tris[t].map(|v| vertex_map[v]))
        .collect();
    let cps = cps
        .iter()
        .filter(|cp| triangle_map[cp.triangle] != usize::MAX)
        .map(|cp| CriticalPoint {
            triangle: triangle_map[cp.triangle],
            ..cp.clone()
        })
        .collect();
    let diameter = bbox_diagonal(&vertices);
    SubDomain {
        mesh: TriangleMesh::from_parts_unchecked(vertices, triangles, diameter),
        vertex_ids,
        cps,
    }
}

fn bbox_diagonal(points: &[Vec2]) -> f64 {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in points {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (hi[0] - lo[0]).hypot(hi[1] - lo[1])
}

/// Per-frame inputs shared by every level: magnitudes and the critical
/// points with their degrees, computed once on the full mesh.
#[derive(Clone, Debug)]
pub struct FrameAnalysis {
    pub frame_index: usize,
    pub f0: Vec<f64>,
    pub cps: Vec<CriticalPoint>,
}

impl FrameAnalysis {
    pub fn new(frame: &FieldFrame, mesh: &TriangleMesh) -> Self {
        Self::with_critical_points(frame, extract_critical_points(frame, mesh))
    }

    pub fn with_critical_points(frame: &FieldFrame, cps: Vec<CriticalPoint>) -> Self {
        Self {
            frame_index: frame.frame_index,
            f0: magnitude_field(frame),
            cps,
        }
    }

    pub fn cp(&self, cp_id: usize) -> Result<&CriticalPoint> {
        self.cps
            .iter()
            .find(|cp| cp.id == cp_id)
            .ok_or(Error::UnknownCriticalPoint(cp_id))
    }

    /// Classic robustness of `cp_id` on the ball of `radius` around it.
    pub fn robustness_at(
        &self,
        mesh: &TriangleMesh,
        cp_id: usize,
        radius: f64,
    ) -> Result<RobustnessValue> {
        let center = self.cp(cp_id)?;
        let sub = restrict_to_ball(mesh, &self.cps, center, radius);
        let f0: Vec<f64> = sub.vertex_ids.iter().map(|&v| self.f0[v]).collect();
        let tree = build_merge_tree(&sub.mesh, &f0, &sub.cps);
        classic_robustness(&tree, cp_id)
    }

    /// Profile sampled at `levels` equally spaced radii up to `L`.
    pub fn profile(
        &self,
        mesh: &TriangleMesh,
        cp_id: usize,
        levels: usize,
    ) -> Result<RobustnessProfile> {
        if levels == 0 {
            return Err(Error::InvalidArgument(
                "at least one level is required".into(),
            ));
        }
        let samples = (0..levels)
            .map(|i| {
                let radius = level_radius(mesh.diameter(), i, levels);
                Ok((radius, self.robustness_at(mesh, cp_id, radius)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RobustnessProfile::new(cp_id, self.frame_index, samples))
    }

    /// Radii at which the oracle evaluates: zero, just past the radius that
    /// admits each other critical point's triangle, and `L`.
    pub fn oracle_radii(&self, mesh: &TriangleMesh, cp_id: usize) -> Result<Vec<f64>> {
        let center = self.cp(cp_id)?.position;
        let diameter = mesh.diameter();
        let offset = ORACLE_OFFSET_REL * diameter;
        let mut radii = vec![0.0];
        for cp in self.cps.iter().filter(|cp| cp.id != cp_id) {
            let admit = mesh
                .triangle_points(cp.triangle)
                .iter()
                .map(|&v| dist(v, center))
                .fold(0.0, f64::max);
            if admit + offset < diameter {
                radii.push(admit + offset);
            }
        }
        radii.push(diameter);
        radii.sort_by(f64::total_cmp);
        radii.dedup();
        Ok(radii)
    }

    /// The exact step function of radius, evaluated at every breakpoint.
    pub fn oracle_profile(&self, mesh: &TriangleMesh, cp_id: usize) -> Result<RobustnessProfile> {
        let steps = self
            .oracle_radii(mesh, cp_id)?
            .into_iter()
            .map(|radius| Ok((radius, self.robustness_at(mesh, cp_id, radius)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(RobustnessProfile::new(cp_id, self.frame_index, steps))
    }
}

/// Robustness of one critical point as a function of ball radius.
#[derive(Clone, Debug, PartialEq)]
pub struct RobustnessProfile {
    pub cp_id: usize,
    pub frame_index: usize,
    /// `(radius, R)` pairs, ascending in radius.
    pub levels: Vec<(f64, RobustnessValue)>,
    pub min_r: RobustnessValue,
}

impl RobustnessProfile {
    pub fn new(cp_id: usize, frame_index: usize, levels: Vec<(f64, RobustnessValue)>) -> Self {
        let min_r = levels
            .iter()
            .map(|&(_, r)| r)
            .min()
            .unwrap_or(RobustnessValue::Unbounded);
        Self {
            cp_id,
            frame_index,
            levels,
            min_r,
        }
    }

    /// Step-function value at `radius`: the entry with the largest radius not
    /// exceeding it.
    pub fn value_at(&self, radius: f64) -> Option<RobustnessValue> {
        let k = self.levels.partition_point(|&(r, _)| r <= radius);
        (k > 0).then(|| self.levels[k - 1].1)
    }

    /// Number of adjacent entries with different values.
    pub fn change_count(&self) -> usize {
        self.levels.windows(2).filter(|w| w[0].1 != w[1].1).count()
    }

    /// Value at the largest radius.
    pub fn last(&self) -> Option<RobustnessValue> {
        self.levels.last().map(|&(_, r)| r)
    }
}

/// Sampled profile of `cp_id` in frame `frame_index`.
pub fn multilevel_robustness(
    field: &TimeVaryingField,
    frame_index: usize,
    cp_id: usize,
    levels: usize,
) -> Result<RobustnessProfile> {
    analyze_frame(field, frame_index)?.profile(&field.mesh, cp_id, levels)
}

/// Exact profile of `cp_id` in frame `frame_index`.
pub fn oracle_profile(
    field: &TimeVaryingField,
    frame_index: usize,
    cp_id: usize,
) -> Result<RobustnessProfile> {
    analyze_frame(field, frame_index)?.oracle_profile(&field.mesh, cp_id)
}

fn analyze_frame(field: &TimeVaryingField, frame_index: usize) -> Result<FrameAnalysis> {
    let frame = field
        .frames
        .get(frame_index)
        .ok_or_else(|| Error::InvalidArgument(format!("frame {frame_index} does not exist")))?;
    Ok(FrameAnalysis::new(frame, &field.mesh))
}

/// One unit of work: a critical point at one level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Task {
    pub frame_index: usize,
    pub cp_id: usize,
    pub level: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskResult {
    /// Position of the task in the submitted list.
    pub task_id: usize,
    pub task: Task,
    pub radius: f64,
    pub robustness: RobustnessValue,
    pub seconds: f64,
}

/// Every `(frame, cp, level)` combination, in that order.
pub fn plan_tasks(analyses: &[FrameAnalysis], levels: usize) -> Vec<Task> {
    analyses
        .iter()
        .flat_map(|a| {
            a.cps.iter().flat_map(move |cp| {
                (0..levels).map(move |level| Task {
                    frame_index: a.frame_index,
                    cp_id: cp.id,
                    level,
                })
            })
        })
        .collect()
}

/// Runs `tasks` on `workers` threads. Results are ordered by
/// `(frame, cp, level)` whatever the completion order.
pub fn run_task_farm(
    mesh: &TriangleMesh,
    analyses: &[FrameAnalysis],
    tasks: &[Task],
    levels: usize,
    workers: usize,
) -> Result<Vec<TaskResult>> {
    if levels == 0 {
        return Err(Error::InvalidArgument(
            "at least one level is required".into(),
        ));
    }
    let outputs = run_parallel(tasks, workers, |task| {
        let analysis = analyses
            .iter()
            .find(|a| a.frame_index == task.frame_index)
            .ok_or_else(|| {
                Error::InvalidArgument(format!("frame {} was not analyzed", task.frame_index))
            })?;
        let radius = level_radius(mesh.diameter(), task.level, levels);
        Ok((radius, analysis.robustness_at(mesh, task.cp_id, radius)?))
    })?;
    let mut results: Vec<TaskResult> = tasks
        .iter()
        .zip(outputs)
        .enumerate()
        .map(
            |(task_id, (&task, ((radius, robustness), seconds)))| TaskResult {
                task_id,
                task,
                radius,
                robustness,
                seconds,
            },
        )
        .collect();
    results.sort_by_key(|r| (r.task, r.task_id));
    Ok(results)
}

/// Groups farm results into one profile per `(frame, cp)`.
pub fn collect_profiles(results: &[TaskResult]) -> Vec<RobustnessProfile> {
    let mut out: Vec<RobustnessProfile> = Vec::new();
    let mut start = 0;
    while start < results.len() {
        let key = (results[start].task.frame_index, results[start].task.cp_id);
        let end = start
            + results[start..]
                .iter()
                .take_while(|r| (r.task.frame_index, r.task.cp_id) == key)
                .count();
        let mut levels: Vec<(f64, RobustnessValue)> = results[start..end]
            .iter()
            .map(|r| (r.radius, r.robustness))
            .collect();
        levels.sort_by(|a, b| a.0.total_cmp(&b.0));
        out.push(RobustnessProfile::new(key.1, key.0, levels));
        start = end;
    }
    out
}

/// Maps `f` over `items` on a pool of `workers` threads, timing each call.
/// A call that panics is retried once; a second panic fails the whole run.
pub fn run_parallel<T, R, F>(items: &[T], workers: usize, f: F) -> Result<Vec<(R, f64)>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync,
{
    if workers == 0 {
        return Err(Error::InvalidArgument("workers must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        items
            .par_iter()
            .enumerate()
            .map(|(id, item)| {
                for attempt in 0..2 {
                    let start = Instant::now();
                    match catch_unwind(AssertUnwindSafe(|| f(item))) {
                        Ok(result) => return result.map(|r| (r, start.elapsed().as_secs_f64())),
                        Err(_) if attempt == 0 => warn!("task {id} panicked; retrying"),
                        Err(_) => {}
                    }
                }
                Err(Error::TaskFailed(id))
            })
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{render, ElementKind, FlowElement};
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn pair_field() -> TimeVaryingField {
        let mesh = TriangleMesh::grid(40, 20, [0.0, 0.0], 4.0, 2.0).unwrap();
        let elements = [
            FlowElement::fixed(ElementKind::Source, 2.0, 0.3, [1.02, 1.01]),
            FlowElement::fixed(ElementKind::Saddle, 2.0, 0.3, [2.97, 0.98]),
        ];
        render(&elements, mesh, &[0.0]).unwrap()
    }

    #[test]
    fn spec_radius() {
        let spec = NeighborhoodSpec::new([0.0, 0.0], 10.0, 4, 10).unwrap();
        assert_eq!(spec.radius, 5.0);
        assert!(NeighborhoodSpec::new([0.0, 0.0], 10.0, 10, 10).is_err());
    }

    #[test]
    fn full_ball_is_whole_mesh() {
        let field = pair_field();
        let a = FrameAnalysis::new(&field.frames[0], &field.mesh);
        let sub = restrict_to_ball(&field.mesh, &a.cps, &a.cps[0], field.mesh.diameter());
        assert_eq!(sub.mesh.triangle_count(), field.mesh.triangle_count());
        assert_eq!(sub.cps.len(), 2);
    }

    #[test]
    fn tiny_ball_keeps_center_triangle() {
        let field = pair_field();
        let a = FrameAnalysis::new(&field.frames[0], &field.mesh);
        let sub = restrict_to_ball(&field.mesh, &a.cps, &a.cps[1], 0.0);
        assert_eq!(sub.mesh.triangle_count(), 1);
        assert_eq!(sub.cps.len(), 1);
        assert_eq!(sub.cps[0].triangle, 0);
    }

    #[test]
    fn pair_profile_is_unbounded_until_partner() {
        let field = pair_field();
        let profile = multilevel_robustness(&field, 0, 0, 10).unwrap();
        assert!(profile.levels[0].1.is_unbounded());
        let full = {
            let a = FrameAnalysis::new(&field.frames[0], &field.mesh);
            let tree = build_merge_tree(&field.mesh, &a.f0, &a.cps);
            classic_robustness(&tree, 0).unwrap()
        };
        assert!(!full.is_unbounded());
        assert_eq!(profile.last(), Some(full));
        assert!(profile.min_r <= full);
        let oracle = oracle_profile(&field, 0, 0).unwrap();
        assert_eq!(oracle.last(), Some(full));
        assert_eq!(oracle.levels[0].1, RobustnessValue::Unbounded);
    }

    #[test]
    fn farm_matches_sequential() {
        let field = pair_field();
        let analyses = vec![FrameAnalysis::new(&field.frames[0], &field.mesh)];
        let tasks = plan_tasks(&analyses, 5);
        assert_eq!(tasks.len(), 10);
        let one = run_task_farm(&field.mesh, &analyses, &tasks, 5, 1).unwrap();
        let four = run_task_farm(&field.mesh, &analyses, &tasks, 5, 4).unwrap();
        let strip =
            |v: &[TaskResult]| -> Vec<_> { v.iter().map(|r| (r.task, r.robustness)).collect() };
        assert_eq!(strip(&one), strip(&four));
        let profiles = collect_profiles(&one);
        assert_eq!(profiles[1], analyses[0].profile(&field.mesh, 1, 5).unwrap());
    }

    #[test]
    fn panicking_task_is_retried_once() {
        let calls = AtomicUsize::new(0);
        let out = run_parallel(&[1, 2, 3], 2, |&x| {
            if x == 2 && calls.fetch_add(1, Ordering::SeqCst) == 0 {
                panic!("transient");
            }
            Ok(x * 10)
        })
        .unwrap();
        assert_eq!(out.iter().map(|o| o.0).collect::<Vec<_>>(), [10, 20, 30]);

        let err = run_parallel(&[1, 2], 1, |&x| -> Result<i32> {
            if x == 2 {
                panic!("always");
            }
            Ok(x)
        })
        .unwrap_err();
        assert!(matches!(err, Error::TaskFailed(1)));
    }
}

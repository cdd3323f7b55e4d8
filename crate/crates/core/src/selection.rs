//! Trajectory scores, threshold filters, parameter sweeps, and correlation
//! of robustness with scalar quantities.

use log::warn;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{dist, FieldFrame, TriangleMesh, Vec2};
use crate::segmentation::{logistic, segment_all, SegmentationConfig};
use crate::tracking::Trajectory;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrajectoryScore {
    pub id: usize,
    /// Stability `b`, in `[0, 1]`.
    pub b: f64,
    /// Average degree `d`, in `[-1, 1]`.
    pub d: f64,
    /// Time extent of the trajectory.
    pub t_span: f64,
    /// Number of annotated nodes.
    pub length: usize,
}

/// Mean logistic minR over annotated nodes, times the fraction of `t_span`
/// the trajectory covers.
pub fn stability(traj: &Trajectory, k: f64, t_span: f64) -> f64 {
    let values: Vec<f64> = traj
        .annotated()
        .map(|n| logistic(n.min_r.expect("annotated"), k))
        .collect();
    if values.is_empty() {
        warn!(
            "trajectory {} has no annotated nodes; stability is 0",
            traj.id
        );
        return 0.0;
    }
    if t_span.is_nan() || t_span <= 0.0 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    mean * (traj.time_extent() / t_span).min(1.0)
}

/// Mean degree over slice nodes that carry one.
pub fn average_degree(traj: &Trajectory) -> f64 {
    let degrees: Vec<i32> = traj
        .nodes
        .iter()
        .filter(|n| n.slice.is_some())
        .filter_map(|n| n.degree)
        .collect();
    if degrees.is_empty() {
        return 0.0;
    }
    f64::from(degrees.iter().sum::<i32>()) / degrees.len() as f64
}

pub fn score(traj: &Trajectory, k: f64, t_span: f64) -> TrajectoryScore {
    TrajectoryScore {
        id: traj.id,
        b: stability(traj, k, t_span),
        d: average_degree(traj),
        t_span: traj.time_extent(),
        length: traj.annotated().count(),
    }
}

/// Trajectories with `b >= stability_threshold` and `d >= degree_threshold`.
pub fn filter(
    trajs: &[Trajectory],
    k: f64,
    t_span: f64,
    stability_threshold: f64,
    degree_threshold: f64,
) -> Vec<Trajectory> {
    trajs
        .iter()
        .filter(|t| {
            let s = score(t, k, t_span);
            s.b >= stability_threshold && s.d >= degree_threshold
        })
        .cloned()
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepCell {
    pub k: f64,
    pub sigma: f64,
    pub count: usize,
}

/// Surviving trajectory count for every `(k, sigma)`, `k`-major.
pub fn sweep(
    trajs: &[Trajectory],
    k_values: &[f64],
    sigma_values: &[f64],
    base: &SegmentationConfig,
    t_span: f64,
    stability_threshold: f64,
    degree_threshold: f64,
) -> Result<Vec<SweepCell>> {
    let cells: Vec<(f64, f64)> = k_values
        .iter()
        .flat_map(|&k| sigma_values.iter().map(move |&s| (k, s)))
        .collect();
    cells
        .par_iter()
        .map(|&(k, sigma)| {
            let config = SegmentationConfig { k, sigma, ..*base };
            let pieces = segment_all(trajs, &config)?;
            let count = filter(&pieces, k, t_span, stability_threshold, degree_threshold).len();
            Ok(SweepCell { k, sigma, count })
        })
        .collect()
}

/// Largest value of `channel` at vertices within `radius` of `center`.
pub fn regional_max(
    frame: &FieldFrame,
    mesh: &TriangleMesh,
    channel: &str,
    center: Vec2,
    radius: f64,
) -> Result<f64> {
    let values = frame
        .scalar(channel)
        .ok_or_else(|| Error::UnknownChannel(channel.to_owned()))?;
    mesh.vertices()
        .iter()
        .zip(values)
        .filter(|(p, _)| dist(**p, center) <= radius)
        .map(|(_, &v)| v)
        .max_by(f64::total_cmp)
        .ok_or(Error::EmptyRegion {
            x: center[0],
            y: center[1],
            radius,
        })
}

/// Pearson correlation coefficient of two equally long series.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "series lengths differ: {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 3 {
        return Err(Error::DegenerateSeries(format!(
            "{} pairs; at least 3 are needed",
            a.len()
        )));
    }
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::DegenerateSeries("zero variance".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson correlation between the trajectory's annotated minR series and
/// `series` (one value per annotated node). Unbounded nodes are skipped.
/// Returns the coefficient and the number of pairs used.
pub fn correlate(traj: &Trajectory, series: &[f64]) -> Result<(f64, usize)> {
    let min_r: Vec<_> = traj
        .annotated()
        .map(|n| n.min_r.expect("annotated"))
        .collect();
    if min_r.len() != series.len() {
        return Err(Error::InvalidArgument(format!(
            "trajectory {} has {} annotated nodes but the series has {} values",
            traj.id,
            min_r.len(),
            series.len()
        )));
    }
    let (a, b): (Vec<f64>, Vec<f64>) = min_r
        .iter()
        .zip(series)
        .filter_map(|(r, &s)| r.finite().map(|r| (r, s)))
        .unzip();
    let n = a.len();
    Ok((pearson(&a, &b)?, n))
}

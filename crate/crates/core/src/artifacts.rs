//! Pipeline artifact files: CSV tables and trajectory JSON.
//!
//! Numbers are written in shortest round-trip form and unbounded robustness as
//! `inf`, so rewriting identical results gives identical bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::critical::CriticalPoint;
use crate::error::{Error, Result};
use crate::field::TriangleMesh;
use crate::io::fmt_f64;
use crate::merge_tree::RobustnessValue;
use crate::multilevel::TaskResult;
use crate::selection::{SweepCell, TrajectoryScore};
use crate::tracking::Trajectory;

pub const CRITICAL_POINTS: &str = "critical_points.csv";
pub const ROBUSTNESS: &str = "robustness.csv";
pub const TIMING: &str = "timing.csv";
pub const TRAJECTORIES: &str = "trajectories.json";
pub const SEGMENTED: &str = "segmented.json";
pub const FILTERED: &str = "filtered.json";
pub const SCORES: &str = "scores.csv";
pub const SWEEP: &str = "sweep.csv";
pub const CORRELATION: &str = "correlation.csv";
pub const TIMING_BOXPLOT: &str = "timing_boxplot.csv";
pub const SERIES: &str = "series.csv";

/// One row of `robustness.csv`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobustnessRow {
    pub frame: usize,
    pub cp_id: usize,
    pub level: usize,
    pub radius: f64,
    pub robustness: RobustnessValue,
}

/// One row of `timing.csv`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimingRow {
    pub task_id: usize,
    pub cp_id: usize,
    pub level: usize,
    pub seconds: f64,
}

/// One row of `correlation.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationRow {
    pub trajectory_id: usize,
    pub channel: String,
    pub pearson: f64,
    pub n_pairs: usize,
}

fn table(header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn critical_points_csv(frames: &[Vec<CriticalPoint>]) -> String {
    table(
        "frame,cp_id,x,y,triangle,degree",
        frames.iter().flatten().map(|cp| {
            vec![
                cp.frame_index.to_string(),
                cp.id.to_string(),
                fmt_f64(cp.position[0]),
                fmt_f64(cp.position[1]),
                cp.triangle.to_string(),
                cp.degree.to_string(),
            ]
        }),
    )
}

pub fn robustness_csv(rows: &[RobustnessRow]) -> String {
    table(
        "frame,cp_id,level,radius,robustness",
        rows.iter().map(|r| {
            vec![
                r.frame.to_string(),
                r.cp_id.to_string(),
                r.level.to_string(),
                fmt_f64(r.radius),
                r.robustness.to_string(),
            ]
        }),
    )
}

pub fn robustness_rows(results: &[TaskResult]) -> Vec<RobustnessRow> {
    results
        .iter()
        .map(|r| RobustnessRow {
            frame: r.task.frame_index,
            cp_id: r.task.cp_id,
            level: r.task.level,
            radius: r.radius,
            robustness: r.robustness,
        })
        .collect()
}

pub fn timing_csv(results: &[TaskResult]) -> String {
    table(
        "task_id,cp_id,level,seconds",
        results.iter().map(|r| {
            vec![
                r.task_id.to_string(),
                r.task.cp_id.to_string(),
                r.task.level.to_string(),
                fmt_f64(r.seconds),
            ]
        }),
    )
}

pub fn scores_csv(scores: &[TrajectoryScore]) -> String {
    table(
        "id,b,d,t_span,length",
        scores.iter().map(|s| {
            vec![
                s.id.to_string(),
                fmt_f64(s.b),
                fmt_f64(s.d),
                fmt_f64(s.t_span),
                s.length.to_string(),
            ]
        }),
    )
}

pub fn sweep_csv(cells: &[SweepCell]) -> String {
    table(
        "k,sigma,count",
        cells
            .iter()
            .map(|c| vec![fmt_f64(c.k), fmt_f64(c.sigma), c.count.to_string()]),
    )
}

pub fn correlation_csv(rows: &[CorrelationRow]) -> String {
    table(
        "trajectory_id,channel,pearson,n_pairs",
        rows.iter().map(|r| {
            vec![
                r.trajectory_id.to_string(),
                r.channel.clone(),
                fmt_f64(r.pearson),
                r.n_pairs.to_string(),
            ]
        }),
    )
}

/// Five-number summary per level, quantiles by linear interpolation.
pub fn timing_boxplot_csv(rows: &[TimingRow]) -> String {
    let mut by_level: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in rows {
        by_level.entry(r.level).or_default().push(r.seconds);
    }
    table(
        "level,min,q1,median,q3,max",
        by_level.into_iter().map(|(level, mut s)| {
            s.sort_by(f64::total_cmp);
            let mut row = vec![level.to_string()];
            row.extend([0.0, 0.25, 0.5, 0.75, 1.0].map(|q| fmt_f64(quantile(&s, q))));
            row
        }),
    )
}

/// Quantile `q` of ascending `sorted`, interpolating between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn series_csv(trajs: &[Trajectory], k: f64) -> String {
    table(
        "trajectory_id,node_index,t,minR,l_minR",
        trajs.iter().flat_map(|traj| {
            traj.annotated().map(move |n| {
                let r = n.min_r.expect("annotated");
                vec![
                    traj.id.to_string(),
                    n.index.to_string(),
                    fmt_f64(n.t),
                    r.to_string(),
                    fmt_f64(crate::segmentation::logistic(r, k)),
                ]
            })
        }),
    )
}

pub fn trajectories_json(trajs: &[Trajectory]) -> String {
    let mut s = serde_json::to_string_pretty(trajs).expect("trajectories serialize");
    s.push('\n');
    s
}

pub fn read_trajectories(path: &Path) -> Result<Vec<Trajectory>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line() as u64, e.to_string()))
}

/// Rows of a CSV file with the expected header, as `(line, fields)`.
fn read_table(path: &Path, header: &str) -> Result<Vec<(u64, Vec<String>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let found = reader.headers().map_err(|e| csv_error(path, e))?;
    let found: Vec<&str> = found.iter().collect();
    if found.join(",") != header {
        return Err(Error::parse(path, 1, format!("expected header {header}")));
    }
    let width = found.len();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(Error::parse(
                path,
                line,
                format!("expected {width} columns, found {}", record.len()),
            ));
        }
        rows.push((line, record.iter().map(|f| f.trim().to_owned()).collect()));
    }
    Ok(rows)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, line, format!("{other:?}")),
    }
}

fn field<T: std::str::FromStr>(path: &Path, line: u64, name: &str, text: &str) -> Result<T> {
    text.parse()
        .map_err(|_| Error::parse(path, line, format!("bad {name}: {text:?}")))
}

fn finite(path: &Path, line: u64, name: &str, text: &str) -> Result<f64> {
    let x: f64 = field(path, line, name, text)?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::parse(
            path,
            line,
            format!("non-finite {name}: {text:?}"),
        ))
    }
}

/// Critical points per frame; barycentric coordinates are recomputed from
/// the mesh.
pub fn read_critical_points(
    path: &Path,
    mesh: &TriangleMesh,
    frame_count: usize,
) -> Result<Vec<Vec<CriticalPoint>>> {
    let mut frames = vec![Vec::new(); frame_count];
    for (line, f) in read_table(path, "frame,cp_id,x,y,triangle,degree")? {
        let frame: usize = field(path, line, "frame", &f[0])?;
        let triangle: usize = field(path, line, "triangle", &f[4])?;
        if frame >= frame_count || triangle >= mesh.triangle_count() {
            return Err(Error::parse(path, line, "frame or triangle out of range"));
        }
        let position = [
            finite(path, line, "x", &f[2])?,
            finite(path, line, "y", &f[3])?,
        ];
        frames[frame].push(CriticalPoint {
            id: field(path, line, "cp_id", &f[1])?,
            frame_index: frame,
            position,
            triangle,
            degree: field(path, line, "degree", &f[5])?,
            barycentric: mesh.barycentric(triangle, position),
        });
    }
    Ok(frames)
}

pub fn read_robustness(path: &Path) -> Result<Vec<RobustnessRow>> {
    read_table(path, "frame,cp_id,level,radius,robustness")?
        .into_iter()
        .map(|(line, f)| {
            Ok(RobustnessRow {
                frame: field(path, line, "frame", &f[0])?,
                cp_id: field(path, line, "cp_id", &f[1])?,
                level: field(path, line, "level", &f[2])?,
                radius: finite(path, line, "radius", &f[3])?,
                robustness: f[4]
                    .parse()
                    .map_err(|e: String| Error::parse(path, line, e))?,
            })
        })
        .collect()
}

pub fn read_timing(path: &Path) -> Result<Vec<TimingRow>> {
    read_table(path, "task_id,cp_id,level,seconds")?
        .into_iter()
        .map(|(line, f)| {
            Ok(TimingRow {
                task_id: field(path, line, "task_id", &f[0])?,
                cp_id: field(path, line, "cp_id", &f[1])?,
                level: field(path, line, "level", &f[2])?,
                seconds: finite(path, line, "seconds", &f[3])?,
            })
        })
        .collect()
}

/// minR of every `(frame, cp)`: the minimum over its rows.
pub fn min_r_by_cp(rows: &[RobustnessRow]) -> BTreeMap<(usize, usize), RobustnessValue> {
    let mut out: BTreeMap<(usize, usize), RobustnessValue> = BTreeMap::new();
    for r in rows {
        out.entry((r.frame, r.cp_id))
            .and_modify(|m| *m = (*m).min(r.robustness))
            .or_insert(r.robustness);
    }
    out
}

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};

use mrtrack::artifacts::{self, CorrelationRow, RobustnessRow};
use mrtrack::multilevel::{plan_tasks, run_parallel, run_task_farm, FrameAnalysis};
use mrtrack::selection::{self, score};
use mrtrack::synth::{self, boundary_effect, ElementKind, FlowElement};
use mrtrack::tracking::{slice_annotate, SliceCatalog};
use mrtrack::{io, segment_all, SegmentationConfig, TimeVaryingField, TriangleMesh};

use crate::{
    Cli, Command, CorrelateArgs, FilterArgs, Fixture, ReportArgs, RobustnessArgs, SegmentArgs,
    StageArgs, SweepArgs, SynthArgs,
};

pub enum CliError {
    Usage(String),
    Data(mrtrack::Error),
    Missing { path: PathBuf, stage: &'static str },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) | CliError::Missing { .. } => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Data(e) => write!(f, "{e}"),
            CliError::Missing { path, stage } => {
                write!(f, "missing {}; run `mrtrack {stage}` first", path.display())
            }
        }
    }
}

impl From<mrtrack::Error> for CliError {
    fn from(e: mrtrack::Error) -> Self {
        match e {
            mrtrack::Error::InvalidArgument(m) => CliError::Usage(m),
            other => CliError::Data(other),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cli: Cli) -> Result<()> {
    let workers = match cli.workers {
        Some(0) => return Err(CliError::Usage("--workers must be at least 1".into())),
        Some(w) => w,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {workers} workers: {e}")))?;
    pool.install(|| match cli.command {
        Command::Synth(a) => synth(a),
        Command::Extract(a) => extract(a),
        Command::Robustness(a) => robustness(a, workers),
        Command::Track(a) => track(a),
        Command::Segment(a) => segment(a),
        Command::Filter(a) => filter(a),
        Command::Correlate(a) => correlate(a),
        Command::Sweep(a) => sweep(a),
        Command::Report(a) => report(a),
    })
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| io_error(&path, e))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn io_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Data(mrtrack::Error::Io {
        path: path.to_owned(),
        source,
    })
}

/// Path of a prior stage's artifact, or an error naming that stage.
fn require(dir: &Path, name: &str, stage: &'static str) -> Result<PathBuf> {
    let path = dir.join(name);
    if path.is_file() {
        Ok(path)
    } else {
        Err(CliError::Missing { path, stage })
    }
}

fn load(input: &Path) -> Result<TimeVaryingField> {
    if !input.join(io::MESH_FILE).is_file() {
        return Err(CliError::Missing {
            path: input.join(io::MESH_FILE),
            stage: "synth",
        });
    }
    Ok(io::load_bundle(input)?)
}

fn pair(v: &Option<Vec<f64>>, default: [f64; 2]) -> [f64; 2] {
    v.as_ref().map_or(default, |v| [v[0], v[1]])
}

fn synth(a: SynthArgs) -> Result<()> {
    for (name, len) in [
        ("--extent", a.extent.as_ref().map(Vec::len)),
        ("--cells", a.cells.as_ref().map(Vec::len)),
        ("--lattice", a.lattice.as_ref().map(Vec::len)),
    ] {
        if len.is_some_and(|n| n != 2) {
            return Err(CliError::Usage(format!(
                "{name} takes two comma-separated values"
            )));
        }
    }
    let cells = a.cells.as_ref().map(|c| (c[0], c[1]));
    let grid = |default: (usize, usize), extent: [f64; 2]| -> Result<TriangleMesh> {
        let (nx, ny) = cells.unwrap_or(default);
        Ok(TriangleMesh::grid(
            nx,
            ny,
            [0.0, 0.0],
            extent[0],
            extent[1],
        )?)
    };
    let (elements, mesh, default_frames) = match (a.fixture, &a.elements) {
        (Some(Fixture::BoundaryEffect), _) => (
            boundary_effect::elements(true),
            grid(
                boundary_effect::CELLS,
                [boundary_effect::WIDTH, boundary_effect::HEIGHT],
            )?,
            boundary_effect::FRAMES,
        ),
        (Some(Fixture::Pair), _) => (
            vec![
                FlowElement::fixed(ElementKind::Source, 2.0, 0.3, [1.02, 1.01]),
                FlowElement::fixed(ElementKind::Saddle, 2.0, 0.3, [2.97, 0.98]),
            ],
            grid((40, 20), [4.0, 2.0])?,
            1,
        ),
        (Some(Fixture::Lattice), _) => {
            let (cols, rows) = a.lattice.as_ref().map_or((4, 3), |l| (l[0], l[1]));
            let extent = [cols as f64 * a.spacing, rows as f64 * a.spacing];
            let default_cells = (cols * 24, rows * 24);
            (
                synth::lattice_elements(cols, rows, a.spacing),
                grid(default_cells, extent)?,
                1,
            )
        }
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
            let elements: Vec<FlowElement> = serde_json::from_str(&text).map_err(|e| {
                CliError::Data(mrtrack::Error::Parse {
                    file: path.clone(),
                    line: e.line() as u64,
                    message: e.to_string(),
                })
            })?;
            let extent = pair(&a.extent, [1.0, 1.0]);
            (elements, grid((64, 64), extent)?, 1)
        }
        (None, None) => {
            return Err(CliError::Usage(
                "synth needs --fixture or --elements".into(),
            ))
        }
    };
    let frames = a.frames.unwrap_or(default_frames);
    if frames == 0 || a.dt.is_nan() || a.dt <= 0.0 {
        return Err(CliError::Usage("--frames and --dt must be positive".into()));
    }
    let field = synth::render(&elements, mesh, &synth::uniform_times(frames, a.dt))?;
    io::save_bundle(&field, &a.out)?;
    info!(
        "rendered {} frames on {} triangles",
        field.frame_count(),
        field.mesh.triangle_count()
    );
    Ok(())
}

fn extract(a: StageArgs) -> Result<()> {
    let field = load(&a.input)?;
    let frames: Vec<_> = {
        use rayon::prelude::*;
        field
            .frames
            .par_iter()
            .map(|f| mrtrack::extract_critical_points(f, &field.mesh))
            .collect()
    };
    write(
        &a.out,
        artifacts::CRITICAL_POINTS,
        &artifacts::critical_points_csv(&frames),
    )
}

fn analyses(field: &TimeVaryingField, out: &Path) -> Result<Vec<FrameAnalysis>> {
    let path = require(out, artifacts::CRITICAL_POINTS, "extract")?;
    let cps = artifacts::read_critical_points(&path, &field.mesh, field.frame_count())?;
    Ok(field
        .frames
        .iter()
        .zip(cps)
        .map(|(frame, cps)| FrameAnalysis::with_critical_points(frame, cps))
        .collect())
}

fn robustness(a: RobustnessArgs, workers: usize) -> Result<()> {
    let field = load(&a.stage.input)?;
    let analyses = analyses(&field, &a.stage.out)?;
    if a.levels == 0 {
        return Err(CliError::Usage("--levels must be at least 1".into()));
    }
    let (rows, timing) = if a.oracle {
        let jobs: Vec<(usize, usize)> = analyses
            .iter()
            .enumerate()
            .flat_map(|(k, an)| an.cps.iter().map(move |cp| (k, cp.id)))
            .collect();
        let out = run_parallel(&jobs, workers, |&(k, cp)| {
            analyses[k].oracle_profile(&field.mesh, cp)
        })?;
        let mut rows = Vec::new();
        let mut timing = String::from("task_id,cp_id,level,seconds\n");
        for (task_id, ((profile, seconds), &(_, cp))) in out.iter().zip(&jobs).enumerate() {
            for (level, &(radius, robustness)) in profile.levels.iter().enumerate() {
                rows.push(RobustnessRow {
                    frame: profile.frame_index,
                    cp_id: profile.cp_id,
                    level,
                    radius,
                    robustness,
                });
            }
            timing.push_str(&format!("{task_id},{cp},0,{}\n", io::fmt_f64(*seconds)));
        }
        (rows, timing)
    } else {
        let tasks = plan_tasks(&analyses, a.levels);
        info!("{} tasks on {workers} workers", tasks.len());
        let results = run_task_farm(&field.mesh, &analyses, &tasks, a.levels, workers)?;
        (
            artifacts::robustness_rows(&results),
            artifacts::timing_csv(&results),
        )
    };
    write(
        &a.stage.out,
        artifacts::ROBUSTNESS,
        &artifacts::robustness_csv(&rows),
    )?;
    write(&a.stage.out, artifacts::TIMING, &timing)
}

fn track(a: StageArgs) -> Result<()> {
    let field = load(&a.input)?;
    let cps_path = require(&a.out, artifacts::CRITICAL_POINTS, "extract")?;
    let rob_path = require(&a.out, artifacts::ROBUSTNESS, "robustness")?;
    let catalog = SliceCatalog {
        cps: artifacts::read_critical_points(&cps_path, &field.mesh, field.frame_count())?,
        min_r: artifacts::min_r_by_cp(&artifacts::read_robustness(&rob_path)?),
    };
    let mut trajs = mrtrack::extract_trajectories(&field)?;
    let mut unmatched = 0;
    for traj in &mut trajs {
        unmatched += slice_annotate(traj, &catalog, field.mesh.diameter());
    }
    if unmatched > 0 {
        warn!("{unmatched} slice nodes without a matching critical point");
    }
    info!("{} trajectories", trajs.len());
    write(
        &a.out,
        artifacts::TRAJECTORIES,
        &artifacts::trajectories_json(&trajs),
    )
}

fn segment(a: SegmentArgs) -> Result<()> {
    let path = require(&a.out, artifacts::TRAJECTORIES, "track")?;
    let trajs = artifacts::read_trajectories(&path)?;
    let config = SegmentationConfig {
        k: a.k,
        sigma: a.sigma,
        bridge_gap: a.bridge_gap,
        ..Default::default()
    };
    let pieces = segment_all(&trajs, &config)?;
    info!("{} trajectories into {} pieces", trajs.len(), pieces.len());
    write(
        &a.out,
        artifacts::SEGMENTED,
        &artifacts::trajectories_json(&pieces),
    )
}

fn t_span(input: &Path, given: Option<f64>) -> Result<f64> {
    let span = match given {
        Some(t) => t,
        None => {
            let times = io::load_frame_times(input)?;
            times.last().copied().unwrap_or(0.0) - times.first().copied().unwrap_or(0.0)
        }
    };
    if span > 0.0 {
        Ok(span)
    } else {
        Err(CliError::Usage(
            "time span must be positive; pass --t-span for single-frame bundles".into(),
        ))
    }
}

fn check_thresholds(stability: f64, degree: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&stability) || !(-1.0..=1.0).contains(&degree) {
        return Err(CliError::Usage(
            "stability threshold must lie in [0, 1] and degree threshold in [-1, 1]".into(),
        ));
    }
    Ok(())
}

fn filter(a: FilterArgs) -> Result<()> {
    check_thresholds(a.stability_threshold, a.degree_threshold)?;
    let path = require(&a.stage.out, artifacts::SEGMENTED, "segment")?;
    let trajs = artifacts::read_trajectories(&path)?;
    let span = t_span(&a.stage.input, a.t_span)?;
    let scores: Vec<_> = trajs.iter().map(|t| score(t, a.k, span)).collect();
    let kept = selection::filter(&trajs, a.k, span, a.stability_threshold, a.degree_threshold);
    info!("kept {} of {} trajectories", kept.len(), trajs.len());
    write(
        &a.stage.out,
        artifacts::SCORES,
        &artifacts::scores_csv(&scores),
    )?;
    write(
        &a.stage.out,
        artifacts::FILTERED,
        &artifacts::trajectories_json(&kept),
    )
}

fn correlate(a: CorrelateArgs) -> Result<()> {
    let field = load(&a.stage.input)?;
    let path = require(&a.stage.out, artifacts::FILTERED, "filter")?;
    let trajs = artifacts::read_trajectories(&path)?;
    if field.frames[0].scalar(&a.channel).is_none() {
        return Err(CliError::Data(mrtrack::Error::UnknownChannel(a.channel)));
    }
    let mut rows = Vec::new();
    for traj in &trajs {
        let series = traj
            .annotated()
            .map(|n| {
                let frame = &field.frames[n.slice.expect("annotated")];
                mrtrack::regional_max(frame, &field.mesh, &a.channel, [n.x, n.y], a.radius)
            })
            .collect::<mrtrack::Result<Vec<f64>>>()?;
        match mrtrack::correlate(traj, &series) {
            Ok((pearson, n_pairs)) => rows.push(CorrelationRow {
                trajectory_id: traj.id,
                channel: a.channel.clone(),
                pearson,
                n_pairs,
            }),
            Err(e) => warn!("trajectory {}: {e}", traj.id),
        }
    }
    write(
        &a.stage.out,
        artifacts::CORRELATION,
        &artifacts::correlation_csv(&rows),
    )
}

fn sweep(a: SweepArgs) -> Result<()> {
    check_thresholds(a.stability_threshold, a.degree_threshold)?;
    let path = require(&a.stage.out, artifacts::TRAJECTORIES, "track")?;
    let trajs = artifacts::read_trajectories(&path)?;
    let span = t_span(&a.stage.input, a.t_span)?;
    let base = SegmentationConfig {
        bridge_gap: a.bridge_gap,
        ..Default::default()
    };
    let cells = selection::sweep(
        &trajs,
        &a.k,
        &a.sigma,
        &base,
        span,
        a.stability_threshold,
        a.degree_threshold,
    )?;
    write(
        &a.stage.out,
        artifacts::SWEEP,
        &artifacts::sweep_csv(&cells),
    )
}

fn report(a: ReportArgs) -> Result<()> {
    let timing = artifacts::read_timing(&require(&a.out, artifacts::TIMING, "robustness")?)?;
    let trajs = artifacts::read_trajectories(&require(&a.out, artifacts::FILTERED, "filter")?)?;
    write(
        &a.out,
        artifacts::TIMING_BOXPLOT,
        &artifacts::timing_boxplot_csv(&timing),
    )?;
    write(
        &a.out,
        artifacts::SERIES,
        &artifacts::series_csv(&trajs, a.k),
    )
}

//! `mrtrack`: the multilevel robustness pipeline from the command line.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "mrtrack",
    version,
    about = "Multilevel robustness of critical point trajectories"
)]
struct Cli {
    /// Worker threads; defaults to the number of logical cores.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Log more (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic field bundle.
    Synth(SynthArgs),
    /// Extract critical points of every frame.
    Extract(StageArgs),
    /// Multilevel robustness of every critical point.
    Robustness(RobustnessArgs),
    /// Track critical points through time and annotate slices with minR.
    Track(StageArgs),
    /// Split trajectories into pieces of similar robustness.
    Segment(SegmentArgs),
    /// Score trajectories and keep the stable ones.
    Filter(FilterArgs),
    /// Correlate minR with a regional maximum of a scalar channel.
    Correlate(CorrelateArgs),
    /// Count surviving trajectories over a grid of k and sigma.
    Sweep(SweepArgs),
    /// Emit runtime box plot data and per-trajectory minR series.
    Report(ReportArgs),
}

#[derive(Args)]
struct StageArgs {
    /// Field bundle directory.
    #[arg(long)]
    input: PathBuf,
    /// Artifact directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fixture {
    /// Two strong centers with weak nearby saddles.
    BoundaryEffect,
    /// One source and one saddle.
    Pair,
    /// Jittered lattice of sources, saddles, centers and sinks.
    Lattice,
}

#[derive(Args)]
struct SynthArgs {
    /// Output bundle directory.
    #[arg(long)]
    out: PathBuf,
    /// Built-in fixture.
    #[arg(long, conflicts_with = "elements")]
    fixture: Option<Fixture>,
    /// Flow elements JSON file.
    #[arg(long)]
    elements: Option<PathBuf>,
    /// Domain width and height, for --elements.
    #[arg(long, value_delimiter = ',')]
    extent: Option<Vec<f64>>,
    /// Grid cells along x and y.
    #[arg(long, value_delimiter = ',')]
    cells: Option<Vec<usize>>,
    /// Number of frames.
    #[arg(long)]
    frames: Option<usize>,
    /// Time step between frames.
    #[arg(long, default_value_t = 1.0)]
    dt: f64,
    /// Lattice columns and rows, for the lattice fixture.
    #[arg(long, value_delimiter = ',')]
    lattice: Option<Vec<usize>>,
    /// Lattice spacing.
    #[arg(long, default_value_t = 4.0)]
    spacing: f64,
}

#[derive(Args)]
struct RobustnessArgs {
    #[command(flatten)]
    stage: StageArgs,
    /// Number of ball radii N.
    #[arg(long, default_value_t = 50)]
    levels: usize,
    /// Evaluate the exact step function at its breakpoints instead.
    #[arg(long)]
    oracle: bool,
}

#[derive(Args)]
struct SegmentArgs {
    /// Artifact directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    k: f64,
    #[arg(long, default_value_t = 0.2)]
    sigma: f64,
    #[arg(long, default_value_t = 2)]
    bridge_gap: usize,
}

#[derive(Args)]
struct FilterArgs {
    #[command(flatten)]
    stage: StageArgs,
    #[arg(long, default_value_t = 0.5)]
    k: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    stability_threshold: f64,
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    degree_threshold: f64,
    /// Time span T for stability; defaults to the bundle's first-to-last frame time.
    #[arg(long)]
    t_span: Option<f64>,
}

#[derive(Args)]
struct CorrelateArgs {
    #[command(flatten)]
    stage: StageArgs,
    /// Scalar channel name.
    #[arg(long)]
    channel: String,
    /// Radius of the region around each node.
    #[arg(long, default_value_t = 5.0)]
    radius: f64,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    stage: StageArgs,
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    k: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.2")]
    sigma: Vec<f64>,
    #[arg(long, default_value_t = 2)]
    bridge_gap: usize,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    stability_threshold: f64,
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    degree_threshold: f64,
    #[arg(long)]
    t_span: Option<f64>,
}

#[derive(Args)]
struct ReportArgs {
    /// Artifact directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    k: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .init();

    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

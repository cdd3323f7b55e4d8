//! Multilevel robustness of critical points in 2D time-varying
//! piecewise-linear vector fields, and the trajectory pipeline built on it:
//! extraction, merge trees, ball-restricted robustness profiles, spacetime
//! tracking, segmentation, and trajectory selection.

pub mod artifacts;
pub mod critical;
pub mod error;
pub mod field;
pub mod io;
pub mod merge_tree;
pub mod multilevel;
pub mod predicates;
pub mod segmentation;
pub mod selection;
pub mod synth;
pub mod tracking;

pub use critical::{degree, extract_critical_points, region_degree, CriticalPoint};
pub use error::{Error, Result};
pub use field::{
    interpolate, magnitude_field, FieldFrame, ScalarChannel, TimeVaryingField, TriangleMesh, Vec2,
};
pub use io::{load_bundle, save_bundle};
pub use merge_tree::{build_merge_tree, classic_robustness, AugmentedMergeTree, RobustnessValue};
pub use multilevel::{
    multilevel_robustness, oracle_profile, restrict_to_ball, run_task_farm, FrameAnalysis,
    NeighborhoodSpec, RobustnessProfile, Task, TaskResult,
};
pub use segmentation::{logistic, segment_all, segment_trajectory, SegmentationConfig};
pub use selection::{average_degree, correlate, regional_max, stability, TrajectoryScore};
pub use synth::{boundary_effect_fixture, render, ElementKind, FlowElement};
pub use tracking::{
    build_spacetime_mesh, extract_trajectories, slice_annotate, Trajectory, TrajectoryNode,
};

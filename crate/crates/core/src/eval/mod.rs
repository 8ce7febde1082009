//! Benchmark metrics, the keyframe interpolation baseline and report assembly.

pub mod bench;
pub mod metrics;

pub use bench::{
    fit_position_normalizer, run_benchmark, BenchConfig, BenchModel, GeneratorRow, GroundTruthRow, LengthRow,
    MetricsReport, ReportMetadata, WindowFailure, DEFAULT_LENGTHS,
};
pub use metrics::{
    angular_joint_updates, canonicalize, end_pose_error, foot_skate, interp_baseline, l2p, l2q, EndPoseError,
    FootSkateConfig, PositionNormalizer,
};

//! Experiment orchestration: viewpoint sequences, camera pose noise,
//! repeated trials, paired significance tests, and report emission.

mod ablation;
mod noise;
mod report;
mod sequence;
mod trial;
mod welch;

pub use ablation::{
    merge, run_ablation, Arm, MetricComparison, Study, StudyResult, TrialSet, METRIC_NAMES,
    SIGNIFICANCE_LEVEL,
};
pub use noise::{perturb_pose, PoseNoiseSpec};
pub use report::{metric_svg, summary_csv, trials_csv, write_report};
pub use sequence::{build_sequence, path_length, SequenceOrdering, SequenceSpec};
pub use trial::{
    annotations, build_scene, detect_frame, embedding_for, locate_detections, prepare_frame, run_trial, track_frames, viewpoint_pool, PreparedFrame,
    TrialConfig, TrialOutcome, TrialSeeds,
};
pub use welch::welch_t_test;

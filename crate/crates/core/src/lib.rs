//! Synthetic greenhouse scenes, a detector simulator, and a multi-view
//! tomato tracker with its evaluation harness.

pub mod bbox;
pub mod detector;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod matching;
pub mod metrics;
pub mod preprocess;
pub mod render;
pub mod rng;
pub mod scene;
pub mod tracker;
pub mod vector;

pub use bbox::{iou, Box2D};
pub use error::{Error, Result};
pub use geometry::{Interval, Mat3, Pose6DoF, Vec3};
pub use detector::{assign_latents, simulate_detections, Detection, DetectorNoiseConfig, FeatureMode};
pub use harness::{run_ablation, run_trial, Study, TrialConfig};
pub use matching::{giou, hungarian_min_cost, CostMatrix};
pub use metrics::{evaluate, MetricsReport, SequenceAnnotations};
pub use render::{render_frame, CameraIntrinsics, ViewpointFrame};
pub use scene::{generate_scene, PlantScene, TraitConfig};
pub use tracker::{AssociationConfig, KalmanConfig, Tracker};

use std::collections::BTreeSet;

use log::debug;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{build_sequence, perturb_pose, PoseNoiseSpec, SequenceOrdering, SequenceSpec};
use crate::detector::{
    assign_latents, simulate_with_embedding, AppearanceLatent, Detection, DetectorNoiseConfig,
    FeatureMode, PositionEmbedding,
};
use crate::error::{invalid_config, Result};
use crate::geometry::Pose6DoF;
use crate::metrics::{evaluate, FrameAnnotations, GtBox, MetricsConfig, MetricsReport, PredBox, SequenceAnnotations};
use crate::preprocess::cloud_to_world;
use crate::render::{
    render_frame_with, sample_viewpoint, CameraIntrinsics, GroundTruthObject, ViewpointFrame, ViewpointSamplerConfig,
    DEFAULT_MIN_VISIBILITY,
};
use crate::rng::{derive_seed, stream};
use crate::scene::{generate_scene_with, BackgroundLayout, PlantScene, TraitConfig};
use crate::tracker::{measure_position_3d, AssociationConfig, KalmanConfig, TrackRecord, Tracker};

/// Everything that defines one trial apart from its seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrialConfig {
    pub traits: TraitConfig,
    pub background_plants: usize,
    pub background_layout: BackgroundLayout,
    pub sampler: ViewpointSamplerConfig,
    pub intrinsics: CameraIntrinsics,
    pub min_visibility: f64,
    pub ordering: SequenceOrdering,
    pub sequence_length: usize,
    pub viewpoint_pool_size: usize,
    pub detector: DetectorNoiseConfig,
    pub association: AssociationConfig,
    pub kalman: KalmanConfig,
    pub pose_noise: PoseNoiseSpec,
    pub metrics: MetricsConfig,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self {
            traits: TraitConfig::default(),
            background_plants: 2,
            background_layout: BackgroundLayout::default(),
            sampler: ViewpointSamplerConfig::default(),
            intrinsics: CameraIntrinsics::default(),
            min_visibility: DEFAULT_MIN_VISIBILITY,
            ordering: SequenceOrdering::Random,
            sequence_length: 100,
            viewpoint_pool_size: 600,
            detector: DetectorNoiseConfig::default(),
            association: AssociationConfig::default(),
            kalman: KalmanConfig::default(),
            pose_noise: PoseNoiseSpec::default(),
            metrics: MetricsConfig::default(),
        }
    }
}

impl TrialConfig {
    pub fn validate(&self) -> Result<()> {
        self.traits.validate()?;
        self.sampler.validate()?;
        self.intrinsics.validate()?;
        if !(0.0..=1.0).contains(&self.min_visibility) {
            return Err(invalid_config("min_visibility must lie in [0, 1]"));
        }
        self.sequence_spec(0).validate()?;
        self.detector.validate()?;
        self.association.validate()?;
        self.kalman.validate()?;
        self.pose_noise.validate()
    }

    pub fn sequence_spec(&self, seed: u64) -> SequenceSpec {
        SequenceSpec {
            ordering: self.ordering,
            length: self.sequence_length,
            seed,
            viewpoint_pool_size: self.viewpoint_pool_size,
        }
    }
}

/// Seeds of each stage of a trial, all derived from the trial seed.
#[derive(Clone, Copy, Debug)]
pub struct TrialSeeds {
    pub scene: u64,
    pub viewpoints: u64,
    pub sequence: u64,
    pub latents: u64,
    pub pose_noise: u64,
    pub detector: u64,
}

impl TrialSeeds {
    pub fn new(seed: u64) -> Self {
        let s = |tag| derive_seed(seed, &[tag]);
        Self {
            scene: s(stream::PLANT),
            viewpoints: s(stream::VIEWPOINT),
            sequence: s(stream::SEQUENCE),
            latents: s(stream::LATENT),
            pose_noise: s(stream::POSE_NOISE),
            detector: s(stream::DETECTOR),
        }
    }
}

pub fn build_scene(cfg: &TrialConfig, seed: u64) -> Result<PlantScene> {
    generate_scene_with(seed, &cfg.traits, cfg.background_plants, &cfg.background_layout)
}

/// `count` viewpoints, the `i`-th drawn from its own stream.
pub fn viewpoint_pool(
    scene: &PlantScene,
    sampler: &ViewpointSamplerConfig,
    count: usize,
    seed: u64,
) -> Result<Vec<Pose6DoF>> {
    (0..count)
        .map(|i| sample_viewpoint(scene, sampler, derive_seed(seed, &[i as u64])))
        .collect()
}

/// Ground truth and detections of one viewpoint, ready for the tracker.
#[derive(Clone, Debug)]
pub struct PreparedFrame {
    pub viewpoint: usize,
    /// The pose the tracker believes, after noise.
    pub camera_pose: Pose6DoF,
    pub gt: Vec<GroundTruthObject>,
    /// With `centroid3d` measured from the noisy world cloud.
    pub detections: Vec<Detection>,
}

/// Renders viewpoint `index`, perturbs its pose, simulates detections and
/// measures their 3D positions. Per-viewpoint seeds depend only on the
/// viewpoint index, so the same viewpoint looks identical in every ordering.
#[allow(clippy::too_many_arguments)]
pub fn prepare_frame(
    scene: &PlantScene,
    pose: &Pose6DoF,
    index: usize,
    cfg: &TrialConfig,
    latents: &[AppearanceLatent],
    embedding: Option<&PositionEmbedding>,
    seeds: &TrialSeeds,
) -> Result<PreparedFrame> {
    let mut frame = render_frame_with(scene, pose, &cfg.intrinsics, cfg.min_visibility)?;
    frame.camera_pose = perturb_pose(pose, &cfg.pose_noise, derive_seed(seeds.pose_noise, &[index as u64]))?;
    detect_frame(frame, index, cfg, latents, embedding, seeds)
}

/// Detection half of [`prepare_frame`] for an already rendered frame whose
/// `camera_pose` is the pose the tracker should believe.
pub fn detect_frame(
    frame: ViewpointFrame,
    index: usize,
    cfg: &TrialConfig,
    latents: &[AppearanceLatent],
    embedding: Option<&PositionEmbedding>,
    seeds: &TrialSeeds,
) -> Result<PreparedFrame> {
    let mut detections = simulate_with_embedding(
        &frame,
        latents,
        &cfg.detector,
        embedding,
        derive_seed(seeds.detector, &[index as u64]),
    )?;
    locate_detections(&mut detections, &frame, cfg.association.mad_k);
    Ok(PreparedFrame {
        viewpoint: index,
        camera_pose: frame.camera_pose,
        gt: frame.gt,
        detections,
    })
}

/// Fills `centroid3d` of each detection from the frame's cloud.
pub fn locate_detections(detections: &mut [Detection], frame: &ViewpointFrame, mad_k: f64) {
    let pose = frame.camera_pose;
    let world = cloud_to_world(&frame.cloud, &pose);
    for d in detections {
        d.centroid3d = measure_position_3d(&d.bbox, &world, &pose.translation, mad_k).map(Into::into);
    }
}

/// Position embedding used by `cfg`, if any.
pub fn embedding_for(cfg: &TrialConfig) -> Result<Option<PositionEmbedding>> {
    Ok(match cfg.detector.feature_mode {
        FeatureMode::AppearanceOnly => None,
        FeatureMode::AppearancePlus3d => Some(PositionEmbedding::from_config(&cfg.detector)?),
    })
}

/// Runs the tracker over prepared frames in order.
pub fn track_frames(
    frames: &[PreparedFrame],
    association: &AssociationConfig,
    kalman: &KalmanConfig,
) -> Result<(Tracker, Vec<TrackRecord>)> {
    let mut tracker = Tracker::new(*association, *kalman)?;
    let mut records = Vec::new();
    for (f, frame) in frames.iter().enumerate() {
        let assigned = tracker.step(frame.detections.clone())?;
        records.extend(tracker.records(f, &assigned));
    }
    Ok((tracker, records))
}

/// Joins per-frame ground truth with track records of the same frames.
pub fn annotations(gt: &[Vec<GroundTruthObject>], records: &[TrackRecord]) -> SequenceAnnotations {
    let mut frames: Vec<FrameAnnotations> = gt
        .iter()
        .map(|g| FrameAnnotations {
            gt: g.iter().map(|o| GtBox { id: o.object_id, bbox: o.bbox }).collect(),
            preds: Vec::new(),
        })
        .collect();
    for r in records {
        if let Some(f) = frames.get_mut(r.frame) {
            f.preds.push(PredBox {
                id: r.tracklet_id,
                bbox: r.bbox,
                score: r.score,
            });
        }
    }
    SequenceAnnotations { frames }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub report: MetricsReport,
    pub tracklet_count: usize,
    pub tomato_count: usize,
    /// Distinct tomatoes annotated in at least one frame of the sequence.
    pub gt_ids_seen: usize,
    pub sequence: Vec<usize>,
    pub records: Vec<TrackRecord>,
}

/// Builds a scene and a viewpoint pool, then tracks one sequence and
/// scores it. Deterministic in `seed` and independent of thread count.
pub fn run_trial(cfg: &TrialConfig, seed: u64) -> Result<TrialOutcome> {
    cfg.validate()?;
    let seeds = TrialSeeds::new(seed);
    let scene = build_scene(cfg, seeds.scene)?;
    let pool = viewpoint_pool(&scene, &cfg.sampler, cfg.viewpoint_pool_size, seeds.viewpoints)?;
    let sequence = build_sequence(&pool, &cfg.sequence_spec(seeds.sequence))?;
    run_sequence(cfg, &scene, &pool, sequence, &seeds)
}

pub(crate) fn run_sequence(
    cfg: &TrialConfig,
    scene: &PlantScene,
    pool: &[Pose6DoF],
    sequence: Vec<usize>,
    seeds: &TrialSeeds,
) -> Result<TrialOutcome> {
    let latents = assign_latents(scene, cfg.detector.feature_dim, seeds.latents)?;
    let embedding = embedding_for(cfg)?;
    let frames = sequence
        .par_iter()
        .map(|&i| prepare_frame(scene, &pool[i], i, cfg, &latents, embedding.as_ref(), seeds))
        .collect::<Result<Vec<_>>>()?;
    let (tracker, records) = track_frames(&frames, &cfg.association, &cfg.kalman)?;
    let gt: Vec<Vec<GroundTruthObject>> = frames.into_iter().map(|f| f.gt).collect();
    let seen: BTreeSet<u32> = gt.iter().flatten().map(|g| g.object_id).collect();
    let report = evaluate(&annotations(&gt, &records), &cfg.metrics)?;
    debug!(
        "trial: {} frames, {} tracklets, HOTA {:.2}",
        sequence.len(),
        tracker.tracklets().len(),
        report.hota
    );
    Ok(TrialOutcome {
        report,
        tracklet_count: tracker.tracklets().len(),
        tomato_count: scene.tomato_count(),
        gt_ids_seen: seen.len(),
        sequence,
        records,
    })
}

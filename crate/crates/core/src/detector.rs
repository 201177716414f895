//! Detector simulator: turns ground-truth annotations into noisy detections
//! with a box, a class score, and a unit re-identification feature.
//!
//! The feature of a true positive is built from the object's appearance
//! latent, a view-dependent term, and isotropic noise. The view-dependent
//! term `s·Σ_k v_k·a_k` uses the unit direction `v` from the object to the
//! camera and three fixed per-object axes `a_k`, so features of one object
//! drift as the camera moves around it. In 3D mode the trailing channels
//! carry a random Fourier embedding of the object position as seen through
//! the (possibly noisy) camera pose; its inner products approximate a
//! Gaussian kernel over 3D distance.

use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::bbox::Box2D;
use crate::error::{invalid_config, Error, Result};
use crate::geometry::Vec3;
use crate::preprocess::WorkspaceLimits;
use crate::render::ViewpointFrame;
use crate::rng::{rng_for, stream};
use crate::scene::PlantScene;
use crate::vector::{normalize, random_unit};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    #[default]
    AppearanceOnly,
    #[serde(rename = "appearance_plus_3d")]
    AppearancePlus3d,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorNoiseConfig {
    pub p_miss_base: f64,
    pub p_miss_occlusion_gain: f64,
    /// Expected false positives per frame.
    pub fp_rate: f64,
    /// Pixels, per box coordinate.
    pub bbox_jitter_sigma: f64,
    /// Total noise standard deviation of the feature, spread over all
    /// `feature_dim` channels.
    pub feature_noise_sigma: f64,
    pub feature_mode: FeatureMode,
    pub feature_dim: usize,
    /// Magnitude of the view-dependent appearance term.
    pub view_dependence: f64,
    /// Scale of the position channels relative to the unit latent.
    pub fusion_weight: f64,
    /// Number of trailing channels replaced by the position embedding.
    pub position_channels: usize,
    /// Kernel length scale of the position embedding, meters.
    pub position_length_scale: f64,
    pub workspace: WorkspaceLimits,
    /// Seed of the embedding frequencies; fixed across frames.
    pub embedding_seed: u64,
}

impl Default for DetectorNoiseConfig {
    fn default() -> Self {
        Self {
            p_miss_base: 0.05,
            p_miss_occlusion_gain: 0.5,
            fp_rate: 0.3,
            bbox_jitter_sigma: 2.0,
            feature_noise_sigma: 0.25,
            feature_mode: FeatureMode::AppearanceOnly,
            feature_dim: 64,
            view_dependence: 0.8,
            fusion_weight: 1.5,
            position_channels: 16,
            position_length_scale: 0.08,
            workspace: WorkspaceLimits::default(),
            embedding_seed: 0,
        }
    }
}

impl DetectorNoiseConfig {
    /// No misses, jitter, noise, false positives, or view dependence.
    pub fn noiseless() -> Self {
        Self {
            p_miss_base: 0.0,
            p_miss_occlusion_gain: 0.0,
            fp_rate: 0.0,
            bbox_jitter_sigma: 0.0,
            feature_noise_sigma: 0.0,
            view_dependence: 0.0,
            ..Self::default()
        }
    }

    pub fn with_mode(mut self, mode: FeatureMode) -> Self {
        self.feature_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |v: f64| (0.0..=1.0).contains(&v);
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !prob(self.p_miss_base) {
            return Err(invalid_config("p_miss_base must lie in [0, 1]"));
        }
        if !nonneg(self.p_miss_occlusion_gain) || !nonneg(self.fp_rate) {
            return Err(invalid_config("occlusion gain and fp_rate must be non-negative"));
        }
        if !nonneg(self.bbox_jitter_sigma) || !nonneg(self.feature_noise_sigma) {
            return Err(invalid_config("noise sigmas must be non-negative"));
        }
        if !nonneg(self.view_dependence) || !nonneg(self.fusion_weight) {
            return Err(invalid_config("view_dependence and fusion_weight must be non-negative"));
        }
        if self.feature_dim < 8 {
            return Err(invalid_config("feature_dim must be at least 8"));
        }
        if self.feature_mode == FeatureMode::AppearancePlus3d {
            if self.position_channels == 0 || self.position_channels >= self.feature_dim {
                return Err(invalid_config(
                    "position_channels must be in 1..feature_dim",
                ));
            }
            if !(self.position_length_scale > 0.0 && self.position_length_scale.is_finite()) {
                return Err(invalid_config("position_length_scale must be positive"));
            }
        }
        self.workspace.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AppearanceLatent {
    pub object_id: u32,
    /// Unit norm.
    pub vector: Vec<f64>,
    /// Unit directions weighting the view-dependent term.
    pub view_axes: [Vec<f64>; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: Box2D,
    pub class_score: f64,
    /// Unit norm.
    pub feature: Vec<f64>,
    /// World-frame position measured from the cloud, filled by the tracker.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centroid3d: Option<[f64; 3]>,
}

/// One latent per target tomato, uniform on the unit sphere.
pub fn assign_latents(scene: &PlantScene, dim: usize, seed: u64) -> Result<Vec<AppearanceLatent>> {
    if dim < 8 {
        return Err(invalid_config("feature_dim must be at least 8"));
    }
    Ok(scene
        .tomatoes()
        .filter_map(|t| t.object_id)
        .map(|id| {
            let mut rng = rng_for(seed, &[stream::LATENT, u64::from(id)]);
            AppearanceLatent {
                object_id: id,
                vector: random_unit(&mut rng, dim),
                view_axes: std::array::from_fn(|_| random_unit(&mut rng, dim)),
            }
        })
        .collect())
}

/// Random Fourier features of a 3D position; `φ(p)·φ(q) ≈ exp(−|p−q|²/2ℓ²)`.
#[derive(Clone, Debug)]
pub struct PositionEmbedding {
    /// Frequencies in workspace-normalized coordinates.
    omega: Vec<[f64; 3]>,
    phase: Vec<f64>,
    workspace: WorkspaceLimits,
}

impl PositionEmbedding {
    pub fn new(channels: usize, length_scale: f64, workspace: WorkspaceLimits, seed: u64) -> Result<Self> {
        workspace.validate()?;
        if !(length_scale > 0.0) {
            return Err(invalid_config("position_length_scale must be positive"));
        }
        let mut rng = rng_for(seed, &[stream::EMBEDDING]);
        let extent = workspace.extent();
        let std = Normal::new(0.0, 1.0).expect("unit normal");
        let omega = (0..channels)
            .map(|_| std::array::from_fn(|k| std.sample(&mut rng) * extent[k] / length_scale))
            .collect();
        let phase = (0..channels).map(|_| rng.random_range(0.0..TAU)).collect();
        Ok(Self {
            omega,
            phase,
            workspace,
        })
    }

    pub fn from_config(cfg: &DetectorNoiseConfig) -> Result<Self> {
        Self::new(
            cfg.position_channels,
            cfg.position_length_scale,
            cfg.workspace,
            cfg.embedding_seed,
        )
    }

    pub fn channels(&self) -> usize {
        self.omega.len()
    }

    /// Unit-norm in expectation. Points outside the workspace are clamped
    /// onto its boundary.
    pub fn embed(&self, p: &Vec3) -> Vec<f64> {
        let extent = self.workspace.extent();
        let q: [f64; 3] =
            std::array::from_fn(|k| ((p[k] - self.workspace.min[k]) / extent[k]).clamp(0.0, 1.0));
        let amp = (2.0 / self.channels() as f64).sqrt();
        self.omega
            .iter()
            .zip(&self.phase)
            .map(|(w, b)| amp * (w[0] * q[0] + w[1] * q[1] + w[2] * q[2] + b).cos())
            .collect()
    }
}

/// Simulated detections for one frame, in shuffled order.
///
/// Random streams are keyed per purpose and per object, so two calls that
/// differ only in feature mode see the same misses, jitter and false boxes.
pub fn simulate_detections(
    frame: &ViewpointFrame,
    latents: &[AppearanceLatent],
    cfg: &DetectorNoiseConfig,
    seed: u64,
) -> Result<Vec<Detection>> {
    cfg.validate()?;
    let embedding = match cfg.feature_mode {
        FeatureMode::AppearanceOnly => None,
        FeatureMode::AppearancePlus3d => Some(PositionEmbedding::from_config(cfg)?),
    };
    simulate_with_embedding(frame, latents, cfg, embedding.as_ref(), seed)
}

pub(crate) fn simulate_with_embedding(
    frame: &ViewpointFrame,
    latents: &[AppearanceLatent],
    cfg: &DetectorNoiseConfig,
    embedding: Option<&PositionEmbedding>,
    seed: u64,
) -> Result<Vec<Detection>> {
    let dim = cfg.feature_dim;
    let (w, h) = (frame.width() as f64, frame.height() as f64);
    let camera = frame.camera_pose.translation;
    let jitter = Normal::new(0.0, cfg.bbox_jitter_sigma).map_err(|e| invalid_config(e.to_string()))?;
    let feat_noise = Normal::new(0.0, cfg.feature_noise_sigma / (dim as f64).sqrt())
        .map_err(|e| invalid_config(e.to_string()))?;

    let mut out = Vec::with_capacity(frame.gt.len() + 2);
    for gt in &frame.gt {
        let latent = latents
            .iter()
            .find(|l| l.object_id == gt.object_id)
            .ok_or(Error::MissingLatent(gt.object_id))?;
        if latent.vector.len() != dim {
            return Err(Error::InvalidInput(format!(
                "latent of object {} has dimension {}, expected {dim}",
                gt.object_id,
                latent.vector.len()
            )));
        }
        let id = u64::from(gt.object_id);

        let p_miss = (cfg.p_miss_base + cfg.p_miss_occlusion_gain * (1.0 - gt.visibility)).min(1.0);
        if rng_for(seed, &[stream::MISS, id]).random::<f64>() < p_miss {
            continue;
        }

        let mut rng = rng_for(seed, &[stream::JITTER, id]);
        let mut c = [gt.bbox.x_min, gt.bbox.y_min, gt.bbox.x_max, gt.bbox.y_max];
        if cfg.bbox_jitter_sigma > 0.0 {
            c.iter_mut().for_each(|v| *v += jitter.sample(&mut rng));
        }
        let bbox = Box2D {
            x_min: c[0].min(c[2]),
            y_min: c[1].min(c[3]),
            x_max: c[0].max(c[2]),
            y_max: c[1].max(c[3]),
        }
        .clipped(w, h);

        let mut feature = latent.vector.clone();
        if cfg.view_dependence > 0.0 {
            let to_camera = (camera - Vec3::from(gt.centroid3d))
                .try_normalize(1e-12)
                .unwrap_or_else(Vec3::zeros);
            for (k, axis) in latent.view_axes.iter().enumerate() {
                let s = cfg.view_dependence * to_camera[k];
                feature.iter_mut().zip(axis).for_each(|(f, a)| *f += s * a);
            }
        }
        if cfg.feature_noise_sigma > 0.0 {
            let mut rng = rng_for(seed, &[stream::FEATURE, id]);
            feature.iter_mut().for_each(|f| *f += feat_noise.sample(&mut rng));
        }
        if let Some(emb) = embedding {
            let apparent = frame
                .camera_pose
                .transform_point(&Vec3::from(gt.centroid_camera));
            let phi = emb.embed(&apparent);
            let start = dim - phi.len();
            feature[start..]
                .iter_mut()
                .zip(&phi)
                .for_each(|(f, p)| *f = cfg.fusion_weight * p);
        }
        normalize(&mut feature)?;

        out.push(Detection {
            bbox,
            class_score: (0.9 * gt.visibility).clamp(0.0, 1.0),
            feature,
            centroid3d: None,
        });
    }

    if cfg.fp_rate > 0.0 {
        let mut rng = rng_for(seed, &[stream::FALSE_POSITIVE]);
        let count = Poisson::new(cfg.fp_rate)
            .map_err(|e| invalid_config(e.to_string()))?
            .sample(&mut rng) as usize;
        for _ in 0..count {
            let bw = rng.random_range(10.0..=40.0f64).min(w);
            let bh = rng.random_range(10.0..=40.0f64).min(h);
            let x = rng.random_range(0.0..=(w - bw));
            let y = rng.random_range(0.0..=(h - bh));
            out.push(Detection {
                bbox: Box2D {
                    x_min: x,
                    y_min: y,
                    x_max: x + bw,
                    y_max: y + bh,
                },
                class_score: rng.random_range(0.1..0.6),
                feature: random_unit(&mut rng, dim),
                centroid3d: None,
            });
        }
    }

    out.shuffle(&mut rng_for(seed, &[stream::SHUFFLE]));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose6DoF;
    use crate::render::{render_frame, CameraIntrinsics};
    use crate::scene::{generate_scene, TraitConfig};
    use crate::vector::{dot, norm};

    fn scene() -> PlantScene {
        generate_scene(3, &TraitConfig::default().with_fixed_counts(4, 5), 0).unwrap()
    }

    fn frame(scene: &PlantScene) -> ViewpointFrame {
        let axis = Vec3::from(scene.stem_axis.point);
        let eye = axis + Vec3::new(0.0, -0.6, 0.5);
        let pose = Pose6DoF::look_at(eye, axis + Vec3::new(0.0, 0.0, 0.5), Vec3::z()).unwrap();
        render_frame(scene, &pose, &CameraIntrinsics::default()).unwrap()
    }

    #[test]
    fn latents_are_unit_and_deterministic() {
        let s = scene();
        let a = assign_latents(&s, 64, 9).unwrap();
        assert_eq!(a.len(), 20);
        for l in &a {
            assert!((norm(&l.vector) - 1.0).abs() < 1e-6);
        }
        assert_eq!(a, assign_latents(&s, 64, 9).unwrap());
        assert!(assign_latents(&s, 7, 9).is_err());
        let mut total = 0.0;
        let mut pairs = 0;
        for i in 0..a.len() {
            for j in i + 1..a.len() {
                total += dot(&a[i].vector, &a[j].vector).abs();
                pairs += 1;
            }
        }
        assert!(total / (pairs as f64) < 0.3);
    }

    #[test]
    fn noiseless_passthrough() {
        let s = scene();
        let f = frame(&s);
        assert!(!f.gt.is_empty());
        let latents = assign_latents(&s, 64, 1).unwrap();
        let dets = simulate_detections(&f, &latents, &DetectorNoiseConfig::noiseless(), 5).unwrap();
        assert_eq!(dets.len(), f.gt.len());
        for gt in &f.gt {
            let latent = &latents[gt.object_id as usize].vector;
            let d = dets.iter().find(|d| d.bbox == gt.bbox).expect("box passed through");
            assert!(d.feature.iter().zip(latent).all(|(a, b)| (a - b).abs() < 1e-12));
        }
    }

    #[test]
    fn certain_miss_and_missing_latent() {
        let s = scene();
        let f = frame(&s);
        let latents = assign_latents(&s, 64, 1).unwrap();
        let cfg = DetectorNoiseConfig {
            p_miss_base: 1.0,
            fp_rate: 0.0,
            ..DetectorNoiseConfig::default()
        };
        assert!(simulate_detections(&f, &latents, &cfg, 5).unwrap().is_empty());
        let err = simulate_detections(&f, &latents[..1], &DetectorNoiseConfig::default(), 5);
        assert!(matches!(err, Err(Error::MissingLatent(_))));
    }

    #[test]
    fn features_are_unit_and_boxes_inside_image() {
        let s = scene();
        let f = frame(&s);
        let latents = assign_latents(&s, 64, 1).unwrap();
        for mode in [FeatureMode::AppearanceOnly, FeatureMode::AppearancePlus3d] {
            let cfg = DetectorNoiseConfig {
                fp_rate: 3.0,
                bbox_jitter_sigma: 10.0,
                ..DetectorNoiseConfig::default().with_mode(mode)
            };
            for seed in 0..20 {
                for d in simulate_detections(&f, &latents, &cfg, seed).unwrap() {
                    assert!((norm(&d.feature) - 1.0).abs() < 1e-9);
                    assert!((0.0..=1.0).contains(&d.class_score));
                    assert!(d.bbox.is_valid());
                    assert!(d.bbox.x_min >= 0.0 && d.bbox.x_max <= f.width() as f64);
                    assert!(d.bbox.y_min >= 0.0 && d.bbox.y_max <= f.height() as f64);
                }
            }
        }
    }

    #[test]
    fn false_positive_rate() {
        let s = generate_scene(3, &TraitConfig::default().with_fixed_counts(4, 3), 0).unwrap();
        let mut f = frame(&s);
        f.gt.clear();
        let cfg = DetectorNoiseConfig {
            fp_rate: 2.0,
            ..DetectorNoiseConfig::default()
        };
        let n = 10_000;
        let total: usize = (0..n)
            .map(|seed| simulate_detections(&f, &[], &cfg, seed).unwrap().len())
            .sum();
        let mean = total as f64 / n as f64;
        assert!((1.9..=2.1).contains(&mean), "mean {mean}");
    }

    #[test]
    fn embedding_kernel() {
        let emb = PositionEmbedding::new(4096, 0.03, WorkspaceLimits::default(), 0).unwrap();
        let p = Vec3::new(0.1, 0.0, 0.8);
        let a = emb.embed(&p);
        assert!((dot(&a, &a) - 1.0).abs() < 0.05);
        for d in [0.0, 0.03, 0.06] {
            let b = emb.embed(&(p + Vec3::new(d, 0.0, 0.0)));
            let k = (-(d * d) / (2.0 * 0.03 * 0.03)).exp();
            assert!((dot(&a, &b) - k).abs() < 0.06, "d={d}");
        }
    }
}

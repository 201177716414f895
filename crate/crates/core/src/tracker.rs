//! Tracking by re-identification features: cosine-distance costs, minimum
//! cost assignment with a gate, tracklets that are never deleted, and a
//! static-object Kalman filter on the measured 3D position.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::bbox::Box2D;
use crate::detector::Detection;
use crate::error::{invalid_config, Error, Result};
use crate::geometry::Vec3;
use crate::matching::{hungarian_min_cost, CostMatrix};
use crate::render::StructuredCloud;
use crate::vector::{dot, norm, normalize};

/// `1 − cos(f, g)`, in `[0, 2]`.
pub fn cosine_distance(f: &[f64], g: &[f64]) -> Result<f64> {
    if f.len() != g.len() {
        return Err(Error::InvalidInput(format!(
            "feature dimensions differ: {} vs {}",
            f.len(),
            g.len()
        )));
    }
    let (nf, ng) = (norm(f), norm(g));
    if nf == 0.0 || ng == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((1.0 - dot(f, g) / (nf * ng)).clamp(0.0, 2.0))
}

/// Mean of the world points inside `bbox` after rejecting depth outliers.
///
/// Depth is the distance from `camera_center`. Points farther than `k`
/// median absolute deviations from the median depth are dropped; an
/// infinite `k` keeps everything.
pub fn measure_position_3d(
    bbox: &Box2D,
    world_cloud: &StructuredCloud,
    camera_center: &Vec3,
    k: f64,
) -> Option<Vec3> {
    let u0 = bbox.x_min.max(0.0).floor() as usize;
    let v0 = bbox.y_min.max(0.0).floor() as usize;
    let u1 = (bbox.x_max.ceil().max(0.0) as usize).min(world_cloud.width);
    let v1 = (bbox.y_max.ceil().max(0.0) as usize).min(world_cloud.height);
    let mut points = Vec::new();
    for v in v0..v1 {
        for u in u0..u1 {
            if bbox.contains_pixel(u, v) {
                if let Some(p) = world_cloud.get(u, v) {
                    points.push(p);
                }
            }
        }
    }
    filtered_mean(&points, camera_center, k)
}

pub(crate) fn filtered_mean(points: &[Vec3], camera_center: &Vec3, k: f64) -> Option<Vec3> {
    if points.is_empty() {
        return None;
    }
    let depths: Vec<f64> = points.iter().map(|p| (p - camera_center).norm()).collect();
    let keep: Vec<bool> = if k.is_finite() {
        let med = median(depths.clone());
        let mad = median(depths.iter().map(|d| (d - med).abs()).collect());
        depths.iter().map(|d| (d - med).abs() <= k * mad).collect()
    } else {
        vec![true; points.len()]
    };
    let (sum, n) = points
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .fold((Vec3::zeros(), 0usize), |(s, n), (p, _)| (s + p, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KalmanConfig {
    /// m² per frame.
    pub process_noise_q: f64,
    /// m².
    pub measurement_noise_r: f64,
    /// m².
    pub initial_cov: f64,
}

impl Default for KalmanConfig {
    fn default() -> Self {
        Self {
            process_noise_q: 1e-6,
            measurement_noise_r: 1e-4,
            initial_cov: 1.0,
        }
    }
}

impl KalmanConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.process_noise_q) || !ok(self.initial_cov) || !ok(self.measurement_noise_r) {
            return Err(invalid_config("Kalman noise terms must be finite and non-negative"));
        }
        if self.measurement_noise_r <= 0.0 {
            return Err(invalid_config("measurement_noise_r must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KalmanState {
    pub mean: Vec3,
    pub cov: Matrix3<f64>,
}

impl KalmanState {
    pub fn new(mean: Vec3, cov: Matrix3<f64>) -> Self {
        Self { mean, cov }
    }

    pub fn isotropic(mean: Vec3, var: f64) -> Self {
        Self::new(mean, Matrix3::identity() * var)
    }
}

/// Predict with a constant-position model, then fuse `z`.
pub fn kalman_update(state: &KalmanState, z: &Vec3, cfg: &KalmanConfig) -> KalmanState {
    let eye = Matrix3::identity();
    let p = state.cov + eye * cfg.process_noise_q;
    let r = eye * cfg.measurement_noise_r;
    let s = p + r;
    // S is symmetric positive definite since r > 0.
    let s_inv = s
        .cholesky()
        .map(|c| c.inverse())
        .unwrap_or_else(|| s.try_inverse().unwrap_or(eye / cfg.measurement_noise_r));
    let gain = p * s_inv;
    let mean = state.mean + gain * (z - state.mean);
    let a = eye - gain;
    let cov = a * p * a.transpose() + gain * r * gain.transpose();
    KalmanState::new(mean, 0.5 * (cov + cov.transpose()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssociationConfig {
    /// Largest cosine distance accepted for a match.
    pub gate: f64,
    /// Weight of the stored feature in the running average.
    pub feature_momentum: f64,
    pub score_threshold: f64,
    /// Median-absolute-deviation factor of the depth filter.
    pub mad_k: f64,
    /// Weight of a squared Mahalanobis position distance added to the
    /// cosine cost. Zero keeps association on features alone.
    pub position_weight: f64,
}

impl Default for AssociationConfig {
    fn default() -> Self {
        Self {
            gate: 0.5,
            feature_momentum: 0.9,
            score_threshold: 0.05,
            mad_k: 3.0,
            position_weight: 0.0,
        }
    }
}

impl AssociationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=2.0).contains(&self.gate) {
            return Err(invalid_config("gate must lie in [0, 2]"));
        }
        if !(0.0..=1.0).contains(&self.feature_momentum) {
            return Err(invalid_config("feature_momentum must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.score_threshold) {
            return Err(invalid_config("score_threshold must lie in [0, 1]"));
        }
        if !(self.mad_k >= 0.0) {
            return Err(invalid_config("mad_k must be non-negative"));
        }
        if !(self.position_weight >= 0.0 && self.position_weight.is_finite()) {
            return Err(invalid_config("position_weight must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tracklet {
    pub id: u32,
    /// Unit norm.
    pub feature: Vec<f64>,
    /// `None` until a first 3D position is measured.
    pub kalman: Option<KalmanState>,
    pub last_seen: usize,
    pub hits: usize,
}

/// One output row: a detection attached to a tracklet in a frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    pub frame: usize,
    pub tracklet_id: u32,
    pub bbox: Box2D,
    pub score: f64,
    #[serde(default)]
    pub position: Option<[f64; 3]>,
    #[serde(default)]
    pub cov_trace: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Tracker {
    pub association: AssociationConfig,
    pub kalman: KalmanConfig,
    tracklets: Vec<Tracklet>,
    next_id: u32,
    frame: usize,
}

impl Tracker {
    pub fn new(association: AssociationConfig, kalman: KalmanConfig) -> Result<Self> {
        association.validate()?;
        kalman.validate()?;
        Ok(Self {
            association,
            kalman,
            tracklets: Vec::new(),
            next_id: 0,
            frame: 0,
        })
    }

    pub fn tracklets(&self) -> &[Tracklet] {
        &self.tracklets
    }

    /// Index of the next frame to be processed.
    pub fn frame_index(&self) -> usize {
        self.frame
    }

    /// Measures 3D positions for `detections` from a world-frame cloud,
    /// then associates them.
    pub fn track_step(
        &mut self,
        mut detections: Vec<Detection>,
        world_cloud: &StructuredCloud,
        camera_center: &Vec3,
    ) -> Result<Vec<(u32, Detection)>> {
        for d in &mut detections {
            d.centroid3d = measure_position_3d(&d.bbox, world_cloud, camera_center, self.association.mad_k)
                .map(Into::into);
        }
        self.step(detections)
    }

    /// Associates one frame of detections, whose `centroid3d` (if any) feeds
    /// the Kalman filters. Returns each kept detection with its tracklet id.
    pub fn step(&mut self, detections: Vec<Detection>) -> Result<Vec<(u32, Detection)>> {
        let frame = self.frame;
        let cfg = self.association;
        let detections: Vec<Detection> = detections
            .into_iter()
            .filter(|d| d.class_score >= cfg.score_threshold)
            .collect();

        let (nt, nd) = (self.tracklets.len(), detections.len());
        let mut data = Vec::with_capacity(nt * nd);
        for t in &self.tracklets {
            for d in &detections {
                let mut c = cosine_distance(&t.feature, &d.feature)?;
                if cfg.position_weight > 0.0 {
                    if let (Some(k), Some(z)) = (&t.kalman, d.centroid3d) {
                        c += cfg.position_weight * self.mahalanobis2(k, &Vec3::from(z));
                    }
                }
                data.push(c);
            }
        }
        let costs = CostMatrix::new(nt, nd, data)?;
        let mut owner: Vec<Option<usize>> = vec![None; nd];
        for (t, d) in hungarian_min_cost(&costs) {
            if costs.get(t, d) <= cfg.gate {
                owner[d] = Some(t);
            }
        }

        let mut out = Vec::with_capacity(nd);
        for (d, det) in detections.into_iter().enumerate() {
            let z = det.centroid3d.map(Vec3::from);
            let id = match owner[d] {
                Some(t) => {
                    let tr = &mut self.tracklets[t];
                    let m = cfg.feature_momentum;
                    tr.feature
                        .iter_mut()
                        .zip(&det.feature)
                        .for_each(|(f, n)| *f = m * *f + (1.0 - m) * n);
                    if normalize(&mut tr.feature).is_err() {
                        tr.feature.clone_from(&det.feature);
                    }
                    if let Some(z) = z {
                        let prior = tr
                            .kalman
                            .unwrap_or_else(|| KalmanState::isotropic(z, self.kalman.initial_cov));
                        tr.kalman = Some(kalman_update(&prior, &z, &self.kalman));
                    }
                    tr.last_seen = frame;
                    tr.hits += 1;
                    tr.id
                }
                None => {
                    let id = self.next_id;
                    self.next_id += 1;
                    let kalman = z.map(|z| {
                        kalman_update(&KalmanState::isotropic(z, self.kalman.initial_cov), &z, &self.kalman)
                    });
                    self.tracklets.push(Tracklet {
                        id,
                        feature: det.feature.clone(),
                        kalman,
                        last_seen: frame,
                        hits: 1,
                    });
                    id
                }
            };
            out.push((id, det));
        }
        self.frame += 1;
        Ok(out)
    }

    fn mahalanobis2(&self, k: &KalmanState, z: &Vec3) -> f64 {
        let s = k.cov + Matrix3::identity() * self.kalman.measurement_noise_r;
        let e = z - k.mean;
        s.try_inverse().map_or(f64::INFINITY, |inv| (e.transpose() * inv * e)[(0, 0)])
    }

    /// Output records for one processed frame.
    pub fn records(&self, frame: usize, assigned: &[(u32, Detection)]) -> Vec<TrackRecord> {
        assigned
            .iter()
            .map(|(id, d)| {
                let k = self.tracklets[*id as usize].kalman;
                TrackRecord {
                    frame,
                    tracklet_id: *id,
                    bbox: d.bbox,
                    score: d.class_score,
                    position: k.map(|k| k.mean.into()),
                    cov_trace: k.map(|k| k.cov.trace()),
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(feature: Vec<f64>) -> Detection {
        Detection {
            bbox: Box2D::new(0.0, 0.0, 10.0, 10.0).unwrap(),
            class_score: 0.9,
            feature,
            centroid3d: None,
        }
    }

    fn unit(angle: f64) -> Vec<f64> {
        vec![angle.cos(), angle.sin()]
    }

    #[test]
    fn cosine_distance_cases() {
        assert_eq!(cosine_distance(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert!((cosine_distance(&[1.0, 0.0], &[0.0, 3.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine_distance(&[1.0, 0.0], &[-2.0, 0.0]).unwrap(), 2.0);
        assert!(matches!(cosine_distance(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::ZeroVector)));
    }

    #[test]
    fn mad_filter_rejects_far_depth() {
        let cam = Vec3::zeros();
        let pts: Vec<Vec3> = [1.00, 1.01, 0.99, 1.02, 3.0]
            .iter()
            .map(|&z| Vec3::new(0.0, 0.0, z))
            .collect();
        let m = filtered_mean(&pts, &cam, 3.0).unwrap();
        assert!((m.z - 1.005).abs() < 1e-12);
        let all = filtered_mean(&pts, &cam, f64::INFINITY).unwrap();
        assert!((all.z - 7.02 / 5.0).abs() < 1e-12);
        assert!(filtered_mean(&[], &cam, 3.0).is_none());
    }

    #[test]
    fn bbox_selects_cloud_pixels() {
        let mut cloud = StructuredCloud::empty(8, 6);
        for v in 0..6 {
            for u in 0..8 {
                let z = if u < 4 { 1.0 } else { 1.02 };
                cloud.set(u, v, Vec3::new(0.0, 0.0, z));
            }
        }
        let b = Box2D::new(0.0, 0.0, 8.0, 6.0).unwrap();
        let m = measure_position_3d(&b, &cloud, &Vec3::zeros(), f64::INFINITY).unwrap();
        assert!((m.z - 1.01).abs() < 1e-12);
        let left = Box2D::new(0.0, 0.0, 4.0, 6.0).unwrap();
        let m = measure_position_3d(&left, &cloud, &Vec3::zeros(), 3.0).unwrap();
        assert_eq!(m, Vec3::new(0.0, 0.0, 1.0));
        assert!(measure_position_3d(&b, &StructuredCloud::empty(8, 6), &Vec3::zeros(), 3.0).is_none());
    }

    #[test]
    fn kalman_zero_innovation_and_convergence() {
        let cfg = KalmanConfig {
            process_noise_q: 0.0,
            ..KalmanConfig::default()
        };
        let s = KalmanState::isotropic(Vec3::new(1.0, 2.0, 3.0), 1.0);
        let next = kalman_update(&s, &s.mean, &cfg);
        assert_eq!(next.mean, s.mean);
        assert!(next.cov.trace() < s.cov.trace());

        let z = Vec3::new(0.3, -0.1, 0.9);
        let mut s = KalmanState::isotropic(Vec3::new(5.0, -4.0, 2.0), 1.0);
        let mut trace = s.cov.trace();
        for _ in 0..50 {
            s = kalman_update(&s, &z, &cfg);
            assert!(s.cov.trace() <= trace);
            trace = s.cov.trace();
        }
        assert!((s.mean - z).norm() < 1e-3);
    }

    #[test]
    fn identical_feature_keeps_id() {
        let mut tr = Tracker::new(AssociationConfig::default(), KalmanConfig::default()).unwrap();
        let a = tr.step(vec![det(unit(0.0))]).unwrap();
        let b = tr.step(vec![det(unit(0.0))]).unwrap();
        assert_eq!(a[0].0, b[0].0);
        assert_eq!(tr.tracklets().len(), 1);
        assert_eq!(tr.tracklets()[0].hits, 2);
    }

    #[test]
    fn gate_spawns_new_tracklet() {
        let mut tr = Tracker::new(AssociationConfig::default(), KalmanConfig::default()).unwrap();
        tr.step(vec![det(unit(0.0))]).unwrap();
        // cos = −0.5, distance 1.5.
        let out = tr.step(vec![det(unit(2.0 * std::f64::consts::FRAC_PI_3))]).unwrap();
        assert_eq!(out[0].0, 1);
        assert_eq!(tr.tracklets().len(), 2);
        assert_eq!(tr.tracklets()[0].hits, 1);
    }

    #[test]
    fn low_scores_are_dropped() {
        let mut tr = Tracker::new(AssociationConfig::default(), KalmanConfig::default()).unwrap();
        let mut d = det(unit(0.0));
        d.class_score = 0.01;
        assert!(tr.step(vec![d]).unwrap().is_empty());
        assert!(tr.tracklets().is_empty());
    }

    #[test]
    fn ema_update_renormalizes() {
        let mut tr = Tracker::new(AssociationConfig::default(), KalmanConfig::default()).unwrap();
        tr.step(vec![det(unit(0.0))]).unwrap();
        tr.step(vec![det(unit(0.5))]).unwrap();
        let f = &tr.tracklets()[0].feature;
        let expected = {
            let mut v = vec![0.9 + 0.1 * 0.5f64.cos(), 0.1 * 0.5f64.sin()];
            normalize(&mut v).unwrap();
            v
        };
        assert!((f[0] - expected[0]).abs() < 1e-12 && (f[1] - expected[1]).abs() < 1e-12);
    }
}

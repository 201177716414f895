//! Viewpoint sampling and ray casting of plant scenes.
//!
//! Each pixel casts one ray through its center. Primitives are analytic
//! (sphere, capped cylinder, elliptical patch), the nearest hit wins, and
//! the hit point is stored in the camera frame. Ground truth visibility is
//! the ratio of a fruit's visible pixels to the pixels its silhouette
//! would cover with every occluder removed.

use std::f64::consts::TAU;

use image::{Rgb, RgbImage};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::bbox::Box2D;
use crate::error::{invalid_config, Result};
use crate::geometry::{Interval, Pose6DoF, Vec3};
use crate::rng::{rng_for, stream};
use crate::scene::{Dimensions, OrganKind, OrganPrimitive, PlantScene};

/// Rays hitting closer than this (meters) are ignored.
const NEAR: f64 = 1e-3;

pub const DEFAULT_MIN_VISIBILITY: f64 = 0.1;

const TOMATO_RGB: [u8; 3] = [200, 30, 30];
const LEAF_RGB: [u8; 3] = [40, 150, 40];
const STEM_RGB: [u8; 3] = [110, 80, 40];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for CameraIntrinsics {
    /// Half of a 960x540 sensor with a ~69° horizontal field of view.
    fn default() -> Self {
        Self {
            fx: 350.0,
            fy: 350.0,
            cx: 240.0,
            cy: 135.0,
            width: 480,
            height: 270,
        }
    }
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<()> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.cx > 0.0
            && self.cx < self.width as f64
            && self.cy > 0.0
            && self.cy < self.height as f64;
        if !ok {
            return Err(invalid_config(format!("invalid intrinsics {self:?}")));
        }
        Ok(())
    }

    /// Ray direction through the center of pixel `(u, v)`, scaled so that
    /// its z component is 1: the ray parameter equals depth.
    pub fn pixel_ray(&self, u: usize, v: usize) -> Vec3 {
        Vec3::new(
            (u as f64 + 0.5 - self.cx) / self.fx,
            (v as f64 + 0.5 - self.cy) / self.fy,
            1.0,
        )
    }

    /// Continuous image coordinates of a camera-frame point.
    pub fn project(&self, p: &Vec3) -> Option<(f64, f64)> {
        if p.z <= 0.0 {
            return None;
        }
        Some((self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewpointSamplerConfig {
    /// Radial distance from the stem axis.
    pub cylinder_radius: Interval<f64>,
    /// Height along the stem axis, measured from the axis point.
    pub cylinder_height: Interval<f64>,
    pub aim_jitter_radius: f64,
}

impl Default for ViewpointSamplerConfig {
    fn default() -> Self {
        Self {
            cylinder_radius: Interval::new(0.4, 0.8),
            cylinder_height: Interval::new(0.0, 1.0),
            aim_jitter_radius: 0.1,
        }
    }
}

impl ViewpointSamplerConfig {
    pub fn validate(&self) -> Result<()> {
        self.cylinder_radius.validate_positive("cylinder_radius")?;
        let h = self.cylinder_height;
        if !(h.min.is_finite() && h.max.is_finite() && h.is_ordered()) {
            return Err(invalid_config("cylinder_height: empty interval"));
        }
        if !(self.aim_jitter_radius.is_finite() && self.aim_jitter_radius >= 0.0) {
            return Err(invalid_config("aim_jitter_radius must be non-negative"));
        }
        if self.aim_jitter_radius >= self.cylinder_radius.min {
            return Err(invalid_config("aim jitter must stay inside the camera cylinder"));
        }
        Ok(())
    }
}

/// Samples a camera pose inside the cylinder around the stem, aimed at a
/// point near the stem with the image kept upright.
pub fn sample_viewpoint(
    scene: &PlantScene,
    cfg: &ViewpointSamplerConfig,
    seed: u64,
) -> Result<Pose6DoF> {
    sample_viewpoint_with_aim(scene, cfg, seed).map(|(pose, _)| pose)
}

/// As [`sample_viewpoint`], also returning the aim point.
pub fn sample_viewpoint_with_aim(
    scene: &PlantScene,
    cfg: &ViewpointSamplerConfig,
    seed: u64,
) -> Result<(Pose6DoF, Vec3)> {
    cfg.validate()?;
    let mut rng = rng_for(seed, &[stream::VIEWPOINT]);
    let origin = Vec3::from(scene.stem_axis.point);
    let up = Vec3::from(scene.stem_axis.direction).normalize();
    let e1 = if up.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let e1 = (e1 - up * e1.dot(&up)).normalize();
    let e2 = up.cross(&e1);

    let (r0, r1) = (cfg.cylinder_radius.min, cfg.cylinder_radius.max);
    let radius = rng.random_range(r0 * r0..=r1 * r1).sqrt();
    let azimuth = rng.random_range(0.0..TAU);
    let height = cfg.cylinder_height.sample(&mut rng);
    let eye = origin + up * height + (e1 * azimuth.cos() + e2 * azimuth.sin()) * radius;

    let jitter = sample_in_ball(&mut rng, cfg.aim_jitter_radius);
    let aim = origin + up * height + jitter;
    let pose = Pose6DoF::look_at(eye, aim, up)?;
    Ok((pose, aim))
}

fn sample_in_ball(rng: &mut impl rand::Rng, radius: f64) -> Vec3 {
    if radius == 0.0 {
        return Vec3::zeros();
    }
    loop {
        let p = Vec3::new(
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
        );
        if p.norm_squared() <= 1.0 {
            return p * radius;
        }
    }
}

/// A point cloud laid out on the image grid, one optional point per pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct StructuredCloud {
    pub width: usize,
    pub height: usize,
    /// Row-major; invalid entries hold NaN.
    pub points: Vec<Vec3>,
    pub valid: Vec<bool>,
}

impl StructuredCloud {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            points: vec![Vec3::repeat(f64::NAN); width * height],
            valid: vec![false; width * height],
        }
    }

    pub fn get(&self, u: usize, v: usize) -> Option<Vec3> {
        let i = v * self.width + u;
        self.valid[i].then(|| self.points[i])
    }

    pub fn set(&mut self, u: usize, v: usize, p: Vec3) {
        let i = v * self.width + u;
        self.points[i] = p;
        self.valid[i] = true;
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthObject {
    pub object_id: u32,
    pub bbox: Box2D,
    /// Sphere center in the world frame.
    pub centroid3d: [f64; 3],
    /// Sphere center in the camera frame of the rendering pose.
    pub centroid_camera: [f64; 3],
    pub visibility: f64,
}

#[derive(Clone, Debug)]
pub struct ViewpointFrame {
    pub color: RgbImage,
    /// Camera-frame points.
    pub cloud: StructuredCloud,
    /// Camera-to-world pose. The harness may replace it with a noisy copy.
    pub camera_pose: Pose6DoF,
    pub intrinsics: CameraIntrinsics,
    pub gt: Vec<GroundTruthObject>,
}

impl ViewpointFrame {
    pub fn width(&self) -> usize {
        self.intrinsics.width
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height
    }
}

/// Camera-frame primitive ready for ray tests.
enum Shape {
    Sphere {
        center: Vec3,
        radius2: f64,
    },
    Cylinder {
        base: Vec3,
        axis: Vec3,
        length: f64,
        radius2: f64,
    },
    Ellipse {
        center: Vec3,
        normal: Vec3,
        major: Vec3,
        minor: Vec3,
        inv_a: f64,
        inv_b: f64,
    },
}

impl Shape {
    fn from_organ(organ: &OrganPrimitive, world_to_cam: &Pose6DoF) -> Self {
        let pose = world_to_cam.compose(&organ.pose);
        let r = pose.rotation_matrix();
        let c = pose.translation;
        match organ.dimensions {
            Dimensions::Tomato { radius } => Shape::Sphere {
                center: c,
                radius2: radius * radius,
            },
            Dimensions::Stem { radius, length } => Shape::Cylinder {
                base: c,
                axis: r.column(2).into_owned(),
                length,
                radius2: radius * radius,
            },
            Dimensions::Leaf { length, width } => Shape::Ellipse {
                center: c,
                normal: r.column(2).into_owned(),
                major: r.column(0).into_owned(),
                minor: r.column(1).into_owned(),
                inv_a: 2.0 / length,
                inv_b: 2.0 / width,
            },
        }
    }

    /// Ray from the camera origin along `d` (with `d.z == 1`). Returns the
    /// ray parameter of the nearest hit in front of the near plane.
    fn hit(&self, d: &Vec3) -> Option<f64> {
        match self {
            Shape::Sphere { center, radius2 } => {
                let a = d.norm_squared();
                let b = d.dot(center);
                let disc = b * b - a * (center.norm_squared() - radius2);
                if disc < 0.0 {
                    return None;
                }
                let t = (b - disc.sqrt()) / a;
                (t > NEAR).then_some(t)
            }
            Shape::Cylinder {
                base,
                axis,
                length,
                radius2,
            } => {
                let w = -base;
                let da = d.dot(axis);
                let wa = w.dot(axis);
                let dp = d - axis * da;
                let wp = w - axis * wa;
                let mut best = f64::INFINITY;
                let a = dp.norm_squared();
                if a > 1e-18 {
                    let b = 2.0 * dp.dot(&wp);
                    let c = wp.norm_squared() - radius2;
                    let disc = b * b - 4.0 * a * c;
                    if disc >= 0.0 {
                        let sq = disc.sqrt();
                        for t in [(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)] {
                            let s = wa + t * da;
                            if t > NEAR && (0.0..=*length).contains(&s) && t < best {
                                best = t;
                            }
                        }
                    }
                }
                if da.abs() > 1e-12 {
                    for s in [0.0, *length] {
                        let t = (s - wa) / da;
                        if t > NEAR && t < best && (wp + dp * t).norm_squared() <= *radius2 {
                            best = t;
                        }
                    }
                }
                best.is_finite().then_some(best)
            }
            Shape::Ellipse {
                center,
                normal,
                major,
                minor,
                inv_a,
                inv_b,
            } => {
                let denom = d.dot(normal);
                if denom.abs() < 1e-12 {
                    return None;
                }
                let t = center.dot(normal) / denom;
                if t <= NEAR {
                    return None;
                }
                let q = d * t - center;
                let x = q.dot(major) * inv_a;
                let y = q.dot(minor) * inv_b;
                (x * x + y * y <= 1.0).then_some(t)
            }
        }
    }
}

const NO_OWNER: u32 = u32::MAX;

/// Depth buffer plus per-fruit silhouette counts.
struct Raster {
    depth: Vec<f64>,
    owner: Vec<u32>,
    /// Per target-tomato object id: pixels its ray test hits, occluders ignored.
    silhouette: Vec<u32>,
}

fn rasterize(organs: &[&OrganPrimitive], n_objects: usize, pose: &Pose6DoF, k: &CameraIntrinsics) -> Raster {
    let n = k.pixel_count();
    let mut raster = Raster {
        depth: vec![f64::INFINITY; n],
        owner: vec![NO_OWNER; n],
        silhouette: vec![0; n_objects],
    };
    let world_to_cam = pose.inverse();
    for (index, organ) in organs.iter().enumerate() {
        let Some((u0, u1, v0, v1)) = screen_rect(organ, &world_to_cam, k) else {
            continue;
        };
        let shape = Shape::from_organ(organ, &world_to_cam);
        let tracked = organ.object_id.map(|id| id as usize);
        for v in v0..v1 {
            for u in u0..u1 {
                let d = k.pixel_ray(u, v);
                let Some(t) = shape.hit(&d) else { continue };
                if let Some(id) = tracked {
                    raster.silhouette[id] += 1;
                }
                let i = v * k.width + u;
                if t < raster.depth[i] {
                    raster.depth[i] = t;
                    raster.owner[i] = index as u32;
                }
            }
        }
    }
    raster
}

/// Conservative pixel range covering the primitive, from its projected
/// world-space bounding box. `None` when it lies wholly behind the camera.
fn screen_rect(
    organ: &OrganPrimitive,
    world_to_cam: &Pose6DoF,
    k: &CameraIntrinsics,
) -> Option<(usize, usize, usize, usize)> {
    let corners = organ.aabb().corners().map(|c| world_to_cam.transform_point(&c));
    if corners.iter().all(|c| c.z <= NEAR) {
        return None;
    }
    let full = (0, k.width, 0, k.height);
    if corners.iter().any(|c| c.z <= NEAR) {
        return Some(full);
    }
    let (mut umin, mut umax, mut vmin, mut vmax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for c in &corners {
        let (u, v) = k.project(c)?;
        umin = umin.min(u);
        umax = umax.max(u);
        vmin = vmin.min(v);
        vmax = vmax.max(v);
    }
    let clamp_lo = |x: f64, hi: usize| (x.floor() - 1.0).clamp(0.0, hi as f64) as usize;
    let clamp_hi = |x: f64, hi: usize| (x.ceil() + 1.0).clamp(0.0, hi as f64) as usize;
    let rect = (
        clamp_lo(umin, k.width),
        clamp_hi(umax, k.width),
        clamp_lo(vmin, k.height),
        clamp_hi(vmax, k.height),
    );
    (rect.0 < rect.1 && rect.2 < rect.3).then_some(rect)
}

fn scene_organs(scene: &PlantScene) -> Vec<&OrganPrimitive> {
    scene.all_primitives().collect()
}

fn collect_gt(
    scene: &PlantScene,
    organs: &[&OrganPrimitive],
    raster: &Raster,
    pose: &Pose6DoF,
    k: &CameraIntrinsics,
    min_visibility: f64,
) -> Vec<GroundTruthObject> {
    let n_objects = raster.silhouette.len();
    let mut visible = vec![0u32; n_objects];
    let mut bounds = vec![(usize::MAX, usize::MAX, 0usize, 0usize); n_objects];
    for v in 0..k.height {
        for u in 0..k.width {
            let owner = raster.owner[v * k.width + u];
            if owner == NO_OWNER {
                continue;
            }
            if let Some(id) = organs[owner as usize].object_id {
                let id = id as usize;
                visible[id] += 1;
                let b = &mut bounds[id];
                b.0 = b.0.min(u);
                b.1 = b.1.min(v);
                b.2 = b.2.max(u);
                b.3 = b.3.max(v);
            }
        }
    }
    let world_to_cam = pose.inverse();
    let mut gt = Vec::new();
    for tomato in scene.tomatoes() {
        let Some(id) = tomato.object_id else { continue };
        let id_us = id as usize;
        if visible[id_us] == 0 || raster.silhouette[id_us] == 0 {
            continue;
        }
        let visibility = (visible[id_us] as f64 / raster.silhouette[id_us] as f64).min(1.0);
        if visibility < min_visibility {
            continue;
        }
        let (u0, v0, u1, v1) = bounds[id_us];
        let center = tomato.pose.translation;
        gt.push(GroundTruthObject {
            object_id: id,
            bbox: Box2D {
                x_min: u0 as f64,
                y_min: v0 as f64,
                x_max: (u1 + 1) as f64,
                y_max: (v1 + 1) as f64,
            },
            centroid3d: center.into(),
            centroid_camera: world_to_cam.transform_point(&center).into(),
            visibility,
        });
    }
    gt
}

/// Ground truth for every target fruit at least `min_visibility` visible.
pub fn annotate_gt(
    scene: &PlantScene,
    pose: &Pose6DoF,
    k: &CameraIntrinsics,
    min_visibility: f64,
) -> Result<Vec<GroundTruthObject>> {
    k.validate()?;
    if !(0.0..=1.0).contains(&min_visibility) {
        return Err(invalid_config("min_visibility must lie in [0, 1]"));
    }
    let organs = scene_organs(scene);
    let raster = rasterize(&organs, scene.tomato_count(), pose, k);
    Ok(collect_gt(scene, &organs, &raster, pose, k, min_visibility))
}

pub fn render_frame(scene: &PlantScene, pose: &Pose6DoF, k: &CameraIntrinsics) -> Result<ViewpointFrame> {
    render_frame_with(scene, pose, k, DEFAULT_MIN_VISIBILITY)
}

pub fn render_frame_with(
    scene: &PlantScene,
    pose: &Pose6DoF,
    k: &CameraIntrinsics,
    min_visibility: f64,
) -> Result<ViewpointFrame> {
    k.validate()?;
    if !(0.0..=1.0).contains(&min_visibility) {
        return Err(invalid_config("min_visibility must lie in [0, 1]"));
    }
    let organs = scene_organs(scene);
    let raster = rasterize(&organs, scene.tomato_count(), pose, k);

    let mut color = RgbImage::new(k.width as u32, k.height as u32);
    let mut cloud = StructuredCloud::empty(k.width, k.height);
    for v in 0..k.height {
        for u in 0..k.width {
            let i = v * k.width + u;
            let owner = raster.owner[i];
            if owner == NO_OWNER {
                continue;
            }
            let rgb = match organs[owner as usize].kind {
                OrganKind::Tomato => TOMATO_RGB,
                OrganKind::Leaf => LEAF_RGB,
                OrganKind::StemSegment => STEM_RGB,
            };
            color.put_pixel(u as u32, v as u32, Rgb(rgb));
            cloud.set(u, v, k.pixel_ray(u, v) * raster.depth[i]);
        }
    }
    let gt = collect_gt(scene, &organs, &raster, pose, k, min_visibility);
    Ok(ViewpointFrame {
        color,
        cloud,
        camera_pose: *pose,
        intrinsics: *k,
        gt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{generate_scene, StemAxis, TraitConfig};

    fn scene_of(organs: Vec<OrganPrimitive>) -> PlantScene {
        PlantScene {
            seed: 0,
            traits: TraitConfig::default(),
            stem_axis: StemAxis::default(),
            target_plant: organs,
            background_plants: vec![],
        }
    }

    /// Camera at the origin looking down +z of the world.
    fn forward_camera() -> Pose6DoF {
        Pose6DoF::identity()
    }

    #[test]
    fn sampled_viewpoints_respect_the_cylinder() {
        let scene = generate_scene(1, &TraitConfig::default(), 0).unwrap();
        let cfg = ViewpointSamplerConfig::default();
        for seed in 0..1000 {
            let (pose, aim) = sample_viewpoint_with_aim(&scene, &cfg, seed).unwrap();
            let p = pose.translation;
            let r = (p.x * p.x + p.y * p.y).sqrt();
            assert!(r >= cfg.cylinder_radius.min - 1e-12 && r <= cfg.cylinder_radius.max + 1e-12);
            assert!(cfg.cylinder_height.contains(p.z));
            // Optical axis passes through the aim point.
            let axis = pose.transform_vector(&Vec3::z());
            let w = aim - p;
            let dist = (w - axis * w.dot(&axis)).norm();
            assert!(dist < 1e-6, "aim point off-axis by {dist}");
            assert!(w.dot(&axis) > 0.0);
            let aim_r = (aim.x * aim.x + aim.y * aim.y).sqrt();
            assert!(aim_r <= cfg.aim_jitter_radius + 1e-12);
            assert!((pose.quaternion_norm() - 1.0).abs() < 1e-9);
        }
        assert_eq!(
            sample_viewpoint(&scene, &cfg, 5).unwrap(),
            sample_viewpoint(&scene, &cfg, 5).unwrap()
        );
    }

    #[test]
    fn sphere_silhouette_matches_projective_geometry() {
        let k = CameraIntrinsics::default();
        let (d, r) = (0.5, 0.03);
        let scene = scene_of(vec![OrganPrimitive::tomato(Vec3::new(0.0, 0.0, d), r, Some(0))]);
        let frame = render_frame(&scene, &forward_camera(), &k).unwrap();
        assert_eq!(frame.gt.len(), 1);
        let gt = &frame.gt[0];
        let (cx, cy) = gt.bbox.center();
        assert!((cx - k.cx).abs() <= 1.0 && (cy - k.cy).abs() <= 1.0);
        let expected = k.fx * r / (d * d - r * r).sqrt();
        assert!((gt.bbox.width() / 2.0 - expected).abs() <= 1.0, "{} vs {expected}", gt.bbox.width() / 2.0);
        assert!((gt.visibility - 1.0).abs() <= 0.02);
    }

    #[test]
    fn valid_points_reproject_into_their_pixel() {
        let scene = generate_scene(3, &TraitConfig::default(), 1).unwrap();
        let k = CameraIntrinsics::default();
        let pose = sample_viewpoint(&scene, &ViewpointSamplerConfig::default(), 9).unwrap();
        let frame = render_frame(&scene, &pose, &k).unwrap();
        assert!(frame.cloud.valid_count() > 0);
        for v in 0..k.height {
            for u in 0..k.width {
                if let Some(p) = frame.cloud.get(u, v) {
                    let (x, y) = k.project(&p).unwrap();
                    assert_eq!((x.floor() as usize, y.floor() as usize), (u, v));
                } else {
                    assert_eq!(frame.color.get_pixel(u as u32, v as u32).0, [0, 0, 0]);
                }
            }
        }
    }

    #[test]
    fn nearer_primitive_wins() {
        let k = CameraIntrinsics::default();
        let scene = scene_of(vec![
            OrganPrimitive::tomato(Vec3::new(0.0, 0.0, 1.0), 0.05, Some(0)),
            OrganPrimitive::leaf(Vec3::new(0.0, 0.0, 0.6), Vec3::x(), -Vec3::z(), 0.4, 0.4),
        ]);
        let frame = render_frame_with(&scene, &forward_camera(), &k, 0.0).unwrap();
        // Fully hidden behind the leaf: visibility 0, omitted.
        assert!(frame.gt.is_empty());
        let p = frame.cloud.get(k.width / 2, k.height / 2).unwrap();
        assert!((p.z - 0.6).abs() < 1e-9);
        assert_eq!(frame.color.get_pixel(240, 135).0, LEAF_RGB);
    }

    #[test]
    fn visibility_threshold_semantics() {
        let k = CameraIntrinsics::default();
        let r = 0.05;
        // A large leaf disc whose edge crosses the fruit silhouette.
        let scene = scene_of(vec![
            OrganPrimitive::tomato(Vec3::new(0.0, 0.0, 1.0), r, Some(0)),
            OrganPrimitive::leaf(Vec3::new(-0.5 + 0.012, 0.0, 0.5), Vec3::x(), -Vec3::z(), 1.0, 1.0),
        ]);
        let pose = forward_camera();
        let loose = annotate_gt(&scene, &pose, &k, 0.0).unwrap();
        assert_eq!(loose.len(), 1);
        let vis = loose[0].visibility;
        assert!((0.15..0.45).contains(&vis), "visibility {vis}");
        assert!(annotate_gt(&scene, &pose, &k, 0.5).unwrap().is_empty());
        // Tight box covers only the visible part.
        let (cx, _) = loose[0].bbox.center();
        assert!(cx > k.cx);
    }

    #[test]
    fn unoccluded_sphere_visibility_is_one() {
        let k = CameraIntrinsics::default();
        let scene = scene_of(vec![OrganPrimitive::tomato(Vec3::new(0.05, -0.02, 0.7), 0.03, Some(0))]);
        let gt = annotate_gt(&scene, &forward_camera(), &k, 0.0).unwrap();
        assert!((gt[0].visibility - 1.0).abs() <= 0.02);
    }

    #[test]
    fn empty_scene_renders_all_invalid() {
        let k = CameraIntrinsics::default();
        let frame = render_frame(&scene_of(vec![]), &forward_camera(), &k).unwrap();
        assert_eq!(frame.cloud.valid_count(), 0);
        assert!(frame.gt.is_empty());
    }

    #[test]
    fn cylinder_caps_and_side_are_hit() {
        let k = CameraIntrinsics::default();
        // Stem running along the optical axis: only its near cap is visible.
        let scene = scene_of(vec![OrganPrimitive::stem(Vec3::new(0.0, 0.0, 0.5), Vec3::z(), 0.2, 0.02)]);
        let frame = render_frame(&scene, &forward_camera(), &k).unwrap();
        let p = frame.cloud.get(240, 135).unwrap();
        assert!((p.z - 0.5).abs() < 1e-9);
        // Sideways stem: depth at the center pixel is the near side of the barrel.
        let scene = scene_of(vec![OrganPrimitive::stem(Vec3::new(-0.1, 0.0, 0.5), Vec3::x(), 0.2, 0.02)]);
        let frame = render_frame(&scene, &forward_camera(), &k).unwrap();
        let p = frame.cloud.get(240, 135).unwrap();
        assert!((p.z - 0.48).abs() < 1e-3);
    }

    #[test]
    fn rendering_is_deterministic() {
        let scene = generate_scene(8, &TraitConfig::default(), 2).unwrap();
        let k = CameraIntrinsics::default();
        let pose = sample_viewpoint(&scene, &ViewpointSamplerConfig::default(), 2).unwrap();
        let a = render_frame(&scene, &pose, &k).unwrap();
        let b = render_frame(&scene, &pose, &k).unwrap();
        assert_eq!(a.color, b.color);
        assert_eq!(a.gt, b.gt);
        assert_eq!(a.cloud.valid, b.cloud.valid);
    }
}

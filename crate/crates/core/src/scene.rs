//! Procedural tomato plants.
//!
//! A plant is a vertical stem of internodes. Every internode ends in a node
//! carrying three leaves and one truss of fruit; organ traits are drawn
//! uniformly from the configured intervals. Background plants reuse the
//! same generator and act as untracked distractors.

use std::f64::consts::PI;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_config, Error, Result};
use crate::geometry::{Aabb, Interval, Pose6DoF, Vec3};
use crate::rng::{derive_seed, rng_for, stream};

/// Golden-angle rotation between consecutive nodes.
const PHYLLOTAXIS_DEG: f64 = 137.5;
const NODE_AZIMUTH_JITTER_DEG: f64 = 15.0;
/// Horizontal reach of the peduncle before the first fruit.
const PEDUNCLE_REACH: f64 = 0.05;
const PEDUNCLE_DROP: f64 = 0.03;
/// Fruit advance along the truss as a fraction of the summed radii.
const TRUSS_ADVANCE: f64 = 0.75;
/// Alternating sideways offset of fruit as a fraction of its radius.
const TRUSS_ZIGZAG: f64 = 0.85;

pub const DEFAULT_BACKGROUND_STANDOFF: f64 = 1.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraitConfig {
    pub internode_count: Interval<u32>,
    pub internode_length: Interval<f64>,
    pub leaf_angle_deg: Interval<f64>,
    pub leaf_length: Interval<f64>,
    pub leaf_width: Interval<f64>,
    pub tomatoes_per_truss: Interval<u32>,
    pub tomato_radius: Interval<f64>,
    pub stem_radius: f64,
}

impl Default for TraitConfig {
    fn default() -> Self {
        Self {
            internode_count: Interval::new(4, 8),
            internode_length: Interval::new(0.05, 0.12),
            leaf_angle_deg: Interval::new(30.0, 70.0),
            leaf_length: Interval::new(0.08, 0.16),
            leaf_width: Interval::new(0.04, 0.07),
            tomatoes_per_truss: Interval::new(3, 6),
            tomato_radius: Interval::new(0.02, 0.04),
            stem_radius: 0.006,
        }
    }
}

impl TraitConfig {
    /// Fixes the internode count and the number of fruit per truss.
    pub fn with_fixed_counts(mut self, internodes: u32, tomatoes: u32) -> Self {
        self.internode_count = Interval::new(internodes, internodes);
        self.tomatoes_per_truss = Interval::new(tomatoes, tomatoes);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.internode_count.is_ordered() || self.internode_count.min == 0 {
            return Err(invalid_config("internode_count: empty or zero interval"));
        }
        if !self.tomatoes_per_truss.is_ordered() {
            return Err(invalid_config("tomatoes_per_truss: empty interval"));
        }
        self.internode_length.validate_positive("internode_length")?;
        self.leaf_angle_deg.validate_positive("leaf_angle_deg")?;
        if self.leaf_angle_deg.max >= 180.0 {
            return Err(invalid_config("leaf_angle_deg must stay below 180"));
        }
        self.leaf_length.validate_positive("leaf_length")?;
        self.leaf_width.validate_positive("leaf_width")?;
        self.tomato_radius.validate_positive("tomato_radius")?;
        if !(self.stem_radius.is_finite() && self.stem_radius > 0.0) {
            return Err(invalid_config("stem_radius must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrganKind {
    StemSegment,
    Leaf,
    Tomato,
}

/// Kind-specific sizes in meters.
///
/// Stem segments are capped cylinders along their local z axis starting at
/// the pose origin; leaves are flat ellipses in their local xy plane with
/// the long axis on x; tomatoes are spheres centered on the pose origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Dimensions {
    Stem { radius: f64, length: f64 },
    Leaf { length: f64, width: f64 },
    Tomato { radius: f64 },
}

impl Dimensions {
    fn kind(&self) -> OrganKind {
        match self {
            Dimensions::Stem { .. } => OrganKind::StemSegment,
            Dimensions::Leaf { .. } => OrganKind::Leaf,
            Dimensions::Tomato { .. } => OrganKind::Tomato,
        }
    }

    fn all_positive(&self) -> bool {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        match *self {
            Dimensions::Stem { radius, length } => ok(radius) && ok(length),
            Dimensions::Leaf { length, width } => ok(length) && ok(width),
            Dimensions::Tomato { radius } => ok(radius),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrganPrimitive {
    pub kind: OrganKind,
    pub pose: Pose6DoF,
    pub dimensions: Dimensions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_id: Option<u32>,
}

impl OrganPrimitive {
    pub fn stem(base: Vec3, axis: Vec3, length: f64, radius: f64) -> Self {
        let z = axis.normalize();
        let x = any_perpendicular(&z);
        let y = z.cross(&x);
        Self {
            kind: OrganKind::StemSegment,
            pose: Pose6DoF::from_axes(base, x, y, z),
            dimensions: Dimensions::Stem { radius, length },
            object_id: None,
        }
    }

    /// Leaf ellipse centered at `center`, long axis along `along`, surface
    /// normal closest to `normal_hint`.
    pub fn leaf(center: Vec3, along: Vec3, normal_hint: Vec3, length: f64, width: f64) -> Self {
        let x = along.normalize();
        let z = (normal_hint - x * normal_hint.dot(&x))
            .try_normalize(1e-12)
            .unwrap_or_else(|| any_perpendicular(&x));
        let y = z.cross(&x);
        Self {
            kind: OrganKind::Leaf,
            pose: Pose6DoF::from_axes(center, x, y, z),
            dimensions: Dimensions::Leaf { length, width },
            object_id: None,
        }
    }

    pub fn tomato(center: Vec3, radius: f64, object_id: Option<u32>) -> Self {
        Self {
            kind: OrganKind::Tomato,
            pose: Pose6DoF::from_translation(center),
            dimensions: Dimensions::Tomato { radius },
            object_id,
        }
    }

    /// Exact axis-aligned bounds of the primitive.
    pub fn aabb(&self) -> Aabb {
        let r = self.pose.rotation_matrix();
        let (ax, ay, az) = (r.column(0).into_owned(), r.column(1).into_owned(), r.column(2).into_owned());
        let c = self.pose.translation;
        match self.dimensions {
            Dimensions::Tomato { radius } => Aabb::around(c, Vec3::repeat(radius)),
            Dimensions::Stem { radius, length } => {
                let mid = c + az * (length / 2.0);
                let half = Vec3::from_fn(|i, _| {
                    az[i].abs() * length / 2.0 + radius * (1.0 - az[i] * az[i]).max(0.0).sqrt()
                });
                Aabb::around(mid, half)
            }
            Dimensions::Leaf { length, width } => {
                let (a, b) = (length / 2.0, width / 2.0);
                let half = Vec3::from_fn(|i, _| ((a * ax[i]).powi(2) + (b * ay[i]).powi(2)).sqrt());
                Aabb::around(c, half)
            }
        }
    }

    pub fn translated(&self, t: &Vec3) -> Self {
        let mut out = self.clone();
        out.pose.translation += t;
        out
    }
}

fn any_perpendicular(v: &Vec3) -> Vec3 {
    let helper = if v.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    v.cross(&helper).normalize()
}

/// Vertical line through the target plant's stem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StemAxis {
    pub point: [f64; 3],
    pub direction: [f64; 3],
}

impl Default for StemAxis {
    fn default() -> Self {
        Self {
            point: [0.0; 3],
            direction: [0.0, 0.0, 1.0],
        }
    }
}

/// Where background plants go: behind the target along `+y`, beyond
/// `standoff` meters, spread laterally over `lateral_spread`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackgroundLayout {
    pub standoff: f64,
    pub depth_spread: f64,
    pub lateral_spread: f64,
}

impl Default for BackgroundLayout {
    fn default() -> Self {
        Self {
            standoff: DEFAULT_BACKGROUND_STANDOFF,
            depth_spread: 0.4,
            lateral_spread: 0.8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantScene {
    pub seed: u64,
    pub traits: TraitConfig,
    pub stem_axis: StemAxis,
    #[serde(rename = "organs")]
    pub target_plant: Vec<OrganPrimitive>,
    #[serde(rename = "background")]
    pub background_plants: Vec<Vec<OrganPrimitive>>,
}

impl PlantScene {
    /// Target-plant fruit, in object-id order.
    pub fn tomatoes(&self) -> impl Iterator<Item = &OrganPrimitive> {
        self.target_plant
            .iter()
            .filter(|o| o.kind == OrganKind::Tomato)
    }

    pub fn tomato_count(&self) -> usize {
        self.tomatoes().count()
    }

    pub fn all_primitives(&self) -> impl Iterator<Item = &OrganPrimitive> {
        self.target_plant
            .iter()
            .chain(self.background_plants.iter().flatten())
    }

    pub fn validate(&self) -> Result<()> {
        self.traits.validate()?;
        for o in self.all_primitives() {
            if o.dimensions.kind() != o.kind {
                return Err(Error::InvalidInput(format!(
                    "organ of kind {:?} carries {:?} dimensions",
                    o.kind, o.dimensions
                )));
            }
            if !o.dimensions.all_positive() {
                return Err(Error::InvalidInput("organ dimensions must be positive".into()));
            }
        }
        let mut ids: Vec<u32> = self.tomatoes().filter_map(|t| t.object_id).collect();
        if ids.len() != self.tomato_count() {
            return Err(Error::InvalidInput("target tomato without object_id".into()));
        }
        ids.sort_unstable();
        if ids.iter().enumerate().any(|(i, &id)| id as usize != i) {
            return Err(Error::InvalidInput(
                "tomato object_ids must form the range 0..n".into(),
            ));
        }
        if self
            .background_plants
            .iter()
            .flatten()
            .any(|o| o.object_id.is_some())
        {
            return Err(Error::InvalidInput("background organs cannot carry object_ids".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }
}

/// Generates one plant rooted at the origin. Tomatoes get object ids
/// `0..n` in generation order.
pub fn generate_plant(seed: u64, cfg: &TraitConfig) -> Result<Vec<OrganPrimitive>> {
    cfg.validate()?;
    let mut rng = rng_for(seed, &[stream::PLANT]);
    let mut organs = Vec::new();
    let mut next_id = 0u32;

    let internodes = cfg.internode_count.sample(&mut rng);
    let mut z = 0.0;
    for node in 0..internodes {
        let length = cfg.internode_length.sample(&mut rng);
        organs.push(OrganPrimitive::stem(
            Vec3::new(0.0, 0.0, z),
            Vec3::z(),
            length,
            cfg.stem_radius,
        ));
        z += length;
        let node_pos = Vec3::new(0.0, 0.0, z);
        let jitter = rng.random_range(-NODE_AZIMUTH_JITTER_DEG..=NODE_AZIMUTH_JITTER_DEG);
        let base_az = (node as f64 * PHYLLOTAXIS_DEG + jitter).to_radians();

        for leaf in 0..3 {
            let az = base_az + leaf as f64 * 2.0 * PI / 3.0;
            let elevation = cfg.leaf_angle_deg.sample(&mut rng).to_radians();
            let leaf_len = cfg.leaf_length.sample(&mut rng);
            let leaf_width = cfg.leaf_width.sample(&mut rng);
            // Angle measured from the stem axis.
            let along = Vec3::new(
                elevation.sin() * az.cos(),
                elevation.sin() * az.sin(),
                elevation.cos(),
            );
            let center = node_pos + along * (leaf_len / 2.0 + cfg.stem_radius);
            organs.push(OrganPrimitive::leaf(center, along, Vec3::z(), leaf_len, leaf_width));
        }

        let truss_az = base_az + PI / 3.0;
        let out = Vec3::new(truss_az.cos(), truss_az.sin(), 0.0);
        let side = Vec3::z().cross(&out);
        let truss_start = node_pos + out * PEDUNCLE_REACH - Vec3::z() * PEDUNCLE_DROP;
        let peduncle_base = node_pos + out * cfg.stem_radius;
        let peduncle = truss_start - peduncle_base;
        organs.push(OrganPrimitive::stem(
            peduncle_base,
            peduncle,
            peduncle.norm(),
            cfg.stem_radius * 0.5,
        ));

        let count = cfg.tomatoes_per_truss.sample(&mut rng);
        let mut reach = 0.0;
        let mut prev_radius = 0.0;
        for j in 0..count {
            let radius = cfg.tomato_radius.sample(&mut rng);
            reach += if j == 0 {
                radius
            } else {
                TRUSS_ADVANCE * (prev_radius + radius)
            };
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let center = truss_start + out * reach + side * (sign * TRUSS_ZIGZAG * radius)
                - Vec3::z() * radius;
            organs.push(OrganPrimitive::tomato(center, radius, Some(next_id)));
            next_id += 1;
            prev_radius = radius;
        }
    }
    Ok(organs)
}

pub fn generate_scene(seed: u64, cfg: &TraitConfig, n_background: usize) -> Result<PlantScene> {
    generate_scene_with(seed, cfg, n_background, &BackgroundLayout::default())
}

pub fn generate_scene_with(
    seed: u64,
    cfg: &TraitConfig,
    n_background: usize,
    layout: &BackgroundLayout,
) -> Result<PlantScene> {
    if !(layout.standoff.is_finite() && layout.depth_spread >= 0.0 && layout.lateral_spread >= 0.0) {
        return Err(invalid_config("background layout must be finite and non-negative"));
    }
    let target_plant = generate_plant(derive_seed(seed, &[stream::PLANT]), cfg)?;
    let mut background_plants = Vec::with_capacity(n_background);
    for k in 0..n_background {
        let plant_seed = derive_seed(seed, &[stream::BACKGROUND, k as u64]);
        let mut rng = rng_for(plant_seed, &[stream::BACKGROUND]);
        let organs: Vec<OrganPrimitive> = generate_plant(plant_seed, cfg)?
            .into_iter()
            .map(|mut o| {
                o.object_id = None;
                o
            })
            .collect();
        let bounds = organs
            .iter()
            .map(OrganPrimitive::aabb)
            .reduce(|a, b| a.union(&b))
            .expect("plants always have a stem");
        let lateral = if layout.lateral_spread > 0.0 {
            rng.random_range(-layout.lateral_spread..=layout.lateral_spread)
        } else {
            0.0
        };
        let depth = if layout.depth_spread > 0.0 {
            rng.random_range(0.0..=layout.depth_spread)
        } else {
            0.0
        };
        // Shift so that the nearest point of the plant clears the standoff plane.
        let shift = Vec3::new(lateral, layout.standoff + depth - bounds.min.y, 0.0);
        background_plants.push(organs.iter().map(|o| o.translated(&shift)).collect());
    }
    Ok(PlantScene {
        seed,
        traits: cfg.clone(),
        stem_axis: StemAxis::default(),
        target_plant,
        background_plants,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count(organs: &[OrganPrimitive], kind: OrganKind) -> usize {
        organs.iter().filter(|o| o.kind == kind).count()
    }

    #[test]
    fn fixed_counts_follow_the_pattern() {
        let cfg = TraitConfig::default().with_fixed_counts(5, 4);
        let plant = generate_plant(3, &cfg).unwrap();
        assert_eq!(count(&plant, OrganKind::Tomato), 20);
        assert_eq!(count(&plant, OrganKind::Leaf), 15);
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = TraitConfig::default();
        assert_eq!(generate_plant(11, &cfg).unwrap(), generate_plant(11, &cfg).unwrap());
        let a = generate_scene(5, &cfg, 2).unwrap();
        let b = generate_scene(5, &cfg, 2).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn invalid_intervals_are_rejected() {
        let mut cfg = TraitConfig::default();
        cfg.tomato_radius = Interval::new(0.04, 0.02);
        assert!(matches!(generate_plant(0, &cfg), Err(Error::InvalidConfig(_))));
        let mut cfg = TraitConfig::default();
        cfg.leaf_length = Interval::new(0.0, 0.1);
        assert!(generate_scene(0, &cfg, 0).is_err());
        let mut cfg = TraitConfig::default();
        cfg.internode_count = Interval::new(3, 2);
        assert!(generate_plant(0, &cfg).is_err());
    }

    #[test]
    fn no_background_means_empty_list() {
        let scene = generate_scene(1, &TraitConfig::default(), 0).unwrap();
        assert!(scene.background_plants.is_empty());
        scene.validate().unwrap();
    }

    #[test]
    fn background_lies_beyond_standoff() {
        let scene = generate_scene(9, &TraitConfig::default(), 2).unwrap();
        assert_eq!(scene.background_plants.len(), 2);
        for organ in scene.background_plants.iter().flatten() {
            assert!(organ.aabb().min.y >= DEFAULT_BACKGROUND_STANDOFF - 1e-12);
            assert!(organ.object_id.is_none());
        }
        scene.validate().unwrap();
    }

    #[test]
    fn tomato_counts_vary_across_seeds() {
        let cfg = TraitConfig::default();
        let differs = (0..100u64).any(|s| {
            let a = generate_scene(2 * s + 1, &cfg, 0).unwrap().tomato_count();
            let b = generate_scene(2 * s + 2, &cfg, 0).unwrap().tomato_count();
            a != b
        });
        assert!(differs);
    }

    #[test]
    fn fruit_on_a_truss_never_overlap() {
        let cfg = TraitConfig::default();
        for seed in 0..20 {
            let plant = generate_plant(seed, &cfg).unwrap();
            let fruit: Vec<_> = plant
                .iter()
                .filter_map(|o| match o.dimensions {
                    Dimensions::Tomato { radius } => Some((o.pose.translation, radius)),
                    _ => None,
                })
                .collect();
            for (i, (a, ra)) in fruit.iter().enumerate() {
                for (b, rb) in &fruit[i + 1..] {
                    assert!((a - b).norm() >= ra + rb - 1e-12);
                }
            }
        }
    }

    #[test]
    fn scene_json_layout() {
        let scene = generate_scene(4, &TraitConfig::default().with_fixed_counts(1, 1), 1).unwrap();
        let v: serde_json::Value = serde_json::from_str(&scene.to_json()).unwrap();
        assert_eq!(v["seed"], 4);
        assert!(v["traits"].is_object());
        let organs = v["organs"].as_array().unwrap();
        let tomato = organs.iter().find(|o| o["kind"] == "tomato").unwrap();
        assert_eq!(tomato["object_id"], 0);
        assert_eq!(tomato["pose"]["rotation"].as_array().unwrap().len(), 4);
        assert!(tomato["dimensions"]["radius"].is_number());
        let leaf = organs.iter().find(|o| o["kind"] == "leaf").unwrap();
        assert!(leaf.get("object_id").is_none());
        assert_eq!(v["background"].as_array().unwrap().len(), 1);
        let back: PlantScene = serde_json::from_value(v).unwrap();
        assert_eq!(back, scene);
    }
}

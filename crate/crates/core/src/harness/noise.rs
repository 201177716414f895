use nalgebra::Unit;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid_config, Result};
use crate::geometry::{Pose6DoF, Vec3};
use crate::rng::{rng_for, stream};
use crate::vector::random_unit;

/// Camera pose noise: translation sigma in meters per axis, rotation sigma
/// in radians about a random axis.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PoseNoiseSpec {
    pub t_noise: f64,
    pub r_noise: f64,
}

impl PoseNoiseSpec {
    /// Rotation sigma equal to the translation sigma.
    pub fn isotropic(t_noise: f64) -> Self {
        Self {
            t_noise,
            r_noise: t_noise,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.t_noise) || !ok(self.r_noise) {
            return Err(invalid_config("pose noise sigmas must be non-negative"));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.t_noise == 0.0 && self.r_noise == 0.0
    }
}

pub fn perturb_pose(pose: &Pose6DoF, spec: &PoseNoiseSpec, seed: u64) -> Result<Pose6DoF> {
    spec.validate()?;
    if spec.is_zero() {
        return Ok(*pose);
    }
    let mut rng = rng_for(seed, &[stream::POSE_NOISE]);
    let t = Normal::new(0.0, spec.t_noise).map_err(|e| invalid_config(e.to_string()))?;
    let r = Normal::new(0.0, spec.r_noise).map_err(|e| invalid_config(e.to_string()))?;
    let shift = Vec3::new(t.sample(&mut rng), t.sample(&mut rng), t.sample(&mut rng));
    let axis = Unit::new_unchecked(Vec3::from_column_slice(&random_unit(&mut rng, 3)));
    let angle = r.sample(&mut rng);
    let mut out = pose.rotated_by(&axis, angle);
    out.translation += shift;
    out.rotation.renormalize();
    Ok(out)
}

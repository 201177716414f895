//! Camera-to-world transform and workspace normalization of structured
//! clouds.

use serde::{Deserialize, Serialize};

use crate::error::{invalid_config, Result};
use crate::geometry::{Pose6DoF, Vec3};
use crate::render::StructuredCloud;

/// Axis-aligned working volume, meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceLimits {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Default for WorkspaceLimits {
    fn default() -> Self {
        Self {
            min: [-0.6, -0.6, 0.0],
            max: [0.6, 0.6, 2.0],
        }
    }
}

impl WorkspaceLimits {
    pub fn validate(&self) -> Result<()> {
        for axis in 0..3 {
            let (lo, hi) = (self.min[axis], self.max[axis]);
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(invalid_config(format!(
                    "workspace axis {axis}: need min < max, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    pub fn extent(&self) -> Vec3 {
        Vec3::from(self.max) - Vec3::from(self.min)
    }

    /// Affine map into `[0, 1]^3`; `None` outside the volume.
    pub fn normalize_point(&self, p: &Vec3) -> Option<Vec3> {
        let mut out = Vec3::zeros();
        for axis in 0..3 {
            let (lo, hi) = (self.min[axis], self.max[axis]);
            if !(lo <= p[axis] && p[axis] <= hi) {
                return None;
            }
            out[axis] = ((p[axis] - lo) / (hi - lo)).clamp(0.0, 1.0);
        }
        Some(out)
    }
}

/// Values in `[0, 1]^3` on the image grid.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedCloudImage {
    pub width: usize,
    pub height: usize,
    pub values: Vec<[f64; 3]>,
    pub valid: Vec<bool>,
}

impl NormalizedCloudImage {
    pub fn get(&self, u: usize, v: usize) -> Option<[f64; 3]> {
        let i = v * self.width + u;
        self.valid[i].then(|| self.values[i])
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

/// Maps every valid point through `pose`; the validity mask is unchanged.
pub fn cloud_to_world(cloud: &StructuredCloud, pose: &Pose6DoF) -> StructuredCloud {
    let r = pose.rotation_matrix();
    let t = pose.translation;
    let points = cloud
        .points
        .iter()
        .zip(&cloud.valid)
        .map(|(p, &ok)| if ok { r * p + t } else { *p })
        .collect();
    StructuredCloud {
        width: cloud.width,
        height: cloud.height,
        points,
        valid: cloud.valid.clone(),
    }
}

/// Normalizes a world-frame cloud by the workspace limits. Points outside
/// the volume are dropped from the mask rather than clamped.
pub fn normalize_to_workspace(
    cloud: &StructuredCloud,
    limits: &WorkspaceLimits,
) -> Result<NormalizedCloudImage> {
    limits.validate()?;
    let mut values = vec![[f64::NAN; 3]; cloud.points.len()];
    let mut valid = vec![false; cloud.points.len()];
    for (i, (p, &ok)) in cloud.points.iter().zip(&cloud.valid).enumerate() {
        if !ok {
            continue;
        }
        if let Some(n) = limits.normalize_point(p) {
            values[i] = n.into();
            valid[i] = true;
        }
    }
    Ok(NormalizedCloudImage {
        width: cloud.width,
        height: cloud.height,
        values,
        valid,
    })
}

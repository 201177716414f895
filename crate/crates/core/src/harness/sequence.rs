use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_config, Error, Result};
use crate::geometry::Pose6DoF;
use crate::rng::{rng_for, stream};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceOrdering {
    Sorted,
    #[default]
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceSpec {
    pub ordering: SequenceOrdering,
    pub length: usize,
    pub seed: u64,
    pub viewpoint_pool_size: usize,
}

impl SequenceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(invalid_config("sequence length must be positive"));
        }
        if self.length > self.viewpoint_pool_size {
            return Err(Error::SequenceTooLong {
                length: self.length,
                pool: self.viewpoint_pool_size,
            });
        }
        Ok(())
    }
}

/// Indices into `viewpoints` forming one sequence.
///
/// Both orderings draw the same uniform sample without replacement.
/// `Random` keeps the draw order; `Sorted` starts from the lowest sampled
/// index and repeatedly moves to the nearest unvisited camera position.
pub fn build_sequence(viewpoints: &[Pose6DoF], spec: &SequenceSpec) -> Result<Vec<usize>> {
    spec.validate()?;
    if spec.viewpoint_pool_size != viewpoints.len() {
        return Err(Error::InvalidInput(format!(
            "pool has {} viewpoints, sequence expects {}",
            viewpoints.len(),
            spec.viewpoint_pool_size
        )));
    }
    let mut rng = rng_for(spec.seed, &[stream::SEQUENCE]);
    let sample = index::sample(&mut rng, viewpoints.len(), spec.length).into_vec();
    Ok(match spec.ordering {
        SequenceOrdering::Random => sample,
        SequenceOrdering::Sorted => nearest_neighbour_order(viewpoints, sample),
    })
}

fn nearest_neighbour_order(viewpoints: &[Pose6DoF], mut rest: Vec<usize>) -> Vec<usize> {
    rest.sort_unstable();
    let mut order = Vec::with_capacity(rest.len());
    let mut current = rest.remove(0);
    order.push(current);
    while !rest.is_empty() {
        let here = viewpoints[current].translation;
        // Ties go to the lower index since `rest` stays sorted.
        let (k, _) = rest
            .iter()
            .enumerate()
            .map(|(k, &i)| (k, (viewpoints[i].translation - here).norm_squared()))
            .fold((0, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best });
        current = rest.remove(k);
        order.push(current);
    }
    order
}

/// Sum of camera-center distances between consecutive frames.
pub fn path_length(viewpoints: &[Pose6DoF], order: &[usize]) -> f64 {
    order
        .windows(2)
        .map(|w| (viewpoints[w[1]].translation - viewpoints[w[0]].translation).norm())
        .sum()
}

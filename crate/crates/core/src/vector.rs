//! Dense feature-vector helpers.

use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Scales `v` to unit length in place.
pub fn normalize(v: &mut [f64]) -> Result<()> {
    let n = norm(v);
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::ZeroVector);
    }
    v.iter_mut().for_each(|x| *x /= n);
    Ok(())
}

/// A direction drawn uniformly on the unit sphere in `dim` dimensions.
pub fn random_unit(rng: &mut impl rand::Rng, dim: usize) -> Vec<f64> {
    use rand_distr::{Distribution, StandardNormal};
    loop {
        let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        if normalize(&mut v).is_ok() {
            return v;
        }
    }
}

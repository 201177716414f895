//! Uncertainty-weighted sum of the detection and re-identification losses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub l_det: f64,
    pub l_id: f64,
    pub w1: f64,
    pub w2: f64,
}

impl LossTerms {
    pub fn new(l_det: f64, l_id: f64, w1: f64, w2: f64) -> Result<Self> {
        if !(l_det >= 0.0 && l_id >= 0.0) || ![l_det, l_id, w1, w2].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput(
                "loss terms must be finite and non-negative".into(),
            ));
        }
        Ok(Self { l_det, l_id, w1, w2 })
    }
}

/// Sign convention of the task weights inside the exponentials.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossForm {
    /// `½(e^{w1}·L_det + e^{w2}·L_id + w1 + w2)`. Strictly increasing in
    /// each weight, so it has no finite minimizer over them.
    #[default]
    AsWritten,
    /// `½(e^{-w1}·L_det + e^{-w2}·L_id + w1 + w2)`, minimized at `w = ln L`.
    Uncertainty,
}

impl LossForm {
    fn sign(self) -> f64 {
        match self {
            LossForm::AsWritten => 1.0,
            LossForm::Uncertainty => -1.0,
        }
    }
}

pub fn total_loss(t: &LossTerms, form: LossForm) -> f64 {
    let s = form.sign();
    0.5 * ((s * t.w1).exp() * t.l_det + (s * t.w2).exp() * t.l_id + t.w1 + t.w2)
}

/// `(∂L/∂w1, ∂L/∂w2)`.
pub fn total_loss_gradient(t: &LossTerms, form: LossForm) -> (f64, f64) {
    let s = form.sign();
    (
        0.5 * (s * (s * t.w1).exp() * t.l_det + 1.0),
        0.5 * (s * (s * t.w2).exp() * t.l_id + 1.0),
    )
}

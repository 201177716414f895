//! Assignment and loss mathematics used to pair predictions with ground
//! truth: GIoU, the per-pair detection cost, minimum-cost assignment, and
//! the uncertainty-weighted multi-task loss.

mod hungarian;
mod loss;

use serde::{Deserialize, Serialize};

pub use crate::bbox::Box2D;
pub use hungarian::{assignment_cost, hungarian_min_cost, CostMatrix};
pub use loss::{total_loss, total_loss_gradient, LossForm, LossTerms};

use crate::error::{Error, Result};

/// Floor applied to the true-class probability before taking its log.
pub const CE_PROBABILITY_FLOOR: f64 = 1e-12;

/// Generalized IoU: IoU minus the empty fraction of the enclosing box.
///
/// Zero-area boxes contribute an IoU of 0. Two identical boxes score 1
/// even when degenerate; if the hull itself has no area the hull penalty
/// is taken as 0.
pub fn giou(a: &Box2D, b: &Box2D) -> f64 {
    if a == b {
        return 1.0;
    }
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    let iou = if union > 0.0 { inter / union } else { 0.0 };
    let hull = a.hull(b).area();
    let penalty = if hull > 0.0 { (hull - union) / hull } else { 0.0 };
    (iou - penalty).clamp(-1.0, 1.0)
}

/// Weights of the classification, box-L1 and GIoU terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionCostWeights {
    pub ce: f64,
    pub l1: f64,
    pub giou: f64,
}

impl Default for DetectionCostWeights {
    fn default() -> Self {
        Self {
            ce: 1.0,
            l1: 5.0,
            giou: 2.0,
        }
    }
}

/// Cost of pairing one prediction with one ground-truth object:
/// `ce·CE + l1·‖Δbox‖₁ + giou·(1 − GIoU)`.
pub fn pairwise_detection_cost(
    class_probs: &[f64],
    pred_box: &Box2D,
    gt_label: usize,
    gt_box: &Box2D,
    weights: &DetectionCostWeights,
) -> Result<f64> {
    let sum: f64 = class_probs.iter().sum();
    if (sum - 1.0).abs() > 1e-6 || class_probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidInput(format!(
            "class probabilities must form a distribution (sum {sum})"
        )));
    }
    let p_true = *class_probs
        .get(gt_label)
        .ok_or_else(|| Error::InvalidInput(format!("label {gt_label} out of range")))?;
    let ce = -p_true.max(CE_PROBABILITY_FLOOR).ln();
    Ok(weights.ce * ce + weights.l1 * pred_box.l1_distance(gt_box) + weights.giou * (1.0 - giou(pred_box, gt_box)))
}

/// Builds the prediction × ground-truth cost matrix used for training-time
/// matching.
pub fn detection_cost_matrix(
    predictions: &[(Vec<f64>, Box2D)],
    targets: &[(usize, Box2D)],
    weights: &DetectionCostWeights,
) -> Result<CostMatrix> {
    let mut data = Vec::with_capacity(predictions.len() * targets.len());
    for (probs, pbox) in predictions {
        for (label, tbox) in targets {
            data.push(pairwise_detection_cost(probs, pbox, *label, tbox, weights)?);
        }
    }
    CostMatrix::new(predictions.len(), targets.len(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bbox::iou;
    use proptest::prelude::*;

    fn b(x0: f64, y0: f64, x1: f64, y1: f64) -> Box2D {
        Box2D::new(x0, y0, x1, y1).unwrap()
    }

    #[test]
    fn giou_reference_values() {
        assert_eq!(giou(&b(0.0, 0.0, 1.0, 1.0), &b(0.0, 0.0, 1.0, 1.0)), 1.0);
        assert!((giou(&b(0.0, 0.0, 1.0, 1.0), &b(2.0, 0.0, 3.0, 1.0)) + 1.0 / 3.0).abs() < 1e-12);
        let v = giou(&b(0.0, 0.0, 2.0, 2.0), &b(1.0, 1.0, 3.0, 3.0));
        assert!((v - (1.0 / 7.0 - 2.0 / 9.0)).abs() < 1e-12);
        assert!((v + 5.0 / 63.0).abs() < 1e-12);
    }

    #[test]
    fn giou_degenerate_boxes() {
        let p = b(1.0, 1.0, 1.0, 1.0);
        assert_eq!(giou(&p, &p), 1.0);
        // Two distinct points spanning an area: nothing covered.
        assert_eq!(giou(&p, &b(2.0, 3.0, 2.0, 3.0)), -1.0);
        // Collinear segments: hull has no area either.
        assert_eq!(giou(&b(0.0, 0.0, 1.0, 0.0), &b(2.0, 0.0, 3.0, 0.0)), 0.0);
        // A line against a real box.
        let v = giou(&b(0.0, 0.0, 1.0, 0.0), &b(0.0, 0.0, 1.0, 1.0));
        assert_eq!(v, 0.0);
    }

    #[test]
    fn detection_cost_examples() {
        let w = DetectionCostWeights { ce: 1.0, l1: 1.0, giou: 1.0 };
        let unit = b(0.0, 0.0, 1.0, 1.0);
        assert_eq!(pairwise_detection_cost(&[1.0, 0.0], &unit, 0, &unit, &w).unwrap(), 0.0);
        let half = pairwise_detection_cost(&[0.5, 0.5], &unit, 0, &unit, &w).unwrap();
        assert!((half - std::f64::consts::LN_2).abs() < 1e-12);
        let tall = b(0.0, 0.0, 1.0, 2.0);
        let c = pairwise_detection_cost(&[1.0, 0.0], &unit, 0, &tall, &w).unwrap();
        assert!((c - 1.5).abs() < 1e-12);
    }

    #[test]
    fn detection_cost_floors_zero_probability() {
        let w = DetectionCostWeights { ce: 1.0, l1: 0.0, giou: 0.0 };
        let unit = b(0.0, 0.0, 1.0, 1.0);
        let c = pairwise_detection_cost(&[0.0, 1.0], &unit, 0, &unit, &w).unwrap();
        assert!((c + CE_PROBABILITY_FLOOR.ln()).abs() < 1e-9);
        assert!(pairwise_detection_cost(&[0.3, 0.3], &unit, 0, &unit, &w).is_err());
        assert!(pairwise_detection_cost(&[1.0], &unit, 3, &unit, &w).is_err());
    }

    #[test]
    fn cost_matrix_pairs_predictions_with_targets() {
        let preds = vec![
            (vec![0.9, 0.1], b(10.0, 10.0, 20.0, 20.0)),
            (vec![0.2, 0.8], b(0.0, 0.0, 5.0, 5.0)),
        ];
        let targets = vec![(0, b(0.0, 0.0, 5.0, 5.0)), (0, b(10.0, 10.0, 20.0, 21.0))];
        let m = detection_cost_matrix(&preds, &targets, &DetectionCostWeights::default()).unwrap();
        assert_eq!(hungarian_min_cost(&m), vec![(0, 1), (1, 0)]);
    }

    fn arb_box() -> impl Strategy<Value = Box2D> {
        (0.0..10.0f64, 0.0..10.0f64, 0.0..5.0f64, 0.0..5.0f64)
            .prop_map(|(x, y, w, h)| b(x, y, x + w, y + h))
    }

    proptest! {
        #[test]
        fn giou_symmetric_bounded_and_below_iou(a in arb_box(), c in arb_box()) {
            let g = giou(&a, &c);
            prop_assert!((g - giou(&c, &a)).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&g));
            if a != c {
                prop_assert!(g <= iou(&a, &c) + 1e-12);
            }
            if a.area() > 0.0 && c.area() > 0.0 {
                prop_assert!(g > -1.0);
            }
        }

        #[test]
        fn giou_equals_iou_when_hull_is_union(x in 0.0..5.0f64, y in 0.0..5.0f64, w in 0.1..3.0f64, h1 in 0.1..3.0f64, h2 in 0.1..3.0f64) {
            // Two boxes sharing their x-extent and bottom edge: the hull is the taller one.
            let a = b(x, y, x + w, y + h1);
            let c = b(x, y, x + w, y + h2);
            prop_assert!((giou(&a, &c) - iou(&a, &c)).abs() < 1e-12);
        }
    }
}

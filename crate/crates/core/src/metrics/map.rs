use serde::{Deserialize, Serialize};

use super::{passes, validate_thresholds, IOU_EPS};
use crate::bbox::{iou, Box2D};
use crate::error::{Error, Result};

/// Ground truth and scored predictions of one image, single class.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ImageDetections {
    pub gt: Vec<Box2D>,
    pub preds: Vec<(Box2D, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApResult {
    /// Fraction, mean over thresholds.
    pub map: f64,
    /// `(threshold, AP)`.
    pub per_threshold: Vec<(f64, f64)>,
}

impl ApResult {
    pub fn ap_at(&self, threshold: f64) -> Option<f64> {
        self.per_threshold
            .iter()
            .find(|(t, _)| (t - threshold).abs() < IOU_EPS)
            .map(|&(_, ap)| ap)
    }
}

/// Average precision with 101-point interpolation, averaged over
/// `iou_thresholds`. Predictions are ranked by score across all images
/// and matched greedily within their image to the unmatched GT box of
/// highest IoU.
pub fn mean_average_precision(images: &[ImageDetections], iou_thresholds: &[f64]) -> Result<ApResult> {
    validate_thresholds("iou_thresholds", iou_thresholds)?;
    let n_gt: usize = images.iter().map(|i| i.gt.len()).sum();
    if n_gt == 0 {
        return Err(Error::Undefined("average precision needs ground truth".into()));
    }
    let mut ranked: Vec<(usize, usize)> = images
        .iter()
        .enumerate()
        .flat_map(|(i, img)| (0..img.preds.len()).map(move |p| (i, p)))
        .collect();
    // Stable: ties keep image then prediction order.
    ranked.sort_by(|a, b| images[b.0].preds[b.1].1.total_cmp(&images[a.0].preds[a.1].1));

    let per_threshold = iou_thresholds
        .iter()
        .map(|&t| (t, average_precision(images, &ranked, n_gt, t)))
        .collect::<Vec<_>>();
    let map = per_threshold.iter().map(|p| p.1).sum::<f64>() / per_threshold.len() as f64;
    Ok(ApResult { map, per_threshold })
}

fn average_precision(images: &[ImageDetections], ranked: &[(usize, usize)], n_gt: usize, t: f64) -> f64 {
    let mut taken: Vec<Vec<bool>> = images.iter().map(|i| vec![false; i.gt.len()]).collect();
    let mut precision = Vec::with_capacity(ranked.len());
    let mut recall = Vec::with_capacity(ranked.len());
    let mut tp = 0usize;
    for (k, &(i, p)) in ranked.iter().enumerate() {
        let pred = &images[i].preds[p].0;
        let best = images[i]
            .gt
            .iter()
            .enumerate()
            .filter(|(g, _)| !taken[i][*g])
            .map(|(g, gt)| (g, iou(gt, pred)))
            .filter(|&(_, s)| passes(s, t))
            .fold(None, |best: Option<(usize, f64)>, c| match best {
                Some(b) if b.1 >= c.1 => Some(b),
                _ => Some(c),
            });
        if let Some((g, _)) = best {
            taken[i][g] = true;
            tp += 1;
        }
        precision.push(tp as f64 / (k + 1) as f64);
        recall.push(tp as f64 / n_gt as f64);
    }
    // Precision envelope: best precision at any recall at least this high.
    for k in (0..precision.len().saturating_sub(1)).rev() {
        precision[k] = precision[k].max(precision[k + 1]);
    }
    let mut sum = 0.0;
    let mut k = 0;
    for r in 0..=100 {
        let level = r as f64 / 100.0;
        while k < recall.len() && recall[k] < level - 1e-12 {
            k += 1;
        }
        if k < recall.len() {
            sum += precision[k];
        }
    }
    sum / 101.0
}

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{iou_matrix, passes, validate_thresholds, SequenceAnnotations};
use crate::error::Result;
use crate::matching::{hungarian_min_cost, CostMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HotaAlpha {
    pub alpha: f64,
    pub hota: f64,
    pub det_a: f64,
    pub ass_a: f64,
    pub loc_a: f64,
}

/// Percentages. `det_a` and `ass_a` are means over the grid, `loc_a` the
/// mean IoU pooled over the true positives of every threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HotaResult {
    pub hota: f64,
    pub det_a: f64,
    pub ass_a: f64,
    pub loc_a: f64,
    pub per_alpha: Vec<HotaAlpha>,
}

/// One-to-one matching of a frame maximizing the number of pairs with
/// IoU at least `alpha`, then their total IoU. Returns `(gt, pred)` index
/// pairs.
pub(crate) fn match_frame(ious: &[f64], n_gt: usize, n_pred: usize, alpha: f64) -> Vec<(usize, usize)> {
    if n_gt == 0 || n_pred == 0 {
        return Vec::new();
    }
    let big = n_gt.min(n_pred) as f64 + 1.0;
    let data = ious
        .iter()
        .map(|&s| if passes(s, alpha) { -(big + s) } else { 0.0 })
        .collect();
    let costs = CostMatrix::new(n_gt, n_pred, data).expect("IoU values are finite");
    hungarian_min_cost(&costs)
        .into_iter()
        .filter(|&(g, p)| passes(ious[g * n_pred + p], alpha))
        .collect()
}

/// HOTA with its detection, association and localization components.
///
/// A sequence with neither ground truth nor predictions scores 0 on every
/// component except LocA, which is 100 by convention (there is nothing to
/// mislocalize). LocA is also 100 whenever there are no true positives.
pub fn hota_family(seq: &SequenceAnnotations, alpha_grid: &[f64]) -> Result<HotaResult> {
    validate_thresholds("alpha_grid", alpha_grid)?;
    seq.validate()?;

    let mut gt_len: BTreeMap<u32, usize> = BTreeMap::new();
    let mut pred_len: BTreeMap<u32, usize> = BTreeMap::new();
    for f in &seq.frames {
        f.gt.iter().for_each(|g| *gt_len.entry(g.id).or_default() += 1);
        f.preds.iter().for_each(|p| *pred_len.entry(p.id).or_default() += 1);
    }
    let (n_gt, n_pred) = (seq.gt_count() as f64, seq.pred_count() as f64);
    let ious: Vec<Vec<f64>> = seq.frames.iter().map(iou_matrix).collect();

    let mut per_alpha = Vec::with_capacity(alpha_grid.len());
    let (mut loc_sum, mut loc_n) = (0.0, 0usize);
    for &alpha in alpha_grid {
        let mut tpa: BTreeMap<(u32, u32), usize> = BTreeMap::new();
        let (mut tp, mut iou_sum) = (0usize, 0.0);
        for (f, m) in seq.frames.iter().zip(&ious) {
            let np = f.preds.len();
            for (g, p) in match_frame(m, f.gt.len(), np, alpha) {
                *tpa.entry((f.gt[g].id, f.preds[p].id)).or_default() += 1;
                tp += 1;
                iou_sum += m[g * np + p];
            }
        }
        let tp_f = tp as f64;
        let det_a = if tp == 0 { 0.0 } else { tp_f / (n_gt + n_pred - tp_f) };
        let ass_a = if tp == 0 {
            0.0
        } else {
            tpa.iter()
                .map(|(&(g, p), &c)| {
                    let c = c as f64;
                    c * c / (gt_len[&g] as f64 + pred_len[&p] as f64 - c)
                })
                .sum::<f64>()
                / tp_f
        };
        loc_sum += iou_sum;
        loc_n += tp;
        per_alpha.push(HotaAlpha {
            alpha,
            hota: 100.0 * (det_a * ass_a).sqrt(),
            det_a: 100.0 * det_a,
            ass_a: 100.0 * ass_a,
            loc_a: if tp == 0 { 100.0 } else { 100.0 * iou_sum / tp_f },
        });
    }
    let mean = |f: fn(&HotaAlpha) -> f64| per_alpha.iter().map(f).sum::<f64>() / per_alpha.len() as f64;
    Ok(HotaResult {
        hota: mean(|a| a.hota),
        det_a: mean(|a| a.det_a),
        ass_a: mean(|a| a.ass_a),
        loc_a: if loc_n == 0 { 100.0 } else { 100.0 * loc_sum / loc_n as f64 },
        per_alpha,
    })
}

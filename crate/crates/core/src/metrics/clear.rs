use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{iou_matrix, passes, SequenceAnnotations};
use crate::error::{invalid_config, Error, Result};
use crate::matching::{hungarian_min_cost, CostMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClearMotResult {
    /// Percent.
    pub mota: f64,
    pub idsw: usize,
    pub tp: usize,
    pub fn_: usize,
    pub fp: usize,
}

/// MOTA and identity switches.
///
/// Frames are matched in order. Within a frame the matching maximizes,
/// lexicographically, the number of pairs kept from the previous frame,
/// then the number of pairs, then total IoU, over pairs with IoU at least
/// `iou_threshold`. An identity switch is a GT matched to a different
/// prediction id than at its previous match.
pub fn clearmot(seq: &SequenceAnnotations, iou_threshold: f64) -> Result<ClearMotResult> {
    if !(iou_threshold > 0.0 && iou_threshold < 1.0) {
        return Err(invalid_config("iou_threshold must lie in (0, 1)"));
    }
    seq.validate()?;
    let total_gt = seq.gt_count();
    if total_gt == 0 {
        return Err(Error::Undefined("MOTA needs at least one ground-truth box".into()));
    }

    let mut prev_frame: BTreeMap<u32, u32> = BTreeMap::new();
    let mut last_match: BTreeMap<u32, u32> = BTreeMap::new();
    let (mut tp, mut idsw) = (0usize, 0usize);
    for f in &seq.frames {
        let (ng, np) = (f.gt.len(), f.preds.len());
        let ious = iou_matrix(f);
        let mut current = BTreeMap::new();
        if ng > 0 && np > 0 {
            let k = ng.min(np) as f64 + 1.0;
            let mut data = Vec::with_capacity(ng * np);
            for (g, gt) in f.gt.iter().enumerate() {
                for (p, pred) in f.preds.iter().enumerate() {
                    let s = ious[g * np + p];
                    data.push(if passes(s, iou_threshold) {
                        let carry = prev_frame.get(&gt.id) == Some(&pred.id);
                        -(if carry { k * k } else { 0.0 } + k + s)
                    } else {
                        0.0
                    });
                }
            }
            let costs = CostMatrix::new(ng, np, data)?;
            for (g, p) in hungarian_min_cost(&costs) {
                if !passes(ious[g * np + p], iou_threshold) {
                    continue;
                }
                let (gid, pid) = (f.gt[g].id, f.preds[p].id);
                tp += 1;
                if last_match.get(&gid).is_some_and(|&old| old != pid) {
                    idsw += 1;
                }
                last_match.insert(gid, pid);
                current.insert(gid, pid);
            }
        }
        prev_frame = current;
    }
    let fn_ = total_gt - tp;
    let fp = seq.pred_count() - tp;
    Ok(ClearMotResult {
        mota: 100.0 * (1.0 - (fn_ + fp + idsw) as f64 / total_gt as f64),
        idsw,
        tp,
        fn_,
        fp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bbox::Box2D;
    use crate::metrics::{FrameAnnotations, GtBox, PredBox};

    fn b(x: f64) -> Box2D {
        Box2D::new(x, 0.0, x + 10.0, 10.0).unwrap()
    }

    fn frame(gt: &[(u32, f64)], preds: &[(u32, f64)]) -> FrameAnnotations {
        FrameAnnotations {
            gt: gt.iter().map(|&(id, x)| GtBox { id, bbox: b(x) }).collect(),
            preds: preds
                .iter()
                .map(|&(id, x)| PredBox { id, bbox: b(x), score: 1.0 })
                .collect(),
        }
    }

    #[test]
    fn perfect_and_swapped() {
        let perfect = SequenceAnnotations {
            frames: vec![frame(&[(0, 0.0), (1, 50.0)], &[(3, 0.0), (4, 50.0)]); 4],
        };
        let r = clearmot(&perfect, 0.5).unwrap();
        assert_eq!((r.mota, r.idsw), (100.0, 0));

        let swapped = SequenceAnnotations {
            frames: vec![
                frame(&[(0, 0.0), (1, 50.0)], &[(0, 0.0), (1, 50.0)]),
                frame(&[(0, 0.0), (1, 50.0)], &[(1, 0.0), (0, 50.0)]),
            ],
        };
        assert_eq!(clearmot(&swapped, 0.5).unwrap().idsw, 2);
    }

    #[test]
    fn one_miss_one_false_positive_one_switch() {
        // 10 GT instances over 5 frames.
        let frames = vec![
            frame(&[(0, 0.0), (1, 50.0)], &[(0, 0.0), (1, 50.0)]),
            frame(&[(0, 0.0), (1, 50.0)], &[(0, 0.0), (1, 50.0)]),
            frame(&[(0, 0.0), (1, 50.0)], &[(0, 0.0)]),
            frame(&[(0, 0.0), (1, 50.0)], &[(0, 0.0), (2, 50.0), (9, 120.0)]),
            frame(&[(0, 0.0), (1, 50.0)], &[(0, 0.0), (2, 50.0)]),
        ];
        let r = clearmot(&SequenceAnnotations { frames }, 0.5).unwrap();
        assert_eq!((r.fn_, r.fp, r.idsw), (1, 1, 1));
        assert_eq!(r.mota, 70.0);
    }

    #[test]
    fn carry_over_beats_better_overlap() {
        // Frame 2: GT 0 overlaps pred 5 (its previous match) less than pred 6.
        let seq = SequenceAnnotations {
            frames: vec![
                frame(&[(0, 0.0)], &[(5, 0.0)]),
                frame(&[(0, 0.0)], &[(5, 3.0), (6, 1.0)]),
            ],
        };
        let r = clearmot(&seq, 0.5).unwrap();
        assert_eq!((r.idsw, r.fp), (0, 1));
    }

    #[test]
    fn empty_ground_truth_is_undefined() {
        let seq = SequenceAnnotations {
            frames: vec![frame(&[], &[(1, 0.0)])],
        };
        assert!(matches!(clearmot(&seq, 0.5), Err(Error::Undefined(_))));
    }
}

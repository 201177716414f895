//! Tracking and detection metrics: the HOTA family, CLEAR-MOT, and
//! COCO-style mean average precision. All evaluation is in image space.

mod clear;
mod hota;
mod map;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use crate::bbox::iou as iou2d;
use crate::bbox::Box2D;
use crate::error::{invalid_config, Error, Result};
pub use clear::{clearmot, ClearMotResult};
pub use hota::{hota_family, HotaAlpha, HotaResult};
pub use map::{mean_average_precision, ApResult, ImageDetections};

/// Slack on IoU threshold comparisons, absorbing rounding in grid values
/// such as `0.05 * 6`.
pub const IOU_EPS: f64 = 1e-9;

/// Whether `iou` clears `threshold`.
pub fn passes(iou: f64, threshold: f64) -> bool {
    iou >= threshold - IOU_EPS
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GtBox {
    pub id: u32,
    pub bbox: Box2D,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredBox {
    pub id: u32,
    pub bbox: Box2D,
    pub score: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameAnnotations {
    pub gt: Vec<GtBox>,
    pub preds: Vec<PredBox>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SequenceAnnotations {
    pub frames: Vec<FrameAnnotations>,
}

impl SequenceAnnotations {
    /// Checks that ids are unique within each frame and boxes are valid.
    pub fn validate(&self) -> Result<()> {
        for (f, frame) in self.frames.iter().enumerate() {
            let mut gt: Vec<u32> = frame.gt.iter().map(|g| g.id).collect();
            let mut pr: Vec<u32> = frame.preds.iter().map(|p| p.id).collect();
            gt.sort_unstable();
            pr.sort_unstable();
            if gt.windows(2).any(|w| w[0] == w[1]) || pr.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidInput(format!("frame {f}: duplicate ids")));
            }
            let boxes = frame.gt.iter().map(|g| &g.bbox).chain(frame.preds.iter().map(|p| &p.bbox));
            if boxes.into_iter().any(|b| !b.is_valid()) {
                return Err(Error::InvalidInput(format!("frame {f}: malformed box")));
            }
        }
        Ok(())
    }

    pub fn gt_count(&self) -> usize {
        self.frames.iter().map(|f| f.gt.len()).sum()
    }

    pub fn pred_count(&self) -> usize {
        self.frames.iter().map(|f| f.preds.len()).sum()
    }

    /// Per-frame images for the detection metric.
    pub fn as_images(&self) -> Vec<ImageDetections> {
        self.frames
            .iter()
            .map(|f| ImageDetections {
                gt: f.gt.iter().map(|g| g.bbox).collect(),
                preds: f.preds.iter().map(|p| (p.bbox, p.score)).collect(),
            })
            .collect()
    }
}

/// `[0.05, 0.10, …, 0.95]`.
pub fn default_alpha_grid() -> Vec<f64> {
    (1..=19).map(|k| k as f64 / 20.0).collect()
}

/// `[0.50, 0.55, …, 0.95]`.
pub fn default_map_thresholds() -> Vec<f64> {
    (10..=19).map(|k| k as f64 / 20.0).collect()
}

pub(crate) fn validate_thresholds(name: &str, ts: &[f64]) -> Result<()> {
    if ts.is_empty() {
        return Err(invalid_config(format!("{name} must not be empty")));
    }
    if ts.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
        return Err(invalid_config(format!("{name} values must lie in (0, 1)")));
    }
    Ok(())
}

/// IoU of every GT (rows) against every prediction (columns).
pub(crate) fn iou_matrix(frame: &FrameAnnotations) -> Vec<f64> {
    let mut m = Vec::with_capacity(frame.gt.len() * frame.preds.len());
    for g in &frame.gt {
        for p in &frame.preds {
            m.push(iou2d(&g.bbox, &p.bbox));
        }
    }
    m
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsConfig {
    pub alpha_grid: Vec<f64>,
    pub clear_iou_threshold: f64,
    pub map_iou_thresholds: Vec<f64>,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            alpha_grid: default_alpha_grid(),
            clear_iou_threshold: 0.5,
            map_iou_thresholds: default_map_thresholds(),
        }
    }
}

/// Percentages except `map` and `ap50`, which are fractions. Metrics that
/// are undefined for the sequence (no ground truth) are `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub hota: f64,
    pub det_a: f64,
    pub ass_a: f64,
    pub loc_a: f64,
    pub mota: Option<f64>,
    pub idsw: Option<usize>,
    pub map: Option<f64>,
    pub ap50: Option<f64>,
    pub alpha_grid: Vec<f64>,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str = "hota,det_a,ass_a,loc_a,mota,idsw,map,ap50";

    pub fn csv_row(&self) -> String {
        fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
            v.map_or_else(String::new, |v| v.to_string())
        }
        let mut s = String::new();
        let _ = write!(
            s,
            "{},{},{},{},{},{},{},{}",
            self.hota,
            self.det_a,
            self.ass_a,
            self.loc_a,
            opt(self.mota),
            opt(self.idsw),
            opt(self.map),
            opt(self.ap50)
        );
        s
    }

    /// Value of a metric by its CSV column name.
    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "hota" => Some(self.hota),
            "det_a" => Some(self.det_a),
            "ass_a" => Some(self.ass_a),
            "loc_a" => Some(self.loc_a),
            "mota" => self.mota,
            "idsw" => self.idsw.map(|v| v as f64),
            "map" => self.map,
            "ap50" => self.ap50,
            _ => None,
        }
    }
}

/// Every metric for one sequence.
pub fn evaluate(seq: &SequenceAnnotations, cfg: &MetricsConfig) -> Result<MetricsReport> {
    let h = hota_family(seq, &cfg.alpha_grid)?;
    let has_gt = seq.gt_count() > 0;
    let clear = if has_gt {
        Some(clearmot(seq, cfg.clear_iou_threshold)?)
    } else {
        None
    };
    let ap = if has_gt {
        let mut thresholds = cfg.map_iou_thresholds.clone();
        if !thresholds.iter().any(|t| (t - 0.5).abs() < IOU_EPS) {
            thresholds.push(0.5);
        }
        let r = mean_average_precision(&seq.as_images(), &thresholds)?;
        let ap50 = r.ap_at(0.5);
        let map = cfg
            .map_iou_thresholds
            .iter()
            .map(|t| r.ap_at(*t).unwrap_or(0.0))
            .sum::<f64>()
            / cfg.map_iou_thresholds.len() as f64;
        Some((map, ap50))
    } else {
        None
    };
    Ok(MetricsReport {
        hota: h.hota,
        det_a: h.det_a,
        ass_a: h.ass_a,
        loc_a: h.loc_a,
        mota: clear.map(|c| c.mota),
        idsw: clear.map(|c| c.idsw),
        map: ap.map(|a| a.0),
        ap50: ap.and_then(|a| a.1),
        alpha_grid: cfg.alpha_grid.clone(),
    })
}

use std::collections::BTreeMap;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{run_trial, welch_t_test, TrialConfig};
use crate::error::{invalid_config, Error, Result};
use crate::metrics::MetricsReport;
use crate::rng::derive_seed;

/// Metric columns carried through studies and reports.
pub const METRIC_NAMES: [&str; 8] = ["hota", "det_a", "ass_a", "loc_a", "mota", "idsw", "map", "ap50"];

/// Two-sided significance level.
pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

/// One study arm: the base trial configuration with a JSON patch applied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arm {
    pub label: String,
    #[serde(default)]
    pub overrides: Value,
    /// Position on a plot's horizontal axis, e.g. a noise level.
    #[serde(default)]
    pub x: Option<f64>,
    /// Plot series the arm belongs to.
    #[serde(default)]
    pub series: Option<String>,
}

impl Arm {
    pub fn new(label: impl Into<String>, overrides: Value) -> Self {
        Self {
            label: label.into(),
            overrides,
            x: None,
            series: None,
        }
    }

    pub fn at(mut self, series: impl Into<String>, x: f64) -> Self {
        self.series = Some(series.into());
        self.x = Some(x);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Study {
    pub seed: u64,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    /// Label of the arm deltas are taken against.
    pub baseline: String,
    #[serde(default)]
    pub base: TrialConfig,
    pub arms: Vec<Arm>,
}

fn default_repetitions() -> usize {
    5
}

impl Study {
    /// Resolved configuration of every arm.
    pub fn arm_configs(&self) -> Result<Vec<TrialConfig>> {
        let base = serde_json::to_value(&self.base).map_err(|e| invalid_config(e.to_string()))?;
        self.arms
            .iter()
            .map(|arm| {
                let mut v = base.clone();
                merge(&mut v, &arm.overrides);
                serde_json::from_value(v)
                    .map_err(|e| invalid_config(format!("arm {}: {e}", arm.label)))
            })
            .collect()
    }

    /// Seed of repetition `rep`, shared by every arm so arms are compared
    /// on the same scenes and viewpoint samples.
    pub fn repetition_seed(&self, rep: usize) -> u64 {
        derive_seed(self.seed, &[rep as u64])
    }

    pub fn validate(&self) -> Result<()> {
        if self.arms.is_empty() {
            return Err(invalid_config("study needs at least one arm"));
        }
        if self.repetitions == 0 {
            return Err(invalid_config("repetitions must be positive"));
        }
        let mut labels: Vec<&str> = self.arms.iter().map(|a| a.label.as_str()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid_config("arm labels must be unique"));
        }
        if !labels.contains(&self.baseline.as_str()) {
            return Err(invalid_config(format!("baseline arm {} not found", self.baseline)));
        }
        Ok(())
    }
}

/// Recursively overlays `patch` onto `base`; non-object values replace.
pub fn merge(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k.clone()).or_insert(Value::Null), v);
            }
        }
        (b, p) if !p.is_null() => *b = p.clone(),
        _ => {}
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricComparison {
    pub mean: f64,
    pub std: f64,
    /// Arm mean minus baseline mean.
    pub delta: f64,
    /// Welch p-value against the baseline; absent when undefined.
    pub p_value: Option<f64>,
    pub significant: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSet {
    pub label: String,
    pub x: Option<f64>,
    pub series: Option<String>,
    pub reports: Vec<MetricsReport>,
    pub tracklet_counts: Vec<usize>,
    pub metrics: BTreeMap<String, MetricComparison>,
}

impl TrialSet {
    pub fn values(&self, metric: &str) -> Vec<f64> {
        self.reports.iter().filter_map(|r| r.get(metric)).collect()
    }

    pub fn mean(&self, metric: &str) -> Option<f64> {
        self.metrics.get(metric).map(|m| m.mean)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub baseline: String,
    pub arms: Vec<TrialSet>,
}

impl StudyResult {
    pub fn arm(&self, label: &str) -> Option<&TrialSet> {
        self.arms.iter().find(|a| a.label == label)
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = if xs.len() > 1 {
        xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, v.sqrt())
}

/// Runs every arm `repetitions` times. Repetition `r` of every arm uses
/// the same seed, so deltas are paired by scene and viewpoint sample.
pub fn run_ablation(study: &Study) -> Result<StudyResult> {
    study.validate()?;
    let configs = study.arm_configs()?;
    for c in &configs {
        c.validate()?;
    }
    let jobs: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|a| (0..study.repetitions).map(move |r| (a, r)))
        .collect();
    let outcomes = jobs
        .par_iter()
        .map(|&(a, r)| {
            let out = run_trial(&configs[a], study.repetition_seed(r))?;
            info!(
                "{} rep {r}: HOTA {:.2} AssA {:.2}",
                study.arms[a].label, out.report.hota, out.report.ass_a
            );
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut sets: Vec<TrialSet> = study
        .arms
        .iter()
        .enumerate()
        .map(|(a, arm)| {
            let runs = &outcomes[a * study.repetitions..(a + 1) * study.repetitions];
            TrialSet {
                label: arm.label.clone(),
                x: arm.x,
                series: arm.series.clone(),
                reports: runs.iter().map(|o| o.report.clone()).collect(),
                tracklet_counts: runs.iter().map(|o| o.tracklet_count).collect(),
                metrics: BTreeMap::new(),
            }
        })
        .collect();

    let base_idx = sets
        .iter()
        .position(|s| s.label == study.baseline)
        .ok_or_else(|| Error::InvalidConfig("baseline arm missing".into()))?;
    let baseline: BTreeMap<&str, Vec<f64>> =
        METRIC_NAMES.iter().map(|&m| (m, sets[base_idx].values(m))).collect();
    for set in &mut sets {
        for &m in &METRIC_NAMES {
            let vals = set.values(m);
            if vals.is_empty() {
                continue;
            }
            let (mean, std) = mean_std(&vals);
            let base = &baseline[m];
            let delta = if base.is_empty() { 0.0 } else { mean - mean_std(base).0 };
            let p_value = welch_t_test(&vals, base).ok().map(|(_, p)| p);
            set.metrics.insert(
                m.to_string(),
                MetricComparison {
                    mean,
                    std,
                    delta,
                    p_value,
                    significant: p_value.is_some_and(|p| p < SIGNIFICANCE_LEVEL),
                },
            );
        }
    }
    Ok(StudyResult {
        baseline: study.baseline.clone(),
        arms: sets,
    })
}

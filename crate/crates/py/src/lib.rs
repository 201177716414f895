//! Python bindings. Structured inputs and outputs that mirror the Rust
//! config and report types travel as JSON strings; small numeric helpers
//! take plain lists and tuples.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use plantrack::detector::Detection;
use plantrack::matching::{self, LossForm, LossTerms};
use plantrack::metrics::{self, MetricsConfig, SequenceAnnotations};
use plantrack::scene::{self, TraitConfig};
use plantrack::tracker::{self, KalmanState};
use plantrack::{harness, AssociationConfig, Box2D, CostMatrix, KalmanConfig, Mat3, TrialConfig, Vec3};

type BoxTuple = [f64; 4];

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_box(b: BoxTuple) -> PyResult<Box2D> {
    Box2D::new(b[0], b[1], b[2], b[3]).map_err(err)
}

fn from_json<T: serde::de::DeserializeOwned + Default>(json: Option<&str>) -> PyResult<T> {
    json.map_or_else(|| Ok(T::default()), |s| serde_json::from_str(s).map_err(err))
}

fn to_json<T: serde::Serialize>(v: &T) -> PyResult<String> {
    serde_json::to_string(v).map_err(err)
}

/// IoU of two `(x_min, y_min, x_max, y_max)` boxes.
#[pyfunction]
fn iou(a: BoxTuple, b: BoxTuple) -> PyResult<f64> {
    Ok(plantrack::iou(&to_box(a)?, &to_box(b)?))
}

/// Generalized IoU, in `[-1, 1]`.
#[pyfunction]
fn giou(a: BoxTuple, b: BoxTuple) -> PyResult<f64> {
    Ok(matching::giou(&to_box(a)?, &to_box(b)?))
}

/// Minimum-cost assignment of a rectangular cost matrix as `(row, col)` pairs.
#[pyfunction]
fn hungarian(cost: Vec<Vec<f64>>) -> PyResult<Vec<(usize, usize)>> {
    let m = CostMatrix::from_rows(&cost).map_err(err)?;
    Ok(matching::hungarian_min_cost(&m))
}

/// Uncertainty-weighted sum of the detection and identity losses.
#[pyfunction]
#[pyo3(signature = (l_det, l_id, w1, w2, form = "as_written"))]
fn total_loss(l_det: f64, l_id: f64, w1: f64, w2: f64, form: &str) -> PyResult<f64> {
    let form: LossForm = serde_json::from_value(serde_json::Value::String(form.into())).map_err(err)?;
    Ok(matching::total_loss(&LossTerms::new(l_det, l_id, w1, w2).map_err(err)?, form))
}

#[pyfunction]
fn cosine_distance(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    tracker::cosine_distance(&a, &b).map_err(err)
}

/// One predict-and-update step; returns the new `(mean, cov)`.
#[pyfunction]
#[pyo3(signature = (mean, cov, z, process_noise_q = 1e-6, measurement_noise_r = 1e-4))]
fn kalman_update(
    mean: [f64; 3],
    cov: [[f64; 3]; 3],
    z: [f64; 3],
    process_noise_q: f64,
    measurement_noise_r: f64,
) -> PyResult<([f64; 3], [[f64; 3]; 3])> {
    let cfg = KalmanConfig {
        process_noise_q,
        measurement_noise_r,
        ..KalmanConfig::default()
    };
    cfg.validate().map_err(err)?;
    let cov = nalgebra_rows(cov);
    let s = tracker::kalman_update(&KalmanState::new(Vec3::from(mean), cov), &Vec3::from(z), &cfg);
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = s.cov[(i, j)];
        }
    }
    Ok((s.mean.into(), out))
}

fn nalgebra_rows(rows: [[f64; 3]; 3]) -> Mat3 {
    Mat3::from_fn(|i, j| rows[i][j])
}

/// Two-sided Welch t-test; returns `(t, p)`.
#[pyfunction]
fn welch_t_test(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, f64)> {
    harness::welch_t_test(&a, &b).map_err(err)
}

/// Scene JSON for `seed`.
#[pyfunction]
#[pyo3(signature = (seed, traits_json = None, background_plants = 0))]
fn generate_scene(seed: u64, traits_json: Option<&str>, background_plants: usize) -> PyResult<String> {
    let traits: TraitConfig = from_json(traits_json)?;
    to_json(&scene::generate_scene(seed, &traits, background_plants).map_err(err)?)
}

/// Default trial config as JSON, a starting point for edits.
#[pyfunction]
fn default_trial_config() -> PyResult<String> {
    to_json(&TrialConfig::default())
}

/// Runs one trial; returns the outcome (report, counts, track records) as JSON.
#[pyfunction]
#[pyo3(signature = (seed, config_json = None))]
fn run_trial(py: Python<'_>, seed: u64, config_json: Option<&str>) -> PyResult<String> {
    let cfg: TrialConfig = from_json(config_json)?;
    let out = py.detach(|| harness::run_trial(&cfg, seed)).map_err(err)?;
    to_json(&out)
}

/// Scores a sequence of ground-truth and predicted boxes given as JSON.
#[pyfunction]
#[pyo3(signature = (sequence_json, metrics_json = None))]
fn evaluate(sequence_json: &str, metrics_json: Option<&str>) -> PyResult<String> {
    let seq: SequenceAnnotations = serde_json::from_str(sequence_json).map_err(err)?;
    let cfg: MetricsConfig = from_json(metrics_json)?;
    to_json(&metrics::evaluate(&seq, &cfg).map_err(err)?)
}

/// Input detection: `(bbox, score, feature, position or None)`.
type DetectionTuple = (BoxTuple, f64, Vec<f64>, Option<[f64; 3]>);

/// Online tracker over per-frame detections.
#[pyclass(name = "Tracker")]
struct PyTracker {
    inner: plantrack::Tracker,
}

#[pymethods]
impl PyTracker {
    #[new]
    #[pyo3(signature = (association_json = None, kalman_json = None))]
    fn new(association_json: Option<&str>, kalman_json: Option<&str>) -> PyResult<Self> {
        let assoc: AssociationConfig = from_json(association_json)?;
        let kalman: KalmanConfig = from_json(kalman_json)?;
        Ok(Self {
            inner: plantrack::Tracker::new(assoc, kalman).map_err(err)?,
        })
    }

    /// Consumes one frame; returns `(tracklet_id, bbox, score)` per kept detection.
    fn step(&mut self, detections: Vec<DetectionTuple>) -> PyResult<Vec<(u32, BoxTuple, f64)>> {
        let dets = detections
            .into_iter()
            .map(|(b, class_score, feature, centroid3d)| {
                Ok(Detection {
                    bbox: to_box(b)?,
                    class_score,
                    feature,
                    centroid3d,
                })
            })
            .collect::<PyResult<Vec<_>>>()?;
        let out = self.inner.step(dets).map_err(err)?;
        Ok(out
            .into_iter()
            .map(|(id, d)| (id, [d.bbox.x_min, d.bbox.y_min, d.bbox.x_max, d.bbox.y_max], d.class_score))
            .collect())
    }

    #[getter]
    fn tracklet_count(&self) -> usize {
        self.inner.tracklets().len()
    }

    /// `(id, filtered position or None)` for every tracklet.
    fn positions(&self) -> Vec<(u32, Option<[f64; 3]>)> {
        self.inner
            .tracklets()
            .iter()
            .map(|t| (t.id, t.kalman.map(|k| k.mean.into())))
            .collect()
    }
}

#[pymodule]
pub fn plantrack_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(iou, m)?)?;
    m.add_function(wrap_pyfunction!(giou, m)?)?;
    m.add_function(wrap_pyfunction!(hungarian, m)?)?;
    m.add_function(wrap_pyfunction!(total_loss, m)?)?;
    m.add_function(wrap_pyfunction!(cosine_distance, m)?)?;
    m.add_function(wrap_pyfunction!(kalman_update, m)?)?;
    m.add_function(wrap_pyfunction!(welch_t_test, m)?)?;
    m.add_function(wrap_pyfunction!(generate_scene, m)?)?;
    m.add_function(wrap_pyfunction!(default_trial_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_trial, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_class::<PyTracker>()?;
    Ok(())
}

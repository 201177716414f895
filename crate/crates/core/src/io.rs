//! On-disk formats.
//!
//! A rendered frame `k` in a directory is three files: `frame_k.png` (color),
//! `frame_k.cloud` (camera-frame points as little-endian `f32`, row-major
//! `H×W×3`, NaN where invalid) and `frame_k.json` (viewpoint index, pose,
//! intrinsics, ground truth). Detections and tracks are JSON.

use std::fs;
use std::path::{Path, PathBuf};

use image::RgbImage;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::detector::Detection;
use crate::error::{Error, Result};
use crate::geometry::{Pose6DoF, Vec3};
use crate::render::{CameraIntrinsics, GroundTruthObject, StructuredCloud, ViewpointFrame};
use crate::tracker::TrackRecord;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let body = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, body).map_err(io_err(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let body = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&body).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Everything about a frame except its pixels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameMeta {
    /// Index of the viewpoint in its pool.
    pub viewpoint: usize,
    pub camera_pose: Pose6DoF,
    pub intrinsics: CameraIntrinsics,
    pub gt: Vec<GroundTruthObject>,
}

pub fn frame_path(dir: &Path, k: usize, ext: &str) -> PathBuf {
    dir.join(format!("frame_{k:04}.{ext}"))
}

pub fn encode_cloud(cloud: &StructuredCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(cloud.points.len() * 12);
    for (p, &ok) in cloud.points.iter().zip(&cloud.valid) {
        for c in 0..3 {
            let v = if ok { p[c] as f32 } else { f32::NAN };
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_cloud(bytes: &[u8], width: usize, height: usize) -> Result<StructuredCloud> {
    if bytes.len() != width * height * 12 {
        return Err(Error::InvalidInput(format!(
            "cloud has {} bytes, expected {} for {width}x{height}",
            bytes.len(),
            width * height * 12
        )));
    }
    let mut cloud = StructuredCloud::empty(width, height);
    for (i, chunk) in bytes.chunks_exact(12).enumerate() {
        let f = |k: usize| f32::from_le_bytes(chunk[4 * k..4 * k + 4].try_into().expect("4 bytes"));
        let p = [f(0), f(1), f(2)];
        if p.iter().all(|v| v.is_finite()) {
            cloud.set(i % width, i / width, Vec3::new(p[0].into(), p[1].into(), p[2].into()));
        }
    }
    Ok(cloud)
}

pub fn save_frame(dir: &Path, k: usize, viewpoint: usize, frame: &ViewpointFrame) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let png = frame_path(dir, k, "png");
    frame.color.save(&png).map_err(|source| Error::Image { path: png, source })?;
    let cloud = frame_path(dir, k, "cloud");
    fs::write(&cloud, encode_cloud(&frame.cloud)).map_err(io_err(&cloud))?;
    write_json(
        &frame_path(dir, k, "json"),
        &FrameMeta {
            viewpoint,
            camera_pose: frame.camera_pose,
            intrinsics: frame.intrinsics,
            gt: frame.gt.clone(),
        },
    )
}

pub fn load_frame_meta(dir: &Path, k: usize) -> Result<FrameMeta> {
    read_json(&frame_path(dir, k, "json"))
}

/// Loads frame `k`. Points are stored as `f32`, so the cloud matches the
/// rendered one to single precision.
pub fn load_frame(dir: &Path, k: usize) -> Result<(FrameMeta, ViewpointFrame)> {
    let meta = load_frame_meta(dir, k)?;
    let (w, h) = (meta.intrinsics.width, meta.intrinsics.height);
    let cloud_path = frame_path(dir, k, "cloud");
    let bytes = fs::read(&cloud_path).map_err(io_err(&cloud_path))?;
    let cloud = decode_cloud(&bytes, w, h)?;
    let png = frame_path(dir, k, "png");
    let color: RgbImage = image::open(&png)
        .map_err(|source| Error::Image { path: png, source })?
        .to_rgb8();
    let frame = ViewpointFrame {
        color,
        cloud,
        camera_pose: meta.camera_pose,
        intrinsics: meta.intrinsics,
        gt: meta.gt.clone(),
    };
    Ok((meta, frame))
}

/// Number of consecutive frames `0..n` present in `dir`.
pub fn count_frames(dir: &Path) -> usize {
    (0..).take_while(|&k| frame_path(dir, k, "json").exists()).count()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectionFile {
    /// Detections of frame `k` at index `k`.
    pub frames: Vec<Vec<Detection>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrackFile {
    /// Viewpoint index of each frame.
    pub sequence: Vec<usize>,
    pub records: Vec<TrackRecord>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cloud_round_trip() {
        let mut c = StructuredCloud::empty(3, 2);
        c.set(1, 0, Vec3::new(0.5, -0.25, 1.0));
        c.set(2, 1, Vec3::new(1.0, 2.0, 3.0));
        let bytes = encode_cloud(&c);
        assert_eq!(bytes.len(), 3 * 2 * 12);
        let back = decode_cloud(&bytes, 3, 2).unwrap();
        assert_eq!(back.valid, c.valid);
        assert_eq!(back.get(1, 0), c.get(1, 0));
        assert!(decode_cloud(&bytes, 2, 2).is_err());
    }
}

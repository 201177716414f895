use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned 2D box. Units are pixels throughout the crate, but nothing
/// here depends on that.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Box2D {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Box2D {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let b = Self {
            x_min,
            y_min,
            x_max,
            y_max,
        };
        if !b.is_valid() {
            return Err(Error::InvalidInput(format!("malformed box {b:?}")));
        }
        Ok(b)
    }

    pub fn is_valid(&self) -> bool {
        [self.x_min, self.y_min, self.x_max, self.y_max]
            .iter()
            .all(|v| v.is_finite())
            && self.x_min <= self.x_max
            && self.y_min <= self.y_max
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }

    pub fn intersection_area(&self, other: &Self) -> f64 {
        let w = (self.x_max.min(other.x_max) - self.x_min.max(other.x_min)).max(0.0);
        let h = (self.y_max.min(other.y_max) - self.y_min.max(other.y_min)).max(0.0);
        w * h
    }

    /// Smallest box enclosing both.
    pub fn hull(&self, other: &Self) -> Self {
        Self {
            x_min: self.x_min.min(other.x_min),
            y_min: self.y_min.min(other.y_min),
            x_max: self.x_max.max(other.x_max),
            y_max: self.y_max.max(other.y_max),
        }
    }

    /// Sum of absolute coordinate differences.
    pub fn l1_distance(&self, other: &Self) -> f64 {
        (self.x_min - other.x_min).abs()
            + (self.y_min - other.y_min).abs()
            + (self.x_max - other.x_max).abs()
            + (self.y_max - other.y_max).abs()
    }

    pub fn clipped(&self, width: f64, height: f64) -> Self {
        let cx = |v: f64| v.clamp(0.0, width);
        let cy = |v: f64| v.clamp(0.0, height);
        Self {
            x_min: cx(self.x_min),
            y_min: cy(self.y_min),
            x_max: cx(self.x_max),
            y_max: cy(self.y_max),
        }
    }

    /// Whether the pixel `(u, v)` has its center inside the box.
    pub fn contains_pixel(&self, u: usize, v: usize) -> bool {
        let (x, y) = (u as f64 + 0.5, v as f64 + 0.5);
        self.x_min <= x && x <= self.x_max && self.y_min <= y && y <= self.y_max
    }
}

/// Intersection over union; 0 when the union is empty.
pub fn iou(a: &Box2D, b: &Box2D) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

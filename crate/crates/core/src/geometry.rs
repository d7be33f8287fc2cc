//! Rectangle arithmetic and layout-region box optimization.
//!
//! Boxes use page coordinates with the origin at the top-left corner and are
//! stored as `[x, y, width, height]`, the same order the detection files use.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("box {index}: score {score} is not a finite value in [0, 1]")]
    InvalidScore { index: usize, score: f64 },
    #[error("box {index}: dimensions must be finite and non-negative")]
    InvalidDimensions { index: usize },
    #[error("invalid optimization config: {0}")]
    InvalidConfig(String),
}

/// Axis-aligned rectangle in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x, self.y, self.w, self.h]
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    /// True when all four components are finite and the size is non-negative.
    pub fn is_well_formed(&self) -> bool {
        self.x.is_finite()
            && self.y.is_finite()
            && self.w.is_finite()
            && self.h.is_finite()
            && self.w >= 0.0
            && self.h >= 0.0
    }

    /// Overlapping rectangle, or `None` when the boxes do not share any area.
    pub fn intersection(&self, other: &BoundingBox) -> Option<BoundingBox> {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        if x1 > x0 && y1 > y0 {
            Some(BoundingBox::new(x0, y0, x1 - x0, y1 - y0))
        } else {
            None
        }
    }

    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        self.intersection(other).map_or(0.0, |r| r.area())
    }

    /// Clips the box to `[0, width] x [0, height]`. A box entirely outside
    /// the page collapses to zero size at the nearest edge.
    pub fn clamp_to(&self, width: f64, height: f64) -> BoundingBox {
        let x0 = self.x.clamp(0.0, width);
        let y0 = self.y.clamp(0.0, height);
        let x1 = self.right().clamp(0.0, width);
        let y1 = self.bottom().clamp(0.0, height);
        BoundingBox::new(x0, y0, (x1 - x0).max(0.0), (y1 - y0).max(0.0))
    }

    /// Closed-rectangle point test.
    pub fn contains_point(&self, px: f64, py: f64) -> bool {
        px >= self.x && px <= self.right() && py >= self.y && py <= self.bottom()
    }

    pub fn scaled(&self, factor: f64) -> BoundingBox {
        BoundingBox::new(
            self.x * factor,
            self.y * factor,
            self.w * factor,
            self.h * factor,
        )
    }
}

impl Serialize for BoundingBox {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeSeq;
        let mut seq = serializer.serialize_seq(Some(4))?;
        for v in self.to_array() {
            seq.serialize_element(&PixelValue(v))?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for BoundingBox {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = <[f64; 4]>::deserialize(deserializer)?;
        Ok(BoundingBox::from_array(v))
    }
}

/// Serializes integral pixel values as JSON integers, anything else as a float.
pub(crate) struct PixelValue(pub f64);

impl Serialize for PixelValue {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match as_exact_int(self.0) {
            Some(i) => serializer.serialize_i64(i),
            None => serializer.serialize_f64(self.0),
        }
    }
}

pub(crate) fn as_exact_int(v: f64) -> Option<i64> {
    // 2^53: every integer below this magnitude is exactly representable.
    if v.fract() == 0.0 && v.abs() < 9_007_199_254_740_992.0 {
        Some(v as i64)
    } else {
        None
    }
}

pub fn area(b: &BoundingBox) -> f64 {
    b.area()
}

/// Intersection over union; 0 when both boxes are degenerate.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// A detected layout region with its confidence and category id.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredBox {
    pub bbox: BoundingBox,
    pub score: f64,
    pub category: i64,
}

impl ScoredBox {
    pub fn new(bbox: BoundingBox, score: f64, category: i64) -> Self {
        Self {
            bbox,
            score,
            category,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizationConfig {
    pub iou_threshold: f64,
    /// A higher-scoring overlapping box replaces a retained one only when its
    /// score exceeds the retained score times this factor.
    pub dominance_factor: f64,
}

impl Default for OptimizationConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.2,
            dominance_factor: 1.2,
        }
    }
}

impl OptimizationConfig {
    pub fn new(iou_threshold: f64, dominance_factor: f64) -> Result<Self, GeometryError> {
        let cfg = Self {
            iou_threshold,
            dominance_factor,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.iou_threshold > 0.0 && self.iou_threshold < 1.0) {
            return Err(GeometryError::InvalidConfig(format!(
                "iou_threshold must lie in (0, 1), got {}",
                self.iou_threshold
            )));
        }
        if !(self.dominance_factor > 1.0 && self.dominance_factor.is_finite()) {
            return Err(GeometryError::InvalidConfig(format!(
                "dominance_factor must be > 1, got {}",
                self.dominance_factor
            )));
        }
        Ok(())
    }
}

fn validate_boxes(boxes: &[ScoredBox]) -> Result<(), GeometryError> {
    for (index, b) in boxes.iter().enumerate() {
        if !(b.score.is_finite() && (0.0..=1.0).contains(&b.score)) {
            return Err(GeometryError::InvalidScore {
                index,
                score: b.score,
            });
        }
        if !b.bbox.is_well_formed() {
            return Err(GeometryError::InvalidDimensions { index });
        }
    }
    Ok(())
}

/// Resolves overlapping layout regions.
///
/// Boxes are visited smallest first (stable on equal areas). A candidate that
/// overlaps a retained box above the IoU threshold either displaces it, when
/// its score beats the retained score by the dominance factor, or is dropped.
/// Displacements made before a candidate is dropped still stand. The result
/// keeps retained boxes in visiting order and no two of them overlap above
/// the threshold.
pub fn optimize_boxes(
    boxes: &[ScoredBox],
    cfg: &OptimizationConfig,
) -> Result<Vec<ScoredBox>, GeometryError> {
    cfg.validate()?;
    validate_boxes(boxes)?;

    let mut order: Vec<&ScoredBox> = boxes.iter().collect();
    order.sort_by(|a, b| a.bbox.area().total_cmp(&b.bbox.area()));

    let mut kept: Vec<ScoredBox> = Vec::new();
    for candidate in order {
        let mut should_keep = true;
        let mut displaced = Vec::new();
        for (slot, retained) in kept.iter().enumerate() {
            if iou(&candidate.bbox, &retained.bbox) > cfg.iou_threshold {
                if candidate.score > retained.score * cfg.dominance_factor {
                    displaced.push(slot);
                } else {
                    should_keep = false;
                    break;
                }
            }
        }
        for slot in displaced.into_iter().rev() {
            kept.remove(slot);
        }
        if should_keep {
            kept.push(*candidate);
        }
    }
    Ok(kept)
}

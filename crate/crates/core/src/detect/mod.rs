//! Detector output ingestion, class-routed fusion and element cropping.
//!
//! Two detectors look at every page: a global-context detector that is good
//! at large structural components and a dense detector for small, crowded
//! elements. A per-category routing table decides which detector's
//! predictions survive for each class.

mod crop;
mod listing;
mod routing;

pub use crop::{crop_elements, element_id, AssetEntry, AssetRepository, PageImage, TRANSPARENT_FRACTION};
pub use listing::{parse_element_listing, render_element_listing};
pub use routing::{default_routing, ClassRoutingTable, Route, RoutingEntry};

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::geometry::{as_exact_int, BoundingBox, ScoredBox};

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("malformed detection JSON at byte {offset}: {message}")]
    Json { offset: usize, message: String },
    #[error("detection entry {index}: {message}")]
    Validation { index: usize, message: String },
    #[error("element listing line {line}: {message}")]
    Listing { line: usize, message: String },
    #[error("cannot fuse detections for different pages ({global:?} vs {dense:?})")]
    PageMismatch { global: String, dense: String },
    #[error("category {0} has no routing entry")]
    UnroutedCategory(i64),
    #[error("routing table: {0}")]
    Routing(String),
    #[error("image is {image_w}x{image_h} but detections describe a {page_w}x{page_h} page")]
    DimensionMismatch {
        image_w: u32,
        image_h: u32,
        page_w: u32,
        page_h: u32,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
    #[error("asset index: {0}")]
    Index(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DetectionSource {
    GlobalDetector,
    DenseDetector,
    #[default]
    File,
}

/// Serialized with the detection-file keys (`category_id`, `bbox`, `score`)
/// plus optional `label` and `source`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(rename = "category_id")]
    pub category: i64,
    pub bbox: BoundingBox,
    pub score: f64,
    /// Category name; empty until resolved against a routing table.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub label: String,
    #[serde(default)]
    pub source: DetectionSource,
}

impl Detection {
    pub fn new(bbox: BoundingBox, score: f64, category: i64) -> Self {
        Self {
            bbox,
            score,
            category,
            label: String::new(),
            source: DetectionSource::File,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn scored_box(&self) -> ScoredBox {
        ScoredBox::new(self.bbox, self.score, self.category)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[u32; 2]", into = "[u32; 2]")]
pub struct PageSize {
    pub width: u32,
    pub height: u32,
}

impl PageSize {
    pub const fn new(width: u32, height: u32) -> Self {
        Self { width, height }
    }

    pub fn area(&self) -> f64 {
        self.width as f64 * self.height as f64
    }
}

impl From<[u32; 2]> for PageSize {
    fn from(v: [u32; 2]) -> Self {
        Self::new(v[0], v[1])
    }
}

impl From<PageSize> for [u32; 2] {
    fn from(p: PageSize) -> Self {
        [p.width, p.height]
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectionSet {
    pub page_id: String,
    pub page_size: Option<PageSize>,
    pub detections: Vec<Detection>,
}

impl DetectionSet {
    pub fn new(page_id: impl Into<String>, page_size: Option<PageSize>) -> Self {
        Self {
            page_id: page_id.into(),
            page_size,
            detections: Vec::new(),
        }
    }

    pub fn with_page(mut self, page_id: impl Into<String>, page_size: PageSize) -> Self {
        self.page_id = page_id.into();
        self.page_size = Some(page_size);
        self
    }

    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }

    pub fn scored_boxes(&self) -> Vec<ScoredBox> {
        self.detections.iter().map(Detection::scored_box).collect()
    }

    /// Clips every box to the page. No-op when the page size is unknown.
    pub fn clamp_to_page(&mut self) {
        if let Some(size) = self.page_size {
            for d in &mut self.detections {
                d.bbox = d.bbox.clamp_to(size.width as f64, size.height as f64);
            }
        }
    }

    /// Fills empty labels from the routing table's category names.
    pub fn resolve_labels(&mut self, routing: &ClassRoutingTable) {
        for d in &mut self.detections {
            if d.label.is_empty() {
                if let Some(name) = routing.label_of(d.category) {
                    d.label = name.to_string();
                }
            }
        }
    }
}

fn json_error_offset(bytes: &[u8], err: &serde_json::Error) -> usize {
    let (line, column) = (err.line(), err.column());
    if line == 0 {
        return 0;
    }
    let mut offset = 0usize;
    for (i, l) in bytes.split(|&b| b == b'\n').enumerate() {
        if i + 1 == line {
            return (offset + column.saturating_sub(1)).min(bytes.len());
        }
        offset += l.len() + 1;
    }
    bytes.len()
}

fn entry_error(index: usize, message: impl Into<String>) -> DetectError {
    DetectError::Validation {
        index,
        message: message.into(),
    }
}

/// Parses a detection file: a JSON array of
/// `{"category_id": int, "bbox": [x, y, w, h], "score": float}` objects.
/// Unknown keys are ignored.
pub fn parse_detection_file(bytes: &[u8]) -> Result<DetectionSet, DetectError> {
    let root: Value = serde_json::from_slice(bytes).map_err(|e| DetectError::Json {
        offset: json_error_offset(bytes, &e),
        message: e.to_string(),
    })?;
    let Value::Array(items) = root else {
        return Err(DetectError::Json {
            offset: 0,
            message: "top-level value must be an array".into(),
        });
    };

    let mut set = DetectionSet::default();
    for (index, item) in items.iter().enumerate() {
        let obj = item
            .as_object()
            .ok_or_else(|| entry_error(index, "entry is not an object"))?;

        let category = obj
            .get("category_id")
            .and_then(Value::as_i64)
            .ok_or_else(|| entry_error(index, "category_id must be an integer"))?;
        if category < 0 {
            return Err(entry_error(index, "category_id must be non-negative"));
        }

        let bbox = obj
            .get("bbox")
            .and_then(Value::as_array)
            .ok_or_else(|| entry_error(index, "bbox must be an array"))?;
        if bbox.len() != 4 {
            return Err(entry_error(
                index,
                format!("bbox must have 4 numbers, found {}", bbox.len()),
            ));
        }
        let mut coords = [0.0; 4];
        for (slot, v) in coords.iter_mut().zip(bbox) {
            *slot = v
                .as_f64()
                .ok_or_else(|| entry_error(index, "bbox values must be numbers"))?;
        }
        let bbox = BoundingBox::from_array(coords);
        if !bbox.is_well_formed() {
            return Err(entry_error(index, "bbox width and height must be non-negative"));
        }

        let score = obj
            .get("score")
            .and_then(Value::as_f64)
            .ok_or_else(|| entry_error(index, "score must be a number"))?;
        if !(0.0..=1.0).contains(&score) {
            return Err(entry_error(index, format!("score {score} outside [0, 1]")));
        }

        let mut det = Detection::new(bbox, score, category);
        if let Some(label) = obj.get("label").and_then(Value::as_str) {
            det.label = label.to_string();
        }
        set.detections.push(det);
    }
    Ok(set)
}

pub(crate) fn fmt_number(v: f64) -> String {
    match as_exact_int(v) {
        Some(i) => i.to_string(),
        None => format!("{v:?}"),
    }
}

fn fmt_score(v: f64) -> String {
    // `{:?}` is the shortest round-tripping form and keeps the `.0` on integers.
    format!("{v:?}")
}

/// Writes detections in the layout detectors emit:
///
/// ```text
/// [
///   {
///     "category_id": 0,
///     "bbox": [0, 0, 2770, 220],
///     "score": 1.0
///   }
/// ]
/// ```
pub fn serialize_detections(set: &DetectionSet) -> String {
    render_detections(set, false)
}

/// Same layout as [`serialize_detections`] with `label` and `source` keys
/// appended to each entry. Readers of the plain format ignore them.
pub fn serialize_detections_annotated(set: &DetectionSet) -> String {
    render_detections(set, true)
}

fn render_detections(set: &DetectionSet, annotated: bool) -> String {
    if set.detections.is_empty() {
        return "[]".to_string();
    }
    let mut out = String::from("[\n");
    for (i, d) in set.detections.iter().enumerate() {
        let b = d.bbox;
        let _ = write!(
            out,
            "  {{\n    \"category_id\": {},\n    \"bbox\": [{}, {}, {}, {}],\n    \"score\": {}",
            d.category,
            fmt_number(b.x),
            fmt_number(b.y),
            fmt_number(b.w),
            fmt_number(b.h),
            fmt_score(d.score)
        );
        if annotated {
            let source = serde_json::to_string(&d.source).unwrap_or_default();
            let _ = write!(
                out,
                ",\n    \"label\": {},\n    \"source\": {}",
                Value::String(d.label.clone()),
                source
            );
        }
        out.push_str("\n  }");
        if i + 1 < set.detections.len() {
            out.push(',');
        }
        out.push('\n');
    }
    out.push(']');
    out
}

/// Class-routed union of two detector outputs.
///
/// Keeps global-detector predictions of GLOBAL-routed classes and
/// dense-detector predictions of DENSE-routed classes; everything else is
/// dropped. Global survivors come first, each group in input order.
pub fn fuse_detections(
    global_set: &DetectionSet,
    dense_set: &DetectionSet,
    routing: &ClassRoutingTable,
) -> Result<DetectionSet, DetectError> {
    if global_set.page_id != dense_set.page_id {
        return Err(DetectError::PageMismatch {
            global: global_set.page_id.clone(),
            dense: dense_set.page_id.clone(),
        });
    }
    let route_of = |d: &Detection| {
        routing
            .route_of(d.category)
            .ok_or(DetectError::UnroutedCategory(d.category))
    };

    let mut fused = DetectionSet::new(
        global_set.page_id.clone(),
        global_set.page_size.or(dense_set.page_size),
    );
    let picks = [
        (global_set, Route::Global, DetectionSource::GlobalDetector),
        (dense_set, Route::Dense, DetectionSource::DenseDetector),
    ];
    // Validate every category before producing output.
    for (set, _, _) in &picks {
        for d in &set.detections {
            route_of(d)?;
        }
    }
    for (set, wanted, source) in picks {
        for d in &set.detections {
            if route_of(d)? == wanted {
                let mut kept = d.clone();
                kept.source = source;
                if kept.label.is_empty() {
                    kept.label = routing.label_of(d.category).unwrap_or_default().to_string();
                }
                fused.detections.push(kept);
            }
        }
    }
    Ok(fused)
}

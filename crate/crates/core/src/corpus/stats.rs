//! Dataset statistics over annotated pages.

use serde::{Deserialize, Serialize};

use super::CorpusError;
use crate::detect::{Detection, PageSize};
use crate::geometry::BoundingBox;
use crate::schema::assign_elements;

/// One annotated page: layout boxes, detected elements, and either explicit
/// token counts or the text of each box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageAnnotation {
    pub page_id: String,
    pub page_size: PageSize,
    pub layout_boxes: Vec<BoundingBox>,
    #[serde(default)]
    pub elements: Vec<Detection>,
    #[serde(default)]
    pub token_counts_per_box: Vec<u64>,
}

/// File form of [`PageAnnotation`]. `box_texts` may stand in for
/// `token_counts_per_box`; counts are then whitespace-delimited tokens.
#[derive(Debug, Clone, Deserialize)]
struct AnnotationFile {
    page_id: String,
    page_size: PageSize,
    layout_boxes: Vec<BoundingBox>,
    #[serde(default)]
    elements: Vec<Detection>,
    token_counts_per_box: Option<Vec<u64>>,
    box_texts: Option<Vec<String>>,
}

pub fn count_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

impl PageAnnotation {
    pub fn new(
        page_id: impl Into<String>,
        page_size: PageSize,
        layout_boxes: Vec<BoundingBox>,
        elements: Vec<Detection>,
        token_counts_per_box: Vec<u64>,
    ) -> Result<Self, CorpusError> {
        let a = Self {
            page_id: page_id.into(),
            page_size,
            layout_boxes,
            elements,
            token_counts_per_box,
        };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |m: String| CorpusError::Annotation {
            page_id: self.page_id.clone(),
            message: m,
        };
        if self.token_counts_per_box.len() != self.layout_boxes.len() {
            return Err(bad(format!(
                "{} token counts for {} layout boxes",
                self.token_counts_per_box.len(),
                self.layout_boxes.len()
            )));
        }
        if self.page_size.width == 0 || self.page_size.height == 0 {
            return Err(bad("page size must be positive".into()));
        }
        if let Some(b) = self.layout_boxes.iter().find(|b| !b.is_well_formed()) {
            return Err(bad(format!("malformed layout box {:?}", b.to_array())));
        }
        if let Some(d) = self.elements.iter().find(|d| !d.bbox.is_well_formed()) {
            return Err(bad(format!("malformed element box {:?}", d.bbox.to_array())));
        }
        Ok(())
    }
}

/// Reads a JSON array of annotations.
pub fn parse_annotations(bytes: &[u8]) -> Result<Vec<PageAnnotation>, CorpusError> {
    let files: Vec<AnnotationFile> = serde_json::from_slice(bytes)?;
    files
        .into_iter()
        .map(|f| {
            let counts = match (f.token_counts_per_box, f.box_texts) {
                (Some(c), _) => c,
                (None, Some(texts)) => texts.iter().map(|t| count_tokens(t)).collect(),
                (None, None) => vec![0; f.layout_boxes.len()],
            };
            PageAnnotation::new(f.page_id, f.page_size, f.layout_boxes, f.elements, counts)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Summary {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub avg: f64,
}

impl Summary {
    /// Summary of `values`; all zero when empty. Values are summed in sorted
    /// order so the result does not depend on input order.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let sum: f64 = v.iter().sum();
        let avg = (sum / v.len() as f64).clamp(v[0], v[v.len() - 1]);
        Self {
            count: v.len(),
            min: v[0],
            max: v[v.len() - 1],
            avg,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayoutStats {
    pub pages: usize,
    pub boxes_per_page: Summary,
    pub elements_per_page: Summary,
    /// Elements assigned to each box by the containment rule.
    pub elements_per_box: Summary,
    pub tokens_per_box: Summary,
    /// Box area over page area, in percent.
    pub box_to_page_ratio: Summary,
}

fn per_box_counts(a: &PageAnnotation) -> Vec<f64> {
    let boxes: Vec<BoundingBox> = a.elements.iter().map(|d| d.bbox).collect();
    let assignment = assign_elements(&a.layout_boxes, &boxes);
    let mut counts = vec![0usize; a.layout_boxes.len()];
    for r in assignment.targets.into_iter().flatten() {
        counts[r] += 1;
    }
    counts.into_iter().map(|c| c as f64).collect()
}

fn nonempty(annotations: &[PageAnnotation]) -> Result<(), CorpusError> {
    if annotations.is_empty() {
        return Err(CorpusError::Empty);
    }
    for a in annotations {
        a.validate()?;
    }
    Ok(())
}

pub fn compute_layout_stats(annotations: &[PageAnnotation]) -> Result<LayoutStats, CorpusError> {
    nonempty(annotations)?;
    let mut boxes = Vec::new();
    let mut elements = Vec::new();
    let mut per_box = Vec::new();
    let mut tokens = Vec::new();
    let mut ratios = Vec::new();
    for a in annotations {
        boxes.push(a.layout_boxes.len() as f64);
        elements.push(a.elements.len() as f64);
        per_box.extend(per_box_counts(a));
        tokens.extend(a.token_counts_per_box.iter().map(|&t| t as f64));
        let page_area = a.page_size.area();
        ratios.extend(a.layout_boxes.iter().map(|b| 100.0 * b.area() / page_area));
    }
    Ok(LayoutStats {
        pages: annotations.len(),
        boxes_per_page: Summary::of(&boxes),
        elements_per_page: Summary::of(&elements),
        elements_per_box: Summary::of(&per_box),
        tokens_per_box: Summary::of(&tokens),
        box_to_page_ratio: Summary::of(&ratios),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkStats {
    pub pages: usize,
    pub avg_boxes_per_page: f64,
    pub avg_elements_per_page: f64,
    pub avg_elements_per_box: f64,
    /// Elements whose center lies in at least one layout box.
    pub element_coverage: f64,
    /// Elements covering at least `large_threshold` of the page.
    pub large_elements: f64,
    pub large_threshold: f64,
}

pub const DEFAULT_LARGE_THRESHOLD: f64 = 0.01;

/// Benchmark-level averages and fractions. Both fractions are 0 for a corpus
/// without elements.
pub fn compute_eval_stats(
    annotations: &[PageAnnotation],
    large_threshold: f64,
) -> Result<BenchmarkStats, CorpusError> {
    if !(large_threshold > 0.0 && large_threshold < 1.0) {
        return Err(CorpusError::InvalidThreshold(large_threshold));
    }
    let layout = compute_layout_stats(annotations)?;
    let mut total = 0usize;
    let mut covered = 0usize;
    let mut large = 0usize;
    for a in annotations {
        let page_area = a.page_size.area();
        for d in &a.elements {
            total += 1;
            let (cx, cy) = d.bbox.center();
            if a.layout_boxes.iter().any(|b| b.contains_point(cx, cy)) {
                covered += 1;
            }
            if d.bbox.area() >= large_threshold * page_area {
                large += 1;
            }
        }
    }
    let frac = |n: usize| if total == 0 { 0.0 } else { n as f64 / total as f64 };
    Ok(BenchmarkStats {
        pages: annotations.len(),
        avg_boxes_per_page: layout.boxes_per_page.avg,
        avg_elements_per_page: layout.elements_per_page.avg,
        avg_elements_per_box: layout.elements_per_box.avg,
        element_coverage: frac(covered),
        large_elements: frac(large),
        large_threshold,
    })
}

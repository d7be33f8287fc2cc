//! Two-level layout schema: page regions, each owning the detected elements
//! nested inside it, plus a bucket for elements that fall outside every region.

use std::cmp::Ordering;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::{element_id, DetectionSet, PageSize};
use crate::geometry::{BoundingBox, ScoredBox};

#[derive(Debug, Error, PartialEq)]
pub enum SchemaError {
    #[error("assignment covers {got} elements but {expected} were given")]
    AssignmentLength { expected: usize, got: usize },
    #[error("element {element} assigned to region {region}, which does not exist")]
    UnknownRegion { element: usize, region: usize },
    #[error("duplicate element id {0:?}")]
    DuplicateElement(String),
    #[error("schema JSON: {0}")]
    Json(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "UPPERCASE")]
pub enum SemanticType {
    Header,
    Navbar,
    Sidebar,
    Content,
    Footer,
    Hero,
    #[default]
    Unknown,
}

impl SemanticType {
    /// Lenient name lookup; anything unrecognised is `Unknown`.
    pub fn from_name(name: &str) -> Self {
        match name.trim().to_ascii_uppercase().as_str() {
            "HEADER" => Self::Header,
            "NAVBAR" | "NAV" | "NAVIGATION" => Self::Navbar,
            "SIDEBAR" => Self::Sidebar,
            "CONTENT" | "MAIN" => Self::Content,
            "FOOTER" => Self::Footer,
            "HERO" => Self::Hero,
            _ => Self::Unknown,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementRef {
    pub element_id: String,
    pub bbox: BoundingBox,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionNode {
    pub region_id: String,
    pub bbox: BoundingBox,
    pub semantic_type: SemanticType,
    pub description: String,
    pub children: Vec<ElementRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutSchema {
    pub page_id: String,
    pub page_size: PageSize,
    pub regions: Vec<RegionNode>,
    pub orphans: Vec<ElementRef>,
}

impl LayoutSchema {
    pub fn element_count(&self) -> usize {
        self.regions.iter().map(|r| r.children.len()).sum::<usize>() + self.orphans.len()
    }

    pub fn elements(&self) -> impl Iterator<Item = &ElementRef> {
        self.regions
            .iter()
            .flat_map(|r| r.children.iter())
            .chain(self.orphans.iter())
    }

    /// Canonical form: UTF-8, fixed field order, integral coordinates as
    /// integers, two-space indentation.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SchemaError> {
        serde_json::from_str(text).map_err(|e| SchemaError::Json(e.to_string()))
    }

    /// Sorts regions, children and orphans into reading order.
    pub fn normalize_order(&mut self) {
        self.regions.sort_by(|a, b| reading_order(&a.bbox, &b.bbox));
        for r in &mut self.regions {
            r.children.sort_by(|a, b| reading_order(&a.bbox, &b.bbox));
        }
        self.orphans.sort_by(|a, b| reading_order(&a.bbox, &b.bbox));
    }
}

/// Top-to-bottom, then left-to-right, by box origin.
pub fn reading_order(a: &BoundingBox, b: &BoundingBox) -> Ordering {
    a.y.total_cmp(&b.y).then(a.x.total_cmp(&b.x))
}

/// Where each element landed: `Some(region index)` or `None` for orphans.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Assignment {
    pub targets: Vec<Option<usize>>,
    pub warnings: Vec<String>,
}

/// Share of the element's area that lies inside the region.
pub fn containment_ratio(element: &BoundingBox, region: &BoundingBox) -> f64 {
    let a = element.area();
    if a <= 0.0 {
        0.0
    } else {
        element.intersection_area(region) / a
    }
}

/// Puts each element in the region that contains the largest share of it.
///
/// Ties go to the smaller region, then to the earlier one. Elements with no
/// overlap, or with zero area, become orphans.
pub fn assign_elements(regions: &[BoundingBox], elements: &[BoundingBox]) -> Assignment {
    let mut out = Assignment::default();
    for (i, el) in elements.iter().enumerate() {
        if el.area() <= 0.0 {
            out.warnings
                .push(format!("element {i} has zero area; left unassigned"));
            out.targets.push(None);
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (r, region) in regions.iter().enumerate() {
            let ratio = containment_ratio(el, region);
            if ratio <= 0.0 {
                continue;
            }
            best = match best {
                None => Some((r, ratio)),
                Some((b, br)) => {
                    let better = ratio > br
                        || (ratio == br && region.area() < regions[b].area());
                    if better {
                        Some((r, ratio))
                    } else {
                        Some((b, br))
                    }
                }
            };
        }
        out.targets.push(best.map(|(r, _)| r));
    }
    out
}

pub fn element_refs(set: &DetectionSet) -> Vec<ElementRef> {
    set.detections
        .iter()
        .enumerate()
        .map(|(i, d)| ElementRef {
            element_id: element_id(&set.page_id, i),
            bbox: d.bbox,
            label: d.label.clone(),
        })
        .collect()
}

/// Assembles the schema from an assignment. Region ids follow reading order
/// (`region0` is the top-left-most region); semantic types start as `Unknown`.
pub fn build_schema(
    page_id: &str,
    page_size: PageSize,
    regions: &[ScoredBox],
    elements: &[ElementRef],
    assignment: &Assignment,
) -> Result<LayoutSchema, SchemaError> {
    if assignment.targets.len() != elements.len() {
        return Err(SchemaError::AssignmentLength {
            expected: elements.len(),
            got: assignment.targets.len(),
        });
    }
    let mut seen = HashSet::new();
    for e in elements {
        if !seen.insert(e.element_id.as_str()) {
            return Err(SchemaError::DuplicateElement(e.element_id.clone()));
        }
    }

    let mut order: Vec<usize> = (0..regions.len()).collect();
    order.sort_by(|&a, &b| reading_order(&regions[a].bbox, &regions[b].bbox));
    let mut slot_of = vec![0usize; regions.len()];
    for (slot, &r) in order.iter().enumerate() {
        slot_of[r] = slot;
    }

    let mut nodes: Vec<RegionNode> = order
        .iter()
        .enumerate()
        .map(|(slot, &r)| RegionNode {
            region_id: format!("region{slot}"),
            bbox: regions[r].bbox,
            semantic_type: SemanticType::Unknown,
            description: String::new(),
            children: Vec::new(),
        })
        .collect();
    let mut orphans = Vec::new();
    for (i, (el, target)) in elements.iter().zip(&assignment.targets).enumerate() {
        match *target {
            Some(r) if r < regions.len() => nodes[slot_of[r]].children.push(el.clone()),
            Some(r) => return Err(SchemaError::UnknownRegion { element: i, region: r }),
            None => orphans.push(el.clone()),
        }
    }

    let mut schema = LayoutSchema {
        page_id: page_id.to_string(),
        page_size,
        regions: nodes,
        orphans,
    };
    schema.normalize_order();
    Ok(schema)
}

/// Clips regions and elements to the page, assigns, and builds the schema.
pub fn schema_from_detections(
    regions: &[ScoredBox],
    elements: &DetectionSet,
    page_size: PageSize,
) -> Result<(LayoutSchema, Vec<String>), SchemaError> {
    let (w, h) = (page_size.width as f64, page_size.height as f64);
    let regions: Vec<ScoredBox> = regions
        .iter()
        .map(|r| ScoredBox {
            bbox: r.bbox.clamp_to(w, h),
            ..*r
        })
        .collect();
    let mut elements = elements.clone();
    elements.page_size = Some(page_size);
    elements.clamp_to_page();

    let region_boxes: Vec<BoundingBox> = regions.iter().map(|r| r.bbox).collect();
    let element_boxes: Vec<BoundingBox> = elements.detections.iter().map(|d| d.bbox).collect();
    let assignment = assign_elements(&region_boxes, &element_boxes);
    let refs = element_refs(&elements);
    let schema = build_schema(&elements.page_id, page_size, &regions, &refs, &assignment)?;
    Ok((schema, assignment.warnings))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    DuplicateRegion,
    DuplicateElement,
    ChildOutsideParent,
    RegionOutOfBounds,
    MalformedBox,
    RegionOrder,
    ChildOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub message: String,
    pub subject: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn has(&self, code: ViolationCode) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.ok {
            return write!(f, "ok");
        }
        let parts: Vec<String> = self
            .violations
            .iter()
            .map(|v| format!("{:?} {}: {}", v.code, v.subject, v.message))
            .collect();
        write!(f, "{}", parts.join("; "))
    }
}

fn is_sorted_by_reading_order<'a>(mut boxes: impl Iterator<Item = &'a BoundingBox>) -> bool {
    let Some(mut prev) = boxes.next() else {
        return true;
    };
    for b in boxes {
        if reading_order(prev, b) == Ordering::Greater {
            return false;
        }
        prev = b;
    }
    true
}

pub fn validate_schema(s: &LayoutSchema) -> ValidationReport {
    let mut violations = Vec::new();
    let mut push = |code, subject: &str, message: String| {
        violations.push(Violation {
            code,
            message,
            subject: subject.to_string(),
        })
    };
    let (pw, ph) = (s.page_size.width as f64, s.page_size.height as f64);

    let mut region_ids = HashSet::new();
    for r in &s.regions {
        if !region_ids.insert(r.region_id.as_str()) {
            push(ViolationCode::DuplicateRegion, &r.region_id, "region id used twice".into());
        }
        if !r.bbox.is_well_formed() {
            push(ViolationCode::MalformedBox, &r.region_id, "negative or non-finite box".into());
        } else if r.bbox.x < 0.0 || r.bbox.y < 0.0 || r.bbox.right() > pw || r.bbox.bottom() > ph {
            push(
                ViolationCode::RegionOutOfBounds,
                &r.region_id,
                format!("box {:?} exceeds the {pw}x{ph} page", r.bbox.to_array()),
            );
        }
        for c in &r.children {
            if c.bbox.intersection_area(&r.bbox) <= 0.0 {
                push(
                    ViolationCode::ChildOutsideParent,
                    &c.element_id,
                    format!("does not intersect parent {}", r.region_id),
                );
            }
        }
        if !is_sorted_by_reading_order(r.children.iter().map(|c| &c.bbox)) {
            push(ViolationCode::ChildOrder, &r.region_id, "children not in reading order".into());
        }
    }
    if !is_sorted_by_reading_order(s.regions.iter().map(|r| &r.bbox)) {
        push(ViolationCode::RegionOrder, &s.page_id, "regions not in reading order".into());
    }
    if !is_sorted_by_reading_order(s.orphans.iter().map(|o| &o.bbox)) {
        push(ViolationCode::ChildOrder, "orphans", "orphans not in reading order".into());
    }

    let mut element_ids = HashSet::new();
    for e in s.elements() {
        if !e.bbox.is_well_formed() {
            push(ViolationCode::MalformedBox, &e.element_id, "negative or non-finite box".into());
        }
        if !element_ids.insert(e.element_id.as_str()) {
            push(
                ViolationCode::DuplicateElement,
                &e.element_id,
                "element appears more than once".into(),
            );
        }
    }

    ValidationReport {
        ok: violations.is_empty(),
        violations,
    }
}

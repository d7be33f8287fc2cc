//! Naive deterministic layout over a parsed DOM.
//!
//! Placement rules:
//! - `position: absolute|fixed`, or a `left`/`top` declaration, places the
//!   element at its offsets inside the containing block (nearest positioned
//!   ancestor, else the viewport; the viewport always for `fixed`).
//! - Everything else stacks vertically inside its parent at full parent width.
//! - Missing height is 20 units for an element with direct text plus the
//!   heights of its flow children.
//!
//! Margins, padding, inline formatting and stylesheets are not modelled.

use super::html::DomTree;
use super::html::DomNode;
use super::{BlockRecord, Rgb};
use crate::detect::PageSize;
use crate::geometry::BoundingBox;

/// Height of one text-bearing element when none is given.
pub const LINE_HEIGHT: f64 = 20.0;
const ROOT_FONT_PX: f64 = 16.0;

const SKIPPED: &[&str] = &[
    "head", "title", "meta", "link", "script", "style", "noscript", "template",
];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Layout {
    pub blocks: Vec<BlockRecord>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Length {
    Px(f64),
    Percent(f64),
    Vw(f64),
    Vh(f64),
}

fn parse_length(value: &str) -> Option<Length> {
    let v = value.trim().to_ascii_lowercase();
    let num = |s: &str| s.trim().parse::<f64>().ok().filter(|x| x.is_finite());
    if let Some(p) = v.strip_suffix("px") {
        return num(p).map(Length::Px);
    }
    if let Some(p) = v.strip_suffix('%') {
        return num(p).map(Length::Percent);
    }
    if let Some(p) = v.strip_suffix("rem").or_else(|| v.strip_suffix("em")) {
        return num(p).map(|x| Length::Px(x * ROOT_FONT_PX));
    }
    if let Some(p) = v.strip_suffix("vw") {
        return num(p).map(Length::Vw);
    }
    if let Some(p) = v.strip_suffix("vh") {
        return num(p).map(Length::Vh);
    }
    num(&v).map(Length::Px)
}

/// Declarations in source order, names lowercased. Malformed entries are
/// reported through `warn`.
fn parse_style(style: &str, warn: &mut dyn FnMut(String)) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for decl in style.split(';') {
        let decl = decl.trim();
        if decl.is_empty() {
            continue;
        }
        match decl.split_once(':') {
            Some((name, value)) if !name.trim().is_empty() && !value.trim().is_empty() => {
                let value = value.trim().trim_end_matches("!important").trim();
                out.push((name.trim().to_ascii_lowercase(), value.to_string()));
            }
            _ => warn(format!("unparseable style declaration '{decl}'")),
        }
    }
    out
}

/// First color-looking token of a `background` shorthand.
fn shorthand_color(value: &str) -> Option<Rgb> {
    if let Some(c) = Rgb::parse_css(value) {
        return Some(c);
    }
    if let Some(start) = value.find("rgb") {
        let end = value[start..].find(')')?;
        return Rgb::parse_css(&value[start..=start + end]);
    }
    value.split_whitespace().find_map(Rgb::parse_css)
}

#[derive(Debug, Clone, Copy)]
struct Frame {
    bbox: BoundingBox,
    /// Whether `bbox.h` is known before children are laid out.
    definite_height: bool,
    fill: Rgb,
    background: Rgb,
    /// Containing block for absolutely placed descendants.
    anchor: BoundingBox,
}

struct Engine {
    viewport: BoundingBox,
    blocks: Vec<BlockRecord>,
    warnings: Vec<String>,
}

#[derive(Default)]
struct Styles {
    position: Option<String>,
    left: Option<Length>,
    top: Option<Length>,
    right: Option<Length>,
    bottom: Option<Length>,
    width: Option<Length>,
    height: Option<Length>,
    fill: Option<Rgb>,
    background: Option<Rgb>,
    hidden: bool,
}

impl Engine {
    fn warn(&mut self, node: &DomNode, msg: String) {
        self.warnings.push(format!("<{}>: {msg}", node.tag));
    }

    fn styles(&mut self, node: &DomNode) -> Styles {
        let mut s = Styles::default();
        let Some(style) = node.attr("style") else {
            return s;
        };
        let mut pending = Vec::new();
        let decls = parse_style(style, &mut |m| pending.push(m));
        for (name, value) in decls {
            let length = |slot: &mut Option<Length>, pending: &mut Vec<String>| {
                if value.eq_ignore_ascii_case("auto") {
                    return;
                }
                match parse_length(&value) {
                    Some(l) => *slot = Some(l),
                    None => pending.push(format!("unparseable length {name}: {value}")),
                }
            };
            match name.as_str() {
                "position" => s.position = Some(value.to_ascii_lowercase()),
                "left" => length(&mut s.left, &mut pending),
                "top" => length(&mut s.top, &mut pending),
                "right" => length(&mut s.right, &mut pending),
                "bottom" => length(&mut s.bottom, &mut pending),
                "width" => length(&mut s.width, &mut pending),
                "height" => length(&mut s.height, &mut pending),
                "color" => match Rgb::parse_css(&value) {
                    Some(c) => s.fill = Some(c),
                    None => pending.push(format!("unparseable color: {value}")),
                },
                "background-color" | "background" => {
                    let parsed = if name == "background" {
                        shorthand_color(&value)
                    } else {
                        Rgb::parse_css(&value)
                    };
                    match parsed {
                        Some(c) => s.background = Some(c),
                        None if value.eq_ignore_ascii_case("transparent") => {}
                        None if name == "background" => {}
                        None => pending.push(format!("unparseable color: {value}")),
                    }
                }
                "display" => s.hidden = value.eq_ignore_ascii_case("none"),
                "visibility" => s.hidden |= value.eq_ignore_ascii_case("hidden"),
                _ => {}
            }
        }
        for m in pending {
            self.warn(node, m);
        }
        s
    }

    fn resolve(&self, l: Length, basis: f64) -> f64 {
        match l {
            Length::Px(v) => v,
            Length::Percent(p) => p / 100.0 * basis,
            Length::Vw(p) => p / 100.0 * self.viewport.w,
            Length::Vh(p) => p / 100.0 * self.viewport.h,
        }
    }

    /// Height resolution that refuses percentages of an indefinite height.
    fn resolve_height(&mut self, node: &DomNode, l: Length, parent: &Frame) -> Option<f64> {
        if matches!(l, Length::Percent(_)) && !parent.definite_height {
            self.warn(node, "percentage height of auto-height parent ignored".into());
            return None;
        }
        Some(self.resolve(l, parent.bbox.h))
    }

    /// Lays out `node` and returns the height it takes in its parent's flow.
    fn layout(&mut self, node: &DomNode, parent: &Frame, flow_y: f64) -> f64 {
        if SKIPPED.contains(&node.tag.as_str()) {
            return 0.0;
        }
        let s = self.styles(node);
        if s.hidden {
            return 0.0;
        }
        let fill = s.fill.unwrap_or(parent.fill);
        let background = s.background.unwrap_or(parent.background);
        let position = s.position.as_deref().unwrap_or("static");
        let absolute = matches!(position, "absolute" | "fixed") || s.left.is_some() || s.top.is_some();
        let cb = if position == "fixed" {
            self.viewport
        } else if absolute {
            parent.anchor
        } else {
            parent.bbox
        };

        let width = s.width.map(|l| self.resolve(l, cb.w));
        let height = match s.height {
            Some(l) if absolute => Some(self.resolve(l, cb.h)),
            Some(l) => self.resolve_height(node, l, parent),
            None => None,
        };

        let (x, y, w) = if absolute {
            let left = s.left.map(|l| self.resolve(l, cb.w));
            let right = s.right.map(|l| self.resolve(l, cb.w));
            let w = match (width, left, right) {
                (Some(w), _, _) => w,
                (None, l, r) => (cb.w - l.unwrap_or(0.0) - r.unwrap_or(0.0)).max(0.0),
            };
            let x = match (left, right) {
                (Some(l), _) => cb.x + l,
                (None, Some(r)) => cb.x + cb.w - r - w,
                (None, None) => cb.x,
            };
            let top = s.top.map(|l| self.resolve(l, cb.h));
            let y = match (top, s.bottom, height) {
                (Some(t), _, _) => cb.y + t,
                (None, Some(b), Some(h)) => cb.y + cb.h - self.resolve(b, cb.h) - h,
                _ => cb.y,
            };
            (x, y, w)
        } else {
            (parent.bbox.x, parent.bbox.y + flow_y, width.unwrap_or(parent.bbox.w))
        };

        let mut frame = Frame {
            bbox: BoundingBox::new(x, y, w.max(0.0), height.unwrap_or(0.0).max(0.0)),
            definite_height: height.is_some(),
            fill,
            background,
            anchor: parent.anchor,
        };
        if absolute || position == "relative" || position == "sticky" {
            frame.anchor = frame.bbox;
        }

        let text_height = if node.text.is_empty() { 0.0 } else { LINE_HEIGHT };
        let block_index = self.blocks.len();
        if !node.text.is_empty() {
            // Placeholder keeps document order; the box is final after children.
            self.blocks.push(BlockRecord {
                text: node.text.clone(),
                bbox: frame.bbox,
                fill,
                background,
            });
        }
        let mut cursor = text_height;
        for child in &node.children {
            cursor += self.layout(child, &frame, cursor);
            if !frame.definite_height {
                frame.bbox.h = cursor;
                if absolute || position == "relative" || position == "sticky" {
                    frame.anchor = frame.bbox;
                }
            }
        }
        if !frame.definite_height {
            frame.bbox.h = cursor;
        }
        if !node.text.is_empty() {
            self.blocks[block_index].bbox = frame.bbox;
        }
        if absolute {
            0.0
        } else {
            frame.bbox.h
        }
    }
}

/// Lays out `dom` in a viewport and returns one block per element with direct
/// text, in document order. Boxes are clamped to the viewport and blocks that
/// end up with no area are dropped with a warning.
///
/// # Panics
/// If either viewport dimension is zero.
pub fn layout_blocks(dom: &DomTree, viewport: PageSize) -> Layout {
    assert!(
        viewport.width > 0 && viewport.height > 0,
        "viewport must be positive"
    );
    let vp = BoundingBox::new(0.0, 0.0, viewport.width as f64, viewport.height as f64);
    let mut engine = Engine {
        viewport: vp,
        blocks: Vec::new(),
        warnings: Vec::new(),
    };
    let root = Frame {
        bbox: vp,
        definite_height: true,
        fill: Rgb::BLACK,
        background: Rgb::WHITE,
        anchor: vp,
    };
    let mut cursor = 0.0;
    for child in &dom.root.children {
        cursor += engine.layout(child, &root, cursor);
    }
    if !dom.root.text.is_empty() {
        engine.blocks.insert(
            0,
            BlockRecord {
                text: dom.root.text.clone(),
                bbox: vp,
                fill: Rgb::BLACK,
                background: Rgb::WHITE,
            },
        );
    }

    let mut warnings = engine.warnings;
    let blocks = engine
        .blocks
        .into_iter()
        .filter_map(|mut b| {
            b.bbox = b.bbox.clamp_to(vp.w, vp.h);
            if b.bbox.area() > 0.0 {
                Some(b)
            } else {
                warnings.push(format!("block '{}' lies outside the viewport; dropped", b.text));
                None
            }
        })
        .collect();
    Layout { blocks, warnings }
}

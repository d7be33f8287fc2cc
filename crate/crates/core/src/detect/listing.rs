//! Plain-text element listing, one `BoxN: x=.., y=.., width=.., height=..`
//! line per element. Prompts use it; it also parses back into detections.

use super::{fmt_number, DetectError, Detection, DetectionSet};
use crate::geometry::BoundingBox;

/// Renders one line per detection, numbered by position in the set. A known
/// label is appended as `label=...`.
pub fn render_element_listing(set: &DetectionSet) -> String {
    let mut lines = Vec::with_capacity(set.len());
    for (i, d) in set.detections.iter().enumerate() {
        let b = d.bbox;
        let mut line = format!(
            "Box{i}: x={}, y={}, width={}, height={}",
            fmt_number(b.x),
            fmt_number(b.y),
            fmt_number(b.w),
            fmt_number(b.h)
        );
        if !d.label.is_empty() {
            line.push_str(", label=");
            line.push_str(&d.label);
        }
        lines.push(line);
    }
    lines.join("\n")
}

/// Parses `BoxN:` lines; other lines (headings, blank lines) are skipped.
/// Optional `category=`, `score=` and `label=` keys follow the four
/// coordinates. Missing score defaults to 1.0 and category to 0.
pub fn parse_element_listing(text: &str) -> Result<DetectionSet, DetectError> {
    let mut set = DetectionSet::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw
            .trim()
            .trim_start_matches(['-', '*', '•'])
            .trim_start();
        let Some(rest) = line.strip_prefix("Box") else {
            continue;
        };
        let err = |message: String| DetectError::Listing {
            line: lineno + 1,
            message,
        };
        let (number, fields) = rest
            .split_once(':')
            .ok_or_else(|| err("missing ':' after box name".into()))?;
        if number.trim().parse::<u32>().is_err() {
            continue;
        }

        let (mut x, mut y, mut w, mut h) = (None, None, None, None);
        let mut det = Detection::new(BoundingBox::default(), 1.0, 0);
        for field in fields.split(',') {
            let field = field.trim();
            if field.is_empty() {
                continue;
            }
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, found {field:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let number = || {
                value
                    .trim_end_matches("px")
                    .parse::<f64>()
                    .map_err(|_| err(format!("{key}: not a number: {value:?}")))
            };
            match key {
                "x" => x = Some(number()?),
                "y" => y = Some(number()?),
                "width" | "w" => w = Some(number()?),
                "height" | "h" => h = Some(number()?),
                "score" => det.score = number()?,
                "category" | "category_id" => {
                    det.category = value
                        .parse()
                        .map_err(|_| err(format!("category: not an integer: {value:?}")))?
                }
                "label" => det.label = value.to_string(),
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }
        let (Some(x), Some(y), Some(w), Some(h)) = (x, y, w, h) else {
            return Err(err("x, y, width and height are all required".into()));
        };
        det.bbox = BoundingBox::new(x, y, w, h);
        if !det.bbox.is_well_formed() {
            return Err(err("width and height must be non-negative".into()));
        }
        set.detections.push(det);
    }
    Ok(set)
}

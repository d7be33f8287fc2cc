//! Reading model responses: schema JSON, HTML documents and judge verdicts.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::GenError;
use crate::detect::{element_id, PageSize};
use crate::geometry::BoundingBox;
use crate::schema::{validate_schema, ElementRef, LayoutSchema, RegionNode, SemanticType};

/// Balanced `{...}` spans of `text` in order of their opening brace, skipping
/// spans nested inside an earlier one. Braces inside JSON strings are ignored.
pub fn json_object_spans(text: &str) -> Vec<&str> {
    let bytes = text.as_bytes();
    let mut spans = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] != b'{' {
            i += 1;
            continue;
        }
        let mut depth = 0usize;
        let mut in_string = false;
        let mut escaped = false;
        let mut end = None;
        for (j, &b) in bytes.iter().enumerate().skip(i) {
            if in_string {
                match b {
                    _ if escaped => escaped = false,
                    b'\\' => escaped = true,
                    b'"' => in_string = false,
                    _ => {}
                }
                continue;
            }
            match b {
                b'"' => in_string = true,
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        end = Some(j);
                        break;
                    }
                }
                _ => {}
            }
        }
        match end {
            Some(j) => {
                spans.push(&text[i..=j]);
                i = j + 1;
            }
            None => i += 1,
        }
    }
    spans
}

/// First span that parses as a JSON object.
pub fn extract_json_object(text: &str) -> Option<Map<String, Value>> {
    json_object_spans(text).into_iter().find_map(|s| match serde_json::from_str(s) {
        Ok(Value::Object(m)) => Some(m),
        _ => None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemaParse {
    pub schema: LayoutSchema,
    pub warnings: Vec<String>,
}

struct Ctx<'a> {
    schema: Option<&'a LayoutSchema>,
    elements: HashMap<&'a str, &'a ElementRef>,
    regions: HashMap<&'a str, &'a RegionNode>,
}

fn shape(msg: impl Into<String>) -> GenError {
    GenError::SchemaShape(msg.into())
}

fn read_box(v: &Value) -> Option<BoundingBox> {
    let arr = v.as_array()?;
    if arr.len() != 4 {
        return None;
    }
    let mut c = [0.0; 4];
    for (slot, x) in c.iter_mut().zip(arr) {
        *slot = x.as_f64()?;
    }
    Some(BoundingBox::from_array(c))
}

fn read_page_size(v: &Value) -> Option<PageSize> {
    let dim = |x: &Value| x.as_u64().and_then(|n| u32::try_from(n).ok());
    match v {
        Value::Array(a) if a.len() == 2 => Some(PageSize::new(dim(&a[0])?, dim(&a[1])?)),
        Value::Object(o) => Some(PageSize::new(dim(o.get("width")?)?, dim(o.get("height")?)?)),
        _ => None,
    }
}

fn str_field<'v>(o: &'v Map<String, Value>, key: &str) -> Option<&'v str> {
    o.get(key).and_then(Value::as_str)
}

impl Ctx<'_> {
    /// Maps `BoxN` to the element id the prompt promised for it.
    fn resolve_id(&self, page_id: &str, raw: &str) -> String {
        let raw = raw.trim();
        if let Some(n) = raw.strip_prefix("Box").and_then(|n| n.parse::<usize>().ok()) {
            return element_id(page_id, n);
        }
        raw.to_string()
    }

    fn element(&self, page_id: &str, v: &Value, warnings: &mut Vec<String>) -> Result<ElementRef, GenError> {
        let (raw_id, obj) = match v {
            Value::String(s) => (s.as_str(), None),
            Value::Object(o) => (
                str_field(o, "element_id")
                    .or_else(|| str_field(o, "id"))
                    .ok_or_else(|| shape("element without element_id"))?,
                Some(o),
            ),
            _ => return Err(shape("element entries must be strings or objects")),
        };
        let id = self.resolve_id(page_id, raw_id);
        let known = self.elements.get(id.as_str()).copied();
        if self.schema.is_some() && known.is_none() {
            warnings.push(format!("element {id} is not among the detected elements"));
        }
        let bbox = obj
            .and_then(|o| o.get("bbox"))
            .and_then(read_box)
            .or(known.map(|k| k.bbox))
            .ok_or_else(|| shape(format!("element {id} has no usable bbox")))?;
        let label = obj
            .and_then(|o| str_field(o, "label"))
            .map(str::to_string)
            .or(known.map(|k| k.label.clone()))
            .unwrap_or_default();
        Ok(ElementRef {
            element_id: id,
            bbox,
            label,
        })
    }

    fn elements(
        &self,
        page_id: &str,
        v: Option<&Value>,
        what: &str,
        warnings: &mut Vec<String>,
    ) -> Result<Vec<ElementRef>, GenError> {
        match v {
            None | Some(Value::Null) => Ok(Vec::new()),
            Some(Value::Array(items)) => items.iter().map(|e| self.element(page_id, e, warnings)).collect(),
            Some(_) => Err(shape(format!("{what} must be an array"))),
        }
    }
}

/// Parses a model's schema reply.
///
/// The first JSON object in `text` is taken, so fences and surrounding prose
/// are tolerated. With `context` (the schema built directly from the
/// detections) missing boxes, labels, page id and page size are filled from
/// it, `BoxN` references are mapped to element ids, and detected elements the
/// reply left out are appended to the orphans. The result is put in reading
/// order and must pass [`validate_schema`].
pub fn parse_schema_response_detailed(
    text: &str,
    context: Option<&LayoutSchema>,
) -> Result<SchemaParse, GenError> {
    let obj = extract_json_object(text).ok_or(GenError::SchemaNotFound)?;
    let ctx = Ctx {
        schema: context,
        elements: context
            .map(|c| c.elements().map(|e| (e.element_id.as_str(), e)).collect())
            .unwrap_or_default(),
        regions: context
            .map(|c| c.regions.iter().map(|r| (r.region_id.as_str(), r)).collect())
            .unwrap_or_default(),
    };
    let mut warnings = Vec::new();

    let page_id = str_field(&obj, "page_id")
        .map(str::to_string)
        .or_else(|| context.map(|c| c.page_id.clone()))
        .ok_or_else(|| shape("page_id missing"))?;
    let page_size = obj
        .get("page_size")
        .and_then(read_page_size)
        .or_else(|| context.map(|c| c.page_size))
        .ok_or_else(|| shape("page_size missing or not [width, height]"))?;

    let mut regions = Vec::new();
    match obj.get("regions") {
        None | Some(Value::Null) => {}
        Some(Value::Array(items)) => {
            for (k, item) in items.iter().enumerate() {
                let r = item
                    .as_object()
                    .ok_or_else(|| shape(format!("region {k} is not an object")))?;
                let region_id = str_field(r, "region_id")
                    .or_else(|| str_field(r, "id"))
                    .map(str::to_string)
                    .unwrap_or_else(|| format!("region{k}"));
                let known = ctx.regions.get(region_id.as_str()).copied();
                let bbox = r
                    .get("bbox")
                    .and_then(read_box)
                    .or(known.map(|k| k.bbox))
                    .ok_or_else(|| shape(format!("region {region_id} has no usable bbox")))?;
                let semantic_type = match str_field(r, "semantic_type").or_else(|| str_field(r, "type")) {
                    Some(name) => {
                        let t = SemanticType::from_name(name);
                        if t == SemanticType::Unknown && !name.eq_ignore_ascii_case("unknown") {
                            warnings.push(format!("{region_id}: unknown semantic type {name:?}"));
                        }
                        t
                    }
                    None => SemanticType::Unknown,
                };
                let children = ctx.elements(&page_id, r.get("children"), "children", &mut warnings)?;
                regions.push(RegionNode {
                    region_id,
                    bbox,
                    semantic_type,
                    description: str_field(r, "description").unwrap_or_default().to_string(),
                    children,
                });
            }
        }
        Some(_) => return Err(shape("regions must be an array")),
    }
    let mut orphans = ctx.elements(&page_id, obj.get("orphans"), "orphans", &mut warnings)?;

    if let Some(c) = context {
        let present: HashSet<&str> = regions
            .iter()
            .flat_map(|r| r.children.iter())
            .chain(orphans.iter())
            .map(|e| e.element_id.as_str())
            .collect();
        let missing: Vec<ElementRef> = c
            .elements()
            .filter(|e| !present.contains(e.element_id.as_str()))
            .cloned()
            .collect();
        for e in &missing {
            warnings.push(format!("{} missing from the reply; kept as an orphan", e.element_id));
        }
        orphans.extend(missing);
    }

    let mut schema = LayoutSchema {
        page_id,
        page_size,
        regions,
        orphans,
    };
    schema.normalize_order();
    let report = validate_schema(&schema);
    if !report.ok {
        return Err(GenError::SchemaInvalid(report));
    }
    Ok(SchemaParse { schema, warnings })
}

pub fn parse_schema_response(
    text: &str,
    context: Option<&LayoutSchema>,
) -> Result<LayoutSchema, GenError> {
    parse_schema_response_detailed(text, context).map(|p| p.schema)
}

/// Pulls an HTML document out of a reply: the first ```html fence, else the
/// first fence that looks like markup, else a bare `<!doctype`/`<html`
/// document, else the whole reply if it contains a tag.
pub fn extract_html(text: &str) -> Option<String> {
    let mut fences = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find("```") {
        let after = &rest[open + 3..];
        let (info, body) = after.split_once('\n').unwrap_or((after, ""));
        let Some(close) = body.find("```") else {
            break;
        };
        fences.push((info.trim().to_ascii_lowercase(), body[..close].trim()));
        rest = &body[close + 3..];
    }
    let fenced = fences
        .iter()
        .find(|(info, body)| info == "html" && !body.is_empty())
        .or_else(|| fences.iter().find(|(_, body)| body.starts_with('<')))
        .map(|(_, body)| body.to_string());
    if fenced.is_some() {
        return fenced;
    }

    let lower = text.to_ascii_lowercase();
    if let Some(start) = lower.find("<!doctype").or_else(|| lower.find("<html")) {
        let end = lower.rfind("</html>").map(|e| e + 7).filter(|&e| e > start).unwrap_or(text.len());
        return Some(text[start..end].trim().to_string());
    }
    let t = text.trim();
    (t.contains('<') && t.contains('>')).then(|| t.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Winner {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub winner: Winner,
    pub reasoning: String,
}

/// Value after `key:` on a line such as `**Winner:** ...`, matched
/// case-insensitively.
fn keyed_value<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    let l = line.trim_start_matches(|c: char| c.is_whitespace() || matches!(c, '*' | '#' | '-' | '>' | '_'));
    let head = l.get(..key.len())?;
    if !head.eq_ignore_ascii_case(key) {
        return None;
    }
    let rest = l[key.len()..].trim_start_matches(|c: char| c.is_whitespace() || c == '*' || c == '_');
    rest.strip_prefix(':').map(|v| v.trim_start_matches(['*', '_']).trim())
}

/// Reads the `WINNER:` line (first one wins) and the `REASONING:` block.
pub fn parse_judge_verdict(text: &str) -> Result<Verdict, GenError> {
    let lines: Vec<&str> = text.lines().collect();
    let (winner_line, raw) = lines
        .iter()
        .enumerate()
        .find_map(|(i, l)| keyed_value(l, "winner").map(|v| (i, v)))
        .ok_or_else(|| GenError::MalformedVerdict("no WINNER line".into()))?;

    let cleaned: String = raw
        .chars()
        .filter(|c| !matches!(c, '[' | ']' | '*' | '"' | '\'' | '`' | '.' | '_'))
        .collect();
    let cleaned = cleaned.split_whitespace().collect::<Vec<_>>().join(" ").to_ascii_uppercase();
    let winner = match cleaned.as_str() {
        "METHOD A" | "METHODA" | "A" => Winner::A,
        "METHOD B" | "METHODB" | "B" => Winner::B,
        _ => return Err(GenError::MalformedVerdict(format!("unrecognised winner {raw:?}"))),
    };

    let reasoning = lines
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != winner_line)
        .find_map(|(i, l)| keyed_value(l, "reasoning").map(|v| (i, v)))
        .map(|(i, first)| {
            let mut parts = vec![first.to_string()];
            parts.extend(lines[i + 1..].iter().map(|l| l.to_string()));
            parts.join("\n").trim().to_string()
        })
        .unwrap_or_default();
    Ok(Verdict { winner, reasoning })
}

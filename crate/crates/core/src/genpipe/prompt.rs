//! Prompt values, their request fingerprints, and the three prompt builders.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{GenError, TemplateSet};
use crate::detect::{
    fmt_number, render_element_listing, serialize_detections, AssetEntry, AssetRepository,
    Detection, DetectionSet, PageSize,
};
use crate::geometry::ScoredBox;
use crate::schema::{reading_order, ElementRef, LayoutSchema};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ImageSource {
    File(PathBuf),
    Inline { media_type: String, data: Vec<u8> },
}

/// An image sent with a prompt. The text refers to it as `[image:<role>]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attachment {
    pub role: String,
    pub source: ImageSource,
    /// Hex SHA-256 of the image bytes.
    pub digest: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Attachment {
    /// Reads the file once to digest it; a missing file is an error.
    pub fn file(role: &str, path: impl Into<PathBuf>) -> Result<Self, GenError> {
        let path = path.into();
        let bytes = fs::read(&path).map_err(|e| GenError::MissingImage {
            role: role.to_string(),
            path: path.clone(),
            reason: e.to_string(),
        })?;
        Ok(Self {
            role: role.to_string(),
            digest: sha256_hex(&bytes),
            source: ImageSource::File(path),
        })
    }

    pub fn inline(role: &str, media_type: &str, data: Vec<u8>) -> Self {
        Self {
            role: role.to_string(),
            digest: sha256_hex(&data),
            source: ImageSource::Inline {
                media_type: media_type.to_string(),
                data,
            },
        }
    }

    pub fn token(&self) -> String {
        format!("[image:{}]", self.role)
    }

    pub fn media_type(&self) -> String {
        match &self.source {
            ImageSource::Inline { media_type, .. } => media_type.clone(),
            ImageSource::File(p) => {
                let ext = p
                    .extension()
                    .map(|e| e.to_string_lossy().to_ascii_lowercase())
                    .unwrap_or_default();
                match ext.as_str() {
                    "jpg" | "jpeg" => "image/jpeg",
                    "webp" => "image/webp",
                    "gif" => "image/gif",
                    _ => "image/png",
                }
                .to_string()
            }
        }
    }

    pub fn bytes(&self) -> Result<Vec<u8>, GenError> {
        match &self.source {
            ImageSource::Inline { data, .. } => Ok(data.clone()),
            ImageSource::File(p) => fs::read(p).map_err(|e| GenError::MissingImage {
                role: self.role.clone(),
                path: p.clone(),
                reason: e.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub system: String,
    pub user: String,
    pub attachments: Vec<Attachment>,
}

fn image_tokens(text: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut rest = text;
    while let Some(start) = rest.find("[image:") {
        let after = &rest[start + 7..];
        match after.find(']') {
            Some(end) => {
                out.insert(after[..end].to_string());
                rest = &after[end + 1..];
            }
            None => break,
        }
    }
    out
}

impl Prompt {
    /// Checks that the user text is nonempty and that attachment roles and
    /// `[image:<role>]` tokens in the text correspond one to one.
    pub fn new(
        system: impl Into<String>,
        user: impl Into<String>,
        attachments: Vec<Attachment>,
    ) -> Result<Self, GenError> {
        let p = Self {
            system: system.into(),
            user: user.into(),
            attachments,
        };
        if p.user.trim().is_empty() {
            return Err(GenError::InvalidPrompt("user text is empty".into()));
        }
        let mut tokens = image_tokens(&p.system);
        tokens.extend(image_tokens(&p.user));
        let mut roles = BTreeSet::new();
        for a in &p.attachments {
            if !roles.insert(a.role.clone()) {
                return Err(GenError::InvalidPrompt(format!("duplicate attachment role '{}'", a.role)));
            }
            if !tokens.contains(&a.role) {
                return Err(GenError::InvalidPrompt(format!(
                    "attachment '{}' is not referenced in the text",
                    a.role
                )));
            }
        }
        if let Some(t) = tokens.difference(&roles).next() {
            return Err(GenError::InvalidPrompt(format!("[image:{t}] has no attachment")));
        }
        Ok(p)
    }

    /// Hex SHA-256 over system text, user text and attachment digests in
    /// order. The model name and file paths do not take part, so recorded
    /// responses carry over between backbones and machines.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        let mut field = |bytes: &[u8]| {
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(bytes);
        };
        field(self.system.as_bytes());
        field(self.user.as_bytes());
        for a in &self.attachments {
            field(a.digest.as_bytes());
        }
        hex::encode(h.finalize())
    }

    /// Human-readable dump written next to pipeline outputs.
    pub fn to_text(&self) -> String {
        let mut out = format!("=== system\n{}\n=== user\n{}\n=== attachments\n", self.system, self.user);
        for a in &self.attachments {
            let origin = match &a.source {
                ImageSource::File(p) => p.display().to_string(),
                ImageSource::Inline { data, .. } => format!("inline, {} bytes", data.len()),
            };
            out.push_str(&format!("{} {} sha256:{} {}\n", a.role, a.media_type(), a.digest, origin));
        }
        out.push_str(&format!("=== fingerprint\n{}\n", self.fingerprint()));
        out
    }
}

/// Collapses the blank-line runs left behind by empty optional sections.
fn tidy(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut newlines = 0;
    for c in text.trim().chars() {
        if c == '\n' {
            newlines += 1;
            if newlines > 2 {
                continue;
            }
        } else {
            newlines = 0;
        }
        out.push(c);
    }
    out
}

fn element_line(e: &ElementRef) -> String {
    let b = e.bbox;
    let mut line = format!(
        "- {}: x={}, y={}, width={}, height={}",
        e.element_id,
        fmt_number(b.x),
        fmt_number(b.y),
        fmt_number(b.w),
        fmt_number(b.h)
    );
    if !e.label.is_empty() {
        line.push_str(&format!(", label={}", e.label));
    }
    line
}

/// Path of an asset as written in prompts: relative to the directory that
/// holds the repository root, with `/` separators.
pub fn asset_prompt_path(repo: &AssetRepository, path: &Path) -> String {
    let base = repo
        .root
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let rel: Vec<String> = path
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect();
    if base.is_empty() {
        rel.join("/")
    } else {
        format!("{base}/{}", rel.join("/"))
    }
}

fn asset_line(repo: &AssetRepository, e: &ElementRef, entry: &AssetEntry) -> String {
    let mut line = format!("- {}: {}", e.element_id, asset_prompt_path(repo, &entry.path));
    let mut notes = Vec::new();
    if !e.label.is_empty() {
        notes.push(e.label.clone());
    }
    if entry.transparent {
        notes.push("transparent icon".to_string());
    } else {
        notes.push("content image".to_string());
    }
    line.push_str(&format!(" ({})", notes.join(", ")));
    if let Some(bg) = &entry.background_removed {
        line.push_str(&format!("; background removed: {}", asset_prompt_path(repo, bg)));
    }
    line
}

/// Prompt asking the model for a layout schema. Regions are listed in reading
/// order in the detection-file JSON layout, elements as `BoxN:` lines where
/// `N` is the element's index in `elements`.
pub fn build_schema_prompt(
    regions: &[ScoredBox],
    elements: &DetectionSet,
    page_size: PageSize,
    screenshot: Attachment,
    templates: &TemplateSet,
) -> Result<Prompt, GenError> {
    let mut ordered: Vec<ScoredBox> = regions.to_vec();
    ordered.sort_by(|a, b| reading_order(&a.bbox, &b.bbox));
    let mut region_set = DetectionSet::new(elements.page_id.clone(), Some(page_size));
    region_set.detections = ordered
        .iter()
        .map(|r| Detection::new(r.bbox, r.score, r.category))
        .collect();
    let regions_json = serialize_detections(&region_set);

    let t = &templates.schema;
    let elements_section = if elements.is_empty() {
        t.render("elements_absent", &[])?
    } else {
        let listing = render_element_listing(elements);
        t.render("elements_present", &[("element_listing", &listing)])?
    };
    let (w, h) = (page_size.width.to_string(), page_size.height.to_string());
    let vars = [
        ("page_id", elements.page_id.as_str()),
        ("page_width", w.as_str()),
        ("page_height", h.as_str()),
        ("regions_json", regions_json.as_str()),
        ("elements_section", elements_section.as_str()),
    ];
    Prompt::new(
        tidy(&t.render("system", &vars)?),
        tidy(&t.render("user", &vars)?),
        vec![screenshot],
    )
}

/// Prompt asking for the final HTML. Every element in the schema must have
/// an entry in `assets`.
pub fn build_html_prompt(
    structure: &LayoutSchema,
    assets: &AssetRepository,
    screenshot: Attachment,
    templates: &TemplateSet,
) -> Result<Prompt, GenError> {
    let t = &templates.html;
    let mut asset_lines = Vec::new();
    for e in structure.elements() {
        let entry = assets
            .get(&e.element_id)
            .ok_or_else(|| GenError::UnresolvedAsset(e.element_id.clone()))?;
        asset_lines.push(asset_line(assets, e, entry));
    }
    let assets_section = if asset_lines.is_empty() {
        t.render("assets_absent", &[])?
    } else {
        t.render("assets_present", &[("asset_lines", &asset_lines.join("\n"))])?
    };
    let orphans_section = if structure.orphans.is_empty() {
        String::new()
    } else {
        let lines: Vec<String> = structure.orphans.iter().map(element_line).collect();
        t.render("orphans_present", &[("orphan_lines", &lines.join("\n"))])?
    };
    let schema_json = structure.to_canonical_json();
    let (w, h) = (
        structure.page_size.width.to_string(),
        structure.page_size.height.to_string(),
    );
    let vars = [
        ("page_id", structure.page_id.as_str()),
        ("page_width", w.as_str()),
        ("page_height", h.as_str()),
        ("schema_json", schema_json.as_str()),
        ("orphans_section", orphans_section.as_str()),
        ("assets_section", assets_section.as_str()),
    ];
    Prompt::new(
        tidy(&t.render("system", &vars)?),
        tidy(&t.render("user", &vars)?),
        vec![screenshot],
    )
}

/// Pairwise preference prompt: the reference design, then candidates A and B.
/// The same image may be given for both candidates.
pub fn build_judge_prompt(
    reference: &Path,
    candidate_a: &Path,
    candidate_b: &Path,
    templates: &TemplateSet,
) -> Result<Prompt, GenError> {
    let attachments = vec![
        Attachment::file("reference", reference)?,
        Attachment::file("method_a", candidate_a)?,
        Attachment::file("method_b", candidate_b)?,
    ];
    let t = &templates.judge;
    Prompt::new(t.render("system", &[])?, t.render("user", &[])?, attachments)
}

//! End-to-end generation for one page.
//!
//! Steps, numbered as reported in errors:
//! 1. load the screenshot
//! 2. read the segmentation regions
//! 3. optimize the regions
//! 4. read, fuse and crop the detected elements
//! 5. build the schema prompt
//! 6. model call for the schema
//! 7. parse the schema
//! 8. build the HTML prompt
//! 9. model call for the HTML
//!
//! Every intermediate artifact is written under `<work_dir>/<page_id>/`.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    build_html_prompt, build_schema_prompt, extract_html, parse_schema_response_detailed,
    Attachment, BackendKind, GenError, Prompt, TemplateSet, VlmBackend,
};
use crate::detect::{
    crop_elements, default_routing, fuse_detections, parse_detection_file, serialize_detections,
    serialize_detections_annotated, AssetRepository, ClassRoutingTable, Detection, DetectionSet,
    PageImage, PageSize,
};
use crate::geometry::{optimize_boxes, OptimizationConfig, ScoredBox};
use crate::schema::{schema_from_detections, LayoutSchema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    LoadImage,
    ReadRegions,
    OptimizeRegions,
    DetectElements,
    BuildSchemaPrompt,
    SchemaCall,
    ParseSchema,
    BuildHtmlPrompt,
    HtmlCall,
}

impl Stage {
    pub fn step(self) -> u8 {
        self as u8 + 1
    }

    pub fn name(self) -> &'static str {
        match self {
            Stage::LoadImage => "load image",
            Stage::ReadRegions => "read regions",
            Stage::OptimizeRegions => "optimize regions",
            Stage::DetectElements => "detect elements",
            Stage::BuildSchemaPrompt => "build schema prompt",
            Stage::SchemaCall => "schema generation",
            Stage::ParseSchema => "parse schema",
            Stage::BuildHtmlPrompt => "build html prompt",
            Stage::HtmlCall => "html generation",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step {} ({})", self.step(), self.name())
    }
}

/// Input files for one page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageInputs {
    pub page_id: String,
    pub screenshot: PathBuf,
    /// Segmentation output in the detection-file format.
    pub regions: PathBuf,
    pub global: PathBuf,
    pub dense: PathBuf,
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub optimization: OptimizationConfig,
    pub routing: ClassRoutingTable,
    pub templates: TemplateSet,
    pub work_dir: PathBuf,
    /// Extra attempts per model call after a backend failure, with the same
    /// prompt. Cassette misses are never retried.
    pub retries: u32,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            optimization: OptimizationConfig::default(),
            routing: default_routing(),
            templates: TemplateSet::builtin(),
            work_dir: PathBuf::from("work"),
            retries: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub backend: BackendKind,
    pub model: String,
    pub cassette_id: Option<String>,
    pub template_version: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedPage {
    pub page_id: String,
    pub schema: LayoutSchema,
    pub html: String,
    pub provenance: Provenance,
    pub warnings: Vec<String>,
    pub work_dir: PathBuf,
}

pub const OPTIMIZED_REGIONS_FILE: &str = "optimized_regions.json";
pub const FUSED_ELEMENTS_FILE: &str = "fused_elements.json";
pub const SCHEMA_FILE: &str = "schema.json";
pub const SCHEMA_PROMPT_FILE: &str = "prompt_schema.txt";
pub const HTML_PROMPT_FILE: &str = "prompt_html.txt";
pub const HTML_FILE: &str = "out.html";
pub const PROVENANCE_FILE: &str = "provenance.json";
pub const ASSETS_DIR: &str = "assets";

fn at<T, E: Into<GenError>>(stage: Stage, r: Result<T, E>) -> Result<T, GenError> {
    r.map_err(|e| GenError::Stage {
        stage,
        source: Box::new(e.into()),
    })
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), GenError> {
    fs::write(dir.join(name), contents).map_err(GenError::from)
}

fn call(backend: &dyn VlmBackend, prompt: &Prompt, retries: u32) -> Result<String, GenError> {
    let mut attempt = 0;
    loop {
        match backend.complete(prompt) {
            Err(GenError::Backend(_)) if attempt < retries => attempt += 1,
            other => return other,
        }
    }
}

fn read_detections(path: &Path, page_id: &str, size: PageSize) -> Result<DetectionSet, GenError> {
    let bytes = fs::read(path).map_err(|e| GenError::Input(format!("{}: {e}", path.display())))?;
    let set = parse_detection_file(&bytes)
        .map_err(|e| GenError::Input(format!("{}: {e}", path.display())))?;
    Ok(set.with_page(page_id, size))
}

struct Detected {
    assets: AssetRepository,
    context: LayoutSchema,
    fused: DetectionSet,
    warnings: Vec<String>,
}

/// Fuses both detectors, drops elements that clamp to nothing, crops assets
/// and builds the detection-only schema used to backfill the model's reply.
fn detect_elements(
    inputs: &PageInputs,
    image: &PageImage,
    size: PageSize,
    regions: &[ScoredBox],
    dir: &Path,
    routing: &ClassRoutingTable,
) -> Result<Detected, GenError> {
    let page_id = inputs.page_id.as_str();
    let mut warnings = Vec::new();
    let global = read_detections(&inputs.global, page_id, size)?;
    let dense = read_detections(&inputs.dense, page_id, size)?;
    let mut fused = fuse_detections(&global, &dense, routing)?;
    fused.clamp_to_page();
    let before = fused.len();
    fused.detections.retain(|d| d.bbox.area() > 0.0);
    if fused.len() < before {
        warnings.push(format!("{} element(s) off the page dropped", before - fused.len()));
    }
    write(dir, FUSED_ELEMENTS_FILE, &serialize_detections_annotated(&fused))?;

    let assets_root = dir.join(ASSETS_DIR);
    if assets_root.exists() {
        fs::remove_dir_all(&assets_root)?;
    }
    let assets = crop_elements(image, &fused, AssetRepository::new(assets_root))?;
    warnings.extend(assets.warnings.iter().cloned());
    let (context, w) = schema_from_detections(regions, &fused, size)?;
    warnings.extend(w);
    Ok(Detected {
        assets,
        context,
        fused,
        warnings,
    })
}

/// Runs all nine steps for one page. With a replay backend the outputs are a
/// pure function of the input files.
pub fn run_pipeline(
    inputs: &PageInputs,
    backend: &dyn VlmBackend,
    cfg: &PipelineConfig,
) -> Result<GeneratedPage, GenError> {
    let page_id = inputs.page_id.as_str();
    let dir = cfg.work_dir.join(page_id);
    let mut warnings = Vec::new();

    let image = at(
        Stage::LoadImage,
        image::open(&inputs.screenshot).map(|i| i.to_rgba8()),
    )?;
    let size = PageSize::new(image.width(), image.height());
    at(Stage::LoadImage, fs::create_dir_all(&dir))?;

    let regions = at(Stage::ReadRegions, read_detections(&inputs.regions, page_id, size))?;

    let optimized: Vec<ScoredBox> =
        at(Stage::OptimizeRegions, optimize_boxes(&regions.scored_boxes(), &cfg.optimization))?;
    let mut optimized_set = DetectionSet::new(page_id, Some(size));
    optimized_set.detections = optimized
        .iter()
        .map(|r| Detection::new(r.bbox, r.score, r.category))
        .collect();
    at(
        Stage::OptimizeRegions,
        write(&dir, OPTIMIZED_REGIONS_FILE, &serialize_detections(&optimized_set)),
    )?;

    let detected = at(
        Stage::DetectElements,
        detect_elements(inputs, &image, size, &optimized, &dir, &cfg.routing),
    )?;
    warnings.extend(detected.warnings);
    let (assets, context, fused) = (detected.assets, detected.context, detected.fused);

    let schema_prompt = at(Stage::BuildSchemaPrompt, (|| {
        let shot = Attachment::file("screenshot", &inputs.screenshot)?;
        let p = build_schema_prompt(&optimized, &fused, size, shot, &cfg.templates)?;
        write(&dir, SCHEMA_PROMPT_FILE, &p.to_text())?;
        Ok::<_, GenError>(p)
    })())?;

    let schema_reply = at(Stage::SchemaCall, call(backend, &schema_prompt, cfg.retries))?;

    let parsed = at(Stage::ParseSchema, parse_schema_response_detailed(&schema_reply, Some(&context)))?;
    warnings.extend(parsed.warnings);
    let schema = parsed.schema;
    at(Stage::ParseSchema, write(&dir, SCHEMA_FILE, &schema.to_canonical_json()))?;

    let html_prompt = at(Stage::BuildHtmlPrompt, (|| {
        let shot = Attachment::file("screenshot", &inputs.screenshot)?;
        let p = build_html_prompt(&schema, &assets, shot, &cfg.templates)?;
        write(&dir, HTML_PROMPT_FILE, &p.to_text())?;
        Ok::<_, GenError>(p)
    })())?;

    let html_reply = at(Stage::HtmlCall, call(backend, &html_prompt, cfg.retries))?;
    let html = at(Stage::HtmlCall, extract_html(&html_reply).ok_or(GenError::HtmlNotFound))?;
    at(Stage::HtmlCall, write(&dir, HTML_FILE, &html))?;

    let provenance = Provenance {
        backend: backend.kind(),
        model: backend.model().to_string(),
        cassette_id: backend.cassette_id(),
        template_version: cfg.templates.version.clone(),
    };
    at(
        Stage::HtmlCall,
        write(
            &dir,
            PROVENANCE_FILE,
            &serde_json::to_string_pretty(&provenance).expect("provenance serializes"),
        ),
    )?;

    Ok(GeneratedPage {
        page_id: page_id.to_string(),
        schema,
        html,
        provenance,
        warnings,
        work_dir: dir,
    })
}

//! Corpus-level runs: manifests, batch generation and evaluation, dataset
//! statistics.

mod manifest;
mod report;
mod stats;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::detect::{
    fuse_detections, parse_detection_file, ClassRoutingTable, DetectError, PageSize,
};
use crate::fidelity::{load_blocks, score_page, FidelityError, FineGrainedScores};
use crate::genpipe::{run_pipeline, GenError, GeneratedPage, PipelineConfig, VlmBackend, HTML_FILE};
use crate::geometry::{optimize_boxes, BoundingBox, GeometryError, OptimizationConfig};

pub use manifest::{CorpusManifest, ManifestPage};
pub use report::{aggregate_reports, EvalReport, PageScore, ReportMetadata};
pub use stats::{
    compute_eval_stats, compute_layout_stats, count_tokens, parse_annotations, BenchmarkStats,
    LayoutStats, PageAnnotation, Summary, DEFAULT_LARGE_THRESHOLD,
};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("no pages")]
    Empty,
    #[error("large-element threshold must lie in (0, 1), got {0}")]
    InvalidThreshold(f64),
    #[error("page {page_id}: {message}")]
    Annotation { page_id: String, message: String },
    #[error("duplicate page id {0}")]
    DuplicatePage(String),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("page {page_id}: missing file {}", path.display())]
    MissingFile { page_id: String, path: PathBuf },
    #[error("page {page_id}: {source}")]
    Page {
        page_id: String,
        #[source]
        source: Box<CorpusError>,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Fidelity(#[from] FidelityError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("image: {0}")]
    Image(#[from] image::ImageError),
    #[error("thread pool: {0}")]
    Pool(String),
}

impl CorpusError {
    fn on_page(self, page_id: &str) -> Self {
        CorpusError::Page {
            page_id: page_id.to_string(),
            source: Box::new(self),
        }
    }
}

fn pool(parallelism: usize) -> Result<rayon::ThreadPool, CorpusError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| CorpusError::Pool(e.to_string()))
}

/// Per-page generation outcomes, keyed by page id.
pub type PageResults = Vec<(String, Result<GeneratedPage, GenError>)>;

/// Runs the pipeline for every page. Results keep manifest order; one page
/// failing does not stop the others.
pub fn generate_corpus(
    manifest: &CorpusManifest,
    backend: &dyn VlmBackend,
    cfg: &PipelineConfig,
    parallelism: usize,
) -> Result<PageResults, CorpusError> {
    let pool = pool(parallelism)?;
    Ok(pool.install(|| {
        manifest
            .pages
            .par_iter()
            .map(|p| (p.page_id.clone(), run_pipeline(&p.inputs(), backend, cfg)))
            .collect()
    }))
}

pub fn screenshot_size(path: &Path) -> Result<PageSize, CorpusError> {
    let (w, h) = image::image_dimensions(path)?;
    Ok(PageSize::new(w, h))
}

/// Scores one generated page against its reference. Either side may be HTML
/// or a `.json` block sidecar. Returns the scores and layout warnings.
pub fn evaluate_page(
    generated: &Path,
    reference: &Path,
    viewport: PageSize,
) -> Result<(FineGrainedScores, Vec<String>), CorpusError> {
    let g = load_blocks(generated, viewport)?;
    let r = load_blocks(reference, viewport)?;
    let mut warnings: Vec<String> = g.warnings.iter().map(|w| format!("generated: {w}")).collect();
    warnings.extend(r.warnings.iter().map(|w| format!("reference: {w}")));
    Ok((score_page(&g.blocks, &r.blocks, viewport), warnings))
}

/// Scores `<work_dir>/<page_id>/out.html` against each page's reference.
/// Pages without a reference are skipped; the viewport is the screenshot size.
pub fn evaluate_corpus(
    manifest: &CorpusManifest,
    work_dir: &Path,
    parallelism: usize,
) -> Result<Vec<(String, FineGrainedScores)>, CorpusError> {
    let pages: Vec<&ManifestPage> = manifest.pages.iter().filter(|p| p.gt_html.is_some()).collect();
    if pages.is_empty() {
        return Err(CorpusError::Empty);
    }
    let pool = pool(parallelism)?;
    pool.install(|| {
        pages
            .par_iter()
            .map(|p| {
                let run = || {
                    let size = screenshot_size(&p.screenshot)?;
                    let gt = p.gt_html.as_deref().expect("filtered above");
                    let generated = work_dir.join(&p.page_id).join(HTML_FILE);
                    evaluate_page(&generated, gt, size).map(|(s, _)| s)
                };
                run().map(|s| (p.page_id.clone(), s)).map_err(|e| e.on_page(&p.page_id))
            })
            .collect()
    })
}

fn read_set(path: &Path, page_id: &str, size: PageSize) -> Result<crate::detect::DetectionSet, CorpusError> {
    let bytes = std::fs::read(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(parse_detection_file(&bytes)?.with_page(page_id, size))
}

/// Builds statistics input from a manifest: optimized regions as layout
/// boxes, fused detections as elements, and per-box token counts from the
/// reference page's text blocks (by block center). Pages without a reference
/// get zero counts.
pub fn annotations_from_manifest(
    manifest: &CorpusManifest,
    optimization: &OptimizationConfig,
    routing: &ClassRoutingTable,
) -> Result<Vec<PageAnnotation>, CorpusError> {
    manifest
        .pages
        .iter()
        .map(|p| {
            let run = || {
                let size = screenshot_size(&p.screenshot)?;
                let regions = read_set(&p.regions, &p.page_id, size)?;
                let layout_boxes: Vec<BoundingBox> = optimize_boxes(&regions.scored_boxes(), optimization)?
                    .iter()
                    .map(|b| b.bbox.clamp_to(size.width as f64, size.height as f64))
                    .filter(|b| b.area() > 0.0)
                    .collect();
                let global = read_set(&p.global, &p.page_id, size)?;
                let dense = read_set(&p.dense, &p.page_id, size)?;
                let mut fused = fuse_detections(&global, &dense, routing)?;
                fused.clamp_to_page();
                fused.detections.retain(|d| d.bbox.area() > 0.0);
                let counts = match &p.gt_html {
                    Some(gt) => {
                        let blocks = load_blocks(gt, size)?.blocks;
                        layout_boxes
                            .iter()
                            .map(|b| {
                                blocks
                                    .iter()
                                    .filter(|blk| {
                                        let (cx, cy) = blk.bbox.center();
                                        b.contains_point(cx, cy)
                                    })
                                    .map(|blk| count_tokens(&blk.text))
                                    .sum()
                            })
                            .collect()
                    }
                    None => vec![0; layout_boxes.len()],
                };
                PageAnnotation::new(p.page_id.clone(), size, layout_boxes, fused.detections, counts)
            };
            run().map_err(|e| e.on_page(&p.page_id))
        })
        .collect()
}

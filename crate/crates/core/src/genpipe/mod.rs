//! Generation pipeline: prompts, model backends with record/replay,
//! response parsing, and the pairwise judge protocol.

mod backend;
mod pipeline;
mod prompt;
mod response;
mod template;

use std::path::PathBuf;

use thiserror::Error;

use crate::detect::DetectError;
use crate::geometry::GeometryError;
use crate::schema::{SchemaError, ValidationReport};

pub use backend::{
    BackendKind, Cassette, CassetteRecord, FnBackend, HttpChatBackend, HttpConfig,
    RecordingBackend, ReplayBackend, VlmBackend,
};
pub use pipeline::{
    run_pipeline, GeneratedPage, PageInputs, PipelineConfig, Provenance, Stage, ASSETS_DIR,
    FUSED_ELEMENTS_FILE, HTML_FILE, HTML_PROMPT_FILE, OPTIMIZED_REGIONS_FILE, PROVENANCE_FILE,
    SCHEMA_FILE, SCHEMA_PROMPT_FILE,
};
pub use prompt::{
    asset_prompt_path, build_html_prompt, build_judge_prompt, build_schema_prompt, Attachment,
    ImageSource, Prompt,
};
pub use response::{
    extract_html, extract_json_object, json_object_spans, parse_judge_verdict,
    parse_schema_response, parse_schema_response_detailed, SchemaParse, Verdict, Winner,
};
pub use template::{Template, TemplateSet};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("template: {0}")]
    Template(String),
    #[error("invalid prompt: {0}")]
    InvalidPrompt(String),
    #[error("{role} image {path}: {reason}")]
    MissingImage {
        role: String,
        path: PathBuf,
        reason: String,
    },
    #[error("element {0} has no entry in the asset repository")]
    UnresolvedAsset(String),
    #[error("no JSON object found in the schema response")]
    SchemaNotFound,
    #[error("schema response has the wrong shape: {0}")]
    SchemaShape(String),
    #[error("schema response failed validation: {0}")]
    SchemaInvalid(ValidationReport),
    #[error("no HTML document found in the response")]
    HtmlNotFound,
    #[error("malformed verdict: {0}")]
    MalformedVerdict(String),
    #[error("cassette: {0}")]
    Cassette(String),
    #[error("cassette has no response for request fingerprint {fingerprint}")]
    CassetteMiss { fingerprint: String },
    #[error("backend: {0}")]
    Backend(String),
    #[error("config: {0}")]
    Config(String),
    #[error("input: {0}")]
    Input(String),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{stage}: {source}")]
    Stage {
        stage: Stage,
        source: Box<GenError>,
    },
}

impl GenError {
    /// Stable machine-readable code. Stage wrappers report the inner code.
    pub fn code(&self) -> &'static str {
        match self {
            GenError::Template(_) => "TEMPLATE",
            GenError::InvalidPrompt(_) => "INVALID_PROMPT",
            GenError::MissingImage { .. } => "MISSING_IMAGE",
            GenError::UnresolvedAsset(_) => "UNRESOLVED_ASSET",
            GenError::SchemaNotFound => "SCHEMA_NOT_FOUND",
            GenError::SchemaShape(_) | GenError::SchemaInvalid(_) => "SCHEMA_INVALID",
            GenError::HtmlNotFound => "HTML_NOT_FOUND",
            GenError::MalformedVerdict(_) => "MALFORMED_VERDICT",
            GenError::Cassette(_) => "CASSETTE",
            GenError::CassetteMiss { .. } => "CASSETTE_MISS",
            GenError::Backend(_) => "BACKEND",
            GenError::Config(_) => "CONFIG",
            GenError::Input(_) | GenError::Detect(_) | GenError::Image(_) => "INPUT",
            GenError::Geometry(_) => "GEOMETRY",
            GenError::Schema(_) => "SCHEMA",
            GenError::Io(_) => "IO",
            GenError::Stage { source, .. } => source.code(),
        }
    }

    /// The failing pipeline stage, if the error came from [`run_pipeline`].
    pub fn stage(&self) -> Option<Stage> {
        match self {
            GenError::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }

    /// Innermost error beneath any stage wrapper.
    pub fn root(&self) -> &GenError {
        match self {
            GenError::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

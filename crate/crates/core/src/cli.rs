//! Command-line front end. Each subcommand wraps one library operation.
//!
//! Exit status: 0 success, 1 invalid input or failed validation, 2 I/O or
//! backend failure (including usage errors).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::corpus::{
    aggregate_reports, annotations_from_manifest, compute_eval_stats, compute_layout_stats,
    evaluate_corpus, evaluate_page, generate_corpus, parse_annotations, CorpusError,
    CorpusManifest, ReportMetadata, DEFAULT_LARGE_THRESHOLD,
};
use crate::detect::{
    default_routing, fuse_detections, parse_detection_file, serialize_detections,
    serialize_detections_annotated, ClassRoutingTable, DetectError, Detection, DetectionSet,
    PageSize,
};
use crate::fidelity::{FidelityError, FineGrainedScores};
use crate::genpipe::{
    build_judge_prompt, parse_judge_verdict, GenError, HttpChatBackend, HttpConfig, PipelineConfig,
    Provenance, RecordingBackend, ReplayBackend, TemplateSet, VlmBackend, Winner, PROVENANCE_FILE,
};
use crate::geometry::{optimize_boxes, GeometryError, OptimizationConfig};
use crate::schema::{schema_from_detections, validate_schema, LayoutSchema};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_IO: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "design2code", version, about = "Screenshot-to-HTML generation and evaluation tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Resolve overlapping layout regions in a detection file.
    Optimize(OptimizeArgs),
    /// Merge global and dense detector outputs by class routing.
    Fuse(FuseArgs),
    /// Build a layout schema from regions and elements, or validate one.
    Schema(SchemaArgs),
    /// Run the generation pipeline over every page of a manifest.
    Generate(GenerateArgs),
    /// Ask a model which of two renderings better matches a reference.
    Judge(JudgeArgs),
    /// Score generated pages against references.
    Eval(EvalArgs),
    /// Dataset statistics over annotations or a manifest.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
struct ThresholdArgs {
    /// Overlap (IoU) above which two regions conflict, in (0, 1).
    #[arg(long, default_value_t = 0.2)]
    iou: f64,
    /// Score ratio a region needs to displace an overlapping one, > 1.
    #[arg(long, default_value_t = 1.2)]
    factor: f64,
}

#[derive(Debug, Args)]
struct RoutingArgs {
    /// Class routing table (JSON). Defaults to the built-in table.
    #[arg(long)]
    routing: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendChoice {
    /// Serve responses from a cassette; no network access.
    Replay,
    /// Chat-completions endpoint from the config file.
    Http,
}

#[derive(Debug, Args)]
struct BackendArgs {
    #[arg(long, value_enum, default_value_t = BackendChoice::Replay)]
    backend: BackendChoice,
    /// Cassette file. Required for replay; with http, new responses are recorded into it.
    #[arg(long)]
    cassette: Option<PathBuf>,
    /// Key-value backend config (endpoint, model, token_env, temperature, timeout_secs, max_in_flight).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory holding schema.txt, html.txt and judge.txt. Defaults to the built-in templates.
    #[arg(long)]
    templates: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OptimizeArgs {
    /// Region detections (JSON array of category_id/bbox/score).
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    #[command(flatten)]
    thresholds: ThresholdArgs,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FuseArgs {
    /// Global-detector output.
    #[arg(long)]
    global: PathBuf,
    /// Dense-detector output.
    #[arg(long)]
    dense: PathBuf,
    #[command(flatten)]
    routing: RoutingArgs,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SchemaArgs {
    /// Layout regions (detection format).
    #[arg(long, required_unless_present = "check", requires_all = ["elements", "page"])]
    regions: Option<PathBuf>,
    /// Page elements (detection format), e.g. the output of `fuse`.
    #[arg(long)]
    elements: Option<PathBuf>,
    /// Page size as WIDTHxHEIGHT.
    #[arg(long, value_parser = parse_page_size)]
    page: Option<PageSize>,
    /// Page id used to name elements.
    #[arg(long, default_value = "page")]
    page_id: String,
    /// Run region optimization before building.
    #[arg(long)]
    optimize: bool,
    #[command(flatten)]
    thresholds: ThresholdArgs,
    /// Validate an existing schema file instead of building one.
    #[arg(long, conflicts_with_all = ["regions", "elements", "page"])]
    check: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Corpus manifest (JSON).
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    backend: BackendArgs,
    /// Directory receiving one subdirectory per page.
    #[arg(long, default_value = "work")]
    work_dir: PathBuf,
    /// Pages processed at once.
    #[arg(long, default_value_t = 1)]
    parallelism: usize,
    /// Extra attempts per model call after a backend error.
    #[arg(long, default_value_t = 0)]
    retries: u32,
    #[command(flatten)]
    thresholds: ThresholdArgs,
    #[command(flatten)]
    routing: RoutingArgs,
}

#[derive(Debug, Args)]
struct JudgeArgs {
    /// Reference design screenshot.
    #[arg(long)]
    reference: PathBuf,
    /// Rendering of method A.
    #[arg(long = "a", value_name = "IMAGE")]
    method_a: PathBuf,
    /// Rendering of method B.
    #[arg(long = "b", value_name = "IMAGE")]
    method_b: PathBuf,
    #[command(flatten)]
    backend: BackendArgs,
    /// Print the verdict as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Generated page (HTML, or a .json block file).
    #[arg(long = "gen", value_name = "FILE", requires_all = ["gt", "page"], conflicts_with = "manifest")]
    generated: Option<PathBuf>,
    /// Reference page (HTML, or a .json block file).
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Viewport as WIDTHxHEIGHT.
    #[arg(long, value_parser = parse_page_size)]
    page: Option<PageSize>,
    /// Score every page of a manifest that has a reference.
    #[arg(long, required_unless_present = "generated")]
    manifest: Option<PathBuf>,
    /// Directory written by `generate`.
    #[arg(long, default_value = "work")]
    work_dir: PathBuf,
    /// Pages scored at once.
    #[arg(long, default_value_t = 1)]
    parallelism: usize,
    /// Write the JSON report here (manifest mode).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct StatsArgs {
    /// Annotation file (JSON array of pages).
    #[arg(long, required_unless_present = "manifest", conflicts_with = "manifest")]
    annotations: Option<PathBuf>,
    /// Derive annotations from a manifest instead.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Minimum element area, as a fraction of the page, counted as large.
    #[arg(long, default_value_t = DEFAULT_LARGE_THRESHOLD)]
    large_threshold: f64,
    #[command(flatten)]
    thresholds: ThresholdArgs,
    #[command(flatten)]
    routing: RoutingArgs,
}

/// Settings shared by the corpus-level subcommands.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub config_path: Option<PathBuf>,
    pub backend: BackendChoice,
    pub work_dir: PathBuf,
    pub parallelism: usize,
    pub routing_path: Option<PathBuf>,
    pub optimization: OptimizationConfig,
    pub large_threshold: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            config_path: None,
            backend: BackendChoice::Replay,
            work_dir: PathBuf::from("work"),
            parallelism: 1,
            routing_path: None,
            optimization: OptimizationConfig::default(),
            large_threshold: DEFAULT_LARGE_THRESHOLD,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.parallelism == 0 {
            return Err("parallelism must be at least 1".into());
        }
        self.optimization.validate().map_err(|e| e.to_string())?;
        if !(self.large_threshold > 0.0 && self.large_threshold < 1.0) {
            return Err(format!(
                "large-element threshold must lie in (0, 1), got {}",
                self.large_threshold
            ));
        }
        Ok(())
    }

    /// Routing table from `routing_path`, or the built-in one.
    pub fn routing(&self) -> Result<ClassRoutingTable, Failure> {
        match &self.routing_path {
            Some(p) => Ok(ClassRoutingTable::from_json(&read(p)?)?),
            None => Ok(default_routing()),
        }
    }
}

/// A failed command: message for stderr plus exit status.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INVALID,
            message: message.into(),
        }
    }

    fn io(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_IO,
            message: message.into(),
        }
    }
}

pub fn gen_exit_code(e: &GenError) -> i32 {
    match e.root() {
        GenError::Backend(_)
        | GenError::Cassette(_)
        | GenError::CassetteMiss { .. }
        | GenError::MissingImage { .. }
        | GenError::Io(_)
        | GenError::Image(_) => EXIT_IO,
        GenError::Detect(d) => detect_exit_code(d),
        _ => EXIT_INVALID,
    }
}

fn detect_exit_code(e: &DetectError) -> i32 {
    match e {
        DetectError::Io(_) | DetectError::Image(_) => EXIT_IO,
        _ => EXIT_INVALID,
    }
}

fn corpus_exit_code(e: &CorpusError) -> i32 {
    match e {
        CorpusError::Io { .. } | CorpusError::MissingFile { .. } | CorpusError::Image(_) | CorpusError::Pool(_) => {
            EXIT_IO
        }
        CorpusError::Page { source, .. } => corpus_exit_code(source),
        CorpusError::Fidelity(FidelityError::Io(_)) => EXIT_IO,
        CorpusError::Detect(d) => detect_exit_code(d),
        _ => EXIT_INVALID,
    }
}

impl From<GenError> for Failure {
    fn from(e: GenError) -> Self {
        Self {
            code: gen_exit_code(&e),
            message: e.to_string(),
        }
    }
}

impl From<CorpusError> for Failure {
    fn from(e: CorpusError) -> Self {
        Self {
            code: corpus_exit_code(&e),
            message: e.to_string(),
        }
    }
}

impl From<DetectError> for Failure {
    fn from(e: DetectError) -> Self {
        Self {
            code: detect_exit_code(&e),
            message: e.to_string(),
        }
    }
}

impl From<FidelityError> for Failure {
    fn from(e: FidelityError) -> Self {
        CorpusError::from(e).into()
    }
}

impl From<GeometryError> for Failure {
    fn from(e: GeometryError) -> Self {
        Self::invalid(e.to_string())
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

fn emit(out: &mut dyn Write, path: Option<&Path>, contents: &str) -> Result<(), Failure> {
    match path {
        Some(p) => write_file(p, contents),
        None => writeln!(out, "{contents}").map_err(|e| Failure::io(e.to_string())),
    }
}

pub fn parse_page_size(s: &str) -> Result<PageSize, String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WIDTHxHEIGHT, got {s:?}"))?;
    let parse = |v: &str| v.trim().parse::<u32>().map_err(|_| format!("bad dimension {v:?} in {s:?}"));
    let size = PageSize::new(parse(w)?, parse(h)?);
    if size.width == 0 || size.height == 0 {
        return Err(format!("page size must be positive, got {s:?}"));
    }
    Ok(size)
}

fn optimization(t: &ThresholdArgs) -> Result<OptimizationConfig, Failure> {
    Ok(OptimizationConfig::new(t.iou, t.factor)?)
}

fn load_set(path: &Path) -> Result<DetectionSet, Failure> {
    parse_detection_file(&read(path)?).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
}

fn templates(dir: Option<&Path>) -> Result<TemplateSet, Failure> {
    match dir {
        Some(d) => Ok(TemplateSet::load_dir(d)?),
        None => Ok(TemplateSet::builtin()),
    }
}

/// Builds the backend named on the command line. With `http` and a cassette,
/// new responses are recorded.
pub fn open_backend(
    choice: BackendChoice,
    cassette: Option<&Path>,
    config: Option<&Path>,
) -> Result<Box<dyn VlmBackend>, Failure> {
    match choice {
        BackendChoice::Replay => {
            let path = cassette.ok_or_else(|| Failure::invalid("--backend replay needs --cassette"))?;
            Ok(Box::new(ReplayBackend::open(path)?))
        }
        BackendChoice::Http => {
            let path = config.ok_or_else(|| Failure::invalid("--backend http needs --config"))?;
            let text = String::from_utf8(read(path)?)
                .map_err(|_| Failure::invalid(format!("{}: not UTF-8", path.display())))?;
            let http = HttpChatBackend::new(HttpConfig::parse_kv(&text)?);
            match cassette {
                Some(c) => Ok(Box::new(RecordingBackend::open(http, c)?)),
                None => Ok(Box::new(http)),
            }
        }
    }
}

fn run_optimize(a: &OptimizeArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let cfg = optimization(&a.thresholds)?;
    let set = load_set(&a.input)?;
    let kept = optimize_boxes(&set.scored_boxes(), &cfg)?;
    let mut result = DetectionSet::new(set.page_id.clone(), set.page_size);
    result.detections = kept.iter().map(|b| Detection::new(b.bbox, b.score, b.category)).collect();
    emit(out, a.out.as_deref(), &serialize_detections(&result))
}

fn run_fuse(a: &FuseArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let cfg = RunConfig {
        routing_path: a.routing.routing.clone(),
        ..RunConfig::default()
    };
    let routing = cfg.routing()?;
    let global = load_set(&a.global)?;
    let dense = load_set(&a.dense)?;
    let fused = fuse_detections(&global, &dense, &routing)?;
    emit(out, a.out.as_deref(), &serialize_detections_annotated(&fused))
}

fn run_schema(a: &SchemaArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    let schema = match &a.check {
        Some(path) => {
            let text = String::from_utf8(read(path)?)
                .map_err(|_| Failure::invalid(format!("{}: not UTF-8", path.display())))?;
            LayoutSchema::from_json(&text).map_err(|e| Failure::invalid(e.to_string()))?
        }
        None => {
            let (regions, elements, size) = match (&a.regions, &a.elements, a.page) {
                (Some(r), Some(e), Some(s)) => (r, e, s),
                _ => return Err(Failure::invalid("--regions, --elements and --page are required")),
            };
            let mut regions = load_set(regions)?.scored_boxes();
            if a.optimize {
                regions = optimize_boxes(&regions, &optimization(&a.thresholds)?)?;
            }
            let elements = load_set(elements)?.with_page(a.page_id.clone(), size);
            let (schema, warnings) =
                schema_from_detections(&regions, &elements, size).map_err(|e| Failure::invalid(e.to_string()))?;
            for w in warnings {
                let _ = writeln!(err, "warning: {w}");
            }
            schema
        }
    };
    let report = validate_schema(&schema);
    if !report.ok {
        return Err(Failure::invalid(format!("schema failed validation: {report}")));
    }
    if a.check.is_some() {
        return emit(out, None, "ok");
    }
    emit(out, a.out.as_deref(), &schema.to_canonical_json())
}

fn run_generate(a: &GenerateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    let run = RunConfig {
        config_path: a.backend.config.clone(),
        backend: a.backend.backend,
        work_dir: a.work_dir.clone(),
        parallelism: a.parallelism,
        routing_path: a.routing.routing.clone(),
        optimization: OptimizationConfig {
            iou_threshold: a.thresholds.iou,
            dominance_factor: a.thresholds.factor,
        },
        ..RunConfig::default()
    };
    run.validate().map_err(Failure::invalid)?;
    let manifest = CorpusManifest::load(&a.manifest)?;
    let backend = open_backend(run.backend, a.backend.cassette.as_deref(), run.config_path.as_deref())?;
    let cfg = PipelineConfig {
        optimization: run.optimization,
        routing: run.routing()?,
        templates: templates(a.backend.templates.as_deref())?,
        work_dir: run.work_dir.clone(),
        retries: a.retries,
    };
    let results = generate_corpus(&manifest, backend.as_ref(), &cfg, run.parallelism)?;
    let mut worst = EXIT_OK;
    for (page_id, r) in results {
        match r {
            Ok(page) => {
                for w in &page.warnings {
                    let _ = writeln!(err, "warning: {page_id}: {w}");
                }
                let _ = writeln!(out, "{page_id}\tok\t{}", page.work_dir.display());
            }
            Err(e) => {
                worst = worst.max(gen_exit_code(&e));
                let _ = writeln!(out, "{page_id}\tfailed\t{}", e.code());
                let _ = writeln!(err, "error: {page_id}: {e}");
            }
        }
    }
    if worst == EXIT_OK {
        Ok(())
    } else {
        Err(Failure {
            code: worst,
            message: "some pages failed".into(),
        })
    }
}

fn run_judge(a: &JudgeArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let templates = templates(a.backend.templates.as_deref())?;
    let prompt = build_judge_prompt(&a.reference, &a.method_a, &a.method_b, &templates)?;
    let backend = open_backend(a.backend.backend, a.backend.cassette.as_deref(), a.backend.config.as_deref())?;
    let reply = backend.complete(&prompt)?;
    let verdict = parse_judge_verdict(&reply)?;
    let text = if a.json {
        serde_json::to_string_pretty(&verdict).expect("verdict serializes")
    } else {
        let w = match verdict.winner {
            Winner::A => "METHOD A",
            Winner::B => "METHOD B",
        };
        format!("WINNER: {w}\n{}", verdict.reasoning)
    };
    emit(out, None, text.trim_end())
}

fn scores_text(s: &FineGrainedScores) -> String {
    format!(
        "text      {:.6}\nblock     {:.6}\nposition  {:.6}\ncolor     {:.6}",
        s.text, s.block, s.position, s.color
    )
}

fn report_metadata(manifest: &CorpusManifest, work_dir: &Path) -> ReportMetadata {
    let provenance = manifest.pages.iter().find_map(|p| {
        let bytes = fs::read(work_dir.join(&p.page_id).join(PROVENANCE_FILE)).ok()?;
        serde_json::from_slice::<Provenance>(&bytes).ok()
    });
    ReportMetadata {
        backend: provenance.as_ref().map(|p| {
            serde_json::to_value(p.backend)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default()
        }),
        model: provenance.as_ref().map(|p| p.model.clone()),
        template_version: provenance.map(|p| p.template_version),
        created_unix: SystemTime::now().duration_since(UNIX_EPOCH).ok().map(|d| d.as_secs()),
    }
}

fn run_eval(a: &EvalArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    if a.parallelism == 0 {
        return Err(Failure::invalid("parallelism must be at least 1"));
    }
    if let (Some(generated), Some(gt), Some(size)) = (&a.generated, &a.gt, a.page) {
        let (scores, warnings) = evaluate_page(generated, gt, size)?;
        for w in warnings {
            let _ = writeln!(err, "warning: {w}");
        }
        let text = if a.json {
            serde_json::to_string_pretty(&scores).expect("scores serialize")
        } else {
            scores_text(&scores)
        };
        return emit(out, None, &text);
    }
    let path = a
        .manifest
        .as_ref()
        .ok_or_else(|| Failure::invalid("give --gen/--gt/--page or --manifest"))?;
    let manifest = CorpusManifest::load(path)?;
    let per_page = evaluate_corpus(&manifest, &a.work_dir, a.parallelism)?;
    let report = aggregate_reports(per_page, report_metadata(&manifest, &a.work_dir))?;
    if let Some(p) = &a.report {
        write_file(p, &report.to_json())?;
    }
    let text = if a.json { report.to_json() } else { report.to_table() };
    emit(out, None, text.trim_end())
}

#[derive(Serialize)]
struct StatsOutput {
    layout: crate::corpus::LayoutStats,
    benchmark: crate::corpus::BenchmarkStats,
}

fn run_stats(a: &StatsArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let run = RunConfig {
        routing_path: a.routing.routing.clone(),
        optimization: OptimizationConfig {
            iou_threshold: a.thresholds.iou,
            dominance_factor: a.thresholds.factor,
        },
        large_threshold: a.large_threshold,
        ..RunConfig::default()
    };
    run.validate().map_err(Failure::invalid)?;
    let annotations = match (&a.annotations, &a.manifest) {
        (Some(p), _) => parse_annotations(&read(p)?)?,
        (None, Some(m)) => {
            let manifest = CorpusManifest::load(m)?;
            annotations_from_manifest(&manifest, &run.optimization, &run.routing()?)?
        }
        (None, None) => return Err(Failure::invalid("give --annotations or --manifest")),
    };
    let stats = StatsOutput {
        layout: compute_layout_stats(&annotations)?,
        benchmark: compute_eval_stats(&annotations, run.large_threshold)?,
    };
    emit(out, None, &serde_json::to_string_pretty(&stats).expect("stats serialize"))
}

/// Parses `argv` (program name first) and runs the subcommand, writing to
/// the given streams. Returns the exit status.
pub fn dispatch_with(argv: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let rendered = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{rendered}");
                EXIT_IO
            } else {
                let _ = write!(out, "{rendered}");
                EXIT_OK
            };
        }
    };
    let result = match &cli.command {
        Command::Optimize(a) => run_optimize(a, out),
        Command::Fuse(a) => run_fuse(a, out),
        Command::Schema(a) => run_schema(a, out, err),
        Command::Generate(a) => run_generate(a, out, err),
        Command::Judge(a) => run_judge(a, out),
        Command::Eval(a) => run_eval(a, out, err),
        Command::Stats(a) => run_stats(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

pub fn dispatch(argv: &[String]) -> i32 {
    dispatch_with(argv, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

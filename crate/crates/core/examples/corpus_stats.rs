//! Dataset statistics for the fixture corpus, and evaluation of the
//! recorded generations against the references.

use std::path::Path;

use design2code::corpus::{
    aggregate_reports, annotations_from_manifest, compute_eval_stats, compute_layout_stats,
    evaluate_corpus, generate_corpus, CorpusManifest, ReportMetadata, DEFAULT_LARGE_THRESHOLD,
};
use design2code::detect::default_routing;
use design2code::genpipe::{PipelineConfig, ReplayBackend};
use design2code::geometry::OptimizationConfig;

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus");
    let manifest = CorpusManifest::load(&root.join("corpus.json")).unwrap();

    let annotations = annotations_from_manifest(&manifest, &OptimizationConfig::default(), &default_routing()).unwrap();
    let layout = compute_layout_stats(&annotations).unwrap();
    let bench = compute_eval_stats(&annotations, DEFAULT_LARGE_THRESHOLD).unwrap();
    println!(
        "boxes/page {:.2} (min {}, max {})",
        layout.boxes_per_page.avg, layout.boxes_per_page.min, layout.boxes_per_page.max
    );
    println!("elements/box {:.2}", layout.elements_per_box.avg);
    println!("tokens/box {:.2}", layout.tokens_per_box.avg);
    println!("box/page ratio {:.1}%", layout.box_to_page_ratio.avg);
    println!("coverage {:.3}, large {:.3}", bench.element_coverage, bench.large_elements);

    let work = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig {
        work_dir: work.path().to_path_buf(),
        ..PipelineConfig::default()
    };
    let backend = ReplayBackend::open(&root.join("cassette.json")).unwrap();
    for (id, r) in generate_corpus(&manifest, &backend, &cfg, 2).unwrap() {
        r.unwrap_or_else(|e| panic!("{id}: {e}"));
    }
    let scores = evaluate_corpus(&manifest, work.path(), 2).unwrap();
    let report = aggregate_reports(scores, ReportMetadata::default()).unwrap();
    print!("\n{}", report.to_table());
}

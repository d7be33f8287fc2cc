//! Merge global and dense detector output for one fixture page.

use std::fs;
use std::path::Path;

use design2code::detect::{default_routing, fuse_detections, parse_detection_file, serialize_detections_annotated};

fn main() {
    let page = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus/landing");
    let load = |name: &str| {
        parse_detection_file(&fs::read(page.join(name)).expect("fixture"))
            .expect("detection file")
            .with_page("landing", design2code::detect::PageSize::new(320, 240))
    };
    let (global, dense) = (load("global.json"), load("dense.json"));
    let mut fused = fuse_detections(&global, &dense, &default_routing()).expect("routable");
    fused.resolve_labels(&default_routing());

    println!("global {} + dense {} -> fused {}", global.len(), dense.len(), fused.len());
    println!("{}", serialize_detections_annotated(&fused));
}

//! Build and validate a layout schema from regions and fused elements.

use std::fs;
use std::path::Path;

use design2code::detect::{default_routing, fuse_detections, parse_detection_file, PageSize};
use design2code::geometry::{optimize_boxes, OptimizationConfig};
use design2code::schema::{schema_from_detections, validate_schema};

fn main() {
    let page = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus/pricing");
    let size = PageSize::new(320, 240);
    let load = |name: &str| {
        parse_detection_file(&fs::read(page.join(name)).expect("fixture"))
            .expect("detection file")
            .with_page("pricing", size)
    };
    let regions = optimize_boxes(&load("regions.json").scored_boxes(), &OptimizationConfig::default()).unwrap();
    let elements = fuse_detections(&load("global.json"), &load("dense.json"), &default_routing()).unwrap();

    let (schema, warnings) = schema_from_detections(&regions, &elements, size).unwrap();
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let report = validate_schema(&schema);
    println!("{}", schema.to_canonical_json());
    println!("regions: {}, elements: {}, valid: {}", schema.regions.len(), schema.element_count(), report.ok);
}

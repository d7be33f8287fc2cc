//! Crop every fused element of a fixture page into an asset directory.
//!
//! Usage: `cargo run --example crop_assets [OUT_DIR]`

use std::fs;
use std::path::{Path, PathBuf};

use design2code::detect::{
    crop_elements, default_routing, fuse_detections, parse_detection_file, AssetRepository, PageSize,
};

fn main() {
    let page = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus/pricing");
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("design2code-assets"));

    let image = image::open(page.join("screenshot.png")).unwrap().to_rgba8();
    let size = PageSize::new(image.width(), image.height());
    let load = |name: &str| {
        parse_detection_file(&fs::read(page.join(name)).unwrap())
            .unwrap()
            .with_page("pricing", size)
    };
    let mut fused = fuse_detections(&load("global.json"), &load("dense.json"), &default_routing()).unwrap();
    fused.resolve_labels(&default_routing());

    if out.exists() {
        fs::remove_dir_all(&out).unwrap();
    }
    let repo = crop_elements(&image, &fused, AssetRepository::new(&out)).unwrap();
    for e in &repo.entries {
        let kind = if e.transparent { "icon" } else { "image" };
        println!("{:<14} {:>5} {}", e.element_id, kind, repo.absolute_path(e).display());
    }
}

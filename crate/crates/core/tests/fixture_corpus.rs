//! Builds the three-page fixture corpus under `tests/fixtures/corpus` and
//! records its cassette with a simulated model.
//!
//! Regenerate with
//! `cargo test -p design2code --test fixture_corpus -- --ignored`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use design2code::corpus::{generate_corpus, CorpusManifest};
use design2code::detect::{parse_detection_file, parse_element_listing, PageSize};
use design2code::genpipe::{FnBackend, GenError, PipelineConfig, Prompt, RecordingBackend};
use design2code::schema::{schema_from_detections, SemanticType};
use image::{Rgba, RgbaImage};

struct FixturePage {
    id: &'static str,
    size: (u32, u32),
    background: [u8; 3],
    /// x, y, w, h, rgb
    rects: &'static [(u32, u32, u32, u32, [u8; 3])],
    regions: &'static str,
    global: &'static str,
    dense: &'static str,
    gt_html: &'static str,
    /// What the simulated model answers to the HTML prompt.
    generated_html: &'static str,
}

const PAGES: &[FixturePage] = &[
    FixturePage {
        id: "landing",
        size: (320, 240),
        background: [255, 255, 255],
        rects: &[
            (0, 0, 320, 40, [0x1e, 0x3a, 0x8a]),
            (240, 10, 60, 20, [0xf5, 0x9e, 0x0b]),
            (0, 40, 320, 140, [0xe5, 0xe7, 0xeb]),
            (110, 120, 100, 30, [0x25, 0x63, 0xeb]),
            (0, 200, 320, 40, [0x37, 0x41, 0x51]),
        ],
        regions: r#"[
  {"category_id": 0, "bbox": [0, 0, 320, 40], "score": 0.95},
  {"category_id": 4, "bbox": [0, 40, 320, 140], "score": 0.9},
  {"category_id": 4, "bbox": [0, 44, 320, 130], "score": 0.6},
  {"category_id": 3, "bbox": [0, 200, 320, 40], "score": 0.92}
]
"#,
        global: r#"[
  {"category_id": 0, "bbox": [0, 0, 320, 40], "score": 0.9},
  {"category_id": 3, "bbox": [0, 200, 320, 40], "score": 0.88},
  {"category_id": 6, "bbox": [240, 10, 60, 20], "score": 0.4}
]
"#,
        dense: r#"[
  {"category_id": 6, "bbox": [240, 10, 60, 20], "score": 0.85},
  {"category_id": 6, "bbox": [110, 120, 100, 30], "score": 0.8},
  {"category_id": 0, "bbox": [0, 0, 320, 40], "score": 0.3}
]
"#,
        gt_html: r#"<html>
<body style="background-color: #ffffff">
  <div style="position: absolute; left: 0; top: 0; width: 320px; height: 40px; background-color: #1e3a8a; color: #ffffff">Acme Tools
    <div style="position: absolute; left: 240px; top: 10px; width: 60px; height: 20px; background-color: #f59e0b; color: #111827">Sign in</div>
  </div>
  <div style="position: absolute; left: 0; top: 40px; width: 320px; height: 140px; background-color: #e5e7eb; color: #111827">Build faster with better tools
    <div style="position: absolute; left: 110px; top: 80px; width: 100px; height: 30px; background-color: #2563eb; color: #ffffff">Get started</div>
  </div>
  <div style="position: absolute; left: 0; top: 200px; width: 320px; height: 40px; background-color: #374151; color: #f9fafb">Copyright 2024 Acme</div>
</body>
</html>
"#,
        generated_html: r#"<html>
<body style="background-color: #ffffff">
  <header style="position: absolute; left: 0; top: 0; width: 320px; height: 40px; background-color: #1e40af; color: #ffffff">Acme Tools
    <a style="position: absolute; left: 236px; top: 10px; width: 64px; height: 20px; background-color: #f59e0b; color: #111827">Sign in</a>
  </header>
  <section style="position: absolute; left: 0; top: 40px; width: 320px; height: 150px; background-color: #e5e7eb; color: #111827">Build faster with great tools
    <a style="position: absolute; left: 100px; top: 84px; width: 120px; height: 30px; background-color: #2563eb; color: #ffffff">Get started now</a>
  </section>
  <footer style="position: absolute; left: 0; top: 200px; width: 320px; height: 40px; background-color: #4b5563; color: #ffffff">Copyright 2024 Acme</footer>
</body>
</html>"#,
    },
    FixturePage {
        id: "pricing",
        size: (320, 240),
        background: [255, 255, 255],
        rects: &[
            (0, 0, 320, 30, [0x11, 0x18, 0x27]),
            (15, 5, 20, 20, [0xfb, 0xbf, 0x24]),
            (10, 50, 90, 150, [0xf3, 0xf4, 0xf6]),
            (115, 50, 90, 150, [0xdb, 0xea, 0xfe]),
            (220, 50, 90, 150, [0xf3, 0xf4, 0xf6]),
            (20, 170, 70, 20, [0x10, 0xb9, 0x81]),
            (125, 170, 70, 20, [0x10, 0xb9, 0x81]),
            (230, 170, 70, 20, [0x10, 0xb9, 0x81]),
        ],
        regions: r#"[
  {"category_id": 0, "bbox": [0, 0, 320, 30], "score": 0.9},
  {"category_id": 4, "bbox": [0, 40, 320, 170], "score": 0.85},
  {"category_id": 4, "bbox": [10, 50, 90, 150], "score": 0.5}
]
"#,
        global: r#"[
  {"category_id": 0, "bbox": [0, 0, 320, 30], "score": 0.93},
  {"category_id": 4, "bbox": [0, 40, 320, 170], "score": 0.81}
]
"#,
        dense: r#"[
  {"category_id": 10, "bbox": [15, 5, 20, 20], "score": 0.9},
  {"category_id": 7, "bbox": [20, 60, 70, 20], "score": 0.77},
  {"category_id": 7, "bbox": [125, 60, 70, 20], "score": 0.76},
  {"category_id": 7, "bbox": [230, 60, 70, 20], "score": 0.75},
  {"category_id": 6, "bbox": [20, 170, 70, 20], "score": 0.88},
  {"category_id": 6, "bbox": [125, 170, 70, 20], "score": 0.87},
  {"category_id": 6, "bbox": [230, 170, 70, 20], "score": 0.86}
]
"#,
        gt_html: r#"<html>
<body style="background-color: #ffffff">
  <nav style="position: absolute; left: 0; top: 0; width: 320px; height: 30px; background-color: #111827; color: #ffffff">Acme Pricing</nav>
  <div style="position: absolute; left: 10px; top: 50px; width: 90px; height: 150px; background-color: #f3f4f6">
    <div style="position: absolute; left: 10px; top: 10px; width: 70px; height: 20px; color: #111827">Free</div>
    <div style="position: absolute; left: 10px; top: 120px; width: 70px; height: 20px; background-color: #10b981; color: #ffffff">Choose</div>
  </div>
  <div style="position: absolute; left: 115px; top: 50px; width: 90px; height: 150px; background-color: #dbeafe">
    <div style="position: absolute; left: 10px; top: 10px; width: 70px; height: 20px; color: #111827">Pro 12 per month</div>
    <div style="position: absolute; left: 10px; top: 120px; width: 70px; height: 20px; background-color: #10b981; color: #ffffff">Choose</div>
  </div>
  <div style="position: absolute; left: 220px; top: 50px; width: 90px; height: 150px; background-color: #f3f4f6">
    <div style="position: absolute; left: 10px; top: 10px; width: 70px; height: 20px; color: #111827">Team 40 per month</div>
    <div style="position: absolute; left: 10px; top: 120px; width: 70px; height: 20px; background-color: #10b981; color: #ffffff">Choose</div>
  </div>
</body>
</html>
"#,
        generated_html: r#"<html>
<body style="background-color: #ffffff">
  <nav style="position: absolute; left: 0; top: 0; width: 320px; height: 30px; background-color: #111827; color: #ffffff">Acme Pricing</nav>
  <div style="position: absolute; left: 10px; top: 50px; width: 90px; height: 150px; background-color: #f3f4f6">
    <div style="position: absolute; left: 10px; top: 10px; width: 70px; height: 20px; color: #111827">Free</div>
    <div style="position: absolute; left: 10px; top: 118px; width: 70px; height: 22px; background-color: #059669; color: #ffffff">Choose</div>
  </div>
  <div style="position: absolute; left: 115px; top: 50px; width: 90px; height: 150px; background-color: #eff6ff">
    <div style="position: absolute; left: 10px; top: 10px; width: 70px; height: 20px; color: #111827">Pro 12 a month</div>
    <div style="position: absolute; left: 10px; top: 118px; width: 70px; height: 22px; background-color: #059669; color: #ffffff">Choose</div>
  </div>
  <div style="position: absolute; left: 220px; top: 50px; width: 90px; height: 150px; background-color: #f3f4f6">
    <div style="position: absolute; left: 10px; top: 10px; width: 70px; height: 20px; color: #111827">Teams 40 a month</div>
  </div>
</body>
</html>"#,
    },
    FixturePage {
        id: "notice",
        size: (200, 150),
        background: [0xfe, 0xf3, 0xc7],
        rects: &[
            (20, 20, 160, 40, [0xf5, 0x9e, 0x0b]),
            (60, 100, 80, 24, [0xdc, 0x26, 0x26]),
        ],
        regions: "[]\n",
        global: "[]\n",
        dense: r#"[
  {"category_id": 7, "bbox": [20, 20, 160, 40], "score": 0.82},
  {"category_id": 6, "bbox": [60, 100, 80, 24], "score": 0.9}
]
"#,
        gt_html: r#"<html>
<body style="background-color: #fef3c7">
  <div style="position: absolute; left: 20px; top: 20px; width: 160px; height: 40px; background-color: #f59e0b; color: #111827">Scheduled maintenance tonight</div>
  <div style="position: absolute; left: 60px; top: 100px; width: 80px; height: 24px; background-color: #dc2626; color: #ffffff">Dismiss</div>
</body>
</html>
"#,
        generated_html: r#"<html>
<body style="background-color: #fef3c7">
  <p style="position: absolute; left: 20px; top: 24px; width: 160px; height: 36px; background-color: #f59e0b; color: #000000">Scheduled maintenance tonight</p>
  <button style="position: absolute; left: 56px; top: 100px; width: 88px; height: 24px; background-color: #ef4444; color: #ffffff">Dismiss</button>
</body>
</html>"#,
    },
];

fn fixture_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus")
}

fn screenshot(p: &FixturePage) -> RgbaImage {
    let [r, g, b] = p.background;
    let mut img = RgbaImage::from_pixel(p.size.0, p.size.1, Rgba([r, g, b, 255]));
    for &(x, y, w, h, [r, g, b]) in p.rects {
        for yy in y..(y + h).min(p.size.1) {
            for xx in x..(x + w).min(p.size.0) {
                img.put_pixel(xx, yy, Rgba([r, g, b, 255]));
            }
        }
    }
    img
}

fn manifest_json() -> String {
    let pages: Vec<serde_json::Value> = PAGES
        .iter()
        .map(|p| {
            serde_json::json!({
                "page_id": p.id,
                "screenshot": format!("{}/screenshot.png", p.id),
                "regions": format!("{}/regions.json", p.id),
                "global": format!("{}/global.json", p.id),
                "dense": format!("{}/dense.json", p.id),
                "gt_html": format!("{}/gt.html", p.id),
            })
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&serde_json::json!({"name": "fixture", "pages": pages})).unwrap();
    s.push('\n');
    s
}

fn between<'a>(text: &'a str, start: &str, end: &str) -> Option<&'a str> {
    let from = text.find(start)? + start.len();
    let len = text[from..].find(end)?;
    Some(&text[from..from + len])
}

fn semantic_type(y: f64, h: f64, page_h: f64, index: usize) -> SemanticType {
    if y <= 0.0 {
        SemanticType::Header
    } else if y + h >= page_h {
        SemanticType::Footer
    } else if index == 1 {
        SemanticType::Hero
    } else {
        SemanticType::Content
    }
}

/// Stands in for a vision-language model: reads the regions and element
/// listing back out of the schema prompt and answers with a schema, and
/// answers HTML prompts with the page's canned document.
fn simulated_model(p: &Prompt) -> Result<String, GenError> {
    let text = &p.user;
    if let Some(page_id) = between(text, "Its page id is \"", "\"") {
        let dims = between(text, "shows a web page of ", " pixels").unwrap();
        let (w, h) = dims.split_once('x').unwrap();
        let size = PageSize::new(w.parse().unwrap(), h.parse().unwrap());
        let regions_json = between(text, "has id \"regionk\".\n", "\n\n").unwrap();
        let regions = parse_detection_file(regions_json.as_bytes()).unwrap().scored_boxes();
        let elements = parse_element_listing(text).unwrap().with_page(page_id, size);
        let (mut schema, _) = schema_from_detections(&regions, &elements, size).unwrap();
        for (i, r) in schema.regions.iter_mut().enumerate() {
            r.semantic_type = semantic_type(r.bbox.y, r.bbox.h, size.height as f64, i);
            r.description = format!("{} elements in a {:?} band", r.children.len(), r.semantic_type);
        }
        return Ok(format!(
            "The layout below follows the detected regions.\n\n```json\n{}\n```\n",
            schema.to_canonical_json()
        ));
    }
    let page_id = between(text, "\"page_id\": \"", "\"").unwrap();
    let page = PAGES.iter().find(|pg| pg.id == page_id).unwrap();
    Ok(format!("```html\n{}\n```", page.generated_html))
}

/// Writes the corpus to `root` and records a fresh cassette. Returns every
/// written file relative to `root`.
fn build(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut put = |rel: PathBuf, bytes: Vec<u8>| {
        let path = root.join(&rel);
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(&path, &bytes).unwrap();
        files.insert(rel, bytes);
    };
    for p in PAGES {
        let mut png = Vec::new();
        screenshot(p)
            .write_to(&mut std::io::Cursor::new(&mut png), image::ImageFormat::Png)
            .unwrap();
        let dir = PathBuf::from(p.id);
        put(dir.join("screenshot.png"), png);
        put(dir.join("regions.json"), p.regions.as_bytes().to_vec());
        put(dir.join("global.json"), p.global.as_bytes().to_vec());
        put(dir.join("dense.json"), p.dense.as_bytes().to_vec());
        put(dir.join("gt.html"), p.gt_html.as_bytes().to_vec());
    }
    put(PathBuf::from("corpus.json"), manifest_json().into_bytes());

    let cassette = root.join("cassette.json");
    let _ = fs::remove_file(&cassette);
    let work = tempfile::tempdir().unwrap();
    let manifest = CorpusManifest::load(&root.join("corpus.json")).unwrap();
    let cfg = PipelineConfig {
        work_dir: work.path().to_path_buf(),
        ..PipelineConfig::default()
    };
    {
        let recorder = RecordingBackend::open(FnBackend::new("simulated", simulated_model), &cassette).unwrap();
        for (id, r) in generate_corpus(&manifest, &recorder, &cfg, 1).unwrap() {
            r.unwrap_or_else(|e| panic!("{id}: {e}"));
        }
    }
    files.insert(PathBuf::from("cassette.json"), fs::read(&cassette).unwrap());
    files
}

#[test]
#[ignore = "rewrites tests/fixtures/corpus"]
fn regenerate_fixture_corpus() {
    let files = build(&fixture_root());
    assert_eq!(files.len(), 3 * 5 + 2);
}

#[test]
fn fixture_corpus_is_current() {
    let dir = tempfile::tempdir().unwrap();
    let files = build(dir.path());
    for (rel, bytes) in files {
        let checked_in = fs::read(fixture_root().join(&rel))
            .unwrap_or_else(|e| panic!("{}: {e}; run the ignored regenerate test", rel.display()));
        assert!(checked_in == bytes, "{} is stale; run the ignored regenerate test", rel.display());
    }
}

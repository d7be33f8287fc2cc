//! Run the full generation pipeline over the fixture corpus from its
//! recorded cassette, twice, and compare output hashes.

use std::fs;
use std::path::Path;

use design2code::corpus::{generate_corpus, CorpusManifest};
use design2code::genpipe::{PipelineConfig, ReplayBackend, HTML_FILE, SCHEMA_FILE};
use sha2::{Digest, Sha256};

fn run(manifest: &CorpusManifest, backend: &ReplayBackend) -> Vec<(String, String)> {
    let work = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig {
        work_dir: work.path().to_path_buf(),
        ..PipelineConfig::default()
    };
    generate_corpus(manifest, backend, &cfg, 3)
        .unwrap()
        .into_iter()
        .map(|(id, page)| {
            let page = page.unwrap_or_else(|e| panic!("{id}: {e}"));
            let mut h = Sha256::new();
            h.update(fs::read(page.work_dir.join(SCHEMA_FILE)).unwrap());
            h.update(fs::read(page.work_dir.join(HTML_FILE)).unwrap());
            (id, hex::encode(h.finalize()))
        })
        .collect()
}

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus");
    let manifest = CorpusManifest::load(&root.join("corpus.json")).unwrap();
    let backend = ReplayBackend::open(&root.join("cassette.json")).unwrap();

    let first = run(&manifest, &backend);
    let second = run(&manifest, &backend);
    for (id, hash) in &first {
        println!("{id:<8} {}", &hash[..16]);
    }
    println!("identical across runs: {}", first == second);
}

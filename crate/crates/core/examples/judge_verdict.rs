//! Pairwise judging with a stand-in model that always prefers method B.

use std::path::Path;

use design2code::genpipe::{build_judge_prompt, parse_judge_verdict, FnBackend, TemplateSet, VlmBackend};

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus");
    let reference = root.join("landing/screenshot.png");
    let prompt = build_judge_prompt(
        &reference,
        &root.join("pricing/screenshot.png"),
        &reference,
        &TemplateSet::builtin(),
    )
    .unwrap();
    println!("prompt fingerprint {}", prompt.fingerprint());

    let judge = FnBackend::new("stand-in", |_p: &design2code::genpipe::Prompt| {
        Ok("**Winner:** METHOD B\n\nREASONING:\nMethod B reproduces the header and hero exactly.".to_string())
    });
    let verdict = parse_judge_verdict(&judge.complete(&prompt).unwrap()).unwrap();
    println!("winner {:?}", verdict.winner);
    println!("{}", verdict.reasoning);

    match parse_judge_verdict("Both look fine to me.") {
        Ok(_) => unreachable!(),
        Err(e) => println!("rejected: {e}"),
    }
}

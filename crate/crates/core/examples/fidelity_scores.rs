//! Fine-grained scores between two small HTML pages, plus the building
//! blocks: dice text similarity and CIEDE2000.

use design2code::detect::PageSize;
use design2code::fidelity::{
    ciede2000, dice, layout_blocks, match_blocks, parse_canonical_html, score_page, srgb_to_lab, Rgb,
};

const REFERENCE: &str = r#"<body>
  <div style="position:absolute; left:0; top:0; width:400px; height:60px; background:#1e3a8a; color:#fff">Acme Tools</div>
  <div style="position:absolute; left:40px; top:100px; width:320px; height:40px; color:#111">Build faster with better tools</div>
</body>"#;

const GENERATED: &str = r#"<body>
  <header style="position:absolute; left:0; top:0; width:400px; height:56px; background:#1d4ed8; color:#fff">Acme Tool</header>
  <p style="position:absolute; left:40px; top:110px; width:300px; height:40px; color:#333">Build faster with great tools</p>
</body>"#;

fn main() {
    let viewport = PageSize::new(400, 300);
    let blocks = |html: &str| layout_blocks(&parse_canonical_html(html).unwrap(), viewport).blocks;
    let (generated, reference) = (blocks(GENERATED), blocks(REFERENCE));

    for pair in match_blocks(&generated, &reference) {
        println!(
            "{:?} <-> {:?}  dice {:.3}",
            generated[pair.gen_index].text, reference[pair.ref_index].text, pair.dice
        );
    }
    let s = score_page(&generated, &reference, viewport);
    println!("block {:.4}  text {:.4}  position {:.4}  color {:.4}", s.block, s.text, s.position, s.color);

    println!("dice(night, nacht) = {}", dice("night", "nacht"));
    let lab = |c: &str| srgb_to_lab(Rgb::parse_css(c).unwrap());
    println!("dE00(#1e3a8a, #1d4ed8) = {:.3}", ciede2000(lab("#1e3a8a"), lab("#1d4ed8")));
}

//! Fine-grained visual fidelity between a generated page and a reference:
//! text blocks are extracted, matched one-to-one by text similarity, and
//! scored on block coverage, text, position and color.

mod assign;
mod color;
mod dice;
mod html;
mod layout;
mod score;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::PageSize;
use crate::geometry::BoundingBox;

pub use assign::{lexicographic_assignment, max_weight_assignment};
pub use color::{ciede2000, srgb_to_lab, Lab, Rgb};
pub use dice::dice;
pub use html::{decode_entities, normalize_whitespace, parse_canonical_html, DomNode, DomTree, HtmlError};
pub use layout::{layout_blocks, Layout, LINE_HEIGHT};
pub use score::{match_blocks, match_blocks_with, score_page, FineGrainedScores, MatchConfig, MatchPair};

#[derive(Debug, Error)]
pub enum FidelityError {
    #[error("html parse error: {0}")]
    Html(#[from] HtmlError),
    #[error("block record json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("block {index}: {message}")]
    InvalidBlock { index: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A rendered text-bearing block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub text: String,
    pub bbox: BoundingBox,
    /// Effective text color.
    pub fill: Rgb,
    pub background: Rgb,
}

/// Reads the block sidecar format written by external renderers:
/// `[{"text", "bbox": [x, y, w, h], "fill": "#rrggbb", "background": "#rrggbb"}]`.
pub fn parse_block_records(bytes: &[u8]) -> Result<Vec<BlockRecord>, FidelityError> {
    let blocks: Vec<BlockRecord> = serde_json::from_slice(bytes)?;
    for (index, b) in blocks.iter().enumerate() {
        if b.text.trim().is_empty() {
            return Err(FidelityError::InvalidBlock {
                index,
                message: "empty text".into(),
            });
        }
        if !b.bbox.is_well_formed() {
            return Err(FidelityError::InvalidBlock {
                index,
                message: format!("malformed bbox {:?}", b.bbox.to_array()),
            });
        }
    }
    Ok(blocks)
}

pub fn serialize_block_records(blocks: &[BlockRecord]) -> String {
    serde_json::to_string_pretty(blocks).expect("block records always serialize")
}

/// Loads blocks for one page: `.json` files are read as block sidecars,
/// anything else is parsed as HTML and laid out in `viewport`.
pub fn load_blocks(path: &Path, viewport: PageSize) -> Result<Layout, FidelityError> {
    let bytes = fs::read(path)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        return Ok(Layout {
            blocks: parse_block_records(&bytes)?,
            warnings: Vec::new(),
        });
    }
    let dom = parse_canonical_html(&String::from_utf8_lossy(&bytes))?;
    let mut layout = layout_blocks(&dom, viewport);
    let mut warnings = dom.warnings;
    warnings.append(&mut layout.warnings);
    layout.warnings = warnings;
    Ok(layout)
}

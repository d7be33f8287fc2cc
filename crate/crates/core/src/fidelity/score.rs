//! Block matching and the four per-page scores.

use serde::{Deserialize, Serialize};

use super::assign::lexicographic_assignment;
use super::{ciede2000, dice, srgb_to_lab, BlockRecord};
use crate::detect::PageSize;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchConfig {
    /// Assigned pairs whose dice falls below this are discarded.
    pub min_dice: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self { min_dice: 0.2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    pub gen_index: usize,
    pub ref_index: usize,
    pub dice: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FineGrainedScores {
    pub block: f64,
    pub text: f64,
    pub position: f64,
    pub color: f64,
}

impl FineGrainedScores {
    pub const ZERO: Self = Self::uniform(0.0);
    pub const PERFECT: Self = Self::uniform(1.0);

    pub const fn uniform(v: f64) -> Self {
        Self {
            block: v,
            text: v,
            position: v,
            color: v,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.block, self.text, self.position, self.color]
    }
}

fn color_similarity(a: &BlockRecord, b: &BlockRecord) -> f64 {
    (1.0 - ciede2000(srgb_to_lab(a.fill), srgb_to_lab(b.fill)) / 100.0).max(0.0)
}

pub fn match_blocks(generated: &[BlockRecord], reference: &[BlockRecord]) -> Vec<MatchPair> {
    match_blocks_with(generated, reference, &MatchConfig::default())
}

/// One-to-one assignment maximizing total text dice, with pairs under
/// `config.min_dice` dropped afterwards. Among equally good assignments the
/// one with closer centers and more similar colors wins, so ties are broken
/// by content rather than by input order.
pub fn match_blocks_with(
    generated: &[BlockRecord],
    reference: &[BlockRecord],
    config: &MatchConfig,
) -> Vec<MatchPair> {
    if generated.is_empty() || reference.is_empty() {
        return Vec::new();
    }
    let primary: Vec<Vec<f64>> = generated
        .iter()
        .map(|g| reference.iter().map(|r| dice(&g.text, &r.text)).collect())
        .collect();
    let secondary: Vec<Vec<f64>> = generated
        .iter()
        .map(|g| {
            reference
                .iter()
                .map(|r| {
                    let (gx, gy) = g.bbox.center();
                    let (rx, ry) = r.bbox.center();
                    1.0 / (1.0 + (gx - rx).hypot(gy - ry)) + color_similarity(g, r)
                })
                .collect()
        })
        .collect();
    let mut pairs: Vec<MatchPair> = lexicographic_assignment(&primary, &secondary)
        .into_iter()
        .map(|(i, j)| MatchPair {
            gen_index: i,
            ref_index: j,
            dice: primary[i][j],
        })
        .filter(|p| p.dice >= config.min_dice)
        .collect();
    pairs.sort_by_key(|p| p.gen_index);
    pairs
}

/// Scores `generated` against `reference` on a page of the given size.
///
/// - block: matched area over total area, both sides summed
/// - text: mean pair dice
/// - position: mean of `1 - d / sqrt(2)`, `d` the center distance with x
///   scaled by page width and y by page height
/// - color: mean of `max(0, 1 - dE00(fill) / 100)`
///
/// With no pairs every score is 0, except that two empty pages score 1.
pub fn score_page(
    generated: &[BlockRecord],
    reference: &[BlockRecord],
    page: PageSize,
) -> FineGrainedScores {
    score_with_pairs(generated, reference, page, &match_blocks(generated, reference))
}

pub(crate) fn score_with_pairs(
    generated: &[BlockRecord],
    reference: &[BlockRecord],
    page: PageSize,
    pairs: &[MatchPair],
) -> FineGrainedScores {
    assert!(page.width > 0 && page.height > 0, "page must be positive");
    if generated.is_empty() && reference.is_empty() {
        return FineGrainedScores::PERFECT;
    }
    if pairs.is_empty() {
        return FineGrainedScores::ZERO;
    }
    let n = pairs.len() as f64;

    let total_area: f64 = generated.iter().chain(reference).map(|b| b.bbox.area()).sum();
    let matched_area: f64 = pairs
        .iter()
        .map(|p| generated[p.gen_index].bbox.area() + reference[p.ref_index].bbox.area())
        .sum();
    let block = if total_area > 0.0 {
        matched_area / total_area
    } else {
        2.0 * n / (generated.len() + reference.len()) as f64
    };

    let (pw, ph) = (page.width as f64, page.height as f64);
    let mut text = 0.0;
    let mut position = 0.0;
    let mut color = 0.0;
    for p in pairs {
        let g = &generated[p.gen_index];
        let r = &reference[p.ref_index];
        text += p.dice;
        let (gx, gy) = g.bbox.center();
        let (rx, ry) = r.bbox.center();
        let d = ((gx - rx) / pw).hypot((gy - ry) / ph);
        position += (1.0 - d / std::f64::consts::SQRT_2).max(0.0);
        color += color_similarity(g, r);
    }
    let unit = |v: f64| v.clamp(0.0, 1.0);
    FineGrainedScores {
        block: unit(block),
        text: unit(text / n),
        position: unit(position / n),
        color: unit(color / n),
    }
}

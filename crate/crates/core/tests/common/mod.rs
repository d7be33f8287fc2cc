//! Independent oracles and random instance generators shared by the
//! property and acceptance suites.
#![allow(dead_code)]

use design2code::detect::{ClassRoutingTable, Detection, DetectionSet, DetectionSource, Route};
use design2code::fidelity::{ciede2000, srgb_to_lab, BlockRecord, FineGrainedScores, Rgb};
use design2code::geometry::{BoundingBox, ScoredBox};
use rand::rngs::StdRng;
use rand::Rng;

fn oracle_area(b: &ScoredBox) -> f64 {
    b.bbox.w * b.bbox.h
}

/// Intersection over union from edge coordinates.
pub fn oracle_iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let ix = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
    let iy = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
    let inter = if ix > 0.0 && iy > 0.0 { ix * iy } else { 0.0 };
    let union = a.w * a.h + b.w * b.h - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

/// Line-by-line transcription of the region optimization pseudocode. The
/// inner loop walks a snapshot of the retained list; removals apply after it.
pub fn literal_optimize(boxes: &[ScoredBox], threshold: f64, factor: f64) -> Vec<ScoredBox> {
    // Sort by area, ascending; insertion after equal areas keeps input order.
    let mut sorted: Vec<ScoredBox> = Vec::new();
    for b in boxes {
        let at = sorted
            .iter()
            .position(|s| oracle_area(s) > oracle_area(b))
            .unwrap_or(sorted.len());
        sorted.insert(at, *b);
    }
    let mut optimized: Vec<ScoredBox> = Vec::new();
    for bx in &sorted {
        let mut should_keep = true;
        let snapshot = optimized.clone();
        let mut remove = vec![false; snapshot.len()];
        for (k, kept) in snapshot.iter().enumerate() {
            let iou = oracle_iou(&bx.bbox, &kept.bbox);
            if iou > threshold {
                if bx.score > kept.score * factor {
                    remove[k] = true;
                } else {
                    should_keep = false;
                    break;
                }
            }
        }
        optimized = snapshot
            .into_iter()
            .zip(remove)
            .filter_map(|(k, r)| (!r).then_some(k))
            .collect();
        if should_keep {
            optimized.push(*bx);
        }
    }
    optimized
}

/// Boxes on a small canvas so overlaps are common. Scores are multiples of
/// 0.05 to provoke near-ties against the dominance factor.
pub fn random_boxes(rng: &mut StdRng, max: usize) -> Vec<ScoredBox> {
    let n = rng.gen_range(0..=max);
    (0..n)
        .map(|_| {
            let bbox = BoundingBox::new(
                rng.gen_range(0..60) as f64,
                rng.gen_range(0..60) as f64,
                rng.gen_range(1..40) as f64,
                rng.gen_range(1..40) as f64,
            );
            ScoredBox::new(bbox, rng.gen_range(0..=20) as f64 * 0.05, 0)
        })
        .collect()
}

/// `{b in global : route GLOBAL} ∪ {b in dense : route DENSE}`, each member
/// tagged with its source, global members first.
pub fn set_builder_fuse(
    global: &DetectionSet,
    dense: &DetectionSet,
    routing: &ClassRoutingTable,
) -> Vec<(i64, [f64; 4], f64, DetectionSource)> {
    let take = |set: &DetectionSet, route: Route, source: DetectionSource| {
        set.detections
            .iter()
            .filter(|b| routing.route_of(b.category) == Some(route))
            .map(|b| (b.category, b.bbox.to_array(), b.score, source))
            .collect::<Vec<_>>()
    };
    let mut out = take(global, Route::Global, DetectionSource::GlobalDetector);
    out.extend(take(dense, Route::Dense, DetectionSource::DenseDetector));
    out
}

pub fn random_routing(rng: &mut StdRng, classes: i64) -> ClassRoutingTable {
    let mut t = ClassRoutingTable::new();
    for c in 0..classes {
        let route = if rng.gen_bool(0.5) { Route::Global } else { Route::Dense };
        t.insert(c, format!("class{c}"), route);
    }
    t
}

pub fn random_detections(rng: &mut StdRng, page_id: &str, classes: i64, max: usize) -> DetectionSet {
    let mut set = DetectionSet::new(page_id, None);
    for _ in 0..rng.gen_range(0..=max) {
        let bbox = BoundingBox::new(
            rng.gen_range(0..500) as f64,
            rng.gen_range(0..500) as f64,
            rng.gen_range(1..200) as f64,
            rng.gen_range(1..200) as f64,
        );
        set.detections
            .push(Detection::new(bbox, rng.gen_range(0..=100) as f64 / 100.0, rng.gen_range(0..classes)));
    }
    set
}

const WORDS: &[&str] = &["home", "about", "contact", "price", "pricing", "login", "sign in", "acme", "a", "docs"];
const PALETTE: &[Rgb] = &[
    Rgb::new(0, 0, 0),
    Rgb::new(255, 255, 255),
    Rgb::new(30, 58, 138),
    Rgb::new(29, 78, 216),
    Rgb::new(245, 158, 11),
    Rgb::new(16, 185, 129),
];

pub fn random_blocks(rng: &mut StdRng, max: usize, page: (u32, u32)) -> Vec<BlockRecord> {
    let n = rng.gen_range(0..=max);
    blocks_of_len(rng, n, page)
}

pub fn blocks_of_len(rng: &mut StdRng, n: usize, page: (u32, u32)) -> Vec<BlockRecord> {
    (0..n)
        .map(|_| {
            let words = rng.gen_range(1..=3);
            let text: Vec<&str> = (0..words).map(|_| WORDS[rng.gen_range(0..WORDS.len())]).collect();
            let w = rng.gen_range(1..page.0 / 2) as f64;
            let h = rng.gen_range(1..page.1 / 2) as f64;
            BlockRecord {
                text: text.join(" "),
                bbox: BoundingBox::new(
                    rng.gen_range(0..page.0 / 2) as f64,
                    rng.gen_range(0..page.1 / 2) as f64,
                    w,
                    h,
                ),
                fill: PALETTE[rng.gen_range(0..PALETTE.len())],
                background: PALETTE[rng.gen_range(0..PALETTE.len())],
            }
        })
        .collect()
}

/// Dice over character multisets: sort both sides and merge.
pub fn oracle_dice(a: &str, b: &str) -> f64 {
    let mut x: Vec<char> = a.chars().collect();
    let mut y: Vec<char> = b.chars().collect();
    if x.is_empty() && y.is_empty() {
        return 1.0;
    }
    x.sort_unstable();
    y.sort_unstable();
    let (mut i, mut j, mut common) = (0, 0, 0usize);
    while i < x.len() && j < y.len() {
        match x[i].cmp(&y[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    2.0 * common as f64 / (x.len() + y.len()) as f64
}

fn tie_weight(g: &BlockRecord, r: &BlockRecord) -> f64 {
    let (gx, gy) = g.bbox.center();
    let (rx, ry) = r.bbox.center();
    let color = (1.0 - ciede2000(srgb_to_lab(g.fill), srgb_to_lab(r.fill)) / 100.0).max(0.0);
    1.0 / (1.0 + ((gx - rx).powi(2) + (gy - ry).powi(2)).sqrt()) + color
}

/// Enumerates every full injective assignment of the smaller side. Returns
/// the best total dice and, among assignments within `tol` of it, the best
/// total tie-break weight.
pub fn brute_force_match(generated: &[BlockRecord], reference: &[BlockRecord], tol: f64) -> (f64, f64) {
    let swap = generated.len() > reference.len();
    let (small, large) = if swap { (reference, generated) } else { (generated, reference) };
    let mut totals = Vec::new();
    let mut used = vec![false; large.len()];
    let mut picks = Vec::new();
    fn walk(
        i: usize,
        small: &[BlockRecord],
        large: &[BlockRecord],
        swap: bool,
        used: &mut Vec<bool>,
        picks: &mut Vec<usize>,
        totals: &mut Vec<(f64, f64)>,
    ) {
        if i == small.len() {
            let mut d = 0.0;
            let mut s = 0.0;
            for (a, &b) in picks.iter().enumerate() {
                let (g, r) = if swap { (&large[b], &small[a]) } else { (&small[a], &large[b]) };
                d += oracle_dice(&g.text, &r.text);
                s += tie_weight(g, r);
            }
            totals.push((d, s));
            return;
        }
        for j in 0..large.len() {
            if !used[j] {
                used[j] = true;
                picks.push(j);
                walk(i + 1, small, large, swap, used, picks, totals);
                picks.pop();
                used[j] = false;
            }
        }
    }
    walk(0, small, large, swap, &mut used, &mut picks, &mut totals);
    let best = totals.iter().map(|t| t.0).fold(0.0, f64::max);
    let tie = totals
        .iter()
        .filter(|t| t.0 >= best - tol)
        .map(|t| t.1)
        .fold(0.0, f64::max);
    (best, tie)
}

pub fn tie_total(generated: &[BlockRecord], reference: &[BlockRecord], pairs: &[(usize, usize)]) -> f64 {
    pairs.iter().map(|&(g, r)| tie_weight(&generated[g], &reference[r])).sum()
}

/// Mean of each score, summed left to right.
pub fn naive_mean(rows: &[FineGrainedScores]) -> FineGrainedScores {
    let n = rows.len() as f64;
    let (mut b, mut t, mut p, mut c) = (0.0, 0.0, 0.0, 0.0);
    for r in rows {
        b += r.block;
        t += r.text;
        p += r.position;
        c += r.color;
    }
    FineGrainedScores {
        block: b / n,
        text: t / n,
        position: p / n,
        color: c / n,
    }
}

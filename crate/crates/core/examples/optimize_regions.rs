//! Resolve overlapping layout regions with the default thresholds.

use design2code::geometry::{iou, optimize_boxes, BoundingBox, OptimizationConfig, ScoredBox};

fn main() {
    let boxes = vec![
        ScoredBox::new(BoundingBox::new(0.0, 0.0, 320.0, 40.0), 0.95, 0),
        ScoredBox::new(BoundingBox::new(0.0, 40.0, 320.0, 140.0), 0.90, 4),
        // Same hero, slightly tighter and weaker: displaced by the 0.90 box.
        ScoredBox::new(BoundingBox::new(0.0, 44.0, 320.0, 130.0), 0.60, 4),
        // Smaller, so visited before the 0.95 header, which then cannot displace it.
        ScoredBox::new(BoundingBox::new(0.0, 0.0, 300.0, 36.0), 0.99, 0),
    ];
    let cfg = OptimizationConfig::default();
    let kept = optimize_boxes(&boxes, &cfg).expect("valid input");

    println!("kept {} of {} regions", kept.len(), boxes.len());
    for b in &kept {
        println!("  {:?} score {:.2}", b.bbox.to_array(), b.score);
    }
    for (i, a) in kept.iter().enumerate() {
        for b in &kept[i + 1..] {
            assert!(iou(&a.bbox, &b.bbox) <= cfg.iou_threshold);
        }
    }
}

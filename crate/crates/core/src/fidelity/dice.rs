use std::collections::HashMap;

/// Sørensen-Dice coefficient over character multisets:
/// `2 * |A ∩ B| / (|A| + |B|)`. Two empty strings score 1.
pub fn dice(a: &str, b: &str) -> f64 {
    let mut counts: HashMap<char, usize> = HashMap::new();
    let mut len_a = 0usize;
    for c in a.chars() {
        *counts.entry(c).or_default() += 1;
        len_a += 1;
    }
    let mut len_b = 0usize;
    let mut shared = 0usize;
    for c in b.chars() {
        len_b += 1;
        if let Some(n) = counts.get_mut(&c) {
            if *n > 0 {
                *n -= 1;
                shared += 1;
            }
        }
    }
    if len_a + len_b == 0 {
        return 1.0;
    }
    2.0 * shared as f64 / (len_a + len_b) as f64
}

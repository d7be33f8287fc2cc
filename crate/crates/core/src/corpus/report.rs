//! Per-page score collection and corpus means.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::CorpusError;
use crate::fidelity::FineGrainedScores;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageScore {
    pub page_id: String,
    pub scores: FineGrainedScores,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ReportMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template_version: Option<String>,
    /// Seconds since the Unix epoch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_unix: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub pages: Vec<PageScore>,
    pub mean: FineGrainedScores,
    pub metadata: ReportMetadata,
}

/// Arithmetic means of the four scores over `per_page`.
pub fn aggregate_reports(
    per_page: Vec<(String, FineGrainedScores)>,
    metadata: ReportMetadata,
) -> Result<EvalReport, CorpusError> {
    if per_page.is_empty() {
        return Err(CorpusError::Empty);
    }
    let mut seen = HashSet::new();
    for (id, _) in &per_page {
        if !seen.insert(id.as_str()) {
            return Err(CorpusError::DuplicatePage(id.clone()));
        }
    }
    let n = per_page.len() as f64;
    let mut sum = [0.0; 4];
    for (_, s) in &per_page {
        for (acc, v) in sum.iter_mut().zip(s.as_array()) {
            *acc += v;
        }
    }
    let mean = FineGrainedScores {
        block: sum[0] / n,
        text: sum[1] / n,
        position: sum[2] / n,
        color: sum[3] / n,
    };
    Ok(EvalReport {
        pages: per_page
            .into_iter()
            .map(|(page_id, scores)| PageScore { page_id, scores })
            .collect(),
        mean,
        metadata,
    })
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Fixed-width table, columns Text, Block, Pos, Color, with a final mean row.
    pub fn to_table(&self) -> String {
        let width = self
            .pages
            .iter()
            .map(|p| p.page_id.chars().count())
            .chain([4])
            .max()
            .unwrap_or(4)
            + 2;
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}{:>8}{:>8}{:>8}{:>8}", "page", "Text", "Block", "Pos", "Color");
        let row = |out: &mut String, name: &str, s: &FineGrainedScores| {
            let _ = writeln!(
                out,
                "{:<width$}{:>8.4}{:>8.4}{:>8.4}{:>8.4}",
                name, s.text, s.block, s.position, s.color
            );
        };
        for p in &self.pages {
            row(&mut out, &p.page_id, &p.scores);
        }
        let _ = writeln!(out, "{}", "-".repeat(width + 32));
        row(&mut out, "mean", &self.mean);
        out
    }
}

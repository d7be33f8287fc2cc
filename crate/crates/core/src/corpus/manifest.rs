//! Corpus manifest: which files make up each page.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CorpusError;
use crate::genpipe::PageInputs;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestPage {
    pub page_id: String,
    pub screenshot: PathBuf,
    pub regions: PathBuf,
    pub global: PathBuf,
    pub dense: PathBuf,
    /// Reference page for evaluation: HTML, or a block sidecar ending in `.json`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_html: Option<PathBuf>,
}

impl ManifestPage {
    pub fn inputs(&self) -> PageInputs {
        PageInputs {
            page_id: self.page_id.clone(),
            screenshot: self.screenshot.clone(),
            regions: self.regions.clone(),
            global: self.global.clone(),
            dense: self.dense.clone(),
        }
    }

    fn files(&self) -> impl Iterator<Item = &PathBuf> {
        [&self.screenshot, &self.regions, &self.global, &self.dense]
            .into_iter()
            .chain(self.gt_html.as_ref())
    }

    fn files_mut(&mut self) -> impl Iterator<Item = &mut PathBuf> {
        [&mut self.screenshot, &mut self.regions, &mut self.global, &mut self.dense]
            .into_iter()
            .chain(self.gt_html.as_mut())
    }
}

/// JSON form: `{"name": ..., "pages": [{"page_id", "screenshot", "regions",
/// "global", "dense", "gt_html"?}]}`. Relative paths are resolved against the
/// manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub name: String,
    pub pages: Vec<ManifestPage>,
}

impl CorpusManifest {
    /// Parses, resolves paths against `base_dir`, and checks that page ids
    /// are unique and every referenced file exists.
    pub fn parse(bytes: &[u8], base_dir: &Path) -> Result<Self, CorpusError> {
        let mut m: Self = serde_json::from_slice(bytes)?;
        let mut seen = HashSet::new();
        for page in &mut m.pages {
            if page.page_id.is_empty() || page.page_id.contains(['/', '\\']) || page.page_id.starts_with('.') {
                return Err(CorpusError::Manifest(format!("unusable page id {:?}", page.page_id)));
            }
            if !seen.insert(page.page_id.clone()) {
                return Err(CorpusError::DuplicatePage(page.page_id.clone()));
            }
            for f in page.files_mut() {
                if f.is_relative() {
                    *f = base_dir.join(&*f);
                }
            }
            if let Some(missing) = page.files().find(|f| !f.is_file()) {
                return Err(CorpusError::MissingFile {
                    page_id: page.page_id.clone(),
                    path: missing.clone(),
                });
            }
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let bytes = fs::read(path).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&bytes, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn page(&self, page_id: &str) -> Option<&ManifestPage> {
        self.pages.iter().find(|p| p.page_id == page_id)
    }
}

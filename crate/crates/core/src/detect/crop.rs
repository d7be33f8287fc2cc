//! On-disk repository of cropped element images.
//!
//! Layout: `<root>/<page_id>/elem<N>.png` plus `<root>/<page_id>/index.json`.

use std::fs;
use std::path::{Path, PathBuf};

use image::RgbaImage;
use serde::{Deserialize, Serialize};

use super::{DetectError, DetectionSet, PageSize};
use crate::geometry::BoundingBox;

pub type PageImage = RgbaImage;

/// Fraction of non-opaque pixels above which a crop counts as transparent.
pub const TRANSPARENT_FRACTION: f64 = 0.10;

const INDEX_FILE: &str = "index.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetEntry {
    /// `{page_id}/elem{index}`, index being the detection's position in its set.
    pub element_id: String,
    pub page_id: String,
    pub crop: BoundingBox,
    /// Relative to the repository root.
    pub path: PathBuf,
    pub transparent: bool,
    /// The detection box extended past the page and was clipped.
    pub clamped: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background_removed: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AssetRepository {
    pub root: PathBuf,
    pub entries: Vec<AssetEntry>,
    pub warnings: Vec<String>,
}

impl AssetRepository {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self {
            root: root.into(),
            entries: Vec::new(),
            warnings: Vec::new(),
        }
    }

    /// Loads every page index found under `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, DetectError> {
        let mut repo = Self::new(root);
        if !repo.root.is_dir() {
            return Ok(repo);
        }
        let mut pages: Vec<PathBuf> = fs::read_dir(&repo.root)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join(INDEX_FILE).is_file())
            .collect();
        pages.sort();
        for page in pages {
            let entries: Vec<AssetEntry> =
                serde_json::from_slice(&fs::read(page.join(INDEX_FILE))?)?;
            repo.entries.extend(entries);
        }
        Ok(repo)
    }

    pub fn get(&self, element_id: &str) -> Option<&AssetEntry> {
        self.entries.iter().find(|e| e.element_id == element_id)
    }

    pub fn page_entries<'a>(&'a self, page_id: &'a str) -> impl Iterator<Item = &'a AssetEntry> {
        self.entries.iter().filter(move |e| e.page_id == page_id)
    }

    pub fn absolute_path(&self, entry: &AssetEntry) -> PathBuf {
        self.root.join(&entry.path)
    }

    fn write_index(&self, page_id: &str) -> Result<(), DetectError> {
        let entries: Vec<&AssetEntry> = self.page_entries(page_id).collect();
        let dir = self.root.join(page_id);
        fs::create_dir_all(&dir)?;
        fs::write(dir.join(INDEX_FILE), serde_json::to_string_pretty(&entries)?)?;
        Ok(())
    }
}

pub fn element_id(page_id: &str, index: usize) -> String {
    format!("{page_id}/elem{index}")
}

/// Integer pixel rectangle covering the clamped box, or `None` when nothing
/// of it lies on the page.
fn pixel_rect(b: &BoundingBox, size: PageSize) -> Option<(u32, u32, u32, u32)> {
    let c = b.clamp_to(size.width as f64, size.height as f64);
    let x0 = c.x.floor() as u32;
    let y0 = c.y.floor() as u32;
    let x1 = (c.right().ceil() as u32).min(size.width);
    let y1 = (c.bottom().ceil() as u32).min(size.height);
    (x1 > x0 && y1 > y0).then_some((x0, y0, x1 - x0, y1 - y0))
}

fn is_transparent(img: &RgbaImage) -> bool {
    let total = img.width() as u64 * img.height() as u64;
    if total == 0 {
        return false;
    }
    let see_through = img.pixels().filter(|p| p.0[3] < 255).count() as u64;
    see_through as f64 >= TRANSPARENT_FRACTION * total as f64
}

/// Crops every detection out of the page image and stores it as a PNG.
///
/// Previous entries for the same page are replaced. Boxes that clamp to zero
/// area are skipped and noted in `repo.warnings`.
pub fn crop_elements(
    image: &PageImage,
    set: &DetectionSet,
    mut repo: AssetRepository,
) -> Result<AssetRepository, DetectError> {
    let size = PageSize::new(image.width(), image.height());
    if let Some(page) = set.page_size {
        if page != size {
            return Err(DetectError::DimensionMismatch {
                image_w: size.width,
                image_h: size.height,
                page_w: page.width,
                page_h: page.height,
            });
        }
    }

    let page_id = set.page_id.as_str();
    repo.entries.retain(|e| e.page_id != page_id);
    let page_dir = repo.root.join(page_id);
    fs::create_dir_all(&page_dir)?;

    for (index, det) in set.detections.iter().enumerate() {
        let id = element_id(page_id, index);
        let Some((x, y, w, h)) = pixel_rect(&det.bbox, size) else {
            repo.warnings
                .push(format!("{id}: box lies outside the page or has zero area; skipped"));
            continue;
        };
        let crop = image::imageops::crop_imm(image, x, y, w, h).to_image();
        let rel = Path::new(page_id).join(format!("elem{index}.png"));
        crop.save(repo.root.join(&rel))?;

        let crop_box = BoundingBox::new(x as f64, y as f64, w as f64, h as f64);
        repo.entries.push(AssetEntry {
            element_id: id,
            page_id: page_id.to_string(),
            crop: crop_box,
            path: rel,
            transparent: is_transparent(&crop),
            clamped: det.bbox != det.bbox.clamp_to(size.width as f64, size.height as f64),
            background_removed: None,
        });
    }
    repo.write_index(page_id)?;
    Ok(repo)
}

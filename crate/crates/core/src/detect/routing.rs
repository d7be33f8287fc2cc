use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::DetectError;

/// Which detector supplies predictions for a category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Route {
    /// Large, context-dependent classes handled by the global-context detector.
    Global,
    /// Small, dense classes handled by the dense detector.
    Dense,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoutingEntry {
    pub label: String,
    pub route: Route,
}

/// Per-category selection between the two detectors, keyed by category id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClassRoutingTable {
    entries: BTreeMap<i64, RoutingEntry>,
}

#[derive(Serialize, Deserialize)]
struct RoutingRecord {
    category_id: i64,
    label: String,
    route: Route,
}

impl ClassRoutingTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds or replaces a category.
    pub fn insert(&mut self, category: i64, label: impl Into<String>, route: Route) {
        self.entries.insert(
            category,
            RoutingEntry {
                label: label.into(),
                route,
            },
        );
    }

    pub fn route_of(&self, category: i64) -> Option<Route> {
        self.entries.get(&category).map(|e| e.route)
    }

    pub fn label_of(&self, category: i64) -> Option<&str> {
        self.entries.get(&category).map(|e| e.label.as_str())
    }

    /// Case-insensitive lookup of a category id by its name.
    pub fn id_by_label(&self, label: &str) -> Option<i64> {
        self.entries
            .iter()
            .find(|(_, e)| e.label.eq_ignore_ascii_case(label))
            .map(|(id, _)| *id)
    }

    pub fn route_by_label(&self, label: &str) -> Option<Route> {
        self.id_by_label(label).and_then(|id| self.route_of(id))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, &RoutingEntry)> {
        self.entries.iter().map(|(id, e)| (*id, e))
    }

    /// Reads a routing file: `[{"category_id": int, "label": str, "route": "GLOBAL"|"DENSE"}]`.
    pub fn from_json(bytes: &[u8]) -> Result<Self, DetectError> {
        let records: Vec<RoutingRecord> =
            serde_json::from_slice(bytes).map_err(|e| DetectError::Routing(e.to_string()))?;
        let mut table = Self::new();
        for r in records {
            if r.category_id < 0 {
                return Err(DetectError::Routing(format!(
                    "negative category id {}",
                    r.category_id
                )));
            }
            if table.entries.contains_key(&r.category_id) {
                return Err(DetectError::Routing(format!(
                    "category {} listed twice",
                    r.category_id
                )));
            }
            table.insert(r.category_id, r.label, r.route);
        }
        Ok(table)
    }

    pub fn to_json(&self) -> String {
        let records: Vec<RoutingRecord> = self
            .entries
            .iter()
            .map(|(id, e)| RoutingRecord {
                category_id: *id,
                label: e.label.clone(),
                route: e.route,
            })
            .collect();
        serde_json::to_string_pretty(&records).expect("routing records serialize")
    }
}

/// The shipped taxonomy: structural classes go to the global detector,
/// small repeated widgets to the dense one.
pub fn default_routing() -> ClassRoutingTable {
    const CLASSES: [(&str, Route); 11] = [
        ("Navbar", Route::Global),
        ("Sidebar", Route::Global),
        ("Hero Image", Route::Global),
        ("Footer", Route::Global),
        ("Content Panel", Route::Global),
        ("Icon", Route::Dense),
        ("Button", Route::Dense),
        ("Text Label", Route::Dense),
        ("Input Field", Route::Dense),
        ("Thumbnail", Route::Dense),
        ("Logo", Route::Dense),
    ];
    let mut table = ClassRoutingTable::new();
    for (id, (label, route)) in CLASSES.into_iter().enumerate() {
        table.insert(id as i64, label, route);
    }
    table
}

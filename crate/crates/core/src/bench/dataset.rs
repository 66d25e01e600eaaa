//! Benchmark programs: a manifest plus one manual solution per program.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::source::{count_loc, parse, LocStats};
use crate::strip_merge::strip_text;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProgramCategory {
    Check,
    Filter,
    Map,
    Math,
    Merge,
    Reduce,
    Reorder,
    Search,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub category: ProgramCategory,
    /// Relative to the dataset root.
    pub file: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_loc: Option<LocStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub programs: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub id: String,
    pub category: ProgramCategory,
    pub manual_path: PathBuf,
    pub manual: String,
    /// Manual solution with annotations removed; the generation input.
    pub stripped: String,
    pub features: LocStats,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_loc: Option<LocStats>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseWarning {
    pub id: String,
    pub messages: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Dataset {
    pub entries: Vec<DatasetEntry>,
    /// Programs skipped because their manual solution did not parse cleanly.
    pub warnings: Vec<ParseWarning>,
}

impl Dataset {
    pub fn get(&self, id: &str) -> Option<&DatasetEntry> {
        self.entries.iter().find(|e| e.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DatasetError {
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("program {id}: cannot read {path}: {message}")]
    MissingFile {
        id: String,
        path: PathBuf,
        message: String,
    },
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Reads `root/manifest.json` and every program it lists, in manifest order.
pub fn load_dataset(root: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    let root = root.as_ref();
    let path = root.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| DatasetError::Manifest(format!("{}: {e}", path.display())))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| DatasetError::Manifest(format!("{}: {e}", path.display())))?;
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Dataset::default();
    for m in manifest.programs {
        if !seen.insert(m.id.clone()) {
            return Err(DatasetError::Manifest(format!(
                "duplicate program id {}",
                m.id
            )));
        }
        let manual_path = root.join(&m.file);
        let manual =
            std::fs::read_to_string(&manual_path).map_err(|e| DatasetError::MissingFile {
                id: m.id.clone(),
                path: manual_path.clone(),
                message: e.to_string(),
            })?;
        let file = parse(&manual);
        if !file.warnings.is_empty() {
            tracing::warn!(id = %m.id, "skipping program: {}", file.warnings.join("; "));
            out.warnings.push(ParseWarning {
                id: m.id,
                messages: file.warnings,
            });
            continue;
        }
        out.entries.push(DatasetEntry {
            id: m.id,
            category: m.category,
            stripped: strip_text(&manual),
            features: count_loc(&file),
            manual,
            manual_path,
            expected_loc: m.expected_loc,
        });
    }
    Ok(out)
}

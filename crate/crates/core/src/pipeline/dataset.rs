use std::collections::BTreeMap;
use std::path::Path;

use super::PipelineError;
use crate::crystal::{parse_structure, CrystalStructure, StructureRecord};
use crate::elementkg::ElementTable;

/// One dataset entry: a validated structure plus its regression targets.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub structure: CrystalStructure,
    pub targets: BTreeMap<String, f64>,
}

impl DatasetRecord {
    pub fn id(&self) -> &str {
        &self.structure.id
    }

    pub fn target(&self, name: &str) -> Option<f64> {
        self.targets.get(name).copied()
    }
}

/// Parses newline-delimited JSON structure records. Blank lines are
/// skipped; any malformed line fails with its 1-based line number.
pub fn parse_dataset(text: &str, table: &ElementTable) -> Result<Vec<DatasetRecord>, PipelineError> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| PipelineError::Parse {
            line: line_no,
            message,
        };
        let raw: StructureRecord =
            serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        let structure = parse_structure(&raw, table).map_err(|e| bad(e.to_string()))?;
        for (name, value) in &structure.targets {
            if !value.is_finite() {
                return Err(bad(format!("target {name:?} is not finite")));
            }
        }
        records.push(DatasetRecord {
            targets: structure.targets.clone(),
            structure,
        });
    }
    Ok(records)
}

pub fn load_dataset(path: &Path, table: &ElementTable) -> Result<Vec<DatasetRecord>, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        PipelineError::MissingInput(format!("dataset {}: {e}", path.display()))
    })?;
    parse_dataset(&text, table)
}

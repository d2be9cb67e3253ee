//! CSV results with a JSON provenance sidecar.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// Twelve significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.11e}")
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("json")
}

#[derive(Debug, Serialize)]
pub struct Provenance<'a, C: Serialize, S: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub seed: u64,
    pub config_sha256: String,
    pub rows: usize,
    pub config: &'a C,
    pub summary: S,
}

pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<I: IntoIterator<Item = S>, S: Into<String>>(header: I) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(|e| CliError::Io(e.to_string()))?;
        for row in &self.rows {
            w.write_record(row).map_err(|e| CliError::Io(e.to_string()))?;
        }
        w.into_inner().map_err(|e| CliError::Io(e.to_string()))
    }
}

/// Writes the CSV and its sidecar.
pub fn write_outputs<C: Serialize, S: Serialize>(
    out: &Path,
    table: &Table,
    provenance: &Provenance<'_, C, S>,
) -> Result<(), CliError> {
    let io = |p: &Path, e: std::io::Error| CliError::Io(format!("cannot write {}: {e}", p.display()));
    std::fs::write(out, table.to_csv()?).map_err(|e| io(out, e))?;
    let side = sidecar_path(out);
    let mut json = serde_json::to_string_pretty(provenance).map_err(|e| CliError::Io(e.to_string()))?;
    json.push('\n');
    std::fs::write(&side, json).map_err(|e| io(&side, e))
}

//! CSV tables and JSON run manifests.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

/// Writes `rows` as an RFC-4180 CSV with a header row.
pub fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub flags: serde_json::Value,
    pub seed: u64,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)?;
        w.flush()
    }
}

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

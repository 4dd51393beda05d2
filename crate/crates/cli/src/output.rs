//! CSV emission. Every file starts with a `#` line carrying the command, the config
//! hash and the seed, followed by the column header.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use qgfbsde_core::SeedSpec;

use crate::error::CliError;

pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Table { columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Shortest round-trip decimal representation.
pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn write_csv(
    dir: &Path,
    name: &str,
    command: &str,
    config_hash: &str,
    seed: SeedSpec,
    table: &Table,
) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    let io = |e| CliError::io(&path, e);
    let mut file = File::create(&path).map_err(io)?;
    writeln!(
        file,
        "# qgfbsde {command} config_sha256={config_hash} seed={}:{}",
        seed.master, seed.stream
    )
    .map_err(io)?;
    let mut w = csv::Writer::from_writer(file);
    let wrap = |e: csv::Error| match CliError::from(e) {
        CliError::Io { source, .. } => CliError::io(&path, source),
        other => other,
    };
    w.write_record(&table.columns).map_err(wrap)?;
    for row in &table.rows {
        w.write_record(row).map_err(wrap)?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

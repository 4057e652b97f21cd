use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Collects output files and writes them together with the manifest.
pub struct OutputSet {
    dir: PathBuf,
    files: BTreeMap<String, String>,
}

impl OutputSet {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(OutputSet { dir: dir.to_path_buf(), files: BTreeMap::new() })
    }

    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).map_err(csv_io)?;
        for row in rows {
            w.write_record(row.iter().map(|x| fmt_f64(*x))).map_err(csv_io)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        self.write_bytes(name, &bytes)
    }

    fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.files.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    /// Write the manifest: resolved config, derived quantities, summary and output hashes.
    pub fn finish(mut self, config: &RunConfig, resolved: Value, summary: Value) -> Result<PathBuf, CliError> {
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: config.command.clone().unwrap_or_default(),
            config,
            resolved,
            summary,
            outputs: self.files.iter().map(|(k, v)| (k.clone(), json!({ "sha256": v }))).collect(),
        };
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        let path = self.dir.join(MANIFEST_FILE);
        fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.files.clear();
        Ok(path)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: String,
    config: &'a RunConfig,
    resolved: Value,
    summary: Value,
    outputs: BTreeMap<String, Value>,
}

fn csv_io(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}

/// Read a two-column `power_mw,intensity` table.
pub fn read_gain_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let bad = |msg: String| CliError::Validation(format!("{}: {msg}", path.display()));
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.len() != 2 || &header[0] != "power_mw" || &header[1] != "intensity" {
        return Err(bad(format!("expected header power_mw,intensity, got {:?}", header.iter().collect::<Vec<_>>())));
    }
    let (mut p, mut i) = (Vec::new(), Vec::new());
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let parse = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("row {}: `{s}`: {e}", line + 2)));
        p.push(parse(&rec[0])?);
        i.push(parse(&rec[1])?);
    }
    Ok((p, i))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_roundtrips() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 8.17e5, -2.5e-7, f64::MAX, 0.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn sha_of_empty() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}

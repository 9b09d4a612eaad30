//! CSV tables with a unit row, and the JSON run manifest.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

/// Header suffix → unit row entry. Longer suffixes first.
const UNITS: &[(&str, &str)] = &[
    ("_per_um", "1/um"),
    ("_per_s", "1/s"),
    ("_dimless", "1"),
    ("_ghz", "GHz"),
    ("_mhz", "MHz"),
    ("_khz", "kHz"),
    ("_mt", "mT"),
    ("_mk", "mK"),
    ("_nm", "nm"),
    ("_um", "um"),
    ("_us", "us"),
];

pub fn unit_of(column: &str) -> Option<&'static str> {
    UNITS.iter().find(|(s, _)| column.ends_with(s)).map(|&(_, u)| u)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn render_csv(columns: &[&str], rows: &[Vec<f64>]) -> io::Result<String> {
    let units = columns
        .iter()
        .map(|c| unit_of(c).ok_or_else(|| io::Error::other(format!("column {c} has no unit suffix"))))
        .collect::<io::Result<Vec<_>>>()?;
    let mut s = columns.join(",");
    s.push('\n');
    s.push_str(&units.join(","));
    s.push('\n');
    for r in rows {
        debug_assert_eq!(r.len(), columns.len());
        let line: Vec<String> = r.iter().map(|v| format!("{v:.12e}")).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    Ok(s)
}

#[derive(Debug, Default)]
pub struct Outputs {
    pub dir: PathBuf,
    pub files: Vec<Value>,
    pub results: Map<String, Value>,
    pub warnings: Vec<String>,
}

impl Outputs {
    pub fn new(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), ..Default::default() })
    }

    pub fn csv(&mut self, name: &str, columns: &[&str], rows: &[Vec<f64>]) -> io::Result<()> {
        let text = render_csv(columns, rows)?;
        fs::write(self.dir.join(name), &text)?;
        self.files.push(json!({ "file": name, "rows": rows.len(), "sha256": sha256_hex(text.as_bytes()) }));
        Ok(())
    }

    pub fn result(&mut self, key: &str, v: impl Into<Value>) {
        self.results.insert(key.to_string(), v.into());
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        self.warnings.push(msg.into());
    }
}

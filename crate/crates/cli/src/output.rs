//! Artifact files: CSV tables, JSON documents and the manifest.
//!
//! Every file names the experiment kind, its anchor and the tolerance applied.
//! Nothing time-dependent is written, so identical inputs give identical bytes.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

/// Shortest round-trip scientific notation.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: String,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, tolerance: impl Into<String>, pass: bool) -> Self {
        Self { name: name.into(), value, tolerance: tolerance.into(), pass }
    }

    fn to_json(&self) -> Value {
        json!({ "name": self.name, "value": self.value, "tolerance": self.tolerance, "pass": self.pass })
    }
}

pub struct Artifacts {
    dir: PathBuf,
    kind: &'static str,
    anchor: &'static str,
    tolerance: String,
    files: Vec<String>,
}

impl Artifacts {
    pub fn create(dir: &Path, kind: &'static str, anchor: &'static str, tolerance: String) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), kind, anchor, tolerance, files: Vec::new() })
    }

    fn header(&self) -> String {
        format!("# kind={}, anchor=\"{}\", tolerance=\"{}\"\n", self.kind, self.anchor, self.tolerance)
    }

    pub fn write_csv(&mut self, name: &str, columns: &[&str], rows: &[Vec<String>]) -> io::Result<()> {
        let mut text = self.header();
        text.push_str(&columns.join(","));
        text.push('\n');
        for row in rows {
            debug_assert_eq!(row.len(), columns.len());
            text.push_str(&row.join(","));
            text.push('\n');
        }
        self.write(name, text)
    }

    /// Writes `body` with the identifying fields merged in.
    pub fn write_json(&mut self, name: &str, body: Value) -> io::Result<()> {
        let mut doc = json!({ "kind": self.kind, "anchor": self.anchor, "tolerance": self.tolerance });
        if let (Value::Object(d), Value::Object(b)) = (&mut doc, body) {
            d.extend(b);
        }
        let text = serde_json::to_string_pretty(&doc).map_err(io::Error::other)? + "\n";
        self.write(name, text)
    }

    fn write(&mut self, name: &str, text: String) -> io::Result<()> {
        fs::write(self.dir.join(name), text)?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// Writes `manifest.json` and returns whether every check passed.
    pub fn finish(mut self, config_sha256: &str, resolved: &Value, seed: u64, checks: &[Check]) -> io::Result<bool> {
        let pass = checks.iter().all(|c| c.pass);
        let mut files = self.files.clone();
        files.sort();
        let manifest = json!({
            "version": env!("CARGO_PKG_VERSION"),
            "config_sha256": config_sha256,
            "config": resolved,
            "seed": seed,
            "files": files,
            "status": if pass { "pass" } else { "fail" },
            "checks": checks.iter().map(Check::to_json).collect::<Vec<_>>(),
        });
        self.write_json("manifest.json", manifest)?;
        Ok(pass)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_use_round_trip_scientific_notation() {
        assert_eq!(num(1.5), "1.5e0");
        assert_eq!(num(-0.00125), "-1.25e-3");
        assert_eq!(num(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn files_carry_the_identifying_header() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = Artifacts::create(dir.path(), "elliptic_solve", "anchor text", "1e-8".into()).unwrap();
        a.write_csv("t.csv", &["a", "b"], &[vec![num(1.0), num(2.0)]]).unwrap();
        let pass = a.finish("abc", &json!({}), 0, &[Check::new("c", 0.0, "0", true)]).unwrap();
        assert!(pass);
        let csv = fs::read_to_string(dir.path().join("t.csv")).unwrap();
        assert_eq!(csv, "# kind=elliptic_solve, anchor=\"anchor text\", tolerance=\"1e-8\"\na,b\n1e0,2e0\n");
        let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["kind"], "elliptic_solve");
        assert_eq!(manifest["files"], json!(["t.csv"]));
        assert_eq!(manifest["status"], "pass");
    }
}

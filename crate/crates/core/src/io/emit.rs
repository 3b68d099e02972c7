//! Result files. Numbers are written as `{:.11e}` (12 significant digits),
//! NaN as `NaN`; JSON reports carry a schema tag.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

pub const REPORT_SCHEMA: &str = "nvcavity-report/1";

pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.11e}")
    }
}

/// A CSV table with a header row; cells are pre-formatted strings.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row.iter().map(|&x| fmt_num(x)).collect());
    }

    pub fn push_cells(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

/// JSON wrapper with the schema tag.
#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    schema: &'static str,
    kind: &'a str,
    data: &'a T,
}

pub fn report_json<T: Serialize>(kind: &str, data: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&Report { schema: REPORT_SCHEMA, kind, data })
        .map_err(|e| Error::Data(format!("cannot serialise report: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// Collects output files and writes each exactly once.
#[derive(Debug)]
pub struct OutputSet {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

impl OutputSet {
    pub fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf(), files: Vec::new() }
    }

    pub fn add(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    pub fn csv(&mut self, name: &str, table: &Table) {
        self.add(name, table.to_csv());
    }

    pub fn json<T: Serialize>(&mut self, name: &str, kind: &str, data: &T) -> Result<()> {
        let s = report_json(kind, data)?;
        self.add(name, s);
        Ok(())
    }

    pub fn names(&self) -> Vec<&str> {
        self.files.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn write(self) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(&self.dir).map_err(|e| Error::io(self.dir.display().to_string(), e))?;
        let mut written = Vec::new();
        for (name, contents) in self.files {
            let path = self.dir.join(&name);
            fs::write(&path, contents).map_err(|e| Error::io(path.display().to_string(), e))?;
            written.push(path);
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(1.0), "1.00000000000e0");
        assert_eq!(fmt_num(-2.5e-7), "-2.50000000000e-7");
        assert_eq!(fmt_num(f64::NAN), "NaN");
        let x = 0.1234567890123456;
        let back: f64 = fmt_num(x).parse().unwrap();
        assert!((back - x).abs() <= 5e-12 * x, "{} {back}", fmt_num(x));
    }

    #[test]
    fn empty_table_keeps_header() {
        let t = Table::new(&["a", "b"]);
        assert_eq!(t.to_csv(), "a,b\n");
    }

    #[test]
    fn json_round_trips() {
        #[derive(Serialize)]
        struct R {
            q: f64,
            list: Vec<f64>,
        }
        let s = report_json("fit", &R { q: 1.389, list: vec![1.0, 2.5] }).unwrap();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["schema"], REPORT_SCHEMA);
        assert_eq!(v["data"]["q"], 1.389);
        assert_eq!(v["data"]["list"][1], 2.5);
    }

    #[test]
    fn writes_into_directory() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputSet::new(&dir.path().join("sub"));
        out.csv("t.csv", &Table::new(&["x"]));
        let paths = out.write().unwrap();
        assert_eq!(std::fs::read_to_string(&paths[0]).unwrap(), "x\n");
    }
}

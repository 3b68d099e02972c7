//! Transmission scans as CSV.
//!
//! Header is mandatory: the first column names the tuning axis, either
//! `B_mT` (field magnitude) or `f_shift_MHz` (cavity minus ensemble
//! frequency), followed by
//! `f_probe_MHz`, `power` and optionally `variance`. Lines starting with `#`
//! before the header carry free-form provenance and are kept.

use std::path::Path;

use crate::error::{Error, Result};
use crate::resolvent::{Scan, ScanKey};
use crate::units::{mhz, to_mhz};

use super::emit::fmt_num;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TuningAxis {
    FieldMilliTesla,
    ShiftMhz,
}

impl TuningAxis {
    fn column(self) -> &'static str {
        match self {
            TuningAxis::FieldMilliTesla => "B_mT",
            TuningAxis::ShiftMhz => "f_shift_MHz",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRow {
    pub tuning: f64,
    pub probe_mhz: f64,
    pub power: f64,
    pub variance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanTable {
    pub axis: TuningAxis,
    pub provenance: Vec<String>,
    /// Sorted by tuning value, then probe frequency.
    pub rows: Vec<ScanRow>,
    /// Line numbers of rows dropped for non-finite values.
    pub rejected: Vec<usize>,
}

impl ScanTable {
    pub fn new(axis: TuningAxis, provenance: Vec<String>, mut rows: Vec<ScanRow>) -> Result<Self> {
        if rows.iter().any(|r| !row_finite(r)) {
            return Err(Error::invalid("scan rows must be finite"));
        }
        sort_rows(&mut rows);
        Ok(Self { axis, provenance, rows, rejected: Vec::new() })
    }

    pub fn has_variance(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| r.variance.is_some())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for p in &self.provenance {
            out.push_str("# ");
            out.push_str(p);
            out.push('\n');
        }
        let var = self.has_variance();
        out.push_str(self.axis.column());
        out.push_str(",f_probe_MHz,power");
        if var {
            out.push_str(",variance");
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{},{},{}", fmt_num(r.tuning), fmt_num(r.probe_mhz), fmt_num(r.power)));
            if let (true, Some(v)) = (var, r.variance) {
                out.push(',');
                out.push_str(&fmt_num(v));
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut provenance = Vec::new();
        let mut lines = text.lines().enumerate().skip_while(|(_, l)| {
            let t = l.trim();
            if let Some(p) = t.strip_prefix('#') {
                provenance.push(p.trim().to_string());
                true
            } else {
                t.is_empty()
            }
        });
        let (_, header) = lines.next().ok_or_else(|| Error::Data("scan file has no header".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let axis = match cols.first().copied() {
            Some("B_mT") => TuningAxis::FieldMilliTesla,
            Some("f_shift_MHz") => TuningAxis::ShiftMhz,
            _ => {
                return Err(Error::Data(format!(
                    "missing header: expected 'B_mT' or 'f_shift_MHz' first, got '{header}'"
                )))
            }
        };
        let with_var = match &cols[1..] {
            ["f_probe_MHz", "power"] => false,
            ["f_probe_MHz", "power", "variance"] => true,
            _ => return Err(Error::Data(format!("unexpected header columns '{header}'"))),
        };
        let width = if with_var { 4 } else { 3 };
        let mut rows = Vec::new();
        let mut malformed = Vec::new();
        let mut rejected = Vec::new();
        for (i, line) in lines {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let parsed: std::result::Result<Vec<f64>, _> = t.split(',').map(|f| f.trim().parse::<f64>()).collect();
            match parsed {
                Ok(v) if v.len() == width => {
                    let row = ScanRow { tuning: v[0], probe_mhz: v[1], power: v[2], variance: with_var.then(|| v[3]) };
                    if row_finite(&row) {
                        rows.push(row);
                    } else {
                        rejected.push(i + 1);
                    }
                }
                _ => malformed.push(i + 1),
            }
        }
        if !malformed.is_empty() {
            let shown: Vec<String> = malformed.iter().take(20).map(|l| l.to_string()).collect();
            return Err(Error::Data(format!(
                "{} malformed rows, lines {}{}",
                malformed.len(),
                shown.join(", "),
                if malformed.len() > 20 { ", ..." } else { "" }
            )));
        }
        sort_rows(&mut rows);
        Ok(Self { axis, provenance, rows, rejected })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::parse(&text)
    }

    /// One scan per distinct tuning value, probe in rad/s, keys in tesla or rad/s.
    pub fn to_scans(&self) -> Vec<Scan> {
        let mut out: Vec<Scan> = Vec::new();
        for r in &self.rows {
            let key = match self.axis {
                TuningAxis::FieldMilliTesla => ScanKey::Field(r.tuning * 1e-3),
                TuningAxis::ShiftMhz => ScanKey::Shift(mhz(r.tuning)),
            };
            let new = match out.last() {
                Some(s) => s.key != key,
                None => true,
            };
            if new {
                out.push(Scan { key, probe: Vec::new(), power: Vec::new(), variance: self.has_variance().then(Vec::new) });
            }
            let s = out.last_mut().expect("pushed above");
            s.probe.push(mhz(r.probe_mhz));
            s.power.push(r.power);
            if let (Some(v), Some(x)) = (s.variance.as_mut(), r.variance) {
                v.push(x);
            }
        }
        out
    }

    pub fn from_scans(scans: &[Scan], provenance: Vec<String>) -> Result<Self> {
        let axis = match scans.first().map(|s| s.key) {
            Some(ScanKey::Field(_)) => TuningAxis::FieldMilliTesla,
            _ => TuningAxis::ShiftMhz,
        };
        let mut rows = Vec::new();
        for s in scans {
            let tuning = match (s.key, axis) {
                (ScanKey::Field(b), TuningAxis::FieldMilliTesla) => b * 1e3,
                (ScanKey::Shift(d), TuningAxis::ShiftMhz) => to_mhz(d),
                _ => return Err(Error::invalid("scans mix field and shift keys")),
            };
            for (k, (&w, &p)) in s.probe.iter().zip(&s.power).enumerate() {
                let variance = s.variance.as_ref().map(|v| v[k]);
                rows.push(ScanRow { tuning, probe_mhz: to_mhz(w), power: p, variance });
            }
        }
        Self::new(axis, provenance, rows)
    }
}

fn row_finite(r: &ScanRow) -> bool {
    r.tuning.is_finite() && r.probe_mhz.is_finite() && r.power.is_finite() && r.variance.is_none_or(f64::is_finite)
}

fn sort_rows(rows: &mut [ScanRow]) {
    rows.sort_by(|a, b| a.tuning.total_cmp(&b.tuning).then(a.probe_mhz.total_cmp(&b.probe_mhz)));
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = "# synthetic\nf_shift_MHz,f_probe_MHz,power\n1,2700.5,0.25\n0,2700,0.5\n0,2699,0.125\n";

    #[test]
    fn well_formed_table() {
        let t = ScanTable::parse(GOOD).unwrap();
        assert_eq!(t.rows.len(), 3);
        assert_eq!(t.provenance, vec!["synthetic".to_string()]);
        assert_eq!(t.rows[0].probe_mhz, 2699.0);
        let scans = t.to_scans();
        assert_eq!(scans.len(), 2);
        assert_eq!(scans[0].probe.len(), 2);
    }

    #[test]
    fn header_required() {
        assert!(matches!(ScanTable::parse("0,2700,0.5\n"), Err(Error::Data(_))));
        assert!(ScanTable::parse("").is_err());
    }

    #[test]
    fn bad_rows() {
        let text = "B_mT,f_probe_MHz,power\n1,2,3\n1,x,3\n1,2\n2,3,NaN\n";
        let e = ScanTable::parse(text).unwrap_err().to_string();
        assert!(e.contains("2 malformed rows, lines 3, 4"), "{e}");
        let t = ScanTable::parse("B_mT,f_probe_MHz,power\n1,2,3\n2,3,inf\n").unwrap();
        assert_eq!((t.rows.len(), t.rejected.clone()), (1, vec![3]));
    }

    #[test]
    fn emit_ingest_identity() {
        let rows: Vec<ScanRow> = (0..50)
            .map(|k| {
                let x = k as f64;
                ScanRow { tuning: -3.7 + 0.1 * x, probe_mhz: 2700.0 + x / 3.0, power: (x + 0.5).sqrt() * 1e-7, variance: Some(1e-3 / (x + 1.0)) }
            })
            .collect();
        let t = ScanTable::new(TuningAxis::FieldMilliTesla, vec!["round trip".into()], rows).unwrap();
        let back = ScanTable::parse(&t.to_csv()).unwrap();
        assert_eq!(back.rows.len(), t.rows.len());
        for (a, b) in t.rows.iter().zip(&back.rows) {
            for (x, y) in [(a.tuning, b.tuning), (a.probe_mhz, b.probe_mhz), (a.power, b.power), (a.variance.unwrap(), b.variance.unwrap())] {
                assert!((x - y).abs() <= 5e-12 * x.abs(), "{x} {y}");
            }
        }
        assert_eq!(back.to_csv(), t.to_csv());
    }
}

//! Flat `key = value [unit]` run configuration.
//!
//! Every key is declared in [`SCHEMA`] with a physical dimension and a
//! canonical unit. A bare number is read in the canonical unit; a suffix
//! must belong to the key's dimension and is converted. Units are declared,
//! never inferred from magnitude.
//!
//! ```text
//! # comment
//! model = resolvent
//! system.kappa = 400 kHz
//! grid.probe.count = 801
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::model::{SystemParams, ThermalBath};
use crate::resolvent::{CouplingDensity, Family};
use crate::units::{hz, mhz};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dim {
    /// Ordinary frequency; the payload is the canonical unit.
    Frequency(FreqUnit),
    Temperature,
    Field,
    Angle,
    Number,
    Count,
    Seed,
    Choice(&'static [&'static str]),
    Path,
    Flag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FreqUnit {
    Hz,
    MHz,
}

pub struct KeyDef {
    pub key: &'static str,
    pub dim: Dim,
    /// `None` marks a key without default (optional unless listed in REQUIRED).
    pub default: Option<&'static str>,
    pub help: &'static str,
}

const MODELS: &[&str] = &["oscillator", "cumulant", "resolvent", "maser", "levels"];
const FAMILIES: &[&str] = &["qgauss", "gauss", "lorentz"];
const REQUIRED: &[&str] = &["model"];

use Dim::*;
use FreqUnit::{Hz as HZ, MHz as MHZ};

macro_rules! key {
    ($k:expr, $d:expr, $def:expr, $h:expr) => {
        KeyDef { key: $k, dim: $d, default: $def, help: $h }
    };
}

pub const SCHEMA: &[KeyDef] = &[
    key!("model", Choice(MODELS), None, "oscillator | cumulant | resolvent | maser | levels"),
    key!("system.f_c", Frequency(MHZ), Some("2700"), "cavity frequency"),
    key!("system.kappa", Frequency(MHZ), Some("0.4"), "cavity field decay (HWHM)"),
    key!("system.gamma_hom", Frequency(MHZ), Some("0.001"), "homogeneous spin decay"),
    key!("system.gamma_p", Frequency(MHZ), Some("0"), "pure dephasing / effective inhomogeneous width"),
    key!("system.coupling", Frequency(MHZ), Some("9.51"), "collective coupling g sqrt(N)"),
    key!("system.g", Frequency(HZ), None, "single-spin coupling; replaces system.coupling"),
    key!("system.n_spins", Number, Some("1e12"), "number of spins"),
    key!("system.eta", Frequency(MHZ), Some("0.004"), "probe drive amplitude"),
    key!("oscillator.gamma", Frequency(MHZ), Some("10.92"), "effective spin width of the oscillator model"),
    key!("density.family", Choice(FAMILIES), Some("qgauss"), "coupling density shape"),
    key!("density.q", Number, Some("1.389"), "q-Gaussian shape parameter"),
    key!("density.fwhm", Frequency(MHZ), Some("12.54"), "density full width at half maximum"),
    key!("density.detuning", Frequency(MHZ), Some("0"), "density centre minus cavity frequency"),
    key!("bath.temperature", Temperature, Some("0"), "bath temperature"),
    key!("levels.d", Frequency(MHZ), Some("2880"), "zero-field splitting D"),
    key!("levels.e", Frequency(MHZ), Some("5"), "strain splitting E"),
    key!("levels.g_factor", Number, Some("2"), "electron g factor"),
    key!("levels.phi", Angle, Some("0"), "in-plane field angle from [100]"),
    key!("maser.w", Frequency(HZ), Some("1000"), "incoherent pump rate"),
    key!("maser.detuning", Frequency(HZ), Some("0"), "ensemble minus cavity frequency"),
    key!("grid.probe.start", Frequency(MHZ), Some("-30"), "probe offset from f_c"),
    key!("grid.probe.stop", Frequency(MHZ), Some("30"), ""),
    key!("grid.probe.count", Count, Some("601"), ""),
    key!("grid.tuning.start", Frequency(MHZ), Some("-40"), "ensemble shift from f_c"),
    key!("grid.tuning.stop", Frequency(MHZ), Some("40"), ""),
    key!("grid.tuning.count", Count, Some("81"), ""),
    key!("grid.temperature.start", Temperature, Some("0.1"), ""),
    key!("grid.temperature.stop", Temperature, Some("1"), ""),
    key!("grid.temperature.count", Count, Some("10"), ""),
    key!("grid.field.start", Field, Some("0"), "field magnitude"),
    key!("grid.field.stop", Field, Some("30"), ""),
    key!("grid.field.count", Count, Some("301"), ""),
    key!("grid.coupling.start", Frequency(MHZ), Some("12"), "collective coupling sweep"),
    key!("grid.coupling.stop", Frequency(MHZ), Some("30"), ""),
    key!("grid.coupling.count", Count, Some("7"), ""),
    key!("grid.w.start", Frequency(HZ), Some("0.01"), "pump rate, log spaced"),
    key!("grid.w.stop", Frequency(HZ), Some("1e9"), ""),
    key!("grid.w.count", Count, Some("40"), ""),
    key!("grid.gamma_p.start", Frequency(HZ), Some("1"), "inhomogeneous width, log spaced"),
    key!("grid.gamma_p.stop", Frequency(HZ), Some("1e11"), ""),
    key!("grid.gamma_p.count", Count, Some("40"), ""),
    key!("reconstruct.start", Frequency(MHZ), Some("-50"), "extraction window, offset from f_c"),
    key!("reconstruct.stop", Frequency(MHZ), Some("50"), ""),
    key!("input.scan", Path, None, "scan CSV for reconstruct"),
    key!("output.dir", Path, Some("."), "output directory"),
    key!("output.plots", Flag, Some("false"), "also write SVG plots"),
    key!("noise.level", Number, Some("0"), "relative Gaussian noise for synth"),
    key!("seed", Seed, None, "RNG seed, required when noise.level > 0"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Oscillator,
    Cumulant,
    Resolvent,
    Maser,
    Levels,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Int(u64),
    Text(String),
    Flag(bool),
}

/// Parsed configuration: canonical values for every key with a default or
/// an explicit setting.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<&'static str, Value>,
    explicit: BTreeSet<&'static str>,
}

fn def(key: &str) -> Option<&'static KeyDef> {
    SCHEMA.iter().find(|d| d.key == key)
}

fn unit_factor(dim: Dim, unit: &str) -> Option<f64> {
    match dim {
        Frequency(canon) => {
            let hz = match unit {
                "Hz" => 1.0,
                "kHz" => 1e3,
                "MHz" => 1e6,
                "GHz" => 1e9,
                _ => return None,
            };
            Some(match canon {
                HZ => hz,
                MHZ => hz / 1e6,
            })
        }
        Temperature => match unit {
            "K" => Some(1.0),
            "mK" => Some(1e-3),
            _ => None,
        },
        Field => match unit {
            "mT" => Some(1.0),
            "T" => Some(1e3),
            "G" => Some(0.1),
            _ => None,
        },
        Angle => match unit {
            "deg" => Some(1.0),
            "rad" => Some(180.0 / std::f64::consts::PI),
            _ => None,
        },
        _ => None,
    }
}

fn canonical_unit(dim: Dim) -> Option<&'static str> {
    match dim {
        Frequency(HZ) => Some("Hz"),
        Frequency(MHZ) => Some("MHz"),
        Temperature => Some("K"),
        Field => Some("mT"),
        Angle => Some("deg"),
        _ => None,
    }
}

const ALL_UNITS: &[&str] = &["GHz", "MHz", "kHz", "Hz", "mK", "K", "mT", "T", "G", "deg", "rad"];

fn split_unit(text: &str) -> (&str, Option<&str>) {
    let t = text.trim();
    if let Some((num, unit)) = t.rsplit_once(char::is_whitespace) {
        return (num.trim(), Some(unit));
    }
    for u in ALL_UNITS {
        if let Some(num) = t.strip_suffix(u) {
            if num.parse::<f64>().is_ok() {
                return (num, Some(u));
            }
        }
    }
    (t, None)
}

fn parse_value(d: &KeyDef, raw: &str) -> std::result::Result<Value, String> {
    match d.dim {
        Frequency(_) | Temperature | Field | Angle | Number => {
            let (num, unit) = split_unit(raw);
            let x: f64 = num.parse().map_err(|_| format!("'{raw}' is not a number"))?;
            if !x.is_finite() {
                return Err(format!("'{raw}' is not finite"));
            }
            let factor = match unit {
                None => 1.0,
                Some(u) => unit_factor(d.dim, u).ok_or_else(|| match canonical_unit(d.dim) {
                    Some(c) => format!("unit '{u}' does not match the dimension of {} (canonical {c})", d.key),
                    None => format!("{} is dimensionless, got unit '{u}'", d.key),
                })?,
            };
            Ok(Value::Num(x * factor))
        }
        Count | Seed => {
            let v: u64 = raw.trim().parse().map_err(|_| format!("'{raw}' is not a non-negative integer"))?;
            Ok(Value::Int(v))
        }
        Choice(options) => {
            let v = raw.trim();
            if options.contains(&v) {
                Ok(Value::Text(v.to_string()))
            } else {
                Err(format!("'{v}' is not one of {}", options.join(", ")))
            }
        }
        Path => {
            let v = raw.trim();
            if v.is_empty() {
                Err("empty path".into())
            } else {
                Ok(Value::Text(v.to_string()))
            }
        }
        Flag => match raw.trim() {
            "true" => Ok(Value::Flag(true)),
            "false" => Ok(Value::Flag(false)),
            other => Err(format!("'{other}' is not true or false")),
        },
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        let mut explicit = BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (k, v) = body
                .split_once('=')
                .ok_or_else(|| Error::Config { line: line_no, msg: format!("expected 'key = value', got '{body}'") })?;
            let k = k.trim();
            let d = def(k).ok_or_else(|| Error::Config { line: line_no, msg: format!("unknown key '{k}'") })?;
            if !explicit.insert(d.key) {
                return Err(Error::Config { line: line_no, msg: format!("duplicate key '{k}'") });
            }
            let value = parse_value(d, v).map_err(|msg| Error::Config { line: line_no, msg: format!("{k}: {msg}") })?;
            values.insert(d.key, value);
        }
        for req in REQUIRED {
            if !explicit.contains(req) {
                return Err(Error::Config { line: 0, msg: format!("missing required key '{req}'") });
            }
        }
        if explicit.contains("system.g") && explicit.contains("system.coupling") {
            return Err(Error::Config { line: 0, msg: "set either system.g or system.coupling, not both".into() });
        }
        for d in SCHEMA {
            if let (Some(default), false) = (d.default, values.contains_key(d.key)) {
                let v = parse_value(d, default).expect("schema default parses");
                values.insert(d.key, v);
            }
        }
        Ok(Self { values, explicit })
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::parse(&text)
    }

    /// Every set key in schema order with its canonical unit; parsing the
    /// result gives back an equal configuration.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for d in SCHEMA {
            let Some(v) = self.values.get(d.key) else { continue };
            let s = match v {
                Value::Num(x) => match canonical_unit(d.dim) {
                    Some(u) => format!("{x:?} {u}"),
                    None => format!("{x:?}"),
                },
                Value::Int(n) => n.to_string(),
                Value::Text(t) => t.clone(),
                Value::Flag(b) => b.to_string(),
            };
            let _ = writeln!(out, "{} = {}", d.key, s);
        }
        out
    }

    /// Checks that need more than one key. Not part of `parse` so that
    /// command-line overrides (seed, output directory) can be applied first.
    pub fn validate(&self) -> Result<()> {
        for name in ["probe", "tuning", "temperature", "field", "coupling", "w", "gamma_p"] {
            let (a, b, n) = self.grid_spec(name);
            if n < 2 {
                return Err(Error::invalid(format!("grid.{name}.count must be >= 2, got {n}")));
            }
            if !(b > a) {
                return Err(Error::invalid(format!("grid.{name}: stop must exceed start")));
            }
        }
        for name in ["w", "gamma_p"] {
            if !(self.grid_spec(name).0 > 0.0) {
                return Err(Error::invalid(format!("grid.{name} is log spaced and needs start > 0")));
            }
        }
        if !(self.num("reconstruct.stop") > self.num("reconstruct.start")) {
            return Err(Error::invalid("reconstruct.stop must exceed reconstruct.start"));
        }
        let noise = self.num("noise.level");
        if !(noise >= 0.0) {
            return Err(Error::invalid("noise.level must be >= 0"));
        }
        if noise > 0.0 && self.seed().is_none() {
            return Err(Error::invalid("noise.level > 0 needs a seed (config key 'seed' or --seed)"));
        }
        if let Some(p) = self.input_scan() {
            if !p.exists() {
                return Err(Error::invalid(format!("input.scan '{}' does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn is_explicit(&self, key: &str) -> bool {
        self.explicit.contains(key)
    }

    fn get(&self, key: &str) -> Option<&Value> {
        debug_assert!(def(key).is_some(), "key {key} not in schema");
        self.values.get(key)
    }

    /// Canonical numeric value of a quantity key.
    pub fn num(&self, key: &str) -> f64 {
        match self.get(key) {
            Some(Value::Num(x)) => *x,
            other => panic!("{key} is not a numeric key with a value: {other:?}"),
        }
    }

    fn opt_num(&self, key: &str) -> Option<f64> {
        match self.get(key) {
            Some(Value::Num(x)) => Some(*x),
            _ => None,
        }
    }

    fn count(&self, key: &str) -> usize {
        match self.get(key) {
            Some(Value::Int(n)) => *n as usize,
            other => panic!("{key} is not a count: {other:?}"),
        }
    }

    fn text(&self, key: &str) -> Option<&str> {
        match self.get(key) {
            Some(Value::Text(t)) => Some(t),
            _ => None,
        }
    }

    pub fn model(&self) -> ModelKind {
        match self.text("model") {
            Some("oscillator") => ModelKind::Oscillator,
            Some("cumulant") => ModelKind::Cumulant,
            Some("resolvent") => ModelKind::Resolvent,
            Some("maser") => ModelKind::Maser,
            _ => ModelKind::Levels,
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self.get("seed") {
            Some(Value::Int(n)) => Some(*n),
            _ => None,
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.values.insert("seed", Value::Int(seed));
        self.explicit.insert("seed");
    }

    pub fn output_dir(&self) -> PathBuf {
        PathBuf::from(self.text("output.dir").unwrap_or("."))
    }

    pub fn set_output_dir(&mut self, dir: &std::path::Path) {
        self.values.insert("output.dir", Value::Text(dir.display().to_string()));
        self.explicit.insert("output.dir");
    }

    pub fn input_scan(&self) -> Option<PathBuf> {
        self.text("input.scan").map(PathBuf::from)
    }

    pub fn plots(&self) -> bool {
        matches!(self.get("output.plots"), Some(Value::Flag(true)))
    }

    /// (start, stop, count) in canonical units.
    pub fn grid_spec(&self, name: &str) -> (f64, f64, usize) {
        (
            self.num(&format!("grid.{name}.start")),
            self.num(&format!("grid.{name}.stop")),
            self.count(&format!("grid.{name}.count")),
        )
    }

    /// Grid points in canonical units; `w` and `gamma_p` are log spaced.
    pub fn grid(&self, name: &str) -> Vec<f64> {
        let (a, b, n) = self.grid_spec(name);
        let log = matches!(name, "w" | "gamma_p");
        (0..n)
            .map(|k| {
                let t = k as f64 / (n - 1) as f64;
                if k == 0 {
                    a
                } else if k == n - 1 {
                    b
                } else if log {
                    (a.ln() + t * (b.ln() - a.ln())).exp()
                } else {
                    a + t * (b - a)
                }
            })
            .collect()
    }

    /// Probe grid as absolute angular frequencies.
    pub fn probe_grid(&self) -> Vec<f64> {
        let fc = self.num("system.f_c");
        self.grid("probe").iter().map(|&d| mhz(fc + d)).collect()
    }

    pub fn system_params(&self) -> Result<SystemParams> {
        let n = self.num("system.n_spins");
        let g = match self.opt_num("system.g") {
            Some(g_hz) => hz(g_hz),
            None => mhz(self.num("system.coupling")) / n.sqrt(),
        };
        let p = SystemParams {
            omega_c: mhz(self.num("system.f_c")),
            kappa: mhz(self.num("system.kappa")),
            gamma_hom: mhz(self.num("system.gamma_hom")),
            gamma_p: mhz(self.num("system.gamma_p")),
            g,
            n_spins: n,
            eta: mhz(self.num("system.eta")),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn bath(&self) -> Result<ThermalBath> {
        ThermalBath::new(self.num("bath.temperature"))
    }

    pub fn family(&self) -> Family {
        match self.text("density.family") {
            Some("gauss") => Family::Gaussian,
            Some("lorentz") => Family::Lorentzian,
            _ => Family::QGaussian(self.num("density.q")),
        }
    }

    /// Density centred at f_c + detuning carrying the weight g^2 N.
    pub fn density(&self) -> Result<CouplingDensity> {
        let p = self.system_params()?;
        let center = mhz(self.num("system.f_c") + self.num("density.detuning"));
        CouplingDensity::of_family(self.family(), mhz(self.num("density.fwhm")), center, p.coupling_weight())
    }
}

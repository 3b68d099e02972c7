//! Configuration, scan files, synthetic data and result output.

pub mod config;
pub mod emit;
pub mod scan;
pub mod svg;
pub mod synth;

pub use config::{ModelKind, RunConfig};
pub use emit::{fmt_num, report_json, OutputSet, Table};
pub use scan::{ScanRow, ScanTable, TuningAxis};
pub use synth::{add_noise, synthesize_crossing, synthesize_scan};

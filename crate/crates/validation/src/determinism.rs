//! Two separate processes run the same CLI suite; their CSV and JSON outputs
//! must match byte for byte.
//!
//! The acceptance binary re-executes itself with [`CHILD_ARG`] to run one
//! suite, so each run starts from a fresh process (thread pool, allocator,
//! RNG state).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};

use crate::Outcome;

pub const CHILD_ARG: &str = "--run-determinism-suite";

const SEED: &str = "424242";

/// (output name, subcommand, config file)
const SUITE: &[(&str, &str, &str)] = &[
    ("levels", "levels", "levels.cfg"),
    ("transmission-oscillator", "transmission", "oscillator.cfg"),
    ("transmission-resolvent", "transmission", "resolvent.cfg"),
    ("synth-oscillator", "synth", "synth_oscillator.cfg"),
    ("synth-resolvent", "synth", "synth_resolvent.cfg"),
    ("reconstruct", "reconstruct", "reconstruct.cfg"),
    ("poles", "poles", "poles.cfg"),
    ("maser-map", "maser-map", "maser.cfg"),
    ("sweep-T", "sweep-T", "sweep.cfg"),
];

fn configs(shared_scan: &Path) -> Vec<(&'static str, String)> {
    let resolvent_grid = "grid.probe.start = -60\ngrid.probe.stop = 60\ngrid.probe.count = 241\n\
                          grid.tuning.start = -110\ngrid.tuning.stop = 110\ngrid.tuning.count = 441\n\
                          system.f_c = 2880\nsystem.gamma_hom = 1 Hz\n";
    vec![
        ("levels.cfg", "model = levels\ngrid.field.count = 61\nlevels.phi = 20\noutput.plots = true\n".into()),
        ("oscillator.cfg", "model = oscillator\ngrid.probe.count = 121\ngrid.tuning.count = 21\n".into()),
        ("resolvent.cfg", "model = resolvent\ngrid.probe.count = 121\ngrid.tuning.count = 11\noutput.plots = true\n".into()),
        ("synth_oscillator.cfg", "model = oscillator\ngrid.probe.count = 61\ngrid.tuning.count = 21\nnoise.level = 0.01\n".into()),
        ("synth_resolvent.cfg", format!("model = resolvent\n{resolvent_grid}noise.level = 0.02\n")),
        ("reconstruct.cfg", format!("model = resolvent\n{resolvent_grid}input.scan = {}\n", shared_scan.display())),
        ("poles.cfg", "model = resolvent\ndensity.q = 1.39\ndensity.fwhm = 10\nsystem.gamma_hom = 1 Hz\n".into()),
        (
            "maser.cfg",
            "model = maser\nsystem.f_c = 2880\nsystem.kappa = 1\nsystem.gamma_hom = 1 Hz\nsystem.g = 10 Hz\n\
             system.eta = 0\ngrid.w.count = 12\ngrid.gamma_p.count = 12\n"
                .into(),
        ),
        (
            "sweep.cfg",
            "model = cumulant\nsystem.gamma_p = 0.4\ngrid.probe.start = -24\ngrid.probe.stop = 24\n\
             grid.probe.count = 49\ngrid.temperature.count = 2\n"
                .into(),
        ),
    ]
}

fn invoke(args: &[&str]) -> ExitCode {
    let mut full = vec!["nvcavity"];
    full.extend_from_slice(args);
    nvcavity_cli::main_with(full)
}

/// Body of a child process. Mode "input" writes the shared input scan into
/// `out`; mode "suite" runs every suite entry into `out/<name>`.
pub fn run_child(mode: &str, cfg_dir: &Path, out: &Path) -> ExitCode {
    if mode == "input" {
        let cfg = cfg_dir.join("synth_resolvent.cfg");
        return invoke(&["synth", "--config", &cfg.to_string_lossy(), "--out", &out.to_string_lossy(), "--seed", SEED]);
    }
    for (name, sub, cfg) in SUITE {
        let cfg = cfg_dir.join(cfg);
        let dir = out.join(name);
        let code = invoke(&[sub, "--config", &cfg.to_string_lossy(), "--out", &dir.to_string_lossy(), "--seed", SEED]);
        if code != ExitCode::SUCCESS {
            eprintln!("determinism suite: {name} failed");
            return code;
        }
    }
    ExitCode::SUCCESS
}

fn collect(root: &Path) -> std::io::Result<BTreeMap<PathBuf, Vec<u8>>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else if matches!(path.extension().and_then(|e| e.to_str()), Some("csv" | "json")) {
                let bytes = fs::read(&path)?;
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), bytes);
            }
        }
    }
    Ok(out)
}

fn spawn(exe: &Path, mode: &str, cfg_dir: &Path, out: &Path, threads: Option<&str>) -> Result<(), String> {
    let mut cmd = Command::new(exe);
    cmd.arg(CHILD_ARG).arg(mode).arg(cfg_dir).arg(out);
    if let Some(t) = threads {
        cmd.env("RAYON_NUM_THREADS", t);
    }
    let o = cmd.output().map_err(|e| format!("cannot start child: {e}"))?;
    if !o.status.success() {
        return Err(format!("child run failed: {}", String::from_utf8_lossy(&o.stderr).trim()));
    }
    Ok(())
}

fn differences(a: &BTreeMap<PathBuf, Vec<u8>>, b: &BTreeMap<PathBuf, Vec<u8>>) -> Vec<String> {
    let mut diff = Vec::new();
    for (k, v) in a {
        match b.get(k) {
            Some(w) if w == v => {}
            Some(_) => diff.push(format!("{} differs", k.display())),
            None => diff.push(format!("{} missing in second run", k.display())),
        }
    }
    for k in b.keys().filter(|k| !a.contains_key(*k)) {
        diff.push(format!("{} missing in first run", k.display()));
    }
    diff
}

fn determinism_in(tmp: &Path) -> Result<Outcome, String> {
    let exe = std::env::current_exe().map_err(|e| e.to_string())?;
    let cfg_dir = tmp.join("configs");
    fs::create_dir_all(&cfg_dir).map_err(|e| e.to_string())?;
    let scan_dir = tmp.join("input");
    for (name, text) in configs(&scan_dir.join("scan.csv")) {
        fs::write(cfg_dir.join(name), text).map_err(|e| e.to_string())?;
    }
    // reconstruct needs an input scan; both runs read the same file
    spawn(&exe, "input", &cfg_dir, &scan_dir, None)?;

    let (a, b, c) = (tmp.join("run_a"), tmp.join("run_b"), tmp.join("run_single_thread"));
    spawn(&exe, "suite", &cfg_dir, &a, None)?;
    spawn(&exe, "suite", &cfg_dir, &b, None)?;
    let fa = collect(&a).map_err(|e| e.to_string())?;
    let fb = collect(&b).map_err(|e| e.to_string())?;
    let diff = differences(&fa, &fb);
    let bytes: usize = fa.values().map(Vec::len).sum();
    let mut o = Outcome::new(
        diff.is_empty() && !fa.is_empty(),
        format!("{} CSV/JSON files ({bytes} bytes) from {} subcommand runs, {} differences", fa.len(), SUITE.len(), diff.len()),
    );
    for d in diff.iter().take(5) {
        o = o.note(d.clone());
    }
    let note = match spawn(&exe, "suite", &cfg_dir, &c, Some("1")).and_then(|_| collect(&c).map_err(|e| e.to_string())) {
        Ok(fc) => format!("diagnostic, single-threaded third run: {} differences", differences(&fa, &fc).len()),
        Err(e) => format!("diagnostic, single-threaded third run failed: {e}"),
    };
    Ok(o.note(note))
}

pub fn determinism() -> Outcome {
    let tmp = match tempfile::tempdir() {
        Ok(t) => t,
        Err(e) => return Outcome::error(e),
    };
    determinism_in(tmp.path()).unwrap_or_else(Outcome::error)
}

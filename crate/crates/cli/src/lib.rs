//! Front end of the `nvcavity` binary: cavity transmission, ensemble
//! reconstruction and maser maps driven by a flat key-value config.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nvcavity_core::error::ErrorKind;
use nvcavity_core::io::RunConfig;
use nvcavity_core::Error;

#[derive(Parser)]
#[command(name = "nvcavity", version, about = "NV ensemble cavity QED models")]
pub struct Cli {
    /// Run configuration (`key = value [unit]` lines).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// RNG seed for synthetic noise; overrides `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for grid evaluation.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy, Debug)]
pub enum Command {
    /// NV transition frequencies over the field grid.
    Levels,
    /// Transmission map over probe and ensemble detuning.
    Transmission,
    /// Collective coupling versus temperature from the moment hierarchy.
    #[command(name = "sweep-T")]
    SweepT,
    /// Coupling density from a scan file, with a q-Gaussian fit.
    Reconstruct,
    /// Dressed-cavity poles over the coupling grid.
    Poles,
    /// Photon number and linewidth over pump rate and inhomogeneous width.
    MaserMap,
    /// Synthetic scan file from the oscillator or resolvent model.
    Synth,
}

impl Command {
    /// Model assumed when no config file is given.
    fn default_model(self) -> &'static str {
        match self {
            Command::Levels => "levels",
            Command::Transmission | Command::Synth => "oscillator",
            Command::SweepT => "cumulant",
            Command::Reconstruct | Command::Poles => "resolvent",
            Command::MaserMap => "maser",
        }
    }
}

/// Runs one subcommand; returns the files written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, Error> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::invalid("--threads must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::invalid(format!("cannot set up {n} threads: {e}")))?;
    }
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::parse(&format!("model = {}\n", cli.command.default_model()))?,
    };
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    if let Some(dir) = &cli.out {
        cfg.set_output_dir(dir);
    }
    cfg.validate()?;
    // everything is computed before the first file is written
    let out = commands::dispatch(cli.command, &cfg)?;
    out.write()
}

/// Parses `args` (program name first), runs, and maps errors to exit codes:
/// 2 validation, 3 numerical, 4 I/O.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("nvcavity: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Validation => 2,
                ErrorKind::Numerical => 3,
                ErrorKind::Io => 4,
            })
        }
    }
}

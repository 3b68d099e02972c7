//! One function per subcommand. Each returns the complete output set; the
//! caller writes it only after every computation has succeeded.

use serde::Serialize;

use nvcavity_core::cumulant::{probe_spectrum, rabi_vs_temperature, HierarchyConfig};
use nvcavity_core::io::config::ModelKind;
use nvcavity_core::io::{svg, synthesize_crossing, synthesize_scan, OutputSet, RunConfig, ScanTable, Table};
use nvcavity_core::levels::{transition_frequencies, Branch, FieldConfig, ZeroFieldParams};
use nvcavity_core::maser::{operating_map, PumpedParams};
use nvcavity_core::oscillator::{transmission_map, OscillatorSet};
use nvcavity_core::resolvent::{
    doublet_guesses, extract_all, find_poles, fit_qgaussian, rearrange_scans, reconstruct_density, transmission_gcc,
    DensityKind,
};
use nvcavity_core::units::{hz, mhz, to_mhz};
use nvcavity_core::{Error, Result, TransmissionSpectrum};

use crate::Command;

pub fn dispatch(cmd: Command, cfg: &RunConfig) -> Result<OutputSet> {
    let mut out = OutputSet::new(&cfg.output_dir());
    match cmd {
        Command::Levels => levels(cfg, &mut out)?,
        Command::Transmission => transmission(cfg, &mut out)?,
        Command::SweepT => sweep_t(cfg, &mut out)?,
        Command::Reconstruct => reconstruct(cfg, &mut out)?,
        Command::Poles => poles(cfg, &mut out)?,
        Command::MaserMap => maser_map(cfg, &mut out)?,
        Command::Synth => synth(cfg, &mut out)?,
    }
    out.add("config.txt", echo(cfg));
    Ok(out)
}

/// The effective configuration without the output directory, so that runs
/// into different directories produce identical files.
fn echo(cfg: &RunConfig) -> String {
    cfg.to_text().lines().filter(|l| !l.starts_with("output.dir ")).map(|l| format!("{l}\n")).collect()
}

fn model_name(m: ModelKind) -> &'static str {
    match m {
        ModelKind::Oscillator => "oscillator",
        ModelKind::Cumulant => "cumulant",
        ModelKind::Resolvent => "resolvent",
        ModelKind::Maser => "maser",
        ModelKind::Levels => "levels",
    }
}

fn require(cfg: &RunConfig, cmd: &str, allowed: &[ModelKind]) -> Result<()> {
    let m = cfg.model();
    if allowed.contains(&m) {
        return Ok(());
    }
    let names: Vec<&str> = allowed.iter().map(|&k| model_name(k)).collect();
    Err(Error::invalid(format!("{cmd} does not run model '{}'; use one of: {}", model_name(m), names.join(", "))))
}

fn zero_field(cfg: &RunConfig) -> Result<ZeroFieldParams> {
    let z = ZeroFieldParams { d: mhz(cfg.num("levels.d")), e: mhz(cfg.num("levels.e")), g_factor: cfg.num("levels.g_factor") };
    z.validate()?;
    Ok(z)
}

fn levels(cfg: &RunConfig, out: &mut OutputSet) -> Result<()> {
    let zfp = zero_field(cfg)?;
    let phi = cfg.num("levels.phi").to_radians();
    let fields = cfg.grid("field");
    let branches = [Branch::MinusI, Branch::PlusI, Branch::MinusII, Branch::PlusII];
    let mut table = Table::new(&["B_mT", "f_minus_I", "f_plus_I", "f_minus_II", "f_plus_II"]);
    let mut cols: [Vec<f64>; 4] = Default::default();
    for &b in &fields {
        let d = transition_frequencies(&zfp, &FieldConfig { magnitude: b * 1e-3, phi })?;
        let f = branches.map(|br| to_mhz(d.transition(br)));
        table.push(&[b, f[0], f[1], f[2], f[3]]);
        for (c, v) in cols.iter_mut().zip(f) {
            c.push(v);
        }
    }
    out.csv("levels.csv", &table);
    if cfg.plots() {
        let series: Vec<(&str, &[f64])> =
            ["f_minus_I", "f_plus_I", "f_minus_II", "f_plus_II"].into_iter().zip(cols.iter().map(|c| c.as_slice())).collect();
        out.add("levels.svg", svg::line_plot("NV transitions", "B (mT)", "f (MHz)", &fields, &series));
    }
    Ok(())
}

fn transmission(cfg: &RunConfig, out: &mut OutputSet) -> Result<()> {
    require(cfg, "transmission", &[ModelKind::Oscillator, ModelKind::Resolvent, ModelKind::Cumulant])?;
    let p = cfg.system_params()?;
    let probe = cfg.probe_grid();
    let centres: Vec<f64> = cfg.grid("tuning").iter().map(|&d| p.omega_c + mhz(d)).collect();
    let map = match cfg.model() {
        ModelKind::Oscillator => {
            let set = OscillatorSet::resonant(&p, mhz(cfg.num("oscillator.gamma")));
            transmission_map(&set, &p, &probe, &centres)?
        }
        ModelKind::Resolvent => {
            let d = cfg.density()?;
            let mut values = Vec::with_capacity(probe.len() * centres.len());
            for &wa in &centres {
                values.extend(transmission_gcc(&d.shifted(wa - d.center), &p, &probe, p.omega_c)?.values);
            }
            TransmissionSpectrum::map(probe.clone(), centres.clone(), values)?
        }
        _ => {
            let bath = cfg.bath()?;
            let hc = HierarchyConfig::default();
            let mut values = Vec::with_capacity(probe.len() * centres.len());
            let mut failed = 0;
            for &wa in &centres {
                let s = probe_spectrum(&hc, &p, wa, bath, &probe)?;
                failed += s.failures.len();
                values.extend(s.spectrum.values);
            }
            if failed > 0 {
                eprintln!("nvcavity: {failed} probe points did not reach a steady state (written as NaN)");
            }
            TransmissionSpectrum::map(probe.clone(), centres.clone(), values)?
        }
    };
    let mut table = Table::new(&["f_p_MHz", "f_a1_MHz", "power"]);
    for (i, &wa) in centres.iter().enumerate() {
        for (&w, &v) in probe.iter().zip(map.row(i)) {
            table.push(&[to_mhz(w), to_mhz(wa), v]);
        }
    }
    out.csv("transmission.csv", &table);
    if cfg.plots() {
        let title = format!("|a|^2, {} model", model_name(cfg.model()));
        out.add(
            "transmission.svg",
            svg::heatmap(&title, "f_p (MHz)", "f_a1 (MHz)", probe.len(), centres.len(), &map.values, true),
        );
    }
    Ok(())
}

fn sweep_t(cfg: &RunConfig, out: &mut OutputSet) -> Result<()> {
    require(cfg, "sweep-T", &[ModelKind::Cumulant])?;
    let p = cfg.system_params()?;
    let temps = cfg.grid("temperature");
    if temps[0] < 0.0 {
        return Err(Error::invalid("grid.temperature must be >= 0"));
    }
    let pts = rabi_vs_temperature(&HierarchyConfig::default(), &p, &temps, &cfg.probe_grid())?;
    let mut table =
        Table::new(&["T_K", "Omega_measured_MHz", "Omega_twolevel_MHz", "Omega_threelevel_MHz", "gamma_fit_MHz", "resolved"]);
    for r in &pts {
        let nan = f64::NAN;
        table.push(&[
            r.temperature,
            r.omega_measured.map_or(nan, to_mhz),
            to_mhz(r.omega_twolevel),
            to_mhz(r.omega_threelevel),
            r.gamma_fit.map_or(nan, to_mhz),
            if r.omega_measured.is_some() { 1.0 } else { 0.0 },
        ]);
    }
    out.csv("sweep_T.csv", &table);
    if cfg.plots() {
        let col = |f: &dyn Fn(&nvcavity_core::cumulant::RabiPoint) -> f64| pts.iter().map(f).collect::<Vec<f64>>();
        let m = col(&|r| r.omega_measured.map_or(f64::NAN, to_mhz));
        let two = col(&|r| to_mhz(r.omega_twolevel));
        let three = col(&|r| to_mhz(r.omega_threelevel));
        out.add(
            "sweep_T.svg",
            svg::line_plot(
                "Collective coupling vs temperature",
                "T (K)",
                "Omega (MHz)",
                &temps,
                &[("measured", &m), ("two-level", &two), ("three-level", &three)],
            ),
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct FitErrors {
    q: f64,
    a_mhz2: f64,
    center_mhz: f64,
    amplitude: f64,
    offset: f64,
    gamma_q_mhz: f64,
}

#[derive(Serialize)]
struct FitReport {
    q: f64,
    /// Width parameter of the q-Gaussian, MHz^2.
    a_mhz2: f64,
    gamma_q_mhz: f64,
    center_mhz: f64,
    /// Density units of density.csv (MHz).
    amplitude: f64,
    offset: f64,
    uncertainties: Option<FitErrors>,
    residual_norm: f64,
    iterations: usize,
    /// Integral of the reconstructed density, (g sqrt(N)/2pi)^2 in MHz^2.
    weight_mhz2: f64,
    slices_used: usize,
    slices_excluded: usize,
    rows_rejected: usize,
}

fn reconstruct(cfg: &RunConfig, out: &mut OutputSet) -> Result<()> {
    require(cfg, "reconstruct", &[ModelKind::Resolvent])?;
    let path = cfg.input_scan().ok_or_else(|| Error::invalid("reconstruct needs input.scan"))?;
    let p = cfg.system_params()?;
    let table = ScanTable::read(&path)?;
    if !table.rejected.is_empty() {
        eprintln!("nvcavity: {} non-finite rows rejected from {}", table.rejected.len(), path.display());
    }
    if table.rows.is_empty() {
        return Err(Error::Data(format!("{} holds no usable rows", path.display())));
    }
    let zfp = zero_field(cfg)?;
    let phi = cfg.num("levels.phi").to_radians();
    let spin_frequency = |b: f64| -> Result<f64> {
        Ok(transition_frequencies(&zfp, &FieldConfig { magnitude: b, phi })?.transition(Branch::MinusI))
    };
    let map = rearrange_scans(&table.to_scans(), p.omega_c, &spin_frequency)?;
    let range = (p.omega_c + mhz(cfg.num("reconstruct.start")), p.omega_c + mhz(cfg.num("reconstruct.stop")));
    let ex = extract_all(&map, &p, range);
    if ex.samples.len() < 6 {
        return Err(Error::numerical(format!(
            "only {} usable slices in the extraction window ({} excluded)",
            ex.samples.len(),
            ex.excluded.len()
        )));
    }
    let rho = reconstruct_density(&ex.samples, p.gamma_hom)?;
    let fit = fit_qgaussian(&rho)?;
    let DensityKind::Tabulated { omega, rho: r, err } = &rho.kind else {
        return Err(Error::numerical("reconstruction did not return samples"));
    };
    let mut density = Table::new(&["f_MHz", "rho", "rho_err"]);
    for ((&w, &v), &e) in omega.iter().zip(r).zip(err) {
        density.push(&[to_mhz(w), to_mhz(v), to_mhz(e)]);
    }
    out.csv("density.csv", &density);
    let mhz2 = |x: f64| to_mhz(to_mhz(x));
    let report = FitReport {
        q: fit.q,
        a_mhz2: mhz2(fit.a),
        gamma_q_mhz: to_mhz(fit.gamma_q),
        center_mhz: to_mhz(fit.center),
        amplitude: to_mhz(fit.amplitude),
        offset: to_mhz(fit.offset),
        uncertainties: fit.std_errors.map(|s| FitErrors {
            q: s[0],
            a_mhz2: mhz2(s[1]),
            center_mhz: to_mhz(s[2]),
            amplitude: to_mhz(s[3]),
            offset: to_mhz(s[4]),
            gamma_q_mhz: to_mhz(s[5]),
        }),
        residual_norm: fit.residual_norm,
        iterations: fit.iterations,
        weight_mhz2: mhz2(rho.total_weight()),
        slices_used: ex.samples.len(),
        slices_excluded: ex.excluded.len(),
        rows_rejected: table.rejected.len(),
    };
    out.json("fit.json", "qgauss-fit", &report)?;
    if cfg.plots() {
        let f: Vec<f64> = omega.iter().map(|&w| to_mhz(w)).collect();
        let v: Vec<f64> = r.iter().map(|&x| to_mhz(x)).collect();
        out.add("density.svg", svg::line_plot("Reconstructed coupling density", "f (MHz)", "rho", &f, &[("rho", &v)]));
    }
    Ok(())
}

fn poles(cfg: &RunConfig, out: &mut OutputSet) -> Result<()> {
    require(cfg, "poles", &[ModelKind::Resolvent])?;
    let p = cfg.system_params()?;
    let couplings = cfg.grid("coupling");
    if couplings[0] <= 0.0 {
        return Err(Error::invalid("grid.coupling must be > 0"));
    }
    let mut table = Table::new(&["coupling_MHz", "pole", "re_MHz", "half_width_MHz"]);
    for &c in &couplings {
        let pc = p.with_collective_coupling(mhz(c));
        let d = cfg.density()?.with_weight(pc.coupling_weight());
        let set = find_poles(&d, &pc, pc.omega_c, &doublet_guesses(&d, &pc, pc.omega_c))?;
        for (k, z) in set.poles.iter().enumerate() {
            table.push(&[c, k as f64, to_mhz(z.re), to_mhz(-z.im)]);
        }
    }
    out.csv("poles.csv", &table);
    Ok(())
}

fn maser_map(cfg: &RunConfig, out: &mut OutputSet) -> Result<()> {
    require(cfg, "maser-map", &[ModelKind::Maser])?;
    let base = PumpedParams {
        system: cfg.system_params()?,
        w: hz(cfg.num("maser.w")),
        delta: hz(cfg.num("maser.detuning")),
        bath: cfg.bath()?,
    };
    base.validate()?;
    let w_hz = cfg.grid("w");
    let gp_hz = cfg.grid("gamma_p");
    let w: Vec<f64> = w_hz.iter().map(|&x| hz(x)).collect();
    let gp: Vec<f64> = gp_hz.iter().map(|&x| hz(x)).collect();
    let map = operating_map(&base, &w, &gp)?;
    if !map.failures.is_empty() {
        eprintln!("nvcavity: {} map points failed (written as NaN)", map.failures.len());
    }
    let mut photons = Table::new(&["gamma_p_Hz", "w_Hz", "photons", "fixed_point_stable"]);
    let mut width = Table::new(&["gamma_p_Hz", "w_Hz", "linewidth_Hz", "fixed_point_stable"]);
    let (mut pv, mut lv) = (Vec::new(), Vec::new());
    for (i, &g) in gp_hz.iter().enumerate() {
        for (j, &x) in w_hz.iter().enumerate() {
            let (n, lw) = map.at(i, j);
            let stable = if map.fixed_point_stable[i * w_hz.len() + j] { 1.0 } else { 0.0 };
            photons.push(&[g, x, n, stable]);
            width.push(&[g, x, lw, stable]);
            pv.push(n);
            lv.push(lw);
        }
    }
    out.csv("maser_photons.csv", &photons);
    out.csv("maser_linewidth.csv", &width);
    if cfg.plots() {
        let (nx, ny) = (w_hz.len(), gp_hz.len());
        out.add("maser_photons.svg", svg::heatmap("photons", "w (log)", "gamma_p (log)", nx, ny, &pv, true));
        out.add("maser_linewidth.svg", svg::heatmap("linewidth (Hz)", "w (log)", "gamma_p (log)", nx, ny, &lv, true));
    }
    Ok(())
}

fn synth(cfg: &RunConfig, out: &mut OutputSet) -> Result<()> {
    require(cfg, "synth", &[ModelKind::Oscillator, ModelKind::Resolvent])?;
    let p = cfg.system_params()?;
    let probe = cfg.probe_grid();
    let level = cfg.num("noise.level");
    let seed = cfg.seed();
    let offsets = cfg.grid("tuning");
    let table = match cfg.model() {
        ModelKind::Oscillator => {
            let set = OscillatorSet::resonant(&p, mhz(cfg.num("oscillator.gamma")));
            let centres: Vec<f64> = offsets.iter().map(|&d| p.omega_c + mhz(d)).collect();
            synthesize_crossing(&set, &p, &probe, &centres, level, seed)?
        }
        _ => {
            // scan keys are cavity minus ensemble frequency
            let shifts: Vec<f64> = offsets.iter().rev().map(|&d| -mhz(d)).collect();
            synthesize_scan(&cfg.density()?, &p, &shifts, &probe, level, seed)?
        }
    };
    out.add("scan.csv", table.to_csv());
    Ok(())
}

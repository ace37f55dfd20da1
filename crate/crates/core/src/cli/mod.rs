//! `vstirap` command-line front end. Each subcommand writes its data files
//! and a `manifest.json` into the output directory.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config;
pub use crate::config::RunConfig;

use crate::drive::{feasibility, Transit};
use crate::engine::propagate_default;
use crate::ensemble::{average_map, count_spectrum, fit_spectrum, two_atom_overlap, EmissionMap};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::observables::{
    dark_state_fidelity_with, emission_fwhm, integrated_emission, photon_emission_rate, populations,
};
use crate::params::{mhz, to_mhz};
use crate::sweeps::{self, grids, lorentzian_fit, SweepResult};

#[derive(Debug, Parser)]
#[command(
    name = "vstirap",
    version,
    about = "Single-photon emission by vacuum-stimulated Raman passage"
)]
pub struct Cli {
    /// JSON config, or a manifest from an earlier run.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a config value, e.g. `--set system.delta_c_mhz=-15`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// One transit: time series of emission rate, populations and dark-state fidelity.
    Single {
        #[arg(long)]
        delay_us: Option<f64>,
    },
    /// Emission probability versus pump delay.
    ScanDelay,
    /// Emission probability versus position along the cavity axis.
    ScanAxial,
    /// Emission probability over pump and cavity detunings.
    MapDetuning,
    /// Single-atom emission versus pump detuning, with a Lorentzian fit.
    Spectrum,
    /// Slit-averaged emission and simulated photon-count spectrum.
    Ensemble,
    /// Adiabaticity and resonance diagnostics, no simulation.
    Check,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Single { .. } => "single",
            Command::ScanDelay => "scan-delay",
            Command::ScanAxial => "scan-axial",
            Command::MapDetuning => "map-detuning",
            Command::Spectrum => "spectrum",
            Command::Ensemble => "ensemble",
            Command::Check => "check",
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub seed: u64,
    pub threads: Option<usize>,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
    pub all_converged: bool,
    pub failures: Vec<String>,
    pub summary: Value,
    pub resolved_config: RunConfig,
}

struct Outcome {
    outputs: Vec<String>,
    failures: Vec<String>,
    summary: Value,
}

impl Outcome {
    fn new() -> Self {
        Self {
            outputs: Vec::new(),
            failures: Vec::new(),
            summary: Value::Null,
        }
    }
}

pub const EXIT_UNCONVERGED: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_FAILURE: u8 = 3;

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    ExitCode::from(run(cli))
}

/// Execute a parsed command line and return the process exit status.
pub fn run(cli: Cli) -> u8 {
    let path = config::resolve_path(cli.config.as_deref());
    let mut cfg = match RunConfig::load(path.as_deref(), &cli.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Some(dir) = cli.out {
        cfg.output.dir = dir;
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    if let Command::Single { delay_us: Some(d) } = cli.command {
        cfg.system.delay_us = d;
        if let Err(e) = cfg.validate() {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    }
    set_threads(cfg.threads);

    let started = Instant::now();
    if let Err(e) = std::fs::create_dir_all(&cfg.output.dir) {
        eprintln!("error: cannot create {}: {e}", cfg.output.dir.display());
        return EXIT_FAILURE;
    }
    let result = execute(&cli.command, &cfg);
    let (outcome, fatal) = match result {
        Ok(o) => (o, None),
        Err(e) => {
            let mut o = Outcome::new();
            o.failures.push(e.to_string());
            (o, Some(e))
        }
    };
    let manifest = Manifest {
        tool: "vstirap",
        version: env!("CARGO_PKG_VERSION"),
        subcommand: cli.command.name().to_string(),
        seed: cfg.seed,
        threads: cfg.threads,
        wall_time_s: started.elapsed().as_secs_f64(),
        all_converged: fatal.is_none() && outcome.failures.is_empty(),
        outputs: outcome.outputs,
        failures: outcome.failures,
        summary: outcome.summary,
        resolved_config: cfg.clone(),
    };
    if let Err(e) = write_json(&cfg.output.dir.join("manifest.json"), &manifest) {
        eprintln!("error: writing manifest: {e}");
        return EXIT_FAILURE;
    }
    if let Some(e) = fatal {
        eprintln!("error: {e}");
        return EXIT_FAILURE;
    }
    if !manifest.all_converged {
        for f in &manifest.failures {
            eprintln!("unconverged: {f}");
        }
        return EXIT_UNCONVERGED;
    }
    0
}

#[cfg(feature = "parallel")]
fn set_threads(n: Option<usize>) {
    if let Some(n) = n {
        // Fails only if the pool already exists, e.g. a second run in-process.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

#[cfg(not(feature = "parallel"))]
fn set_threads(_: Option<usize>) {}

fn execute(cmd: &Command, cfg: &RunConfig) -> Result<Outcome> {
    match cmd {
        Command::Single { .. } => single(cfg),
        Command::ScanDelay => {
            let delays: Vec<f64> = cfg
                .sweeps
                .delays_us
                .values()
                .iter()
                .map(|d| d * 1e-6)
                .collect();
            let r = sweeps::delay_scan(&cfg.params(), &cfg.integrator.to_config(), &delays)?;
            let peak = r
                .argmax()
                .map(|k| json!({ "delay_us": r.coords(k)[0], "p_emit": r.values[k] }));
            sweep_outputs(cfg, "delay_scan", r, json!({ "peak": peak }))
        }
        Command::ScanAxial => {
            let p = cfg.params();
            let xs = match &cfg.sweeps.axial_nm {
                Some(g) => g.values().iter().map(|x| x * 1e-9).collect(),
                None => grids::axial(p.lambda_opt),
            };
            let r = sweeps::axial_scan(
                &p,
                &cfg.integrator.to_config(),
                &xs,
                cfg.sweeps.fixed_delay_us * 1e-6,
            )?;
            let peak = r.argmax().map(|k| r.values[k]).unwrap_or(0.0);
            let above =
                r.values.iter().filter(|&&v| v > 0.5 * peak).count() as f64 / r.len() as f64;
            sweep_outputs(
                cfg,
                "axial_scan",
                r,
                json!({ "max_p_emit": peak, "fraction_above_half_max": above }),
            )
        }
        Command::MapDetuning => {
            let gp: Vec<f64> = cfg
                .sweeps
                .delta_p_mhz
                .values()
                .into_iter()
                .map(mhz)
                .collect();
            let gc: Vec<f64> = cfg
                .sweeps
                .delta_c_mhz
                .values()
                .into_iter()
                .map(mhz)
                .collect();
            let r = sweeps::detuning_map(
                &cfg.params(),
                &cfg.integrator.to_config(),
                &gp,
                &gc,
                cfg.sweeps.fixed_delay_us * 1e-6,
            )?;
            sweep_outputs(cfg, "detuning_map", r, Value::Null)
        }
        Command::Spectrum => {
            let dc = mhz(cfg.system.delta_c_mhz);
            let gp = spectrum_grid(cfg);
            let r = sweeps::pump_spectrum(
                &cfg.params(),
                &cfg.integrator.to_config(),
                dc,
                &gp,
                cfg.sweeps.fixed_delay_us * 1e-6,
            )?;
            let fit = lorentzian_fit(&r);
            sweep_outputs(cfg, "spectrum", r, json!({ "fit_mhz": fit }))
        }
        Command::Ensemble => ensemble(cfg),
        Command::Check => check(cfg),
    }
}

fn spectrum_grid(cfg: &RunConfig) -> Vec<f64> {
    cfg.sweeps
        .spectrum_offsets_mhz
        .values()
        .into_iter()
        .map(|o| mhz(cfg.system.delta_c_mhz + o))
        .collect()
}

fn sweep_outputs(cfg: &RunConfig, stem: &str, r: SweepResult, extra: Value) -> Result<Outcome> {
    let mut o = Outcome::new();
    let csv = format!("{stem}.csv");
    r.write_csv(BufWriter::new(File::create(cfg.output.dir.join(&csv))?))?;
    o.outputs.push(csv);
    for (k, e) in r.errors.iter().enumerate() {
        if let Some(e) = e {
            o.failures.push(format!("point {k} {:?}: {e}", r.coords(k)));
        }
    }
    o.summary = json!({ "points": r.len(), "shape": r.shape(), "details": extra });
    Ok(o)
}

fn single(cfg: &RunConfig) -> Result<Outcome> {
    let params = cfg.params();
    let geom = cfg.geometry.to_offsets();
    let traj = propagate_default(&params, &geom, &cfg.integrator.to_config())?;
    let model = Model::new(params)?;
    let drive = Transit::new(params, geom);
    let basis = model.basis();

    let mut o = Outcome::new();
    let csv = "timeseries.csv".to_string();
    let mut w = BufWriter::new(File::create(cfg.output.dir.join(&csv))?);
    let pops: Vec<String> = basis.states().map(|s| format!("pop_{s}")).collect();
    writeln!(
        w,
        "t_us,g_mhz,omega_mhz,rate_per_us,emitted,spontaneous,{},dark_fidelity",
        pops.join(",")
    )?;
    for s in &traj.snapshots {
        let (g, om) = crate::drive::Drive::envelopes(&drive, s.t);
        let p: Vec<String> = populations(s, &model)
            .iter()
            .map(|(_, v)| v.to_string())
            .collect();
        let fid = dark_state_fidelity_with(s, &model, &drive)
            .map(|f| f.to_string())
            .unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            s.t * 1e6,
            to_mhz(g),
            to_mhz(om),
            photon_emission_rate(s, &model) * 1e-6,
            s.acc_emit,
            s.acc_spont,
            p.join(","),
            fid
        )?;
    }
    w.flush()?;
    o.outputs.push(csv);
    o.summary = json!({
        "p_emit": traj.summary.p_emit,
        "p_spont": traj.summary.p_spont,
        "integrated_rate": integrated_emission(&traj, &model),
        "emission_fwhm_us": emission_fwhm(&traj, &model).map(|w| w * 1e6),
        "final_populations": traj.summary.final_populations.iter().map(|(s, p)| (s.to_string(), *p)).collect::<Vec<_>>(),
        "steps": traj.stats,
    });
    println!(
        "p_emit = {:.4}, p_spont = {:.4}",
        traj.summary.p_emit, traj.summary.p_spont
    );
    Ok(o)
}

fn ensemble(cfg: &RunConfig) -> Result<Outcome> {
    let params = cfg.params();
    let integ = cfg.integrator.to_config();
    let delay = cfg.sweeps.fixed_delay_us * 1e-6;
    let ec = cfg.ensemble.to_config(cfg.seed);
    let mut o = Outcome::new();

    let map = EmissionMap::build(&params.with_delay(delay), &integ, &ec)?;
    o.failures
        .extend(map.failures.iter().map(|f| format!("emission map {f}")));
    let est = average_map(&map, &ec, ec.mc_samples, ec.rng_seed);
    println!(
        "mean emission per atom = {:.4} ± {:.4}",
        est.mean, est.std_err
    );
    let map_file = "emission_map.json".to_string();
    write_json(&cfg.output.dir.join(&map_file), &map)?;
    o.outputs.push(map_file);

    let sc = cfg.ensemble.spectrum_config(cfg.seed);
    let spectrum = count_spectrum(
        &params,
        &integ,
        &sc,
        &spectrum_grid(cfg),
        mhz(cfg.system.delta_c_mhz),
        delay,
    )?;
    if spectrum.excluded_points > 0 {
        o.failures.push(format!(
            "{} emission map points failed in the count spectrum",
            spectrum.excluded_points
        ));
    }
    let csv = "ensemble_spectrum.csv".to_string();
    spectrum.write_csv(BufWriter::new(File::create(cfg.output.dir.join(&csv))?))?;
    o.outputs.push(csv);
    let fit = fit_spectrum(&spectrum);
    let peak = spectrum
        .bins
        .iter()
        .map(|b| b.total_counts)
        .max()
        .unwrap_or(0);
    let overlap = emission_fwhm(
        &propagate_default(
            &params.with_delay(delay),
            &cfg.geometry.to_offsets(),
            &integ,
        )?,
        &Model::new(params)?,
    )
    .map(|w| two_atom_overlap(ec.atom_rate, w))
    .transpose()?;
    o.summary = json!({
        "mean_emission": est,
        "expected_atoms": ec.expected_atoms(),
        "expected_dark_counts": ec.expected_dark_counts(),
        "peak_total_counts": peak,
        "two_atom_overlap": overlap,
        "spectrum_fit_mhz": fit,
    });
    Ok(o)
}

fn check(cfg: &RunConfig) -> Result<Outcome> {
    let p = cfg.params();
    let f = feasibility(&p);
    println!(
        "raman resonance      {} (|Δ_C − Δ_P| = {:.3} MHz, 2κ = {:.3} MHz)",
        if f.raman_ok { "ok" } else { "violated" },
        to_mhz((p.delta_c - p.delta_p).abs()),
        to_mhz(2.0 * p.kappa)
    );
    println!("adiabaticity cavity  2g₀w_C/v = {:.3e}", f.adiabatic_cavity);
    println!("adiabaticity pump    Ω₀w_P/v  = {:.3e}", f.adiabatic_pump);
    println!(
        "interaction time     {:.3} us vs photon lifetime {:.4} us ({})",
        f.interaction_time * 1e6,
        f.cavity_lifetime * 1e6,
        if f.emission_time_ok {
            "ok"
        } else {
            "too short"
        }
    );
    let mut o = Outcome::new();
    let file = "check.json".to_string();
    write_json(&cfg.output.dir.join(&file), &f)?;
    o.outputs.push(file);
    o.summary = serde_json::to_value(f)?;
    Ok(o)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

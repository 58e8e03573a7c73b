//! Command-line front end: argument parsing, run orchestration and output layout.

use clap::{Args, Parser, Subcommand};
use hygrohom::cell::{
    build_contrast_table_for_range, conductivity_contrast_range, mobility_contrast_range, CellProblem,
    PhaseCoefficients,
};
use hygrohom::coupled::{run_simulation_partial, CoefficientProvider, Trajectory};
use hygrohom::io::{
    emit_snapshot, parse_config, step_reports_csv, write_text, FieldSnapshot, InvariantSummary, LoadedConfig,
    Manifest,
};
use hygrohom::lab::{
    check_apriori_bounds, homogenized_provider, run_epsilon_sweep, translation_estimate, translations_to_csv,
    AprioriMonitor, EpsilonSweepConfig,
};
use hygrohom::microstructure::{rasterize_seeded, CellRaster, MesoTiling};
use hygrohom::{Error, Result};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

/// Caps the rayon worker count.
pub const THREADS_ENV: &str = "HYGROHOM_THREADS";

#[derive(Debug, Parser)]
#[command(name = "hygrohom", version, about = "Two-scale heat and moisture transport in hydrating concrete")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's output.dir.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum ProviderKind {
    Meso,
    Macro,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the config and the structural assumptions on the laws.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Effective tensors and contrast tables of the unit cell.
    Cell {
        #[command(flatten)]
        common: Common,
        /// Cement/aggregate coefficient ratio for a single effective tensor.
        #[arg(long)]
        contrast: Option<f64>,
    },
    /// Time-dependent run with the resolved microstructure.
    Meso {
        #[command(flatten)]
        common: Common,
    },
    /// Time-dependent run of the homogenized problem.
    Macro {
        #[command(flatten)]
        common: Common,
    },
    /// Meso against homogenized errors over the configured ε list.
    Converge {
        #[command(flatten)]
        common: Common,
    },
    /// Time-translation functionals of one run.
    Translate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "macro")]
        provider: ProviderKind,
    },
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let argv: Vec<std::ffi::OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return EXIT_USAGE;
    }
    let line = argv
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join(" ");
    match dispatch(cli.command, &line) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_SOLVER
            }
        }
    }
}

fn configure_threads() -> std::result::Result<(), String> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got {v:?}"))?;
    // A pool may already exist when `run` is called twice in one process.
    if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
        log::debug!("global thread pool already initialized");
    }
    Ok(())
}

fn dispatch(command: Command, line: &str) -> Result<i32> {
    match command {
        Command::Validate { config } => validate(&config),
        Command::Cell { common, contrast } => cell(&common, contrast, line),
        Command::Meso { common } => simulate(&common, ProviderKind::Meso, line),
        Command::Macro { common } => simulate(&common, ProviderKind::Macro, line),
        Command::Converge { common } => converge(&common, line),
        Command::Translate { common, provider } => translate(&common, provider, line),
    }
}

fn validate(config: &Path) -> Result<i32> {
    let loaded = parse_config(config)?;
    for c in &loaded.validation.checks {
        println!(
            "{:<6} {:<8} {:<48} margin {:.3e}",
            if c.passed { "ok" } else { "FAIL" },
            c.assumption,
            c.name,
            c.worst_margin
        );
    }
    println!("config {} valid (sha256 {})", config.display(), loaded.sha256);
    Ok(EXIT_OK)
}

fn out_dir(common: &Common, loaded: &LoadedConfig) -> PathBuf {
    common.out.clone().unwrap_or_else(|| loaded.config.output.dir.clone())
}

fn raster_of(loaded: &LoadedConfig) -> Result<CellRaster> {
    let c = &loaded.config;
    rasterize_seeded(&c.geometry, c.raster_resolution, c.seed)
}

fn format_tensor(t: &[[f64; 2]; 2]) -> String {
    format!(
        "[[{:.10e}, {:.10e}],\n [{:.10e}, {:.10e}]]",
        t[0][0], t[0][1], t[1][0], t[1][1]
    )
}

fn cell(common: &Common, contrast: Option<f64>, line: &str) -> Result<i32> {
    let loaded = parse_config(&common.config)?;
    let dir = out_dir(common, &loaded);
    let raster = raster_of(&loaded)?;
    let res = loaded.config.cell_resolution;
    let mut manifest = Manifest::new(line, &loaded.sha256, loaded.config.seed);

    if let Some(c) = contrast {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::Config {
                path: "--contrast".into(),
                message: format!("contrast must be positive, got {c}"),
            });
        }
        let problem = CellProblem::new(&raster, res)?;
        let t = problem.effective_tensor(PhaseCoefficients {
            cement: c,
            aggregate: 1.0,
        })?;
        println!("effective tensor at contrast {c}:\n{}", format_tensor(&t.0));
        let mut csv = String::from("contrast,k11,k12,k21,k22\n");
        let _ = writeln!(
            csv,
            "{c:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            t.0[0][0], t.0[0][1], t.0[1][0], t.0[1][1]
        );
        write_text(&dir.join("cell_tensor.csv"), &csv)?;
        manifest.outputs.push("cell_tensor.csv".into());
    }

    let laws = &loaded.config.laws;
    for (name, (lo, hi)) in [
        ("mobility", mobility_contrast_range(laws)),
        ("conductivity", conductivity_contrast_range(laws)),
    ] {
        let table = build_contrast_table_for_range(&raster, lo, hi, res)?;
        println!("{name} table: {} nodes over [{lo:.4e}, {hi:.4e}]", table.contrasts.len());
        table.save(&dir.join(format!("{name}_table.json")))?;
        write_text(&dir.join(format!("{name}_table.csv")), &table.to_csv())?;
        manifest.outputs.push(format!("{name}_table.json"));
        manifest.outputs.push(format!("{name}_table.csv"));
    }
    manifest.write(&dir)?;
    Ok(EXIT_OK)
}

fn provider_for(loaded: &LoadedConfig, kind: ProviderKind) -> Result<CoefficientProvider> {
    let c = &loaded.config;
    let raster = raster_of(loaded)?;
    match kind {
        ProviderKind::Meso => {
            let tiling = MesoTiling::new(c.epsilon, raster, c.grid.n)?;
            CoefficientProvider::meso(tiling, c.laws.clone())
        }
        ProviderKind::Macro => homogenized_provider(&raster, c.cell_resolution, c.grid.n, &c.laws),
    }
}

/// Writes snapshots, step reports and bound checks of a (possibly partial) run.
fn write_run(traj: &Trajectory, loaded: &LoadedConfig, dir: &Path, manifest: &mut Manifest) -> Result<AprioriMonitor> {
    let out = &loaded.config.output;
    let last = traj.states.len() - 1;
    for (k, s) in traj.states.iter().enumerate() {
        if k % out.every != 0 && k != last {
            continue;
        }
        for (name, values) in [("p", &s.p), ("theta", &s.theta), ("r", &s.r)] {
            let snap = FieldSnapshot::new(&traj.grid, s.time, name, values.clone())?;
            for &fmt in &out.formats {
                let file = format!("{name}_{:05}.{}", s.step, fmt.extension());
                emit_snapshot(&snap, fmt, &dir.join(&file))?;
                manifest.outputs.push(file);
            }
        }
    }
    write_text(&dir.join("steps.csv"), &step_reports_csv(&traj.reports))?;
    manifest.outputs.push("steps.csv".into());

    let monitor = check_apriori_bounds(traj, &loaded.config.laws);
    let mut csv = String::from("check,passed,worst_margin\n");
    for c in &monitor.checks {
        let _ = writeln!(csv, "{},{},{:.6e}", c.name, c.passed, c.worst_margin);
    }
    write_text(&dir.join("bounds.csv"), &csv)?;
    manifest.outputs.push("bounds.csv".into());
    Ok(monitor)
}

fn run_and_write(
    loaded: &LoadedConfig,
    kind: ProviderKind,
    dir: &Path,
    manifest: &mut Manifest,
) -> Result<(Trajectory, Option<Error>)> {
    let provider = provider_for(loaded, kind)?;
    let grid = provider.grid().clone();
    let (p0, t0) = loaded.config.initial.sample(&grid);
    let (traj, failure) = run_simulation_partial(p0, t0, &provider, &loaded.config.time);
    let monitor = write_run(&traj, loaded, dir, manifest)?;
    manifest.invariants = Some(InvariantSummary::from_reports(&traj.reports, failure.is_none()));
    for c in monitor.checks.iter().filter(|c| !c.passed) {
        log::warn!("bound check '{}' failed (margin {:.3e})", c.name, c.worst_margin);
    }
    Ok((traj, failure))
}

fn simulate(common: &Common, kind: ProviderKind, line: &str) -> Result<i32> {
    let loaded = parse_config(&common.config)?;
    let dir = out_dir(common, &loaded);
    let mut manifest = Manifest::new(line, &loaded.sha256, loaded.config.seed);
    let (traj, failure) = run_and_write(&loaded, kind, &dir, &mut manifest)?;
    manifest.write(&dir)?;
    let s = traj.last();
    println!(
        "{} steps to t = {:.6e} s; p in [{:.6e}, {:.6e}], theta in [{:.6e}, {:.6e}]",
        s.step,
        s.time,
        min(&s.p),
        max(&s.p),
        min(&s.theta),
        max(&s.theta)
    );
    match failure {
        None => Ok(EXIT_OK),
        Some(e) => Err(e),
    }
}

fn converge(common: &Common, line: &str) -> Result<i32> {
    let loaded = parse_config(&common.config)?;
    let c = &loaded.config;
    let sweep = c.sweep.as_ref().ok_or_else(|| Error::Config {
        path: "/sweep".into(),
        message: "converge needs a sweep section".into(),
    })?;
    let cfg = EpsilonSweepConfig {
        epsilons: sweep.epsilons.clone(),
        resolutions: sweep.resolutions.clone(),
        macro_resolution: sweep.macro_resolution,
        geometry: c.geometry.clone(),
        raster_resolution: c.raster_resolution,
        cell_resolution: c.cell_resolution,
        time: c.time.clone(),
        initial: c.initial.clone(),
        laws: c.laws.clone(),
        seed: c.seed,
    };
    let report = run_epsilon_sweep(&cfg)?;
    let dir = out_dir(common, &loaded);
    write_text(&dir.join("epsilon_errors.csv"), &report.to_csv())?;
    for e in &report.entries {
        println!("eps {:.6e}: |p| {:.4e}  |theta| {:.4e}  |r| {:.4e}", e.epsilon, e.error_p, e.error_theta, e.error_r);
    }
    println!(
        "monotone {}; final/first p {:.3}, theta {:.3}; uniformity {:.3}; bounds {}",
        report.monotone, report.final_ratio_p, report.final_ratio_theta, report.uniformity_ratio, report.bounds_ok
    );
    let mut manifest = Manifest::new(line, &loaded.sha256, c.seed);
    manifest.outputs.push("epsilon_errors.csv".into());
    manifest.write(&dir)?;
    Ok(EXIT_OK)
}

fn translate(common: &Common, kind: ProviderKind, line: &str) -> Result<i32> {
    let loaded = parse_config(&common.config)?;
    let dir = out_dir(common, &loaded);
    let mut manifest = Manifest::new(line, &loaded.sha256, loaded.config.seed);
    let (traj, failure) = run_and_write(&loaded, kind, &dir, &mut manifest)?;
    if let Some(e) = failure {
        manifest.write(&dir)?;
        return Err(e);
    }
    let taus: Vec<f64> = loaded.config.tau_steps.iter().map(|&k| k as f64 * traj.h).collect();
    let rows = translation_estimate(&traj, &loaded.config.laws, &taus)?;
    write_text(&dir.join("translations.csv"), &translations_to_csv(&rows))?;
    manifest.outputs.push("translations.csv".into());
    manifest.write(&dir)?;
    for r in &rows {
        println!(
            "tau {:.4e}: E_p {:.4e}  E_theta {:.4e}  E_r {:.4e}",
            r.tau, r.e_p, r.e_theta, r.e_r
        );
    }
    Ok(EXIT_OK)
}

fn min(v: &[f64]) -> f64 {
    v.iter().cloned().fold(f64::INFINITY, f64::min)
}

fn max(v: &[f64]) -> f64 {
    v.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

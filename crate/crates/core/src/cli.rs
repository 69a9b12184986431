//! The `qtm` command line.
//!
//! Exit codes: 0 success, 1 validation or configuration error, 2 boundary
//! contamination, 3 internal error.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};

use crate::config::{Header, RunConfig, SweepConfig};
use crate::error::{QtmError, Result};
use crate::mirror;
use crate::propagator::Propagator;
use crate::sweep;
use crate::units::{self, LabContext};
use crate::validation::{self, Fault, Options};
use crate::wavefunction::io as snapshot;

/// Output directory when neither `--out`, `QTM_OUT` nor `[output] dir` is set.
pub const DEFAULT_OUT_DIR: &str = "qtm-out";

/// Overlay samples written next to every sweep.
pub const OVERLAY_SAMPLES: usize = 200;

#[derive(Debug, Parser)]
#[command(name = "qtm", version, about = "Nonlinear quantum time mirror simulator")]
pub struct Cli {
    /// Only print errors.
    #[arg(long, short, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one configuration and write its echo record and snapshots.
    Run {
        /// Run configuration (TOML)
        #[arg(long, short)]
        config: PathBuf,
        /// Output directory; defaults to `output.dir` or `qtm-out`
        #[arg(long, short, env = "QTM_OUT")]
        out: Option<PathBuf>,
    },
    /// Run a two-axis parameter sweep.
    Sweep {
        /// Sweep plan (TOML)
        #[arg(long, short)]
        config: PathBuf,
        /// Output directory; defaults to `output.dir` or `qtm-out`
        #[arg(long, short, env = "QTM_OUT")]
        out: Option<PathBuf>,
        /// Worker threads; overrides `[sweep] workers`.
        #[arg(long, short)]
        workers: Option<usize>,
    },
    /// Imprinted versus ideal time-reversal phase for a line packet.
    Phases {
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 4.0)]
        k: f64,
        /// Kick strengths, comma separated.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        lambda: Vec<f64>,
        #[arg(long, default_value_t = -6.0, allow_hyphen_values = true)]
        xi_min: f64,
        #[arg(long, default_value_t = 6.0, allow_hyphen_values = true)]
        xi_max: f64,
        #[arg(long, default_value_t = 601)]
        samples: usize,
        /// Output directory; defaults to `qtm-out`
        #[arg(long, short, env = "QTM_OUT")]
        out: Option<PathBuf>,
    },
    /// Run the oracle and invariant suite.
    Validate {
        /// Skip the 1024² ring comparison.
        #[arg(long)]
        skip_ring: bool,
        #[arg(long, value_enum, hide = true)]
        inject_fault: Option<FaultArg>,
    },
    /// Laboratory units and required scattering lengths.
    Units {
        /// TOML file with mass, t0, a_perp, atom_number, kick_duration (SI).
        /// Defaults to lithium-7 at t0 = 10 ms.
        #[arg(long, short)]
        config: Option<PathBuf>,
        /// Kick strengths, comma separated.
        #[arg(long, value_delimiter = ',', num_args = 1.., default_value = "10,200")]
        lambda: Vec<f64>,
        /// Packet widths to convert, in meters.
        #[arg(long, value_delimiter = ',')]
        length: Vec<f64>,
        /// Packet velocities to convert, in m/s.
        #[arg(long, value_delimiter = ',')]
        velocity: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FaultArg {
    KineticSign,
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = if cli.quiet { "error" } else { "info" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .format_target(false)
        .try_init();
    let mut stdout = std::io::stdout().lock();
    match execute(&cli, &mut stdout) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command, writing human output to `out`.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    let quiet = cli.quiet;
    match &cli.command {
        Command::Run { config, out: dir } => {
            let cfg = RunConfig::load(config)?;
            let dir = output_dir(dir.as_deref(), cfg.output.dir.as_deref());
            let summary = cmd_run(&cfg, &dir)?;
            if !quiet {
                writeln!(out, "{summary}")?;
            }
            Ok(0)
        }
        Command::Sweep {
            config,
            out: dir,
            workers,
        } => {
            let mut cfg = SweepConfig::load(config)?;
            if let Some(w) = workers {
                cfg.plan.workers = *w;
            }
            let dir = output_dir(dir.as_deref(), cfg.output.dir.as_deref());
            let paths = cmd_sweep(&cfg, &dir)?;
            if !quiet {
                for p in paths {
                    writeln!(out, "{}", p.display())?;
                }
            }
            Ok(0)
        }
        Command::Phases {
            sigma,
            k,
            lambda,
            xi_min,
            xi_max,
            samples,
            out: dir,
        } => {
            let dir = output_dir(dir.as_deref(), None);
            let rows = cmd_phases(*sigma, *k, lambda, (*xi_min, *xi_max), *samples, &dir)?;
            if !quiet {
                for (lambda, phi0, path) in rows {
                    writeln!(out, "lambda={lambda} phi_qtm(0)={phi0:.6} {}", path.display())?;
                }
            }
            Ok(0)
        }
        Command::Validate {
            skip_ring,
            inject_fault,
        } => {
            let report = validation::run(Options {
                fault: inject_fault.map(|f| match f {
                    FaultArg::KineticSign => Fault::KineticSign,
                }),
                skip_ring: *skip_ring,
            });
            if !quiet || !report.all_passed() {
                writeln!(out, "{report}")?;
            }
            Ok(if report.all_passed() { 0 } else { 1 })
        }
        Command::Units {
            config,
            lambda,
            length,
            velocity,
        } => {
            let ctx = match config {
                Some(p) => load_context(p)?,
                None => LabContext::lithium7(),
            };
            let table = cmd_units(&ctx, lambda, length, velocity)?;
            if !quiet {
                write!(out, "{table}")?;
            }
            Ok(0)
        }
    }
}

/// `--out` (or `QTM_OUT`), then the config's `[output] dir`, then
/// [`DEFAULT_OUT_DIR`].
pub fn output_dir(flag: Option<&Path>, config: Option<&Path>) -> PathBuf {
    flag.or(config)
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Runs one configuration and writes, under `dir`:
/// `<stem>.toml` (resolved config), `<stem>_echo.csv`, `<stem>_observables.csv`
/// and a `.qtmw` snapshot plus `.csv` sidecar per requested time and at the
/// echo peak. Returns the summary line.
pub fn cmd_run(cfg: &RunConfig, dir: &Path) -> Result<String> {
    fs::create_dir_all(dir)?;
    let stem = cfg.stem();
    let header = cfg.header();
    let scenario = &cfg.scenario;
    info!(
        "running {stem}: {}D grid n={} on [{}, {}), lambda={}",
        scenario.grid.dim(),
        scenario.grid.n(),
        scenario.grid.x_min(),
        scenario.grid.x_max(),
        scenario.pulse.strength
    );
    let mut prop = Propagator::new(&scenario.grid);
    let outcome = scenario.run_with(&mut prop)?;

    fs::write(dir.join(format!("{stem}.toml")), cfg.to_toml())?;
    let mut w = create(&dir.join(format!("{stem}_echo.csv")))?;
    outcome.record.write_csv(&header.with("file", "echo").render(), &mut w)?;
    w.flush()?;
    let mut w = create(&dir.join(format!("{stem}_observables.csv")))?;
    outcome.write_observables_csv(&header.with("file", "observables").render(), &mut w)?;
    w.flush()?;

    let mut times: Vec<(String, f64)> = cfg
        .output
        .snapshots
        .iter()
        .map(|&t| (format!("t{t:.4}"), t))
        .collect();
    if cfg.output.snapshot_peak {
        times.push(("peak".into(), outcome.record.peak_time()));
    }
    for (label, t) in times {
        let psi = outcome.state_at(&mut prop, &scenario.pulse, t)?;
        let base = format!("{stem}_snap_{label}");
        snapshot::save_snapshot(&psi, &dir.join(format!("{base}.qtmw")))?;
        let h = header.with("file", "snapshot").with("snapshot.time", psi.time());
        snapshot::save_csv(&psi, &h.render(), &dir.join(format!("{base}.csv")))?;
    }
    let summary = format!("{stem}: {}", outcome.summary());
    info!("wrote artifacts for {stem} to {}", dir.display());
    Ok(summary)
}

/// Runs a sweep and writes `<stem>_sweep.csv` and, when `λ` is swept,
/// `<stem>_overlay.csv`. Returns the written paths.
pub fn cmd_sweep(cfg: &SweepConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let grid = cfg.plan.grid()?;
    let header = cfg.plan.header(&grid);
    let stem = cfg.output.name.clone().unwrap_or_else(|| header.hash());
    info!(
        "sweep {stem}: {} cells on {} workers, grid n={}",
        cfg.plan.cells().len(),
        cfg.plan.workers,
        grid.n()
    );
    let result = sweep::run_sweep(&cfg.plan)?;
    if result.failures() > 0 {
        warn!("{} of {} cells failed", result.failures(), result.cells.len());
    }
    let mut paths = Vec::new();
    let path = dir.join(format!("{stem}_sweep.csv"));
    let mut w = create(&path)?;
    result.write_csv(&mut w)?;
    w.flush()?;
    paths.push(path);
    match sweep::analytic_overlay(&cfg.plan, OVERLAY_SAMPLES) {
        Ok(curve) => {
            let path = dir.join(format!("{stem}_overlay.csv"));
            let mut w = create(&path)?;
            sweep::write_overlay_csv(&cfg.plan, &header, &curve, &mut w)?;
            w.flush()?;
            paths.push(path);
        }
        Err(QtmError::OverlayUndefined(why)) => warn!("no overlay written: {why}"),
        Err(e) => return Err(e),
    }
    Ok(paths)
}

/// Writes one phase-comparison CSV per `λ`. Returns `(λ, φ_qtm(0), path)`.
pub fn cmd_phases(
    sigma: f64,
    k: f64,
    lambdas: &[f64],
    (xi_min, xi_max): (f64, f64),
    samples: usize,
    dir: &Path,
) -> Result<Vec<(f64, f64, PathBuf)>> {
    if lambdas.is_empty() {
        return Err(QtmError::InvalidParameter(
            "phases needs at least one lambda".into(),
        ));
    }
    fs::create_dir_all(dir)?;
    let mut rows = Vec::new();
    for &lambda in lambdas {
        let c = mirror::phase_comparison(sigma, k, lambda, xi_min, xi_max, samples)?;
        let mut h = Header::new("phases");
        h.push("packet.sigma", sigma);
        h.push("packet.k", k);
        h.push("pulse.strength", lambda);
        h.push("xi_min", xi_min);
        h.push("xi_max", xi_max);
        h.push("samples", samples);
        h.push("shift", c.shift);
        let path = dir.join(format!("phases_sigma{sigma}_k{k}_lambda{lambda}.csv"));
        let mut w = create(&path)?;
        c.write_csv(&h.render(), &mut w)?;
        w.flush()?;
        let phi0 = mirror::phase_comparison(sigma, k, lambda, 0.0, 1.0, 2)?.phi_qtm[0];
        rows.push((lambda, phi0, path));
    }
    Ok(rows)
}

fn load_context(path: &Path) -> Result<LabContext> {
    let text = fs::read_to_string(path)?;
    let ctx: LabContext = toml::from_str(&text)
        .map_err(|e| QtmError::Config(format!("{}: {}", path.display(), e.message())))?;
    ctx.validate()?;
    Ok(ctx)
}

/// Conversion table for `ctx`.
pub fn cmd_units(ctx: &LabContext, lambdas: &[f64], lengths: &[f64], velocities: &[f64]) -> Result<String> {
    ctx.validate()?;
    let mut s = String::new();
    s.push_str(&format!("mass             {:.6e} kg\n", ctx.mass));
    s.push_str(&format!("t0               {:.6e} s\n", ctx.t0));
    s.push_str(&format!("length unit      {:.6e} m\n", ctx.length_unit()));
    s.push_str(&format!("velocity unit    {:.6e} m/s\n", ctx.velocity_unit()));
    for &l in lengths {
        s.push_str(&format!("length {l:.4e} m -> sigma = {:.4}\n", ctx.length_to_dimensionless(l)));
    }
    for &v in velocities {
        s.push_str(&format!("velocity {v:.4e} m/s -> k = {:.4}\n", ctx.velocity_to_dimensionless(v)));
    }
    if !lambdas.is_empty() {
        s.push_str("lambda,scattering_length_m,scattering_length_nm\n");
        for row in units::scattering_table(ctx, lambdas)? {
            s.push_str(&format!(
                "{},{:.6e},{:.4}\n",
                row.lambda,
                row.scattering_length,
                row.scattering_length * 1e9
            ));
        }
    }
    Ok(s)
}

//! tripletlab: command-line workbench for optically read molecular
//! triplet spins — powder spectra, ZFS fitting, ensemble Rabi,
//! filter-function coherence, delayed-fluorescence photophysics,
//! spin-lattice relaxation, and magnetometry budgets.
//!
//! Every command reads a TOML config (--config), writes artifacts into
//! --out, and is deterministic: same config + seed + version gives
//! byte-identical files regardless of --threads.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod output;

use output::Format;
use tripletlab_core::CoreError;

#[derive(Debug)]
pub enum CliError {
    /// Bad config, schema violation, or invalid input values. Exit 2.
    Config(String),
    /// Malformed input data files. Exit 2.
    Data(String),
    /// Numerical failure (non-convergence, divergence). Exit 3.
    Compute(String),
    /// Filesystem problems. Exit 4.
    Io(String),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidInput(m) => CliError::Config(m),
            CoreError::Numerical(m) => CliError::Compute(m),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "tripletlab",
    version,
    about = "Simulation and analysis workbench for optically read triplet spin ensembles"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// TOML config file; each subcommand reads its own section.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Cap on worker threads (otherwise the library default).
    #[arg(long)]
    threads: Option<usize>,
    /// Seed for noise-injection fixtures.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write only this artifact family (default: csv + json + svg).
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Powder spectra over a list of field magnitudes.
    #[command(name = "simulate-odmr")]
    SimulateOdmr(Common),
    /// Fit zero-field splitting parameters to a spectrum CSV.
    #[command(name = "fit-zfs")]
    FitZfs {
        #[command(flatten)]
        common: Common,
        /// Override automatic peak detection: "D_HZ,E_HZ" (plain Hz).
        #[arg(long)]
        init: Option<String>,
    },
    /// Powder-averaged Rabi oscillation.
    #[command(name = "rabi")]
    Rabi(Common),
    /// CPMG coherence times from a noise spectrum; optional clock model.
    #[command(name = "coherence")]
    Coherence(Common),
    /// Spin-lattice relaxation vs temperature.
    #[command(name = "t1")]
    T1(Common),
    /// Delayed-fluorescence readout protocol and contrast.
    #[command(name = "oadf")]
    Oadf(Common),
    /// Shot-noise magnetometry budget.
    #[command(name = "sense")]
    Sense(Common),
}

impl Cmd {
    fn common(&self) -> &Common {
        match self {
            Cmd::SimulateOdmr(c)
            | Cmd::Rabi(c)
            | Cmd::Coherence(c)
            | Cmd::T1(c)
            | Cmd::Oadf(c)
            | Cmd::Sense(c) => c,
            Cmd::FitZfs { common, .. } => common,
        }
    }
}

fn parse_init_flag(raw: &str) -> Result<(f64, f64), CliError> {
    let parts: Vec<&str> = raw.split(',').collect();
    if parts.len() != 2 {
        return Err(CliError::Config(format!(
            "--init must be \"D_HZ,E_HZ\", got {raw:?}"
        )));
    }
    let d: f64 = parts[0]
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("--init: {:?} is not a number", parts[0])))?;
    let e: f64 = parts[1]
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("--init: {:?} is not a number", parts[1])))?;
    Ok((d, e))
}

fn run(cmd: &Cmd) -> Result<(), CliError> {
    let common = cmd.common();
    let cfg = config::load_config(&common.config).map_err(CliError::Config)?;
    let format = common.format.map(|f| match f {
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
    });
    let mut out = output::OutputSet::new(&common.out, format)?;
    let seed = common.seed;

    match cmd {
        Cmd::SimulateOdmr(_) => commands::cmd_simulate_odmr(&cfg, &mut out, seed),
        Cmd::FitZfs { init, .. } => {
            let init = match init {
                Some(raw) => Some(parse_init_flag(raw)?),
                None => None,
            };
            commands::cmd_fit_zfs(&cfg, &mut out, seed, init)
        }
        Cmd::Rabi(_) => commands::cmd_rabi(&cfg, &mut out, seed),
        Cmd::Coherence(_) => commands::cmd_coherence(&cfg, &mut out, seed),
        Cmd::T1(_) => commands::cmd_t1(&cfg, &mut out, seed),
        Cmd::Oadf(_) => commands::cmd_oadf(&cfg, &mut out, seed),
        Cmd::Sense(_) => commands::cmd_sense(&cfg, &mut out, seed),
    }
}

/// Run `f` under a thread cap when one was requested and the parallel
/// feature is compiled in; thread count never changes the output bytes.
fn with_thread_cap<F>(threads: Option<usize>, f: F) -> Result<(), CliError>
where
    F: FnOnce() -> Result<(), CliError> + Send,
{
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        if n > 0 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Compute(format!("thread pool: {e}")))?;
            return pool.install(f);
        }
    }
    let _ = threads;
    f()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.cmd.common().threads;
    match with_thread_cap(threads, || run(&cli.cmd)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (label, msg, code) = match &e {
                CliError::Config(m) => ("config error", m, 2),
                CliError::Data(m) => ("input error", m, 2),
                CliError::Compute(m) => ("numerical error", m, 3),
                CliError::Io(m) => ("io error", m, 4),
            };
            eprintln!("tripletlab: {label}: {msg}");
            ExitCode::from(code)
        }
    }
}

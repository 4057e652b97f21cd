//! Command-line front end: configuration, dispatch and CSV/manifest output.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::RunConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "macrohom", version, about = "Bright twin-beam two-photon interference simulator")]
pub struct Cli {
    /// TOML config, or a manifest.json from an earlier run.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// RNG seed for `mc`; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Difference-variance trace versus delay.
    Trace,
    /// Cross-correlation g2 versus delay.
    G2,
    /// Narrow-peak width versus parametric gain.
    SweepGain,
    /// Fit I = scale * sinh^2(c * sqrt(P)) to measured data.
    FitGain {
        /// Two-column CSV with header power_mw,intensity.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Walk-off that gives the target spectral width.
    Calibrate,
    /// Monte-Carlo pulse ensembles.
    Mc,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Trace => "trace",
            Command::G2 => "g2",
            Command::SweepGain => "sweep-gain",
            Command::FitGain { .. } => "fit-gain",
            Command::Calibrate => "calibrate",
            Command::Mc => "mc",
        }
    }
}

/// Parse arguments, run, and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(path) => {
            println!("{}", path.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Run a parsed command; returns the manifest path.
pub fn execute(cli: &Cli) -> Result<PathBuf, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let name = cli.command.name();
    match &cfg.command {
        Some(c) if c != name => {
            return Err(CliError::Validation(format!("config was recorded for `{c}`, not `{name}`")));
        }
        _ => cfg.command = Some(name.to_string()),
    }
    if let Some(s) = cli.seed {
        cfg.seed = Some(s);
    }
    let threads = match cli.threads {
        Some(0) => return Err(CliError::Validation("--threads must be >= 1".into())),
        Some(n) => n,
        None => 0,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let mut out = output::OutputSet::new(&cli.out)?;
    let (resolved, summary) = pool.install(|| match &cli.command {
        Command::Trace => commands::trace(&mut cfg, &mut out),
        Command::G2 => commands::g2(&mut cfg, &mut out),
        Command::SweepGain => commands::sweep_gain(&mut cfg, &mut out),
        Command::FitGain { data } => commands::fit_gain(&mut cfg, &mut out, data.clone()),
        Command::Calibrate => commands::calibrate(&mut cfg, &mut out),
        Command::Mc => commands::mc(&mut cfg, &mut out),
    })?;
    out.finish(&cfg, resolved, summary)
}

#[cfg(test)]
mod tests;

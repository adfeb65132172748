//! `tissuesim` command line.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::cohort::{generate_cohort, recompute_stats};
use crate::config::{parse_config, preset_fig4, to_toml, PresetScale};
use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "tissuesim",
    version,
    about = "Synthetic multiplexed tissue images with ground truth"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one image per seed and write masks, volumes, metrics and a manifest.
    Generate {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated seeds; defaults to the config's `seed`.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        out: PathBuf,
        /// Also write per-step loss / unassigned-count CSVs.
        #[arg(long)]
        telemetry: bool,
    },
    /// Recompute metrics from the masks and volumes listed in a manifest.
    Stats {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a built-in config.
    Preset {
        #[arg(long, value_enum)]
        name: PresetName,
        #[arg(long, value_enum, default_value = "desk")]
        scale: ScaleArg,
        /// Defaults to standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PresetName {
    Fig4,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScaleArg {
    Desk,
    Full,
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Generate {
            config,
            seeds,
            out,
            telemetry,
        } => {
            let text = fs::read_to_string(&config).map_err(|e| Error::io(&config, e))?;
            let cfg = parse_config(&text)?;
            let seeds = seeds.unwrap_or_else(|| vec![cfg.seed]);
            let manifest = generate_cohort(&cfg, &seeds, &out, telemetry)?;
            eprintln!(
                "wrote {} image(s) to {}",
                manifest.images.len(),
                out.display()
            );
        }
        Command::Stats { manifest, out } => {
            let written = recompute_stats(&manifest, &out)?;
            eprintln!("wrote {} file(s) to {}", written.len(), out.display());
        }
        Command::Preset { name, scale, out } => {
            let PresetName::Fig4 = name;
            let scale = match scale {
                ScaleArg::Desk => PresetScale::Desk,
                ScaleArg::Full => PresetScale::Full,
            };
            let text = to_toml(&preset_fig4(scale));
            match out {
                Some(path) => fs::write(&path, text).map_err(|e| Error::io(&path, e))?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

pub fn run_cli<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{info, LevelFilter};
use photloc_core::harness::{emit, load_config, load_manifest, run_preset, Overrides, Preset};
use photloc_core::{ExperimentConfig, Result};

#[derive(Parser)]
#[command(name = "photloc", version, about = "Heralded single-photon coherence and transverse localization")]
struct Cli {
    /// Repeat for more log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a figure preset or the custom experiment from a config file.
    Run {
        /// fig1, fig3, fig4, fig5 or custom.
        preset: Preset,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Re-run the experiment echoed in a manifest.json.
    Replay {
        manifest: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
}

#[derive(clap::Args)]
struct RunFlags {
    /// TOML configuration file; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed for disorder realizations.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    realizations: Option<usize>,
    /// Worker threads; 0 uses all cores.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
}

impl RunFlags {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            realizations: self.realizations,
            workers: self.workers,
            out: self.out.clone(),
        }
    }
}

fn execute(preset: Preset, mut config: ExperimentConfig, flags: &RunFlags) -> Result<()> {
    config.apply(&flags.overrides());
    let dir = config.output.directory.clone();
    let results = run_preset(preset, &config)?;
    let files = emit(&results, Path::new(&dir))?;
    info!("wrote {} file(s) to {dir}", files.len());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { preset, flags } => {
            let config = match &flags.config {
                Some(path) => load_config(path)?,
                None => ExperimentConfig::default(),
            };
            execute(preset, config, &flags)
        }
        Command::Replay { manifest, flags } => {
            let m = load_manifest(&manifest)?;
            let config = match &flags.config {
                Some(path) => load_config(path)?,
                None => m.config,
            };
            execute(m.preset, config, &flags)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => LevelFilter::Warn,
        1 => LevelFilter::Info,
        _ => LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mwip_cli::acceptance;
use mwip_cli::commands::{self, Command, Context};
use mwip_cli::config::ExperimentConfig;
use mwip_cli::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "mwip", version, about = "Numerical laboratory for coupled wave systems with matrix potentials")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Experiment config (TOML); defaults apply when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory. MWIP_OUT takes precedence.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// After the command, run the acceptance criteria it covers; exit 4 on failure.
    #[arg(long, global = true)]
    check: bool,

    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for parallel sweeps.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Forward solves with energy audit and archives.
    Simulate,
    /// Geometric-optics probe construction.
    Probe,
    /// Carleman estimate sweep and integration-by-parts audits.
    Carleman,
    /// Integral identity terms per h.
    Identity,
    /// Remainder decay and remainder-norm sweeps over h.
    Sweep,
    /// Fourier samples on the accessible cone.
    Reconstruct,
    /// Plot-ready aggregation of earlier outputs.
    Report,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Simulate => Command::Simulate,
            Cmd::Probe => Command::Probe,
            Cmd::Carleman => Command::Carleman,
            Cmd::Identity => Command::Identity,
            Cmd::Sweep => Command::Sweep,
            Cmd::Reconstruct => Command::Reconstruct,
            Cmd::Report => Command::Report,
        }
    }
}

fn execute(cli: &Cli) -> CliResult<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
    }
    let mut config = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let out = std::env::var_os("MWIP_OUT")
        .map(PathBuf::from)
        .or_else(|| cli.out.clone())
        .unwrap_or_else(|| PathBuf::from(&config.out));
    let cmd = Command::from(cli.command);
    let ctx = Context::new(config, out)?;
    for path in commands::run(cmd, &ctx)? {
        println!("wrote {}", path.display());
    }
    if cli.check {
        let outcomes = acceptance::run_for(cmd);
        let failed: Vec<String> = outcomes.iter().filter(|o| !o.pass).map(|o| o.label()).collect();
        if !failed.is_empty() {
            return Err(CliError::Check(failed.join("; ")));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mwip: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

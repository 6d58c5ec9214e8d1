use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};

mod commands;
mod config;

use commands::Failure;
use config::Config;

#[derive(Debug, Parser)]
#[command(name = "moran", version, about = "Moran-model chains, exact laws and limit predictions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Subcommand)]
enum Command {
    /// Run the chain and write sampled populations with a summary.
    Simulate(Flags),
    /// Predict the limit of the empirical law and write it as JSON and CSV.
    Limit(Flags),
    /// Check detailed balance of the exact transition matrix.
    Balance(Flags),
    /// Run a lambda by n convergence table.
    Sweep(Flags),
    /// Write the exact stationary law of the count vector.
    Oracle(Flags),
}

#[derive(Debug, Clone, clap::Args)]
struct Flags {
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed, overriding the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
}

impl Command {
    fn flags(&self) -> &Flags {
        match self {
            Command::Simulate(f) | Command::Limit(f) | Command::Balance(f) | Command::Sweep(f) | Command::Oracle(f) => f,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Limit(_) => "limit",
            Command::Balance(_) => "balance",
            Command::Sweep(_) => "sweep",
            Command::Oracle(_) => "oracle",
        }
    }
}

fn unix_seconds() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn log(dir: &Path, line: &str) {
    if let Ok(mut f) = OpenOptions::new().create(true).append(true).open(dir.join("run.log")) {
        let _ = writeln!(f, "{} {line}", unix_seconds());
    }
}

fn run(command: &Command) -> Result<(), Failure> {
    let flags = command.flags();
    let cfg = Config::load(flags.config.clone(), flags.seed, flags.out.clone())?;
    if let Some(t) = cfg.threads() {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Runtime(e.into()))?;
    }
    std::fs::create_dir_all(&cfg.out)
        .map_err(|e| Failure::Runtime(anyhow::anyhow!("cannot create {}: {e}", cfg.out.display())))?;
    log(&cfg.out, &format!("start {} seed={} config={}", command.name(), cfg.seed, flags.config.display()));
    let result = match command {
        Command::Simulate(_) => commands::simulate(&cfg),
        Command::Limit(_) => commands::limit(&cfg),
        Command::Balance(_) => commands::balance(&cfg),
        Command::Sweep(_) => commands::sweep(&cfg),
        Command::Oracle(_) => commands::oracle(&cfg),
    };
    let status = match &result {
        Ok(()) => "ok".to_string(),
        Err(Failure::Config(e)) => format!("config error: {e}"),
        Err(Failure::Runtime(e)) => format!("error: {e:#}"),
    };
    log(&cfg.out, &format!("finish {} {status}", command.name()));
    result
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("invalid config: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

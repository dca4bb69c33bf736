use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use apod_core::cli::{output_dir, parse_config, print_config, run_experiment};

#[derive(Parser)]
#[command(name = "rom-apod", version, about = "Static and adaptive POD for periodic advection-diffusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every method listed in the config and write result files.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Skip the full-order reference run (no error columns).
        #[arg(long)]
        no_reference: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Validate a config and print it with defaults filled in.
    Check { config: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rom-apod: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> apod_core::Result<()> {
    match cli.command {
        Command::Check { config } => {
            let cfg = parse_config(&std::fs::read_to_string(&config)?)?;
            emit(&print_config(&cfg))
        }
        Command::Run { config, out, no_reference, seed } => {
            let mut cfg = parse_config(&std::fs::read_to_string(&config)?)?;
            if no_reference {
                cfg.reference = false;
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let dir = output_dir(&cfg, out.as_deref());
            let results = run_experiment(&cfg, &dir)?;
            let mut report = String::new();
            for r in &results {
                let line = match &r.outcome {
                    Ok(run) => format!(
                        "{:<11} updates {:>3}  dofs {:>10.2}  avg error {}  {:.2}s\n",
                        r.method.name(),
                        run.stats.update_times,
                        r.dofs().unwrap_or(f64::NAN),
                        run.stats.average_error.map_or("-".to_string(), |e| format!("{e:.3e}")),
                        r.wall_seconds
                    ),
                    Err(msg) => format!("{:<11} failed: {msg}\n", r.method.name()),
                };
                report.push_str(&line);
            }
            report.push_str(&format!("results written to {}\n", dir.display()));
            emit(&report)?;
            if results.iter().any(|r| r.outcome.is_err()) {
                return Err(apod_core::Error::InvalidArgument("one or more methods failed".into()));
            }
            Ok(())
        }
    }
}

fn emit(text: &str) -> apod_core::Result<()> {
    match io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

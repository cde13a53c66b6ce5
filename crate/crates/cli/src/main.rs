//! Command-line entry point: runs declarative geometric-phase jobs and
//! lists the model catalog.
//!
//! Exit codes: 0 ok, 1 numeric-invariant failure, 2 config error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use holonomy_core::job::{run_job, Convention, JobConfig, JobError, JobOptions};

#[derive(Parser)]
#[command(name = "holonomy", version, about = "Geometric phases and holonomic gates for small driven quantum systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConventionArg {
    Pole,
    Equator,
}

#[derive(Subcommand)]
enum Command {
    /// Run a job described by a JSON config file.
    Run {
        /// Path to the job config (JSON, schema_version 1).
        config: PathBuf,
        /// Output directory for result.json and trace files.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Also write CSV traces where the method supports them.
        #[arg(long)]
        trace: bool,
        /// Worker threads for independent propagations (sweep method).
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Geometric-phase reporting convention for scalar outputs.
        #[arg(long, value_enum, default_value = "pole")]
        convention: ConventionArg,
    },
    /// Print the model/loop/method catalog.
    ListModels,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListModels => {
            print!("{}", holonomy_core::job::list_models());
            ExitCode::SUCCESS
        }
        Command::Run {
            config,
            out,
            trace,
            threads,
            convention,
        } => run(config, out, trace, threads, convention),
    }
}

fn run(
    config: PathBuf,
    out: PathBuf,
    trace: bool,
    threads: usize,
    convention: ConventionArg,
) -> ExitCode {
    let text = match std::fs::read_to_string(&config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("config error: cannot read {}: {e}", config.display());
            return ExitCode::from(2);
        }
    };
    let cfg = match JobConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    let opts = JobOptions {
        convention: match convention {
            ConventionArg::Pole => Convention::Pole,
            ConventionArg::Equator => Convention::Equator,
        },
        trace,
        threads: threads.max(1),
    };
    match run_job(&cfg, &opts) {
        Ok(output) => {
            if let Err(e) = std::fs::create_dir_all(&out) {
                eprintln!("config error: cannot create output dir: {e}");
                return ExitCode::from(2);
            }
            let result_path = out.join("result.json");
            if let Err(e) = std::fs::write(&result_path, &output.result_json) {
                eprintln!("config error: cannot write {}: {e}", result_path.display());
                return ExitCode::from(2);
            }
            for (name, contents) in &output.traces {
                let path = out.join(name);
                if let Err(e) = std::fs::write(&path, contents) {
                    eprintln!("config error: cannot write {}: {e}", path.display());
                    return ExitCode::from(2);
                }
            }
            print!("{}", output.result_json);
            ExitCode::SUCCESS
        }
        Err(JobError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(JobError::Numeric(e)) => {
            eprintln!("error {}: {e}", e.name());
            ExitCode::from(1)
        }
    }
}

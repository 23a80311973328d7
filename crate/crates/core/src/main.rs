use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use membrane_core::runner::{exit_code, run_file, RunConfig, RunOptions};

#[derive(Parser)]
#[command(name = "membrane", version, about = "Membrane energy density experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON configuration.
    Run {
        config: PathBuf,
        /// Output directory (default: the config's output_dir, else out/<kind>).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print the JSON Schema of the configuration file.
    Schema,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let (config, out, seed, threads) = match cli.command {
        Command::Schema => {
            print!("{}", RunConfig::json_schema());
            return ExitCode::SUCCESS;
        }
        Command::Run {
            config,
            out,
            seed,
            threads,
        } => (config, out, seed, threads),
    };
    let opts = RunOptions { out, seed, threads };
    let result = run_file(&config, &opts);
    match &result {
        Ok(s) => {
            for c in &s.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            println!("artifacts written to {}", s.out_dir.display());
        }
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(exit_code(&result) as u8)
}

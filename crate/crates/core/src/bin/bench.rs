use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gpemu::backend::BackendKind;
use gpemu::bench::{
    format_speedup, format_summary, load_rows, run_bench, speedup_report, summarize, write_summary_csv,
    BenchConfig,
};
use gpemu::experiment::{DesignSpec, TestFunction, DEFAULT_EXCHANGE_BUDGET};
use gpemu::GpError;

#[derive(Parser)]
#[command(name = "bench", about = "GP emulator benchmark sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep described by a key = value config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Per-cell means of a report CSV.
    Summarize {
        csv: PathBuf,
        /// Also write the summary as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Wall-time ratios between backends of a report CSV.
    Speedup {
        csv: PathBuf,
        #[arg(long, default_value = "reference")]
        numerator: BackendKind,
        #[arg(long)]
        denominator: Option<BackendKind>,
    },
    /// Write a maximin design and its test-function responses as CSV.
    Design {
        #[arg(long)]
        function: TestFunction,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_EXCHANGE_BUDGET)]
        exchange_budget: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> gpemu::Result<()> {
    match cli.command {
        Command::Run { config } => {
            let cfg = BenchConfig::load(&config)?;
            let rows = run_bench(&cfg)?;
            print!("{}", format_summary(&summarize(&rows)));
            println!("{} rows written to {}", rows.len(), cfg.output_path.display());
        }
        Command::Summarize { csv, out } => {
            let summary = summarize(&load_rows(&csv)?);
            print!("{}", format_summary(&summary));
            if let Some(out) = out {
                write_summary_csv(std::fs::File::create(out)?, &summary)?;
            }
        }
        Command::Speedup { csv, numerator, denominator } => {
            let rows = speedup_report(&load_rows(&csv)?, numerator, denominator);
            print!("{}", format_speedup(&rows));
        }
        Command::Design { function, n, seed, exchange_budget, out } => {
            let spec = DesignSpec { n, d: function.dim(), seed, exchange_budget };
            function.dataset(&spec)?.save_csv(out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ GpError::InvalidConfig(_)) => {
            eprintln!("configuration error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

//! `advos` command line: run experiment grids, sweep the oversampling rate,
//! and print result tables.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use advos::harness::{
    from_json, parse_grid, restrict, run, sweep_fs, to_csv, to_json, write_outputs, write_sweep, ExperimentConfig,
    HarnessError, Method,
};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "advos", version, about = "Adversarial oversampling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every configured (dataset, method, seed) cell and write results.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        dataset: Option<String>,
    },
    /// Repeat the run for each oversampling fraction in the grid (AO/DO only).
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// `start:stop:step` or a comma-separated list.
        #[arg(long, default_value = "0.1:1.0:0.1")]
        grid: String,
    },
    /// Print the table stored in a results directory.
    Table {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

enum Outcome {
    Ok,
    SomeCellsFailed,
}

fn execute(cli: Cli) -> Result<Outcome, HarnessError> {
    match cli.command {
        Command::Run { config, seed, method, dataset } => {
            let cfg = ExperimentConfig::load(&config)?;
            let method = method.as_deref().map(str::parse::<Method>).transpose()?;
            let cfg = restrict(&cfg, seed, method, dataset.as_deref())?;
            let out = run(&cfg)?;
            let dir = cfg.output_dir();
            for f in write_outputs(&dir, &out)? {
                eprintln!("wrote {}", f.display());
            }
            print!("{}", to_csv(&out.table));
            Ok(if out.has_failures() { Outcome::SomeCellsFailed } else { Outcome::Ok })
        }
        Command::Sweep { config, grid } => {
            let cfg = ExperimentConfig::load(&config)?;
            let grid = parse_grid(&grid)?;
            let out = sweep_fs(&cfg, &grid)?;
            for f in write_sweep(&cfg.output_dir(), &out)? {
                eprintln!("wrote {}", f.display());
            }
            for s in &out.series {
                println!("# {} {}", s.dataset, s.method);
                println!("f,acsa");
                for (f, a) in &s.points {
                    println!("{f},{}", a.map_or("NA".to_string(), |a| format!("{a:.2}")));
                }
            }
            let failed = out.runs.iter().flat_map(|r| &r.table.cells).any(|c| c.error.is_some());
            Ok(if failed { Outcome::SomeCellsFailed } else { Outcome::Ok })
        }
        Command::Table { input, format } => {
            let path = if input.is_dir() { input.join("results.json") } else { input };
            let text = fs::read_to_string(&path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
            let table = from_json(&text)?;
            match format {
                Format::Csv => print!("{}", to_csv(&table)),
                Format::Json => println!("{}", to_json(&table)?),
            }
            Ok(Outcome::Ok)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::SomeCellsFailed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime};

use circuitlab::config::{load, Overrides};
use circuitlab::output::write_run;
use circuitlab::{models, verify, CliError};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "circuitlab", version, about = "Monetary circuit, interbank default and bank balance-sheet models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write its artifacts.
    Run {
        config: PathBuf,
        /// Master seed; overrides `run.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of Monte Carlo paths; overrides `run.paths`.
        #[arg(long)]
        paths: Option<usize>,
        /// Output directory; defaults to `circuitlab-out/<model>`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write SVG plots.
        #[arg(long)]
        svg: bool,
    },
    /// Run a named check suite, or `all`.
    Verify {
        suite: String,
        /// Print reports as JSON instead of tables.
        #[arg(long)]
        json: bool,
    },
    /// List the check suites.
    Suites,
}

fn run(config: PathBuf, overrides: Overrides) -> Result<(), CliError> {
    let started = (SystemTime::now(), Instant::now());
    let scenario = load(&config, &overrides)?;
    log::info!("running {} with {} paths", scenario.model.name(), scenario.run.paths);
    let out = models::execute(&scenario)?;
    let dir = scenario.out_dir();
    let manifest = write_run(&scenario, out, started, &dir)?;
    println!("{}", dir.join("manifest.json").display());
    log::info!("{} files in {:.2} s", manifest.outputs.len(), manifest.wall_clock_seconds);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, seed, paths, out, svg } => match run(config, Overrides { seed, paths, out, svg }) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("{}", e.report());
                ExitCode::from(e.exit_code() as u8)
            }
        },
        Command::Verify { suite, json } => {
            let suites: Vec<&verify::Suite> = if suite == "all" {
                verify::SUITES.iter().collect()
            } else if let Some(s) = verify::find(&suite) {
                vec![s]
            } else {
                let names: Vec<&str> = verify::SUITES.iter().map(|s| s.name).collect();
                let e = CliError::schema("suite", format!("unknown suite `{suite}`; available: all, {}", names.join(", ")));
                eprintln!("{}", e.report());
                return ExitCode::from(2);
            };
            let mut ok = true;
            for s in suites {
                let report = s.run();
                ok &= report.pass();
                if json {
                    println!("{}", serde_json::to_string(&report).expect("report serializes"));
                } else {
                    println!("{}", report.table());
                }
            }
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Command::Suites => {
            for s in verify::SUITES {
                println!("{:<20} {:>2}  {:>5.0} s  {}", s.name, s.criterion, s.budget_seconds, s.about);
            }
            ExitCode::SUCCESS
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use infoflow::runner::{run_scenario, run_suite, scenarios, Scale, ScenarioConfig, Suite};

const DEFAULT_SEED: u64 = 20240611;

#[derive(Parser)]
#[command(name = "infoflow", version, about = "Information-flow ledgers for filtered diffusions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario config and write ledger.csv and report.txt.
    Run { config: PathBuf },
    /// Run a built-in acceptance suite: gaussian, grid, infoflow, feedback or all.
    Check {
        suite: String,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value = "small")]
        scale: String,
    },
    /// Print the built-in scenario configs.
    ListScenarios {
        /// Print the full config of one scenario.
        name: Option<String>,
    },
}

fn run(config: PathBuf) -> ExitCode {
    let text = match std::fs::read_to_string(&config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", config.display());
            return ExitCode::from(2);
        }
    };
    let cfg = match ScenarioConfig::from_toml(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let started = Instant::now();
    match run_scenario(&cfg, std::path::Path::new(".")) {
        Ok((out, files)) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            println!("invariants: {}", if out.report.passed() { "PASS" } else { "FAIL" });
            eprintln!("wall-clock: {:.2?}", started.elapsed());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn check(suite: &str, seed: u64, scale: &str) -> ExitCode {
    let (suite, scale) = match (suite.parse::<Suite>(), scale.parse::<Scale>()) {
        (Ok(s), Ok(c)) => (s, c),
        (Err(e), _) | (_, Err(e)) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let started = Instant::now();
    let results = run_suite(suite, seed, scale);
    for r in &results {
        println!("{}", r.line());
    }
    let failed = results.iter().filter(|r| !r.pass).count();
    println!("{} criteria, {} failed", results.len(), failed);
    eprintln!("wall-clock: {:.2?}", started.elapsed());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config } => run(config),
        Command::Check { suite, seed, scale } => check(&suite, seed, &scale),
        Command::ListScenarios { name: None } => {
            for (name, _) in scenarios::BUILTIN {
                println!("{name}");
            }
            ExitCode::SUCCESS
        }
        Command::ListScenarios { name: Some(n) } => match scenarios::find(&n) {
            Some(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            None => {
                eprintln!("error: no built-in scenario {n:?}");
                ExitCode::from(2)
            }
        },
    }
}

use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use casa_core::scenario::{load_suite, run_suite};
use casa_core::system::{Assistant, ClockMode, Config};
use casa_core::{grammar, parse_timestamp, Timestamp};
use casa_cli::{repl, server};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ClockArg {
    Virtual,
    Wall,
}

/// Conversational manager for a simulated smart home.
#[derive(Debug, Parser)]
#[command(name = "casa", version)]
struct Args {
    /// Directory for devices.jsonl and command.log. Omit to keep nothing.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Device registry (JSON lines) to use instead of the stored one.
    #[arg(long)]
    devices: Option<PathBuf>,
    /// Serve the HTTP API on this port instead of starting the REPL.
    #[arg(long)]
    port: Option<u16>,
    #[arg(long, value_enum, default_value = "virtual")]
    clock: ClockArg,
    /// Virtual clock start, e.g. "2024-03-04 07:00".
    #[arg(long, value_parser = parse_start)]
    start: Option<Timestamp>,
    /// Print every utterance template the grammar accepts and exit.
    #[arg(long)]
    dump_grammar: bool,
    /// Run a scenario suite and exit non-zero if any scenario fails.
    #[arg(long, value_name = "SUITE")]
    scenarios: Option<PathBuf>,
}

fn parse_start(s: &str) -> Result<Timestamp, String> {
    parse_timestamp(s).map_err(|e| e.to_string())
}

fn run_scenarios(path: &Path) -> ExitCode {
    let suite = match load_suite(path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    let reports = run_suite(&suite);
    let failed = reports.iter().filter(|r| !r.failures.is_empty()).count();
    for r in &reports {
        println!("{r}");
    }
    println!("{} scenarios, {} passed, {} failed", reports.len(), reports.len() - failed, failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();

    if args.dump_grammar {
        print!("{}", grammar::dump());
        return ExitCode::SUCCESS;
    }
    if let Some(suite) = &args.scenarios {
        return run_scenarios(suite);
    }

    let config = Config {
        data_dir: args.data_dir,
        devices: args.devices,
        clock: match args.clock {
            ClockArg::Virtual => ClockMode::Virtual,
            ClockArg::Wall => ClockMode::Wall,
        },
        start: args.start,
    };
    let mut assistant = match Assistant::open(&config) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("casa: {e}");
            return ExitCode::from(2);
        }
    };

    let outcome = match args.port {
        Some(port) => tokio::runtime::Runtime::new().and_then(|rt| rt.block_on(server::serve(assistant, port))),
        None => {
            let stdin = io::stdin();
            repl::run_repl(&mut assistant, stdin.lock(), io::stdout())
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("casa: {e}");
            ExitCode::FAILURE
        }
    }
}

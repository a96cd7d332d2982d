//! `qsim`: run, validate and list interference scenarios.
//!
//! Exit codes: 0 on success, 2 when the input is invalid, 3 when a run or
//! its output fails.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qsim_core::scenario::{
    catalog, catalog_entry, parse_scenario, run_scenario, serialize, Format, MAX_EVENTS,
    DEFAULT_SEED,
};
use qsim_core::Scenario;

const EXIT_INVALID: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "qsim", version, about = "Simulate quantum interference experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file (or a catalog entry by name).
    Run {
        file: PathBuf,
        /// Overrides the file's seed and QSIM_SEED.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the file's n_events.
        #[arg(long)]
        events: Option<u64>,
        /// Directory for output files; JSON goes to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "json", value_parser = ["json", "csv"])]
        format: String,
    },
    /// Check a scenario file without running it.
    Validate { file: PathBuf },
    /// Print the built-in scenario catalog.
    List,
}

struct Failure {
    code: u8,
    message: String,
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_INVALID,
        message: message.into(),
    }
}

fn runtime(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_RUNTIME,
        message: message.into(),
    }
}

/// Reads `file`, falling back to the catalog when no such file exists.
fn load(file: &Path) -> Result<Scenario, Failure> {
    let bytes = match fs::read(file) {
        Ok(b) => b,
        Err(e) => match file.to_str().and_then(catalog_entry) {
            Some(entry) if !file.exists() => entry.text.as_bytes().to_vec(),
            _ => return Err(invalid(format!("{}: {e}", file.display()))),
        },
    };
    parse_scenario(&bytes).map_err(|d| invalid(format!("{}: {d}", file.display())))
}

fn env_seed() -> Result<Option<u64>, Failure> {
    match std::env::var("QSIM_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| invalid(format!("QSIM_SEED: `{v}` is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

fn run(
    file: &Path,
    seed: Option<u64>,
    events: Option<u64>,
    out: Option<&Path>,
    format: Format,
) -> Result<(), Failure> {
    let mut s = load(file)?;
    s.seed = Some(match (seed, s.seed) {
        (Some(flag), _) => flag,
        (None, Some(from_file)) => from_file,
        (None, None) => env_seed()?.unwrap_or(DEFAULT_SEED),
    });
    if let Some(n) = events {
        if !(1..=MAX_EVENTS).contains(&n) {
            return Err(invalid(format!("--events: {n} is outside [1, {MAX_EVENTS}]")));
        }
        s.n_events = n;
    }
    let bundle = run_scenario(&s).map_err(|e| runtime(e.to_string()))?;
    let artifacts = serialize(&bundle, format);
    match out {
        None if format == Format::Json => std::io::stdout()
            .lock()
            .write_all(&artifacts[0].contents)
            .map_err(|e| runtime(format!("stdout: {e}"))),
        None => Err(invalid("--format csv writes several files and needs --out")),
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
            for a in &artifacts {
                let path = dir.join(&a.file_name);
                fs::write(&path, &a.contents)
                    .map_err(|e| runtime(format!("{}: {e}", path.display())))?;
                log::info!("wrote {}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            file,
            seed,
            events,
            out,
            format,
        } => {
            let format = format.parse().expect("clap restricts the format");
            run(&file, seed, events, out.as_deref(), format)
        }
        Command::Validate { file } => load(&file).map(|s| {
            println!("ok: {} ({}, {} events)", s.name, s.experiment(), s.n_events);
        }),
        Command::List => {
            for entry in catalog() {
                let s = entry.scenario();
                println!("{:<24} {:<18} {}", entry.file_name, s.experiment(), s.name);
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

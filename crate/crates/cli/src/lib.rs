//! Command-line driver for the shifted-convolution experiments.
//!
//! `shiftconv run <subcommand> [CONFIG]` parses a flat config, runs the
//! experiment, writes CSV and JSONL reports plus a manifest under
//! `<out>/<subcommand>/`, and exits with
//! 0 when every gate passes, 1 when a gate fails, 2 on a config error and
//! 3 on a numerical or I/O failure.

pub mod commands;
pub mod config;
pub mod output;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand as ClapSubcommand};

use commands::{CommandError, Outcome};
use config::Config;

pub const EXIT_OK: i32 = 0;
pub const EXIT_GATE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "SHIFTCONV_OUT";

#[derive(Parser, Debug)]
#[command(name = "shiftconv", version, about = "Numerical experiments for a shifted convolution sum")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(ClapSubcommand, Debug)]
pub enum Command {
    /// Run an experiment.
    Run {
        /// One of: charsum-census, t-identity, bound-census, jutila-l2,
        /// voronoi-gl2, rankin-avg, dh-scaling, dyadic-sharp.
        subcommand: String,
        /// Config file; the bundled default is used when omitted.
        config: Option<PathBuf>,
        /// Same as the positional CONFIG.
        #[arg(long = "config", conflicts_with = "config")]
        config_flag: Option<PathBuf>,
        /// Output root; defaults to $SHIFTCONV_OUT, then ./shiftconv-out.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; overrides the config's `threads` key.
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long, short)]
        verbose: bool,
    },
    /// Print a subcommand's bundled default config.
    Defaults { subcommand: String },
    /// List subcommands.
    List,
}

/// Classifies a library error: bad inputs are config errors, everything
/// else is a numerical or I/O failure.
pub fn exit_code_for(e: &shiftconv::Error) -> i32 {
    use shiftconv::Error::*;
    match e {
        NonInvertible { .. }
        | NotPrime(_)
        | EmptyRange { .. }
        | InvalidDivisor { .. }
        | OverlappingRanges { .. }
        | EmptyCollection(_)
        | DuplicateModulus(_)
        | UnsupportedWeight(_)
        | InsufficientPoints { .. }
        | DeltaOutOfRange { .. }
        | InvalidParameter(_) => EXIT_CONFIG,
        InsufficientBase { .. }
        | OutOfRange { .. }
        | TableTooShort { .. }
        | QuadratureFailure(_)
        | GammaOverflow(_)
        | Io(_) => EXIT_NUMERIC,
    }
}

fn unknown(name: &str) -> String {
    let names: Vec<&str> = commands::SUBCOMMANDS.iter().map(|s| s.name).collect();
    format!("unknown subcommand `{name}`; expected one of {}", names.join(", "))
}

pub fn main_with(cli: Cli) -> i32 {
    match cli.command {
        Command::List => {
            for s in commands::SUBCOMMANDS {
                println!("{:<16} {}", s.name, s.about);
            }
            EXIT_OK
        }
        Command::Defaults { subcommand } => match commands::find(&subcommand) {
            Some(s) => {
                print!("{}", s.default_config);
                EXIT_OK
            }
            None => {
                eprintln!("{}", unknown(&subcommand));
                EXIT_CONFIG
            }
        },
        Command::Run { subcommand, config, config_flag, out, threads, verbose } => {
            let out = out
                .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("shiftconv-out"));
            run(&subcommand, config.or(config_flag).as_deref(), &out, threads, verbose)
        }
    }
}

/// Runs one subcommand end to end and returns the exit code.
pub fn run(name: &str, config_path: Option<&Path>, out: &Path, threads: Option<usize>, verbose: bool) -> i32 {
    let Some(sub) = commands::find(name) else {
        eprintln!("{}", unknown(name));
        return EXIT_CONFIG;
    };
    let text = match config_path {
        Some(p) => match std::fs::read_to_string(p) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("cannot read config {}: {e}", p.display());
                return EXIT_CONFIG;
            }
        },
        None => sub.default_config.to_string(),
    };
    let cfg = match Config::parse(&text, sub.schema) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_CONFIG;
        }
    };
    let n = threads.unwrap_or(cfg.uint("threads") as usize);
    if n > 0 {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let log = |msg: &str| {
        if verbose {
            eprintln!("[{name}] {msg}");
        }
    };
    let outcome: Outcome = match (sub.run)(&cfg, &log) {
        Ok(o) => o,
        Err(CommandError::Config(e)) => {
            eprintln!("{e}");
            return EXIT_CONFIG;
        }
        Err(CommandError::Core(e)) => {
            eprintln!("error: {e}");
            return exit_code_for(&e);
        }
    };
    let passed = outcome.gates.iter().all(|g| g.passed);
    let code = if passed { EXIT_OK } else { EXIT_GATE };
    let dir = out.join(name);
    if let Err(e) = output::write_all(&dir, name, config_path, &cfg, &outcome, code) {
        eprintln!("error: {e}");
        return EXIT_NUMERIC;
    }
    for g in &outcome.gates {
        println!("{} {}: {}", if g.passed { "PASS" } else { "FAIL" }, g.name, g.detail);
    }
    println!("reports in {}", dir.display());
    code
}

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sofic_cli::config::{self, Kind};
use sofic_cli::emit::Format;
use sofic_cli::run;

/// Sofic pressure and entropy experiments.
#[derive(Parser, Debug)]
#[command(name = "sofic", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; without it results go to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; overrides the config.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
    /// Record wall-clock times (output is then no longer reproducible).
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    Pressure,
    Entropy,
    Classical,
    Variational,
    Properties,
    Tile,
    SoficCheck,
    Membership,
}

impl Command {
    fn kind(self) -> Kind {
        match self {
            Command::Pressure => Kind::Pressure,
            Command::Entropy => Kind::Entropy,
            Command::Classical => Kind::Classical,
            Command::Variational => Kind::Variational,
            Command::Properties => Kind::Properties,
            Command::Tile => Kind::Tile,
            Command::SoficCheck => Kind::SoficCheck,
            Command::Membership => Kind::Membership,
        }
    }
}

const EXIT_INVARIANT: u8 = 1;
const EXIT_USAGE: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(path) = &cli.config else {
        eprintln!("error: --config PATH is required");
        return ExitCode::from(EXIT_USAGE);
    };
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let mut cfg = match config::parse(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let kind = cli.command.kind();
    if cfg.kind != kind {
        eprintln!(
            "error: config field `kind`: config is for `{}` but the subcommand is `{}`",
            cfg.kind.as_str(),
            kind.as_str()
        );
        return ExitCode::from(EXIT_USAGE);
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if cfg.workers > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build_global() {
            eprintln!("error: cannot start {} workers: {e}", cfg.workers);
            return ExitCode::from(EXIT_USAGE);
        }
    }
    let bundle = match run::run(&cfg, run::RunOptions { timing: cli.timing }) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match &cli.out {
        Some(dir) => match bundle.write(dir, cli.format) {
            Ok(files) => {
                for f in files {
                    eprintln!("wrote {f}");
                }
            }
            Err(e) => {
                eprintln!("error: cannot write to {}: {e}", dir.display());
                return ExitCode::from(EXIT_USAGE);
            }
        },
        None => match cli.format {
            Format::Csv => print!("{}", bundle.csv()),
            Format::Json => print!("{}", bundle.json()),
        },
    }
    for inv in bundle.invariants.iter().filter(|i| !i.passed) {
        eprintln!("invariant failed: {}: {}", inv.name, inv.detail);
    }
    if bundle.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_INVARIANT)
    }
}

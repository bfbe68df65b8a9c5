use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use ruinfree::cli::{self, Command, Stage};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Solve,
    Verify,
    Sweep,
    Simulate,
    PaperExample,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Solve => Command::Solve,
            Cmd::Verify => Command::Verify,
            Cmd::Sweep => Command::Sweep,
            Cmd::Simulate => Command::Simulate,
            Cmd::PaperExample => Command::PaperExample,
        }
    }
}

/// Minimum probability of lifetime ruin with deferred annuities.
///
/// Exit codes: 0 all checks passed, 2 configuration, 3 solver, 4 verification,
/// 5 annuitization inequality, 6 Monte Carlo agreement, 7 I/O.
#[derive(Debug, Parser)]
#[command(name = "ruinfree", version)]
struct Args {
    #[arg(value_enum)]
    command: Cmd,
    /// TOML run configuration (optional for paper-example only).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed; overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Extra `key=value` or `section.key=value` overrides, e.g. `grid.n_y=4000`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cmd: Command = args.command.into();
    let mut overrides = args.overrides.clone();
    if let Some(seed) = args.seed {
        overrides.push(format!("seed={seed}"));
    }
    let cfg = match (&args.config, cmd) {
        (Some(path), _) => match std::fs::read_to_string(path) {
            Ok(text) => cli::parse_config_with(&text, &overrides),
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", path.display());
                return ExitCode::from(Stage::Io.exit_code() as u8);
            }
        },
        (None, Command::PaperExample) => {
            let base = cli::paper_defaults().to_toml();
            cli::parse_config_with(&base, &overrides)
        }
        (None, _) => {
            eprintln!("error: `{}` needs --config <file>", cmd.name());
            return ExitCode::from(Stage::Config.exit_code() as u8);
        }
    };
    let mut cfg = match cfg {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(Stage::Config.exit_code() as u8);
        }
    };
    if let Some(out) = args.out {
        cfg.out = out;
    }
    let dir = cfg.out.clone();
    ExitCode::from(cli::run_and_emit(cmd, &cfg, &dir) as u8)
}

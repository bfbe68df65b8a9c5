//! Command-line orchestration: configuration, the five commands, and
//! deterministic CSV/TOML artifacts with a checksummed manifest.
//!
//! Files written per command (all under the output directory, plus
//! `config.toml` with the resolved configuration and `manifest.toml`):
//!
//! | command         | files |
//! |-----------------|-------|
//! | `solve`         | `surface.csv`, `boundaries.csv`, `solve_report.toml` |
//! | `verify`        | `boundaries.csv`, `solve_report.toml`, `verification.toml` |
//! | `sweep`         | `sweep_levels.csv`, `ineq_margin.csv`, `sweep_report.toml` |
//! | `simulate`      | `simulation.csv`, `path_events.csv` |
//! | `paper-example` | `paper_surface.csv`, `phi_overlay.csv`, `boundaries.csv`, `verification.toml`, `simulation.csv`, `path_events.csv` |

mod config;
mod output;
mod run;

use std::path::Path;

pub use config::{parse_config, parse_config_with, Command, Levels, RunConfig, SimSettings};
pub use output::{emit_outputs, Artifact, Bundle, Cell, FileOut, MANIFEST};
pub use run::{
    execute, mc_agrees, paper_defaults, solve_surface, RunOutcome, Stage, StageError, MC_SIGMAS,
    PAPER_A, PAPER_MC_WEALTH, PAPER_SEED, PAPER_T_SAMPLE_WEALTH,
};

/// Execute and write outputs; returns the process exit code.
pub fn run_and_emit(cmd: Command, cfg: &RunConfig, dir: &Path) -> i32 {
    let outcome = match execute(cmd, cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return e.stage.exit_code();
        }
    };
    match emit_outputs(&outcome.bundle, dir) {
        Ok(arts) => {
            for a in &arts {
                println!("{:<22} {:>8} rows  {}", a.name, a.rows, &a.sha256[..16]);
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            return Stage::Io.exit_code();
        }
    }
    for (stage, msg) in &outcome.failures {
        eprintln!("FAILED [{}] {msg}", stage.name());
    }
    let code = outcome.exit_code();
    if code == 0 {
        println!("{}: all checks passed", cmd.name());
    }
    code
}

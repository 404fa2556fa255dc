use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use everett_cli::{exit, Overrides, Scenario, MANIFEST};

#[derive(Debug, Parser)]
#[command(name = "everett", version, about = "Run branching scenarios and write reproducible artifacts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a scenario config, listing every problem found.
    Validate {
        path: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Run a scenario and write its artifacts and manifest.
    Run {
        path: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Print the available scenarios.
    ListScenarios,
}

/// Each flag can also be set through `EVERETT_<FLAG>`; the flag wins.
#[derive(Debug, Args)]
struct Flags {
    /// Consistency tolerance on the normalized off-diagonal defect.
    #[arg(long, env = "EVERETT_TOL_CONSISTENCY")]
    tol_consistency: Option<f64>,
    /// Tolerance on the distance of conditional pasts from 0 or 1.
    #[arg(long, env = "EVERETT_TOL_BRANCHING")]
    tol_branching: Option<f64>,
    /// Output directory, replacing `output_dir` from the config.
    #[arg(long, env = "EVERETT_OUT")]
    out: Option<PathBuf>,
    /// Seed for randomized scenarios.
    #[arg(long, env = "EVERETT_SEED")]
    seed: Option<u64>,
}

impl From<Flags> for Overrides {
    fn from(f: Flags) -> Self {
        Overrides {
            tol_consistency: f.tol_consistency,
            tol_branching: f.tol_branching,
            out: f.out,
            seed: f.seed,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::ListScenarios => {
            for s in Scenario::ALL {
                println!("{:<22} {}", s.name(), s.summary());
            }
            exit::OK
        }
        Command::Validate { path, flags } => match everett_cli::validate(&path, &flags.into()) {
            Ok(cfg) => {
                println!("{}: ok ({})", path.display(), cfg.scenario);
                exit::OK
            }
            Err(e) => {
                eprintln!("{}: {e}", path.display());
                e.exit_code()
            }
        },
        Command::Run { path, flags } => match everett_cli::run(&path, &flags.into()) {
            Ok(m) => {
                for a in &m.assertions {
                    let mark = if a.passed { "PASS" } else { "FAIL" };
                    println!("{mark} {}: {}", a.name, a.detail);
                }
                for f in &m.artifacts {
                    println!("wrote {} ({} bytes)", f.path, f.bytes);
                }
                println!("wrote {MANIFEST}");
                if m.passed {
                    exit::OK
                } else {
                    exit::ASSERTION
                }
            }
            Err(e) => {
                eprintln!("{}: {e}", path.display());
                e.exit_code()
            }
        },
    };
    ExitCode::from(code)
}

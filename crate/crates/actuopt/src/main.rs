use std::path::PathBuf;
use std::process::ExitCode;

use actuopt::{run, Command, ExperimentConfig, RunOptions, EXIT_USAGE};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "actuopt",
    version,
    about = "Optimal control and actuator placement for beams and waves"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output` in the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for parallel work (default: all cores).
    #[arg(long, env = "ACTUOPT_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate the state equation and record energy and probe values.
    Simulate(Common),
    /// Verify adjoint gradients against duality and finite differences.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, hide = true)]
        corrupt_gradient: bool,
    },
    /// Jointly optimize the control and the actuator design.
    Optimize(Common),
    /// Solve the control problem on a grid of designs.
    Gridsearch(Common),
    /// Compare the discrete adjoint with the continuous final-value problem.
    OracleCompare(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut options = RunOptions::default();
    let (command, common) = match cli.command {
        Cmd::Simulate(c) => (Command::Simulate, c),
        Cmd::Gradcheck {
            common,
            corrupt_gradient,
        } => {
            options.corrupt_gradient = corrupt_gradient;
            (Command::Gradcheck, common)
        }
        Cmd::Optimize(c) => (Command::Optimize, c),
        Cmd::Gridsearch(c) => (Command::Gridsearch, c),
        Cmd::OracleCompare(c) => (Command::OracleCompare, c),
    };
    if let Some(n) = common.threads.filter(|&n| n > 0) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("actuopt: cannot start thread pool: {e}");
            return ExitCode::from(EXIT_USAGE as u8);
        }
    }
    let code = match ExperimentConfig::load(&common.config).and_then(|config| {
        let out = common
            .out
            .clone()
            .unwrap_or_else(|| PathBuf::from(&config.output));
        run(command, &config, &out, &options)
    }) {
        Ok(outcome) => {
            if outcome.exit_code == 0 {
                println!("{}: {}", command.name(), outcome.message);
            } else {
                eprintln!("actuopt {}: {}", command.name(), outcome.message);
            }
            outcome.exit_code
        }
        Err(e) => {
            eprintln!("actuopt {}: {e}", command.name());
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}

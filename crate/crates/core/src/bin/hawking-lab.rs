use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use hawking_lab::commands;
use hawking_lab::config::RunConfig;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    IntegralsCheck,
    Curvature,
    Expansion,
    Optimize,
    Bartnik,
    ElResidual,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::IntegralsCheck => "integrals-check",
            Command::Curvature => "curvature",
            Command::Expansion => "expansion",
            Command::Optimize => "optimize",
            Command::Bartnik => "bartnik",
            Command::ElResidual => "el-residual",
        }
    }
}

/// Hawking-mass experiments on perturbed geodesic spheres.
#[derive(Parser, Debug)]
#[command(version)]
struct Cli {
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Directory for report.json and CSV outputs; overrides `cli.out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = RunConfig::load(&cli.config).and_then(|cfg| {
        let outcome = commands::run(cli.command.name(), &cfg)?;
        if let Some(dir) = cli.out.clone().or_else(|| cfg.cli.out_dir.as_ref().map(PathBuf::from)) {
            outcome.write_to(&dir)?;
        }
        Ok(outcome)
    });
    match result {
        Ok(outcome) => {
            print!("{}", outcome.report);
            for f in &outcome.failing {
                eprintln!("FAIL {f}");
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

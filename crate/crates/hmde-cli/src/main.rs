use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hmde_cli::{catalog, config, scenario};

/// Batch runner for hybrid measure differential equation scenarios.
#[derive(Parser)]
#[command(name = "hmde", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a scenario config and run it.
    Run {
        /// Path to the TOML scenario config.
        config: PathBuf,
        /// Output directory (overrides the config).
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Maximum solve-grid cell width (overrides the config).
        #[arg(long)]
        grid_step: Option<f64>,
        /// Whole-path residual tolerance (overrides the config).
        #[arg(long)]
        tol: Option<f64>,
        /// Seed for randomized diagnostics (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
        /// Print the normalized config instead of running.
        #[arg(long)]
        dump_config: bool,
    },
    /// Validate a scenario config without running it.
    Validate {
        /// Path to the TOML scenario config.
        config: PathBuf,
        /// Print the normalized config after validation.
        #[arg(long)]
        dump_config: bool,
    },
    /// List the built-in problem catalog.
    Catalog,
}

fn load_scenario(path: &PathBuf) -> Result<config::Scenario, ExitCode> {
    let text = match std::fs::read_to_string(path) {
        Ok(text) => text,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return Err(ExitCode::FAILURE);
        }
    };
    match config::validate_config(&text) {
        Ok(scenario) => Ok(scenario),
        Err(errors) => {
            for e in &errors {
                eprintln!("error: {e}");
            }
            eprintln!(
                "{} validation error{} in {}",
                errors.len(),
                if errors.len() == 1 { "" } else { "s" },
                path.display()
            );
            Err(ExitCode::FAILURE)
        }
    }
}

fn apply_overrides(
    scenario: &mut config::Scenario,
    out_dir: Option<PathBuf>,
    grid_step: Option<f64>,
    tol: Option<f64>,
    seed: Option<u64>,
) -> Result<(), ExitCode> {
    if let Some(dir) = out_dir {
        scenario.out_dir = Some(dir);
    }
    if let Some(step) = grid_step {
        if !(step.is_finite() && step > 0.0) {
            eprintln!("error: --grid-step must be a positive finite number");
            return Err(ExitCode::FAILURE);
        }
        scenario.grid.step = Some(step);
    }
    if let Some(tol) = tol {
        if !(tol.is_finite() && tol > 0.0) {
            eprintln!("error: --tol must be a positive finite number");
            return Err(ExitCode::FAILURE);
        }
        scenario.tolerances.sweep = Some(tol);
    }
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Catalog => {
            print!("{}", catalog::describe());
            ExitCode::SUCCESS
        }
        Command::Validate { config, dump_config } => match load_scenario(&config) {
            Ok(scenario) => {
                if dump_config {
                    print!("{}", config::dump_config(&scenario));
                } else {
                    println!("ok: {} ({})", config.display(), scenario.kind);
                }
                ExitCode::SUCCESS
            }
            Err(code) => code,
        },
        Command::Run {
            config,
            out_dir,
            grid_step,
            tol,
            seed,
            dump_config,
        } => {
            let mut scenario = match load_scenario(&config) {
                Ok(s) => s,
                Err(code) => return code,
            };
            if let Err(code) = apply_overrides(&mut scenario, out_dir, grid_step, tol, seed) {
                return code;
            }
            if dump_config {
                print!("{}", config::dump_config(&scenario));
                return ExitCode::SUCCESS;
            }
            match scenario::run_scenario(&scenario) {
                Ok(manifest) => {
                    for file in &manifest.files {
                        println!("{}", file.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
    }
}

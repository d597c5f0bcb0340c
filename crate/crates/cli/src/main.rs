use std::path::PathBuf;
use std::process::ExitCode;

use chernoff_core::ini::KeyValueConfig;
use chernoff_core::matrix::{PropagatorVariant, PRESETS};
use chernoff_evolve::{run_experiment, ExperimentConfig, ExperimentKind, Observable, RunError};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "chernoff-evolve",
    about = "Convergence experiments for Chernoff product formulas"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Overrides of the form `--section.key=value`.
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// List the shipped matrix families, variants, observables and kinds.
    ListPresets,
    /// Print the version.
    Version,
}

fn configure_threads() -> Result<(), RunError> {
    let Ok(raw) = std::env::var("CHERNOFF_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        RunError::Config(format!(
            "CHERNOFF_THREADS must be a positive integer, got `{raw}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| RunError::Config(format!("thread pool: {e}")))
}

fn run(config: PathBuf, overrides: Vec<String>) -> Result<bool, RunError> {
    configure_threads()?;
    let text = std::fs::read_to_string(&config).map_err(|source| RunError::Io {
        path: config.clone(),
        source,
    })?;
    let cfg = ExperimentConfig::parse(&text, &overrides)?;
    let summary = run_experiment(&cfg)?;
    for c in &summary.outcome.checks {
        println!(
            "[{}] {}: {}",
            if c.passed { "pass" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    println!("wrote {}", summary.csv.display());
    if let Some(svg) = &summary.svg {
        println!("wrote {}", svg.display());
    }
    println!("wrote {}", summary.manifest.display());
    Ok(summary.outcome.passed())
}

fn list_presets() {
    let presets = KeyValueConfig::parse(PRESETS).expect("shipped presets parse");
    println!("matrix families:");
    for (key, dim) in presets.iter() {
        if let Some(name) = key.strip_suffix(".dim") {
            println!("  {name} (dim {dim})");
        }
    }
    println!("propagator variants:");
    for v in PropagatorVariant::ALL {
        println!("  {}", v.name());
    }
    println!("drift profiles:");
    for p in ["constant(x)", "linear(c)", "sine(a,w)", "poly(c0,c1,...)"] {
        println!("  {p}");
    }
    println!("observables:");
    for o in Observable::ALL {
        println!("  {:<6} {}", o.name(), o.formula());
    }
    println!("experiment kinds:");
    for k in ExperimentKind::ALL {
        println!("  {k}");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Version => {
            println!("chernoff-evolve {}", env!("CARGO_PKG_VERSION"));
            ExitCode::SUCCESS
        }
        Command::ListPresets => {
            list_presets();
            ExitCode::SUCCESS
        }
        Command::Run { config, overrides } => match run(config, overrides) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(1),
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(match e {
                    RunError::Config(_) => 2,
                    RunError::Io { .. } => 3,
                    RunError::Numeric(_) => 4,
                })
            }
        },
    }
}

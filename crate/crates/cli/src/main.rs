//! Command-line driver for OTOC, quasiprobability and timescale experiments.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime or numerical error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use otoc_core::experiment::{emit_plot, run_experiment, ConfigBuilder, PlotKind, OUTPUT_DIR_ENV};
use otoc_core::Error;

#[derive(Parser, Debug)]
#[command(name = "otoc-lab", version, about = "Simulate OTOCs, their quasiprobabilities and measurement protocols")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an experiment and write CSV files and a manifest.
    Run(RunArgs),
    /// Render an SVG figure from a CSV file written by `run`.
    Plot(PlotArgs),
}

/// Every flag mirrors a configuration key; flags override the config file.
#[derive(Args, Debug, Default)]
struct RunArgs {
    /// Flat key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// otoc, qpd, nonclassicality or sweep.
    #[arg(long)]
    experiment: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    n_qubits: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    h_over_j: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    g_over_j: Option<String>,
    /// Dephasing time in us, or `none` for the closed system.
    #[arg(long, allow_hyphen_values = true)]
    t2_star_us: Option<String>,
    /// Initial Gibbs temperature in units of J, or `infinite`.
    #[arg(long, allow_hyphen_values = true)]
    temperature_over_j: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    t_max_us: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    dt_grid_us: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    dt_integration_us: Option<String>,
    /// Nonclassicality threshold for the timescales (default dt_grid_us squared).
    #[arg(long, allow_hyphen_values = true)]
    threshold: Option<String>,
    /// Comma-separated subset of ideal, weak, interferometric, clock.
    #[arg(long)]
    protocols: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    sweep_points: Option<String>,
    /// Output directory; falls back to $OTOC_LAB_OUTPUT_DIR.
    #[arg(long)]
    output_dir: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    worker_count: Option<String>,
    /// Also write an SVG next to each CSV.
    #[arg(long)]
    plot: bool,
}

#[derive(Args, Debug)]
struct PlotArgs {
    /// CSV file to render.
    #[arg(long)]
    csv: PathBuf,
    /// otoc, qpd, nonclassicality or ratio.
    #[arg(long)]
    kind: String,
    /// Output SVG path (default: the CSV path with an .svg extension).
    #[arg(long)]
    output: Option<PathBuf>,
}

fn exit_code(err: &Error) -> u8 {
    if err.is_config_error() {
        1
    } else {
        2
    }
}

fn run(args: RunArgs) -> Result<(), Error> {
    let mut builder = ConfigBuilder::new();
    if let Some(path) = &args.config {
        builder.apply_file(path)?;
    }
    let overrides = [
        ("experiment", &args.experiment),
        ("n_qubits", &args.n_qubits),
        ("h_over_j", &args.h_over_j),
        ("g_over_j", &args.g_over_j),
        ("t2_star_us", &args.t2_star_us),
        ("temperature_over_j", &args.temperature_over_j),
        ("t_max_us", &args.t_max_us),
        ("dt_grid_us", &args.dt_grid_us),
        ("dt_integration_us", &args.dt_integration_us),
        ("threshold", &args.threshold),
        ("protocols", &args.protocols),
        ("sweep_points", &args.sweep_points),
        ("output_dir", &args.output_dir),
        ("worker_count", &args.worker_count),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            builder.set(key, v)?;
        }
    }
    if args.plot {
        builder.set("plot", "true")?;
    }
    let env = std::env::var(OUTPUT_DIR_ENV).ok();
    let cfg = builder.resolve(env.as_deref())?;
    let outcome = run_experiment(&cfg)?;
    for f in &outcome.files {
        println!("{}", f.display());
    }
    println!("{}", outcome.manifest.display());
    Ok(())
}

fn plot(args: PlotArgs) -> Result<(), Error> {
    let kind: PlotKind = args.kind.parse()?;
    let out = emit_plot(&args.csv, kind, args.output.as_deref())?;
    println!("{}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Plot(args) => plot(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

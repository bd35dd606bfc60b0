use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gradient_cli::{
    emit_outputs, parse_config, run_experiment, CliError, Kind, Overrides, CODE_VERSION,
};

#[derive(Parser)]
#[command(
    name = "gradient",
    version,
    about = "Gradient overlay and streaming experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the view-improvement protocol and record per-node X series.
    Converge(Common),
    /// Evolve the X chain, compute hitting times and classify the schedule.
    Analyze(Common),
    /// Simulate a streaming scenario with one sampler.
    Stream(Common),
    /// Run a streaming scenario with both samplers on shared seeds.
    Compare(Common),
}

#[derive(Args)]
struct Common {
    /// TOML config file; a written manifest.toml works too.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: results).
    #[arg(long)]
    out: Option<String>,
    /// Number of seeds to run.
    #[arg(long)]
    repeat: Option<usize>,
    /// Override a config key, e.g. --set stream.duration_s=30.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Converge(a) => (Kind::Converge, a),
        Command::Analyze(a) => (Kind::Analyze, a),
        Command::Stream(a) => (Kind::Stream, a),
        Command::Compare(a) => (Kind::Compare, a),
    };
    match execute(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(kind: Kind, args: Common) -> Result<(), CliError> {
    let overrides = Overrides {
        seed: args.seed,
        repeat: args.repeat,
        out: args.out,
        set: args.set,
    };
    let config =
        parse_config(kind, args.config.as_deref(), &overrides).map_err(CliError::Config)?;
    if let Some(v) = config
        .code_version
        .as_deref()
        .filter(|&v| v != CODE_VERSION)
    {
        eprintln!("warning: manifest written by version {v}, running {CODE_VERSION}");
    }
    let bundle = run_experiment(&config)?;
    let dir = config.out_dir();
    emit_outputs(&bundle, &dir)?;
    print!("{}", bundle.summary_text());
    eprintln!("wrote {}", dir.display());
    Ok(())
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use isac_power::harness::{
    channel_table, run_allocate, run_alpha_sweep, run_capacity_surface, run_psl_sweep, write_outputs,
    BlendDirection, OutputFormat, ScenarioConfig, Scheme, Table,
};
use isac_power::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "isac-power", version, about = "OFDM ISAC power allocation experiments")]
struct Cli {
    /// TOML scenario file; every key is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Channel seed (overrides channel.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides output.dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    /// Extra `key=value` config overrides, applied after the file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute one allocation and dump it with its range profile.
    Allocate {
        #[arg(long, value_enum, default_value = "dynamic")]
        scheme: Scheme,
        /// PSL bound for the constrained and dynamic schemes.
        #[arg(long, allow_hyphen_values = true)]
        gamma_psl_db: Option<f64>,
    },
    /// Capacity-maximising allocation under each PSL bound of the sweep grid.
    SweepPsl,
    /// Blend water-filling toward a sensing endpoint over the alpha grid.
    SweepAlpha {
        #[arg(long, value_enum, default_value = "both")]
        direction: DirectionArg,
    },
    /// Dynamic decision over the PSL x main-lobe-width grid.
    Surface,
    /// Dump the seeded channel realization.
    Channel,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DirectionArg {
    Edges,
    PslOpt,
    Both,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidConfig(_) | Error::InvalidArgument(_) => 2,
        Error::Io { .. } => 4,
        _ => 3,
    }
}

fn load(cli: &Cli) -> Result<ScenarioConfig> {
    let mut overrides = cli.set.clone();
    if let Some(seed) = cli.seed {
        overrides.push(format!("channel.seed={seed}"));
    }
    // Quoted so TOML reads them as strings.
    if let Some(out) = &cli.out {
        let escaped = out.display().to_string().replace('\\', "\\\\").replace('"', "\\\"");
        overrides.push(format!("output.dir=\"{escaped}\""));
    }
    if let Some(format) = cli.format {
        let name = match format {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        };
        overrides.push(format!("output.format=\"{name}\""));
    }
    ScenarioConfig::load(cli.config.as_deref(), &overrides)
}

fn run(cli: &Cli) -> Result<()> {
    let config = load(cli)?;
    let distance = config.output.distance_column;
    let (name, tables): (&str, Vec<Table>) = match &cli.command {
        Command::Allocate { scheme, gamma_psl_db } => {
            ("allocate", run_allocate(&config, *scheme, *gamma_psl_db)?.tables(distance)?)
        }
        Command::SweepPsl => ("sweep-psl", run_psl_sweep(&config)?.tables(distance)?),
        Command::SweepAlpha { direction } => {
            let dirs: &[BlendDirection] = match direction {
                DirectionArg::Edges => &[BlendDirection::TowardEdges],
                DirectionArg::PslOpt => &[BlendDirection::TowardPslOpt],
                DirectionArg::Both => &[BlendDirection::TowardEdges, BlendDirection::TowardPslOpt],
            };
            ("sweep-alpha", run_alpha_sweep(&config, dirs)?.tables())
        }
        Command::Surface => ("surface", run_capacity_surface(&config)?.tables(distance)),
        Command::Channel => ("channel", vec![channel_table(&config)?]),
    };
    let written = write_outputs(&config.output.dir, config.output.format, name, &config, &tables)?;
    for path in written {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

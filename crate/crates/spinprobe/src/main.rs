use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use spinprobe::config::{parse_config, PayloadFormat, RunConfig};
use spinprobe::runner::{run_command, Command};

#[derive(Parser)]
#[command(
    name = "spinprobe",
    version,
    about = "Spin dynamics and sensing performance of a collisional single-atom probe"
)]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,

    /// JSON configuration file; omitted runs on defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Write the result envelope here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Payload format override.
    #[arg(long, global = true, value_enum)]
    format: Option<CliFormat>,

    /// Worker threads for grid evaluation (default: all cores). Affects
    /// wall time only, never results.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Relative parameter step for speed estimates.
    #[arg(long = "delta-rel", global = true)]
    delta_rel: Option<f64>,

    /// Interaction time in seconds; omitted compares steady states.
    #[arg(long = "at-time", global = true, value_name = "SECONDS")]
    at_time: Option<f64>,
}

#[derive(Subcommand)]
enum CliCommand {
    /// Endoergic fraction and its derivatives along the energy-ratio axis.
    Fraction,
    /// The twelve spin-exchange rates at the reference condition.
    Rates,
    /// Spin populations versus interaction time.
    Evolve,
    /// Stationary spin distribution at the reference condition.
    Steady,
    /// Statistical speeds and Fisher information at the reference condition.
    Sensitivity,
    /// sqrt(Fisher) along one axis over a parameter grid.
    Profile,
    /// Sensitivities of all four axes over a field-temperature grid.
    Scan,
    /// Sensitivity maxima along the constant-total-energy axis versus the
    /// fraction's inflection structure.
    Maxima,
    /// Four-parameter fit of the endoergic fraction curve.
    Fit,
}

impl CliCommand {
    fn command(&self) -> Command {
        match self {
            CliCommand::Fraction => Command::Fraction,
            CliCommand::Rates => Command::Rates,
            CliCommand::Evolve => Command::Evolve,
            CliCommand::Steady => Command::Steady,
            CliCommand::Sensitivity => Command::Sensitivity,
            CliCommand::Profile => Command::Profile,
            CliCommand::Scan => Command::Scan,
            CliCommand::Maxima => Command::Maxima,
            CliCommand::Fit => Command::Fit,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CliFormat {
    Csv,
    Json,
}

impl From<CliFormat> for PayloadFormat {
    fn from(f: CliFormat) -> Self {
        match f {
            CliFormat::Csv => PayloadFormat::Csv,
            CliFormat::Json => PayloadFormat::Json,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> spinprobe::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| spinprobe::Error::Domain(format!("thread pool: {e}")))?;
    }

    let (mut config, base_dir) = match &cli.config {
        Some(path) => {
            let cfg = parse_config(path)?;
            let base = path
                .parent()
                .map(|p| p.to_path_buf())
                .unwrap_or_else(|| PathBuf::from("."));
            (cfg, base)
        }
        None => (RunConfig::default(), PathBuf::from(".")),
    };

    // command-line overrides become part of the effective, echoed config
    if let Some(d) = cli.delta_rel {
        config.delta_rel = Some(d);
    }
    if let Some(t) = cli.at_time {
        config.at_time_s = Some(t);
    }
    if let Some(f) = cli.format {
        config.format = Some(f.into());
    }
    if let Some(out) = &cli.out {
        config.out = Some(out.clone());
    }
    let issues = config.validate(&base_dir);
    if !issues.is_empty() {
        return Err(spinprobe::Error::InvalidConfig(issues));
    }

    let envelope = run_command(cli.command.command(), &config, &base_dir)?;
    envelope.write(config.out.as_deref())?;
    Ok(())
}

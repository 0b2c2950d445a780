mod commands;
mod data;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use report::ReportEnvelope;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad input data or arguments that parsed but make no sense.
    #[error("{0}")]
    Input(String),
    #[error("fit failed: {0}")]
    Fit(#[from] censcov::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Fit(_) => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Parser)]
#[command(name = "censcov", version, about = "Survival regression with a censored covariate")]
struct Cli {
    #[arg(long, global = true, value_enum, default_value = "table")]
    format: Format,
    /// Seed for commands that draw random numbers.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value_t = 0.95)]
    conf_level: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct Endpoint {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub time: String,
    #[arg(long)]
    pub event: String,
    /// Fully observed covariates, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub covars: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Weibull regression with one interval-censored covariate.
    Censcov(CensCovArgs),
    /// Weibull regression on fully observed covariates (AFT and PH summaries).
    Weibullreg(Endpoint),
    /// Cox proportional-hazards regression.
    Cox(Endpoint),
    /// Parametric fit to one censored sample.
    Onesample(OneSampleArgs),
    /// Difference of means of two censored Normal samples.
    Meandiff(MeanDiffArgs),
    /// Kaplan–Meier log–log diagnostic for the Weibull model.
    Diag(DiagArgs),
    /// Convert AFT parameters to the PH parametrization.
    Convert(ConvertArgs),
    /// Monte-Carlo comparison of the three estimators.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct CensCovArgs {
    #[command(flatten)]
    pub endpoint: Endpoint,
    #[arg(long)]
    pub cens_low: String,
    #[arg(long)]
    pub cens_high: String,
    /// Name of the censored covariate; defaults to `--cens-low` without a `.low` suffix.
    #[arg(long)]
    pub cens_name: Option<String>,
    /// Estimate the covariate density from the pooled censored sample.
    #[arg(long, value_enum, conflicts_with = "density", required_unless_present = "density")]
    pub density_from: Option<DensitySource>,
    /// Family used with `--density-from pooled`.
    #[arg(long, default_value = "normal")]
    pub density_family: String,
    /// Fixed covariate density, e.g. `normal:-2.5,1.7`.
    #[arg(long)]
    pub density: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DensitySource {
    Pooled,
}

#[derive(Debug, Args)]
pub struct OneSampleArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub low: String,
    #[arg(long)]
    pub high: String,
    #[arg(long, default_value = "normal")]
    pub family: String,
}

#[derive(Debug, Args)]
pub struct MeanDiffArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub low: String,
    #[arg(long)]
    pub high: String,
    /// Column with exactly two group labels; the first label in sorted order is sample 1.
    #[arg(long)]
    pub group: String,
}

#[derive(Debug, Args)]
pub struct DiagArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub time: String,
    #[arg(long)]
    pub event: String,
    #[arg(long)]
    pub strata: Option<String>,
    /// Write the points as CSV (stratum, log_time, loglog_surv, fitted).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub mu: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub log_sigma: f64,
    /// AFT covariate coefficients, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub alpha: Vec<f64>,
    /// Covariance of (mu, log sigma, alpha) as rows separated by `;`.
    #[arg(long, allow_hyphen_values = true)]
    pub covariance: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub names: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Key = value file; unset keys keep the reference configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub replications: Option<usize>,
}

pub struct Outcome {
    pub payload: serde_json::Value,
    pub table: String,
    pub warnings: Vec<String>,
    pub input_digest: Option<String>,
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    if !(cli.conf_level > 0.0 && cli.conf_level < 1.0) {
        return Err(CliError::Input(format!("--conf-level must lie in (0, 1), got {}", cli.conf_level)));
    }
    let conf = cli.conf_level;
    match &cli.command {
        Command::Censcov(a) => commands::censcov(a, conf),
        Command::Weibullreg(a) => commands::weibullreg(a, conf),
        Command::Cox(a) => commands::cox(a, conf),
        Command::Onesample(a) => commands::onesample(a, conf),
        Command::Meandiff(a) => commands::meandiff(a, conf),
        Command::Diag(a) => commands::diag(a),
        Command::Convert(a) => commands::convert(a, conf),
        Command::Simulate(a) => commands::simulate(a, cli.seed, conf),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(out) => {
            match cli.format {
                Format::Json => {
                    let env = ReportEnvelope {
                        command: std::env::args().skip(1).collect(),
                        input_digest: out.input_digest,
                        payload: out.payload,
                        warnings: out.warnings,
                        version: env!("CARGO_PKG_VERSION").to_string(),
                    };
                    println!("{}", serde_json::to_string_pretty(&env).expect("report serializes"));
                }
                Format::Table => {
                    print!("{}", out.table);
                    for w in &out.warnings {
                        println!("Warning: {w}");
                    }
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

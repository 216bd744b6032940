//! `chaingraph`: ingestion, fitting, causal effects, simulation and the
//! temporal-contagion battery from the command line.

mod commands;
mod error;
mod inputs;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use error::CliError;
use run::{ManifestHeader, Run};

#[derive(Debug, Parser, Serialize)]
#[command(name = "chaingraph", version, about = "Causal effects in networks of binary decisions")]
pub struct Cli {
    /// Master seed for every random stream of the run.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Directory for outputs and the run manifest.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,

    /// Format of report files.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    pub fn ext(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Load a justice-centered Supreme Court Database export.
    Ingest(IngestArgs),
    /// Learn a network (unless --edges is given) and fit a model.
    Fit(FitArgs),
    /// Counterfactual event probabilities and causal contrasts.
    Effect(EffectArgs),
    /// Synthetic datasets from a known model, with a recovery report.
    Simulate(SimulateArgs),
    /// Draw outcome samples from a model by Gibbs sampling.
    Gibbs(GibbsArgs),
    /// Random networks, temporal data and the independence battery.
    Conjecture(ConjectureArgs),
    /// Independence battery on a dataset and a network.
    Battery(BatteryArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::Fit(_) => "fit",
            Command::Effect(_) => "effect",
            Command::Simulate(_) => "simulate",
            Command::Gibbs(_) => "gibbs",
            Command::Conjecture(_) => "conjecture",
            Command::Battery(_) => "battery",
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct IngestArgs {
    /// Justice-centered CSV export.
    #[arg(long)]
    pub scdb: PathBuf,
    /// Inclusive term range, e.g. 1994-2004.
    #[arg(long, default_value = "1994-2004")]
    pub terms: String,
    /// Extra justice-name alias, NAME=LABEL (repeatable).
    #[arg(long = "alias")]
    pub aliases: Vec<String>,
    /// Also write the binary dataset for this issue area.
    #[arg(long)]
    pub issue: Option<i64>,
    /// Case count to reconcile against.
    #[arg(long, default_value_t = chaingraph::scdb::REPORTED_CASE_COUNT)]
    pub expected_cases: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct DataArgs {
    /// Dataset CSV, or a court case file written by `ingest`.
    #[arg(long)]
    pub data: PathBuf,
    /// Issue area used as the treatment when --data is a court case file.
    #[arg(long)]
    pub issue: Option<i64>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mle,
    Pseudo,
}

impl From<Method> for chaingraph::estimation::FitMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Mle => Self::Mle,
            Method::Pseudo => Self::Pseudo,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    And,
    Or,
}

impl From<Rule> for chaingraph::estimation::SymmetrizationRule {
    fn from(r: Rule) -> Self {
        match r {
            Rule::And => Self::And,
            Rule::Or => Self::Or,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Fixed edge list (CSV with `from,to` columns, or a model JSON); skips structure learning.
    #[arg(long)]
    pub edges: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Method::Mle)]
    pub method: Method,
    /// Neighborhood symmetrization rule for structure learning.
    #[arg(long, value_enum, default_value_t = Rule::And)]
    pub rule: Rule,
    /// Comma-separated penalty grid (default: 25 log-spaced values from 0.5 to 0.0005).
    #[arg(long)]
    pub penalties: Option<String>,
    /// Output file name.
    #[arg(long, default_value = "model.json")]
    pub output: String,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Rd,
    Rr,
    Or,
}

impl From<Scale> for chaingraph::EffectScale {
    fn from(s: Scale) -> Self {
        match s {
            Scale::Rd => Self::RiskDifference,
            Scale::Rr => Self::RiskRatio,
            Scale::Or => Self::OddsRatio,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct EffectArgs {
    /// Model JSON.
    #[arg(long)]
    pub model: PathBuf,
    /// Treatment of interest (repeatable): `1`/`0` for a shared treatment,
    /// `all`, `none` or comma-separated node labels for per-node treatments.
    #[arg(long = "a1", required = true)]
    pub a1: Vec<String>,
    /// Reference treatment.
    #[arg(long = "a0", default_value = "none")]
    pub a0: String,
    /// Outcome event (repeatable): `count=9`, `count in {4,5}` or `y in {+1,-1,...}`.
    #[arg(long = "event", required = true)]
    pub events: Vec<String>,
    #[arg(long, value_enum, default_value_t = Scale::Rd)]
    pub scale: Scale,
    /// Dataset for bootstrap refits and the empirical confounder law.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Issue area when --data is a court case file.
    #[arg(long)]
    pub issue: Option<i64>,
    /// Bootstrap replicates (0 = point estimate from the model only).
    #[arg(long, default_value_t = 0)]
    pub nb: usize,
    /// Fit method for bootstrap refits.
    #[arg(long, value_enum, default_value_t = Method::Mle)]
    pub method: Method,
    /// Relearn the network on every bootstrap resample.
    #[arg(long)]
    pub refit_structure: bool,
    /// Confounder law: `empirical`, `ising:<coupling>` or `bernoulli:<p>`.
    /// Defaults to the data's empirical law, else ising:0.3.
    #[arg(long)]
    pub law: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Base model JSON supplying graph, h and k (default: the court reference model).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Scale applied to the base fields h.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Scale applied to the base couplings k.
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.3)]
    pub kappa: f64,
    /// Coupling of the Ising law generating confounders.
    #[arg(long, default_value_t = chaingraph::sampler::DEFAULT_CONFOUNDER_COUPLING)]
    pub confounder_coupling: f64,
    #[arg(long, default_value_t = 2000)]
    pub n_obs: usize,
    #[arg(long, default_value_t = 1)]
    pub replicates: u64,
    /// Gibbs sweeps per simulated observation.
    #[arg(long, default_value_t = 1000)]
    pub chain_sweeps: usize,
    /// Bootstrap replicates per dataset (0 = point estimates only).
    #[arg(long, default_value_t = 50)]
    pub nb: usize,
    #[arg(long, value_enum, default_value_t = Method::Pseudo)]
    pub method: Method,
    /// Events of the counterfactual table (repeatable).
    #[arg(long = "event", default_values_t = ["count=9".to_string(), "count=0".into(), "count=5".into(), "count=4".into()])]
    pub events: Vec<String>,
    /// Do not write the simulated datasets.
    #[arg(long)]
    pub no_datasets: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scan {
    Fixed,
    Random,
}

#[derive(Debug, Args, Serialize)]
pub struct GibbsArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Treatment: `1`/`0` (shared), or `all`, `none`, comma-separated labels (per node).
    #[arg(long, default_value = "none")]
    pub a: String,
    /// Confounders set to 1: `all`, `none` or comma-separated labels.
    #[arg(long)]
    pub c: Option<String>,
    #[arg(long, default_value_t = 11_000)]
    pub sweeps: usize,
    #[arg(long, default_value_t = 1000)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    #[arg(long, value_enum, default_value_t = Scan::Random)]
    pub scan: Scan,
}

#[derive(Debug, Args, Serialize)]
pub struct ConjectureArgs {
    #[arg(long, default_value_t = 9)]
    pub nodes: usize,
    /// Edge probability of the random networks.
    #[arg(long, default_value_t = 0.3)]
    pub p: f64,
    #[arg(long, default_value_t = 10)]
    pub networks: u64,
    /// Independent trajectories (snapshot observations) per network.
    #[arg(long, default_value_t = 1000)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = chaingraph::conjecture::DEFAULT_SELF_PERSISTENCE)]
    pub self_persistence: f64,
    #[arg(long, default_value_t = chaingraph::conjecture::DEFAULT_NEIGHBOR_INFLUENCE)]
    pub influence: f64,
    #[arg(long, default_value_t = chaingraph::conjecture::DEFAULT_TREATMENT_EFFECT)]
    pub treatment_effect: f64,
    #[arg(long, default_value_t = chaingraph::conjecture::DEFAULT_HORIZON)]
    pub horizon: usize,
    #[arg(long, default_value_t = chaingraph::conjecture::DEFAULT_TREATMENT_PROB)]
    pub treatment_prob: f64,
    /// Also write each network's snapshot dataset.
    #[arg(long)]
    pub write_data: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct BatteryArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Network: CSV with `from,to` columns, or a model JSON.
    #[arg(long)]
    pub network: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let header = ManifestHeader {
        subcommand: cli.command.name().to_string(),
        flags: serde_json::to_value(&cli).unwrap_or(serde_json::Value::Null),
        argv: std::env::args().collect(),
        threads: cli.threads,
        started_at: chrono::Utc::now().to_rfc3339(),
    };
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let mut run = match Run::new(cli.out_dir.clone(), cli.format, cli.seed) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let result = commands::dispatch(&cli.command, &mut run);
    let (status, code) = match &result {
        Ok(()) => ("ok".to_string(), 0),
        Err(e) => (format!("error: {e}"), e.exit_code()),
    };
    let (path, manifest) = run.into_manifest(header, status, code);
    let written = serde_json::to_string_pretty(&manifest)
        .map_err(chaingraph::Error::from)
        .map_err(CliError::from)
        .and_then(|text| std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e)));
    if let Err(e) = &result {
        eprintln!("error: {e}");
    }
    match (result, written) {
        (Err(e), _) => ExitCode::from(e.exit_code() as u8),
        (Ok(()), Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        (Ok(()), Ok(())) => ExitCode::SUCCESS,
    }
}

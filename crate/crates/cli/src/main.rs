//! `pbc`: command-line front end. Every subcommand reads and writes grid
//! stores or JSON, so the steps compose through paths.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pbc_core::CalendarDate;

#[derive(Parser)]
#[command(
    name = "pbc",
    version,
    about = "Probabilistic bias correction for gridded subseasonal forecasts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ThresholdKind {
    Observed,
    Model,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VariableArg {
    Temperature,
    Precipitation,
    Mslp,
}

impl From<VariableArg> for pbc_core::Variable {
    fn from(v: VariableArg) -> Self {
        match v {
            VariableArg::Temperature => pbc_core::Variable::Temperature,
            VariableArg::Precipitation => pbc_core::Variable::Precipitation,
            VariableArg::Mslp => pbc_core::Variable::Mslp,
        }
    }
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    seed: u64,
    /// Output directory; receives `observations/`, `forecasts/`, `hindcasts/` and `replay.toml`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 23)]
    years: u32,
    #[arg(long, default_value_t = 2000)]
    start_year: i32,
    #[arg(long, value_enum, default_value = "temperature")]
    variable: VariableArg,
    #[arg(long, default_value_t = 19)]
    lead_days: i64,
    /// North-west corner latitude of the 1.5 degree patch.
    #[arg(long, default_value_t = 60.0)]
    lat0: f64,
    #[arg(long, default_value_t = 0.0)]
    lon0: f64,
    #[arg(long, default_value_t = 10)]
    n_lat: usize,
    #[arg(long, default_value_t = 20)]
    n_lon: usize,
    #[arg(long, default_value_t = 11)]
    members: usize,
    #[arg(long, default_value_t = 5)]
    hindcast_members: usize,
    /// Additive member bias in temperature-equivalent units.
    #[arg(long, default_value_t = 0.0)]
    bias_constant: f64,
    #[arg(long, default_value_t = 0.0)]
    bias_latitude_gradient: f64,
    #[arg(long, default_value_t = 0.0)]
    bias_seasonal_amplitude: f64,
    #[arg(long, default_value_t = 1.0)]
    spread_inflation: f64,
    /// Downward percentile-space shift of members, in [0, 1).
    #[arg(long, default_value_t = 0.0)]
    quantile_shift: f64,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    /// TOML configuration; flags below override it.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    start: Option<CalendarDate>,
    #[arg(long)]
    end: Option<CalendarDate>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long, value_enum)]
    threshold_variant: Option<ThresholdKind>,
    #[arg(long)]
    bootstrap_replicates: Option<usize>,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    #[arg(long)]
    forecast: PathBuf,
    #[arg(long)]
    indicators: PathBuf,
    /// Observed thresholds, for the precipitation aridity mask.
    #[arg(long)]
    thresholds: Option<PathBuf>,
    /// Take scoring settings and seed from a (resolved) replay config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model label in the report; defaults to the store's provenance.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    bootstrap_replicates: Option<usize>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Also write the JSON reports here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic world of observations, forecasts and hindcasts.
    SynthGen(SynthArgs),
    /// Quintile thresholds from observations or from hindcasts.
    Thresholds {
        #[arg(long, value_enum)]
        source: ThresholdKind,
        /// Observation store (observed thresholds).
        #[arg(long)]
        observations: Option<PathBuf>,
        /// Hindcast directory (model thresholds).
        #[arg(long)]
        hindcasts: Option<PathBuf>,
        /// Forecast store whose target dates receive thresholds; all
        /// observation dates by default for observed thresholds.
        #[arg(long)]
        forecasts: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        bins: usize,
        #[arg(long, default_value_t = 20)]
        years_back: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Count ensemble members below thresholds.
    ToCdf {
        #[arg(long)]
        ensemble: PathBuf,
        #[arg(long)]
        thresholds: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Observed indicators from observations and observed thresholds.
    Indicators {
        #[arg(long)]
        observations: PathBuf,
        #[arg(long)]
        thresholds: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Member counting against the hindcast model climate.
    DebiasedBaseline {
        #[arg(long)]
        forecasts: PathBuf,
        #[arg(long)]
        hindcasts: PathBuf,
        #[arg(long, default_value_t = 5)]
        bins: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay Debias++ alone.
    Debiaspp(ReplayArgs),
    /// Replay Persistence++ alone.
    Persistencepp(ReplayArgs),
    /// Project a CDF store onto valid CDFs.
    Project {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Average projected Debias++ and Persistence++.
    Pbc {
        #[arg(long)]
        debiaspp: PathBuf,
        #[arg(long)]
        persistencepp: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Variable-dependent blend of ECMWF and PoET PBC forecasts.
    Microduet {
        #[arg(long)]
        ecmwf: PathBuf,
        #[arg(long)]
        poet: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// RPSS, extreme-bin BSS and related reports for one forecast store.
    Score(ScoreArgs),
    /// Mean forecast-minus-observed CDF per cell and bin.
    BiasMap {
        #[arg(long)]
        forecast: PathBuf,
        #[arg(long)]
        indicators: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Download (or read from cache) the GDACS flood catalogue.
    GdacsFetch {
        #[arg(long, default_value_t = 2022)]
        from_year: i32,
        #[arg(long, default_value_t = 2024)]
        to_year: i32,
        #[arg(long)]
        cache: PathBuf,
        /// Never touch the network; fail on a cache miss.
        #[arg(long)]
        offline: bool,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Per-event flood BSS over cached GDACS events.
    FloodScore {
        #[arg(long, default_value_t = 2022)]
        from_year: i32,
        #[arg(long, default_value_t = 2024)]
        to_year: i32,
        #[arg(long)]
        cache: PathBuf,
        #[arg(long)]
        forecast: PathBuf,
        #[arg(long)]
        indicators: PathBuf,
        #[arg(long)]
        thresholds: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full operational replay: Debias++, Persistence++, PBC and scores.
    Replay(ReplayArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = e.downcast_ref::<pbc_core::Error>().map(|c| c.kind()).unwrap_or("error");
            let mut message = String::new();
            for part in e.chain().map(|c| c.to_string()) {
                // thiserror variants already carry their source in the message
                if !message.contains(&part) {
                    if !message.is_empty() {
                        message.push_str(": ");
                    }
                    message.push_str(&part);
                }
            }
            let body = serde_json::json!({ "error": { "kind": kind, "message": message } });
            eprintln!("{body}");
            ExitCode::FAILURE
        }
    }
}

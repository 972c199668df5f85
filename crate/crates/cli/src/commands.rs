use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::Weekday;
use pbc_core::cdf::{debiased_baseline, ensemble_to_cdf, CdfForecast, VariantKind};
use pbc_core::climatology::{indicators, model_thresholds, observed_thresholds, IndicatorField, ThresholdField};
use pbc_core::floods::{events_per_year, filter_by_issuance, flood_bss, write_events_csv, GdacsClient};
use pbc_core::griddata::store::{read_hindcasts, write_hindcasts};
use pbc_core::griddata::{
    generate_synthetic_world, read_store, write_store, BiasProfile, EnsembleField, ObservationField, SynthConfig,
};
use pbc_core::pipeline::{evaluation_mask, run_pipeline, score_forecast, scores_json, PipelineConfig, ScoringSettings};
use pbc_core::projection::{microduet, pbc_combine, project_to_cdf};
use pbc_core::scoring::{bias_map, EvalMask, ScoreReport};
use pbc_core::{Error, GridSpec};

use crate::{Command, Format, ReplayArgs, ScoreArgs, SynthArgs, ThresholdKind};

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::SynthGen(a) => synth_gen(a),
        Command::Thresholds {
            source,
            observations,
            hindcasts,
            forecasts,
            bins,
            years_back,
            out,
        } => thresholds(source, observations, hindcasts, forecasts, bins, years_back, &out),
        Command::ToCdf {
            ensemble,
            thresholds,
            out,
        } => {
            let ens: EnsembleField = read_store(&ensemble)?;
            let thr: ThresholdField = read_store(&thresholds)?;
            write(&ensemble_to_cdf(&ens, &thr)?, &out)
        }
        Command::Indicators {
            observations,
            thresholds,
            out,
        } => {
            let obs: ObservationField = read_store(&observations)?;
            let thr: ThresholdField = read_store(&thresholds)?;
            write(&indicators(&obs, &thr)?, &out)
        }
        Command::DebiasedBaseline {
            forecasts,
            hindcasts,
            bins,
            out,
        } => {
            let fc: EnsembleField = read_store(&forecasts)?;
            let hc = read_hindcasts(&hindcasts)?;
            write(&debiased_baseline(&fc, &hc, fc.target_dates(), bins)?, &out)
        }
        Command::Debiaspp(a) => replay(a, Some(false)),
        Command::Persistencepp(a) => replay(a, Some(true)),
        Command::Project { input, out } => {
            let f: CdfForecast = read_store(&input)?;
            write(&project_to_cdf(&f), &out)
        }
        Command::Pbc {
            debiaspp,
            persistencepp,
            out,
        } => {
            let a = project_to_cdf(&read_store(&debiaspp)?);
            let b = project_to_cdf(&read_store(&persistencepp)?);
            write(&pbc_combine(&a, &b)?, &out)
        }
        Command::Microduet { ecmwf, poet, out } => {
            let e: CdfForecast = read_store(&ecmwf)?;
            let p: CdfForecast = read_store(&poet)?;
            let v = e.variable();
            write(&microduet(&e, &p, v)?, &out)
        }
        Command::Score(a) => score(a),
        Command::BiasMap {
            forecast,
            indicators,
            out,
        } => {
            let f: CdfForecast = read_store(&forecast)?;
            let o: IndicatorField = read_store(&indicators)?;
            let map = bias_map(&f, &o, f.dates())?;
            emit(&serde_json::to_string_pretty(&map)?, out.as_deref())
        }
        Command::GdacsFetch {
            from_year,
            to_year,
            cache,
            offline,
            csv,
        } => gdacs_fetch(from_year, to_year, &cache, offline, csv.as_deref()),
        Command::FloodScore {
            from_year,
            to_year,
            cache,
            forecast,
            indicators,
            thresholds,
            out,
        } => flood_score(
            from_year..=to_year,
            &cache,
            &forecast,
            &indicators,
            thresholds.as_deref(),
            out.as_deref(),
        ),
        Command::Replay(a) => replay(a, None),
    }
}

fn write<T: pbc_core::griddata::Storable>(field: &T, out: &Path) -> Result<()> {
    write_store(field, out)?;
    log::info!("wrote {}", out.display());
    Ok(())
}

/// Prints `text`, or writes it to `out` when given.
fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn synth_gen(a: SynthArgs) -> Result<()> {
    if a.years < 23 {
        bail!(Error::InvalidArgument("synthetic worlds need at least 23 years".into()));
    }
    let grid = GridSpec::patch(a.lat0, a.lon0, a.n_lat, a.n_lon)?;
    let bias = BiasProfile {
        constant: a.bias_constant,
        latitude_gradient: a.bias_latitude_gradient,
        seasonal_amplitude: a.bias_seasonal_amplitude,
        spread_inflation: a.spread_inflation,
        quantile_shift: a.quantile_shift,
        ..BiasProfile::default()
    };
    let mut cfg = SynthConfig::new(a.seed, grid, a.years, bias);
    cfg.start_year = a.start_year;
    cfg.variable = a.variable.into();
    cfg.lead_days = a.lead_days;
    cfg.members = a.members;
    cfg.hindcast_members = a.hindcast_members;
    let world = generate_synthetic_world(&cfg)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_store(&world.observations, a.out.join("observations"))?;
    write_store(&world.forecasts, a.out.join("forecasts"))?;
    write_hindcasts(&world.hindcasts, a.out.join("hindcasts"))?;
    let replay = PipelineConfig {
        seed: a.seed,
        output_dir: PathBuf::from("out"),
        inputs: pbc_core::pipeline::InputPaths {
            observations: "observations".into(),
            forecasts: "forecasts".into(),
            hindcasts: "hindcasts".into(),
        },
        ..PipelineConfig::default()
    };
    fs::write(a.out.join("replay.toml"), replay.to_toml_string()?)?;
    println!("{}", a.out.display());
    Ok(())
}

fn thresholds(
    source: ThresholdKind,
    observations: Option<PathBuf>,
    hindcasts: Option<PathBuf>,
    forecasts: Option<PathBuf>,
    bins: usize,
    years_back: u32,
    out: &Path,
) -> Result<()> {
    let forecasts: Option<EnsembleField> = forecasts.map(read_store).transpose()?;
    let thr = match source {
        ThresholdKind::Observed => {
            let Some(p) = observations else {
                bail!(Error::InvalidArgument("observed thresholds need --observations".into()));
            };
            let obs: ObservationField = read_store(&p)?;
            let dates = match &forecasts {
                Some(f) => f.target_dates().to_vec(),
                None => obs.dates().to_vec(),
            };
            observed_thresholds(&obs, &dates, bins, years_back)?
        }
        ThresholdKind::Model => {
            let (Some(h), Some(f)) = (hindcasts, forecasts) else {
                bail!(Error::InvalidArgument(
                    "model thresholds need --hindcasts and --forecasts".into()
                ));
            };
            let hc = read_hindcasts(&h)?;
            model_thresholds(&hc, f.target_dates(), f.lead_days(), bins, f.target_dates())?
        }
    };
    write(&thr, out)
}

fn load_config(a: &ReplayArgs) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(&a.config)?;
    if let Some(d) = &a.output_dir {
        cfg.output_dir = d.clone();
    }
    if a.start.is_some() {
        cfg.start = a.start;
    }
    if a.end.is_some() {
        cfg.end = a.end;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(m) = &a.model {
        cfg.model = m.clone();
    }
    if let Some(v) = a.threshold_variant {
        cfg.threshold_variant = Some(match v {
            ThresholdKind::Observed => VariantKind::Observed,
            ThresholdKind::Model => VariantKind::Model,
        });
    }
    if let Some(n) = a.bootstrap_replicates {
        cfg.scoring.bootstrap_replicates = n;
    }
    Ok(cfg)
}

/// `only_persistence`: None runs both methods, Some(false) only Debias++,
/// Some(true) only Persistence++.
fn replay(a: ReplayArgs, only_persistence: Option<bool>) -> Result<()> {
    let mut cfg = load_config(&a)?;
    if let Some(p) = only_persistence {
        cfg.methods.debiaspp = !p;
        cfg.methods.persistencepp = p;
    }
    let out = run_pipeline(&cfg)?;
    for r in out
        .scores
        .iter()
        .filter(|r| r.metric == "rpss" && r.season.is_none() && r.region.is_none())
    {
        println!("{:<14} rpss {}", r.model, fmt_value(r.value));
    }
    println!("wrote {}", cfg.output_dir.display());
    Ok(())
}

fn fmt_value(v: Option<f64>) -> String {
    // avoid printing -0.000
    v.map_or_else(
        || "n/a".into(),
        |x| format!("{:.3}", if x.abs() < 5e-4 { 0.0 } else { x }),
    )
}

fn score(a: ScoreArgs) -> Result<()> {
    let f: CdfForecast = read_store(&a.forecast)?;
    let o: IndicatorField = read_store(&a.indicators)?;
    let (mut settings, mut seed) = match &a.config {
        Some(p) => {
            let c = PipelineConfig::load(p)?;
            (c.scoring, c.seed)
        }
        None => (ScoringSettings::default(), 0),
    };
    if let Some(s) = a.seed {
        seed = s;
    }
    if let Some(n) = a.bootstrap_replicates {
        settings.bootstrap_replicates = n;
    }
    let mask = match &a.thresholds {
        Some(p) => evaluation_mask(&read_store::<ThresholdField>(p)?, &settings)?,
        None => {
            if f.variable() == pbc_core::Variable::Precipitation {
                log::warn!("no thresholds given; the precipitation aridity mask is not applied");
            }
            let mut m = EvalMask::new(f.grid().clone(), f.variable())?;
            if let Some(b) = settings.bbox {
                m = m.with_bbox(b)?;
            }
            m
        }
    };
    let model = a.model.clone().unwrap_or_else(|| f.provenance().label().to_string());
    let reports = score_forecast(&model, &f, &o, &mask, &settings, seed)?;
    if let Some(p) = &a.out {
        fs::write(p, scores_json(&reports)?).with_context(|| format!("writing {}", p.display()))?;
    }
    match a.format {
        Format::Json => println!("{}", scores_json(&reports)?),
        Format::Text => print_text(&reports),
    }
    Ok(())
}

fn print_text(reports: &[ScoreReport]) {
    for r in reports {
        let mut label = r.metric.clone();
        if let Some(s) = &r.season {
            label.push_str(&format!("[{s}]"));
        }
        if let Some(g) = &r.region {
            label.push_str(&format!("[{g}]"));
        }
        let ci =
            r.ci.map(|[lo, hi]| format!("  ci [{}, {}]", fmt_value(Some(lo)), fmt_value(Some(hi))))
                .unwrap_or_default();
        println!("{label} {}{ci}  n={}", fmt_value(r.value), r.n_dates);
    }
}

struct Http(reqwest::blocking::Client);

impl pbc_core::floods::Transport for Http {
    fn get(&self, url: &str) -> pbc_core::Result<String> {
        let net = |e: reqwest::Error| Error::Network(e.to_string());
        self.0
            .get(url)
            .send()
            .and_then(|r| r.error_for_status())
            .and_then(|r| r.text())
            .map_err(net)
    }
}

fn offline(url: &str) -> pbc_core::Result<String> {
    Err(Error::Network(format!("offline and not cached: {url}")))
}

fn fetch_events(
    years: std::ops::RangeInclusive<i32>,
    cache: &Path,
    offline_only: bool,
) -> Result<Vec<pbc_core::floods::FloodEvent>> {
    let events = if offline_only {
        GdacsClient::new(offline, cache)
            .with_retries(0, std::time::Duration::ZERO)
            .fetch_events(years)?
    } else {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(60))
            .build()
            .context("building HTTP client")?;
        GdacsClient::new(Http(client), cache).fetch_events(years)?
    };
    Ok(events)
}

fn gdacs_fetch(from: i32, to: i32, cache: &Path, offline_only: bool, csv: Option<&Path>) -> Result<()> {
    let events = fetch_events(from..=to, cache, offline_only)?;
    if let Some(p) = csv {
        write_events_csv(&events, p)?;
    }
    for (year, n) in events_per_year(&events) {
        println!("{year} {n}");
    }
    Ok(())
}

#[derive(serde::Serialize)]
struct FloodScores {
    events: Vec<EventScore>,
    per_year: BTreeMap<i32, YearScore>,
}

#[derive(serde::Serialize)]
struct EventScore {
    id: u64,
    start: String,
    bss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    skipped: Option<String>,
}

#[derive(serde::Serialize)]
struct YearScore {
    events: usize,
    scored: usize,
    mean_bss: Option<f64>,
}

fn flood_score(
    years: std::ops::RangeInclusive<i32>,
    cache: &Path,
    forecast: &Path,
    indicators: &Path,
    thresholds: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    let events = fetch_events(years, cache, true)?;
    let events = filter_by_issuance(&events, &[Weekday::Mon, Weekday::Fri]);
    let f: CdfForecast = read_store(forecast)?;
    let o: IndicatorField = read_store(indicators)?;
    let mut mask = EvalMask::new(f.grid().clone(), f.variable())?;
    if let Some(p) = thresholds {
        mask = mask.with_aridity(&read_store::<ThresholdField>(p)?)?;
    }
    let mut scores = FloodScores {
        events: Vec::new(),
        per_year: BTreeMap::new(),
    };
    let mut sums: BTreeMap<i32, (usize, usize, f64)> = BTreeMap::new();
    for e in &events {
        let entry = sums.entry(e.start.year()).or_default();
        entry.0 += 1;
        match flood_bss(e, &f, &o, &mask) {
            Ok(b) => {
                entry.1 += 1;
                entry.2 += b;
                scores.events.push(EventScore {
                    id: e.id,
                    start: e.start.to_string(),
                    bss: Some(b),
                    skipped: None,
                });
            }
            Err(err @ (Error::NoData(_) | Error::EmptyMask)) => scores.events.push(EventScore {
                id: e.id,
                start: e.start.to_string(),
                bss: None,
                skipped: Some(err.to_string()),
            }),
            Err(err) => return Err(err.into()),
        }
    }
    for (year, (n, k, s)) in sums {
        scores.per_year.insert(
            year,
            YearScore {
                events: n,
                scored: k,
                mean_bss: (k > 0).then(|| s / k as f64),
            },
        );
    }
    emit(&serde_json::to_string_pretty(&scores)?, out)
}

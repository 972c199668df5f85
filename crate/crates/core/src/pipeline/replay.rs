use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{InputPaths, PipelineConfig};
use super::cutoff::{AccessGuard, ObservabilityCutoff, RuleAvailability};
use crate::cdf::{
    ensemble_to_cdf_with, hindcast_to_training_cdfs_with, CdfForecast, CdfSeries, Provenance, ThresholdVariant,
    TrainingKey, VariantKind,
};
use crate::climatology::{
    causal_model_thresholds, indicators_with, observed_thresholds_with, rolling_climatology_with, ClimatologyField,
    IndicatorField, ThresholdField,
};
use crate::correction::{
    debiaspp, lag_dates, Availability, DebiasTraining, DebiasTuner, PersistenceTrainer, RegressionWeights, Tuning,
};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::griddata::store::read_hindcasts;
use crate::griddata::{read_store, write_store, CalendarDate, EnsembleField, ObservationField, SyntheticWorld};
use crate::projection::{pbc_combine, project_to_cdf_with};
use crate::scoring::{
    bss_extreme, rpss_aggregated, rpss_spatial, stratify, write_reports_csv, EvalMask, ExtremeBin, ScoreReport,
};

use super::config::ScoringSettings;

/// Observations, real-time forecasts and hindcasts at one lead.
#[derive(Debug, Clone)]
pub struct ReplayInputs {
    pub observations: ObservationField,
    pub forecasts: EnsembleField,
    pub hindcasts: Vec<EnsembleField>,
}

impl ReplayInputs {
    pub fn from_world(w: &SyntheticWorld) -> Self {
        ReplayInputs {
            observations: w.observations.clone(),
            forecasts: w.forecasts.clone(),
            hindcasts: w.hindcasts.clone(),
        }
    }

    pub fn load(paths: &InputPaths) -> Result<Self> {
        Ok(ReplayInputs {
            observations: read_store(&paths.observations)?,
            forecasts: read_store(&paths.forecasts)?,
            hindcasts: read_hindcasts(&paths.hindcasts)?,
        })
    }

    fn check(&self) -> Result<()> {
        let fc = &self.forecasts;
        if self.observations.grid() != fc.grid() || self.observations.variable() != fc.variable() {
            return Err(Error::Misaligned(
                "observations and forecasts differ in grid or variable".into(),
            ));
        }
        if self.hindcasts.is_empty() {
            return Err(Error::NoData("no hindcasts supplied".into()));
        }
        for h in &self.hindcasts {
            if h.grid() != fc.grid() || h.variable() != fc.variable() || h.lead_days() != fc.lead_days() {
                return Err(Error::Misaligned(
                    "hindcasts differ from the forecasts in grid, variable or lead".into(),
                ));
            }
            if h.hindcast_year_offset().is_none() {
                return Err(Error::InvalidArgument("a hindcast field carries no year offset".into()));
            }
        }
        Ok(())
    }
}

/// What the replay did for one target date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DateParams {
    pub date: CalendarDate,
    pub cutoff: CalendarDate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tuning: Option<Tuning>,
    pub debias_training_entries: usize,
    pub debias_passthrough: usize,
    /// Cell-mean Debias++ correction `mean(O - F)` per bin below K.
    pub debias_mean_correction: Vec<Option<f64>>,
    pub persistence_training_entries: usize,
    pub persistence_fallback: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<RegressionWeights>,
}

#[derive(Debug, Clone)]
pub struct ReplayOutput {
    pub config: PipelineConfig,
    pub dates: Vec<CalendarDate>,
    pub raw: CdfForecast,
    pub debiased: CdfForecast,
    /// Projected Debias++.
    pub debiaspp: Option<CdfForecast>,
    /// Projected Persistence++.
    pub persistencepp: Option<CdfForecast>,
    pub pbc: Option<CdfForecast>,
    /// Observed indicators on the replayed dates.
    pub indicators: IndicatorField,
    /// Observed thresholds on the replayed dates.
    pub thresholds: ThresholdField,
    pub params: Vec<DateParams>,
    pub scores: Vec<ScoreReport>,
    /// Training accesses audited against the strict cutoff.
    pub guard_checks: usize,
}

impl ReplayOutput {
    /// Named forecasts in output order.
    pub fn models(&self) -> Vec<(&'static str, &CdfForecast)> {
        let mut v = vec![("raw", &self.raw), ("debiased", &self.debiased)];
        for (name, f) in [
            ("debiaspp", &self.debiaspp),
            ("persistencepp", &self.persistencepp),
            ("pbc", &self.pbc),
        ] {
            if let Some(f) = f {
                v.push((name, f));
            }
        }
        v
    }

    pub fn score(&self, metric: &str, model: &str) -> Option<&ScoreReport> {
        self.scores
            .iter()
            .find(|r| r.metric == metric && r.model == model && r.season.is_none() && r.region.is_none())
    }
}

fn subset_thresholds(thr: &ThresholdField, dates: &[CalendarDate]) -> Result<ThresholdField> {
    let row = thr.cube().row_len();
    let mut values = Vec::with_capacity(dates.len() * row);
    for d in dates {
        match thr.position(*d) {
            Some(t) => values.extend_from_slice(thr.cube().row(t)),
            None => values.extend(std::iter::repeat_n(f32::NAN, row)),
        }
    }
    ThresholdField::new(
        thr.grid().clone(),
        thr.variable(),
        thr.bins(),
        thr.source(),
        thr.lead_days(),
        dates.to_vec(),
        values,
    )
}

fn subset_indicators(ind: &IndicatorField, dates: &[CalendarDate]) -> Result<IndicatorField> {
    let row = ind.cube().row_len();
    let mut values = Vec::with_capacity(dates.len() * row);
    for d in dates {
        match ind.position(*d) {
            Some(t) => values.extend_from_slice(ind.cube().row(t)),
            None => values.extend(std::iter::repeat_n(f64::NAN, row)),
        }
    }
    IndicatorField::new(ind.grid().clone(), ind.variable(), ind.bins(), dates.to_vec(), values)
}

/// Scoring mask for a variable: land, aridity for precipitation, optional box.
pub fn evaluation_mask(thr: &ThresholdField, settings: &ScoringSettings) -> Result<EvalMask> {
    let mut m = EvalMask::new(thr.grid().clone(), thr.variable())?.with_aridity(thr)?;
    if let Some(b) = settings.bbox {
        m = m.with_bbox(b)?;
    }
    Ok(m)
}

/// FNV-1a, so bootstrap seeds depend on what is scored but not on the order.
fn derived_seed(seed: u64, parts: &[&str]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed;
    for p in parts {
        for b in p.bytes().chain([0xff]) {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// The standard report set for one forecast: stratified per-date RPSS, the
/// period-aggregated RPSS, the share of cells with positive skill and the
/// extreme-bin BSS. Whole-period global scores carry a bootstrap interval.
pub fn score_forecast(
    model: &str,
    f: &CdfForecast,
    o: &IndicatorField,
    mask: &EvalMask,
    settings: &ScoringSettings,
    seed: u64,
) -> Result<Vec<ScoreReport>> {
    let ci = |r: ScoreReport| {
        let s = derived_seed(seed, &[&r.metric, model]);
        r.with_ci(settings.bootstrap_replicates, settings.confidence, s)
    };
    let mut out = Vec::new();
    for r in stratify(f, o, mask, &settings.regions, model)? {
        if r.season.is_none() && r.region.is_none() {
            out.push(ci(r)?);
        } else {
            out.push(r);
        }
    }
    let dates = f.dates();
    out.push(ScoreReport::scalar(
        "rpss_aggregated",
        model,
        rpss_aggregated(f, o, mask, dates)?,
        dates.len(),
    ));
    out.push(ScoreReport::scalar(
        "fraction_cells_improved",
        model,
        rpss_spatial(f, o, mask, dates)?.fraction_improved(),
        dates.len(),
    ));
    for (metric, bin) in [("bss_upper", ExtremeBin::Top), ("bss_lower", ExtremeBin::Bottom)] {
        let series = bss_extreme(f, o, mask, bin)?;
        out.push(ci(ScoreReport::from_series(metric, model, series))?);
    }
    Ok(out)
}

/// Sorted, deduplicated target dates in the configured range.
fn replay_dates(fc: &EnsembleField, cfg: &PipelineConfig) -> Result<Vec<CalendarDate>> {
    let dates: Vec<CalendarDate> = fc
        .target_dates()
        .iter()
        .copied()
        .filter(|d| cfg.start.is_none_or(|s| *d >= s) && cfg.end.is_none_or(|e| *d <= e))
        .collect();
    if dates.is_empty() {
        return Err(Error::NoData("no forecast dates in the requested range".into()));
    }
    Ok(dates)
}

/// Observation-period start dates any part of the replay reads: outcomes,
/// persistence lags and the climatology history of every dated row.
fn needed_observation_dates(
    obs: &ObservationField,
    rows: &[CalendarDate],
    lead: i64,
    clim_years: u32,
) -> Vec<CalendarDate> {
    let mut set = BTreeSet::new();
    for &v in rows {
        let (a, b) = lag_dates(v, lead);
        for d in [v, a, b] {
            set.insert(d);
            for j in 1..=clim_years as i32 {
                if let Some(h) = d.with_year(d.year() - j) {
                    set.insert(h);
                }
            }
        }
    }
    set.into_iter().filter(|d| obs.position(*d).is_some()).collect()
}

fn training_series(exec: Exec, inputs: &ReplayInputs, variant: ThresholdVariant<'_>) -> Result<CdfSeries> {
    let fc = hindcast_to_training_cdfs_with(exec, std::slice::from_ref(&inputs.forecasts), variant)?;
    let hc = hindcast_to_training_cdfs_with(exec, &inputs.hindcasts, variant)?;
    fc.merged(&hc)
}

pub fn run_replay(inputs: &ReplayInputs, cfg: &PipelineConfig) -> Result<ReplayOutput> {
    run_replay_with(Exec::default(), inputs, cfg)
}

/// Operational replay: target dates are processed in order and every
/// correction sees only data observable at that date's cutoff.
pub fn run_replay_with(exec: Exec, inputs: &ReplayInputs, cfg: &PipelineConfig) -> Result<ReplayOutput> {
    let prepared = prepare_replay(exec, inputs, cfg)?;
    replay_prepared(exec, &prepared)
}

/// Everything a replay derives from the raw fields before the date loop.
/// Callers may alter the CDFs, e.g. to inject a known bias, before
/// [`replay_prepared`].
#[derive(Debug, Clone)]
pub struct PreparedReplay {
    /// Resolved configuration.
    pub config: PipelineConfig,
    pub dates: Vec<CalendarDate>,
    /// Counted against observed thresholds, on every forecast date.
    pub raw: CdfForecast,
    /// Counted against causal model thresholds, on every forecast date.
    pub debiased: CdfForecast,
    /// Forecast and hindcast CDFs against observed thresholds.
    pub observed_series: CdfSeries,
    /// The same against model thresholds, when Persistence++ uses them.
    pub model_series: Option<CdfSeries>,
    pub thresholds: ThresholdField,
    pub indicators: IndicatorField,
    pub climatology: ClimatologyField,
}

pub fn prepare_replay(exec: Exec, inputs: &ReplayInputs, cfg: &PipelineConfig) -> Result<PreparedReplay> {
    inputs.check()?;
    let fc = &inputs.forecasts;
    let obs = &inputs.observations;
    let lead = fc.lead_days();
    let variable = fc.variable();
    let mut cfg = cfg.clone();
    cfg.resolve(variable, lead)?;
    let bins = cfg.bins;
    let dates = replay_dates(fc, &cfg)?;

    // thresholds and indicators wherever any row is read
    let mut rows: Vec<CalendarDate> = fc.target_dates().to_vec();
    for h in &inputs.hindcasts {
        rows.extend((0..h.target_dates().len()).map(|t| h.verifying_date(t)));
    }
    rows.sort_unstable();
    rows.dedup();
    let obs_dates = needed_observation_dates(obs, &rows, lead, cfg.climatology_years);
    let thr_obs = observed_thresholds_with(exec, obs, &obs_dates, bins, cfg.threshold_years)?;
    let ind = indicators_with(exec, obs, &thr_obs)?;
    let clim = rolling_climatology_with(exec, &ind, &rows, cfg.climatology_years)?;
    let thr_model = causal_model_thresholds(
        exec,
        &inputs.hindcasts,
        fc.target_dates(),
        lead,
        bins,
        fc.target_dates(),
    )?;

    let raw = ensemble_to_cdf_with(exec, fc, &thr_obs)?;
    let mut debiased = ensemble_to_cdf_with(exec, fc, &thr_model)?;
    debiased.set_provenance(Provenance::Debiased);
    let observed_series = training_series(exec, inputs, ThresholdVariant::Observed(&thr_obs))?;
    let model_series = match (cfg.variant_for(variable), cfg.methods.persistencepp) {
        (VariantKind::Model, true) => Some(training_series(exec, inputs, ThresholdVariant::Model(&thr_model))?),
        _ => None,
    };
    Ok(PreparedReplay {
        config: cfg,
        dates,
        raw,
        debiased,
        observed_series,
        model_series,
        thresholds: thr_obs,
        indicators: ind,
        climatology: clim,
    })
}

/// The date loop of the replay over prepared CDFs.
pub fn replay_prepared(exec: Exec, prep: &PreparedReplay) -> Result<ReplayOutput> {
    let cfg = &prep.config;
    let raw_all = &prep.raw;
    let debiased_all = &prep.debiased;
    let obs_series = &prep.observed_series;
    let ind = &prep.indicators;
    let clim = &prep.climatology;
    let dates = prep.dates.clone();
    let grid = raw_all.grid().clone();
    let variable = raw_all.variable();
    let lead = raw_all.lead_days();
    let bins = raw_all.bins();
    if obs_series.bins() != bins || ind.bins() != bins {
        return Err(Error::Misaligned("prepared replay inputs differ in bins".into()));
    }
    log::info!(
        "replaying {} target dates from {} to {}",
        dates.len(),
        dates[0],
        dates[dates.len() - 1]
    );
    let (pp_series, pp_target) = match &prep.model_series {
        Some(s) => (s, debiased_all),
        None => (obs_series, raw_all),
    };

    let thresholds = subset_thresholds(&prep.thresholds, &dates)?;
    let indicators = subset_indicators(ind, &dates)?;
    let mask = evaluation_mask(&thresholds, &cfg.scoring)?;
    // tuning scores against every target date's aridity, not just the replayed ones
    let tuning_mask = evaluation_mask(&prep.thresholds, &cfg.scoring)?;

    let rule = RuleAvailability {
        rule: cfg.cutoff_rule,
        lead_days: lead,
    };
    let mut guard = AccessGuard::new(lead);
    let training = DebiasTraining::new(vec![obs_series], ind)?;
    let mut tuner = DebiasTuner::new(cfg.debias.configs()?);
    let mut trainer = PersistenceTrainer::new(grid.n_cells(), bins, lead);
    let mut added = vec![false; pp_series.len()];

    let mut dpp_parts = Vec::new();
    let mut ppp_parts = Vec::new();
    let mut pbc_parts = Vec::new();
    let mut params = Vec::new();
    for &t in &dates {
        let mut p = DateParams {
            date: t,
            cutoff: ObservabilityCutoff::new(t, lead).cutoff,
            tuning: None,
            debias_training_entries: 0,
            debias_passthrough: 0,
            debias_mean_correction: Vec::new(),
            persistence_training_entries: 0,
            persistence_fallback: 0,
            weights: None,
        };

        let dpp = if cfg.methods.debiaspp {
            let tuning = tuner.select(t, &training, &tuning_mask, &rule, exec);
            for h in &tuning.history {
                let key = TrainingKey {
                    forecast_date: *h,
                    year_offset: 0,
                };
                let i = training.find(key).expect("tuning history comes from the series");
                guard.check_entry(t, "debias++ tuning history", &obs_series.entries()[i])?;
            }
            let out = debiaspp(&[raw_all], t, &training, &tuning.config, &rule)?;
            for &i in &out.used {
                guard.check_entry(t, "debias++ training entry", &obs_series.entries()[i])?;
            }
            p.debias_training_entries = out.used.len();
            p.debias_passthrough = out.passthrough_count();
            p.debias_mean_correction = (0..bins - 1)
                .map(|k| {
                    let v: Vec<f64> = out.correction.iter().skip(k).step_by(bins).flatten().copied().collect();
                    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
                })
                .collect();
            p.tuning = Some(tuning);
            Some(project_to_cdf_with(exec, &out.forecast))
        } else {
            None
        };

        let ppp = if cfg.methods.persistencepp {
            let fresh: Vec<usize> = (0..pp_series.len())
                .filter(|&i| !added[i] && rule.entry_usable(t, &pp_series.entries()[i]))
                .collect();
            for &i in &fresh {
                guard.check_entry(t, "persistence++ training entry", &pp_series.entries()[i])?;
                added[i] = true;
            }
            let new_rows: Vec<(CalendarDate, &[f64])> = fresh
                .iter()
                .map(|&i| (pp_series.entries()[i].verifying, pp_series.row(i)))
                .collect();
            trainer.add(exec, &new_rows, ind, clim);
            let (l1, l2) = lag_dates(t, lead);
            guard.check_period(t, "persistence++ first lag", l1)?;
            guard.check_period(t, "persistence++ second lag", l2)?;
            let weights = trainer.fit(exec, t);
            let pos = pp_target
                .position(t)
                .ok_or_else(|| Error::NoData(format!("no Persistence++ input for {t}")))?;
            let (values, fallback) = trainer.predict(&weights, t, pp_target.cube().row(pos), ind, clim);
            p.persistence_training_entries = trainer.entries_added();
            p.persistence_fallback = fallback.iter().filter(|f| **f).count();
            p.weights = Some(weights);
            let f = CdfForecast::new(
                grid.clone(),
                variable,
                lead,
                Provenance::PersistencePlusPlus,
                bins,
                vec![t],
                values,
            )?;
            Some(project_to_cdf_with(exec, &f))
        } else {
            None
        };

        if let (Some(a), Some(b)) = (&dpp, &ppp) {
            pbc_parts.push(pbc_combine(a, b)?);
        }
        dpp_parts.extend(dpp);
        ppp_parts.extend(ppp);
        params.push(p);
    }

    let restrict = |f: &CdfForecast, prov: Provenance| -> Result<CdfForecast> {
        let parts = dates
            .iter()
            .map(|d| {
                let t = f.position(*d).expect("replay dates come from the forecast");
                CdfForecast::new(
                    grid.clone(),
                    variable,
                    lead,
                    prov,
                    bins,
                    vec![*d],
                    f.cube().row(t).to_vec(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        CdfForecast::concat(&parts, prov)
    };
    let raw = restrict(raw_all, Provenance::Raw)?;
    let debiased = restrict(debiased_all, Provenance::Debiased)?;
    let join = |parts: Vec<CdfForecast>, prov| -> Result<Option<CdfForecast>> {
        if parts.is_empty() {
            Ok(None)
        } else {
            CdfForecast::concat(&parts, prov).map(Some)
        }
    };
    let mut out = ReplayOutput {
        dates,
        raw,
        debiased,
        debiaspp: join(dpp_parts, Provenance::DebiasPlusPlus)?,
        persistencepp: join(ppp_parts, Provenance::PersistencePlusPlus)?,
        pbc: join(pbc_parts, Provenance::Pbc)?,
        indicators,
        thresholds,
        params,
        scores: Vec::new(),
        guard_checks: guard.checks(),
        config: cfg.clone(),
    };
    let mut scores = Vec::new();
    for (name, f) in out.models() {
        scores.extend(score_forecast(
            name,
            f,
            &out.indicators,
            &mask,
            &out.config.scoring,
            out.config.seed,
        )?);
    }
    out.scores = scores;
    Ok(out)
}

/// Scores as written to `scores.json`: serialisation is fixed-order.
pub fn scores_json(reports: &[ScoreReport]) -> Result<String> {
    Ok(serde_json::to_string_pretty(reports)?)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes stores, per-date parameters, scores and the resolved configuration.
pub fn write_outputs(out: &ReplayOutput, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, f) in out.models() {
        write_store(f, dir.join(name))?;
    }
    write_store(&out.indicators, dir.join("indicators"))?;
    write_store(&out.thresholds, dir.join("thresholds"))?;
    let pdir = dir.join("params");
    std::fs::create_dir_all(&pdir).map_err(|e| Error::io(&pdir, e))?;
    for p in &out.params {
        write_text(
            &pdir.join(format!("{}.json", p.date)),
            &serde_json::to_string_pretty(p)?,
        )?;
    }
    write_text(&dir.join("scores.json"), &scores_json(&out.scores)?)?;
    write_reports_csv(&out.scores, dir.join("scores.csv"))?;
    write_text(&dir.join("config.toml"), &out.config.to_toml_string()?)?;
    Ok(())
}

/// Loads the configured stores, replays and writes to `output_dir`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<ReplayOutput> {
    let i = &cfg.inputs;
    for (name, p) in [
        ("observations", &i.observations),
        ("forecasts", &i.forecasts),
        ("hindcasts", &i.hindcasts),
    ] {
        if p.as_os_str().is_empty() {
            return Err(Error::Config(format!("inputs.{name} is not set")));
        }
        if !p.exists() {
            return Err(Error::Config(format!("inputs.{name}: {} does not exist", p.display())));
        }
    }
    let inputs = ReplayInputs::load(&cfg.inputs)?;
    let out = run_replay(&inputs, cfg)?;
    write_outputs(&out, &cfg.output_dir)?;
    Ok(out)
}

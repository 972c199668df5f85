//! Quantile thresholds (observed and hindcast-based), observed cumulative
//! bin indicators, and the rolling month-day climatology of indicators.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::griddata::field::opt64;
use crate::griddata::store::{dims, require_dims, ArrayData, StoreRecord};
use crate::griddata::{
    CalendarDate, DatedCube, EnsembleField, FieldKind, GridSpec, ObservationField, Storable, Variable,
};

pub const DEFAULT_BINS: usize = 5;
pub const CLIMATOLOGY_YEARS: u32 = 20;
/// Day offsets around the target month-day that feed observed thresholds.
pub const DAY_OFFSETS: [i64; 5] = [-4, -2, 0, 2, 4];
/// Hindcast dates on each side of the anchor in a model-climate window.
pub const MODEL_WINDOW_HALF: usize = 4;

/// Nearest-rank quantile: element `ceil(k n / K)` (1-based) of sorted `xs`.
pub fn nearest_rank(sorted: &[f32], k: usize, bins: usize) -> f32 {
    let n = sorted.len();
    let rank = (k * n).div_ceil(bins).max(1);
    sorted[rank - 1]
}

/// Fills `out[..bins-1]` with the nearest-rank thresholds of `samples`
/// (sorted in place), or NaN when fewer than `bins` samples are present.
fn quantiles_into(samples: &mut [f32], bins: usize, out: &mut [f32]) {
    if samples.len() < bins {
        out.iter_mut().for_each(|v| *v = f32::NAN);
        return;
    }
    samples.sort_unstable_by(f32::total_cmp);
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = nearest_rank(samples, k + 1, bins);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdSource {
    Observed,
    Model,
}

/// Thresholds `q(1..K-1)` per (date, cell); `q(K) = +inf` is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdField {
    grid: Arc<GridSpec>,
    variable: Variable,
    bins: usize,
    source: ThresholdSource,
    lead_days: Option<i64>,
    cube: DatedCube<f32>,
    /// Dates whose model-climate window had fewer than the full nine hindcast dates.
    short_windows: Vec<CalendarDate>,
}

impl ThresholdField {
    pub fn new(
        grid: Arc<GridSpec>,
        variable: Variable,
        bins: usize,
        source: ThresholdSource,
        lead_days: Option<i64>,
        dates: Vec<CalendarDate>,
        values: Vec<f32>,
    ) -> Result<Self> {
        if bins < 2 {
            return Err(Error::InvalidArgument("need at least two bins".into()));
        }
        let cube = DatedCube::new(dates, grid.n_cells(), bins - 1, values)?;
        Ok(ThresholdField {
            grid,
            variable,
            bins,
            source,
            lead_days,
            cube,
            short_windows: Vec::new(),
        })
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    pub fn variable(&self) -> Variable {
        self.variable
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn source(&self) -> ThresholdSource {
        self.source
    }

    pub fn lead_days(&self) -> Option<i64> {
        self.lead_days
    }

    pub fn dates(&self) -> &[CalendarDate] {
        self.cube.dates()
    }

    pub fn position(&self, date: CalendarDate) -> Option<usize> {
        self.cube.position(date)
    }

    pub fn cube(&self) -> &DatedCube<f32> {
        &self.cube
    }

    pub fn short_windows(&self) -> &[CalendarDate] {
        &self.short_windows
    }

    /// Thresholds at `(t, cell)`; `None` if missing.
    pub fn get(&self, t: usize, cell: usize) -> Option<&[f32]> {
        let q = self.cube.cell(t, cell);
        (!q[0].is_nan()).then_some(q)
    }

    pub fn get_at(&self, date: CalendarDate, cell: usize) -> Option<&[f32]> {
        self.position(date).and_then(|t| self.get(t, cell))
    }

    /// A cell is arid on a date when its top finite threshold is zero.
    pub fn is_arid(&self, t: usize, cell: usize) -> bool {
        self.cube.cell(t, cell)[self.bins - 2] == 0.0
    }
}

fn observed_sample_dates(obs: &ObservationField, target: CalendarDate, years_back: u32) -> Vec<usize> {
    let mut out = Vec::with_capacity(years_back as usize * DAY_OFFSETS.len());
    for j in 1..=years_back as i32 {
        let base = target.with_year_clamped(target.year() - j);
        for off in DAY_OFFSETS {
            if let Some(t) = obs.position(base.add_days(off)) {
                out.push(t);
            }
        }
    }
    out
}

/// Observed climatological thresholds: for each target date the `k/K`
/// nearest-rank quantiles of observations 0, 2 or 4 days from the target's
/// month-day in each of the previous `years_back` years.
pub fn observed_thresholds(
    obs: &ObservationField,
    target_dates: &[CalendarDate],
    bins: usize,
    years_back: u32,
) -> Result<ThresholdField> {
    observed_thresholds_with(Exec::default(), obs, target_dates, bins, years_back)
}

pub fn observed_thresholds_with(
    exec: Exec,
    obs: &ObservationField,
    target_dates: &[CalendarDate],
    bins: usize,
    years_back: u32,
) -> Result<ThresholdField> {
    if bins < 2 {
        return Err(Error::InvalidArgument("need at least two bins".into()));
    }
    let n_cells = obs.grid().n_cells();
    let free = bins - 1;
    let mut values = vec![f32::NAN; target_dates.len() * n_cells * free];
    exec.fill_chunks(&mut values, n_cells * free, |t, row| {
        let sample_t = observed_sample_dates(obs, target_dates[t], years_back);
        let mut samples = Vec::with_capacity(sample_t.len());
        for g in 0..n_cells {
            samples.clear();
            samples.extend(sample_t.iter().filter_map(|&s| obs.get(s, g)));
            quantiles_into(&mut samples, bins, &mut row[g * free..(g + 1) * free]);
        }
    });
    ThresholdField::new(
        obs.grid().clone(),
        obs.variable(),
        bins,
        ThresholdSource::Observed,
        None,
        target_dates.to_vec(),
        values,
    )
}

/// Hindcast dates forming the model climate of `t`: the latest available
/// date not after `t` plus up to four on either side. Returns the window and
/// whether it is short of nine dates.
pub fn model_window(available: &[CalendarDate], t: CalendarDate) -> (Vec<CalendarDate>, bool) {
    let full = 2 * MODEL_WINDOW_HALF + 1;
    let (lo, hi) = match available.partition_point(|d| *d <= t) {
        0 => (0, MODEL_WINDOW_HALF.min(available.len())),
        p => {
            let anchor = p - 1;
            (
                anchor.saturating_sub(MODEL_WINDOW_HALF),
                (anchor + MODEL_WINDOW_HALF + 1).min(available.len()),
            )
        }
    };
    let w = available[lo..hi].to_vec();
    let short = w.len() < full;
    (w, short)
}

/// Model-based thresholds pooled over all members and year offsets of the
/// hindcasts in each forecast date's model-climate window. `available` is the
/// hindcast availability calendar; dates it lists that no hindcast carries
/// are ignored.
pub fn model_thresholds(
    hindcasts: &[EnsembleField],
    forecast_dates: &[CalendarDate],
    lead_days: i64,
    bins: usize,
    available: &[CalendarDate],
) -> Result<ThresholdField> {
    model_thresholds_with(Exec::default(), hindcasts, forecast_dates, lead_days, bins, available)
}

pub fn model_thresholds_with(
    exec: Exec,
    hindcasts: &[EnsembleField],
    forecast_dates: &[CalendarDate],
    lead_days: i64,
    bins: usize,
    available: &[CalendarDate],
) -> Result<ThresholdField> {
    model_thresholds_inner(exec, hindcasts, forecast_dates, lead_days, bins, available, false)
}

/// Model thresholds whose window for date `t` draws only on hindcast dates
/// up to `t`, i.e. on hindcasts already issued alongside the forecast for
/// `t`. The result for a date never depends on later data; windows are
/// therefore one-sided and reported as short.
pub fn causal_model_thresholds(
    exec: Exec,
    hindcasts: &[EnsembleField],
    forecast_dates: &[CalendarDate],
    lead_days: i64,
    bins: usize,
    available: &[CalendarDate],
) -> Result<ThresholdField> {
    model_thresholds_inner(exec, hindcasts, forecast_dates, lead_days, bins, available, true)
}

fn model_thresholds_inner(
    exec: Exec,
    hindcasts: &[EnsembleField],
    forecast_dates: &[CalendarDate],
    lead_days: i64,
    bins: usize,
    available: &[CalendarDate],
    causal: bool,
) -> Result<ThresholdField> {
    let first = hindcasts
        .first()
        .ok_or_else(|| Error::InvalidArgument("no hindcast fields supplied".into()))?;
    if bins < 2 {
        return Err(Error::InvalidArgument("need at least two bins".into()));
    }
    let grid = first.grid().clone();
    if hindcasts.iter().any(|h| h.grid() != &grid) {
        return Err(Error::Misaligned("hindcasts on different grids".into()));
    }
    let mut cal: Vec<CalendarDate> = available
        .iter()
        .copied()
        .filter(|d| hindcasts.iter().any(|h| h.position(*d).is_some()))
        .collect();
    cal.sort_unstable();
    cal.dedup();
    if cal.is_empty() {
        return Err(Error::NoData(
            "no hindcast dates available for the model climate".into(),
        ));
    }

    let n_cells = grid.n_cells();
    let free = bins - 1;
    let windows: Vec<(Vec<CalendarDate>, bool)> = forecast_dates
        .iter()
        .map(|t| {
            if causal {
                model_window(&cal[..cal.partition_point(|d| d <= t)], *t)
            } else {
                model_window(&cal, *t)
            }
        })
        .collect();
    let mut values = vec![f32::NAN; forecast_dates.len() * n_cells * free];
    exec.fill_chunks(&mut values, n_cells * free, |t, row| {
        let slots: Vec<(&EnsembleField, usize)> = windows[t]
            .0
            .iter()
            .flat_map(|s| hindcasts.iter().filter_map(move |h| h.position(*s).map(|p| (h, p))))
            .collect();
        let mut samples = Vec::new();
        for g in 0..n_cells {
            samples.clear();
            for (h, p) in &slots {
                samples.extend(h.member_values(*p, g).filter(|v| !v.is_nan()));
            }
            quantiles_into(&mut samples, bins, &mut row[g * free..(g + 1) * free]);
        }
    });
    let mut field = ThresholdField::new(
        grid,
        first.variable(),
        bins,
        ThresholdSource::Model,
        Some(lead_days),
        forecast_dates.to_vec(),
        values,
    )?;
    field.short_windows = forecast_dates
        .iter()
        .zip(&windows)
        .filter(|(_, (_, short))| *short)
        .map(|(d, _)| *d)
        .collect();
    if !field.short_windows.is_empty() {
        log::debug!(
            "{} forecast dates have a model-climate window shorter than nine dates",
            field.short_windows.len()
        );
    }
    Ok(field)
}

/// Observed cumulative indicators `O(k) = 1{y < q(k)}`, with `O(K) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorField {
    grid: Arc<GridSpec>,
    variable: Variable,
    cube: DatedCube<f64>,
}

impl IndicatorField {
    pub fn new(
        grid: Arc<GridSpec>,
        variable: Variable,
        bins: usize,
        dates: Vec<CalendarDate>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let cube = DatedCube::new(dates, grid.n_cells(), bins, values)?;
        Ok(IndicatorField { grid, variable, cube })
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    pub fn variable(&self) -> Variable {
        self.variable
    }

    pub fn bins(&self) -> usize {
        self.cube.bins()
    }

    pub fn dates(&self) -> &[CalendarDate] {
        self.cube.dates()
    }

    pub fn position(&self, date: CalendarDate) -> Option<usize> {
        self.cube.position(date)
    }

    pub fn cube(&self) -> &DatedCube<f64> {
        &self.cube
    }

    pub fn get(&self, t: usize, cell: usize) -> Option<&[f64]> {
        let o = self.cube.cell(t, cell);
        (!o[0].is_nan()).then_some(o)
    }

    pub fn get_at(&self, date: CalendarDate, cell: usize) -> Option<&[f64]> {
        self.position(date).and_then(|t| self.get(t, cell))
    }

    /// Indicator for bin `k` (0-based) at `date`.
    pub fn value(&self, date: CalendarDate, cell: usize, k: usize) -> Option<f64> {
        self.position(date).and_then(|t| opt64(self.cube.cell(t, cell)[k]))
    }
}

pub fn indicators(obs: &ObservationField, thr: &ThresholdField) -> Result<IndicatorField> {
    indicators_with(Exec::default(), obs, thr)
}

pub fn indicators_with(exec: Exec, obs: &ObservationField, thr: &ThresholdField) -> Result<IndicatorField> {
    if obs.grid() != thr.grid() {
        return Err(Error::Misaligned(
            "observations and thresholds on different grids".into(),
        ));
    }
    let bins = thr.bins();
    let n_cells = obs.grid().n_cells();
    let dates = thr.dates().to_vec();
    let mut values = vec![f64::NAN; dates.len() * n_cells * bins];
    exec.fill_chunks(&mut values, n_cells * bins, |t, row| {
        let Some(ot) = obs.position(dates[t]) else { return };
        for g in 0..n_cells {
            let (Some(y), Some(q)) = (obs.get(ot, g), thr.get(t, g)) else {
                continue;
            };
            let out = &mut row[g * bins..(g + 1) * bins];
            for (o, qk) in out.iter_mut().zip(q) {
                *o = if y < *qk { 1.0 } else { 0.0 };
            }
            out[bins - 1] = 1.0;
        }
    });
    IndicatorField::new(obs.grid().clone(), obs.variable(), bins, dates, values)
}

/// Rolling probabilistic climatology `C_t(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClimatologyField {
    grid: Arc<GridSpec>,
    variable: Variable,
    cube: DatedCube<f64>,
}

impl ClimatologyField {
    pub fn new(
        grid: Arc<GridSpec>,
        variable: Variable,
        bins: usize,
        dates: Vec<CalendarDate>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let cube = DatedCube::new(dates, grid.n_cells(), bins, values)?;
        Ok(ClimatologyField { grid, variable, cube })
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    pub fn variable(&self) -> Variable {
        self.variable
    }

    pub fn bins(&self) -> usize {
        self.cube.bins()
    }

    pub fn dates(&self) -> &[CalendarDate] {
        self.cube.dates()
    }

    pub fn position(&self, date: CalendarDate) -> Option<usize> {
        self.cube.position(date)
    }

    pub fn cube(&self) -> &DatedCube<f64> {
        &self.cube
    }

    pub fn value(&self, date: CalendarDate, cell: usize, k: usize) -> Option<f64> {
        self.position(date).and_then(|t| opt64(self.cube.cell(t, cell)[k]))
    }
}

/// Mean of the indicators on the same month-day in each of the previous
/// `years` years, every missing term replaced by the prior `k/K`. A Feb 29
/// target only matches Feb 29 history.
pub fn rolling_climatology(
    ind: &IndicatorField,
    target_dates: &[CalendarDate],
    years: u32,
) -> Result<ClimatologyField> {
    rolling_climatology_with(Exec::default(), ind, target_dates, years)
}

pub fn rolling_climatology_with(
    exec: Exec,
    ind: &IndicatorField,
    target_dates: &[CalendarDate],
    years: u32,
) -> Result<ClimatologyField> {
    if years == 0 {
        return Err(Error::InvalidArgument("climatology needs at least one year".into()));
    }
    let bins = ind.bins();
    let n_cells = ind.grid().n_cells();
    let mut values = vec![0.0; target_dates.len() * n_cells * bins];
    let prior: Vec<f64> = (1..=bins).map(|k| k as f64 / bins as f64).collect();
    exec.fill_chunks(&mut values, n_cells * bins, |t, row| {
        let target = target_dates[t];
        let hist: Vec<Option<usize>> = (1..=years as i32)
            .map(|j| target.with_year(target.year() - j).and_then(|s| ind.position(s)))
            .collect();
        for g in 0..n_cells {
            let out = &mut row[g * bins..(g + 1) * bins];
            for (k, slot) in out.iter_mut().enumerate() {
                let sum: f64 = hist
                    .iter()
                    .map(|p| p.and_then(|s| opt64(ind.cube().cell(s, g)[k])).unwrap_or(prior[k]))
                    .sum();
                *slot = sum / f64::from(years);
            }
        }
    });
    ClimatologyField::new(ind.grid().clone(), ind.variable(), bins, target_dates.to_vec(), values)
}

impl Storable for ThresholdField {
    fn to_record(&self) -> StoreRecord {
        let g = &self.grid;
        let mut attrs = Map::new();
        attrs.insert("bins".into(), self.bins.into());
        attrs.insert("source".into(), serde_json::to_value(self.source).expect("enum"));
        attrs.insert("lead_days".into(), self.lead_days.map_or(Value::Null, Value::from));
        attrs.insert(
            "short_windows".into(),
            serde_json::to_value(&self.short_windows).expect("dates"),
        );
        StoreRecord {
            kind: FieldKind::Thresholds,
            variable: self.variable,
            units: self.variable.units().into(),
            dims: dims(&["time", "lat", "lon", "k"]),
            shape: vec![self.dates().len(), g.n_lat(), g.n_lon(), self.bins - 1],
            dates: self.dates().to_vec(),
            grid: (**g).clone(),
            attrs,
            data: ArrayData::F32(self.cube.values().to_vec()),
        }
    }

    fn from_record(rec: StoreRecord, path: &Path) -> Result<Self> {
        rec.expect_kind(FieldKind::Thresholds, path)?;
        require_dims(&rec, &["time", "lat", "lon", "k"], path)?;
        let bins: usize = rec.require_attr("bins", path)?;
        let source: ThresholdSource = rec.require_attr("source", path)?;
        let lead: Option<i64> = rec.attr("lead_days")?;
        let short: Vec<CalendarDate> = rec.attr("short_windows")?.unwrap_or_default();
        let (grid, variable, dates) = (Arc::new(rec.grid.clone()), rec.variable, rec.dates.clone());
        let values = rec.into_f32(path)?;
        let mut f = ThresholdField::new(grid, variable, bins, source, lead, dates, values)?;
        f.short_windows = short;
        Ok(f)
    }
}

fn prob_record(
    kind: FieldKind,
    grid: &GridSpec,
    variable: Variable,
    cube: &DatedCube<f64>,
    attrs: Map<String, Value>,
) -> StoreRecord {
    StoreRecord {
        kind,
        variable,
        units: "probability".into(),
        dims: dims(&["time", "lat", "lon", "k"]),
        shape: vec![cube.n_dates(), grid.n_lat(), grid.n_lon(), cube.bins()],
        dates: cube.dates().to_vec(),
        grid: grid.clone(),
        attrs,
        data: ArrayData::F64(cube.values().to_vec()),
    }
}

/// Grid, variable, dates, bins, attributes and values of a probability store.
pub(crate) type ProbRecord = (
    Arc<GridSpec>,
    Variable,
    Vec<CalendarDate>,
    usize,
    Map<String, Value>,
    Vec<f64>,
);

pub(crate) fn prob_from_record(rec: StoreRecord, kind: FieldKind, path: &Path) -> Result<ProbRecord> {
    rec.expect_kind(kind, path)?;
    require_dims(&rec, &["time", "lat", "lon", "k"], path)?;
    let bins = rec.shape[3];
    let grid = Arc::new(rec.grid.clone());
    let variable = rec.variable;
    let dates = rec.dates.clone();
    let attrs = rec.attrs.clone();
    let values = rec.into_f64(path)?;
    Ok((grid, variable, dates, bins, attrs, values))
}

impl Storable for IndicatorField {
    fn to_record(&self) -> StoreRecord {
        prob_record(FieldKind::Indicators, &self.grid, self.variable, &self.cube, Map::new())
    }

    fn from_record(rec: StoreRecord, path: &Path) -> Result<Self> {
        let (grid, variable, dates, bins, _, values) = prob_from_record(rec, FieldKind::Indicators, path)?;
        IndicatorField::new(grid, variable, bins, dates, values)
    }
}

impl Storable for ClimatologyField {
    fn to_record(&self) -> StoreRecord {
        prob_record(
            FieldKind::Climatology,
            &self.grid,
            self.variable,
            &self.cube,
            Map::new(),
        )
    }

    fn from_record(rec: StoreRecord, path: &Path) -> Result<Self> {
        let (grid, variable, dates, bins, _, values) = prob_from_record(rec, FieldKind::Climatology, path)?;
        ClimatologyField::new(grid, variable, bins, dates, values)
    }
}

pub(crate) fn prob_to_record(
    kind: FieldKind,
    grid: &GridSpec,
    variable: Variable,
    cube: &DatedCube<f64>,
    attrs: Map<String, Value>,
) -> StoreRecord {
    prob_record(kind, grid, variable, cube, attrs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one_cell() -> Arc<GridSpec> {
        Arc::new(GridSpec::new(vec![0.0], vec![0.0], vec![1.0]).unwrap())
    }

    /// Independent oracle: sort, then take the smallest value whose
    /// empirical CDF reaches `k / bins`.
    fn oracle_quantile(xs: &[f32], k: usize, bins: usize) -> f32 {
        let mut v = xs.to_vec();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = v.len();
        *v.iter()
            .enumerate()
            .find(|(i, _)| (i + 1) * bins >= k * n)
            .map(|(_, x)| x)
            .unwrap()
    }

    #[test]
    fn nearest_rank_examples() {
        let xs: Vec<f32> = (1..=100).rev().map(|i| i as f32).collect();
        let mut s = xs.clone();
        let mut out = [0f32; 4];
        quantiles_into(&mut s, 5, &mut out);
        assert_eq!(out, [20.0, 40.0, 60.0, 80.0]);
        for (k, q) in out.iter().enumerate() {
            assert_eq!(*q, oracle_quantile(&xs, k + 1, 5));
        }

        let mut s = vec![4.0, 1.0, 3.0, 2.0];
        let mut out = [0f32; 1];
        quantiles_into(&mut s, 2, &mut out);
        assert_eq!(out, [2.0]);

        let mut s = vec![7.5f32; 30];
        let mut out = [0f32; 4];
        quantiles_into(&mut s, 5, &mut out);
        assert_eq!(out, [7.5; 4]);

        let mut s = vec![1.0f32, 2.0];
        quantiles_into(&mut s, 5, &mut out);
        assert!(out.iter().all(|v| v.is_nan()));
    }

    fn daily_obs(start: CalendarDate, values: Vec<f32>) -> ObservationField {
        let dates = (0..values.len()).map(|i| start.add_days(i as i64)).collect();
        ObservationField::new(one_cell(), Variable::Temperature, dates, values).unwrap()
    }

    #[test]
    fn observed_thresholds_use_offset_days_in_prior_years() {
        // 21 years of data; only the sampled days carry values 1..100
        let start = CalendarDate::ymd(2000, 1, 1);
        let target = CalendarDate::ymd(2020, 7, 15);
        let n = start.days_until(target) as usize + 1;
        let mut values = vec![f32::NAN; n];
        let mut next = 1.0f32;
        for j in 1..=20 {
            let base = target.with_year(2020 - j).unwrap();
            for off in DAY_OFFSETS {
                values[start.days_until(base.add_days(off)) as usize] = next;
                next += 1.0;
            }
        }
        // a value on the target itself must not enter
        values[n - 1] = 1e6;
        let obs = daily_obs(start, values);
        let thr = observed_thresholds(&obs, &[target], 5, 20).unwrap();
        assert_eq!(thr.get(0, 0).unwrap(), &[20.0, 40.0, 60.0, 80.0]);
        assert_eq!(thr.source(), ThresholdSource::Observed);
    }

    #[test]
    fn offsets_wrap_across_year_end() {
        let target = CalendarDate::ymd(2021, 12, 30);
        let obs = daily_obs(CalendarDate::ymd(2000, 1, 1), vec![1.0; 8500]);
        let samples = observed_sample_dates(&obs, target, 20);
        assert_eq!(samples.len(), 100);
        let jan3 = obs.position(CalendarDate::ymd(2021, 1, 3)).unwrap();
        assert!(samples.contains(&jan3));
    }

    #[test]
    fn too_few_samples_gives_missing() {
        let start = CalendarDate::ymd(2019, 1, 1);
        let obs = daily_obs(start, vec![3.0; 400]);
        let thr = observed_thresholds(&obs, &[CalendarDate::ymd(2020, 1, 20)], 5, 20).unwrap();
        // 2019 contributes only 5 samples, exactly K
        assert!(thr.get(0, 0).is_some());
        let thr = observed_thresholds(&obs, &[CalendarDate::ymd(2019, 6, 1)], 5, 20).unwrap();
        assert!(thr.get(0, 0).is_none());
    }

    #[test]
    fn model_window_shapes() {
        let cal: Vec<CalendarDate> = (0..30).map(|i| CalendarDate::ymd(2020, 1, 1).add_days(3 * i)).collect();
        let (w, short) = model_window(&cal, cal[10]);
        assert_eq!(w, cal[6..15].to_vec());
        assert!(!short);
        let (w, short) = model_window(&cal, cal[10].add_days(1));
        assert_eq!(w.first(), Some(&cal[6]));
        assert!(!short);
        let (w, short) = model_window(&cal, cal[1]);
        assert_eq!(w, cal[0..6].to_vec());
        assert!(short);
    }

    fn hindcast(offset: u32, dates: &[CalendarDate], value: impl Fn(usize) -> f32) -> EnsembleField {
        let v: Vec<f32> = (0..dates.len()).map(&value).collect();
        EnsembleField::new(
            one_cell(),
            Variable::Temperature,
            19,
            dates.to_vec(),
            1,
            Some(offset),
            v,
        )
        .unwrap()
    }

    #[test]
    fn model_thresholds_single_date() {
        let d = CalendarDate::ymd(2024, 3, 4);
        let hs: Vec<EnsembleField> = (1..=20).map(|delta| hindcast(delta, &[d], |_| delta as f32)).collect();
        let thr = model_thresholds(&hs, &[d], 19, 5, &[d]).unwrap();
        assert_eq!(thr.get(0, 0).unwrap(), &[4.0, 8.0, 12.0, 16.0]);
        assert_eq!(thr.short_windows(), &[d]);
        assert_eq!(thr.lead_days(), Some(19));

        let hs: Vec<EnsembleField> = (1..=20).map(|delta| hindcast(delta, &[d], |_| 2.5)).collect();
        let thr = model_thresholds(&hs, &[d], 19, 5, &[d]).unwrap();
        assert_eq!(thr.get(0, 0).unwrap(), &[2.5; 4]);

        assert!(matches!(model_thresholds(&hs, &[d], 19, 5, &[]), Err(Error::NoData(_))));
    }

    #[test]
    fn indicators_are_strict() {
        let d = CalendarDate::ymd(2020, 1, 1);
        let thr = ThresholdField::new(
            one_cell(),
            Variable::Temperature,
            5,
            ThresholdSource::Observed,
            None,
            vec![d],
            vec![20.0, 40.0, 60.0, 80.0],
        )
        .unwrap();
        let ind_for = |y: f32| {
            let obs = daily_obs(d, vec![y]);
            indicators(&obs, &thr).unwrap().get(0, 0).unwrap().to_vec()
        };
        assert_eq!(ind_for(50.0), vec![0.0, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(ind_for(40.0), vec![0.0, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(ind_for(1.0), vec![1.0; 5]);
        assert_eq!(ind_for(99.0), vec![0.0, 0.0, 0.0, 0.0, 1.0]);
        let obs = daily_obs(d, vec![f32::NAN]);
        assert!(indicators(&obs, &thr).unwrap().get(0, 0).is_none());
    }

    fn indicator_series(dates: &[CalendarDate], f: impl Fn(usize) -> Option<f64>) -> IndicatorField {
        let mut values = Vec::new();
        for i in 0..dates.len() {
            match f(i) {
                Some(v) => values.extend([v, v, v, v, 1.0]),
                None => values.extend([f64::NAN; 5]),
            }
        }
        IndicatorField::new(one_cell(), Variable::Temperature, 5, dates.to_vec(), values).unwrap()
    }

    #[test]
    fn rolling_climatology_imputes_prior() {
        let target = CalendarDate::ymd(2021, 5, 10);
        let hist: Vec<CalendarDate> = (1..=20).map(|j| target.with_year(2021 - j).unwrap()).collect();

        let all_ones = indicator_series(&hist, |_| Some(1.0));
        let c = rolling_climatology(&all_ones, &[target], 20).unwrap();
        assert_eq!(c.cube().cell(0, 0), &[1.0; 5]);

        let half = indicator_series(&hist, |i| (i < 10).then_some(1.0));
        let c = rolling_climatology(&half, &[target], 20).unwrap();
        assert!((c.value(target, 0, 0).unwrap() - 0.6).abs() < 1e-15);

        let none = indicator_series(&[], |_| None);
        let c = rolling_climatology(&none, &[target], 20).unwrap();
        let expect = [0.2, 0.4, 0.6, 0.8, 1.0];
        for (a, b) in c.cube().cell(0, 0).iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn leap_day_matches_only_leap_day() {
        let target = CalendarDate::ymd(2024, 2, 29);
        let mut dates = Vec::new();
        for y in 2004..2024 {
            dates.push(CalendarDate::ymd(y, 2, 28));
            if let Some(d) = target.with_year(y) {
                dates.push(d);
            }
        }
        let ind = indicator_series(&dates, |i| Some(if dates[i].is_leap_day() { 1.0 } else { 0.0 }));
        let c = rolling_climatology(&ind, &[target], 20).unwrap();
        // 5 leap years (2004..2020) contribute 1; 15 gaps are imputed with 0.2
        let expect = (5.0 + 15.0 * 0.2) / 20.0;
        assert!((c.value(target, 0, 0).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn occupancy_of_own_climatology_is_uniform() {
        use crate::griddata::{generate_synthetic_world, BiasProfile, SynthConfig};
        let cfg = SynthConfig::new(17, GridSpec::patch(40.0, 0.0, 2, 2).unwrap(), 23, BiasProfile::zero());
        let w = generate_synthetic_world(&cfg).unwrap();
        let dates: Vec<CalendarDate> = w
            .observations
            .dates()
            .iter()
            .copied()
            .filter(|d| d.year() >= 2020)
            .collect();
        let thr = observed_thresholds(&w.observations, &dates, 5, 20).unwrap();
        let ind = indicators(&w.observations, &thr).unwrap();
        let mut counts = [0usize; 5];
        let mut n = 0;
        for t in 0..dates.len() {
            for g in 0..4 {
                let o = ind.get(t, g).unwrap();
                let bin = o.iter().position(|v| *v == 1.0).unwrap();
                counts[bin] += 1;
                n += 1;
            }
        }
        for c in counts {
            let p = c as f64 / n as f64;
            assert!((p - 0.2).abs() < 0.02, "{counts:?}");
        }
    }

    proptest! {
        #[test]
        fn thresholds_monotone(xs in prop::collection::vec(-1e3f32..1e3, 5..200), bins in 2usize..8) {
            let mut s = xs.clone();
            let mut out = vec![0f32; bins - 1];
            quantiles_into(&mut s, bins, &mut out);
            if xs.len() >= bins {
                prop_assert!(out.windows(2).all(|w| w[0] <= w[1]));
                for (k, q) in out.iter().enumerate() {
                    prop_assert_eq!(*q, oracle_quantile(&xs, k + 1, bins));
                }
            }
        }
    }
}

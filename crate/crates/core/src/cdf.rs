//! CDF forecasts over quantile bins, built by member counting.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::climatology::{model_thresholds_with, prob_from_record, prob_to_record, ThresholdField};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::griddata::field::opt64;
use crate::griddata::store::StoreRecord;
use crate::griddata::{CalendarDate, DatedCube, EnsembleField, FieldKind, GridSpec, Storable, Variable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Raw,
    Debiased,
    #[serde(rename = "debias++")]
    DebiasPlusPlus,
    #[serde(rename = "persistence++")]
    PersistencePlusPlus,
    Pbc,
    Custom,
}

impl Provenance {
    pub fn label(self) -> &'static str {
        match self {
            Provenance::Raw => "raw",
            Provenance::Debiased => "debiased",
            Provenance::DebiasPlusPlus => "debias++",
            Provenance::PersistencePlusPlus => "persistence++",
            Provenance::Pbc => "pbc",
            Provenance::Custom => "custom",
        }
    }
}

/// Cumulative bin probabilities `F(1..K)` per (date, cell).
#[derive(Debug, Clone, PartialEq)]
pub struct CdfForecast {
    grid: Arc<GridSpec>,
    variable: Variable,
    lead_days: i64,
    provenance: Provenance,
    cube: DatedCube<f64>,
}

impl CdfForecast {
    pub fn new(
        grid: Arc<GridSpec>,
        variable: Variable,
        lead_days: i64,
        provenance: Provenance,
        bins: usize,
        dates: Vec<CalendarDate>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if bins < 2 {
            return Err(Error::InvalidArgument("need at least two bins".into()));
        }
        let cube = DatedCube::new(dates, grid.n_cells(), bins, values)?;
        Ok(CdfForecast {
            grid,
            variable,
            lead_days,
            provenance,
            cube,
        })
    }

    /// A forecast with the same layout as `self` but new values.
    pub fn with_values(&self, provenance: Provenance, values: Vec<f64>) -> Result<Self> {
        Self::new(
            self.grid.clone(),
            self.variable,
            self.lead_days,
            provenance,
            self.bins(),
            self.dates().to_vec(),
            values,
        )
    }

    /// The climatological forecast `F(k) = k/K` on the given dates.
    pub fn climatological(
        grid: Arc<GridSpec>,
        variable: Variable,
        lead_days: i64,
        bins: usize,
        dates: Vec<CalendarDate>,
    ) -> Result<Self> {
        let row: Vec<f64> = (1..=bins).map(|k| k as f64 / bins as f64).collect();
        let values = row
            .iter()
            .copied()
            .cycle()
            .take(dates.len() * grid.n_cells() * bins)
            .collect();
        Self::new(grid, variable, lead_days, Provenance::Custom, bins, dates, values)
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    pub fn variable(&self) -> Variable {
        self.variable
    }

    pub fn lead_days(&self) -> i64 {
        self.lead_days
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn set_provenance(&mut self, p: Provenance) {
        self.provenance = p;
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

    pub fn values(&self) -> &[f64] {
        self.cube.values()
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        self.cube.values_mut()
    }

    pub fn get(&self, t: usize, cell: usize) -> Option<&[f64]> {
        let f = self.cube.cell(t, cell);
        (!f[0].is_nan()).then_some(f)
    }

    pub fn get_at(&self, date: CalendarDate, cell: usize) -> Option<&[f64]> {
        self.position(date).and_then(|t| self.get(t, cell))
    }

    pub fn value(&self, date: CalendarDate, cell: usize, k: usize) -> Option<f64> {
        self.position(date).and_then(|t| opt64(self.cube.cell(t, cell)[k]))
    }

    /// Checks that `other` shares grid, bins and dates.
    pub fn check_aligned(&self, other: &CdfForecast) -> Result<()> {
        if self.grid != other.grid || self.bins() != other.bins() || self.dates() != other.dates() {
            return Err(Error::Misaligned(format!(
                "{} and {} forecasts differ in grid, bins or dates",
                self.provenance.label(),
                other.provenance.label()
            )));
        }
        Ok(())
    }

    /// Stacks single- or multi-date forecasts with identical layout along time.
    pub fn concat(parts: &[CdfForecast], provenance: Provenance) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("nothing to concatenate".into()))?;
        let mut dates = Vec::new();
        let mut values = Vec::new();
        for p in parts {
            if p.grid != first.grid || p.bins() != first.bins() {
                return Err(Error::Misaligned("forecast pieces differ in grid or bins".into()));
            }
            dates.extend_from_slice(p.dates());
            values.extend_from_slice(p.values());
        }
        Self::new(
            first.grid.clone(),
            first.variable,
            first.lead_days,
            provenance,
            first.bins(),
            dates,
            values,
        )
    }
}

/// Member-counting CDF at one (date, cell). `None` if no member or threshold is available.
fn count_below(members: impl Iterator<Item = f32>, q: &[f32], out: &mut [f64]) -> bool {
    let mut counts = vec![0usize; q.len()];
    let mut m = 0usize;
    for x in members.filter(|x| !x.is_nan()) {
        m += 1;
        for (c, qk) in counts.iter_mut().zip(q) {
            if x < *qk {
                *c += 1;
            }
        }
    }
    if m == 0 {
        return false;
    }
    for (o, c) in out.iter_mut().zip(&counts) {
        *o = *c as f64 / m as f64;
    }
    *out.last_mut().expect("at least two bins") = 1.0;
    true
}

/// `F(k) = (1/M) sum_m 1{member_m < q(k)}` with thresholds looked up at
/// `threshold_date(t)` for ensemble date position `t`.
fn counted_cdf(
    exec: Exec,
    ens: &EnsembleField,
    thr: &ThresholdField,
    threshold_date: impl Fn(usize) -> CalendarDate + Sync + Send,
    provenance: Provenance,
) -> Result<CdfForecast> {
    if ens.grid() != thr.grid() {
        return Err(Error::Misaligned("ensemble and thresholds on different grids".into()));
    }
    let bins = thr.bins();
    let n_cells = ens.grid().n_cells();
    let dates = ens.target_dates().to_vec();
    let mut values = vec![f64::NAN; dates.len() * n_cells * bins];
    exec.fill_chunks(&mut values, n_cells * bins, |t, row| {
        let Some(tt) = thr.position(threshold_date(t)) else {
            return;
        };
        for g in 0..n_cells {
            let Some(q) = thr.get(tt, g) else { continue };
            let out = &mut row[g * bins..(g + 1) * bins];
            if !count_below(ens.member_values(t, g), q, out) {
                out.iter_mut().for_each(|v| *v = f64::NAN);
            }
        }
    });
    CdfForecast::new(
        ens.grid().clone(),
        ens.variable(),
        ens.lead_days(),
        provenance,
        bins,
        dates,
        values,
    )
}

/// Counts members below each threshold of the field's own target dates.
pub fn ensemble_to_cdf(ens: &EnsembleField, thr: &ThresholdField) -> Result<CdfForecast> {
    ensemble_to_cdf_with(Exec::default(), ens, thr)
}

pub fn ensemble_to_cdf_with(exec: Exec, ens: &EnsembleField, thr: &ThresholdField) -> Result<CdfForecast> {
    let dates = ens.target_dates();
    counted_cdf(exec, ens, thr, |t| dates[t], Provenance::Raw)
}

/// The operational debiased forecast: member counting against hindcast
/// model-climate thresholds for each forecast date.
pub fn debiased_baseline(
    forecast: &EnsembleField,
    hindcasts: &[EnsembleField],
    available: &[CalendarDate],
    bins: usize,
) -> Result<CdfForecast> {
    let thr = model_thresholds_with(
        Exec::default(),
        hindcasts,
        forecast.target_dates(),
        forecast.lead_days(),
        bins,
        available,
    )?;
    let mut f = ensemble_to_cdf(forecast, &thr)?;
    f.set_provenance(Provenance::Debiased);
    Ok(f)
}

/// Which thresholds turn training ensembles into CDFs.
#[derive(Debug, Clone, Copy)]
pub enum ThresholdVariant<'a> {
    /// Observed climatology at the date the values verify on.
    Observed(&'a ThresholdField),
    /// Model climatology of the forecast date the hindcast was issued with.
    Model(&'a ThresholdField),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantKind {
    Observed,
    Model,
}

/// Identifies a training forecast across leads: the real-time forecast date
/// it belongs to and the hindcast year offset (0 for the forecast itself).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TrainingKey {
    pub forecast_date: CalendarDate,
    pub year_offset: u32,
}

impl TrainingKey {
    pub fn verifying_date(self) -> CalendarDate {
        self.forecast_date.minus_years(self.year_offset)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesEntry {
    pub key: TrainingKey,
    pub verifying: CalendarDate,
    pub issued: CalendarDate,
}

/// Dated training CDFs at one lead, possibly several per verifying date.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfSeries {
    grid: Arc<GridSpec>,
    variable: Variable,
    lead_days: i64,
    bins: usize,
    entries: Vec<SeriesEntry>,
    values: Vec<f64>,
    gaps: Vec<TrainingKey>,
    lookup: HashMap<TrainingKey, usize>,
}

impl CdfSeries {
    pub fn new(
        grid: Arc<GridSpec>,
        variable: Variable,
        lead_days: i64,
        bins: usize,
        entries: Vec<SeriesEntry>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if values.len() != entries.len() * grid.n_cells() * bins {
            return Err(Error::InvalidArgument("series values do not match entries".into()));
        }
        let mut lookup = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if lookup.insert(e.key, i).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate training key {:?}", e.key)));
            }
        }
        Ok(CdfSeries {
            grid,
            variable,
            lead_days,
            bins,
            entries,
            values,
            gaps: Vec::new(),
            lookup,
        })
    }

    /// Wraps a forecast as a series of real-time entries (offset 0).
    pub fn from_forecast(f: &CdfForecast) -> Result<Self> {
        let entries = f
            .dates()
            .iter()
            .map(|d| SeriesEntry {
                key: TrainingKey {
                    forecast_date: *d,
                    year_offset: 0,
                },
                verifying: *d,
                issued: d.add_days(-f.lead_days()),
            })
            .collect();
        Self::new(
            f.grid().clone(),
            f.variable(),
            f.lead_days(),
            f.bins(),
            entries,
            f.values().to_vec(),
        )
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    pub fn variable(&self) -> Variable {
        self.variable
    }

    pub fn lead_days(&self) -> i64 {
        self.lead_days
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn entries(&self) -> &[SeriesEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn gaps(&self) -> &[TrainingKey] {
        &self.gaps
    }

    pub fn find(&self, key: TrainingKey) -> Option<usize> {
        self.lookup.get(&key).copied()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.grid.n_cells() * self.bins;
        &self.values[i * n..(i + 1) * n]
    }

    pub fn cell(&self, i: usize, cell: usize) -> &[f64] {
        let start = (i * self.grid.n_cells() + cell) * self.bins;
        &self.values[start..start + self.bins]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Concatenates two series at the same lead.
    pub fn merged(&self, other: &CdfSeries) -> Result<Self> {
        if self.grid != other.grid || self.bins != other.bins || self.lead_days != other.lead_days {
            return Err(Error::Misaligned("series differ in grid, bins or lead".into()));
        }
        let entries = self.entries.iter().chain(&other.entries).copied().collect();
        let values = self.values.iter().chain(&other.values).copied().collect();
        let mut s = Self::new(
            self.grid.clone(),
            self.variable,
            self.lead_days,
            self.bins,
            entries,
            values,
        )?;
        s.gaps = self.gaps.iter().chain(&other.gaps).copied().collect();
        Ok(s)
    }

    /// The single-date forecast for `key`, if present.
    pub fn forecast_for(&self, key: TrainingKey, provenance: Provenance) -> Option<CdfForecast> {
        let i = self.find(key)?;
        CdfForecast::new(
            self.grid.clone(),
            self.variable,
            self.lead_days,
            provenance,
            self.bins,
            vec![self.entries[i].verifying],
            self.row(i).to_vec(),
        )
        .ok()
    }
}

/// Converts forecast and hindcast ensembles into dated training CDFs. Each
/// input field contributes one entry per date, keyed by (forecast date,
/// year offset) and stamped with the date it verifies on. Entries whose
/// thresholds are entirely unavailable are skipped and recorded as gaps.
pub fn hindcast_to_training_cdfs(fields: &[EnsembleField], variant: ThresholdVariant<'_>) -> Result<CdfSeries> {
    hindcast_to_training_cdfs_with(Exec::default(), fields, variant)
}

pub fn hindcast_to_training_cdfs_with(
    exec: Exec,
    fields: &[EnsembleField],
    variant: ThresholdVariant<'_>,
) -> Result<CdfSeries> {
    let first = fields
        .first()
        .ok_or_else(|| Error::InvalidArgument("no ensembles supplied".into()))?;
    let thr = match variant {
        ThresholdVariant::Observed(t) | ThresholdVariant::Model(t) => t,
    };
    let grid = first.grid().clone();
    let bins = thr.bins();
    let row_len = grid.n_cells() * bins;
    let mut entries = Vec::new();
    let mut values = Vec::new();
    let mut gaps = Vec::new();
    for field in fields {
        if field.grid() != &grid || field.lead_days() != first.lead_days() {
            return Err(Error::Misaligned("training ensembles differ in grid or lead".into()));
        }
        let dates = field.target_dates();
        let cdf = match variant {
            ThresholdVariant::Observed(_) => {
                counted_cdf(exec, field, thr, |t| field.verifying_date(t), Provenance::Raw)?
            }
            ThresholdVariant::Model(_) => counted_cdf(exec, field, thr, |t| dates[t], Provenance::Raw)?,
        };
        let offset = field.hindcast_year_offset().unwrap_or(0);
        for (t, &forecast_date) in dates.iter().enumerate() {
            let key = TrainingKey {
                forecast_date,
                year_offset: offset,
            };
            let row = cdf.cube().row(t);
            if row.iter().all(|v| v.is_nan()) {
                gaps.push(key);
                continue;
            }
            entries.push(SeriesEntry {
                key,
                verifying: field.verifying_date(t),
                issued: field.issued_date(t),
            });
            values.extend_from_slice(row);
        }
    }
    debug_assert_eq!(values.len(), entries.len() * row_len);
    let mut s = CdfSeries::new(grid, first.variable(), first.lead_days(), bins, entries, values)?;
    s.gaps = gaps;
    Ok(s)
}

impl Storable for CdfForecast {
    fn to_record(&self) -> StoreRecord {
        let mut attrs = Map::new();
        attrs.insert("lead_days".into(), self.lead_days.into());
        attrs.insert("provenance".into(), Value::from(self.provenance.label()));
        prob_to_record(FieldKind::Cdf, &self.grid, self.variable, &self.cube, attrs)
    }

    fn from_record(rec: StoreRecord, path: &Path) -> Result<Self> {
        let lead: i64 = rec.require_attr("lead_days", path)?;
        let provenance: Provenance = rec.require_attr("provenance", path)?;
        let (grid, variable, dates, bins, _, values) = prob_from_record(rec, FieldKind::Cdf, path)?;
        CdfForecast::new(grid, variable, lead, provenance, bins, dates, values)
    }
}

impl Storable for CdfSeries {
    fn to_record(&self) -> StoreRecord {
        let g = &self.grid;
        let mut attrs = Map::new();
        attrs.insert("lead_days".into(), self.lead_days.into());
        attrs.insert("entries".into(), serde_json::to_value(&self.entries).expect("entries"));
        attrs.insert("gaps".into(), serde_json::to_value(&self.gaps).expect("gaps"));
        StoreRecord {
            kind: FieldKind::CdfSeries,
            variable: self.variable,
            units: "probability".into(),
            dims: crate::griddata::store::dims(&["time", "lat", "lon", "k"]),
            shape: vec![self.entries.len(), g.n_lat(), g.n_lon(), self.bins],
            dates: self.entries.iter().map(|e| e.verifying).collect(),
            grid: (**g).clone(),
            attrs,
            data: crate::griddata::store::ArrayData::F64(self.values.clone()),
        }
    }

    fn from_record(rec: StoreRecord, path: &Path) -> Result<Self> {
        let lead: i64 = rec.require_attr("lead_days", path)?;
        let entries: Vec<SeriesEntry> = rec.require_attr("entries", path)?;
        let gaps: Vec<TrainingKey> = rec.attr("gaps")?.unwrap_or_default();
        if entries.len() != rec.dates.len() {
            return Err(Error::DimensionMismatch {
                path: path.to_path_buf(),
                message: "entry list and date list differ in length".into(),
            });
        }
        rec.expect_kind(FieldKind::CdfSeries, path)?;
        crate::griddata::store::require_dims(&rec, &["time", "lat", "lon", "k"], path)?;
        let bins = rec.shape[3];
        let grid = Arc::new(rec.grid.clone());
        let variable = rec.variable;
        let values = rec.into_f64(path)?;
        let mut s = CdfSeries::new(grid, variable, lead, bins, entries, values)?;
        s.gaps = gaps;
        Ok(s)
    }
}

#![allow(clippy::needless_range_loop)]

use serde::{Deserialize, Serialize};

use super::lstsq::{dot, LeastSquares};
use crate::cdf::{CdfForecast, CdfSeries, Provenance};
use crate::climatology::{ClimatologyField, IndicatorField};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::griddata::{CalendarDate, PERIOD_DAYS};

/// Intercept, climatology, two lagged indicators, forecast.
pub const FEATURES: usize = 5;
/// Fewer usable training rows than this falls back to the raw forecast.
pub const MIN_ROWS: usize = 10;

/// Start dates of the two lagged observation periods for a target `t` at
/// lead `lead`: `t - lead - L + 1` and `t - 2 lead - L + 2`.
pub fn lag_dates(t: CalendarDate, lead: i64) -> (CalendarDate, CalendarDate) {
    let l = PERIOD_DAYS;
    (t.add_days(-lead - l + 1), t.add_days(-2 * lead - l + 2))
}

/// Positions of everything a design row at `t` reads.
#[derive(Debug, Clone, Copy)]
struct RowIndex {
    clim: usize,
    lag1: usize,
    lag2: usize,
}

fn row_index(t: CalendarDate, lead: i64, ind: &IndicatorField, clim: &ClimatologyField) -> Option<RowIndex> {
    let (a, b) = lag_dates(t, lead);
    Some(RowIndex {
        clim: clim.position(t)?,
        lag1: ind.position(a)?,
        lag2: ind.position(b)?,
    })
}

fn features(
    ix: RowIndex,
    ind: &IndicatorField,
    clim: &ClimatologyField,
    g: usize,
    k: usize,
    f: f64,
) -> Option<[f64; FEATURES]> {
    let c = clim.cube().cell(ix.clim, g)[k];
    let o1 = ind.cube().cell(ix.lag1, g)[k];
    let o2 = ind.cube().cell(ix.lag2, g)[k];
    let x = [1.0, c, o1, o2, f];
    x.iter().all(|v| !v.is_nan()).then_some(x)
}

/// Per-(cell, bin) regression accumulators that grow as training rows become
/// usable. Bin K is never regressed.
#[derive(Debug, Clone)]
pub struct PersistenceTrainer {
    n_cells: usize,
    bins: usize,
    lead_days: i64,
    acc: Vec<LeastSquares<FEATURES>>,
    added: usize,
}

/// Fitted coefficients per (cell, bin < K) with their training row counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionWeights {
    pub date: CalendarDate,
    pub lead_days: i64,
    pub bins: usize,
    pub n_cells: usize,
    /// `(cell, k)` layout over `k < K - 1`; `None` where the fit fell back.
    pub beta: Vec<Option<[f64; FEATURES]>>,
    pub rows: Vec<usize>,
}

impl RegressionWeights {
    pub fn get(&self, cell: usize, k: usize) -> Option<[f64; FEATURES]> {
        self.beta[cell * (self.bins - 1) + k]
    }
}

impl PersistenceTrainer {
    pub fn new(n_cells: usize, bins: usize, lead_days: i64) -> Self {
        PersistenceTrainer {
            n_cells,
            bins,
            lead_days,
            acc: vec![LeastSquares::new(); n_cells * (bins - 1)],
            added: 0,
        }
    }

    pub fn entries_added(&self) -> usize {
        self.added
    }

    /// Adds training rows `(verifying date, forecast row)`; rows or cells
    /// with any missing feature or outcome are skipped.
    pub fn add(&mut self, exec: Exec, rows: &[(CalendarDate, &[f64])], ind: &IndicatorField, clim: &ClimatologyField) {
        let bins = self.bins;
        let lead = self.lead_days;
        let prepared: Vec<(RowIndex, usize, &[f64])> = rows
            .iter()
            .filter_map(|(t, r)| Some((row_index(*t, lead, ind, clim)?, ind.position(*t)?, *r)))
            .collect();
        exec.fill_chunks(&mut self.acc, bins - 1, |g, accs| {
            for (ix, pt, row) in &prepared {
                let o = ind.cube().cell(*pt, g);
                for (k, acc) in accs.iter_mut().enumerate() {
                    let f = row[g * bins + k];
                    if f.is_nan() || o[k].is_nan() {
                        continue;
                    }
                    if let Some(x) = features(*ix, ind, clim, g, k, f) {
                        acc.add_row(&x, o[k]);
                    }
                }
            }
        });
        self.added += rows.len();
    }

    pub fn fit(&self, exec: Exec, date: CalendarDate) -> RegressionWeights {
        let beta = exec.map(self.acc.len(), |i| {
            let a = &self.acc[i];
            if a.rows() < MIN_ROWS {
                None
            } else {
                a.solve().filter(|b| b.iter().all(|v| v.is_finite()))
            }
        });
        RegressionWeights {
            date,
            lead_days: self.lead_days,
            bins: self.bins,
            n_cells: self.n_cells,
            beta,
            rows: self.acc.iter().map(|a| a.rows()).collect(),
        }
    }

    /// Applies `weights` to the target row at `t_star`. Returns the clipped
    /// output and per-(cell, bin) fallback flags.
    pub fn predict(
        &self,
        weights: &RegressionWeights,
        t_star: CalendarDate,
        target: &[f64],
        ind: &IndicatorField,
        clim: &ClimatologyField,
    ) -> (Vec<f64>, Vec<bool>) {
        let bins = self.bins;
        let ix = row_index(t_star, self.lead_days, ind, clim);
        let mut out = target.to_vec();
        let mut fallback = vec![false; target.len()];
        for g in 0..self.n_cells {
            if target[g * bins..(g + 1) * bins].iter().any(|v| v.is_nan()) {
                continue;
            }
            for k in 0..bins - 1 {
                let f = target[g * bins + k];
                let pred = ix
                    .and_then(|ix| features(ix, ind, clim, g, k, f))
                    .zip(weights.get(g, k))
                    .map(|(x, b)| dot(&x, &b).clamp(0.0, 1.0));
                match pred {
                    Some(p) => out[g * bins + k] = p,
                    None => fallback[g * bins + k] = true,
                }
            }
        }
        (out, fallback)
    }
}

#[derive(Debug, Clone)]
pub struct PersistenceOutput {
    pub forecast: CdfForecast,
    pub weights: RegressionWeights,
    /// (cell, bin) entries that kept the raw forecast value.
    pub fallback: Vec<bool>,
}

impl PersistenceOutput {
    pub fn fallback_count(&self) -> usize {
        self.fallback.iter().filter(|f| **f).count()
    }
}

/// Persistence++ for every date of `target`, trained on all of `training`.
/// Callers restrict the training series to what is observable.
pub fn persistencepp(
    target: &CdfForecast,
    t_star: CalendarDate,
    training: &CdfSeries,
    ind: &IndicatorField,
    clim: &ClimatologyField,
) -> Result<PersistenceOutput> {
    if target.grid() != training.grid() || target.bins() != training.bins() {
        return Err(Error::Misaligned(
            "target and training CDFs differ in grid or bins".into(),
        ));
    }
    if target.lead_days() != training.lead_days() {
        return Err(Error::Misaligned(format!(
            "target lead {} but training lead {}",
            target.lead_days(),
            training.lead_days()
        )));
    }
    let t = target
        .position(t_star)
        .ok_or_else(|| Error::NoData(format!("no target forecast for {t_star}")))?;
    let mut trainer = PersistenceTrainer::new(target.grid().n_cells(), target.bins(), target.lead_days());
    let rows: Vec<(CalendarDate, &[f64])> = training
        .entries()
        .iter()
        .enumerate()
        .map(|(i, e)| (e.verifying, training.row(i)))
        .collect();
    trainer.add(Exec::default(), &rows, ind, clim);
    let weights = trainer.fit(Exec::default(), t_star);
    let (out, fallback) = trainer.predict(&weights, t_star, target.cube().row(t), ind, clim);
    if fallback.iter().all(|f| *f) {
        log::warn!("Persistence++ fell back to the raw forecast everywhere for {t_star}");
    }
    let forecast = CdfForecast::new(
        target.grid().clone(),
        target.variable(),
        target.lead_days(),
        Provenance::PersistencePlusPlus,
        target.bins(),
        vec![t_star],
        out,
    )?;
    Ok(PersistenceOutput {
        forecast,
        weights,
        fallback,
    })
}

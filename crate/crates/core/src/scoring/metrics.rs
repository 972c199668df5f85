use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::mask::EvalMask;
use crate::cdf::CdfForecast;
use crate::climatology::IndicatorField;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::griddata::{CalendarDate, DatedCube, GridSpec};

/// `sum_k (F(k) - O(k))^2`, including the k = K term.
pub fn rps_cell(f: &[f64], o: &[f64]) -> f64 {
    f.iter().zip(o).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// RPS of the climatological forecast `F(k) = k/K`.
pub fn clim_rps_cell(o: &[f64]) -> f64 {
    let bins = o.len() as f64;
    o.iter()
        .enumerate()
        .map(|(k, b)| {
            let c = (k + 1) as f64 / bins;
            (c - b) * (c - b)
        })
        .sum()
}

/// Per-date scores; `None` where nothing could be scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DateSeries {
    pub dates: Vec<CalendarDate>,
    pub values: Vec<Option<f64>>,
}

impl DateSeries {
    /// Values that are present, in date order.
    pub fn present(&self) -> Vec<f64> {
        self.values.iter().flatten().copied().collect()
    }

    /// Equal-weight mean over scored dates.
    pub fn mean(&self) -> Option<f64> {
        let v = self.present();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn filter(&self, keep: impl Fn(CalendarDate) -> bool) -> DateSeries {
        let (dates, values) = self
            .dates
            .iter()
            .zip(&self.values)
            .filter(|(d, _)| keep(**d))
            .map(|(d, v)| (*d, *v))
            .unzip();
        DateSeries { dates, values }
    }
}

fn check_grids(f: &CdfForecast, o: &IndicatorField, mask: Option<&EvalMask>) -> Result<()> {
    if f.grid() != o.grid() {
        return Err(Error::Misaligned("forecast and indicators on different grids".into()));
    }
    if f.bins() != o.bins() {
        return Err(Error::Misaligned(format!(
            "forecast has {} bins, indicators {}",
            f.bins(),
            o.bins()
        )));
    }
    if let Some(m) = mask {
        if m.grid() != f.grid() {
            return Err(Error::Misaligned("mask on a different grid".into()));
        }
    }
    Ok(())
}

/// Forecast and observation rows for one cell on `date`, if both exist.
fn pair<'a>(f: &'a CdfForecast, o: &'a IndicatorField, date: CalendarDate, g: usize) -> Option<(&'a [f64], &'a [f64])> {
    Some((f.get_at(date, g)?, o.get_at(date, g)?))
}

/// RPS per (date, cell) on the forecast's dates; NaN where an input is missing.
pub fn rps(f: &CdfForecast, o: &IndicatorField) -> Result<DatedCube<f64>> {
    check_grids(f, o, None)?;
    let n = f.grid().n_cells();
    let mut values = vec![f64::NAN; f.dates().len() * n];
    Exec::default().fill_chunks(&mut values, n, |t, row| {
        let d = f.dates()[t];
        for (g, v) in row.iter_mut().enumerate() {
            if let Some((a, b)) = pair(f, o, d, g) {
                *v = rps_cell(a, b);
            }
        }
    });
    DatedCube::new(f.dates().to_vec(), n, 1, values)
}

/// Weighted (numerator, denominator) sums on one date.
fn weighted_sums(
    f: &CdfForecast,
    o: &IndicatorField,
    mask: &EvalMask,
    date: CalendarDate,
    score: impl Fn(&[f64], &[f64]) -> (f64, f64),
) -> Option<(f64, f64)> {
    let grid = f.grid();
    let mut num = 0.0;
    let mut den = 0.0;
    let mut any = false;
    for g in mask.cells(date) {
        if let Some((a, b)) = pair(f, o, date, g) {
            let w = grid.weight(g);
            let (s, r) = score(a, b);
            num += w * s;
            den += w * r;
            any = true;
        }
    }
    any.then_some((num, den))
}

fn skill(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| 1.0 - num / den)
}

fn per_date_skill(
    f: &CdfForecast,
    o: &IndicatorField,
    mask: &EvalMask,
    score: impl Fn(&[f64], &[f64]) -> (f64, f64) + Sync + Send,
) -> Result<DateSeries> {
    check_grids(f, o, Some(mask))?;
    let dates = f.dates().to_vec();
    let values = Exec::default().map(dates.len(), |t| {
        weighted_sums(f, o, mask, dates[t], &score).and_then(|(n, d)| skill(n, d))
    });
    Ok(DateSeries { dates, values })
}

/// Per-date `1 - sum_g w_g RPS / sum_g w_g RPS_clim` with `w_g = cos(lat)`.
pub fn rpss_global(f: &CdfForecast, o: &IndicatorField, mask: &EvalMask) -> Result<DateSeries> {
    per_date_skill(f, o, mask, |a, b| (rps_cell(a, b), clim_rps_cell(b)))
}

/// Period-aggregated RPSS: one ratio of sums over both dates and cells.
pub fn rpss_aggregated(
    f: &CdfForecast,
    o: &IndicatorField,
    mask: &EvalMask,
    dates: &[CalendarDate],
) -> Result<Option<f64>> {
    check_grids(f, o, Some(mask))?;
    let sums = Exec::default().map(dates.len(), |t| {
        weighted_sums(f, o, mask, dates[t], |a, b| (rps_cell(a, b), clim_rps_cell(b)))
    });
    let mut num = 0.0;
    let mut den = 0.0;
    let mut any = false;
    for (n, d) in sums.into_iter().flatten() {
        num += n;
        den += d;
        any = true;
    }
    Ok(if any { skill(num, den) } else { None })
}

/// Per-cell RPSS over a test period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialSkill {
    pub values: Vec<Option<f64>>,
}

impl SpatialSkill {
    /// Share of scored cells with positive skill.
    pub fn fraction_improved(&self) -> Option<f64> {
        let scored: Vec<f64> = self.values.iter().flatten().copied().collect();
        (!scored.is_empty()).then(|| scored.iter().filter(|v| **v > 0.0).count() as f64 / scored.len() as f64)
    }

    /// Share of cells where `self` beats `other`, among cells both score.
    pub fn fraction_better_than(&self, other: &SpatialSkill) -> Option<f64> {
        let pairs: Vec<(f64, f64)> = self
            .values
            .iter()
            .zip(&other.values)
            .filter_map(|(a, b)| Some(((*a)?, (*b)?)))
            .collect();
        (!pairs.is_empty()).then(|| pairs.iter().filter(|(a, b)| a > b).count() as f64 / pairs.len() as f64)
    }
}

pub fn rpss_spatial(
    f: &CdfForecast,
    o: &IndicatorField,
    mask: &EvalMask,
    dates: &[CalendarDate],
) -> Result<SpatialSkill> {
    check_grids(f, o, Some(mask))?;
    let values = Exec::default().map(f.grid().n_cells(), |g| {
        let mut num = 0.0;
        let mut den = 0.0;
        let mut any = false;
        for d in dates {
            if !mask.includes(*d, g) {
                continue;
            }
            if let Some((a, b)) = pair(f, o, *d, g) {
                num += rps_cell(a, b);
                den += clim_rps_cell(b);
                any = true;
            }
        }
        if any {
            skill(num, den)
        } else {
            None
        }
    });
    Ok(SpatialSkill { values })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtremeBin {
    /// Verifying in the highest bin: the event `y >= q(K-1)`.
    Top,
    /// Verifying in the lowest bin: the event `y < q(1)`.
    Bottom,
}

impl ExtremeBin {
    /// Zero-based index of the cumulative bin the event is read from.
    pub fn index(self, bins: usize) -> usize {
        match self {
            ExtremeBin::Top => bins - 2,
            ExtremeBin::Bottom => 0,
        }
    }
}

/// Brier score of one cell and its climatological baseline.
pub fn brier_cell(f: &[f64], o: &[f64], bin: ExtremeBin) -> (f64, f64) {
    let bins = f.len();
    let k = bin.index(bins);
    let c = (k + 1) as f64 / bins as f64;
    ((f[k] - o[k]).powi(2), (c - o[k]).powi(2))
}

/// Per-date weighted Brier skill score of an extreme bin.
pub fn bss_extreme(f: &CdfForecast, o: &IndicatorField, mask: &EvalMask, bin: ExtremeBin) -> Result<DateSeries> {
    per_date_skill(f, o, mask, move |a, b| brier_cell(a, b, bin))
}

/// Mean probabilistic bias `F(k) - O(k)` per (cell, bin).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasMap {
    pub bins: usize,
    #[serde(skip)]
    pub grid: Option<Arc<GridSpec>>,
    /// (cell, k) layout; NaN where no date was scored (serialised as null).
    pub values: Vec<Option<f64>>,
    pub counts: Vec<usize>,
}

impl BiasMap {
    pub fn get(&self, cell: usize, k: usize) -> Option<f64> {
        self.values[cell * self.bins + k]
    }

    /// Mean over cells where `keep(cell)` of the bias in bin `k`.
    pub fn mean_bin(&self, k: usize, keep: impl Fn(usize) -> bool) -> Option<f64> {
        let v: Vec<f64> = (0..self.counts.len())
            .filter(|g| keep(*g))
            .filter_map(|g| self.get(g, k))
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

pub fn bias_map(f: &CdfForecast, o: &IndicatorField, dates: &[CalendarDate]) -> Result<BiasMap> {
    check_grids(f, o, None)?;
    let bins = f.bins();
    let per_cell = Exec::default().map(f.grid().n_cells(), |g| {
        let mut sum = vec![0.0; bins];
        let mut n = 0usize;
        for d in dates {
            if let Some((a, b)) = pair(f, o, *d, g) {
                for k in 0..bins {
                    sum[k] += a[k] - b[k];
                }
                n += 1;
            }
        }
        let means: Vec<Option<f64>> = sum.iter().map(|s| (n > 0).then(|| s / n as f64)).collect();
        (means, n)
    });
    let mut values = Vec::with_capacity(per_cell.len() * bins);
    let mut counts = Vec::with_capacity(per_cell.len());
    for (m, n) in per_cell {
        values.extend(m);
        counts.push(n);
    }
    Ok(BiasMap {
        bins,
        grid: Some(f.grid().clone()),
        values,
        counts,
    })
}

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::Availability;
use crate::cdf::{CdfForecast, CdfSeries, Provenance, TrainingKey};
use crate::climatology::IndicatorField;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::griddata::calendar::distance_from_delta;
use crate::griddata::CalendarDate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DebiasConfig {
    /// Half-width in days of the day-of-year window.
    pub span_days: u32,
    /// Number of consecutive issuances averaged, ending at the target lead.
    pub issuance_count: usize,
    pub training_years: u32,
}

pub const DEFAULT_CONFIG: DebiasConfig = DebiasConfig {
    span_days: 28,
    issuance_count: 1,
    training_years: 20,
};

impl DebiasConfig {
    pub fn new(span_days: u32, issuance_count: usize) -> Result<Self> {
        if span_days > 182 {
            return Err(Error::InvalidArgument(format!("span {span_days} exceeds 182 days")));
        }
        if issuance_count == 0 {
            return Err(Error::InvalidArgument("issuance count must be at least 1".into()));
        }
        Ok(DebiasConfig {
            span_days,
            issuance_count,
            training_years: 20,
        })
    }

    /// The three candidates searched by the tuner.
    pub fn candidates() -> Vec<DebiasConfig> {
        [(14, 1), (28, 1), (35, 1)]
            .into_iter()
            .map(|(s, d)| DebiasConfig::new(s, d).expect("valid candidate"))
            .collect()
    }
}

impl Default for DebiasConfig {
    fn default() -> Self {
        DEFAULT_CONFIG
    }
}

/// Training CDFs across leads plus observed indicators, indexed for repeated
/// window selection. `leads[d]` holds lead `l* - d`.
#[derive(Debug)]
pub struct DebiasTraining<'a> {
    leads: Vec<&'a CdfSeries>,
    ind: &'a IndicatorField,
    /// Indicator position of each lead-0 entry's verifying date.
    obs: Vec<Option<usize>>,
    /// `cross[d][i]`: row of lead-0 entry `i` in `leads[d]`.
    cross: Vec<Vec<Option<usize>>>,
    by_key: HashMap<TrainingKey, usize>,
}

impl<'a> DebiasTraining<'a> {
    pub fn new(leads: Vec<&'a CdfSeries>, ind: &'a IndicatorField) -> Result<Self> {
        let first = *leads
            .first()
            .ok_or_else(|| Error::InvalidArgument("no training series supplied".into()))?;
        for (d, s) in leads.iter().enumerate() {
            if s.grid() != first.grid() || s.bins() != first.bins() {
                return Err(Error::Misaligned("training series differ in grid or bins".into()));
            }
            if s.lead_days() != first.lead_days() - d as i64 {
                return Err(Error::Misaligned(format!(
                    "series {d} has lead {}, expected {}",
                    s.lead_days(),
                    first.lead_days() - d as i64
                )));
            }
        }
        if ind.grid() != first.grid() || ind.bins() != first.bins() {
            return Err(Error::Misaligned("indicators do not match the training CDFs".into()));
        }
        let obs = first.entries().iter().map(|e| ind.position(e.verifying)).collect();
        let cross = leads
            .iter()
            .map(|s| first.entries().iter().map(|e| s.find(e.key)).collect())
            .collect();
        let by_key = first.entries().iter().enumerate().map(|(i, e)| (e.key, i)).collect();
        Ok(DebiasTraining {
            leads,
            ind,
            obs,
            cross,
            by_key,
        })
    }

    pub fn series(&self) -> &CdfSeries {
        self.leads[0]
    }

    pub fn indicators(&self) -> &IndicatorField {
        self.ind
    }

    pub fn lead_days(&self) -> i64 {
        self.leads[0].lead_days()
    }

    pub fn max_issuance_count(&self) -> usize {
        self.leads.len()
    }

    pub fn find(&self, key: TrainingKey) -> Option<usize> {
        self.by_key.get(&key).copied()
    }

    /// Lead-0 entries in the Debias++ window of `t_star` that the rule allows
    /// and that exist at every averaged lead.
    pub fn select(&self, t_star: CalendarDate, cfg: &DebiasConfig, avail: &dyn Availability) -> Vec<usize> {
        let entries = self.series().entries();
        (0..entries.len())
            .filter(|&i| {
                let e = &entries[i];
                let delta = e.verifying.days_until(t_star);
                if delta <= 0 || self.obs[i].is_none() {
                    return false;
                }
                let (year_diff, day_diff) = distance_from_delta(delta);
                year_diff <= cfg.training_years as i64
                    && day_diff <= cfg.span_days as f64
                    && (0..cfg.issuance_count).all(|d| self.cross[d][i].is_some())
                    && avail.entry_usable(t_star, e)
                    && avail.observation_usable(t_star, e.verifying)
            })
            .collect()
    }

    /// Mean over the first `d*` leads of entry `i`'s row, or `None` if a lead is missing.
    fn averaged_row(&self, i: usize, count: usize) -> Option<Vec<f64>> {
        let mut rows = Vec::with_capacity(count);
        for d in 0..count {
            rows.push(self.leads[d].row(self.cross.get(d)?.get(i).copied()??));
        }
        Some(mean_rows(&rows))
    }

    /// Debias++ for the stored real-time forecast with `key`, as a
    /// retrospective run for tuning. `None` if the forecast is missing.
    pub fn run_stored(
        &self,
        key: TrainingKey,
        cfg: &DebiasConfig,
        avail: &dyn Availability,
    ) -> Option<(CalendarDate, Vec<f64>)> {
        let i = self.find(key)?;
        let target = self.averaged_row(i, cfg.issuance_count)?;
        let t = self.series().entries()[i].verifying;
        let sel = self.select(t, cfg, avail);
        let (out, _, _) = self.correct(&target, &sel, cfg, Exec::Sequential);
        Some((t, out))
    }

    /// Applies the correction for `selection` to an already averaged target
    /// row. Returns output, per-(cell, bin) mean correction, and pass-through flags.
    fn correct(
        &self,
        target: &[f64],
        selection: &[usize],
        cfg: &DebiasConfig,
        exec: Exec,
    ) -> (Vec<f64>, Vec<Option<f64>>, Vec<bool>) {
        let s0 = self.series();
        let bins = s0.bins();
        let n_cells = s0.grid().n_cells();
        let rows: Vec<(Vec<f64>, usize)> = selection
            .iter()
            .filter_map(|&i| Some((self.averaged_row(i, cfg.issuance_count)?, self.obs[i]?)))
            .collect();
        let per_cell = exec.map(n_cells, |g| {
            let mut out = target[g * bins..(g + 1) * bins].to_vec();
            let mut corr = vec![None; bins];
            let mut pass = vec![false; bins];
            if out.iter().any(|v| v.is_nan()) {
                return (out, corr, pass);
            }
            for k in 0..bins - 1 {
                let mut sum = 0.0;
                let mut n = 0usize;
                for (row, p) in &rows {
                    let f = row[g * bins + k];
                    let Some(o) = self.ind.get(*p, g) else { continue };
                    if f.is_nan() {
                        continue;
                    }
                    sum += o[k] - f;
                    n += 1;
                }
                if n == 0 {
                    pass[k] = true;
                    continue;
                }
                let c = sum / n as f64;
                corr[k] = Some(c);
                out[k] = (out[k] + c).clamp(0.0, 1.0);
            }
            (out, corr, pass)
        });
        let mut out = Vec::with_capacity(n_cells * bins);
        let mut corr = Vec::with_capacity(n_cells * bins);
        let mut pass = Vec::with_capacity(n_cells * bins);
        for (o, c, p) in per_cell {
            out.extend(o);
            corr.extend(c);
            pass.extend(p);
        }
        (out, corr, pass)
    }
}

fn mean_rows(rows: &[&[f64]]) -> Vec<f64> {
    if rows.len() == 1 {
        return rows[0].to_vec();
    }
    let n = rows.len() as f64;
    (0..rows[0].len())
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n)
        .collect()
}

#[derive(Debug, Clone)]
pub struct DebiasOutput {
    pub forecast: CdfForecast,
    /// Mean `O - F` per (cell, bin); `None` where nothing was selected.
    pub correction: Vec<Option<f64>>,
    /// (cell, bin) entries passed through uncorrected.
    pub passthrough: Vec<bool>,
    /// Training entries (lead-0 series rows) the correction used.
    pub used: Vec<usize>,
    pub config: DebiasConfig,
}

impl DebiasOutput {
    pub fn passthrough_count(&self) -> usize {
        self.passthrough.iter().filter(|p| **p).count()
    }
}

/// Debias++ for the single date `t_star`. `targets[d]` is the forecast at
/// lead `l* - d` for that date; only the first `issuance_count` are used.
pub fn debiaspp(
    targets: &[&CdfForecast],
    t_star: CalendarDate,
    training: &DebiasTraining<'_>,
    cfg: &DebiasConfig,
    avail: &dyn Availability,
) -> Result<DebiasOutput> {
    if targets.len() < cfg.issuance_count || training.max_issuance_count() < cfg.issuance_count {
        return Err(Error::InvalidArgument(format!(
            "averaging {} issuances needs that many leads of targets and training",
            cfg.issuance_count
        )));
    }
    let first = targets[0];
    if first.grid() != training.series().grid() || first.bins() != training.series().bins() {
        return Err(Error::Misaligned(
            "target and training CDFs differ in grid or bins".into(),
        ));
    }
    let rows = targets[..cfg.issuance_count]
        .iter()
        .map(|f| {
            f.position(t_star)
                .map(|t| f.cube().row(t))
                .ok_or_else(|| Error::NoData(format!("no {} forecast for {t_star}", f.provenance().label())))
        })
        .collect::<Result<Vec<_>>>()?;
    let target = mean_rows(&rows);
    let used = training.select(t_star, cfg, avail);
    if used.is_empty() {
        log::warn!("no Debias++ training dates for {t_star}; passing the forecast through");
    }
    let (out, correction, passthrough) = training.correct(&target, &used, cfg, Exec::default());
    let forecast = CdfForecast::new(
        first.grid().clone(),
        first.variable(),
        first.lead_days(),
        Provenance::DebiasPlusPlus,
        first.bins(),
        vec![t_star],
        out,
    )?;
    Ok(DebiasOutput {
        forecast,
        correction,
        passthrough,
        used,
        config: *cfg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cdf::SeriesEntry;
    use crate::correction::Unrestricted;
    use crate::griddata::{GridSpec, Variable};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn grid(n: usize) -> Arc<GridSpec> {
        Arc::new(GridSpec::new(vec![0.0], (0..n).map(|i| i as f64 * 1.5).collect(), vec![1.0; n]).unwrap())
    }

    /// Training series of forecasts verifying on `dates` (offset 0), values flat.
    fn series(grid: &Arc<GridSpec>, lead: i64, dates: &[CalendarDate], values: Vec<f64>) -> CdfSeries {
        let entries = dates
            .iter()
            .map(|d| SeriesEntry {
                key: TrainingKey {
                    forecast_date: *d,
                    year_offset: 0,
                },
                verifying: *d,
                issued: d.add_days(-lead),
            })
            .collect();
        CdfSeries::new(grid.clone(), Variable::Temperature, lead, 5, entries, values).unwrap()
    }

    fn target(grid: &Arc<GridSpec>, t: CalendarDate, v: Vec<f64>) -> CdfForecast {
        CdfForecast::new(grid.clone(), Variable::Temperature, 19, Provenance::Raw, 5, vec![t], v).unwrap()
    }

    #[test]
    fn overconfident_forecast_is_pulled_to_observed_rate() {
        let g = grid(1);
        let t_star = CalendarDate::ymd(2020, 6, 1);
        let dates: Vec<CalendarDate> = (1..=10).map(|y| CalendarDate::ymd(2020 - y, 6, 1)).collect();
        let s = series(&g, 19, &dates, [0.9, 0.9, 0.9, 0.9, 1.0].repeat(10));
        let ov: Vec<f64> = (0..10)
            .flat_map(|i| {
                if i % 2 == 0 {
                    [1.0; 5]
                } else {
                    [0.0, 0.0, 0.0, 0.0, 1.0]
                }
            })
            .collect();
        let ind = IndicatorField::new(g.clone(), Variable::Temperature, 5, dates.clone(), ov).unwrap();
        let tr = DebiasTraining::new(vec![&s], &ind).unwrap();
        let f = target(&g, t_star, vec![0.9, 0.9, 0.9, 0.9, 1.0]);
        let out = debiaspp(&[&f], t_star, &tr, &DebiasConfig::new(14, 1).unwrap(), &Unrestricted).unwrap();
        for k in 0..4 {
            assert!((out.forecast.get(0, 0).unwrap()[k] - 0.5).abs() < 1e-12);
        }
        assert_eq!(out.forecast.get(0, 0).unwrap()[4], 1.0);
        assert_eq!(out.used.len(), 10);
    }

    #[test]
    fn clips_and_passes_through() {
        let g = grid(1);
        let t_star = CalendarDate::ymd(2020, 6, 1);
        let d = [CalendarDate::ymd(2019, 6, 1)];
        let s = series(&g, 19, &d, vec![0.3, 0.4, 0.5, 0.6, 1.0]);
        let ind = IndicatorField::new(
            g.clone(),
            Variable::Temperature,
            5,
            d.to_vec(),
            vec![0.0, 0.0, 1.0, 1.0, 1.0],
        )
        .unwrap();
        let tr = DebiasTraining::new(vec![&s], &ind).unwrap();
        let f = target(&g, t_star, vec![0.2, 0.3, 0.6, 0.7, 1.0]);
        let out = debiaspp(&[&f], t_star, &tr, &DebiasConfig::new(14, 1).unwrap(), &Unrestricted).unwrap();
        let v = out.forecast.get(0, 0).unwrap();
        assert_eq!(v[0], 0.0); // 0.2 - 0.3 clipped
        assert!((v[2] - 1.0).abs() < 1e-12); // 0.6 + 0.5 clipped
        assert_eq!(out.correction[0], Some(-0.3));

        // a target far from any training day of year passes through
        let far = CalendarDate::ymd(2020, 12, 1);
        let f = target(&g, far, vec![0.2, 0.3, 0.6, 0.7, 1.0]);
        let out = debiaspp(&[&f], far, &tr, &DebiasConfig::new(14, 1).unwrap(), &Unrestricted).unwrap();
        assert_eq!(out.forecast.get(0, 0).unwrap(), f.get(0, 0).unwrap());
        assert_eq!(out.passthrough_count(), 4);
    }

    #[test]
    fn averages_issuances() {
        let g = grid(1);
        let t_star = CalendarDate::ymd(2020, 6, 1);
        let d = [CalendarDate::ymd(2019, 6, 1)];
        let s19 = series(&g, 19, &d, vec![0.2, 0.4, 0.6, 0.8, 1.0]);
        let s18 = series(&g, 18, &d, vec![0.4, 0.6, 0.8, 1.0, 1.0]);
        let ind = IndicatorField::new(
            g.clone(),
            Variable::Temperature,
            5,
            d.to_vec(),
            vec![0.3, 0.5, 0.7, 0.9, 1.0],
        )
        .unwrap();
        let tr = DebiasTraining::new(vec![&s19, &s18], &ind).unwrap();
        let f19 = target(&g, t_star, vec![0.1, 0.2, 0.3, 0.4, 1.0]);
        let f18 = target(&g, t_star, vec![0.3, 0.4, 0.5, 0.6, 1.0]);
        let cfg = DebiasConfig::new(14, 2).unwrap();
        let out = debiaspp(&[&f19, &f18], t_star, &tr, &cfg, &Unrestricted).unwrap();
        // mean target [0.2, 0.3, 0.4, 0.5], mean training [0.3, 0.5, 0.7, 0.9], O - F = 0
        for (a, b) in out.forecast.get(0, 0).unwrap().iter().zip([0.2, 0.3, 0.4, 0.5, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(DebiasTraining::new(vec![&s19, &s19], &ind).is_err());
    }

    proptest! {
        #[test]
        fn preclip_output_matches_oracle(
            fs in prop::collection::vec(0f64..1.0, 6),
            os in prop::collection::vec(prop::bool::ANY, 6),
            ft in 0f64..1.0,
            c in -0.2f64..0.2,
        ) {
            let g = grid(1);
            let t_star = CalendarDate::ymd(2020, 3, 10);
            let dates: Vec<CalendarDate> = (1..=6).map(|y| CalendarDate::ymd(2020 - y, 3, 10)).collect();
            let shift = |x: f64| x + c;
            let s = series(&g, 19, &dates, fs.iter().flat_map(|f| [shift(*f), 0.0, 0.0, 0.0, 1.0]).collect());
            let ind = IndicatorField::new(
                g.clone(),
                Variable::Temperature,
                5,
                dates.clone(),
                os.iter().flat_map(|o| [if *o { 1.0 } else { 0.0 }, 0.0, 0.0, 0.0, 1.0]).collect(),
            )
            .unwrap();
            let tr = DebiasTraining::new(vec![&s], &ind).unwrap();
            let f = target(&g, t_star, vec![shift(ft), 0.0, 0.0, 0.0, 1.0]);
            let out = debiaspp(&[&f], t_star, &tr, &DebiasConfig::new(28, 1).unwrap(), &Unrestricted).unwrap();
            let mean_o = os.iter().map(|o| if *o { 1.0 } else { 0.0 }).sum::<f64>() / 6.0;
            let mean_f = fs.iter().map(|f| shift(*f)).sum::<f64>() / 6.0;
            let oracle = shift(ft) + mean_o - mean_f;
            let pre = shift(ft) + out.correction[0].unwrap();
            prop_assert!((pre - oracle).abs() < 1e-12);
            prop_assert!((out.forecast.get(0, 0).unwrap()[0] - oracle.clamp(0.0, 1.0)).abs() < 1e-12);

            // one training date in the window: F* + (O_t - F_t)
            let near = [CalendarDate::ymd(2019, 3, 10)];
            let s1 = series(&g, 19, &near, vec![shift(fs[0]), 0.0, 0.0, 0.0, 1.0]);
            let o0 = if os[0] { 1.0 } else { 0.0 };
            let ind1 = IndicatorField::new(g.clone(), Variable::Temperature, 5, near.to_vec(), vec![o0, 0.0, 0.0, 0.0, 1.0]).unwrap();
            let tr1 = DebiasTraining::new(vec![&s1], &ind1).unwrap();
            let f2 = target(&g, t_star, vec![ft, 0.0, 0.0, 0.0, 1.0]);
            let out = debiaspp(&[&f2], t_star, &tr1, &DebiasConfig::new(0, 1).unwrap(), &Unrestricted).unwrap();
            prop_assert_eq!(out.used.len(), 1);
            let expected = (ft + o0 - shift(fs[0])).clamp(0.0, 1.0);
            prop_assert!((out.forecast.get(0, 0).unwrap()[0] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn cells_are_independent() {
        let g = grid(3);
        let t_star = CalendarDate::ymd(2020, 6, 1);
        let dates: Vec<CalendarDate> = (1..=4).map(|y| CalendarDate::ymd(2020 - y, 6, 3)).collect();
        let cell = |i: usize, x: f64| -> Vec<f64> { vec![x * (i + 1) as f64 / 4.0, 0.5, 0.6, 0.7, 1.0] };
        let fv: Vec<f64> = (0..4)
            .flat_map(|t| (0..3).flat_map(move |g| cell(g, 0.2 + 0.1 * t as f64)))
            .collect();
        let ov: Vec<f64> = (0..12)
            .flat_map(|i| {
                if i % 3 == 1 {
                    [1.0; 5]
                } else {
                    [0.0, 0.0, 1.0, 1.0, 1.0]
                }
            })
            .collect();
        let s = series(&g, 19, &dates, fv.clone());
        let ind = IndicatorField::new(g.clone(), Variable::Temperature, 5, dates.clone(), ov.clone()).unwrap();
        let tr = DebiasTraining::new(vec![&s], &ind).unwrap();
        let tv: Vec<f64> = (0..3).flat_map(|g| cell(g, 0.9)).collect();
        let out = debiaspp(
            &[&target(&g, t_star, tv.clone())],
            t_star,
            &tr,
            &DebiasConfig::default(),
            &Unrestricted,
        )
        .unwrap();

        let perm = [2, 0, 1];
        let permute = |v: &[f64], per: usize| -> Vec<f64> {
            v.chunks(per * 5)
                .flat_map(|row| perm.iter().flat_map(move |p| row[p * 5..p * 5 + 5].to_vec()))
                .collect()
        };
        let s2 = series(&g, 19, &dates, permute(&fv, 3));
        let ind2 = IndicatorField::new(g.clone(), Variable::Temperature, 5, dates, permute(&ov, 3)).unwrap();
        let tr2 = DebiasTraining::new(vec![&s2], &ind2).unwrap();
        let out2 = debiaspp(
            &[&target(&g, t_star, permute(&tv, 3))],
            t_star,
            &tr2,
            &DebiasConfig::default(),
            &Unrestricted,
        )
        .unwrap();
        assert_eq!(out2.forecast.values(), &permute(out.forecast.values(), 3)[..]);
    }
}

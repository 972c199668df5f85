use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::debias::{DebiasConfig, DebiasTraining, DEFAULT_CONFIG};
use super::Availability;
use crate::cdf::TrainingKey;
use crate::exec::Exec;
use crate::griddata::{CalendarDate, DAYS_PER_YEAR};
use crate::scoring::{rps_cell, EvalMask};

/// Tuning looks back three mean years.
pub const TUNING_LOOKBACK_DAYS: f64 = 3.0 * DAYS_PER_YEAR;

/// Outcome of one configuration search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tuning {
    pub config: DebiasConfig,
    /// Mean RPS per candidate, in candidate order; `None` if unscored.
    pub scores: Vec<Option<f64>>,
    /// Historical forecast dates that were scored.
    pub history: Vec<CalendarDate>,
    pub defaulted: bool,
}

/// Debias++ configuration search with retrospective runs memoised per
/// (history date, candidate). A retrospective run for history date `h`
/// uses only data available for `h` itself, so memoised results stay valid
/// as the target date advances.
#[derive(Debug, Clone)]
pub struct DebiasTuner {
    candidates: Vec<DebiasConfig>,
    memo: HashMap<(CalendarDate, usize), Option<f64>>,
}

impl DebiasTuner {
    pub fn new(candidates: Vec<DebiasConfig>) -> Self {
        DebiasTuner {
            candidates,
            memo: HashMap::new(),
        }
    }

    pub fn candidates(&self) -> &[DebiasConfig] {
        &self.candidates
    }

    /// Mean RPS over masked cells of a retrospective run, `None` if nothing scored.
    fn retro_score(
        training: &DebiasTraining<'_>,
        key: TrainingKey,
        cfg: &DebiasConfig,
        mask: &EvalMask,
        avail: &dyn Availability,
    ) -> Option<f64> {
        let (t, out) = training.run_stored(key, cfg, avail)?;
        let ind = training.indicators();
        let p = ind.position(t)?;
        let bins = training.series().bins();
        let mut sum = 0.0;
        let mut n = 0usize;
        for g in mask.cells(t) {
            let f = &out[g * bins..(g + 1) * bins];
            let Some(o) = ind.get(p, g) else { continue };
            if f.iter().any(|v| v.is_nan()) {
                continue;
            }
            sum += rps_cell(f, o);
            n += 1;
        }
        (n > 0).then(|| sum / n as f64)
    }

    pub fn select(
        &mut self,
        t_star: CalendarDate,
        training: &DebiasTraining<'_>,
        mask: &EvalMask,
        avail: &dyn Availability,
        exec: Exec,
    ) -> Tuning {
        if self.candidates.len() == 1 {
            return Tuning {
                config: self.candidates[0],
                scores: vec![None],
                history: Vec::new(),
                defaulted: false,
            };
        }
        let history: Vec<CalendarDate> = training
            .series()
            .entries()
            .iter()
            .filter(|e| {
                e.key.year_offset == 0
                    && e.verifying < t_star
                    && (e.verifying.days_until(t_star) as f64) <= TUNING_LOOKBACK_DAYS
                    && avail.entry_usable(t_star, e)
                    && avail.observation_usable(t_star, e.verifying)
            })
            .map(|e| e.key.forecast_date)
            .collect();

        let missing: Vec<(CalendarDate, usize)> = history
            .iter()
            .flat_map(|h| (0..self.candidates.len()).map(move |c| (*h, c)))
            .filter(|k| !self.memo.contains_key(k))
            .collect();
        let cands = &self.candidates;
        let fresh = exec.map(missing.len(), |i| {
            let (h, c) = missing[i];
            let key = TrainingKey {
                forecast_date: h,
                year_offset: 0,
            };
            Self::retro_score(training, key, &cands[c], mask, avail)
        });
        self.memo.extend(missing.into_iter().zip(fresh));

        let scores: Vec<Option<f64>> = (0..self.candidates.len())
            .map(|c| {
                let v: Vec<f64> = history.iter().filter_map(|h| self.memo[&(*h, c)]).collect();
                (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
            })
            .collect();
        let best = scores
            .iter()
            .enumerate()
            .filter_map(|(c, s)| s.map(|s| (c, s)))
            .min_by(|(a, sa), (b, sb)| {
                sa.total_cmp(sb)
                    .then(self.candidates[*a].span_days.cmp(&self.candidates[*b].span_days))
            });
        match best {
            Some((c, _)) => Tuning {
                config: self.candidates[c],
                scores,
                history,
                defaulted: false,
            },
            None => {
                log::warn!("no scoreable Debias++ history before {t_star}; using the default configuration");
                Tuning {
                    config: DEFAULT_CONFIG,
                    scores,
                    history,
                    defaulted: true,
                }
            }
        }
    }
}

/// One-shot configuration search over `candidates`.
pub fn select_debias_config(
    candidates: &[DebiasConfig],
    t_star: CalendarDate,
    training: &DebiasTraining<'_>,
    mask: &EvalMask,
    avail: &dyn Availability,
) -> Tuning {
    DebiasTuner::new(candidates.to_vec()).select(t_star, training, mask, avail, Exec::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cdf::{CdfSeries, SeriesEntry};
    use crate::climatology::IndicatorField;
    use crate::correction::Unrestricted;
    use crate::griddata::{GridSpec, Variable};
    use std::sync::Arc;

    fn flat_case(
        n: usize,
        f_of: impl Fn(usize) -> f64,
        o_of: impl Fn(usize) -> f64,
    ) -> (CdfSeries, IndicatorField, Vec<CalendarDate>) {
        let grid = Arc::new(GridSpec::new(vec![0.0], vec![0.0], vec![1.0]).unwrap());
        let start = CalendarDate::ymd(2000, 1, 3);
        let dates: Vec<CalendarDate> = (0..n).map(|i| start.add_days(7 * i as i64)).collect();
        let entries = dates
            .iter()
            .map(|d| SeriesEntry {
                key: TrainingKey {
                    forecast_date: *d,
                    year_offset: 0,
                },
                verifying: *d,
                issued: d.add_days(-19),
            })
            .collect();
        let fv = (0..n).flat_map(|i| [f_of(i), f_of(i), f_of(i), f_of(i), 1.0]).collect();
        let ov = (0..n).flat_map(|i| [o_of(i), o_of(i), o_of(i), o_of(i), 1.0]).collect();
        let s = CdfSeries::new(grid.clone(), Variable::Temperature, 19, 5, entries, fv).unwrap();
        let ind = IndicatorField::new(grid, Variable::Temperature, 5, dates.clone(), ov).unwrap();
        (s, ind, dates)
    }

    #[test]
    fn single_candidate_and_empty_history() {
        let (s, ind, dates) = flat_case(20, |_| 0.5, |_| 0.0);
        let tr = DebiasTraining::new(vec![&s], &ind).unwrap();
        let mask = EvalMask::new(s.grid().clone(), Variable::Temperature).unwrap();
        let one = [DebiasConfig::new(35, 1).unwrap()];
        assert_eq!(
            select_debias_config(&one, dates[10], &tr, &mask, &Unrestricted).config,
            one[0]
        );
        let t = select_debias_config(&DebiasConfig::candidates(), dates[0], &tr, &mask, &Unrestricted);
        assert!(t.defaulted);
        assert_eq!(t.config, DEFAULT_CONFIG);
    }

    #[test]
    fn ties_go_to_the_smallest_span() {
        // bias is constant, so every span corrects perfectly
        let (s, ind, dates) = flat_case(300, |_| 0.7, |_| 0.5);
        let tr = DebiasTraining::new(vec![&s], &ind).unwrap();
        let mask = EvalMask::new(s.grid().clone(), Variable::Temperature).unwrap();
        let t = select_debias_config(&DebiasConfig::candidates(), dates[299], &tr, &mask, &Unrestricted);
        assert!(!t.defaulted);
        assert_eq!(t.config.span_days, 14);
        assert!(t.scores.iter().all(|s| s.is_some()));
    }

    #[test]
    fn memo_is_reused() {
        let (s, ind, dates) = flat_case(300, |i| 0.3 + 0.4 * ((i / 5) % 2) as f64, |i| ((i / 3) % 2) as f64);
        let tr = DebiasTraining::new(vec![&s], &ind).unwrap();
        let mask = EvalMask::new(s.grid().clone(), Variable::Temperature).unwrap();
        let mut tuner = DebiasTuner::new(DebiasConfig::candidates());
        let a = tuner.select(dates[250], &tr, &mask, &Unrestricted, Exec::default());
        let before = tuner.memo.len();
        let b = tuner.select(dates[251], &tr, &mask, &Unrestricted, Exec::Sequential);
        assert_eq!(tuner.memo.len(), before + 3);
        let fresh = select_debias_config(&DebiasConfig::candidates(), dates[251], &tr, &mask, &Unrestricted);
        assert_eq!(b, fresh);
        assert!(a.history.len() >= 150);
    }
}

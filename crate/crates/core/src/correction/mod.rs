//! The two learned corrections and Debias++ configuration selection.

mod debias;
mod lstsq;
mod persistence;
mod select;

pub use debias::{debiaspp, DebiasConfig, DebiasOutput, DebiasTraining, DEFAULT_CONFIG};
pub use lstsq::{LeastSquares, RANK_TOLERANCE};
pub use persistence::{
    lag_dates, persistencepp, PersistenceOutput, PersistenceTrainer, RegressionWeights, FEATURES, MIN_ROWS,
};
pub use select::{select_debias_config, DebiasTuner, Tuning, TUNING_LOOKBACK_DAYS};

use crate::cdf::SeriesEntry;
use crate::griddata::CalendarDate;

/// Which training data a forecast for `target` may read.
pub trait Availability: Sync {
    fn entry_usable(&self, target: CalendarDate, entry: &SeriesEntry) -> bool;
    fn observation_usable(&self, target: CalendarDate, period_start: CalendarDate) -> bool;
}

/// No restriction: the caller has already filtered the training data.
#[derive(Debug, Clone, Copy, Default)]
pub struct Unrestricted;

impl Availability for Unrestricted {
    fn entry_usable(&self, _: CalendarDate, _: &SeriesEntry) -> bool {
        true
    }

    fn observation_usable(&self, _: CalendarDate, _: CalendarDate) -> bool {
        true
    }
}

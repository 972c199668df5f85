//! Grids, calendars, field containers, the on-disk store and the synthetic
//! world generator.

pub mod calendar;
pub mod field;
pub mod grid;
pub mod store;
pub mod synth;

pub use calendar::{day_of_year_distance, CalendarDate, Season, DAYS_PER_YEAR, PERIOD_DAYS};
pub use field::{DateIndex, DatedCube, EnsembleField, ObservationField};
pub use grid::{GridSpec, Variable};
pub use store::{read_store, write_store, FieldKind, Storable};
pub use synth::{generate_synthetic_world, BiasProfile, SynthConfig, SyntheticWorld};

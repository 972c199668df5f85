//! Probabilistic bias correction for gridded subseasonal ensemble forecasts.
//!
//! The crate turns deterministic ensembles into quintile CDF forecasts, corrects
//! them with two learned post-processors (an additive windowed debiasing and a
//! per-cell regression on climatology, persistence and the forecast), projects
//! the corrections back onto valid CDFs and averages them. A verification stack
//! (RPSS in its global, spatial and period-aggregated forms, extreme-bin Brier
//! skill, bias maps, bootstrap intervals) and a rolling-origin replay driver with
//! strict observability cutoffs complete the toolkit.
//!
//! Everything can be exercised on a synthetic world with injectable bias, see
//! [`griddata::synth`].

pub mod cdf;
pub mod climatology;
pub mod correction;
pub mod error;
pub mod exec;
pub mod floods;
pub mod griddata;
pub mod pipeline;
pub mod projection;
pub mod scoring;

pub use error::{Error, Result};
pub use exec::Exec;
pub use griddata::{CalendarDate, GridSpec, Variable};

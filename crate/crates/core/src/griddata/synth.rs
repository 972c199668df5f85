//! Synthetic weather with controllable systematic forecast error.
//!
//! Observations are a seasonal cycle plus two noise components: a daily
//! lag-1 autoregressive signal `a` that the forecasts know, and an
//! independent component `e` that they do not. Ensemble members share the
//! signal and draw their own `e`, so with a zero bias profile and unit spread
//! the members are exchangeable with the observation (a calibrated ensemble),
//! and with zero noise every member equals the observation.
//!
//! The bias profile then distorts members by an additive offset (constant,
//! latitude gradient and a periodic day-of-year term), by scaling member noise,
//! and by a percentile-space shift: a member at climatological percentile `u`
//! is moved to `u - shift` unless it already sits below `shift`. For
//! `shift = 1/K` this moves every member down one quantile bin, which adds
//! exactly `1/K` probability to each bin of the CDF forecast below the top.

use std::f64::consts::PI;
use std::sync::Arc;

use chrono::Weekday;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

use super::{CalendarDate, EnsembleField, GridSpec, ObservationField, Variable, DAYS_PER_YEAR};

/// Minimum world length: 20 climatology years plus 3 tuning years.
pub const MIN_YEARS: u32 = 23;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BiasProfile {
    /// Additive offset in physical units.
    pub constant: f64,
    /// Extra offset varying linearly from `-g/2` at the first latitude row to `+g/2` at the last.
    pub latitude_gradient: f64,
    /// Amplitude of a sinusoidal offset in day of year.
    pub seasonal_amplitude: f64,
    pub seasonal_period_days: f64,
    /// Multiplier on member noise.
    pub spread_inflation: f64,
    /// Percentile-space downward shift applied to members, in [0, 1).
    pub quantile_shift: f64,
}

impl Default for BiasProfile {
    fn default() -> Self {
        BiasProfile {
            constant: 0.0,
            latitude_gradient: 0.0,
            seasonal_amplitude: 0.0,
            seasonal_period_days: 365.0,
            spread_inflation: 1.0,
            quantile_shift: 0.0,
        }
    }
}

impl BiasProfile {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(offset: f64) -> Self {
        BiasProfile {
            constant: offset,
            ..Self::default()
        }
    }

    /// Additive offset for a cell at relative latitude position `row_frac` in [0, 1].
    pub fn offset(&self, row_frac: f64, day_of_year: u32) -> f64 {
        let mut b = self.constant + self.latitude_gradient * (row_frac - 0.5);
        if self.seasonal_amplitude != 0.0 {
            b += self.seasonal_amplitude * (2.0 * PI * f64::from(day_of_year) / self.seasonal_period_days).sin();
        }
        b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub grid: GridSpec,
    pub years: u32,
    pub start_year: i32,
    pub variable: Variable,
    pub lead_days: i64,
    pub members: usize,
    pub hindcast_members: usize,
    pub hindcast_years: u32,
    /// Number of trailing years that carry real-time forecasts.
    pub forecast_years: u32,
    /// Weekdays of forecast target dates.
    pub target_weekdays: Vec<Weekday>,
    /// Standard deviation of the predictable signal.
    pub signal_sd: f64,
    /// Standard deviation of the unpredictable component; also member noise.
    pub noise_sd: f64,
    /// Day-to-day autocorrelation of the signal.
    pub persistence: f64,
    pub bias: BiasProfile,
}

impl SynthConfig {
    pub fn new(seed: u64, grid: GridSpec, years: u32, bias: BiasProfile) -> Self {
        SynthConfig {
            seed,
            grid,
            years,
            start_year: 2000,
            variable: Variable::Temperature,
            lead_days: 19,
            members: 21,
            hindcast_members: 11,
            hindcast_years: 20,
            forecast_years: years.saturating_sub(20).max(1),
            target_weekdays: vec![Weekday::Mon, Weekday::Fri],
            signal_sd: 1.5,
            noise_sd: 1.0,
            persistence: 0.95,
            bias,
        }
    }

    pub fn first_date(&self) -> CalendarDate {
        CalendarDate::ymd(self.start_year, 1, 1)
    }

    pub fn last_date(&self) -> CalendarDate {
        CalendarDate::ymd(self.start_year + self.years as i32 - 1, 12, 31)
    }

    /// Forecast target dates: the configured weekdays in the trailing
    /// forecast years, leap days excluded.
    pub fn forecast_dates(&self) -> Vec<CalendarDate> {
        let first_year = self.start_year + (self.years - self.forecast_years) as i32;
        let mut d = CalendarDate::ymd(first_year, 1, 1);
        let end = self.last_date();
        let mut out = Vec::new();
        while d <= end {
            if self.target_weekdays.contains(&d.weekday()) && !d.is_leap_day() {
                out.push(d);
            }
            d = d.add_days(1);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticWorld {
    pub observations: ObservationField,
    pub forecasts: EnsembleField,
    /// One field per year offset, 1..=hindcast_years.
    pub hindcasts: Vec<EnsembleField>,
}

struct Climate {
    base: f64,
    amplitude: f64,
    floor_zero: bool,
}

fn climate(variable: Variable, grid: &GridSpec, cell: usize) -> Climate {
    let lat = grid.cell_lat(cell);
    let row = cell / grid.n_lon();
    match variable {
        Variable::Temperature => Climate {
            base: 300.0 - 0.3 * lat.abs(),
            amplitude: 2.0 + 0.1 * lat.abs(),
            floor_zero: false,
        },
        Variable::Precipitation => Climate {
            // every seventh row is desert: the weekly total is mostly zero
            base: if row % 7 == 3 { -20.0 } else { 25.0 + 0.1 * lat.abs() },
            amplitude: 8.0,
            floor_zero: true,
        },
        Variable::Mslp => Climate {
            base: 101_325.0 - 10.0 * lat,
            amplitude: 300.0,
            floor_zero: false,
        },
    }
}

/// Scale of `signal_sd` / `noise_sd` / offsets relative to temperature units.
fn unit_scale(variable: Variable) -> f64 {
    match variable {
        Variable::Temperature => 1.0,
        Variable::Precipitation => 4.0,
        Variable::Mslp => 100.0,
    }
}

fn seasonal(date: CalendarDate, c: &Climate) -> f64 {
    let phase = (date.serial() as f64).rem_euclid(DAYS_PER_YEAR) / DAYS_PER_YEAR;
    c.base + c.amplitude * (2.0 * PI * phase).cos()
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn stream_rng(seed: u64, cell: usize, component: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((cell as u64) << 10) | component);
    rng
}

struct MemberRecipe<'a> {
    cfg: &'a SynthConfig,
    climate: Climate,
    row_frac: f64,
    obs_sd: f64,
    scale: f64,
    std_normal: Normal,
}

impl MemberRecipe<'_> {
    /// Member value given the verifying date's signal-bearing value `clim + a`.
    fn member(&self, date: CalendarDate, clim: f64, with_signal: f64, noise: f64) -> f64 {
        let bias = &self.cfg.bias;
        let mut x = with_signal + bias.spread_inflation * noise;
        if bias.quantile_shift > 0.0 && self.obs_sd > 0.0 {
            let u = self.std_normal.cdf((x - clim) / self.obs_sd);
            let shifted = if u < bias.quantile_shift {
                u
            } else {
                u - bias.quantile_shift
            };
            x = clim + self.obs_sd * self.std_normal.inverse_cdf(shifted.clamp(1e-12, 1.0 - 1e-12));
        }
        x += self.scale * bias.offset(self.row_frac, date.day_of_year());
        if self.climate.floor_zero {
            x = x.max(0.0);
        }
        x
    }
}

/// Builds observations, real-time forecasts and hindcasts. Deterministic in
/// `cfg.seed`; every cell and component draws from its own ChaCha stream.
pub fn generate_synthetic_world(cfg: &SynthConfig) -> Result<SyntheticWorld> {
    if cfg.years < MIN_YEARS {
        return Err(Error::InvalidArgument(format!(
            "synthetic world needs at least {MIN_YEARS} years, got {}",
            cfg.years
        )));
    }
    if cfg.forecast_years == 0 || cfg.forecast_years > cfg.years {
        return Err(Error::InvalidArgument("forecast_years must be within 1..=years".into()));
    }
    if cfg.members == 0 || cfg.hindcast_members == 0 {
        return Err(Error::InvalidArgument("member counts must be positive".into()));
    }
    if !(0.0..1.0).contains(&cfg.bias.quantile_shift) {
        return Err(Error::InvalidArgument("quantile_shift must lie in [0, 1)".into()));
    }
    if !(-1.0..1.0).contains(&cfg.persistence) {
        return Err(Error::InvalidArgument("persistence must lie in (-1, 1)".into()));
    }

    let grid = Arc::new(cfg.grid.clone());
    let n_cells = grid.n_cells();
    let first = cfg.first_date();
    let n_days = (first.days_until(cfg.last_date()) + 1) as usize;
    let obs_dates: Vec<CalendarDate> = (0..n_days).map(|i| first.add_days(i as i64)).collect();
    let fc_dates = cfg.forecast_dates();
    let scale = unit_scale(cfg.variable);
    let signal_sd = cfg.signal_sd * scale;
    let noise_sd = cfg.noise_sd * scale;
    let innovation = (1.0 - cfg.persistence * cfg.persistence).sqrt() * signal_sd;
    let n_hind = cfg.hindcast_years as usize;

    let mut obs = vec![0f32; n_days * n_cells];
    let mut fc = vec![0f32; fc_dates.len() * cfg.members * n_cells];
    let mut hind: Vec<Vec<f32>> = (0..n_hind)
        .map(|_| vec![0f32; fc_dates.len() * cfg.hindcast_members * n_cells])
        .collect();

    let mut signal = vec![0f64; n_days];
    let mut clim = vec![0f64; n_days];
    for cell in 0..n_cells {
        let recipe = MemberRecipe {
            cfg,
            climate: climate(cfg.variable, &grid, cell),
            row_frac: if grid.n_lat() > 1 {
                (cell / grid.n_lon()) as f64 / (grid.n_lat() - 1) as f64
            } else {
                0.5
            },
            obs_sd: (signal_sd * signal_sd + noise_sd * noise_sd).sqrt(),
            scale,
            std_normal: Normal::standard(),
        };

        let mut rng = stream_rng(cfg.seed, cell, 0);
        let mut a = signal_sd * normal(&mut rng);
        for (t, date) in obs_dates.iter().enumerate() {
            if t > 0 {
                a = cfg.persistence * a + innovation * normal(&mut rng);
            }
            signal[t] = a;
            clim[t] = seasonal(*date, &recipe.climate);
            let e = noise_sd * normal(&mut rng);
            let mut y = (clim[t] + a) + e;
            if recipe.climate.floor_zero {
                y = y.max(0.0);
            }
            obs[t * n_cells + cell] = y as f32;
        }

        let mut rng = stream_rng(cfg.seed, cell, 1);
        for (i, date) in fc_dates.iter().enumerate() {
            let t = first.days_until(*date) as usize;
            for m in 0..cfg.members {
                let noise = noise_sd * normal(&mut rng);
                let v = recipe.member(*date, clim[t], clim[t] + signal[t], noise);
                fc[(i * cfg.members + m) * n_cells + cell] = v as f32;
            }
        }

        for (h, buf) in hind.iter_mut().enumerate() {
            let offset = (h + 1) as u32;
            let mut rng = stream_rng(cfg.seed, cell, 2 + u64::from(offset));
            for (i, date) in fc_dates.iter().enumerate() {
                let verifying = date.minus_years(offset);
                let pos = first.days_until(verifying);
                for m in 0..cfg.hindcast_members {
                    let noise = noise_sd * normal(&mut rng);
                    let v = if pos < 0 {
                        f32::NAN
                    } else {
                        let t = pos as usize;
                        recipe.member(verifying, clim[t], clim[t] + signal[t], noise) as f32
                    };
                    buf[(i * cfg.hindcast_members + m) * n_cells + cell] = v;
                }
            }
        }
    }

    let observations = ObservationField::new(grid.clone(), cfg.variable, obs_dates, obs)?;
    let forecasts = EnsembleField::new(
        grid.clone(),
        cfg.variable,
        cfg.lead_days,
        fc_dates.clone(),
        cfg.members,
        None,
        fc,
    )?;
    let hindcasts = hind
        .into_iter()
        .enumerate()
        .map(|(h, values)| {
            EnsembleField::new(
                grid.clone(),
                cfg.variable,
                cfg.lead_days,
                fc_dates.clone(),
                cfg.hindcast_members,
                Some((h + 1) as u32),
                values,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SyntheticWorld {
        observations,
        forecasts,
        hindcasts,
    })
}

//! Proleptic-Gregorian dates and the day-of-year distance used to select
//! training windows.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, Months, NaiveDate, Weekday};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Mean tropical year length in days.
pub const DAYS_PER_YEAR: f64 = 365.242199;

/// Length of a verification period in days.
pub const PERIOD_DAYS: i64 = 7;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CalendarDate(NaiveDate);

impl CalendarDate {
    pub fn new(year: i32, month: u32, day: u32) -> Result<Self> {
        NaiveDate::from_ymd_opt(year, month, day)
            .map(CalendarDate)
            .ok_or_else(|| Error::InvalidArgument(format!("no such date {year}-{month}-{day}")))
    }

    /// Panicking constructor for literals in tests and examples.
    pub fn ymd(year: i32, month: u32, day: u32) -> Self {
        Self::new(year, month, day).expect("valid calendar date")
    }

    pub fn try_ymd(year: i32, month: u32, day: u32) -> Option<Self> {
        NaiveDate::from_ymd_opt(year, month, day).map(CalendarDate)
    }

    /// Serial day number; day 1 is 0001-01-01.
    pub fn serial(self) -> i64 {
        i64::from(self.0.num_days_from_ce())
    }

    pub fn from_serial(serial: i64) -> Option<Self> {
        let days = i32::try_from(serial).ok()?;
        NaiveDate::from_num_days_from_ce_opt(days).map(CalendarDate)
    }

    /// `other - self` in days.
    pub fn days_until(self, other: CalendarDate) -> i64 {
        other.serial() - self.serial()
    }

    pub fn add_days(self, days: i64) -> Self {
        Self::from_serial(self.serial() + days).expect("date within the supported range")
    }

    pub fn year(self) -> i32 {
        self.0.year()
    }

    pub fn month(self) -> u32 {
        self.0.month()
    }

    pub fn day(self) -> u32 {
        self.0.day()
    }

    /// 1-based ordinal day within the year.
    pub fn day_of_year(self) -> u32 {
        self.0.ordinal()
    }

    pub fn weekday(self) -> Weekday {
        self.0.weekday()
    }

    pub fn is_leap_day(self) -> bool {
        self.month() == 2 && self.day() == 29
    }

    /// Same calendar position `years` earlier; Feb 29 maps to Feb 28 in
    /// non-leap years.
    pub fn minus_years(self, years: u32) -> Self {
        CalendarDate(
            self.0
                .checked_sub_months(Months::new(12 * years))
                .expect("date within the supported range"),
        )
    }

    /// The same month-day in `year`, or `None` for Feb 29 in a common year.
    pub fn with_year(self, year: i32) -> Option<Self> {
        Self::try_ymd(year, self.month(), self.day())
    }

    /// Like [`with_year`](Self::with_year) but Feb 29 falls back to Feb 28.
    pub fn with_year_clamped(self, year: i32) -> Self {
        self.with_year(year).unwrap_or_else(|| Self::ymd(year, 2, 28))
    }

    pub fn inner(self) -> NaiveDate {
        self.0
    }
}

impl From<NaiveDate> for CalendarDate {
    fn from(d: NaiveDate) -> Self {
        CalendarDate(d)
    }
}

impl fmt::Display for CalendarDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.format("%Y-%m-%d"))
    }
}

impl fmt::Debug for CalendarDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for CalendarDate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        // accept both plain dates and timestamps such as 2022-01-03T00:00:00
        let day = s.get(..10).unwrap_or(s);
        NaiveDate::parse_from_str(day, "%Y-%m-%d")
            .map(CalendarDate)
            .map_err(|e| Error::InvalidArgument(format!("bad ISO-8601 date `{s}`: {e}")))
    }
}

impl Serialize for CalendarDate {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CalendarDate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Whole-year and day-of-year separation of a training date `t` from the
/// target `t_star`, as used by the windowed debiasing filter.
///
/// `year_diff = floor((t* - t) / D)` and
/// `day_diff = 365/2 - |floor((t* - t) mod D) - 365/2|`.
pub fn day_of_year_distance(t_star: CalendarDate, t: CalendarDate) -> Result<(i64, f64)> {
    let delta = t.days_until(t_star);
    if delta <= 0 {
        return Err(Error::InvalidArgument(format!(
            "training date {t} is not before target {t_star}"
        )));
    }
    Ok(distance_from_delta(delta))
}

pub(crate) fn distance_from_delta(delta: i64) -> (i64, f64) {
    let d = delta as f64;
    let year_diff = (d / DAYS_PER_YEAR).floor() as i64;
    let rem = d.rem_euclid(DAYS_PER_YEAR).floor();
    let half = 365.0 / 2.0;
    (year_diff, half - (rem - half).abs())
}

/// Meteorological season of a date, by the month of the period start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Season {
    #[serde(rename = "DJF")]
    Djf,
    #[serde(rename = "MAM")]
    Mam,
    #[serde(rename = "JJA")]
    Jja,
    #[serde(rename = "SON")]
    Son,
}

impl Season {
    pub const ALL: [Season; 4] = [Season::Djf, Season::Mam, Season::Jja, Season::Son];

    pub fn of(date: CalendarDate) -> Season {
        match date.month() {
            12 | 1 | 2 => Season::Djf,
            3..=5 => Season::Mam,
            6..=8 => Season::Jja,
            _ => Season::Son,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Season::Djf => "DJF",
            Season::Mam => "MAM",
            Season::Jja => "JJA",
            Season::Son => "SON",
        }
    }
}

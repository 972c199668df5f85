use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::Weekday;
use serde::{Deserialize, Serialize};

use crate::cdf::CdfForecast;
use crate::climatology::IndicatorField;
use crate::error::{Error, Result};
use crate::griddata::CalendarDate;
use crate::scoring::{brier_cell, BBox, EvalMask, ExtremeBin};

/// Degrees either side of the centroid.
pub const BBOX_HALF_WIDTH: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AlertLevel {
    Green,
    Orange,
    Red,
}

impl FromStr for AlertLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "green" => Ok(AlertLevel::Green),
            "orange" => Ok(AlertLevel::Orange),
            "red" => Ok(AlertLevel::Red),
            other => Err(Error::InvalidArgument(format!("unknown alert level {other:?}"))),
        }
    }
}

impl fmt::Display for AlertLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AlertLevel::Green => "Green",
            AlertLevel::Orange => "Orange",
            AlertLevel::Red => "Red",
        })
    }
}

/// A catalogued flood, centroid longitude in `[0, 360)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloodEvent {
    pub id: u64,
    pub lat: f64,
    pub lon: f64,
    pub start: CalendarDate,
    pub alert: AlertLevel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl FloodEvent {
    pub fn bbox(&self) -> BBox {
        BBox::around(self.lat, self.lon, BBOX_HALF_WIDTH)
    }

    /// First and last day of the week-long target period.
    pub fn period(&self) -> (CalendarDate, CalendarDate) {
        (self.start, self.start.add_days(6))
    }
}

pub fn filter_by_issuance(events: &[FloodEvent], weekdays: &[Weekday]) -> Vec<FloodEvent> {
    events
        .iter()
        .filter(|e| weekdays.contains(&e.start.weekday()))
        .cloned()
        .collect()
}

pub fn events_per_year(events: &[FloodEvent]) -> BTreeMap<i32, usize> {
    let mut out = BTreeMap::new();
    for e in events {
        *out.entry(e.start.year()).or_insert(0) += 1;
    }
    out
}

/// Top-bin Brier skill over the event's box on its start date. `mask`
/// carries the land and aridity rules of the precipitation evaluation.
pub fn flood_bss(event: &FloodEvent, f: &CdfForecast, o: &IndicatorField, mask: &EvalMask) -> Result<f64> {
    let m = mask.clone().with_bbox(event.bbox())?;
    let t = f
        .position(event.start)
        .ok_or_else(|| Error::NoData(format!("no forecast for flood {} on {}", event.id, event.start)))?;
    let mut num = 0.0;
    let mut den = 0.0;
    let mut n = 0;
    for g in m.cells(event.start) {
        let (Some(a), Some(b)) = (f.get(t, g), o.get_at(event.start, g)) else {
            continue;
        };
        let w = f.grid().weight(g);
        let (bs, base) = brier_cell(a, b, ExtremeBin::Top);
        num += w * bs;
        den += w * base;
        n += 1;
    }
    if n == 0 || den <= 0.0 {
        return Err(Error::NoData(format!("flood {} has no scoreable cells", event.id)));
    }
    Ok(1.0 - num / den)
}

#[derive(Serialize)]
struct CsvRow<'a> {
    id: u64,
    start: String,
    lat: f64,
    lon: f64,
    alert: String,
    name: &'a str,
}

pub fn write_events_csv(events: &[FloodEvent], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let err = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    for e in events {
        w.serialize(CsvRow {
            id: e.id,
            start: e.start.to_string(),
            lat: e.lat,
            lon: e.lon,
            alert: e.alert.to_string(),
            name: e.name.as_deref().unwrap_or(""),
        })
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

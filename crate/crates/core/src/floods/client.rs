use std::collections::HashSet;
use std::fs;
use std::path::PathBuf;
use std::time::Duration;

use serde_json::Value;

use super::event::{AlertLevel, FloodEvent};
use crate::error::{Error, Result};
use crate::griddata::CalendarDate;
use crate::scoring::normalize_lon;

pub const GDACS_EVENT_LIST: &str = "https://www.gdacs.org/gdacsapi/api/events/geteventlist/SEARCH";
pub const PAGE_SIZE: usize = 100;
const MAX_PAGES: u32 = 200;

/// Blocking HTTP GET returning the response body.
pub trait Transport {
    fn get(&self, url: &str) -> Result<String>;
}

impl<F: Fn(&str) -> Result<String>> Transport for F {
    fn get(&self, url: &str) -> Result<String> {
        self(url)
    }
}

/// Paged, cached reader of the GDACS flood event list. Raw responses are
/// stored as `fl_<year>_p<page>.json` and reused on later runs.
pub struct GdacsClient<T: Transport> {
    transport: T,
    cache_dir: PathBuf,
    base_url: String,
    retries: u32,
    backoff: Duration,
}

impl<T: Transport> GdacsClient<T> {
    pub fn new(transport: T, cache_dir: impl Into<PathBuf>) -> Self {
        GdacsClient {
            transport,
            cache_dir: cache_dir.into(),
            base_url: GDACS_EVENT_LIST.into(),
            retries: 3,
            backoff: Duration::from_secs(2),
        }
    }

    pub fn with_base_url(mut self, url: &str) -> Self {
        self.base_url = url.into();
        self
    }

    pub fn with_retries(mut self, retries: u32, backoff: Duration) -> Self {
        self.retries = retries;
        self.backoff = backoff;
        self
    }

    pub fn url(&self, year: i32, page: u32) -> String {
        format!(
            "{}?eventlist=FL&fromDate={year}-01-01&toDate={year}-12-31&alertlevel=Green;Orange;Red&pagesize={PAGE_SIZE}&pagenumber={page}",
            self.base_url
        )
    }

    pub fn cache_path(&self, year: i32, page: u32) -> PathBuf {
        self.cache_dir.join(format!("fl_{year}_p{page}.json"))
    }

    fn fetch_with_retry(&self, url: &str) -> Result<String> {
        let mut delay = self.backoff;
        let mut attempt = 0;
        loop {
            match self.transport.get(url) {
                Ok(body) => return Ok(body),
                Err(e) if attempt < self.retries => {
                    log::warn!("GDACS request failed ({e}); retrying in {delay:?}");
                    std::thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn page(&self, year: i32, page: u32) -> Result<String> {
        let path = self.cache_path(year, page);
        if path.exists() {
            return fs::read_to_string(&path).map_err(|e| Error::io(&path, e));
        }
        let body = self.fetch_with_retry(&self.url(year, page))?;
        fs::create_dir_all(&self.cache_dir).map_err(|e| Error::io(&self.cache_dir, e))?;
        fs::write(&path, &body).map_err(|e| Error::io(&path, e))?;
        Ok(body)
    }

    /// Flood events starting in `years`, deduplicated by id and sorted by
    /// (start, id). Unparseable records are skipped with a warning.
    pub fn fetch_events(&self, years: std::ops::RangeInclusive<i32>) -> Result<Vec<FloodEvent>> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for year in years {
            for page in 1..=MAX_PAGES {
                let body = self.page(year, page)?;
                let (events, records) = parse_events(&body);
                for e in events {
                    if e.start.year() == year && seen.insert(e.id) {
                        out.push(e);
                    }
                }
                if records < PAGE_SIZE {
                    break;
                }
            }
        }
        out.sort_by_key(|e| (e.start, e.id));
        Ok(out)
    }
}

fn parse_feature(f: &Value) -> std::result::Result<Option<FloodEvent>, String> {
    let props = f.get("properties").ok_or("no properties")?;
    let kind = props.get("eventtype").and_then(Value::as_str).ok_or("no eventtype")?;
    if !kind.eq_ignore_ascii_case("FL") {
        return Ok(None);
    }
    let id = match props.get("eventid") {
        Some(Value::Number(n)) => n.as_u64().ok_or("eventid is not an unsigned integer")?,
        Some(Value::String(s)) => s.parse().map_err(|_| format!("bad eventid {s:?}"))?,
        _ => return Err("no eventid".into()),
    };
    let start: CalendarDate = props
        .get("fromdate")
        .and_then(Value::as_str)
        .ok_or("no fromdate")?
        .parse()
        .map_err(|e| format!("{e}"))?;
    let alert: AlertLevel = props
        .get("alertlevel")
        .and_then(Value::as_str)
        .ok_or("no alertlevel")?
        .parse()
        .map_err(|e| format!("{e}"))?;
    let coords = f
        .pointer("/geometry/coordinates")
        .and_then(Value::as_array)
        .ok_or("no point coordinates")?;
    let (lon, lat) = match coords.as_slice() {
        [lon, lat, ..] => (
            lon.as_f64().ok_or("bad longitude")?,
            lat.as_f64().ok_or("bad latitude")?,
        ),
        _ => return Err("coordinates need [lon, lat]".into()),
    };
    if !(-90.0..=90.0).contains(&lat) || !lon.is_finite() {
        return Err(format!("centroid ({lat}, {lon}) out of range"));
    }
    let lon = normalize_lon(lon);
    let name = props.get("name").and_then(Value::as_str).map(str::to_owned);
    Ok(Some(FloodEvent {
        id,
        lat,
        lon,
        start,
        alert,
        name,
    }))
}

/// Flood events in one GeoJSON response, plus the number of records it held
/// (of any type), which drives paging.
pub fn parse_events(body: &str) -> (Vec<FloodEvent>, usize) {
    if body.trim().is_empty() {
        return (Vec::new(), 0);
    }
    let doc: Value = match serde_json::from_str(body) {
        Ok(v) => v,
        Err(e) => {
            log::warn!("skipping unparseable GDACS page: {e}");
            return (Vec::new(), 0);
        }
    };
    let Some(features) = doc.get("features").and_then(Value::as_array) else {
        log::warn!("GDACS page has no feature list");
        return (Vec::new(), 0);
    };
    let mut events = Vec::new();
    for (i, f) in features.iter().enumerate() {
        match parse_feature(f) {
            Ok(Some(e)) => events.push(e),
            Ok(None) => {}
            Err(msg) => log::warn!("skipping GDACS record {i}: {msg}"),
        }
    }
    (events, features.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;

    const FIXTURE: &str = include_str!("../../tests/fixtures/gdacs_mixed.json");

    #[test]
    fn type_filter_and_skips() {
        let (events, n) = parse_events(FIXTURE);
        assert_eq!(n, 6);
        assert_eq!(events.len(), 3);
        assert!(events.iter().all(|e| (0.0..360.0).contains(&e.lon)));
        assert!(events.iter().any(|e| (e.lon - 299.5).abs() < 1e-12));
        let (none, n) = parse_events("{not json");
        assert!(none.is_empty() && n == 0);
    }

    #[test]
    fn warm_cache_makes_no_calls() {
        let dir = tempfile::tempdir().unwrap();
        let calls = Cell::new(0);
        let stub = |_: &str| -> Result<String> {
            calls.set(calls.get() + 1);
            Ok(FIXTURE.to_string())
        };
        let client = GdacsClient::new(&stub, dir.path()).with_retries(0, Duration::ZERO);
        let a = client.fetch_events(2022..=2022).unwrap();
        assert_eq!(calls.get(), 1);
        let b = client.fetch_events(2022..=2022).unwrap();
        let c = client.fetch_events(2022..=2022).unwrap();
        assert_eq!(calls.get(), 1);
        assert_eq!(a, b);
        assert_eq!(b, c);
        assert!(client.cache_path(2022, 1).exists());
    }

    #[test]
    fn retries_then_fails_on_empty_cache() {
        let dir = tempfile::tempdir().unwrap();
        let calls = Cell::new(0);
        let flaky = |_: &str| -> Result<String> {
            calls.set(calls.get() + 1);
            if calls.get() < 3 {
                Err(Error::Network("timeout".into()))
            } else {
                Ok(FIXTURE.to_string())
            }
        };
        let client = GdacsClient::new(&flaky, dir.path()).with_retries(3, Duration::ZERO);
        assert_eq!(client.fetch_events(2022..=2022).unwrap().len(), 3);
        assert_eq!(calls.get(), 3);

        let dir = tempfile::tempdir().unwrap();
        let down = |_: &str| -> Result<String> { Err(Error::Network("unreachable".into())) };
        let client = GdacsClient::new(&down, dir.path()).with_retries(1, Duration::ZERO);
        assert!(matches!(client.fetch_events(2022..=2022), Err(Error::Network(_))));
    }

    #[test]
    fn url_shape() {
        let client = GdacsClient::new(|_: &str| Ok(String::new()), "/tmp");
        let u = client.url(2023, 2);
        assert!(u.contains("eventlist=FL") && u.contains("fromDate=2023-01-01") && u.contains("pagenumber=2"));
    }
}

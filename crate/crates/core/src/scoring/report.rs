use std::path::Path;

use serde::{Deserialize, Serialize};

use super::bootstrap::bootstrap_ci;
use super::metrics::DateSeries;
use crate::error::{Error, Result};

/// One scored quantity, optionally restricted to a season or region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub metric: String,
    pub model: String,
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_date: Option<DateSeries>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub season: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci: Option<[f64; 2]>,
    pub n_dates: usize,
}

impl ScoreReport {
    /// Report whose value is the equal-weight mean of a per-date series.
    pub fn from_series(metric: &str, model: &str, series: DateSeries) -> Self {
        ScoreReport {
            metric: metric.into(),
            model: model.into(),
            value: series.mean(),
            n_dates: series.present().len(),
            per_date: Some(series),
            season: None,
            region: None,
            ci: None,
        }
    }

    pub fn scalar(metric: &str, model: &str, value: Option<f64>, n_dates: usize) -> Self {
        ScoreReport {
            metric: metric.into(),
            model: model.into(),
            value,
            per_date: None,
            season: None,
            region: None,
            ci: None,
            n_dates,
        }
    }

    /// Adds a bootstrap interval over the per-date series.
    pub fn with_ci(mut self, replicates: usize, level: f64, seed: u64) -> Result<Self> {
        let series = self
            .per_date
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument(format!("{} has no per-date series to resample", self.metric)))?;
        let v = series.present();
        if !v.is_empty() {
            let (lo, hi) = bootstrap_ci(&v, replicates, level, seed)?;
            self.ci = Some([lo, hi]);
        }
        Ok(self)
    }

    pub fn without_series(mut self) -> Self {
        self.per_date = None;
        self
    }
}

#[derive(Serialize)]
struct CsvRow<'a> {
    metric: &'a str,
    model: &'a str,
    season: &'a str,
    region: &'a str,
    value: Option<f64>,
    ci_lo: Option<f64>,
    ci_hi: Option<f64>,
    n_dates: usize,
}

/// One summary row per report.
pub fn write_reports_csv(reports: &[ScoreReport], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    for r in reports {
        w.serialize(CsvRow {
            metric: &r.metric,
            model: &r.model,
            season: r.season.as_deref().unwrap_or("all"),
            region: r.region.as_deref().unwrap_or("globe"),
            value: r.value,
            ci_lo: r.ci.map(|c| c[0]),
            ci_hi: r.ci.map(|c| c[1]),
            n_dates: r.n_dates,
        })
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

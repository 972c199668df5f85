use serde::{Deserialize, Serialize};

use super::mask::{BBox, EvalMask};
use super::metrics::rpss_global;
use super::report::ScoreReport;
use crate::cdf::CdfForecast;
use crate::climatology::IndicatorField;
use crate::error::{Error, Result};
use crate::griddata::Season;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub name: String,
    pub bbox: BBox,
}

impl Region {
    pub fn new(name: &str, bbox: BBox) -> Self {
        Region {
            name: name.into(),
            bbox,
        }
    }
}

/// Latitude bands used when no regions are configured.
pub fn default_regions() -> Vec<Region> {
    vec![
        Region::new(
            "northern_extratropics",
            BBox {
                lat_min: 23.5,
                lat_max: 90.0,
                lon_min: 0.0,
                lon_max: 360.0,
            },
        ),
        Region::new(
            "tropics",
            BBox {
                lat_min: -23.5,
                lat_max: 23.5,
                lon_min: 0.0,
                lon_max: 360.0,
            },
        ),
        Region::new(
            "southern_extratropics",
            BBox {
                lat_min: -90.0,
                lat_max: -23.5,
                lon_min: 0.0,
                lon_max: 360.0,
            },
        ),
    ]
}

/// Mean per-date RPSS for every (season, region) stratum, plus the
/// all-season and whole-mask strata. Regions with no scoreable cells are
/// skipped.
pub fn stratify(
    f: &CdfForecast,
    o: &IndicatorField,
    mask: &EvalMask,
    regions: &[Region],
    model: &str,
) -> Result<Vec<ScoreReport>> {
    let mut scopes: Vec<(Option<String>, EvalMask)> = vec![(None, mask.clone())];
    for r in regions {
        match mask.clone().with_bbox(r.bbox) {
            Ok(m) => scopes.push((Some(r.name.clone()), m)),
            Err(Error::EmptyMask) => log::debug!("region {} has no cells under the mask", r.name),
            Err(e) => return Err(e),
        }
    }
    let mut out = Vec::new();
    for (region, m) in scopes {
        let series = rpss_global(f, o, &m)?;
        let mut all = ScoreReport::from_series("rpss", model, series.clone());
        all.region = region.clone();
        out.push(all);
        for s in Season::ALL {
            let sub = series.filter(|d| Season::of(d) == s);
            let mut r = ScoreReport::from_series("rpss", model, sub);
            r.season = Some(s.label().into());
            r.region = region.clone();
            out.push(r);
        }
    }
    Ok(out)
}

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::climatology::ThresholdField;
use crate::error::{Error, Result};
use crate::griddata::{CalendarDate, DateIndex, GridSpec, Variable};

/// Minimum land fraction for cells scored on land-only variables.
pub const LAND_THRESHOLD: f32 = 0.5;

/// Closed latitude/longitude box. Longitudes are taken modulo 360; a box
/// with `lon_min > lon_max` wraps across the prime meridian, and
/// `lon_max = 360` marks the full circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl BBox {
    // negated comparisons so that NaN bounds are rejected
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn new(lat_min: f64, lat_max: f64, lon_min: f64, lon_max: f64) -> Result<Self> {
        if !(lat_min <= lat_max) || lat_min < -90.0 || lat_max > 90.0 {
            return Err(Error::InvalidArgument(format!(
                "bad latitude range [{lat_min}, {lat_max}]"
            )));
        }
        if !lon_min.is_finite() || !lon_max.is_finite() {
            return Err(Error::InvalidArgument("longitudes must be finite".into()));
        }
        if lon_max - lon_min >= 360.0 {
            return Ok(BBox {
                lat_min,
                lat_max,
                lon_min: 0.0,
                lon_max: 360.0,
            });
        }
        Ok(BBox {
            lat_min,
            lat_max,
            lon_min: normalize_lon(lon_min),
            lon_max: normalize_lon(lon_max),
        })
    }

    pub fn globe() -> Self {
        BBox {
            lat_min: -90.0,
            lat_max: 90.0,
            lon_min: 0.0,
            lon_max: 360.0,
        }
    }

    /// `±half` degrees around a centre, latitude clamped to the poles.
    pub fn around(lat: f64, lon: f64, half: f64) -> Self {
        let lon = normalize_lon(lon);
        if half >= 180.0 {
            return BBox {
                lat_min: (lat - half).max(-90.0),
                lat_max: (lat + half).min(90.0),
                lon_min: 0.0,
                lon_max: 360.0,
            };
        }
        BBox {
            lat_min: (lat - half).max(-90.0),
            lat_max: (lat + half).min(90.0),
            lon_min: normalize_lon(lon - half),
            lon_max: normalize_lon(lon + half),
        }
    }

    pub fn wraps(&self) -> bool {
        self.lon_min > self.lon_max
    }

    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        if lat < self.lat_min || lat > self.lat_max {
            return false;
        }
        if self.lon_max >= 360.0 {
            // full circle
            return true;
        }
        let lon = normalize_lon(lon);
        if self.wraps() {
            lon >= self.lon_min || lon <= self.lon_max
        } else {
            lon >= self.lon_min && lon <= self.lon_max
        }
    }
}

/// Longitude in `[0, 360)`.
pub fn normalize_lon(lon: f64) -> f64 {
    let x = lon.rem_euclid(360.0);
    if x >= 360.0 {
        0.0
    } else {
        x
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Aridity {
    index: DateIndex,
    flags: Vec<bool>,
}

/// Which cells count towards a score. Land-only variables require
/// `land_fraction >= 0.5`; precipitation additionally drops cells on the
/// dates their climatology is arid.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalMask {
    grid: Arc<GridSpec>,
    variable: Variable,
    base: Vec<bool>,
    aridity: Option<Aridity>,
    bbox: Option<BBox>,
}

impl EvalMask {
    pub fn new(grid: Arc<GridSpec>, variable: Variable) -> Result<Self> {
        let base = (0..grid.n_cells())
            .map(|g| !variable.land_only() || grid.land_fraction()[g] >= LAND_THRESHOLD)
            .collect();
        let m = EvalMask {
            grid,
            variable,
            base,
            aridity: None,
            bbox: None,
        };
        m.check_nonempty()?;
        Ok(m)
    }

    /// Every cell counts, whatever the variable.
    pub fn all(grid: Arc<GridSpec>, variable: Variable) -> Self {
        let base = vec![true; grid.n_cells()];
        EvalMask {
            grid,
            variable,
            base,
            aridity: None,
            bbox: None,
        }
    }

    /// Per-date aridity from observed thresholds. Only precipitation masks
    /// use it; for other variables the mask is returned unchanged.
    pub fn with_aridity(mut self, thresholds: &ThresholdField) -> Result<Self> {
        if self.variable != Variable::Precipitation {
            return Ok(self);
        }
        if thresholds.grid() != &self.grid {
            return Err(Error::Misaligned("aridity thresholds on another grid".into()));
        }
        let n = self.grid.n_cells();
        let dates = thresholds.dates().to_vec();
        let mut flags = Vec::with_capacity(dates.len() * n);
        for t in 0..dates.len() {
            flags.extend((0..n).map(|g| thresholds.is_arid(t, g)));
        }
        self.aridity = Some(Aridity {
            index: DateIndex::new(dates)?,
            flags,
        });
        Ok(self)
    }

    /// Restricts to cell centres inside `bbox`; errors if nothing remains.
    pub fn with_bbox(mut self, bbox: BBox) -> Result<Self> {
        for g in 0..self.grid.n_cells() {
            if !bbox.contains(self.grid.cell_lat(g), self.grid.cell_lon(g)) {
                self.base[g] = false;
            }
        }
        self.bbox = Some(bbox);
        self.check_nonempty()?;
        Ok(self)
    }

    fn check_nonempty(&self) -> Result<()> {
        if self.base.iter().any(|b| *b) {
            Ok(())
        } else {
            Err(Error::EmptyMask)
        }
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    pub fn variable(&self) -> Variable {
        self.variable
    }

    pub fn bbox(&self) -> Option<BBox> {
        self.bbox
    }

    /// Date-independent part of the mask.
    pub fn base(&self) -> &[bool] {
        &self.base
    }

    pub fn includes(&self, date: CalendarDate, cell: usize) -> bool {
        if !self.base[cell] {
            return false;
        }
        match &self.aridity {
            Some(a) => match a.index.position(date) {
                Some(t) => !a.flags[t * self.grid.n_cells() + cell],
                None => true,
            },
            None => true,
        }
    }

    pub fn cells(&self, date: CalendarDate) -> impl Iterator<Item = usize> + '_ {
        (0..self.grid.n_cells()).filter(move |g| self.includes(date, *g))
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical variable carried by a field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variable {
    Temperature,
    Precipitation,
    Mslp,
}

impl Variable {
    pub fn units(self) -> &'static str {
        match self {
            Variable::Temperature => "K",
            Variable::Precipitation => "mm/week",
            Variable::Mslp => "Pa",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variable::Temperature => "temperature",
            Variable::Precipitation => "precipitation",
            Variable::Mslp => "mslp",
        }
    }

    /// Temperature and precipitation are verified over land only.
    pub fn land_only(self) -> bool {
        !matches!(self, Variable::Mslp)
    }
}

impl std::str::FromStr for Variable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "temperature" | "tas" | "t2m" => Ok(Variable::Temperature),
            "precipitation" | "pr" | "tp" => Ok(Variable::Precipitation),
            "mslp" | "psl" => Ok(Variable::Mslp),
            other => Err(Error::InvalidArgument(format!("unknown variable `{other}`"))),
        }
    }
}

impl std::fmt::Display for Variable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Regular latitude-longitude grid. Cells are indexed row-major,
/// `cell = lat_index * n_lon + lon_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    latitudes: Vec<f64>,
    longitudes: Vec<f64>,
    land_fraction: Vec<f32>,
}

fn strictly_monotone(xs: &[f64]) -> bool {
    let inc = xs.windows(2).all(|w| w[0] < w[1]);
    let dec = xs.windows(2).all(|w| w[0] > w[1]);
    inc || dec
}

impl GridSpec {
    pub fn new(latitudes: Vec<f64>, longitudes: Vec<f64>, land_fraction: Vec<f32>) -> Result<Self> {
        if latitudes.is_empty() || longitudes.is_empty() {
            return Err(Error::InvalidArgument("grid needs at least one cell".into()));
        }
        if !strictly_monotone(&latitudes) || latitudes.iter().any(|l| !(-90.0..=90.0).contains(l)) {
            return Err(Error::InvalidArgument(
                "latitudes must be strictly monotone within [-90, 90]".into(),
            ));
        }
        if !strictly_monotone(&longitudes) || longitudes.iter().any(|l| !(0.0..360.0).contains(l)) {
            return Err(Error::InvalidArgument(
                "longitudes must be strictly monotone within [0, 360)".into(),
            ));
        }
        if land_fraction.len() != latitudes.len() * longitudes.len() {
            return Err(Error::InvalidArgument(format!(
                "land fraction has {} entries for {} cells",
                land_fraction.len(),
                latitudes.len() * longitudes.len()
            )));
        }
        if land_fraction.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::InvalidArgument("land fraction outside [0, 1]".into()));
        }
        Ok(GridSpec {
            latitudes,
            longitudes,
            land_fraction,
        })
    }

    /// Evenly spaced grid with the deterministic synthetic land pattern.
    pub fn regular(
        lat_start: f64,
        lat_step: f64,
        n_lat: usize,
        lon_start: f64,
        lon_step: f64,
        n_lon: usize,
    ) -> Result<Self> {
        let lats = (0..n_lat).map(|i| lat_start + lat_step * i as f64).collect();
        let lons = (0..n_lon).map(|j| lon_start + lon_step * j as f64).collect();
        Self::new(lats, lons, synthetic_land(n_lat, n_lon))
    }

    /// The 1.5° global grid: 121 latitudes from 90 to -90, 240 longitudes from 0.
    pub fn global_1p5() -> Self {
        Self::regular(90.0, -1.5, 121, 0.0, 1.5, 240).expect("static grid is valid")
    }

    /// A regional subset of the 1.5° grid with `n_lat` x `n_lon` cells whose
    /// north-west corner is at (`lat0`, `lon0`).
    pub fn patch(lat0: f64, lon0: f64, n_lat: usize, n_lon: usize) -> Result<Self> {
        Self::regular(lat0, -1.5, n_lat, lon0, 1.5, n_lon)
    }

    pub fn with_land_fraction(mut self, land_fraction: Vec<f32>) -> Result<Self> {
        self.land_fraction = land_fraction;
        Self::new(self.latitudes, self.longitudes, self.land_fraction)
    }

    pub fn latitudes(&self) -> &[f64] {
        &self.latitudes
    }

    pub fn longitudes(&self) -> &[f64] {
        &self.longitudes
    }

    pub fn land_fraction(&self) -> &[f32] {
        &self.land_fraction
    }

    pub fn n_lat(&self) -> usize {
        self.latitudes.len()
    }

    pub fn n_lon(&self) -> usize {
        self.longitudes.len()
    }

    pub fn n_cells(&self) -> usize {
        self.latitudes.len() * self.longitudes.len()
    }

    pub fn cell_lat(&self, cell: usize) -> f64 {
        self.latitudes[cell / self.n_lon()]
    }

    pub fn cell_lon(&self, cell: usize) -> f64 {
        self.longitudes[cell % self.n_lon()]
    }

    /// Area weight cos(latitude), floored at zero.
    pub fn weight(&self, cell: usize) -> f64 {
        self.cell_lat(cell).to_radians().cos().max(0.0)
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.n_cells()).map(|g| self.weight(g)).collect()
    }
}

/// Checkerboard of 6x6-cell blocks overlaid with a solid land band every
/// fifth latitude row band. Fractions are multiples of 1/4.
pub fn synthetic_land(n_lat: usize, n_lon: usize) -> Vec<f32> {
    let mut out = Vec::with_capacity(n_lat * n_lon);
    for i in 0..n_lat {
        for j in 0..n_lon {
            let checker = ((i / 6) + (j / 6)) % 2 == 0;
            let band = (i / 3) % 5 == 2;
            let f = if band {
                1.0
            } else if checker {
                0.75
            } else if (i + j) % 4 == 0 {
                0.5
            } else {
                0.25
            };
            out.push(f);
        }
    }
    out
}

//! On-disk grid store: a directory with `meta.json` plus flat little-endian
//! binary arrays.
//!
//! ```text
//! field/
//!   meta.json          kind, variable, units, dims, shape, dtype, dates, grid, attrs
//!   values.bin         shape product x dtype size bytes
//!   land_fraction.bin  n_lat x n_lon float32
//! ```
//!
//! Dimension order is `(time, member?, lat, lon, k?)`. Physical fields
//! (ensembles, observations, thresholds) are `float32`; probability fields
//! (CDFs, indicators, climatologies) are `float64` so that stored forecasts
//! score identically to in-memory ones. Missing values are quiet NaN.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

use super::{CalendarDate, EnsembleField, GridSpec, ObservationField, Variable};

pub const FORMAT_VERSION: u32 = 1;
const META_FILE: &str = "meta.json";
const VALUES_FILE: &str = "values.bin";
const LAND_FILE: &str = "land_fraction.bin";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Ensemble,
    Observation,
    Thresholds,
    Indicators,
    Climatology,
    Cdf,
    CdfSeries,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArrayData {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl ArrayData {
    pub fn len(&self) -> usize {
        match self {
            ArrayData::F32(v) => v.len(),
            ArrayData::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn dtype(&self) -> &'static str {
        match self {
            ArrayData::F32(_) => "float32",
            ArrayData::F64(_) => "float64",
        }
    }
}

/// Everything a store directory holds, decoded.
#[derive(Debug, Clone)]
pub struct StoreRecord {
    pub kind: FieldKind,
    pub variable: Variable,
    pub units: String,
    pub dims: Vec<String>,
    pub shape: Vec<usize>,
    pub dates: Vec<CalendarDate>,
    pub grid: GridSpec,
    pub attrs: Map<String, Value>,
    pub data: ArrayData,
}

impl StoreRecord {
    pub fn attr<T: for<'de> Deserialize<'de>>(&self, key: &str) -> Result<Option<T>> {
        match self.attrs.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => serde_json::from_value(v.clone()).map(Some).map_err(Error::from),
        }
    }

    pub fn require_attr<T: for<'de> Deserialize<'de>>(&self, key: &str, path: &Path) -> Result<T> {
        self.attr(key)?.ok_or_else(|| Error::Schema {
            path: path.to_path_buf(),
            message: format!("missing attribute `{key}`"),
        })
    }

    pub fn expect_kind(&self, kind: FieldKind, path: &Path) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Schema {
                path: path.to_path_buf(),
                message: format!("expected a {kind:?} store, found {:?}", self.kind),
            });
        }
        Ok(())
    }

    pub fn into_f32(self, path: &Path) -> Result<Vec<f32>> {
        match self.data {
            ArrayData::F32(v) => Ok(v),
            ArrayData::F64(_) => Err(Error::Schema {
                path: path.to_path_buf(),
                message: "expected float32 values".into(),
            }),
        }
    }

    pub fn into_f64(self, path: &Path) -> Result<Vec<f64>> {
        match self.data {
            ArrayData::F64(v) => Ok(v),
            ArrayData::F32(_) => Err(Error::Schema {
                path: path.to_path_buf(),
                message: "expected float64 values".into(),
            }),
        }
    }
}

/// Conversion between a field type and its store record.
pub trait Storable: Sized {
    fn to_record(&self) -> StoreRecord;
    fn from_record(record: StoreRecord, path: &Path) -> Result<Self>;
}

#[derive(Debug, Serialize, Deserialize)]
struct GridMeta {
    latitudes: Vec<f64>,
    longitudes: Vec<f64>,
    land_fraction: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    format_version: u32,
    kind: FieldKind,
    variable: Variable,
    units: String,
    dims: Vec<String>,
    shape: Vec<usize>,
    dtype: String,
    dates: Vec<CalendarDate>,
    grid: GridMeta,
    values: String,
    #[serde(default)]
    attrs: Map<String, Value>,
}

pub fn write_store<T: Storable>(field: &T, dir: impl AsRef<Path>) -> Result<()> {
    write_record(&field.to_record(), dir)
}

pub fn read_store<T: Storable>(dir: impl AsRef<Path>) -> Result<T> {
    let dir = dir.as_ref();
    T::from_record(read_record(dir)?, dir)
}

pub fn write_record(rec: &StoreRecord, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let expected: usize = rec.shape.iter().product();
    if expected != rec.data.len() || rec.dims.len() != rec.shape.len() {
        return Err(Error::DimensionMismatch {
            path: dir.to_path_buf(),
            message: format!("record declares shape {:?} for {} values", rec.shape, rec.data.len()),
        });
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut bytes = Vec::with_capacity(rec.data.len() * 8);
    match &rec.data {
        ArrayData::F32(v) => v.iter().for_each(|x| bytes.extend_from_slice(&x.to_le_bytes())),
        ArrayData::F64(v) => v.iter().for_each(|x| bytes.extend_from_slice(&x.to_le_bytes())),
    }
    write_file(&dir.join(VALUES_FILE), &bytes)?;

    let land: Vec<u8> = rec.grid.land_fraction().iter().flat_map(|x| x.to_le_bytes()).collect();
    write_file(&dir.join(LAND_FILE), &land)?;

    let meta = Meta {
        format_version: FORMAT_VERSION,
        kind: rec.kind,
        variable: rec.variable,
        units: rec.units.clone(),
        dims: rec.dims.clone(),
        shape: rec.shape.clone(),
        dtype: rec.data.dtype().to_string(),
        dates: rec.dates.clone(),
        grid: GridMeta {
            latitudes: rec.grid.latitudes().to_vec(),
            longitudes: rec.grid.longitudes().to_vec(),
            land_fraction: LAND_FILE.to_string(),
        },
        values: VALUES_FILE.to_string(),
        attrs: rec.attrs.clone(),
    };
    let mut text = serde_json::to_string_pretty(&meta)?;
    text.push('\n');
    write_file(&dir.join(META_FILE), text.as_bytes())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_bytes(path: &Path, expected: u64) -> Result<Vec<u8>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let found = bytes.len() as u64;
    if found < expected {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected,
            found,
        });
    }
    if found > expected {
        return Err(Error::DimensionMismatch {
            path: path.to_path_buf(),
            message: format!("file holds {found} bytes, declared shape needs {expected}"),
        });
    }
    Ok(bytes)
}

pub fn read_record(dir: impl AsRef<Path>) -> Result<StoreRecord> {
    let dir = dir.as_ref();
    let meta_path = dir.join(META_FILE);
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: Meta = serde_json::from_str(&text).map_err(|e| Error::Schema {
        path: meta_path.clone(),
        message: e.to_string(),
    })?;
    let schema = |message: String| Error::Schema {
        path: meta_path.clone(),
        message,
    };
    let mismatch = |message: String| Error::DimensionMismatch {
        path: meta_path.clone(),
        message,
    };

    if meta.format_version != FORMAT_VERSION {
        return Err(schema(format!("unsupported format_version {}", meta.format_version)));
    }
    let elem = match meta.dtype.as_str() {
        "float32" => 4u64,
        "float64" => 8u64,
        other => {
            return Err(Error::UnknownDtype {
                path: meta_path,
                dtype: other.to_string(),
            })
        }
    };
    if meta.dims.len() != meta.shape.len() {
        return Err(mismatch(format!(
            "{} dims declared with a {}-dimensional shape",
            meta.dims.len(),
            meta.shape.len()
        )));
    }
    if meta.dims.first().map(String::as_str) != Some("time") {
        return Err(schema("first dimension must be `time`".into()));
    }
    if meta.shape[0] != meta.dates.len() {
        return Err(mismatch(format!(
            "time dimension {} but {} dates listed",
            meta.shape[0],
            meta.dates.len()
        )));
    }
    let lat_pos = meta
        .dims
        .iter()
        .position(|d| d == "lat")
        .ok_or_else(|| schema("missing `lat` dimension".into()))?;
    if meta.dims.get(lat_pos + 1).map(String::as_str) != Some("lon") {
        return Err(schema("`lon` must follow `lat`".into()));
    }
    if meta.shape[lat_pos] != meta.grid.latitudes.len() || meta.shape[lat_pos + 1] != meta.grid.longitudes.len() {
        return Err(mismatch("lat/lon extents disagree with the grid axes".into()));
    }

    let n_cells = (meta.grid.latitudes.len() * meta.grid.longitudes.len()) as u64;
    let land_path = dir.join(&meta.grid.land_fraction);
    let land_bytes = read_bytes(&land_path, n_cells * 4)?;
    let land: Vec<f32> = land_bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let grid = GridSpec::new(meta.grid.latitudes, meta.grid.longitudes, land).map_err(|e| schema(e.to_string()))?;

    let count: u64 = meta.shape.iter().map(|&s| s as u64).product();
    let values_path = dir.join(&meta.values);
    let bytes = read_bytes(&values_path, count * elem)?;
    let data = if elem == 4 {
        ArrayData::F32(
            bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
        )
    } else {
        ArrayData::F64(
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect(),
        )
    };

    Ok(StoreRecord {
        kind: meta.kind,
        variable: meta.variable,
        units: meta.units,
        dims: meta.dims,
        shape: meta.shape,
        dates: meta.dates,
        grid,
        attrs: meta.attrs,
        data,
    })
}

pub(crate) fn dims(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

pub(crate) fn require_dims(rec: &StoreRecord, expected: &[&str], path: &Path) -> Result<()> {
    if rec.dims != dims(expected) {
        return Err(Error::DimensionMismatch {
            path: path.to_path_buf(),
            message: format!("expected dims {expected:?}, found {:?}", rec.dims),
        });
    }
    Ok(())
}

impl Storable for EnsembleField {
    fn to_record(&self) -> StoreRecord {
        let g = self.grid();
        let mut attrs = Map::new();
        attrs.insert("lead_days".into(), self.lead_days().into());
        attrs.insert("members".into(), self.members().into());
        attrs.insert(
            "hindcast_year_offset".into(),
            self.hindcast_year_offset().map_or(Value::Null, Value::from),
        );
        StoreRecord {
            kind: FieldKind::Ensemble,
            variable: self.variable(),
            units: self.variable().units().into(),
            dims: dims(&["time", "member", "lat", "lon"]),
            shape: vec![self.target_dates().len(), self.members(), g.n_lat(), g.n_lon()],
            dates: self.target_dates().to_vec(),
            grid: (**g).clone(),
            attrs,
            data: ArrayData::F32(self.values().to_vec()),
        }
    }

    fn from_record(rec: StoreRecord, path: &Path) -> Result<Self> {
        rec.expect_kind(FieldKind::Ensemble, path)?;
        require_dims(&rec, &["time", "member", "lat", "lon"], path)?;
        let lead: i64 = rec.require_attr("lead_days", path)?;
        let offset: Option<u32> = rec.attr("hindcast_year_offset")?;
        let members = rec.shape[1];
        let (grid, variable, dates) = (Arc::new(rec.grid.clone()), rec.variable, rec.dates.clone());
        let values = rec.into_f32(path)?;
        EnsembleField::new(grid, variable, lead, dates, members, offset, values)
    }
}

impl Storable for ObservationField {
    fn to_record(&self) -> StoreRecord {
        let g = self.grid();
        let mut attrs = Map::new();
        attrs.insert("period_days".into(), super::calendar::PERIOD_DAYS.into());
        StoreRecord {
            kind: FieldKind::Observation,
            variable: self.variable(),
            units: self.variable().units().into(),
            dims: dims(&["time", "lat", "lon"]),
            shape: vec![self.dates().len(), g.n_lat(), g.n_lon()],
            dates: self.dates().to_vec(),
            grid: (**g).clone(),
            attrs,
            data: ArrayData::F32(self.values().to_vec()),
        }
    }

    fn from_record(rec: StoreRecord, path: &Path) -> Result<Self> {
        rec.expect_kind(FieldKind::Observation, path)?;
        require_dims(&rec, &["time", "lat", "lon"], path)?;
        let (grid, variable, dates) = (Arc::new(rec.grid.clone()), rec.variable, rec.dates.clone());
        let values = rec.into_f32(path)?;
        ObservationField::new(grid, variable, dates, values)
    }
}

/// Hindcast directories are laid out as `<dir>/d01 .. <dir>/dNN`.
pub fn hindcast_dir(dir: &Path, offset: u32) -> PathBuf {
    dir.join(format!("d{offset:02}"))
}

pub fn write_hindcasts(hindcasts: &[EnsembleField], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    for h in hindcasts {
        let off = h
            .hindcast_year_offset()
            .ok_or_else(|| Error::InvalidArgument("hindcast field without a year offset".into()))?;
        write_store(h, hindcast_dir(dir, off))?;
    }
    Ok(())
}

pub fn read_hindcasts(dir: impl AsRef<Path>) -> Result<Vec<EnsembleField>> {
    let dir = dir.as_ref();
    let mut names: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.join(META_FILE).exists())
        .collect();
    names.sort();
    let mut out = Vec::with_capacity(names.len());
    for p in names {
        let field: EnsembleField = read_store(&p)?;
        if field.hindcast_year_offset().is_none() {
            return Err(Error::Schema {
                path: p,
                message: "hindcast store lacks hindcast_year_offset".into(),
            });
        }
        out.push(field);
    }
    out.sort_by_key(|h| h.hindcast_year_offset());
    Ok(out)
}

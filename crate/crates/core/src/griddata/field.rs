//! In-memory field containers. Missing values are NaN in the buffers and
//! surface as `Option` from accessors.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};

use super::{CalendarDate, GridSpec, Variable};

/// Position lookup for a list of unique dates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DateIndex {
    dates: Vec<CalendarDate>,
    pos: HashMap<CalendarDate, usize>,
}

impl DateIndex {
    pub fn new(dates: Vec<CalendarDate>) -> Result<Self> {
        let mut pos = HashMap::with_capacity(dates.len());
        for (i, d) in dates.iter().enumerate() {
            if pos.insert(*d, i).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate date {d}")));
            }
        }
        Ok(DateIndex { dates, pos })
    }

    pub fn dates(&self) -> &[CalendarDate] {
        &self.dates
    }

    pub fn position(&self, date: CalendarDate) -> Option<usize> {
        self.pos.get(&date).copied()
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }
}

/// Values indexed `(date, cell, bin)`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DatedCube<T> {
    index: DateIndex,
    n_cells: usize,
    bins: usize,
    values: Vec<T>,
}

impl<T: Copy> DatedCube<T> {
    pub fn new(dates: Vec<CalendarDate>, n_cells: usize, bins: usize, values: Vec<T>) -> Result<Self> {
        let expected = dates.len() * n_cells * bins;
        if values.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "cube holds {} values, shape needs {expected}",
                values.len()
            )));
        }
        Ok(DatedCube {
            index: DateIndex::new(dates)?,
            n_cells,
            bins,
            values,
        })
    }

    pub fn filled(dates: Vec<CalendarDate>, n_cells: usize, bins: usize, fill: T) -> Result<Self> {
        let n = dates.len() * n_cells * bins;
        Self::new(dates, n_cells, bins, vec![fill; n])
    }

    pub fn dates(&self) -> &[CalendarDate] {
        self.index.dates()
    }

    pub fn position(&self, date: CalendarDate) -> Option<usize> {
        self.index.position(date)
    }

    pub fn n_dates(&self) -> usize {
        self.index.len()
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn row_len(&self) -> usize {
        self.n_cells * self.bins
    }

    /// All cells and bins at date position `t`.
    pub fn row(&self, t: usize) -> &[T] {
        let n = self.row_len();
        &self.values[t * n..(t + 1) * n]
    }

    pub fn row_mut(&mut self, t: usize) -> &mut [T] {
        let n = self.row_len();
        &mut self.values[t * n..(t + 1) * n]
    }

    pub fn cell(&self, t: usize, cell: usize) -> &[T] {
        let start = (t * self.n_cells + cell) * self.bins;
        &self.values[start..start + self.bins]
    }

    pub fn cell_mut(&mut self, t: usize, cell: usize) -> &mut [T] {
        let start = (t * self.n_cells + cell) * self.bins;
        &mut self.values[start..start + self.bins]
    }

    pub fn cell_at(&self, date: CalendarDate, cell: usize) -> Option<&[T]> {
        self.position(date).map(|t| self.cell(t, cell))
    }
}

pub(crate) fn opt32(v: f32) -> Option<f32> {
    (!v.is_nan()).then_some(v)
}

pub(crate) fn opt64(v: f64) -> Option<f64> {
    (!v.is_nan()).then_some(v)
}

/// Member-indexed deterministic forecasts, `values[(date, member, cell)]`.
///
/// With `hindcast_year_offset = Some(δ)` the field holds the hindcast issued
/// alongside the forecast for each listed target date, verifying `δ` years
/// earlier.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleField {
    grid: Arc<GridSpec>,
    variable: Variable,
    lead_days: i64,
    index: DateIndex,
    members: usize,
    hindcast_year_offset: Option<u32>,
    values: Vec<f32>,
}

impl EnsembleField {
    pub fn new(
        grid: Arc<GridSpec>,
        variable: Variable,
        lead_days: i64,
        target_dates: Vec<CalendarDate>,
        members: usize,
        hindcast_year_offset: Option<u32>,
        values: Vec<f32>,
    ) -> Result<Self> {
        if members == 0 {
            return Err(Error::InvalidArgument("ensemble needs at least one member".into()));
        }
        if hindcast_year_offset == Some(0) {
            return Err(Error::InvalidArgument("hindcast year offset must be >= 1".into()));
        }
        let expected = target_dates.len() * members * grid.n_cells();
        if values.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "ensemble holds {} values, shape needs {expected}",
                values.len()
            )));
        }
        if values.iter().any(|v| v.is_infinite()) {
            return Err(Error::InvalidArgument("ensemble values must be finite or NaN".into()));
        }
        Ok(EnsembleField {
            grid,
            variable,
            lead_days,
            index: DateIndex::new(target_dates)?,
            members,
            hindcast_year_offset,
            values,
        })
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    pub fn variable(&self) -> Variable {
        self.variable
    }

    pub fn lead_days(&self) -> i64 {
        self.lead_days
    }

    pub fn target_dates(&self) -> &[CalendarDate] {
        self.index.dates()
    }

    pub fn position(&self, date: CalendarDate) -> Option<usize> {
        self.index.position(date)
    }

    pub fn members(&self) -> usize {
        self.members
    }

    pub fn hindcast_year_offset(&self) -> Option<u32> {
        self.hindcast_year_offset
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f32] {
        &mut self.values
    }

    /// Date the values at position `t` actually verify on.
    pub fn verifying_date(&self, t: usize) -> CalendarDate {
        let d = self.index.dates()[t];
        match self.hindcast_year_offset {
            Some(y) => d.minus_years(y),
            None => d,
        }
    }

    /// Issuance date of the forecast at position `t` (hindcasts arrive with it).
    pub fn issued_date(&self, t: usize) -> CalendarDate {
        self.index.dates()[t].add_days(-self.lead_days)
    }

    pub fn get(&self, t: usize, member: usize, cell: usize) -> Option<f32> {
        opt32(self.values[(t * self.members + member) * self.grid.n_cells() + cell])
    }

    /// Member values at `(t, cell)`, missing members included as NaN.
    pub fn member_values(&self, t: usize, cell: usize) -> impl Iterator<Item = f32> + '_ {
        let g = self.grid.n_cells();
        let base = t * self.members * g + cell;
        (0..self.members).map(move |m| self.values[base + m * g])
    }

    /// Adds `offset` to every member value.
    pub fn shifted(&self, offset: f32) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v += offset);
        out
    }
}

/// Week-aggregated ground truth, one value per (period start date, cell).
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationField {
    grid: Arc<GridSpec>,
    variable: Variable,
    cube: DatedCube<f32>,
}

impl ObservationField {
    pub fn new(grid: Arc<GridSpec>, variable: Variable, dates: Vec<CalendarDate>, values: Vec<f32>) -> Result<Self> {
        if values.iter().any(|v| v.is_infinite()) {
            return Err(Error::InvalidArgument("observations must be finite or NaN".into()));
        }
        let cube = DatedCube::new(dates, grid.n_cells(), 1, values)?;
        Ok(ObservationField { grid, variable, cube })
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    pub fn variable(&self) -> Variable {
        self.variable
    }

    pub fn dates(&self) -> &[CalendarDate] {
        self.cube.dates()
    }

    pub fn position(&self, date: CalendarDate) -> Option<usize> {
        self.cube.position(date)
    }

    pub fn values(&self) -> &[f32] {
        self.cube.values()
    }

    pub fn row(&self, t: usize) -> &[f32] {
        self.cube.row(t)
    }

    pub fn get(&self, t: usize, cell: usize) -> Option<f32> {
        opt32(self.cube.cell(t, cell)[0])
    }

    pub fn get_at(&self, date: CalendarDate, cell: usize) -> Option<f32> {
        self.position(date).and_then(|t| self.get(t, cell))
    }
}

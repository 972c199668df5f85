//! Verification: RPS and its skill scores, extreme-bin Brier skill, bias
//! maps, stratification and bootstrap intervals.

mod bootstrap;
mod mask;
mod metrics;
mod report;
mod stratify;

pub use bootstrap::{bootstrap_ci, bootstrap_ci_with, DEFAULT_LEVEL, DEFAULT_REPLICATES};
pub use mask::{normalize_lon, BBox, EvalMask, LAND_THRESHOLD};
pub use metrics::{
    bias_map, brier_cell, bss_extreme, clim_rps_cell, rps, rps_cell, rpss_aggregated, rpss_global, rpss_spatial,
    BiasMap, DateSeries, ExtremeBin, SpatialSkill,
};
pub use report::{write_reports_csv, ScoreReport};
pub use stratify::{default_regions, stratify, Region};

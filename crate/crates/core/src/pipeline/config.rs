use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::cutoff::CutoffRule;
use crate::cdf::VariantKind;
use crate::correction::DebiasConfig;
use crate::error::{Error, Result};
use crate::griddata::{CalendarDate, Variable};
use crate::scoring::{default_regions, BBox, Region, DEFAULT_LEVEL, DEFAULT_REPLICATES};

/// Store locations read by a replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct InputPaths {
    pub observations: PathBuf,
    pub forecasts: PathBuf,
    /// Directory holding one store per hindcast year offset.
    pub hindcasts: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DebiasSettings {
    /// `[span_days, issuance_count]` pairs searched before every target date.
    pub candidates: Vec<[u32; 2]>,
    pub training_years: u32,
}

impl Default for DebiasSettings {
    fn default() -> Self {
        DebiasSettings {
            candidates: DebiasConfig::candidates()
                .iter()
                .map(|c| [c.span_days, c.issuance_count as u32])
                .collect(),
            training_years: 20,
        }
    }
}

impl DebiasSettings {
    pub fn configs(&self) -> Result<Vec<DebiasConfig>> {
        if self.candidates.is_empty() {
            return Err(Error::Config("debias.candidates is empty".into()));
        }
        self.candidates
            .iter()
            .map(|[s, d]| {
                let mut c = DebiasConfig::new(*s, *d as usize).map_err(|e| Error::Config(e.to_string()))?;
                c.training_years = self.training_years;
                Ok(c)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScoringSettings {
    pub bootstrap_replicates: usize,
    pub confidence: f64,
    /// Restricts every score to this box when set.
    pub bbox: Option<BBox>,
    pub regions: Vec<Region>,
}

impl Default for ScoringSettings {
    fn default() -> Self {
        ScoringSettings {
            bootstrap_replicates: DEFAULT_REPLICATES,
            confidence: DEFAULT_LEVEL,
            bbox: None,
            regions: default_regions(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Methods {
    pub debiaspp: bool,
    pub persistencepp: bool,
}

impl Default for Methods {
    fn default() -> Self {
        Methods {
            debiaspp: true,
            persistencepp: true,
        }
    }
}

/// Everything a replay needs. Loaded from TOML; unset fields take defaults
/// and the resolved form is written next to the outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Checked against the data when set.
    pub variable: Option<Variable>,
    /// Checked against the data when set.
    pub lead_days: Option<i64>,
    pub bins: usize,
    /// Label of the forecast system, e.g. `ecmwf` or `poet`.
    pub model: String,
    /// Thresholds used for the Persistence++ inputs; chosen from the model
    /// and variable when unset.
    pub threshold_variant: Option<VariantKind>,
    /// First and last target dates replayed; the whole forecast record by default.
    pub start: Option<CalendarDate>,
    pub end: Option<CalendarDate>,
    pub threshold_years: u32,
    pub climatology_years: u32,
    /// Bootstrap seed.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub inputs: InputPaths,
    pub methods: Methods,
    pub debias: DebiasSettings,
    pub scoring: ScoringSettings,
    /// Test hook; only the strict rule is valid in production runs.
    #[serde(skip)]
    pub cutoff_rule: CutoffRule,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            variable: None,
            lead_days: None,
            bins: 5,
            model: "ecmwf".into(),
            threshold_variant: None,
            start: None,
            end: None,
            threshold_years: 20,
            climatology_years: 20,
            seed: 0,
            output_dir: PathBuf::from("out"),
            inputs: InputPaths::default(),
            methods: Methods::default(),
            debias: DebiasSettings::default(),
            scoring: ScoringSettings::default(),
            cutoff_rule: CutoffRule::Strict,
        }
    }
}

/// Persistence++ inputs use model thresholds except for PoET, and for
/// ECMWF precipitation, which use observed ones.
pub fn default_variant(model: &str, variable: Variable) -> VariantKind {
    if model.eq_ignore_ascii_case("poet") || variable == Variable::Precipitation {
        VariantKind::Observed
    } else {
        VariantKind::Model
    }
}

impl PipelineConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a TOML file. Relative input and output paths resolve against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Some(base) = path.parent() {
            for p in [
                &mut cfg.inputs.observations,
                &mut cfg.inputs.forecasts,
                &mut cfg.inputs.hindcasts,
                &mut cfg.output_dir,
            ] {
                if p.is_relative() && !p.as_os_str().is_empty() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn variant_for(&self, variable: Variable) -> VariantKind {
        self.threshold_variant
            .unwrap_or_else(|| default_variant(&self.model, variable))
    }

    /// Fills data-derived fields and validates the rest.
    pub fn resolve(&mut self, variable: Variable, lead_days: i64) -> Result<()> {
        if let Some(v) = self.variable {
            if v != variable {
                return Err(Error::Config(format!(
                    "config says {v} but the forecasts carry {variable}"
                )));
            }
        }
        if let Some(l) = self.lead_days {
            if l != lead_days {
                return Err(Error::Config(format!(
                    "config says lead {l} but the forecasts carry lead {lead_days}"
                )));
            }
        }
        if self.bins < 2 {
            return Err(Error::Config("bins must be at least 2".into()));
        }
        if let (Some(a), Some(b)) = (self.start, self.end) {
            if a > b {
                return Err(Error::Config(format!("start {a} is after end {b}")));
            }
        }
        if self.threshold_years == 0 || self.climatology_years == 0 {
            return Err(Error::Config(
                "threshold_years and climatology_years must be positive".into(),
            ));
        }
        if !(0.0 < self.scoring.confidence && self.scoring.confidence < 1.0) {
            return Err(Error::Config("scoring.confidence must lie in (0, 1)".into()));
        }
        let configs = self.debias.configs()?;
        if configs.iter().any(|c| c.issuance_count != 1) {
            return Err(Error::Config(
                "issuance averaging needs several leads; replays read a single lead".into(),
            ));
        }
        self.variable = Some(variable);
        self.lead_days = Some(lead_days);
        self.threshold_variant = Some(self.variant_for(variable));
        Ok(())
    }
}

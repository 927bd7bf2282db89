//! Run configuration: one TOML file with compiled-in defaults for every
//! physical and economic parameter.

use std::path::{Path, PathBuf};

use bess_core::data::{load_series, resample, ColumnSchema, Resolution, SeriesFrame, TariffSpec};
use bess_core::degradation::DegradationParams;
use bess_core::dispatch::{PlantSpec, SolverConfig};
use bess_core::economics::CostModel;
use bess_core::experiments::{BatteryModel, BatteryTemplate, ModelCatalog, Study};
use bess_core::lifetime::LifetimeConfig;
use bess_core::synthetic::{generate, FixtureSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Prefix of the built-in synthetic data sources.
pub const SYNTHETIC: &str = "synthetic:";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Input CSV, or `synthetic:ripple` / `synthetic:smooth`.
    pub data: String,
    pub tariff: Option<PathBuf>,
    pub output: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            data: format!("{SYNTHETIC}ripple"),
            tariff: None,
            output: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensitivityConfig {
    pub resolutions: Vec<u32>,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        Self {
            resolutions: vec![5, 15, 30, 60],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub columns: ColumnSchema,
    pub vat_rate: f64,
    /// Simulation step in minutes; the data's own resolution when unset.
    pub resolution: Option<u32>,
    /// Seed of the synthetic data generator.
    pub seed: Option<u64>,
    /// Battery used by `simulate`, `dispatch`, `sensitivity` and `compare`,
    /// by nominal capacity.
    pub model_kwh: f64,
    pub plant: PlantSpec,
    pub battery: BatteryTemplate,
    pub catalog: ModelCatalog,
    pub degradation: DegradationParams,
    pub costs: CostModel,
    pub lifetime: LifetimeConfig,
    pub solver: SolverConfig,
    pub sensitivity: SensitivityConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            paths: Paths::default(),
            columns: ColumnSchema::default(),
            vat_rate: 0.21,
            resolution: None,
            seed: None,
            model_kwh: 10.0,
            plant: PlantSpec::default(),
            battery: BatteryTemplate::default(),
            catalog: ModelCatalog::default(),
            degradation: DegradationParams::default(),
            costs: CostModel::default(),
            lifetime: LifetimeConfig::default(),
            solver: SolverConfig::default(),
            sensitivity: SensitivityConfig::default(),
        }
    }
}

impl RunConfig {
    /// Reads `path`; relative paths inside are taken from its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if !cfg.paths.data.starts_with(SYNTHETIC) {
            cfg.paths.data = base.join(&cfg.paths.data).to_string_lossy().into_owned();
        }
        cfg.paths.tariff = cfg.paths.tariff.map(|t| base.join(t));
        cfg.paths.output = base.join(&cfg.paths.output);
        Ok(cfg)
    }

    pub fn study(&self) -> Study {
        Study {
            plant: self.plant,
            template: self.battery,
            params: self.degradation,
            lifetime: self.lifetime,
            solver: self.solver,
            costs: self.costs,
        }
    }

    pub fn model(&self) -> Result<BatteryModel, CliError> {
        self.catalog
            .models
            .iter()
            .find(|m| (m.e_nominal - self.model_kwh).abs() < 1e-9)
            .copied()
            .ok_or_else(|| CliError::Config(format!("no catalog entry with {} kWh", self.model_kwh)))
    }

    pub fn sensitivity_resolutions(&self) -> Result<Vec<Resolution>, CliError> {
        self.sensitivity
            .resolutions
            .iter()
            .map(|&m| Resolution::new(m).map_err(|e| CliError::Config(e.to_string())))
            .collect()
    }

    /// Checks every section without touching the data.
    pub fn validate(&self) -> Result<(), CliError> {
        self.study().validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.catalog.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if !(0.0..1.0).contains(&self.vat_rate) {
            return Err(CliError::Config(format!("vat_rate must be in [0, 1), got {}", self.vat_rate)));
        }
        if let Some(r) = self.resolution {
            Resolution::new(r).map_err(|e| CliError::Config(e.to_string()))?;
        }
        self.sensitivity_resolutions()?;
        if !self.paths.data.starts_with(SYNTHETIC) && !Path::new(&self.paths.data).is_file() {
            return Err(CliError::Config(format!("data file {} does not exist", self.paths.data)));
        }
        if let Some(t) = &self.paths.tariff {
            if !t.is_file() {
                return Err(CliError::Config(format!("tariff file {} does not exist", t.display())));
            }
        }
        Ok(())
    }

    /// Input data at native resolution with prices applied.
    pub fn load_base_frame(&self) -> Result<SeriesFrame, CliError> {
        let data_err = |e: bess_core::data::DataError| CliError::Config(e.to_string());
        let frame = match self.paths.data.strip_prefix(SYNTHETIC) {
            Some(kind) => {
                let mut spec = match kind {
                    "ripple" => FixtureSpec::ripple(),
                    "smooth" => FixtureSpec::smooth(),
                    other => return Err(CliError::Config(format!("unknown synthetic data set '{other}'"))),
                };
                if let Some(seed) = self.seed {
                    spec.seed = seed;
                }
                generate(&spec).map_err(data_err)?
            }
            None => load_series(Path::new(&self.paths.data), &self.columns).map_err(data_err)?,
        };
        match &self.paths.tariff {
            Some(path) => {
                let tariff = TariffSpec::load(path, self.vat_rate).map_err(data_err)?;
                frame.apply_tariff(&tariff).map_err(data_err)
            }
            None => {
                if frame.price().iter().all(|&p| p == 0.0) {
                    log::warn!("no tariff and no price column: grid energy is free");
                }
                Ok(frame)
            }
        }
    }

    /// Input data at the simulation resolution.
    pub fn load_frame(&self) -> Result<SeriesFrame, CliError> {
        let base = self.load_base_frame()?;
        match self.resolution {
            Some(m) => {
                let r = Resolution::new(m).map_err(|e| CliError::Config(e.to_string()))?;
                resample(&base, r).map_err(|e| CliError::Config(e.to_string()))
            }
            None => Ok(base),
        }
    }
}

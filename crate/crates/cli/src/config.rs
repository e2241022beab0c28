use std::path::{Path, PathBuf};

use roadid_core::evaluation::log_range;
use roadid_core::{
    EstimatorSpec, HalfCarParams, NoiseConfig, NoiseSpec, RoughnessClass, SelectionMatrix, TruncationPolicy,
    TuningGrid,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Everything a command needs, read from TOML. Every table is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub vehicle: HalfCarParams,
    pub scenario: ScenarioConfig,
    pub estimator: EstimatorConfig,
    pub noise: NoiseConfig,
    pub tune: TuneConfig,
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            vehicle: HalfCarParams::default(),
            scenario: ScenarioConfig::default(),
            estimator: EstimatorConfig::default(),
            noise: NoiseConfig {
                qx: 1e-8,
                r_diag: vec![1e-6],
                qr: 1e-4,
            },
            tune: TuneConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub speed_kmh: f64,
    pub sample_rate_hz: f64,
    pub profile: ProfileSource,
    pub noise: NoiseSpec,
    /// Sensor channels, named as in [`Channel`].
    pub outputs: Vec<Channel>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            speed_kmh: 10.0,
            sample_rate_hz: 200.0,
            profile: ProfileSource::default(),
            noise: NoiseSpec {
                seed: 11,
                ..NoiseSpec::default()
            },
            outputs: vec![Channel::AccBounce, Channel::AccPitch],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProfileSource {
    Generated {
        class: RoughnessClass,
        length_m: f64,
        spacing_m: f64,
        seed: u64,
    },
    /// `distance_m,height_m` file; relative paths resolve against the
    /// config file's directory.
    Csv { path: PathBuf },
}

impl Default for ProfileSource {
    fn default() -> Self {
        Self::Generated {
            class: RoughnessClass::A,
            length_m: 40.5,
            spacing_m: 0.01,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    DispBounce,
    DispPitch,
    VelBounce,
    VelPitch,
    AccBounce,
    AccPitch,
}

impl Channel {
    /// Index into the stacked `[u; u̇; ü]` vector.
    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Us,
    Mvus,
    Dkf,
}

impl EstimatorKind {
    pub const ALL: [Self; 3] = [Self::Us, Self::Dkf, Self::Mvus];

    pub fn name(self) -> &'static str {
        match self {
            Self::Us => "us",
            Self::Mvus => "mvus",
            Self::Dkf => "dkf",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    pub kind: EstimatorKind,
    pub window: usize,
    /// Defaults to keeping all but one singular value of the window.
    pub truncation: Option<TruncationPolicy>,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            kind: EstimatorKind::Us,
            window: 100,
            truncation: None,
        }
    }
}

impl EstimatorConfig {
    pub fn spec(&self, kind: EstimatorKind, inputs: usize) -> EstimatorSpec {
        match kind {
            EstimatorKind::Us => EstimatorSpec::Us {
                window: self.window,
                truncation: self.truncation.unwrap_or(TruncationPolicy::count(inputs * (self.window + 1) - 1)),
            },
            EstimatorKind::Mvus => EstimatorSpec::Mvus { window: self.window },
            EstimatorKind::Dkf => EstimatorSpec::Dkf,
        }
    }
}

/// `lo, lo + step, ..., hi` in log10 units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogRange {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneConfig {
    pub log10_qx: LogRange,
    pub log10_qr: LogRange,
    /// Retained singular values; defaults to `1..=2(N+1)`.
    pub k_values: Option<Vec<usize>>,
}

impl Default for TuneConfig {
    fn default() -> Self {
        Self {
            log10_qx: LogRange {
                lo: -12.0,
                hi: -1.0,
                step: 0.1,
            },
            log10_qr: LogRange {
                lo: -8.0,
                hi: 2.0,
                step: 0.1,
            },
            k_values: None,
        }
    }
}

impl TuneConfig {
    pub fn grid(&self, window: usize, inputs: usize) -> Result<TuningGrid, CliError> {
        let range = |r: &LogRange| log_range(r.lo, r.hi, r.step).map_err(CliError::config);
        let grid = TuningGrid {
            qx_exponents: range(&self.log10_qx)?,
            qr_exponents: range(&self.log10_qr)?,
            k_values: self
                .k_values
                .clone()
                .unwrap_or_else(|| (1..=inputs * (window + 1)).collect()),
        };
        grid.validate().map_err(CliError::config)?;
        Ok(grid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub windows: Vec<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            windows: vec![10, 25, 50, 100, 150],
        }
    }
}

impl RunConfig {
    /// Read a TOML config, or the `config` entry of a JSON run manifest.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: Self = if path.extension().is_some_and(|e| e == "json") {
            let manifest: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            let cfg = manifest
                .get("config")
                .ok_or_else(|| CliError::config(format!("{} has no config entry", path.display())))?;
            serde_json::from_value(cfg.clone()).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?
        };
        if let ProfileSource::Csv { path: p } = &mut cfg.scenario.profile {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    /// Seed both the road generator and the sensor noise.
    pub fn set_seed(&mut self, seed: u64) {
        if let ProfileSource::Generated { seed: s, .. } = &mut self.scenario.profile {
            *s = seed;
        }
        self.scenario.noise.seed = seed;
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.vehicle.validate().map_err(CliError::config)?;
        self.scenario.noise.validate().map_err(CliError::config)?;
        let s = &self.scenario;
        if !(s.speed_kmh.is_finite() && s.speed_kmh > 0.0) {
            return Err(CliError::config(format!("speed_kmh must be positive, got {}", s.speed_kmh)));
        }
        if !(s.sample_rate_hz.is_finite() && s.sample_rate_hz > 0.0) {
            return Err(CliError::config(format!(
                "sample_rate_hz must be positive, got {}",
                s.sample_rate_hz
            )));
        }
        self.selection()?;
        self.noise.validate(s.outputs.len()).map_err(CliError::config)?;
        if self.sweep.windows.is_empty() {
            return Err(CliError::config("sweep.windows is empty"));
        }
        Ok(())
    }

    /// Vehicle speed [m/s], converted once from the configured km/h.
    pub fn speed(&self) -> f64 {
        self.scenario.speed_kmh / 3.6
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.scenario.sample_rate_hz
    }

    pub fn selection(&self) -> Result<SelectionMatrix, CliError> {
        let idx: Vec<usize> = self.scenario.outputs.iter().map(|c| c.index()).collect();
        SelectionMatrix::from_channels(2, &idx).map_err(CliError::config)
    }
}

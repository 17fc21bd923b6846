use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::ChannelConfig;
use crate::error::{Error, Result};
use crate::frontend::FrontendConfig;
use crate::geometry::ScenarioConfig;
use crate::localization::LocalizationConfig;
use crate::recovery::{RecoverySettings, SolverKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    /// Transmit power in dBm.
    Ptx,
    /// Pilot symbols G.
    G,
    /// Active ratio K_a / K.
    Activity,
    /// Subarray spacing in metres.
    Spacing,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            Self::Ptx => "ptx",
            Self::G => "g",
            Self::Activity => "activity",
            Self::Spacing => "spacing",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Ptx => "transmit power (dBm)",
            Self::G => "pilot symbols G",
            Self::Activity => "active ratio",
            Self::Spacing => "subarray spacing (m)",
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ptx" => Ok(Self::Ptx),
            "g" => Ok(Self::G),
            "activity" => Ok(Self::Activity),
            "spacing" => Ok(Self::Spacing),
            other => Err(Error::InvalidConfig(format!("unknown sweep axis `{other}`"))),
        }
    }
}

fn default_solvers() -> Vec<SolverKind> {
    SolverKind::ALL.to_vec()
}

/// `[sweep]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    #[serde(default = "default_solvers")]
    pub solvers: Vec<SolverKind>,
    /// Worker threads; 0 picks the number of CPUs.
    pub workers: usize,
    pub out_dir: PathBuf,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            axis: SweepAxis::Ptx,
            values: vec![0.0, 10.0, 20.0, 30.0],
            trials: 200,
            seed: 1,
            solvers: default_solvers(),
            workers: 0,
            out_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub channel: ChannelConfig,
    pub frontend: FrontendConfig,
    pub recovery: RecoverySettings,
    pub localization: LocalizationConfig,
    pub sweep: SweepConfig,
}

impl ExperimentConfig {
    /// 60 users, 6 active, 10 subarrays of 8 antennas, 2048 subcarriers.
    pub fn full_scale() -> Self {
        Self::default()
    }

    /// 20 users, 3 active, 6 subarrays of 4 antennas, 512 subcarriers, G = 30.
    pub fn reduced_scale() -> Self {
        let mut c = Self::default();
        c.scenario.users = 20;
        c.scenario.active_users = 3;
        c.scenario.subarrays = 6;
        c.channel.antennas_per_subarray = 4;
        c.channel.subcarriers = 512;
        c.frontend.g_symbols = 30;
        c
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.channel.validate()?;
        self.frontend.validate()?;
        self.localization.validate()?;
        if self.sweep.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.sweep.values.is_empty() {
            return Err(Error::InvalidConfig("sweep values must not be empty".into()));
        }
        if self.sweep.solvers.is_empty() {
            return Err(Error::InvalidConfig("at least one solver is required".into()));
        }
        Ok(())
    }

    /// Copy with the sweep axis set to `value`.
    pub fn at_point(&self, value: f64) -> Result<Self> {
        let mut c = self.clone();
        match self.sweep.axis {
            SweepAxis::Ptx => c.frontend.ptx_dbm = value,
            SweepAxis::G => {
                if !(value >= 1.0) {
                    return Err(Error::InvalidConfig(format!("G = {value} is not a positive count")));
                }
                c.frontend.g_symbols = value.round() as usize;
            }
            SweepAxis::Activity => {
                if !(value > 0.0 && value <= 1.0) {
                    return Err(Error::InvalidConfig(format!("activity ratio {value} outside (0, 1]")));
                }
                c.scenario.active_users = ((value * c.scenario.users as f64).round() as usize).max(1);
            }
            SweepAxis::Spacing => c.scenario.subarray_spacing_m = value,
        }
        c.validate()?;
        Ok(c)
    }
}

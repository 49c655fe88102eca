//! Run configuration: one TOML file, units spelled out in key names.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::ChshAngles;
use crate::counts::DetectorConfig;
use crate::error::{Error, Result};
use crate::memory::{EfficiencyFit, MemoryNoise, StoredArm};
use crate::oam_optics::ArmPaths;
use crate::source::SourceConfig;

/// Before or after the memory.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Pre,
    Post,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Pre => "pre",
            Stage::Post => "post",
        }
    }

    pub(crate) fn index(self) -> u64 {
        match self {
            Stage::Pre => 0,
            Stage::Post => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MemoryConfig {
    pub stored_arm: StoredArm,
    pub efficiency: EfficiencyFit,
    pub noise: MemoryNoise,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        MemoryConfig {
            stored_arm: StoredArm::Signal1,
            efficiency: EfficiencyFit::default(),
            noise: MemoryNoise::default(),
        }
    }
}

/// Which measurements `simulate` produces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasurementPlan {
    pub stages: Vec<Stage>,
    pub tomo16: bool,
    pub chsh: bool,
    pub chsh_angles: ChshAngles,
    pub visibility: bool,
    pub visibility_theta_a_deg: Vec<f64>,
    /// Evenly spaced `θ_B` over `[0°, 180°)`.
    pub visibility_points: usize,
    pub hbt: bool,
    pub correlate: bool,
    /// Coincidences per unit Born probability, before memory loss.
    pub counts_per_setting: f64,
    /// Mean accidental coincidences added to every setting.
    pub background_per_setting: f64,
}

pub const MAX_VISIBILITY_SCANS: usize = 24;

impl Default for MeasurementPlan {
    fn default() -> Self {
        MeasurementPlan {
            stages: vec![Stage::Pre, Stage::Post],
            tomo16: true,
            chsh: true,
            chsh_angles: ChshAngles::default(),
            visibility: true,
            visibility_theta_a_deg: vec![0.0, 45.0],
            visibility_points: 16,
            hbt: true,
            correlate: true,
            counts_per_setting: 1e4,
            background_per_setting: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_storage_time")]
    pub storage_time_ns: f64,
    /// Write-to-read pump delay; recorded only.
    #[serde(default = "default_pump_delay")]
    pub pump_delay_ns: f64,
    #[serde(default)]
    pub source: SourceConfig,
    #[serde(default = "default_detector")]
    pub detector: DetectorConfig,
    #[serde(default)]
    pub memory: MemoryConfig,
    #[serde(default)]
    pub optics: ArmPaths,
    #[serde(default)]
    pub plan: MeasurementPlan,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("run")
}

fn default_storage_time() -> f64 {
    150.0
}

fn default_pump_delay() -> f64 {
    260.0
}

fn default_detector() -> DetectorConfig {
    DetectorConfig {
        hbt_signal1: true,
        hbt_signal2: true,
        ..DetectorConfig::default()
    }
}

fn field(path: &str, msg: impl Into<String>) -> Error {
    Error::Config {
        field: path.to_string(),
        msg: msg.into(),
    }
}

impl RunConfig {
    pub fn with_seed(seed: u64) -> Self {
        RunConfig {
            seed,
            output_dir: default_output_dir(),
            storage_time_ns: default_storage_time(),
            pump_delay_ns: default_pump_delay(),
            source: SourceConfig::default(),
            detector: default_detector(),
            memory: MemoryConfig::default(),
            optics: ArmPaths::default(),
            plan: MeasurementPlan::default(),
        }
    }

    /// Parses TOML. `seed_override` replaces or supplies the `seed` key.
    pub fn from_toml(text: &str, seed_override: Option<u64>) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| field("<toml>", e.message()))?;
        if let Some(s) = seed_override {
            let s = i64::try_from(s).map_err(|_| field("seed", "must not exceed 2^63 - 1"))?;
            table.insert("seed".into(), toml::Value::Integer(s));
        }
        let cfg: RunConfig = serde_path_to_error::deserialize(table).map_err(|e| {
            let path = e.path().to_string();
            field(if path == "." { "<root>" } else { &path }, e.into_inner().message())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, seed_override: Option<u64>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, seed_override)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| field("<root>", e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if i64::try_from(self.seed).is_err() {
            return Err(field("seed", "must not exceed 2^63 - 1"));
        }
        if !(self.storage_time_ns >= 0.0) || !self.storage_time_ns.is_finite() {
            return Err(field("storage_time_ns", "must be finite and non-negative"));
        }
        if !self.pump_delay_ns.is_finite() {
            return Err(field("pump_delay_ns", "must be finite"));
        }
        self.source.validate()?;
        self.detector.validate()?;
        self.memory
            .efficiency
            .validate()
            .map_err(|e| field("memory.efficiency", e.to_string()))?;
        self.memory
            .noise
            .validate()
            .map_err(|e| field("memory.noise", e.to_string()))?;

        let p = &self.plan;
        if p.stages.is_empty() {
            return Err(field("plan.stages", "list at least one of \"pre\", \"post\""));
        }
        let mut seen = p.stages.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != p.stages.len() {
            return Err(field("plan.stages", "stages must not repeat"));
        }
        if !(p.counts_per_setting >= 0.0) || !p.counts_per_setting.is_finite() {
            return Err(field("plan.counts_per_setting", "must be finite and non-negative"));
        }
        if !(p.background_per_setting >= 0.0) || !p.background_per_setting.is_finite() {
            return Err(field("plan.background_per_setting", "must be finite and non-negative"));
        }
        if p.visibility {
            if p.visibility_theta_a_deg.is_empty() || p.visibility_theta_a_deg.len() > MAX_VISIBILITY_SCANS {
                return Err(field(
                    "plan.visibility_theta_a_deg",
                    format!("give between 1 and {MAX_VISIBILITY_SCANS} angles"),
                ));
            }
            if p.visibility_theta_a_deg.iter().any(|t| !t.is_finite()) {
                return Err(field("plan.visibility_theta_a_deg", "angles must be finite"));
            }
            if p.visibility_points < 4 {
                return Err(field("plan.visibility_points", "need at least 4 points"));
            }
        }
        let a = &p.chsh_angles;
        if [a.a, a.a_prime, a.b, a.b_prime].iter().any(|t| !t.is_finite()) {
            return Err(field("plan.chsh_angles", "angles must be finite"));
        }
        Ok(())
    }
}

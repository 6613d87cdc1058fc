//! TOML experiment files. One file describes a run of one or more
//! experiments; bundled presets live in `presets/`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationConfig;
use crate::collusion::DetectionScenario;
use crate::error::{Error, Result};
use crate::investor::{IrDistribution, PoolConfig};
use crate::load::LoadConfig;
use crate::longtail::LongtailConfig;
use crate::protocol::cp::CpConfig;
use crate::protocol::passive::PassiveImConfig;
use crate::protocol::rebel::RebelConfig;
use crate::protocol::Protocol;
use crate::universe::UniverseConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentFile {
    pub seed: u64,
    /// Trials per scenario and per ablation cell.
    pub trials: usize,
    pub top_slots: usize,
    pub output_dir: PathBuf,
    #[serde(rename = "scenario")]
    pub scenarios: Vec<ScenarioConfig>,
    pub ablation: Option<AblationConfig>,
    pub calibration: Option<CalibrationRuns>,
    pub collusion: Option<CollusionRuns>,
    pub load: Option<LoadConfig>,
    pub longtail: Option<LongtailInput>,
}

impl Default for ExperimentFile {
    fn default() -> Self {
        ExperimentFile {
            seed: 1,
            trials: 200,
            top_slots: 120,
            output_dir: PathBuf::from("out"),
            scenarios: Vec::new(),
            ablation: None,
            calibration: None,
            collusion: None,
            load: None,
            longtail: None,
        }
    }
}

/// One protocol on one universe and pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub protocol: Protocol,
    #[serde(default)]
    pub universe: UniverseConfig,
    #[serde(default)]
    pub pool: PoolConfig,
    #[serde(default)]
    pub cp: CpConfig,
    #[serde(default)]
    pub passive: PassiveImConfig,
    #[serde(default)]
    pub rebel: RebelConfig,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::config("scenario: name must not be empty"));
        }
        let ctx = |e: Error| match e {
            Error::Config(m) => Error::Config(format!("scenario '{}': {m}", self.name)),
            other => other,
        };
        self.universe.validate().map_err(ctx)?;
        self.pool.validate().map_err(ctx)?;
        let market = self.universe.market_size;
        match self.protocol {
            Protocol::Cp => self.cp.validate(market).map_err(ctx),
            Protocol::ImPassive => self.passive.validate().map_err(ctx),
            Protocol::ImRebel => self.rebel.validate(market).map_err(ctx),
        }
    }
}

/// Pick-count ablation of the rebel model over the four named pools.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    pub scan: usize,
    pub picks: Vec<usize>,
    pub pools: Vec<IrDistribution>,
    pub universe: UniverseConfig,
    pub pool: PoolConfig,
    pub rebel: RebelConfig,
}

impl Default for AblationConfig {
    fn default() -> Self {
        AblationConfig {
            scan: 25,
            picks: vec![5, 10, 20],
            pools: IrDistribution::SCENARIOS.to_vec(),
            universe: UniverseConfig::default(),
            pool: PoolConfig::default(),
            rebel: RebelConfig::default(),
        }
    }
}

impl AblationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.picks.is_empty() || self.pools.is_empty() {
            return Err(Error::config("ablation: picks and pools must not be empty"));
        }
        for &p in &self.picks {
            if p == 0 || p > self.scan {
                return Err(Error::config(format!("ablation: pick {p} must lie in 1..={}", self.scan)));
            }
        }
        self.universe.validate()?;
        self.pool.validate()?;
        for d in &self.pools {
            d.validate()?;
        }
        RebelConfig { n_scan: self.scan, n_pick: self.picks[0], ..self.rebel.clone() }.validate(self.universe.market_size)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationRuns {
    pub runs: usize,
    pub cycles: CalibrationConfig,
}

impl Default for CalibrationRuns {
    fn default() -> Self {
        CalibrationRuns { runs: 1, cycles: CalibrationConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollusionRuns {
    /// Runs with the ring planted.
    pub runs: usize,
    /// Runs of the same world without a ring, for the false-flag rate.
    pub null_runs: usize,
    pub scenario: DetectionScenario,
}

impl Default for CollusionRuns {
    fn default() -> Self {
        CollusionRuns { runs: 100, null_runs: 100, scenario: DetectionScenario::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LongtailInput {
    /// CSV with `venue,paper,citations`; relative paths resolve against the config file.
    pub input: PathBuf,
    #[serde(default)]
    pub stats: LongtailConfig,
}

impl ExperimentFile {
    pub fn parse(text: &str) -> Result<Self> {
        let file: ExperimentFile = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        file.validate()?;
        Ok(file)
    }

    /// Parses `path` and resolves relative input paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::config(format!("config file {} not found", path.display())),
            _ => Error::io(path, e),
        })?;
        let mut file = Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        if let Some(lt) = &mut file.longtail {
            if lt.input.is_relative() {
                lt.input = path.parent().unwrap_or(Path::new(".")).join(&lt.input);
            }
        }
        Ok(file)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("trials must be at least 1"));
        }
        if self.top_slots == 0 {
            return Err(Error::config("top_slots must be at least 1"));
        }
        let mut names = std::collections::BTreeSet::new();
        for s in &self.scenarios {
            s.validate()?;
            if !names.insert(&s.name) {
                return Err(Error::config(format!("duplicate scenario name '{}'", s.name)));
            }
        }
        if let Some(a) = &self.ablation {
            a.validate()?;
        }
        if let Some(c) = &self.calibration {
            if c.runs == 0 {
                return Err(Error::config("calibration: runs must be at least 1"));
            }
            c.cycles.validate()?;
        }
        if let Some(c) = &self.collusion {
            c.scenario.detector.validate()?;
            c.scenario.universe.validate()?;
            c.scenario.pool.validate()?;
        }
        if let Some(l) = &self.load {
            l.validate()?;
        }
        Ok(())
    }
}

/// A bundled preset by name.
pub fn preset(name: &str) -> Option<&'static str> {
    Some(match name {
        "table2" => include_str!("../presets/table2.toml"),
        "table3" => include_str!("../presets/table3.toml"),
        "table4" => include_str!("../presets/table4.toml"),
        "calibration" => include_str!("../presets/calibration.toml"),
        "collusion" => include_str!("../presets/collusion.toml"),
        "load" => include_str!("../presets/load.toml"),
        "longtail" => include_str!("../presets/longtail.toml"),
        _ => return None,
    })
}

pub const PRESETS: [&str; 7] = ["table2", "table3", "table4", "calibration", "collusion", "load", "longtail"];

//! Run configuration: one TOML file covering every module, with a
//! stable hash and a resolved-config echo.
//!
//! All invented defaults live here so each one is visible and
//! overridable. Unknown keys are rejected everywhere.

use crate::error::{Error, Result};
use crate::harness::{ReferenceKind, ReferenceTrajectory};
use crate::lstm_ctrl::{ExcitationConfig, InverseTrainConfig};
use crate::pid::PidGrid;
use crate::plant::PlantConfig;
use crate::rl::TrainerConfig;
use crate::seeds::fnv1a64;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Which trainer a `train` invocation runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algo {
    FmcDdpg,
    FmcDqn,
    FmcSac,
    BaselineDdpg,
    BaselineDqn,
    BaselineSac,
    LstmInverse,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::FmcDdpg => "fmc-ddpg",
            Algo::FmcDqn => "fmc-dqn",
            Algo::FmcSac => "fmc-sac",
            Algo::BaselineDdpg => "baseline-ddpg",
            Algo::BaselineDqn => "baseline-dqn",
            Algo::BaselineSac => "baseline-sac",
            Algo::LstmInverse => "lstm-inverse",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "fmc-ddpg" => Ok(Algo::FmcDdpg),
            "fmc-dqn" => Ok(Algo::FmcDqn),
            "fmc-sac" => Ok(Algo::FmcSac),
            "baseline-ddpg" => Ok(Algo::BaselineDdpg),
            "baseline-dqn" => Ok(Algo::BaselineDqn),
            "baseline-sac" => Ok(Algo::BaselineSac),
            "lstm-inverse" => Ok(Algo::LstmInverse),
            other => Err(Error::Input(format!("unknown algorithm '{other}'"))),
        }
    }
}

/// Parameters for one reference trajectory; which ones apply depends
/// on `kind`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReferenceSpec {
    pub kind: ReferenceKind,
    pub levels: Vec<f64>,
    pub offset: f64,
    pub amplitude: f64,
    /// Cycles per step.
    pub frequency: f64,
}

impl Default for ReferenceSpec {
    fn default() -> Self {
        Self {
            kind: ReferenceKind::Steps,
            levels: vec![10.0, 40.0, 25.0, 60.0],
            offset: 30.0,
            amplitude: 20.0,
            frequency: 0.005,
        }
    }
}

impl ReferenceSpec {
    pub fn build(&self, n: usize, theta_max: f64) -> Result<ReferenceTrajectory> {
        match self.kind {
            ReferenceKind::Steps => ReferenceTrajectory::steps(&self.levels, n, theta_max),
            ReferenceKind::Sine => ReferenceTrajectory::sine(
                self.offset,
                self.amplitude,
                self.frequency,
                n,
                theta_max,
            ),
            ReferenceKind::Mixed => ReferenceTrajectory::mixed(
                &self.levels,
                self.offset,
                self.amplitude,
                self.frequency,
                n,
                theta_max,
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HarnessSection {
    pub episode_steps: usize,
    pub reward_scale: f64,
    /// Evaluation reference for `eval` and `compare`.
    pub test: ReferenceSpec,
    /// Training reference for the RL trainers.
    pub train: ReferenceSpec,
    /// Seeds evaluated by `compare`.
    pub eval_seeds: Vec<u64>,
}

impl Default for HarnessSection {
    fn default() -> Self {
        Self {
            episode_steps: 400,
            reward_scale: 1000.0,
            test: ReferenceSpec::default(),
            train: ReferenceSpec { kind: ReferenceKind::Sine, ..ReferenceSpec::default() },
            eval_seeds: vec![0, 1, 2],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LstmSection {
    /// Dataset size M.
    pub samples: usize,
    pub train: InverseTrainConfig,
    pub excitation: ExcitationConfig,
}

impl Default for LstmSection {
    fn default() -> Self {
        Self {
            samples: 20_000,
            train: InverseTrainConfig::default(),
            excitation: ExcitationConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Global seed; overrides the per-section seeds when a run is
    /// assembled.
    pub seed: u64,
    pub out_dir: String,
    pub plant: PlantConfig,
    pub trainer: TrainerConfig,
    pub lstm: LstmSection,
    pub pid: PidGrid,
    pub harness: HarnessSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: "out".into(),
            plant: PlantConfig::default(),
            trainer: TrainerConfig::default(),
            lstm: LstmSection::default(),
            pid: PidGrid::default(),
            harness: HarnessSection::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text)
            .map_err(|e| Error::Config(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.plant.validate()?;
        self.trainer.validate()?;
        self.lstm.train.validate()?;
        if self.lstm.samples < 2 {
            return Err(Error::Config("config: lstm.samples must be at least 2".into()));
        }
        if self.harness.episode_steps == 0 {
            return Err(Error::Config("config: harness.episode_steps must be positive".into()));
        }
        if !(self.harness.reward_scale > 0.0) {
            return Err(Error::Config("config: harness.reward_scale must be positive".into()));
        }
        if self.harness.eval_seeds.is_empty() {
            return Err(Error::Config("config: harness.eval_seeds must be non-empty".into()));
        }
        // Reference specs must be constructible for the configured plant.
        self.harness.test.build(self.harness.episode_steps, self.plant.theta_max)?;
        self.harness.train.build(self.harness.episode_steps, self.plant.theta_max)?;
        Ok(())
    }

    /// Serializes the fully-resolved configuration for the output
    /// directory echo.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Format(format!("config: {e}")))
    }

    /// Stable 16-hex-digit hash of the resolved configuration. The
    /// output directory is excluded: where artifacts land is not part
    /// of the experiment identity.
    pub fn hash(&self) -> String {
        let mut keyed = self.clone();
        keyed.out_dir = String::new();
        let canonical = serde_json::to_string(&keyed).expect("config serializes");
        format!("{:016x}", fnv1a64(canonical.as_bytes()))
    }

    /// Trainer settings for one algorithm under one effective seed:
    /// the global seed wins, and SAC swaps in its own output scale.
    pub fn trainer_for(&self, algo: Algo, seed: u64) -> TrainerConfig {
        let mut t = self.trainer.clone();
        t.seed = seed;
        t.steps_per_episode = self.harness.episode_steps;
        if matches!(algo, Algo::FmcSac | Algo::BaselineSac) {
            t.out_scale = t.sac_out_scale;
        }
        t
    }
}

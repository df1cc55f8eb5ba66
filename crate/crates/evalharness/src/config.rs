//! TOML experiment configuration.
//!
//! One file carries the world, network, training and evaluation settings.
//! Every section and field is optional and falls back to its default; unknown
//! keys are rejected. Relative paths are taken relative to the working
//! directory.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use swarmtrack_core::WorldConfig;
use swarmtrack_trainer::{PolicyMode, TrainConfig};
use swarmtrack_valuenet::NetConfig;

use crate::eval::{EvalSettings, NetSource};
use crate::task::{parse_mask, TaskSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub world: WorldConfig,
    pub net: NetConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

/// A mask setting as written in config files: `"none"` or a positive count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mask(pub Option<usize>);

impl Serialize for Mask {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0 {
            Some(k) => s.serialize_u64(k as u64),
            None => s.serialize_str("none"),
        }
    }
}

impl<'de> Deserialize<'de> for Mask {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct MaskVisitor;
        impl Visitor<'_> for MaskVisitor {
            type Value = Mask;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("\"none\" or a positive integer")
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Mask, E> {
                if v < 1 {
                    return Err(E::custom(format!("mask must be positive, got {v}")));
                }
                Ok(Mask(Some(v as usize)))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Mask, E> {
                self.visit_i64(i64::try_from(v).map_err(E::custom)?)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Mask, E> {
                parse_mask(v).map(Mask).map_err(E::custom)
            }
        }
        d.deserialize_any(MaskVisitor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Checkpoint files; each is evaluated on every task and mask.
    pub checkpoints: Vec<PathBuf>,
    /// Task labels such as "4a4t" or "1ka1kt".
    pub tasks: Vec<String>,
    pub masks: Vec<Mask>,
    pub episodes: usize,
    pub seeds: Vec<u64>,
    /// Sampling temperature for stochastic checkpoints.
    pub alpha: f64,
    /// Argmax of the minimum Q for every checkpoint.
    pub greedy: bool,
    /// Overrides the policy mode recorded in each checkpoint.
    pub policy_mode: Option<PolicyMode>,
    /// Evaluate the online nets or their averaged target copies.
    pub nets: NetSource,
    /// Add a uniform-random row for every task.
    pub random_baseline: bool,
    pub record_timing: bool,
    /// Per-episode results file.
    pub results: PathBuf,
    /// One report per cell as JSON lines.
    pub summary: Option<PathBuf>,
    pub trace_dir: Option<PathBuf>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        let s = EvalSettings::default();
        Self {
            checkpoints: Vec::new(),
            tasks: vec!["1a1t".into(), "2a2t".into(), "4a4t".into()],
            masks: vec![Mask(None)],
            episodes: s.episodes,
            seeds: s.seeds,
            alpha: s.alpha,
            greedy: s.greedy,
            policy_mode: None,
            nets: NetSource::default(),
            random_baseline: false,
            record_timing: s.record_timing,
            results: PathBuf::from("results.csv"),
            summary: None,
            trace_dir: None,
        }
    }
}

impl EvalConfig {
    pub fn task_specs(&self) -> Result<Vec<TaskSpec>> {
        if self.tasks.is_empty() {
            return Err(Error::InvalidArgument("eval.tasks is empty".into()));
        }
        self.tasks.iter().map(|t| t.parse()).collect()
    }

    pub fn settings(&self, world: &WorldConfig) -> EvalSettings {
        EvalSettings {
            world: world.clone(),
            episodes: self.episodes,
            seeds: self.seeds.clone(),
            alpha: self.alpha,
            greedy: self.greedy,
            record_timing: self.record_timing,
            trace_dir: self.trace_dir.clone(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.net.validate()?;
        self.train.validate()?;
        self.eval.task_specs()?;
        if self.eval.masks.is_empty() {
            return Err(Error::InvalidArgument("eval.masks is empty; use [\"none\"] for unmasked".into()));
        }
        self.eval.settings(&self.world).validate()
    }
}

//! Run configuration, read from TOML. Every table and key is optional; a
//! missing key takes its default.
//!
//! ```toml
//! seed = 7      # optional; seeds every randomized section
//!
//! [world]        # template for generated worlds; world i uses seed + i
//! size = 512
//! segment = 12.0
//!
//! [generate]
//! count = 10
//!
//! [decision]     # window d, angle bins a, graph stroke width
//! window = 64
//! angle_bins = 64
//!
//! [structure]    # adaptive-structure thresholds
//! [pretrain]
//! [head]
//! [training]     # oracle training-set options
//!
//! [search]       # step distance D, threshold T, snap radius, step budget
//! threshold = 0.1
//!
//! [eval]
//! r_match = 6.0
//!
//! [render]
//! color = [255, 255, 0]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adaptive::StructureThresholds;
use crate::decision::{DecisionConfig, HeadSchedule};
use crate::error::{Error, Result};
use crate::pretrain::PretrainSchedule;
use crate::render::RenderStyle;
use crate::search::SearchConfig;
use crate::world::{TrainingSetOptions, WorldSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerateConfig {
    pub count: usize,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self { count: 1 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Match radius; `None` means `D / 2`.
    pub r_match: Option<f64>,
    /// Resampling spacing; `None` means `D`.
    pub spacing: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// When set, seeds every randomized section (see [`RunConfig::apply_seed`]).
    pub seed: Option<u64>,
    pub world: WorldSpec,
    pub generate: GenerateConfig,
    pub decision: DecisionConfig,
    pub structure: StructureThresholds,
    pub pretrain: PretrainSchedule,
    pub head: HeadSchedule,
    pub training: TrainingSetOptions,
    pub search: SearchConfig,
    pub eval: EvalConfig,
    pub render: RenderStyle,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn r_match(&self) -> f64 {
        self.eval.r_match.unwrap_or(self.search.step_distance / 2.0)
    }

    pub fn spacing(&self) -> f64 {
        self.eval.spacing.unwrap_or(self.search.step_distance)
    }

    /// Derives the world, training-set, pretraining and head seeds from one
    /// base seed.
    pub fn apply_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        self.world.seed = seed;
        self.training.seed = seed;
        self.pretrain.seed = seed.wrapping_add(1);
        self.head.seed = seed.wrapping_add(2);
    }

    /// Spec for the `i`-th generated world.
    pub fn world_spec(&self, i: usize) -> WorldSpec {
        WorldSpec {
            seed: self.world.seed.wrapping_add(i as u64),
            ..self.world.clone()
        }
    }

    /// Checks every section.
    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.decision.validate()?;
        self.structure.validate()?;
        self.pretrain.validate()?;
        self.head.validate()?;
        self.search.validate()?;
        self.render.validate()?;
        for (name, v) in [("r_match", self.eval.r_match), ("spacing", self.eval.spacing)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::config(format!("{name} must be > 0")));
                }
            }
        }
        if !(self.training.jitter_radius >= 0.0 && self.training.max_walk_ratio > 0.0) {
            return Err(Error::config("training jitter must be >= 0 and walk ratio > 0"));
        }
        Ok(())
    }
}

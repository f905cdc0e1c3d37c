//! Reward combination and query scheduling.
//!
//! The shaped per-step reward is the plain sum `r_total = r_env + r_llm`,
//! where `r_llm` comes from mapping the evaluator's verdict (good move -> +1,
//! bad move -> -1, anything else -> 0). The evaluator is only consulted every
//! `query_interval` steps; in between, `r_llm` is zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feedback::Verdict;

fn default_query_interval() -> u32 {
    4
}
fn default_good_reward() -> f64 {
    1.0
}
fn default_bad_reward() -> f64 {
    -1.0
}
fn default_unparsed_reward() -> f64 {
    0.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapingConfig {
    /// Timesteps between evaluator queries.
    #[serde(default = "default_query_interval")]
    pub query_interval: u32,
    #[serde(default = "default_good_reward")]
    pub good_reward: f64,
    #[serde(default = "default_bad_reward")]
    pub bad_reward: f64,
    /// Kept configurable-looking for symmetry but pinned to zero: an
    /// unparsed response must pass nothing on to the agent.
    #[serde(default = "default_unparsed_reward")]
    pub unparsed_reward: f64,
}

impl Default for ShapingConfig {
    fn default() -> Self {
        ShapingConfig {
            query_interval: default_query_interval(),
            good_reward: default_good_reward(),
            bad_reward: default_bad_reward(),
            unparsed_reward: default_unparsed_reward(),
        }
    }
}

impl ShapingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.query_interval < 1 {
            return Err(Error::invalid_config("shaping.query_interval", "must be >= 1"));
        }
        if !self.good_reward.is_finite() {
            return Err(Error::invalid_config("shaping.good_reward", "must be finite"));
        }
        if !self.bad_reward.is_finite() {
            return Err(Error::invalid_config("shaping.bad_reward", "must be finite"));
        }
        if self.unparsed_reward != 0.0 {
            return Err(Error::invalid_config("shaping.unparsed_reward", "fixed at 0"));
        }
        Ok(())
    }
}

/// The per-step reward decomposition handed to the agent and the logs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapedReward {
    pub r_env: f64,
    pub r_llm: f64,
    pub r_total: f64,
}

/// Verdict -> scalar: good move +1, bad move -1, unparsed 0 (defaults).
pub fn verdict_to_reward(v: Verdict, cfg: &ShapingConfig) -> f64 {
    match v {
        Verdict::GoodMove => cfg.good_reward,
        Verdict::BadMove => cfg.bad_reward,
        Verdict::Unparsed => cfg.unparsed_reward,
    }
}

/// `r_total = r_env + r_llm`, exactly.
pub fn combine(r_env: f64, r_llm: f64) -> ShapedReward {
    ShapedReward {
        r_env,
        r_llm,
        r_total: r_env + r_llm,
    }
}

/// Whether the evaluator is consulted after the step that produced
/// `step_index` (1-based within the episode): every `query_interval`-th step.
/// An episode of length L therefore triggers exactly floor(L / interval)
/// queries.
pub fn should_query(step_index: u32, cfg: &ShapingConfig) -> bool {
    step_index >= 1 && step_index % cfg.query_interval == 0
}

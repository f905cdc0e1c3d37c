//! Tabular Q-learning over a discretized observation.
//!
//! The observation is reduced to a [`StateKey`]: the gripper-to-target offset
//! bucketed into `bins_per_axis` bins per axis, plus the open and grasped
//! flags. Relative-to-target bucketing lets episodes with different random
//! spawns share table entries, which is what makes a tabular learner viable
//! here.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Action, Axis, Observation, TaskName, TaskSpec};
use crate::error::{Error, Result};

/// Discretized agent state. `B^3 * 2 * 2` possible values at `B` bins per
/// axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateKey {
    pub bx: u8,
    pub by: u8,
    pub bz: u8,
    pub open: bool,
    pub grasped: bool,
}

fn default_learning_rate() -> f64 {
    0.1
}
fn default_discount() -> f64 {
    0.99
}
fn default_epsilon_start() -> f64 {
    1.0
}
fn default_epsilon_end() -> f64 {
    0.05
}
fn default_bins_per_axis() -> u8 {
    12
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_discount")]
    pub discount: f64,
    /// Exploration decays linearly from `epsilon_start` to `epsilon_end`
    /// over the first half of training, then stays at `epsilon_end`.
    #[serde(default = "default_epsilon_start")]
    pub epsilon_start: f64,
    #[serde(default = "default_epsilon_end")]
    pub epsilon_end: f64,
    #[serde(default = "default_bins_per_axis")]
    pub bins_per_axis: u8,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            learning_rate: default_learning_rate(),
            discount: default_discount(),
            epsilon_start: default_epsilon_start(),
            epsilon_end: default_epsilon_end(),
            bins_per_axis: default_bins_per_axis(),
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::invalid_config("agent.learning_rate", "must be in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return Err(Error::invalid_config("agent.discount", "must be in [0, 1]"));
        }
        for (key, eps) in [
            ("agent.epsilon_start", self.epsilon_start),
            ("agent.epsilon_end", self.epsilon_end),
        ] {
            if !(0.0..=1.0).contains(&eps) {
                return Err(Error::invalid_config(key, "must be in [0, 1]"));
            }
        }
        if self.epsilon_end > self.epsilon_start {
            return Err(Error::invalid_config(
                "agent.epsilon_end",
                "must not exceed epsilon_start",
            ));
        }
        if self.bins_per_axis == 0 {
            return Err(Error::invalid_config("agent.bins_per_axis", "must be >= 1"));
        }
        Ok(())
    }

    /// Exploration rate at a global training step.
    pub fn epsilon_at(&self, step: u64, total_steps: u64) -> f64 {
        let horizon = (total_steps / 2).max(1);
        if step >= horizon {
            return self.epsilon_end;
        }
        let frac = step as f64 / horizon as f64;
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }
}

/// Map the gripper-to-target offset (and the two gripper flags) to a table
/// key. The offset along each axis lives in [-extent, +extent]; that range is
/// split into `bins` equal buckets.
pub fn discretize(obs: &Observation, task: &TaskSpec, bins: u8) -> StateKey {
    let target = task
        .target_object(obs)
        .map(|o| o.position)
        .unwrap_or_else(|| task.workspace.center());
    let g = obs.gripper.position;
    let mut idx = [0u8; 3];
    for (i, axis) in Axis::ALL.into_iter().enumerate() {
        let extent = task.workspace.extent(axis);
        idx[i] = if extent > 0.0 {
            let offset = target.axis(axis) - g.axis(axis);
            let normalized = (offset + extent) / (2.0 * extent);
            ((normalized * bins as f64).floor() as i64).clamp(0, bins as i64 - 1) as u8
        } else {
            0
        };
    }
    StateKey {
        bx: idx[0],
        by: idx[1],
        bz: idx[2],
        open: obs.gripper.open,
        grasped: obs.gripper.grasped.is_some(),
    }
}

/// Sparse action-value table; absent entries are 0.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QTable {
    values: HashMap<StateKey, [f64; Action::COUNT]>,
}

/// Metadata stored alongside the values so a table can be re-used safely.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QTableMeta {
    pub bins_per_axis: u8,
    pub task: TaskName,
}

const QTABLE_MAGIC: &str = "mentor-qtable v1";

impl QTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, s: &StateKey, a: Action) -> f64 {
        self.values.get(s).map_or(0.0, |row| row[a.index()])
    }

    pub fn set(&mut self, s: StateKey, a: Action, v: f64) {
        self.values.entry(s).or_insert([0.0; Action::COUNT])[a.index()] = v;
    }

    pub fn row(&self, s: &StateKey) -> [f64; Action::COUNT] {
        self.values.get(s).copied().unwrap_or([0.0; Action::COUNT])
    }

    pub fn max_value(&self, s: &StateKey) -> f64 {
        self.row(s).into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Argmax with first-in-order tie-break, so greedy play is deterministic.
    pub fn greedy_action(&self, s: &StateKey) -> Action {
        let row = self.row(s);
        let mut best = Action::ALL[0];
        let mut best_v = row[0];
        for a in Action::ALL.into_iter().skip(1) {
            if row[a.index()] > best_v {
                best = a;
                best_v = row[a.index()];
            }
        }
        best
    }

    /// Serialize as a versioned, sorted, lossless text artifact.
    pub fn save(&self, path: &Path, meta: &QTableMeta) -> Result<()> {
        let mut out = String::new();
        writeln!(out, "{QTABLE_MAGIC}").unwrap();
        writeln!(out, "task\t{}", meta.task).unwrap();
        writeln!(out, "bins_per_axis\t{}", meta.bins_per_axis).unwrap();
        let mut keys: Vec<&StateKey> = self.values.keys().collect();
        keys.sort();
        for key in keys {
            let row = &self.values[key];
            for a in Action::ALL {
                let v = row[a.index()];
                if v != 0.0 {
                    // 17 significant digits round-trip f64 exactly.
                    writeln!(
                        out,
                        "{}\t{}\t{}\t{}\t{}\t{}\t{:.17e}",
                        key.bx, key.by, key.bz, key.open as u8, key.grasped as u8,
                        a.label(),
                        v
                    )
                    .unwrap();
                }
            }
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<(QTable, QTableMeta)> {
        let text = std::fs::read_to_string(path)?;
        let loc = || path.display().to_string();
        let mut lines = text.lines();
        match lines.next() {
            Some(QTABLE_MAGIC) => {}
            other => {
                return Err(Error::bad_artifact(
                    loc(),
                    format!("expected header '{QTABLE_MAGIC}', found {other:?}"),
                ))
            }
        }
        let mut header_field = |name: &str| -> Result<String> {
            match lines.next().and_then(|l| l.split_once('\t')) {
                Some((k, v)) if k == name => Ok(v.to_string()),
                other => Err(Error::bad_artifact(loc(), format!("expected '{name}' line, found {other:?}"))),
            }
        };
        let task: TaskName = header_field("task")?
            .parse()
            .map_err(|e: String| Error::bad_artifact(loc(), e))?;
        let bins_per_axis: u8 = header_field("bins_per_axis")?
            .parse()
            .map_err(|e| Error::bad_artifact(loc(), format!("bins_per_axis: {e}")))?;

        let mut table = QTable::new();
        for (lineno, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            let mut next = || {
                parts
                    .next()
                    .ok_or_else(|| Error::bad_artifact(loc(), format!("line {}: too few fields", lineno + 4)))
            };
            let parse_u8 = |s: &str| {
                s.parse::<u8>()
                    .map_err(|e| Error::bad_artifact(loc(), format!("line {}: {e}", lineno + 4)))
            };
            let bx = parse_u8(next()?)?;
            let by = parse_u8(next()?)?;
            let bz = parse_u8(next()?)?;
            let open = parse_u8(next()?)? != 0;
            let grasped = parse_u8(next()?)? != 0;
            let action = Action::from_label(next()?).ok_or_else(|| {
                Error::bad_artifact(loc(), format!("line {}: unknown action label", lineno + 4))
            })?;
            let value: f64 = next()?
                .parse()
                .map_err(|e| Error::bad_artifact(loc(), format!("line {}: {e}", lineno + 4)))?;
            if !value.is_finite() {
                return Err(Error::bad_artifact(loc(), format!("line {}: non-finite value", lineno + 4)));
            }
            table.set(StateKey { bx, by, bz, open, grasped }, action, value);
        }
        Ok((table, QTableMeta { task, bins_per_axis }))
    }
}

/// Epsilon-greedy action choice with the fixed-order tie-break.
pub fn select_action(q: &QTable, s: &StateKey, epsilon: f64, rng: &mut impl Rng) -> Action {
    if rng.random::<f64>() < epsilon {
        Action::ALL[rng.random_range(0..Action::COUNT)]
    } else {
        q.greedy_action(s)
    }
}

/// One-step Q-learning backup. Terminal transitions do not bootstrap.
pub fn update(
    q: &mut QTable,
    s: StateKey,
    a: Action,
    r_total: f64,
    s_next: &StateKey,
    terminal: bool,
    cfg: &AgentConfig,
) {
    let bootstrap = if terminal {
        0.0
    } else {
        cfg.discount * q.max_value(s_next)
    };
    let row = q.values.entry(s).or_insert([0.0; Action::COUNT]);
    let old = row[a.index()];
    row[a.index()] = old + cfg.learning_rate * (r_total + bootstrap - old);
}

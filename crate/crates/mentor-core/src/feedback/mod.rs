//! Evaluative feedback: turning a transition into a "good move"/"bad move"
//! judgment.
//!
//! Three evaluator families share one interface: a deterministic scripted
//! oracle (the reference implementation used in CI), a noise-wrapped oracle
//! for robustness ablations, and a chat-completion client that asks an
//! external model (see [`llm`]). All of them return free text; the single
//! keyword parser [`parse_verdict`] is the only thing that assigns meaning
//! to it.

mod llm;

pub use llm::{llm_evaluate, LlmEvaluator, API_KEY_ENV};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{goal_reached, Action, TaskName, TaskSpec, Transition};
use crate::error::{Error, Result};
use crate::scene::{distance, DistanceQuery, SceneDescription};

/// Parsed judgment of one transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    GoodMove,
    BadMove,
    /// No keyword found; contributes zero reward.
    Unparsed,
}

/// Rough stage of a manipulation episode. `push_button` only ever uses
/// `Approach`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Approach,
    Grasp,
    Lift,
}

/// The two user-authored prompt templates. `{task_description}` and
/// `{scene_description}` are filled when the observer message is built;
/// `{tool_results}` carries distance-query answers into the evaluation
/// message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub scene_mission: String,
    pub eval_mission: String,
}

pub const PLACEHOLDERS: [&str; 3] = ["{task_description}", "{scene_description}", "{tool_results}"];

impl PromptBundle {
    /// The prompts shipped with the crate (see the `prompts/` directory).
    pub fn builtin() -> PromptBundle {
        PromptBundle {
            scene_mission: include_str!("../../prompts/scene_mission.txt").to_string(),
            eval_mission: include_str!("../../prompts/eval_mission.txt").to_string(),
        }
    }

    pub fn from_files(scene_path: &std::path::Path, eval_path: &std::path::Path) -> Result<PromptBundle> {
        let bundle = PromptBundle {
            scene_mission: std::fs::read_to_string(scene_path)?,
            eval_mission: std::fs::read_to_string(eval_path)?,
        };
        bundle.validate()?;
        Ok(bundle)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scene_mission.trim().is_empty() {
            return Err(Error::invalid_config("prompts.scene_mission", "template is empty"));
        }
        if self.eval_mission.trim().is_empty() {
            return Err(Error::invalid_config("prompts.eval_mission", "template is empty"));
        }
        for ph in PLACEHOLDERS {
            if !self.scene_mission.contains(ph) && !self.eval_mission.contains(ph) {
                return Err(Error::invalid_config(
                    "prompts",
                    format!("placeholder {ph} appears in neither template"),
                ));
            }
        }
        Ok(())
    }
}

/// Which evaluator to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvaluatorKind {
    Oracle,
    Llm,
    NoisyOracle,
    /// Always returns an unparseable (empty) response. Exists to show that
    /// shaping with no usable feedback degenerates to the plain baseline.
    Unparsed,
}

fn default_model_name() -> String {
    "default".to_string()
}
fn default_timeout() -> f64 {
    20.0
}
fn default_max_tool_rounds() -> u32 {
    3
}
fn default_flip_probability() -> f64 {
    0.2
}
fn default_retry_count() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatorConfig {
    pub kind: EvaluatorKind,
    /// Chat-completion URL; required for `kind = "llm"`. The API key is
    /// never stored in config files — it is read from `MENTOR_API_KEY`.
    #[serde(default)]
    pub endpoint_url: String,
    #[serde(default = "default_model_name")]
    pub model_name: String,
    /// Per-request timeout, seconds.
    #[serde(default = "default_timeout")]
    pub timeout: f64,
    /// Upper bound on endpoint calls per evaluation.
    #[serde(default = "default_max_tool_rounds")]
    pub max_tool_rounds: u32,
    /// Chance that the noisy oracle inverts its verdict.
    #[serde(default = "default_flip_probability")]
    pub flip_probability: f64,
    /// Extra attempts after a failed request before giving up.
    #[serde(default = "default_retry_count")]
    pub retry_count: u32,
}

impl Default for EvaluatorConfig {
    fn default() -> Self {
        EvaluatorConfig {
            kind: EvaluatorKind::Oracle,
            endpoint_url: String::new(),
            model_name: default_model_name(),
            timeout: default_timeout(),
            max_tool_rounds: default_max_tool_rounds(),
            flip_probability: default_flip_probability(),
            retry_count: default_retry_count(),
        }
    }
}

impl EvaluatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.timeout.is_finite() && self.timeout > 0.0) {
            return Err(Error::invalid_config("evaluator.timeout", "must be > 0"));
        }
        if self.max_tool_rounds < 1 {
            return Err(Error::invalid_config("evaluator.max_tool_rounds", "must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.flip_probability) {
            return Err(Error::invalid_config(
                "evaluator.flip_probability",
                "must be in [0, 1]",
            ));
        }
        if self.kind == EvaluatorKind::Llm && self.endpoint_url.is_empty() {
            return Err(Error::invalid_config(
                "evaluator.endpoint_url",
                "required when kind = \"llm\"",
            ));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Verdict parsing
// ---------------------------------------------------------------------------

/// Keyword detection over a free-text response, case-insensitive. If both
/// "good move" and "bad move" occur, the one mentioned last wins (a
/// conclusion tends to come after the hedging). No keyword means
/// [`Verdict::Unparsed`] — never an error.
pub fn parse_verdict(text: &str) -> Verdict {
    let lower = text.to_lowercase();
    let good = lower.rfind("good move");
    let bad = lower.rfind("bad move");
    match (good, bad) {
        (Some(g), Some(b)) => {
            if g > b {
                Verdict::GoodMove
            } else {
                Verdict::BadMove
            }
        }
        (Some(_), None) => Verdict::GoodMove,
        (None, Some(_)) => Verdict::BadMove,
        (None, None) => Verdict::Unparsed,
    }
}

// ---------------------------------------------------------------------------
// Scripted oracle
// ---------------------------------------------------------------------------

fn target_distance(t: &Transition, target: &str) -> Option<(f64, f64)> {
    let q = DistanceQuery::new("gripper", target);
    let before = distance(&q, &t.before).ok()?;
    let after = distance(&q, &t.after).ok()?;
    Some((before, after))
}

/// Which stage the agent is in, judged from the state *before* the action.
pub fn oracle_infer_phase(t: &Transition, task: &TaskSpec) -> Phase {
    if task.name == TaskName::PushButton {
        return Phase::Approach;
    }
    if t.before.gripper.grasped.is_some() {
        return Phase::Lift;
    }
    let near = task
        .target_object(&t.before)
        .map(|o| t.before.gripper.position.distance(o.position) <= task.grasp_radius)
        .unwrap_or(false);
    if near {
        Phase::Grasp
    } else {
        Phase::Approach
    }
}

/// Deterministic stand-in for the language-model critic. Returns a short
/// sentence that always contains exactly one of the two keywords, so the
/// full text-parsing path is exercised even in oracle runs.
///
/// Rules, in order: reaching the goal is good; dropping a held object short
/// of the goal is bad; otherwise judge by phase — approach wants the
/// gripper-to-target distance to shrink, grasp wants the gripper closed (or
/// a move that gets closer still), lift wants height gained while holding on.
pub fn oracle_evaluate(t: &Transition, task: &TaskSpec) -> String {
    if goal_reached(&t.after, task) {
        return "Good move: the task goal was just reached.".to_string();
    }
    if t.before.gripper.grasped.is_some() && t.after.gripper.grasped.is_none() {
        return "Bad move: the object was dropped before the goal.".to_string();
    }
    let Some(target) = task.target_object(&t.before).map(|o| o.id.clone()) else {
        return "Bad move: there is nothing to work toward.".to_string();
    };
    match oracle_infer_phase(t, task) {
        Phase::Approach => match target_distance(t, &target) {
            Some((before, after)) if after < before => {
                format!("Good move: the gripper moved closer to {target}.")
            }
            _ => format!("Bad move: the gripper did not get closer to {target}."),
        },
        Phase::Grasp => {
            if t.action == Action::CloseGripper {
                format!("Good move: closing the gripper here secures {target}.")
            } else {
                match target_distance(t, &target) {
                    Some((before, after)) if after < before => {
                        format!("Good move: the gripper moved closer to {target}.")
                    }
                    _ => format!("Bad move: the gripper should close on {target} instead."),
                }
            }
        }
        Phase::Lift => {
            let z_before = t.before.object(&target).map(|o| o.position.z);
            let z_after = t.after.object(&target).map(|o| o.position.z);
            let still_held = t.after.gripper.grasped.as_deref() == Some(target.as_str());
            match (z_before, z_after) {
                (Some(zb), Some(za)) if za > zb && still_held => {
                    format!("Good move: {target} is gaining height.")
                }
                _ => format!("Bad move: {target} is not being lifted."),
            }
        }
    }
}

fn flip_verdict_text(text: &str) -> String {
    if text.contains("Good move") {
        text.replacen("Good move", "Bad move", 1)
    } else if text.contains("Bad move") {
        text.replacen("Bad move", "Good move", 1)
    } else {
        text.to_string()
    }
}

/// Oracle with label noise: with probability `flip_probability` the verdict
/// keyword is inverted. Models an unreliable critic.
pub fn noisy_oracle_evaluate(
    t: &Transition,
    task: &TaskSpec,
    flip_probability: f64,
    rng: &mut impl Rng,
) -> String {
    let text = oracle_evaluate(t, task);
    if rng.random::<f64>() < flip_probability {
        flip_verdict_text(&text)
    } else {
        text
    }
}

// ---------------------------------------------------------------------------
// Evaluator interface
// ---------------------------------------------------------------------------

/// A source of free-text judgments. The training loop builds the scene
/// description (so baseline runs can skip that work entirely) and hands it
/// in; evaluators that judge geometry directly ignore it. Called
/// sequentially by one training loop; implementations must be movable across
/// threads but are never shared.
pub trait Evaluator: Send {
    fn evaluate(&mut self, t: &Transition, scene: &SceneDescription, task: &TaskSpec) -> String;
}

/// The deterministic reference evaluator.
pub struct ScriptedOracle;

impl Evaluator for ScriptedOracle {
    fn evaluate(&mut self, t: &Transition, _scene: &SceneDescription, task: &TaskSpec) -> String {
        oracle_evaluate(t, task)
    }
}

/// Oracle plus seeded label noise.
pub struct NoisyOracle {
    flip_probability: f64,
    rng: ChaCha8Rng,
}

impl NoisyOracle {
    pub fn new(flip_probability: f64, seed: u64) -> Self {
        NoisyOracle {
            flip_probability,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Evaluator for NoisyOracle {
    fn evaluate(&mut self, t: &Transition, _scene: &SceneDescription, task: &TaskSpec) -> String {
        noisy_oracle_evaluate(t, task, self.flip_probability, &mut self.rng)
    }
}

/// Always returns an empty (hence unparseable) response.
pub struct AlwaysUnparsed;

impl Evaluator for AlwaysUnparsed {
    fn evaluate(&mut self, _t: &Transition, _scene: &SceneDescription, _task: &TaskSpec) -> String {
        String::new()
    }
}

/// Instantiate the evaluator described by `cfg`. `noise_seed` feeds only the
/// noisy oracle's rng.
pub fn build_evaluator(
    cfg: &EvaluatorConfig,
    prompts: &PromptBundle,
    noise_seed: u64,
) -> Result<Box<dyn Evaluator>> {
    cfg.validate()?;
    prompts.validate()?;
    Ok(match cfg.kind {
        EvaluatorKind::Oracle => Box::new(ScriptedOracle),
        EvaluatorKind::NoisyOracle => Box::new(NoisyOracle::new(cfg.flip_probability, noise_seed)),
        EvaluatorKind::Unparsed => Box::new(AlwaysUnparsed),
        EvaluatorKind::Llm => Box::new(LlmEvaluator::new(cfg.clone(), prompts.clone())),
    })
}

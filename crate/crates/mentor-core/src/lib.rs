//! Interactive RL with evaluative feedback on a desk-scale manipulation toy.
//!
//! A tabular Q-learning agent works on sparse-reward gripper tasks
//! (`push_button`, `lift_object`). The sparse goal reward can be augmented
//! with per-transition "good move"/"bad move" judgments: every few steps the
//! transition is rendered into a textual scene description and judged —
//! either by a deterministic scripted oracle or by an external
//! chat-completion model that may ask `distance(a, b)` follow-up queries.
//! Verdicts map to an auxiliary reward of +1/-1 (anything unparseable counts
//! as 0) that is simply added to the environment reward.
//!
//! Crate layout mirrors that pipeline:
//!
//! - [`env`] — seeded kinematic environment and task definitions
//! - [`scene`] — deterministic scene descriptions and distance queries
//! - [`feedback`] — verdict parsing, scripted/noisy oracles, the LLM client
//! - [`shaping`] — reward combination and the query schedule
//! - [`agent`] — discretization, epsilon-greedy control, Q-table and its
//!   on-disk format
//! - [`config`] / [`harness`] — run configuration, the training loop,
//!   evaluation and run comparison
//!
//! Determinism is a design requirement throughout: a config plus a seed pins
//! every byte of the metrics stream and the learned table.

pub mod agent;
pub mod config;
pub mod env;
pub mod error;
pub mod feedback;
pub mod harness;
pub mod scene;
pub mod shaping;

pub use agent::{discretize, select_action, update, AgentConfig, QTable, QTableMeta, StateKey};
pub use config::{load_run_input, Manifest, PromptFiles, RunConfig, RunSection};
pub use env::{
    goal_reached, is_terminal, reset, step, Aabb, Action, Axis, GripperState, Observation,
    SceneObject, TaskName, TaskSpec, Transition, Vec3,
};
pub use error::{Error, Result};
pub use feedback::{
    build_evaluator, llm_evaluate, noisy_oracle_evaluate, oracle_evaluate, oracle_infer_phase,
    parse_verdict, Evaluator, EvaluatorConfig, EvaluatorKind, LlmEvaluator, Phase, PromptBundle,
    Verdict, API_KEY_ENV,
};
pub use harness::{
    compare, evaluate, final_fraction_mean_length, moving_average, read_metrics, train,
    CompareReport, Dominance, EvalReport, MetricsRecord, RunDigest, RunSummary, TrainReport,
    VerdictCounts,
};
pub use scene::{describe_transition, distance, DistanceQuery, Fact, SceneDescription};
pub use shaping::{combine, should_query, verdict_to_reward, ShapedReward, ShapingConfig};

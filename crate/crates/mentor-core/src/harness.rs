//! Experiment runner: the training loop wiring env -> observer -> evaluator
//! -> shaping -> agent, per-episode metrics, post-training greedy
//! evaluation, and run comparison.
//!
//! Every run directory holds four artifacts: `manifest.json` (replayable
//! record of config + prompts), `metrics.jsonl` (one record per episode,
//! flushed as it happens), `qtable.tsv` (the learned values) and
//! `summary.json`. Runs are deterministic: config + seed pin every byte of
//! `metrics.jsonl` and `qtable.tsv`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{discretize, select_action, update, QTable, QTableMeta};
use crate::config::{Manifest, RunConfig};
use crate::env::{goal_reached, reset, step, TaskName, TaskSpec};
use crate::error::{Error, Result};
use crate::feedback::{build_evaluator, parse_verdict, Evaluator, PromptBundle, Verdict};
use crate::scene::describe_transition;
use crate::shaping::{combine, should_query, verdict_to_reward};

// Sub-streams of the run seed. The noisy oracle seeds its own rng directly
// from the run seed (stream 0), so these start at 1.
const STREAM_SPAWN: u64 = 1;
const STREAM_AGENT: u64 = 2;
const STREAM_EVAL: u64 = 3;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Per-episode verdict tally. Sums to the episode's `llm_queries`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictCounts {
    pub good: u32,
    pub bad: u32,
    pub unparsed: u32,
}

impl VerdictCounts {
    fn add(&mut self, v: Verdict) {
        match v {
            Verdict::GoodMove => self.good += 1,
            Verdict::BadMove => self.bad += 1,
            Verdict::Unparsed => self.unparsed += 1,
        }
    }

    pub fn total(&self) -> u32 {
        self.good + self.bad + self.unparsed
    }
}

/// One line of `metrics.jsonl`, emitted when an episode ends (or truncated
/// by the end of the step budget).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    /// Global env step count at the time the record was written.
    pub step: u64,
    /// 1-based episode number.
    pub episode: u32,
    /// Sum of shaped rewards over the episode.
    pub episode_return: f64,
    pub episode_length: u32,
    pub success: bool,
    /// Scheduled evaluator queries this episode (floor(length/interval)).
    /// Baseline runs keep the schedule for comparability; their queries all
    /// count as unparsed and contribute zero reward.
    pub llm_queries: u32,
    pub verdict_counts: VerdictCounts,
}

/// Result of a greedy post-training evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub episodes: u32,
    pub success_rate: f64,
    pub mean_episode_length: f64,
}

/// End-of-run rollup written as `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub format: String,
    pub task: TaskName,
    pub seed: u64,
    pub total_train_steps: u64,
    pub episodes: u32,
    /// Fraction of training episodes that reached the goal.
    pub train_success_rate: f64,
    pub total_queries: u64,
    pub verdict_totals: VerdictCounts,
    /// Scene descriptions built for the evaluator. Zero in baseline mode,
    /// which never touches the feedback pipeline.
    pub scene_descriptions: u64,
    pub states_visited: usize,
    pub eval: EvalReport,
}

pub const SUMMARY_FORMAT: &str = "mentor-summary v1";

/// Everything `train` produced, with the artifacts already on disk.
#[derive(Debug)]
pub struct TrainReport {
    pub run_dir: PathBuf,
    pub records: Vec<MetricsRecord>,
    pub summary: RunSummary,
    pub qtable: QTable,
}

/// Run one seeded training run and write its artifacts into `run_dir`.
///
/// The loop: act epsilon-greedily, step the environment, and on every
/// `query_interval`-th step of the episode obtain a verdict (described scene
/// -> evaluator -> keyword parse) worth +1/-1/0; the Q-update uses
/// `r_env + r_llm`. With `cfg.evaluator = None` the verdict step is skipped
/// wholesale and the agent learns from the sparse goal reward alone.
pub fn train(cfg: &RunConfig, prompts: &PromptBundle, seed: u64, run_dir: &Path) -> Result<TrainReport> {
    cfg.validate()?;
    prompts.validate()?;
    let task = &cfg.task;

    std::fs::create_dir_all(run_dir)?;
    Manifest::new(cfg, prompts, seed)?.write(&run_dir.join("manifest.json"))?;

    let mut evaluator: Option<Box<dyn Evaluator>> = match &cfg.evaluator {
        Some(evaluator_cfg) => Some(build_evaluator(evaluator_cfg, prompts, seed)?),
        None => None,
    };

    let mut spawn_rng = stream_rng(seed, STREAM_SPAWN);
    let mut agent_rng = stream_rng(seed, STREAM_AGENT);
    let mut qtable = QTable::new();

    let metrics_path = run_dir.join("metrics.jsonl");
    let mut metrics = BufWriter::new(File::create(&metrics_path)?);

    let total_steps = cfg.run.total_train_steps;
    let mut records: Vec<MetricsRecord> = Vec::new();
    let mut obs = reset(task, spawn_rng.random());

    let mut episode: u32 = 0;
    let mut episode_return = 0.0;
    let mut episode_queries: u32 = 0;
    let mut episode_verdicts = VerdictCounts::default();
    let mut successes: u64 = 0;
    let mut total_queries: u64 = 0;
    let mut verdict_totals = VerdictCounts::default();
    let mut scene_descriptions: u64 = 0;

    let write_record = |rec: &MetricsRecord, metrics: &mut BufWriter<File>| -> Result<()> {
        let line = serde_json::to_string(rec)?;
        metrics.write_all(line.as_bytes())?;
        metrics.write_all(b"\n")?;
        // Flushed per episode so an interrupted run leaves a valid prefix.
        metrics.flush()?;
        Ok(())
    };

    let mut global_step: u64 = 0;
    while global_step < total_steps {
        let epsilon = cfg.agent.epsilon_at(global_step, total_steps);
        let s = discretize(&obs, task, cfg.agent.bins_per_axis);
        let action = select_action(&qtable, &s, epsilon, &mut agent_rng);
        let t = step(&obs, action, task)?;
        global_step += 1;

        let mut r_llm = 0.0;
        if should_query(t.after.step_index, &cfg.shaping) {
            episode_queries += 1;
            total_queries += 1;
            let verdict = match evaluator.as_deref_mut() {
                Some(evaluator) => {
                    let scene = describe_transition(&t, task);
                    scene_descriptions += 1;
                    parse_verdict(&evaluator.evaluate(&t, &scene, task))
                }
                // Baseline: the schedule still ticks (so runs line up
                // record-for-record) but nothing is asked and nothing paid.
                None => Verdict::Unparsed,
            };
            episode_verdicts.add(verdict);
            verdict_totals.add(verdict);
            r_llm = verdict_to_reward(verdict, &cfg.shaping);
        }

        let shaped = combine(t.r_env, r_llm);
        episode_return += shaped.r_total;
        let s_next = discretize(&t.after, task, cfg.agent.bins_per_axis);
        update(&mut qtable, s, action, shaped.r_total, &s_next, t.terminal, &cfg.agent);

        if t.terminal {
            episode += 1;
            let success = goal_reached(&t.after, task);
            if success {
                successes += 1;
            }
            let rec = MetricsRecord {
                step: global_step,
                episode,
                episode_return,
                episode_length: t.after.step_index,
                success,
                llm_queries: episode_queries,
                verdict_counts: episode_verdicts,
            };
            write_record(&rec, &mut metrics)?;
            records.push(rec);
            episode_return = 0.0;
            episode_queries = 0;
            episode_verdicts = VerdictCounts::default();
            obs = reset(task, spawn_rng.random());
        } else {
            obs = t.after;
        }
    }

    // The budget may cut an episode short; record the partial tail so the
    // reward and query accounting stays complete.
    if obs.step_index > 0 {
        episode += 1;
        let rec = MetricsRecord {
            step: global_step,
            episode,
            episode_return,
            episode_length: obs.step_index,
            success: false,
            llm_queries: episode_queries,
            verdict_counts: episode_verdicts,
        };
        write_record(&rec, &mut metrics)?;
        records.push(rec);
    }
    drop(metrics);

    let meta = QTableMeta {
        bins_per_axis: cfg.agent.bins_per_axis,
        task: task.name,
    };
    qtable.save(&run_dir.join("qtable.tsv"), &meta)?;

    let eval = evaluate(
        &qtable,
        cfg.agent.bins_per_axis,
        task,
        cfg.run.eval_episodes,
        seed,
    )?;
    let completed = records.len() as u32;
    let summary = RunSummary {
        format: SUMMARY_FORMAT.to_string(),
        task: task.name,
        seed,
        total_train_steps: total_steps,
        episodes: episode,
        train_success_rate: if completed > 0 {
            successes as f64 / completed as f64
        } else {
            0.0
        },
        total_queries,
        verdict_totals,
        scene_descriptions,
        states_visited: qtable.len(),
        eval,
    };
    let mut summary_json = serde_json::to_string_pretty(&summary)?;
    summary_json.push('\n');
    std::fs::write(run_dir.join("summary.json"), summary_json)?;

    Ok(TrainReport {
        run_dir: run_dir.to_path_buf(),
        records,
        summary,
        qtable,
    })
}

/// Greedy (epsilon = 0) evaluation over fresh spawn seeds. No evaluator is
/// involved: a trained agent has to stand on its own.
pub fn evaluate(
    qtable: &QTable,
    bins_per_axis: u8,
    task: &TaskSpec,
    episodes: u32,
    seed: u64,
) -> Result<EvalReport> {
    if episodes == 0 {
        return Err(Error::invalid_config("eval.episodes", "must be > 0"));
    }
    task.validate()?;
    let mut spawn_rng = stream_rng(seed, STREAM_EVAL);
    let mut successes = 0u32;
    let mut length_sum = 0u64;
    for _ in 0..episodes {
        let mut obs = reset(task, spawn_rng.random());
        loop {
            let s = discretize(&obs, task, bins_per_axis);
            let action = qtable.greedy_action(&s);
            let t = step(&obs, action, task)?;
            if t.terminal {
                if goal_reached(&t.after, task) {
                    successes += 1;
                }
                length_sum += u64::from(t.after.step_index);
                break;
            }
            obs = t.after;
        }
    }
    Ok(EvalReport {
        episodes,
        success_rate: f64::from(successes) / f64::from(episodes),
        mean_episode_length: length_sum as f64 / f64::from(episodes),
    })
}

/// Parse a `metrics.jsonl` stream.
pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRecord>> {
    let text = std::fs::read_to_string(path)?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: MetricsRecord = serde_json::from_str(line)
            .map_err(|e| Error::bad_artifact(path.display().to_string(), format!("line {}: {e}", i + 1)))?;
        records.push(rec);
    }
    Ok(records)
}

/// Trailing moving average with the window clipped at the start; output
/// length equals input length.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for i in 0..values.len() {
        sum += values[i];
        if i >= w {
            sum -= values[i - w];
        }
        let n = (i + 1).min(w);
        out.push(sum / n as f64);
    }
    out
}

/// Mean episode length over the final `fraction` of training episodes.
pub fn final_fraction_mean_length(records: &[MetricsRecord], fraction: f64) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    let k = ((records.len() as f64 * fraction).ceil() as usize).clamp(1, records.len());
    let tail = &records[records.len() - k..];
    tail.iter().map(|r| f64::from(r.episode_length)).sum::<f64>() / k as f64
}

/// Per-run numbers the comparison is built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDigest {
    pub dir: String,
    pub seed: u64,
    pub eval_success_rate: f64,
    pub eval_mean_episode_length: f64,
    /// Area under the (success-per-episode) learning curve, normalized to
    /// [0, 1]: the mean success over all training episodes.
    pub aulc_success: f64,
    /// Mean episode length over the final 10% of training episodes.
    pub final_mean_episode_length: f64,
}

fn digest_run(dir: &Path) -> Result<(RunDigest, RunConfig)> {
    let manifest = Manifest::read(&dir.join("manifest.json"))?;
    let cfg = manifest.config()?;
    let records = read_metrics(&dir.join("metrics.jsonl"))?;
    if records.is_empty() {
        return Err(Error::bad_artifact(
            dir.display().to_string(),
            "metrics.jsonl has no records".to_string(),
        ));
    }
    let summary_text = std::fs::read_to_string(dir.join("summary.json"))?;
    let summary: RunSummary = serde_json::from_str(&summary_text)
        .map_err(|e| Error::bad_artifact(dir.display().to_string(), e.to_string()))?;
    let aulc = records.iter().filter(|r| r.success).count() as f64 / records.len() as f64;
    Ok((
        RunDigest {
            dir: dir.display().to_string(),
            seed: manifest.seed,
            eval_success_rate: summary.eval.success_rate,
            eval_mean_episode_length: summary.eval.mean_episode_length,
            aulc_success: aulc,
            final_mean_episode_length: final_fraction_mean_length(&records, 0.1),
        },
        cfg,
    ))
}

/// Which run wins a metric; `Tie` when exactly equal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dominance {
    A,
    B,
    Tie,
}

fn dominance(a: f64, b: f64, higher_is_better: bool) -> Dominance {
    if a == b {
        Dominance::Tie
    } else if (a > b) == higher_is_better {
        Dominance::A
    } else {
        Dominance::B
    }
}

/// Machine-readable two-run comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub task: TaskName,
    pub a: RunDigest,
    pub b: RunDigest,
    /// a minus b.
    pub eval_success_rate_delta: f64,
    pub aulc_success_delta: f64,
    pub final_mean_episode_length_delta: f64,
    pub dominates_eval_success: Dominance,
    pub dominates_aulc: Dominance,
    pub dominates_episode_length: Dominance,
}

/// Compare two completed run directories. Refuses to compare runs whose
/// task sections differ — the numbers would be meaningless.
pub fn compare(dir_a: &Path, dir_b: &Path) -> Result<CompareReport> {
    let (a, cfg_a) = digest_run(dir_a)?;
    let (b, cfg_b) = digest_run(dir_b)?;
    if cfg_a.task != cfg_b.task {
        return Err(Error::CompareMismatch(format!(
            "task configs differ ({} vs {})",
            cfg_a.task.name, cfg_b.task.name
        )));
    }
    Ok(CompareReport {
        task: cfg_a.task.name,
        eval_success_rate_delta: a.eval_success_rate - b.eval_success_rate,
        aulc_success_delta: a.aulc_success - b.aulc_success,
        final_mean_episode_length_delta: a.final_mean_episode_length - b.final_mean_episode_length,
        dominates_eval_success: dominance(a.eval_success_rate, b.eval_success_rate, true),
        dominates_aulc: dominance(a.aulc_success, b.aulc_success, true),
        dominates_episode_length: dominance(
            a.final_mean_episode_length,
            b.final_mean_episode_length,
            false,
        ),
        a,
        b,
    })
}

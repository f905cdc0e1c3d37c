//! Run configuration: one TOML document with `task`, `evaluator`, `shaping`,
//! `agent` and `run` sections, plus the JSON manifest written into every run
//! directory. A manifest embeds the canonical config and the verbatim prompt
//! texts, so `train --config manifest.json` replays a run bit-for-bit.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agent::AgentConfig;
use crate::env::TaskSpec;
use crate::error::{Error, Result};
use crate::feedback::{EvaluatorConfig, PromptBundle};
use crate::shaping::ShapingConfig;

fn default_total_train_steps() -> u64 {
    60_000
}
fn default_eval_episodes() -> u32 {
    100
}
fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3]
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

/// The `[run]` section: budget, evaluation protocol, seeds, output root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSection {
    /// Environment steps per training run. The desk-scale default converges
    /// for the built-in tasks; scale up via config if wanted.
    #[serde(default = "default_total_train_steps")]
    pub total_train_steps: u64,
    /// Greedy episodes for the post-training evaluation.
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: u32,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            total_train_steps: default_total_train_steps(),
            eval_episodes: default_eval_episodes(),
            seeds: default_seeds(),
            output_dir: default_output_dir(),
        }
    }
}

/// Optional `[prompts]` section pointing at template files; when absent the
/// built-in templates are used.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PromptFiles {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_mission_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_mission_file: Option<PathBuf>,
}

/// Everything one experiment needs. `evaluator = None` is the baseline:
/// no feedback channel, the agent sees environment reward only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub task: TaskSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluator: Option<EvaluatorConfig>,
    #[serde(default)]
    pub shaping: ShapingConfig,
    #[serde(default)]
    pub agent: AgentConfig,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default, skip_serializing_if = "is_default_prompt_files")]
    pub prompts: PromptFiles,
}

fn is_default_prompt_files(p: &PromptFiles) -> bool {
    *p == PromptFiles::default()
}

impl RunConfig {
    /// A ready-to-train config for a built-in task with the oracle evaluator.
    pub fn preset(task: TaskSpec) -> RunConfig {
        RunConfig {
            task,
            evaluator: Some(EvaluatorConfig::default()),
            shaping: ShapingConfig::default(),
            agent: AgentConfig::default(),
            run: RunSection::default(),
            prompts: PromptFiles::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.task.validate()?;
        if let Some(evaluator) = &self.evaluator {
            evaluator.validate()?;
        }
        self.shaping.validate()?;
        self.agent.validate()?;
        if self.run.total_train_steps == 0 {
            return Err(Error::invalid_config("run.total_train_steps", "must be > 0"));
        }
        if self.run.eval_episodes == 0 {
            return Err(Error::invalid_config("run.eval_episodes", "must be > 0"));
        }
        if self.run.seeds.is_empty() {
            return Err(Error::invalid_config("run.seeds", "must not be empty"));
        }
        Ok(())
    }

    /// Canonical TOML rendering; the manifest hash is computed over this.
    pub fn to_canonical_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn from_toml(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Resolve the prompt templates, reading files relative to `base_dir`.
    pub fn resolve_prompts(&self, base_dir: &Path) -> Result<PromptBundle> {
        let bundle = match (&self.prompts.scene_mission_file, &self.prompts.eval_mission_file) {
            (None, None) => PromptBundle::builtin(),
            (Some(scene), Some(eval)) => {
                PromptBundle::from_files(&base_dir.join(scene), &base_dir.join(eval))?
            }
            _ => {
                return Err(Error::invalid_config(
                    "prompts",
                    "scene_mission_file and eval_mission_file must be given together",
                ))
            }
        };
        bundle.validate()?;
        Ok(bundle)
    }
}

pub const MANIFEST_FORMAT: &str = "mentor-manifest v1";

/// Frozen record of exactly what a run executed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub seed: u64,
    /// SHA-256 hex digest of `config_toml`.
    pub config_sha256: String,
    pub config_toml: String,
    /// Verbatim templates the run used, whatever their origin.
    pub prompts: PromptBundle,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl Manifest {
    pub fn new(cfg: &RunConfig, prompts: &PromptBundle, seed: u64) -> Result<Manifest> {
        let config_toml = cfg.to_canonical_toml()?;
        Ok(Manifest {
            format: MANIFEST_FORMAT.to_string(),
            seed,
            config_sha256: sha256_hex(config_toml.as_bytes()),
            config_toml,
            prompts: prompts.clone(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Manifest> {
        let loc = || path.display().to_string();
        let text = std::fs::read_to_string(path)?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| Error::bad_artifact(loc(), e.to_string()))?;
        if manifest.format != MANIFEST_FORMAT {
            return Err(Error::bad_artifact(
                loc(),
                format!("unsupported format '{}'", manifest.format),
            ));
        }
        let digest = sha256_hex(manifest.config_toml.as_bytes());
        if digest != manifest.config_sha256 {
            return Err(Error::bad_artifact(
                loc(),
                "config_sha256 does not match config_toml".to_string(),
            ));
        }
        Ok(manifest)
    }

    pub fn config(&self) -> Result<RunConfig> {
        RunConfig::from_toml(&self.config_toml)
    }
}

/// Load a training input: either a TOML config or a previously written
/// manifest (replay). Returns the config plus the prompts to use.
pub fn load_run_input(path: &Path) -> Result<(RunConfig, PromptBundle)> {
    let text = std::fs::read_to_string(path)?;
    let looks_like_manifest =
        path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
    if looks_like_manifest {
        let manifest = Manifest::read(path)?;
        let cfg = manifest.config()?;
        manifest.prompts.validate()?;
        Ok((cfg, manifest.prompts))
    } else {
        let cfg = RunConfig::from_toml(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let prompts = cfg.resolve_prompts(base)?;
        Ok((cfg, prompts))
    }
}

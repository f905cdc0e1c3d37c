//! Chat-completion evaluator.
//!
//! Speaks the plain OpenAI-style `POST /chat/completions` shape: a JSON body
//! with `model`, `messages` and `temperature`, reading back the first
//! choice's message content. The model may ask for measurements by replying
//! with lines of the form `CALL distance(a, b)`; those are answered from the
//! scene and the conversation continues, bounded by `max_tool_rounds`
//! endpoint calls. Every failure mode — transport error, bad status, bad
//! JSON, timeout after the configured retries — collapses to an empty reply,
//! which the parser downstream treats as "no usable feedback" (reward 0), so
//! a flaky endpoint can never abort training.

use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::env::{Observation, TaskSpec, Transition};
use crate::feedback::{Evaluator, EvaluatorConfig, PromptBundle};
use crate::scene::{describe_transition, distance, DistanceQuery, SceneDescription};

/// Environment variable holding the bearer token, if the endpoint wants one.
pub const API_KEY_ENV: &str = "MENTOR_API_KEY";

#[derive(Debug, Serialize)]
struct ChatMessage {
    role: &'static str,
    content: String,
}

impl ChatMessage {
    fn user(content: String) -> Self {
        ChatMessage { role: "user", content }
    }

    fn assistant(content: String) -> Self {
        ChatMessage { role: "assistant", content }
    }
}

#[derive(Debug, Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Debug, Deserialize)]
struct ChatChoice {
    message: ChatChoiceMessage,
}

#[derive(Debug, Deserialize)]
struct ChatChoiceMessage {
    content: String,
}

#[derive(Debug, PartialEq)]
pub(crate) enum CallLine {
    Query(DistanceQuery),
    Malformed(String),
}

fn call_regex() -> Regex {
    Regex::new(r"^CALL\s+distance\(\s*([^,()]+?)\s*,\s*([^,()]+?)\s*\)\s*$").unwrap()
}

/// Pull `CALL distance(a, b)` requests out of a model reply. Lines that
/// start with `CALL` but do not match the shape are kept as malformed so the
/// model gets an error message back instead of silence.
pub(crate) fn extract_calls(text: &str) -> Vec<CallLine> {
    let re = call_regex();
    text.lines()
        .map(str::trim)
        .filter(|line| line.starts_with("CALL"))
        .map(|line| match re.captures(line) {
            Some(c) => CallLine::Query(DistanceQuery::new(&c[1], &c[2])),
            None => CallLine::Malformed(line.to_string()),
        })
        .collect()
}

/// Answer each call against the post-step scene, one line per call.
pub(crate) fn tool_results(calls: &[CallLine], state: &Observation) -> String {
    calls
        .iter()
        .map(|call| match call {
            CallLine::Query(q) => match distance(q, state) {
                Ok(d) => format!("distance({}, {}) = {:.3}", q.a, q.b, d),
                Err(e) => format!("tool error: {e}"),
            },
            CallLine::Malformed(line) => format!("tool error: could not parse call '{line}'"),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn render(template: &str, task_description: &str, scene_description: &str, tool_results: &str) -> String {
    template
        .replace("{task_description}", task_description)
        .replace("{scene_description}", scene_description)
        .replace("{tool_results}", tool_results)
}

fn build_agent(timeout_seconds: f64) -> ureq::Agent {
    let timeout = if timeout_seconds.is_finite() && timeout_seconds > 0.0 {
        timeout_seconds
    } else {
        20.0
    };
    ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs_f64(timeout)))
        .build()
        .new_agent()
}

fn post_chat(
    agent: &ureq::Agent,
    api_key: Option<&str>,
    cfg: &EvaluatorConfig,
    messages: &[ChatMessage],
) -> Option<String> {
    let body = ChatRequest {
        model: &cfg.model_name,
        messages,
        temperature: 0.0,
    };
    for _attempt in 0..=cfg.retry_count {
        let mut req = agent.post(&cfg.endpoint_url);
        if let Some(key) = api_key {
            req = req.header("authorization", &format!("Bearer {key}"));
        }
        let Ok(mut res) = req.send_json(&body) else {
            continue;
        };
        let Ok(parsed) = res.body_mut().read_json::<ChatResponse>() else {
            continue;
        };
        if let Some(choice) = parsed.choices.into_iter().next() {
            return Some(choice.message.content);
        }
    }
    None
}

fn run_protocol(
    agent: &ureq::Agent,
    api_key: Option<&str>,
    t: &Transition,
    scene_text: &str,
    task: &TaskSpec,
    prompts: &PromptBundle,
    cfg: &EvaluatorConfig,
) -> String {
    let task_description = task.description();
    let mut messages = vec![ChatMessage::user(render(
        &prompts.scene_mission,
        &task_description,
        scene_text,
        "",
    ))];
    let mut calls_left = cfg.max_tool_rounds.max(1);
    loop {
        let Some(reply) = post_chat(agent, api_key, cfg, &messages) else {
            return String::new();
        };
        calls_left -= 1;
        let calls = extract_calls(&reply);
        if calls.is_empty() || calls_left == 0 {
            return reply;
        }
        let results = tool_results(&calls, &t.after);
        messages.push(ChatMessage::assistant(reply));
        messages.push(ChatMessage::user(render(
            &prompts.eval_mission,
            &task_description,
            scene_text,
            &results,
        )));
    }
}

/// One-shot evaluation against the configured endpoint. Builds a fresh
/// connection agent and scene description per call; training loops should
/// prefer [`LlmEvaluator`], which reuses a connection agent.
pub fn llm_evaluate(t: &Transition, task: &TaskSpec, prompts: &PromptBundle, cfg: &EvaluatorConfig) -> String {
    let agent = build_agent(cfg.timeout);
    let api_key = std::env::var(API_KEY_ENV).ok();
    let scene = describe_transition(t, task);
    run_protocol(&agent, api_key.as_deref(), t, &scene.text, task, prompts, cfg)
}

/// Persistent evaluator wrapping a reusable HTTP agent. The API key is read
/// from [`API_KEY_ENV`] once, at construction.
pub struct LlmEvaluator {
    agent: ureq::Agent,
    api_key: Option<String>,
    cfg: EvaluatorConfig,
    prompts: PromptBundle,
}

impl LlmEvaluator {
    pub fn new(cfg: EvaluatorConfig, prompts: PromptBundle) -> Self {
        LlmEvaluator {
            agent: build_agent(cfg.timeout),
            api_key: std::env::var(API_KEY_ENV).ok(),
            cfg,
            prompts,
        }
    }
}

impl Evaluator for LlmEvaluator {
    fn evaluate(&mut self, t: &Transition, scene: &SceneDescription, task: &TaskSpec) -> String {
        run_protocol(
            &self.agent,
            self.api_key.as_deref(),
            t,
            &scene.text,
            task,
            &self.prompts,
            &self.cfg,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{reset, TaskSpec};

    #[test]
    fn extracts_well_formed_calls() {
        let text = "Let me measure first.\nCALL distance(gripper, button1)\n CALL distance( button1 , button2 ) \ndone";
        let calls = extract_calls(text);
        assert_eq!(
            calls,
            vec![
                CallLine::Query(DistanceQuery::new("gripper", "button1")),
                CallLine::Query(DistanceQuery::new("button1", "button2")),
            ]
        );
    }

    #[test]
    fn keeps_malformed_call_lines_for_error_reporting() {
        let text = "CALL distance(gripper button1)\nCALL teleport(gripper)\nnot a call";
        let calls = extract_calls(text);
        assert_eq!(calls.len(), 2);
        assert!(matches!(&calls[0], CallLine::Malformed(l) if l.contains("gripper button1")));
        assert!(matches!(&calls[1], CallLine::Malformed(l) if l.contains("teleport")));
    }

    #[test]
    fn plain_prose_yields_no_calls() {
        assert!(extract_calls("This was a good move all around.").is_empty());
        assert!(extract_calls("").is_empty());
    }

    #[test]
    fn tool_results_answer_and_report_errors() {
        let task = TaskSpec::push_button();
        let obs = reset(&task, 1);
        let calls = vec![
            CallLine::Query(DistanceQuery::new("gripper", "button1")),
            CallLine::Query(DistanceQuery::new("gripper", "lever")),
            CallLine::Malformed("CALL distance(oops".to_string()),
        ];
        let out = tool_results(&calls, &obs);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines.len(), 3);
        let expect = obs.gripper.position.distance(obs.object("button1").unwrap().position);
        assert_eq!(lines[0], format!("distance(gripper, button1) = {expect:.3}"));
        assert!(lines[1].starts_with("tool error:") && lines[1].contains("lever"), "{}", lines[1]);
        assert!(lines[2].starts_with("tool error: could not parse"), "{}", lines[2]);
    }

    #[test]
    fn render_fills_every_placeholder() {
        let out = render(
            "task={task_description} scene={scene_description} tools={tool_results}",
            "T",
            "S",
            "R",
        );
        assert_eq!(out, "task=T scene=S tools=R");
        assert!(!out.contains('{'));
    }
}

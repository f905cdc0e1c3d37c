//! Shared helpers for the integration tests: a scriptable in-process
//! chat-completion server that speaks just enough of the usual
//! `POST /chat/completions` shape to exercise the client for real.

#![allow(dead_code)] // each test binary uses a different subset

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use tiny_http::{Header, Response, Server};

use mentor_core::{EvaluatorConfig, EvaluatorKind};

/// What the fake model sends back for one request.
pub enum FakeReply {
    /// A normal completion whose message content is this text.
    Content(String),
    /// A bare HTTP status (e.g. 500) with a non-JSON body.
    Status(u16),
    /// A 200 whose body is exactly this string (for malformed-JSON cases).
    RawBody(String),
    /// Sleep first, then answer with the content. For timeout tests.
    Delayed(Duration, String),
}

/// Handle to a running fake server. The server thread exits once the
/// handle is dropped and the connection in flight (if any) completes.
pub struct FakeChat {
    pub url: String,
    hits: Arc<AtomicUsize>,
    /// Parsed request bodies, in arrival order.
    bodies: Arc<Mutex<Vec<serde_json::Value>>>,
    shutdown: Arc<AtomicUsize>,
}

impl FakeChat {
    /// Requests received so far.
    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }

    /// Copy of the parsed request bodies seen so far.
    pub fn bodies(&self) -> Vec<serde_json::Value> {
        self.bodies.lock().unwrap().clone()
    }
}

impl Drop for FakeChat {
    fn drop(&mut self) {
        self.shutdown.store(1, Ordering::SeqCst);
    }
}

/// Start a fake chat-completion server on a free localhost port. The handler
/// sees each parsed request body plus the zero-based request index and
/// decides the reply.
pub fn spawn_fake_chat<F>(mut handler: F) -> FakeChat
where
    F: FnMut(&serde_json::Value, usize) -> FakeReply + Send + 'static,
{
    let server = Server::http("127.0.0.1:0").expect("bind fake chat server");
    let port = server
        .server_addr()
        .to_ip()
        .expect("tcp listener")
        .port();
    let url = format!("http://127.0.0.1:{port}/v1/chat/completions");

    let hits = Arc::new(AtomicUsize::new(0));
    let bodies = Arc::new(Mutex::new(Vec::new()));
    let shutdown = Arc::new(AtomicUsize::new(0));

    let thread_hits = hits.clone();
    let thread_bodies = bodies.clone();
    let thread_shutdown = shutdown.clone();
    thread::spawn(move || {
        loop {
            // Poll so the thread notices shutdown even when idle.
            let request = match server.recv_timeout(Duration::from_millis(50)) {
                Ok(Some(r)) => r,
                Ok(None) => {
                    if thread_shutdown.load(Ordering::SeqCst) != 0 {
                        return;
                    }
                    continue;
                }
                Err(_) => return,
            };
            let mut request = request;
            let n = thread_hits.fetch_add(1, Ordering::SeqCst);
            let mut raw = String::new();
            let _ = request.as_reader().read_to_string(&mut raw);
            let body: serde_json::Value =
                serde_json::from_str(&raw).unwrap_or(serde_json::Value::Null);
            thread_bodies.lock().unwrap().push(body.clone());

            match handler(&body, n) {
                FakeReply::Content(text) => {
                    let _ = request.respond(completion_response(&text));
                }
                FakeReply::Status(code) => {
                    let _ = request.respond(Response::from_string("error").with_status_code(code));
                }
                FakeReply::RawBody(text) => {
                    let _ = request.respond(Response::from_string(text).with_header(json_header()));
                }
                FakeReply::Delayed(pause, text) => {
                    thread::sleep(pause);
                    let _ = request.respond(completion_response(&text));
                }
            }
        }
    });

    FakeChat {
        url,
        hits,
        bodies,
        shutdown,
    }
}

fn json_header() -> Header {
    Header::from_bytes(&b"Content-Type"[..], &b"application/json"[..]).unwrap()
}

fn completion_response(content: &str) -> Response<std::io::Cursor<Vec<u8>>> {
    let body = serde_json::json!({
        "choices": [{ "message": { "role": "assistant", "content": content } }]
    })
    .to_string();
    Response::from_string(body).with_header(json_header())
}

/// Evaluator config pointed at a fake (or live) endpoint.
pub fn llm_config(url: &str) -> EvaluatorConfig {
    EvaluatorConfig {
        kind: EvaluatorKind::Llm,
        endpoint_url: url.to_string(),
        timeout: 5.0,
        ..EvaluatorConfig::default()
    }
}

/// Content of the last message in a captured request body.
pub fn last_message_content(body: &serde_json::Value) -> String {
    body["messages"]
        .as_array()
        .and_then(|m| m.last())
        .and_then(|m| m["content"].as_str())
        .unwrap_or_default()
        .to_string()
}

/// Pull the measured value out of a `distance(a, b) = 0.123` tool-result
/// line embedded in a prompt.
pub fn parse_measurement(text: &str) -> Option<f64> {
    text.lines()
        .filter_map(|line| {
            let line = line.trim();
            let rest = line.strip_prefix("distance(")?;
            let (_, value) = rest.split_once(" = ")?;
            value.parse::<f64>().ok()
        })
        .next_back()
}

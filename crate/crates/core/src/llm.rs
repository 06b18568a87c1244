//! Chat-completion access with two interchangeable transports: a live HTTP
//! client and a deterministic replay transport for offline runs.
//!
//! Replay scripts key responses on the prompt digest so a script survives
//! reordering of independent records; entries without a digest form an
//! ordinal queue consumed in request order. Request and response logs are
//! append-only JSON lines; credential bytes are scrubbed before any text
//! reaches a log.

use std::collections::BTreeMap;
use std::collections::VecDeque;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant, SystemTime};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::token_estimate;
use crate::prompt::Prompt;

/// Sampling and transport parameters for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub model: String,
    /// Sampling temperature, 0 for reproducible output.
    pub temperature: f64,
    /// Hard prompt budget; a prompt estimated over it is rejected pre-send.
    pub max_context_tokens: usize,
    pub timeout_secs: u64,
    /// Scheme + host (+port), e.g. `http://127.0.0.1:8080`.
    pub endpoint: String,
    /// Name of the environment variable holding the API key. Empty means
    /// unauthenticated (local stubs). Only the name is ever stored.
    pub credential_env: String,
}

/// Context budget of the smaller studied model class.
pub const CONTEXT_64K: usize = 64_000;
/// Context budget of the larger studied model class.
pub const CONTEXT_128K: usize = 128_000;

impl ModelConfig {
    pub fn new(model: impl Into<String>) -> ModelConfig {
        ModelConfig {
            model: model.into(),
            temperature: 0.0,
            max_context_tokens: CONTEXT_64K,
            timeout_secs: 120,
            endpoint: "http://127.0.0.1:8080".into(),
            credential_env: String::new(),
        }
    }

    pub fn with_context_budget(mut self, tokens: usize) -> ModelConfig {
        self.max_context_tokens = tokens;
        self
    }

    pub fn with_endpoint(mut self, endpoint: impl Into<String>) -> ModelConfig {
        self.endpoint = endpoint.into();
        self
    }

    pub fn with_credential_env(mut self, var: impl Into<String>) -> ModelConfig {
        self.credential_env = var.into();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransportTag {
    Live,
    Replay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt: usize,
    pub completion: usize,
}

/// One model reply with its accounting metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub finish_reason: String,
    pub usage: TokenUsage,
    pub latency_ms: u64,
    pub transport: TransportTag,
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("prompt needs {needed} tokens but the model budget is {budget}")]
    BudgetExceeded { needed: usize, budget: usize },
    #[error("replay script has no response for digest {digest}")]
    ReplayMiss { digest: String },
    #[error("transport failed after {attempts} attempt(s): {message}")]
    Transport { message: String, attempts: u32 },
    #[error("credential variable {env} is not set")]
    Credential { env: String },
    #[error("trial {trial} failed: {source}")]
    TrialFailed {
        trial: usize,
        #[source]
        source: Box<LlmError>,
    },
    #[error("cannot read replay script {path}: {message}")]
    Script { path: String, message: String },
}

#[derive(Debug, Clone, Deserialize)]
struct RawScriptEntry {
    #[serde(default)]
    digest: Option<String>,
    response: String,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Debug, Deserialize)]
struct RawScript {
    #[serde(default)]
    entries: Vec<RawScriptEntry>,
}

#[derive(Debug, Clone)]
struct ScriptReply {
    text: String,
    finish_reason: String,
}

/// Scripted responses: digest-keyed queues plus an ordinal fallback queue.
#[derive(Debug, Default)]
pub struct ReplayScript {
    by_digest: BTreeMap<String, VecDeque<ScriptReply>>,
    ordinal: VecDeque<ScriptReply>,
}

impl ReplayScript {
    pub fn new() -> ReplayScript {
        ReplayScript::default()
    }

    /// Queues a response for a specific prompt digest.
    pub fn push_digest(&mut self, digest: impl Into<String>, response: impl Into<String>) {
        self.by_digest
            .entry(digest.into())
            .or_default()
            .push_back(ScriptReply {
                text: response.into(),
                finish_reason: "stop".into(),
            });
    }

    /// Queues a response consumed in request order when no digest matches.
    pub fn push_ordinal(&mut self, response: impl Into<String>) {
        self.ordinal.push_back(ScriptReply {
            text: response.into(),
            finish_reason: "stop".into(),
        });
    }

    pub fn from_path(path: &Path) -> Result<ReplayScript, LlmError> {
        let text = std::fs::read_to_string(path).map_err(|e| LlmError::Script {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let raw: RawScript = serde_json::from_str(&text).map_err(|e| LlmError::Script {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut script = ReplayScript::new();
        for entry in raw.entries {
            let reply = ScriptReply {
                text: entry.response,
                finish_reason: entry.finish_reason.unwrap_or_else(|| "stop".into()),
            };
            match entry.digest {
                Some(d) => script.by_digest.entry(d).or_default().push_back(reply),
                None => script.ordinal.push_back(reply),
            }
        }
        Ok(script)
    }

    pub fn remaining(&self) -> usize {
        self.by_digest.values().map(VecDeque::len).sum::<usize>() + self.ordinal.len()
    }

    fn take(&mut self, digest: &str) -> Option<ScriptReply> {
        if let Some(queue) = self.by_digest.get_mut(digest) {
            if let Some(reply) = queue.pop_front() {
                return Some(reply);
            }
        }
        self.ordinal.pop_front()
    }
}

enum Transport {
    Live,
    Replay(Mutex<ReplayScript>),
}

/// Chat-completion client. Safe to share across threads: replay state, the
/// rate limiter, and the log writer are independently locked.
pub struct LlmClient {
    cfg: ModelConfig,
    transport: Transport,
    retries: u32,
    backoff_ms: u64,
    min_interval: Option<Duration>,
    last_request: Mutex<Option<Instant>>,
    log: Option<Mutex<PathBuf>>,
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    temperature: f64,
    messages: [WireMessage<'a>; 2],
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireReplyMessage,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct WireReplyMessage {
    content: String,
}

#[derive(Deserialize, Default)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: usize,
    #[serde(default)]
    completion_tokens: usize,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(SystemTime::UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

impl LlmClient {
    pub fn live(cfg: ModelConfig) -> LlmClient {
        Self::build(cfg, Transport::Live)
    }

    pub fn replay(cfg: ModelConfig, script: ReplayScript) -> LlmClient {
        Self::build(cfg, Transport::Replay(Mutex::new(script)))
    }

    fn build(cfg: ModelConfig, transport: Transport) -> LlmClient {
        LlmClient {
            cfg,
            transport,
            retries: 2,
            backoff_ms: 250,
            min_interval: None,
            last_request: Mutex::new(None),
            log: None,
        }
    }

    pub fn with_retries(mut self, retries: u32, backoff_ms: u64) -> LlmClient {
        self.retries = retries;
        self.backoff_ms = backoff_ms;
        self
    }

    pub fn with_rate_limit(mut self, min_interval: Duration) -> LlmClient {
        self.min_interval = Some(min_interval);
        self
    }

    /// Appends request/response events to a JSON-lines file at `path`.
    pub fn with_log(mut self, path: impl Into<PathBuf>) -> LlmClient {
        self.log = Some(Mutex::new(path.into()));
        self
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn transport_tag(&self) -> TransportTag {
        match self.transport {
            Transport::Live => TransportTag::Live,
            Transport::Replay(_) => TransportTag::Replay,
        }
    }

    fn credential(&self) -> Result<Option<String>, LlmError> {
        if self.cfg.credential_env.is_empty() {
            return Ok(None);
        }
        std::env::var(&self.cfg.credential_env)
            .map(Some)
            .map_err(|_| LlmError::Credential {
                env: self.cfg.credential_env.clone(),
            })
    }

    /// Strips the credential value from text bound for a log file.
    fn redact(&self, text: &str) -> String {
        match self.credential() {
            Ok(Some(secret)) if !secret.is_empty() => text.replace(&secret, "[REDACTED]"),
            _ => text.to_string(),
        }
    }

    fn log_event(&self, event: &str, digest: &str, fields: serde_json::Value) {
        let Some(lock) = &self.log else { return };
        let mut line = serde_json::json!({
            "ts_ms": now_ms() as u64,
            "event": event,
            "model": self.cfg.model,
            "digest": digest,
        });
        if let (Some(obj), Some(extra)) = (line.as_object_mut(), fields.as_object()) {
            for (k, v) in extra {
                obj.insert(k.clone(), v.clone());
            }
        }
        let path = lock.lock().expect("log path lock");
        if let Ok(mut f) = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&*path)
        {
            let _ = writeln!(f, "{line}");
        }
    }

    /// Sends one prompt. Over-budget prompts are rejected before any
    /// transport work; replay misses name the digest they looked up.
    pub fn complete(&self, prompt: &Prompt) -> Result<Completion, LlmError> {
        let digest = prompt.digest();
        if prompt.estimated_tokens > self.cfg.max_context_tokens {
            return Err(LlmError::BudgetExceeded {
                needed: prompt.estimated_tokens,
                budget: self.cfg.max_context_tokens,
            });
        }
        self.log_event(
            "request",
            &digest,
            serde_json::json!({ "estimated_tokens": prompt.estimated_tokens }),
        );
        let started = Instant::now();
        let result = match &self.transport {
            Transport::Replay(script) => self.complete_replay(script, prompt, &digest, started),
            Transport::Live => self.complete_live(prompt, started),
        };
        match &result {
            Ok(c) => self.log_event(
                "response",
                &digest,
                serde_json::json!({
                    "finish_reason": c.finish_reason,
                    "prompt_tokens": c.usage.prompt,
                    "completion_tokens": c.usage.completion,
                    "latency_ms": c.latency_ms,
                    "text": self.redact(&c.text),
                }),
            ),
            Err(e) => self.log_event(
                "error",
                &digest,
                serde_json::json!({ "message": self.redact(&e.to_string()) }),
            ),
        }
        result
    }

    fn complete_replay(
        &self,
        script: &Mutex<ReplayScript>,
        prompt: &Prompt,
        digest: &str,
        started: Instant,
    ) -> Result<Completion, LlmError> {
        let reply = script
            .lock()
            .expect("replay script lock")
            .take(digest)
            .ok_or_else(|| LlmError::ReplayMiss {
                digest: digest.to_string(),
            })?;
        Ok(Completion {
            usage: TokenUsage {
                prompt: prompt.estimated_tokens,
                completion: token_estimate(&reply.text),
            },
            text: reply.text,
            finish_reason: reply.finish_reason,
            latency_ms: started.elapsed().as_millis() as u64,
            transport: TransportTag::Replay,
        })
    }

    fn wait_for_rate_slot(&self) {
        let Some(interval) = self.min_interval else {
            return;
        };
        let mut last = self.last_request.lock().expect("rate limiter lock");
        if let Some(prev) = *last {
            let elapsed = prev.elapsed();
            if elapsed < interval {
                std::thread::sleep(interval - elapsed);
            }
        }
        *last = Some(Instant::now());
    }

    fn complete_live(&self, prompt: &Prompt, started: Instant) -> Result<Completion, LlmError> {
        let credential = self.credential()?;
        let url = format!(
            "{}/v1/chat/completions",
            self.cfg.endpoint.trim_end_matches('/')
        );
        let body = WireRequest {
            model: &self.cfg.model,
            temperature: self.cfg.temperature,
            messages: [
                WireMessage {
                    role: "system",
                    content: &prompt.system,
                },
                WireMessage {
                    role: "user",
                    content: &prompt.user,
                },
            ],
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(self.cfg.timeout_secs))
            .build()
            .map_err(|e| LlmError::Transport {
                message: e.to_string(),
                attempts: 0,
            })?;

        let mut last_error = String::new();
        for attempt in 0..=self.retries {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(
                    self.backoff_ms.saturating_mul(1 << (attempt - 1)),
                ));
            }
            self.wait_for_rate_slot();
            let mut request = client.post(&url).json(&body);
            if let Some(secret) = &credential {
                request = request.bearer_auth(secret);
            }
            match request.send().and_then(|r| r.error_for_status()) {
                Ok(response) => {
                    let parsed: WireResponse =
                        response.json().map_err(|e| LlmError::Transport {
                            message: format!("malformed completion body: {e}"),
                            attempts: attempt + 1,
                        })?;
                    let choice = parsed.choices.into_iter().next().ok_or_else(|| {
                        LlmError::Transport {
                            message: "completion body has no choices".into(),
                            attempts: attempt + 1,
                        }
                    })?;
                    let usage = parsed.usage.unwrap_or_default();
                    return Ok(Completion {
                        usage: TokenUsage {
                            prompt: if usage.prompt_tokens > 0 {
                                usage.prompt_tokens
                            } else {
                                prompt.estimated_tokens
                            },
                            completion: if usage.completion_tokens > 0 {
                                usage.completion_tokens
                            } else {
                                token_estimate(&choice.message.content)
                            },
                        },
                        text: choice.message.content,
                        finish_reason: choice.finish_reason.unwrap_or_else(|| "stop".into()),
                        latency_ms: started.elapsed().as_millis() as u64,
                        transport: TransportTag::Live,
                    });
                }
                Err(e) => last_error = e.to_string(),
            }
        }
        Err(LlmError::Transport {
            message: self.redact(&last_error),
            attempts: self.retries + 1,
        })
    }

    /// Runs `k` independent trials of the same prompt in order. The first
    /// failing trial aborts the set; earlier completions are discarded and
    /// the error names the failed trial.
    pub fn run_trials(&self, prompt: &Prompt, k: usize) -> Result<Vec<Completion>, LlmError> {
        assert!(k >= 1, "trial count must be at least 1");
        let mut out = Vec::with_capacity(k);
        for trial in 0..k {
            match self.complete(prompt) {
                Ok(c) => out.push(c),
                Err(e) => {
                    return Err(LlmError::TrialFailed {
                        trial,
                        source: Box::new(e),
                    })
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::ExpectedOutput;
    use std::io::{BufRead, BufReader, Read, Write as IoWrite};
    use std::net::TcpListener;

    fn prompt(system: &str, user: &str) -> Prompt {
        Prompt {
            system: system.to_string(),
            user: user.to_string(),
            expected_output: ExpectedOutput::FreePoC,
            estimated_tokens: token_estimate(system) + token_estimate(user),
        }
    }

    #[test]
    fn replay_matches_on_prompt_digest() {
        let p = prompt("sys", "user");
        let mut script = ReplayScript::new();
        script.push_digest(p.digest(), "OK");
        let client = LlmClient::replay(ModelConfig::new("m"), script);
        let c = client.complete(&p).unwrap();
        assert_eq!(c.text, "OK");
        assert_eq!(c.transport, TransportTag::Replay);
        assert_eq!(c.finish_reason, "stop");
        assert_eq!(c.usage.prompt, p.estimated_tokens);
    }

    #[test]
    fn replay_falls_back_to_ordinal_queue() {
        let p = prompt("sys", "user");
        let mut script = ReplayScript::new();
        script.push_ordinal("first");
        script.push_ordinal("second");
        let client = LlmClient::replay(ModelConfig::new("m"), script);
        assert_eq!(client.complete(&p).unwrap().text, "first");
        assert_eq!(client.complete(&p).unwrap().text, "second");
        let err = client.complete(&p).unwrap_err();
        match err {
            LlmError::ReplayMiss { digest } => assert_eq!(digest, p.digest()),
            other => panic!("expected ReplayMiss, got {other}"),
        }
    }

    #[test]
    fn over_budget_prompt_is_rejected_before_send() {
        let p = prompt("sys", &"x".repeat(4096));
        let mut script = ReplayScript::new();
        script.push_digest(p.digest(), "never");
        let client = LlmClient::replay(ModelConfig::new("m").with_context_budget(10), script);
        match client.complete(&p).unwrap_err() {
            LlmError::BudgetExceeded { needed, budget } => {
                assert!(needed > budget);
                assert_eq!(budget, 10);
            }
            other => panic!("expected BudgetExceeded, got {other}"),
        }
    }

    #[test]
    fn trials_preserve_script_order_and_report_exhaustion() {
        let p = prompt("sys", "user");
        let mut script = ReplayScript::new();
        script.push_ordinal("a");
        script.push_ordinal("b");
        script.push_ordinal("c");
        let client = LlmClient::replay(ModelConfig::new("m"), script);
        let texts: Vec<String> = client
            .run_trials(&p, 3)
            .unwrap()
            .into_iter()
            .map(|c| c.text)
            .collect();
        assert_eq!(texts, vec!["a", "b", "c"]);

        let mut short = ReplayScript::new();
        short.push_ordinal("a");
        short.push_ordinal("b");
        let client = LlmClient::replay(ModelConfig::new("m"), short);
        match client.run_trials(&p, 3).unwrap_err() {
            LlmError::TrialFailed { trial, source } => {
                assert_eq!(trial, 2);
                assert!(matches!(*source, LlmError::ReplayMiss { .. }));
            }
            other => panic!("expected TrialFailed, got {other}"),
        }
    }

    #[test]
    fn script_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("script.json");
        std::fs::write(
            &path,
            r#"{"entries": [
                {"digest": "abc", "response": "keyed"},
                {"response": "ordinal-1"},
                {"response": "ordinal-2", "finish_reason": "length"}
            ]}"#,
        )
        .unwrap();
        let mut script = ReplayScript::from_path(&path).unwrap();
        assert_eq!(script.remaining(), 3);
        assert_eq!(script.take("abc").unwrap().text, "keyed");
        let next = script.take("missing").unwrap();
        assert_eq!(next.text, "ordinal-1");
        assert_eq!(script.take("missing").unwrap().finish_reason, "length");
        assert!(script.take("missing").is_none());
    }

    /// Minimal one-shot chat-completions stub. Accepts `hits` connections;
    /// connections before `ok_after` are dropped without a response.
    fn spawn_stub(hits: usize, ok_after: usize, reply_text: &str) -> (String, std::thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let reply_text = reply_text.to_string();
        let handle = std::thread::spawn(move || {
            let mut seen_auth = Vec::new();
            for i in 0..hits {
                let (mut sock, _) = listener.accept().unwrap();
                if i < ok_after {
                    continue;
                }
                let mut reader = BufReader::new(sock.try_clone().unwrap());
                let mut content_length = 0usize;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    let line = line.trim_end();
                    if let Some(v) = line.strip_prefix("Content-Length: ") {
                        content_length = v.parse().unwrap();
                    }
                    if let Some(v) = line.strip_prefix("authorization: ") {
                        seen_auth.push(v.to_string());
                    } else if let Some(v) = line.strip_prefix("Authorization: ") {
                        seen_auth.push(v.to_string());
                    }
                    if line.is_empty() {
                        break;
                    }
                }
                let mut body = vec![0u8; content_length];
                reader.read_exact(&mut body).unwrap();
                let response_body = serde_json::json!({
                    "choices": [{"message": {"content": reply_text}, "finish_reason": "stop"}],
                    "usage": {"prompt_tokens": 7, "completion_tokens": 3}
                })
                .to_string();
                let http = format!(
                    "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                    response_body.len(),
                    response_body
                );
                sock.write_all(http.as_bytes()).unwrap();
            }
            seen_auth
        });
        (format!("http://{addr}"), handle)
    }

    #[test]
    fn live_transport_against_local_stub() {
        let (endpoint, stub) = spawn_stub(1, 0, "echoed");
        std::env::set_var("LLM_TEST_KEY_A", "sk-test-secret");
        let cfg = ModelConfig::new("stub-model")
            .with_endpoint(endpoint)
            .with_credential_env("LLM_TEST_KEY_A");
        let dir = tempfile::tempdir().unwrap();
        let log_path = dir.path().join("llm.jsonl");
        let client = LlmClient::live(cfg).with_retries(0, 1).with_log(&log_path);
        let c = client.complete(&prompt("sys", "user")).unwrap();
        assert_eq!(c.text, "echoed");
        assert_eq!(c.transport, TransportTag::Live);
        assert_eq!(c.usage, TokenUsage { prompt: 7, completion: 3 });

        let auth = stub.join().unwrap();
        assert_eq!(auth, vec!["Bearer sk-test-secret".to_string()]);

        let log = std::fs::read_to_string(&log_path).unwrap();
        assert!(log.contains("\"event\":\"request\""));
        assert!(log.contains("\"event\":\"response\""));
        assert!(!log.contains("sk-test-secret"), "credential leaked into log");
    }

    #[test]
    fn live_transport_retries_dropped_connections() {
        let (endpoint, stub) = spawn_stub(2, 1, "after-retry");
        let cfg = ModelConfig::new("stub-model").with_endpoint(endpoint);
        let client = LlmClient::live(cfg).with_retries(1, 1);
        let c = client.complete(&prompt("sys", "user")).unwrap();
        assert_eq!(c.text, "after-retry");
        stub.join().unwrap();
    }

    #[test]
    fn credential_value_is_scrubbed_from_logged_response_text() {
        std::env::set_var("LLM_TEST_KEY_B", "hunter2-secret");
        let p = prompt("sys", "user");
        let mut script = ReplayScript::new();
        script.push_digest(p.digest(), "the key hunter2-secret leaked into output");
        let dir = tempfile::tempdir().unwrap();
        let log_path = dir.path().join("llm.jsonl");
        let cfg = ModelConfig::new("m").with_credential_env("LLM_TEST_KEY_B");
        let client = LlmClient::replay(cfg, script).with_log(&log_path);
        let c = client.complete(&p).unwrap();
        assert!(c.text.contains("hunter2-secret"), "completion text is not redacted");

        let log = std::fs::read_to_string(&log_path).unwrap();
        assert!(!log.contains("hunter2-secret"));
        assert!(log.contains("[REDACTED]"));
    }

    #[test]
    fn missing_credential_variable_is_an_error() {
        let p = prompt("sys", "user");
        let cfg = ModelConfig::new("m")
            .with_endpoint("http://127.0.0.1:1")
            .with_credential_env("LLM_TEST_KEY_UNSET_XYZ");
        let client = LlmClient::live(cfg).with_retries(0, 1);
        match client.complete(&p).unwrap_err() {
            LlmError::Credential { env } => assert_eq!(env, "LLM_TEST_KEY_UNSET_XYZ"),
            other => panic!("expected Credential, got {other}"),
        }
    }
}

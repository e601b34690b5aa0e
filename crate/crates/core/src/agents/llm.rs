//! Chat-completion backend: request construction, history windowing and a
//! blocking client with retries.

use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{AgentProfile, ConversationView, Reply};

/// Environment variable holding the bearer credential.
pub const API_KEY_ENV: &str = "MECHAGENTS_API_KEY";

/// Appended to the system prompt of roles that write documents, so a live
/// model knows the document format the executor accepts.
pub const DSL_PRIMER: &str = r#"Problems are executed from a JSON problem document, not from code. Put exactly one document in a ```mechagents-dsl fenced block. Keys: geometry {kind: "rectangle" | "rectangle_with_hole", width, height, hole_center [x, y], hole_radius}, mesh {nx, ny}, material {name} or {model: "linear_elastic" | "neo_hookean", E, nu} or {model, mu, lambda}, kinematics ("small_strain" | "finite_strain"), bcs [{edge: "left" | "right" | "top" | "bottom", ux, uy}], outputs [{kind: "displacement_png" | "stress_component" | "von_mises" | "traction_force", component: "xx" | "yy" | "xy", edge, path}]. Example:
```mechagents-dsl
{"geometry": {"kind": "rectangle", "width": 1.0, "height": 1.0}, "mesh": {"nx": 32, "ny": 32},
 "material": {"model": "linear_elastic", "E": 1e9, "nu": 0.3}, "kinematics": "small_strain",
 "bcs": [{"edge": "left", "ux": 0.0, "uy": 0.0}, {"edge": "right", "ux": 0.1, "uy": 0.0}],
 "outputs": [{"kind": "displacement_png"}]}
```"#;

mod duration_secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Duration::try_from_secs_f64(secs).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmConfig {
    /// Base URL; `/chat/completions` is appended.
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    /// Context budget in estimated tokens (see [`estimate_tokens`]).
    pub max_context: usize,
    /// Extra attempts after the first on transient failures.
    pub retries: u32,
    pub backoff_ms: u64,
    #[serde(with = "duration_secs")]
    pub timeout: Duration,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            base_url: String::new(),
            model: String::new(),
            temperature: 0.0,
            max_context: 8192,
            retries: 3,
            backoff_ms: 500,
            timeout: Duration::from_secs(120),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("transport failure after {attempts} attempt(s): {detail}")]
    Transport { attempts: u32, detail: String },
    #[error("endpoint returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed completion response: {body}")]
    Malformed { body: String },
    #[error("system prompt and task need {needed} tokens but the window allows {budget}")]
    ContextTooSmall { needed: usize, budget: usize },
    #[error("script exhausted: {0}")]
    ScriptExhausted(String),
    #[error("backend not configured: {0}")]
    NotConfigured(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireMessage {
    pub role: String,
    pub content: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireRequest {
    pub model: String,
    pub messages: Vec<WireMessage>,
    pub temperature: f64,
}

impl WireRequest {
    pub fn estimated_tokens(&self) -> usize {
        self.messages.iter().map(|m| estimate_tokens(&m.content)).sum()
    }
}

/// Characters / 4, rounded up, plus 4 for per-message framing.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4) + 4
}

/// System prompt, task, then the longest suffix of the history that fits
/// in 90% of `max_context`.
pub fn build_request(profile: &AgentProfile, view: &ConversationView<'_>, config: &LlmConfig) -> Result<WireRequest, BackendError> {
    let mut system = profile.system_prompt.clone();
    if profile.role.writes_dsl() {
        system.push_str("\n\n");
        system.push_str(DSL_PRIMER);
    }
    let head = [
        WireMessage { role: "system".into(), content: system },
        WireMessage { role: "user".into(), content: view.task.to_string() },
    ];
    let budget = config.max_context * 9 / 10;
    let mut used: usize = head.iter().map(|m| estimate_tokens(&m.content)).sum();
    if used > budget {
        return Err(BackendError::ContextTooSmall { needed: used, budget });
    }
    let mut tail = Vec::new();
    for m in view.history.iter().rev() {
        let wire = if m.sender == profile.role {
            WireMessage { role: "assistant".into(), content: m.content.clone() }
        } else {
            WireMessage { role: "user".into(), content: format!("{}: {}", m.sender, m.content) }
        };
        let cost = estimate_tokens(&wire.content);
        if used + cost > budget {
            break;
        }
        used += cost;
        tail.push(wire);
    }
    let mut messages = head.to_vec();
    messages.extend(tail.into_iter().rev());
    Ok(WireRequest { model: config.model.clone(), messages, temperature: config.temperature })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LlmReply {
    pub content: String,
    /// Attempts beyond the first.
    pub retries: u32,
}

pub struct ChatClient {
    config: LlmConfig,
    agent: ureq::Agent,
    api_key: Option<String>,
}

impl std::fmt::Debug for ChatClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ChatClient").field("config", &self.config).field("api_key", &self.api_key.as_ref().map(|_| "***")).finish()
    }
}

enum Attempt {
    Retry(String),
    Fatal(BackendError),
}

impl ChatClient {
    /// Credential from `MECHAGENTS_API_KEY`, if set.
    pub fn from_env(config: LlmConfig) -> Result<Self, BackendError> {
        let key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        Self::new(config, key)
    }

    pub fn new(config: LlmConfig, api_key: Option<String>) -> Result<Self, BackendError> {
        if config.base_url.is_empty() || config.model.is_empty() {
            return Err(BackendError::NotConfigured("llm backend needs base_url and model".into()));
        }
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(ChatClient { config, agent, api_key })
    }

    pub fn config(&self) -> &LlmConfig {
        &self.config
    }

    fn scrub(&self, text: &str) -> String {
        match &self.api_key {
            Some(k) => text.replace(k.as_str(), "***"),
            None => text.to_string(),
        }
    }

    fn attempt(&self, url: &str, request: &WireRequest) -> Result<String, Attempt> {
        let mut call = self.agent.post(url).header("Content-Type", "application/json");
        if let Some(k) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {k}"));
        }
        let mut resp = call.send_json(request).map_err(|e| Attempt::Retry(self.scrub(&e.to_string())))?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(|e| Attempt::Retry(self.scrub(&e.to_string())))?;
        let body = self.scrub(&body);
        if status == 429 || status >= 500 {
            return Err(Attempt::Retry(format!("HTTP {status}: {body}")));
        }
        if !(200..300).contains(&status) {
            return Err(Attempt::Fatal(BackendError::Http { status, body }));
        }
        let parsed: serde_json::Value =
            serde_json::from_str(&body).map_err(|_| Attempt::Fatal(BackendError::Malformed { body: body.clone() }))?;
        parsed["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or(Attempt::Fatal(BackendError::Malformed { body }))
    }

    /// Sends the request, retrying transport errors, 429 and 5xx with
    /// exponential backoff.
    pub fn complete(&self, request: &WireRequest) -> Result<LlmReply, BackendError> {
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let mut retries = 0;
        loop {
            match self.attempt(&url, request) {
                Ok(content) => return Ok(LlmReply { content, retries }),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(detail)) => {
                    if retries >= self.config.retries {
                        return Err(BackendError::Transport { attempts: retries + 1, detail });
                    }
                    log::warn!("chat completion attempt {} failed: {detail}", retries + 1);
                    let delay = self.config.backoff_ms.saturating_mul(1 << retries.min(16));
                    thread::sleep(Duration::from_millis(delay));
                    retries += 1;
                }
            }
        }
    }
}

/// One chat-completion turn; the reply text is returned verbatim.
pub fn llm_respond(client: &ChatClient, profile: &AgentProfile, view: &ConversationView<'_>) -> Result<(Reply, LlmReply), BackendError> {
    let request = build_request(profile, view, client.config())?;
    let reply = client.complete(&request)?;
    if reply.retries > 0 {
        log::info!("{} reply needed {} retries", profile.role, reply.retries);
    }
    Ok((Reply::text(reply.content.clone()), reply))
}

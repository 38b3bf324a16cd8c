use std::io::{BufRead, BufReader};
use std::path::Path;
use std::time::{Duration, Instant};

use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use ureq::Agent;

use super::{Part, Provider, ProviderError, ProviderRequest, ProviderResponse, Usage};

/// Endpoint and model settings for [`LiveProvider`], usually read from a
/// TOML file. The key itself always comes from the environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    /// Base URL; `/chat/completions` is appended.
    pub endpoint: String,
    pub model: String,
    pub api_key_env: String,
    pub timeout_secs: u64,
    /// Extra attempts after a transport failure or a 5xx/429 status.
    pub retries: u32,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            endpoint: "https://api.openai.com/v1".into(),
            model: "gpt-4o".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            timeout_secs: 60,
            retries: 1,
        }
    }
}

impl ProviderConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ProviderError> {
        toml::from_str(text).map_err(|e| ProviderError::Malformed(format!("provider config: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ProviderError> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| ProviderError::Storage(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }
}

/// Blocking OpenAI-compatible chat-completions client.
pub struct LiveProvider {
    config: ProviderConfig,
    api_key: String,
    agent: Agent,
}

impl LiveProvider {
    /// Reads the key from the variable named in `config`.
    pub fn from_env(config: ProviderConfig) -> Result<Self, ProviderError> {
        let key = std::env::var(&config.api_key_env)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| ProviderError::Credentials(config.api_key_env.clone()))?;
        Ok(Self::with_key(config, key))
    }

    pub fn with_key(config: ProviderConfig, api_key: impl Into<String>) -> Self {
        let agent: Agent = Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        LiveProvider {
            config,
            api_key: api_key.into(),
            agent,
        }
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.config.endpoint.trim_end_matches('/'))
    }

    /// Wire document for `request`.
    pub fn body(&self, request: &ProviderRequest) -> Value {
        let messages: Vec<Value> = request
            .messages
            .iter()
            .map(|m| {
                let content = match m.parts.as_slice() {
                    [Part::Text { text }] => Value::String(text.clone()),
                    parts => Value::Array(parts.iter().map(wire_part).collect()),
                };
                json!({"role": m.role.as_str(), "content": content})
            })
            .collect();
        let mut body = json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        if request.structured_output {
            body["response_format"] = json!({"type": "json_object"});
        }
        if request.stream {
            body["stream"] = Value::Bool(true);
        }
        body
    }

    fn post(&self, body: &Value) -> Result<ureq::http::Response<ureq::Body>, ProviderError> {
        let mut attempt = 0;
        loop {
            let result = self
                .agent
                .post(&self.url())
                .header("Authorization", &format!("Bearer {}", self.api_key))
                .header("Content-Type", "application/json")
                .send(serde_json::to_string(body).expect("body serializes").as_bytes());
            let retryable = match &result {
                Ok(resp) => {
                    let s = resp.status().as_u16();
                    s == 429 || s >= 500
                }
                Err(_) => true,
            };
            if retryable && attempt < self.config.retries {
                attempt += 1;
                tracing::warn!(attempt, "retrying chat completion");
                continue;
            }
            let mut resp = result.map_err(|e| ProviderError::Transport(e.to_string()))?;
            let status = resp.status().as_u16();
            if !(200..300).contains(&status) {
                let body = resp.body_mut().read_to_string().unwrap_or_default();
                return Err(ProviderError::Status { status, body });
            }
            return Ok(resp);
        }
    }
}

fn wire_part(p: &Part) -> Value {
    match p {
        Part::Text { text } => json!({"type": "text", "text": text}),
        Part::Image { media_type, data } => {
            let encoded = base64::engine::general_purpose::STANDARD.encode(data);
            json!({
                "type": "image_url",
                "image_url": {"url": format!("data:{media_type};base64,{encoded}"), "detail": "auto"},
            })
        }
    }
}

fn usage_of(v: &Value) -> Option<Usage> {
    let u = v.get("usage")?;
    Some(Usage {
        prompt_tokens: u.get("prompt_tokens")?.as_u64()?,
        completion_tokens: u.get("completion_tokens")?.as_u64()?,
    })
}

impl Provider for LiveProvider {
    fn send(&self, request: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
        if request.stream {
            return self.send_stream(request, &mut |_| {});
        }
        let started = Instant::now();
        let mut resp = self.post(&self.body(request))?;
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let doc: Value = serde_json::from_str(&text).map_err(|e| ProviderError::Malformed(e.to_string()))?;
        let content = doc
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| ProviderError::Malformed("missing choices[0].message.content".into()))?;
        if content.is_empty() {
            return Err(ProviderError::Empty);
        }
        Ok(ProviderResponse {
            text: content.to_string(),
            usage: usage_of(&doc),
            latency: started.elapsed(),
        })
    }

    fn send_stream(
        &self,
        request: &ProviderRequest,
        on_delta: &mut dyn FnMut(&str),
    ) -> Result<ProviderResponse, ProviderError> {
        let started = Instant::now();
        let mut body = self.body(request);
        body["stream"] = Value::Bool(true);
        let mut resp = self.post(&body)?;
        let reader = BufReader::new(resp.body_mut().as_reader());
        let mut text = String::new();
        let mut usage = None;
        for line in reader.lines() {
            let line = line.map_err(|e| ProviderError::Transport(e.to_string()))?;
            let Some(data) = line.strip_prefix("data:") else { continue };
            let data = data.trim();
            if data == "[DONE]" {
                break;
            }
            let chunk: Value = serde_json::from_str(data).map_err(|e| ProviderError::Malformed(e.to_string()))?;
            if let Some(delta) = chunk.pointer("/choices/0/delta/content").and_then(Value::as_str) {
                if !delta.is_empty() {
                    text.push_str(delta);
                    on_delta(delta);
                }
            }
            if let Some(u) = usage_of(&chunk) {
                usage = Some(u);
            }
        }
        if text.is_empty() {
            return Err(ProviderError::Empty);
        }
        Ok(ProviderResponse {
            text,
            usage,
            latency: started.elapsed(),
        })
    }
}

//! Chat-completion transport.
//!
//! [`LiveProvider`] speaks the OpenAI-compatible wire format. [`FixtureProvider`]
//! replays recorded responses keyed by [`ProviderRequest::hash`], and
//! [`RecordingProvider`] writes those recordings.

mod fixture;
mod live;
mod scripted;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use fixture::{Fixture, FixtureProvider, FixtureStore, RecordingProvider};
pub use live::{LiveProvider, ProviderConfig};
pub use scripted::{ScriptRule, ScriptedProvider};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Part {
    Text { text: String },
    Image {
        media_type: String,
        #[serde(with = "base64_bytes")]
        data: Vec<u8>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub parts: Vec<Part>,
}

impl Message {
    pub fn text(role: Role, text: impl Into<String>) -> Self {
        Message {
            role,
            parts: vec![Part::Text { text: text.into() }],
        }
    }

    pub fn with_images(mut self, images: &[Image]) -> Self {
        for img in images {
            self.parts.push(Part::Image {
                media_type: img.media_type.clone(),
                data: img.data.clone(),
            });
        }
        self
    }

    /// Concatenated text parts.
    pub fn joined_text(&self) -> String {
        self.parts
            .iter()
            .filter_map(|p| match p {
                Part::Text { text } => Some(text.as_str()),
                Part::Image { .. } => None,
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Opaque image payload, e.g. a scene screenshot or sketch overlay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Image {
    pub media_type: String,
    /// Base64 in serialized documents.
    #[serde(with = "base64_bytes")]
    pub data: Vec<u8>,
}

mod base64_bytes {
    use base64::Engine as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(data: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&base64::engine::general_purpose::STANDARD.encode(data))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        base64::engine::general_purpose::STANDARD
            .decode(text)
            .map_err(serde::de::Error::custom)
    }
}

/// Sampling settings attached to one prompt kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PromptSettings {
    pub temperature: f64,
    pub max_tokens: u32,
    pub structured_output: bool,
    pub stream: bool,
}

pub mod settings {
    use super::PromptSettings;

    pub const ADD_EDIT: PromptSettings = PromptSettings {
        temperature: 0.1,
        max_tokens: 4000,
        structured_output: true,
        stream: false,
    };
    pub const BRUSHES: PromptSettings = PromptSettings {
        temperature: 0.1,
        max_tokens: 1000,
        structured_output: false,
        stream: true,
    };
    pub const INTENT: PromptSettings = PromptSettings {
        temperature: 0.1,
        max_tokens: 4000,
        structured_output: true,
        stream: false,
    };
    pub const CONCEPT_UI: PromptSettings = PromptSettings {
        temperature: 0.2,
        max_tokens: 1200,
        structured_output: false,
        stream: false,
    };
    pub const ATTRIBUTE_UI: PromptSettings = PromptSettings {
        temperature: 0.1,
        max_tokens: 3000,
        structured_output: false,
        stream: false,
    };
    pub const DEFAULT_VALUE: PromptSettings = PromptSettings {
        temperature: 0.1,
        max_tokens: 300,
        structured_output: false,
        stream: false,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderRequest {
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub structured_output: bool,
    pub stream: bool,
}

impl ProviderRequest {
    pub fn new(messages: Vec<Message>, settings: PromptSettings) -> Self {
        ProviderRequest {
            messages,
            temperature: settings.temperature,
            max_tokens: settings.max_tokens,
            structured_output: settings.structured_output,
            stream: settings.stream,
        }
    }

    /// The request as hashed: message text, image digests and sampling
    /// settings. Credentials, model, endpoint and the stream flag are
    /// transport concerns and are left out.
    pub fn canonical(&self) -> Value {
        let messages: Vec<Value> = self
            .messages
            .iter()
            .map(|m| {
                let parts: Vec<Value> = m
                    .parts
                    .iter()
                    .map(|p| match p {
                        Part::Text { text } => json!({"type": "text", "text": text}),
                        Part::Image { media_type, data } => json!({
                            "type": "image",
                            "media_type": media_type,
                            "sha256": hex::encode(Sha256::digest(data)),
                        }),
                    })
                    .collect();
                json!({"role": m.role.as_str(), "parts": parts})
            })
            .collect();
        json!({
            "messages": messages,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
            "structured_output": self.structured_output,
        })
    }

    /// Hex SHA-256 of the compact canonical document.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(&self.canonical()).expect("canonical request serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// All text parts of all messages.
    pub fn full_text(&self) -> String {
        self.messages
            .iter()
            .map(Message::joined_text)
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderResponse {
    pub text: String,
    #[serde(default)]
    pub usage: Option<Usage>,
    #[serde(default, with = "millis")]
    pub latency: Duration,
}

impl ProviderResponse {
    pub fn new(text: impl Into<String>) -> Self {
        ProviderResponse {
            text: text.into(),
            usage: None,
            latency: Duration::ZERO,
        }
    }
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProviderError {
    #[error("missing credentials: environment variable `{0}` is not set")]
    Credentials(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("provider returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed provider response: {0}")]
    Malformed(String),
    #[error("provider returned an empty response")]
    Empty,
    #[error("no recorded response for request {hash}")]
    FixtureMiss { hash: String },
    #[error("fixture storage error: {0}")]
    Storage(String),
    #[error("no scripted response matches the request")]
    NoScriptMatch,
}

pub trait Provider: Send + Sync {
    fn send(&self, request: &ProviderRequest) -> Result<ProviderResponse, ProviderError>;

    /// Like [`send`](Self::send), reporting text fragments as they arrive.
    /// Non-streaming providers deliver the whole text as one fragment.
    fn send_stream(
        &self,
        request: &ProviderRequest,
        on_delta: &mut dyn FnMut(&str),
    ) -> Result<ProviderResponse, ProviderError> {
        let response = self.send(request)?;
        on_delta(&response.text);
        Ok(response)
    }
}

impl<P: Provider + ?Sized> Provider for std::sync::Arc<P> {
    fn send(&self, request: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
        (**self).send(request)
    }

    fn send_stream(
        &self,
        request: &ProviderRequest,
        on_delta: &mut dyn FnMut(&str),
    ) -> Result<ProviderResponse, ProviderError> {
        (**self).send_stream(request, on_delta)
    }
}

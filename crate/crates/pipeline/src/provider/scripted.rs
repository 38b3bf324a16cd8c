use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Provider, ProviderError, ProviderRequest, ProviderResponse};

/// Answers a request whose text contains every `contains` fragment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptRule {
    #[serde(default)]
    pub name: String,
    pub contains: Vec<String>,
    /// A string is returned verbatim; any other document is serialized.
    pub response: Value,
}

impl ScriptRule {
    fn matches(&self, text: &str) -> bool {
        self.contains.iter().all(|c| text.contains(c.as_str()))
    }

    fn text(&self) -> String {
        match &self.response {
            Value::String(s) => s.clone(),
            other => serde_json::to_string_pretty(other).expect("value serializes"),
        }
    }
}

/// Offline provider driven by an ordered rule list; the first match wins.
/// Used to author fixtures through [`super::RecordingProvider`].
#[derive(Debug, Clone, Default)]
pub struct ScriptedProvider {
    rules: Vec<ScriptRule>,
    chunk: usize,
}

impl ScriptedProvider {
    pub fn new(rules: Vec<ScriptRule>) -> Self {
        ScriptedProvider { rules, chunk: 24 }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ProviderError> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| ProviderError::Storage(format!("{}: {e}", path.display())))?;
        let rules: Vec<ScriptRule> =
            serde_json::from_str(&text).map_err(|e| ProviderError::Storage(format!("{}: {e}", path.display())))?;
        Ok(ScriptedProvider::new(rules))
    }

    /// Size in characters of the fragments handed to stream callbacks.
    pub fn with_chunk(mut self, chunk: usize) -> Self {
        self.chunk = chunk.max(1);
        self
    }
}

impl Provider for ScriptedProvider {
    fn send(&self, request: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
        let text = request.full_text();
        self.rules
            .iter()
            .find(|r| r.matches(&text))
            .map(|r| ProviderResponse::new(r.text()))
            .ok_or(ProviderError::NoScriptMatch)
    }

    fn send_stream(
        &self,
        request: &ProviderRequest,
        on_delta: &mut dyn FnMut(&str),
    ) -> Result<ProviderResponse, ProviderError> {
        let response = self.send(request)?;
        let chars: Vec<char> = response.text.chars().collect();
        for piece in chars.chunks(self.chunk) {
            on_delta(&piece.iter().collect::<String>());
        }
        Ok(response)
    }
}

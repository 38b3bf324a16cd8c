use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Provider, ProviderError, ProviderRequest, ProviderResponse};

/// One recorded exchange, stored as `<hash>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub hash: String,
    /// Canonical request, kept for readability and review.
    pub request: Value,
    pub response: ProviderResponse,
}

/// Directory of recorded exchanges. Access is serialized.
#[derive(Debug)]
pub struct FixtureStore {
    dir: PathBuf,
    cache: Mutex<HashMap<String, ProviderResponse>>,
}

impl FixtureStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FixtureStore {
            dir: dir.into(),
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, hash: &str) -> PathBuf {
        self.dir.join(format!("{hash}.json"))
    }

    pub fn lookup(&self, request: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
        let hash = request.hash();
        let mut cache = self.cache.lock().expect("fixture cache poisoned");
        if let Some(hit) = cache.get(&hash) {
            return Ok(hit.clone());
        }
        let path = self.path(&hash);
        let text = match fs::read_to_string(&path) {
            Ok(text) => text,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(ProviderError::FixtureMiss { hash })
            }
            Err(e) => return Err(ProviderError::Storage(format!("{}: {e}", path.display()))),
        };
        let fixture: Fixture = serde_json::from_str(&text)
            .map_err(|e| ProviderError::Storage(format!("{}: {e}", path.display())))?;
        if fixture.hash != hash {
            return Err(ProviderError::Storage(format!(
                "{} records hash {}",
                path.display(),
                fixture.hash
            )));
        }
        cache.insert(hash, fixture.response.clone());
        Ok(fixture.response)
    }

    /// Persists `response` under the request's hash, replacing any earlier
    /// recording.
    pub fn record(&self, request: &ProviderRequest, response: &ProviderResponse) -> Result<(), ProviderError> {
        let hash = request.hash();
        let fixture = Fixture {
            hash: hash.clone(),
            request: request.canonical(),
            response: response.clone(),
        };
        let mut cache = self.cache.lock().expect("fixture cache poisoned");
        fs::create_dir_all(&self.dir).map_err(|e| ProviderError::Storage(e.to_string()))?;
        let text = serde_json::to_string_pretty(&fixture).expect("fixture serializes") + "\n";
        let path = self.path(&hash);
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, text).map_err(|e| ProviderError::Storage(format!("{}: {e}", tmp.display())))?;
        fs::rename(&tmp, &path).map_err(|e| ProviderError::Storage(format!("{}: {e}", path.display())))?;
        cache.insert(hash, response.clone());
        Ok(())
    }
}

/// Replay-only provider. A request without a recording is an error.
#[derive(Debug)]
pub struct FixtureProvider {
    store: FixtureStore,
}

impl FixtureProvider {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FixtureProvider {
            store: FixtureStore::new(dir),
        }
    }
}

impl Provider for FixtureProvider {
    fn send(&self, request: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
        self.store.lookup(request)
    }
}

/// Forwards to `inner` and records every successful exchange.
pub struct RecordingProvider<P> {
    inner: P,
    store: FixtureStore,
}

impl<P: Provider> RecordingProvider<P> {
    pub fn new(inner: P, dir: impl Into<PathBuf>) -> Self {
        RecordingProvider {
            inner,
            store: FixtureStore::new(dir),
        }
    }
}

impl<P: Provider> Provider for RecordingProvider<P> {
    fn send(&self, request: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
        let response = self.inner.send(request)?;
        self.store.record(request, &response)?;
        Ok(response)
    }

    fn send_stream(
        &self,
        request: &ProviderRequest,
        on_delta: &mut dyn FnMut(&str),
    ) -> Result<ProviderResponse, ProviderError> {
        let response = self.inner.send_stream(request, on_delta)?;
        self.store.record(request, &response)?;
        Ok(response)
    }
}

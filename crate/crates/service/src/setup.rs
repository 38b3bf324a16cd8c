//! Command-line selection of catalog and provider, shared by the binaries.

use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, ValueEnum};
use steer_core::Catalog;
use steer_pipeline::{
    FixtureProvider, LiveProvider, Pipeline, Provider, ProviderConfig, ProviderError, RecordingProvider,
    ScriptedProvider,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProviderKind {
    /// Replay recorded responses from `--fixtures`.
    Fixture,
    /// Answer from the rule file given by `--script`.
    Scripted,
    /// Call the configured model endpoint.
    Live,
}

#[derive(Debug, Clone, Args)]
pub struct ProviderArgs {
    #[arg(long, value_enum, default_value = "fixture")]
    pub provider: ProviderKind,
    /// Fixture directory for replay, or the target of `--record`.
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
    /// Rule file for the scripted provider.
    #[arg(long)]
    pub script: Option<PathBuf>,
    /// TOML endpoint configuration for the live provider.
    #[arg(long)]
    pub provider_config: Option<PathBuf>,
    /// Save every exchange to `--fixtures` (scripted and live only).
    #[arg(long)]
    pub record: bool,
    /// Catalog document replacing the bundled one.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum SetupError {
    #[error("--{0} is required for this provider")]
    Missing(&'static str),
    #[error("--record cannot be combined with the fixture provider")]
    RecordFixture,
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Catalog(#[from] steer_core::CatalogError),
}

impl ProviderArgs {
    pub fn catalog(&self) -> Result<Catalog, SetupError> {
        Ok(match &self.catalog {
            Some(path) => Catalog::load(path)?,
            None => Catalog::bundled(),
        })
    }

    pub fn provider(&self) -> Result<Arc<dyn Provider>, SetupError> {
        let inner: Arc<dyn Provider> = match self.provider {
            ProviderKind::Fixture => {
                if self.record {
                    return Err(SetupError::RecordFixture);
                }
                let dir = self.fixtures.clone().ok_or(SetupError::Missing("fixtures"))?;
                return Ok(Arc::new(FixtureProvider::new(dir)));
            }
            ProviderKind::Scripted => {
                let script = self.script.as_ref().ok_or(SetupError::Missing("script"))?;
                let p = ScriptedProvider::from_file(script)?;
                if self.record {
                    return Ok(Arc::new(RecordingProvider::new(p, self.record_dir()?)));
                }
                Arc::new(p)
            }
            ProviderKind::Live => {
                let config = match &self.provider_config {
                    Some(path) => ProviderConfig::load(path)?,
                    None => ProviderConfig::default(),
                };
                let p = LiveProvider::from_env(config)?;
                if self.record {
                    return Ok(Arc::new(RecordingProvider::new(p, self.record_dir()?)));
                }
                Arc::new(p)
            }
        };
        Ok(inner)
    }

    fn record_dir(&self) -> Result<PathBuf, SetupError> {
        self.fixtures.clone().ok_or(SetupError::Missing("fixtures"))
    }

    pub fn pipeline(&self) -> Result<Pipeline, SetupError> {
        Ok(Pipeline::new(self.provider()?, Arc::new(self.catalog()?)))
    }
}

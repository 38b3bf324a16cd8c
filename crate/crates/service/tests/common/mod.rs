#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use steer_core::Catalog;
use steer_pipeline::{Pipeline, ScriptedProvider};
use steer_service::{SceneManifest, SessionManager};

pub fn asset(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../cli/assets").join(rel)
}

pub fn pipeline(script: &str) -> Pipeline {
    let provider = ScriptedProvider::from_file(asset(&format!("scripts/{script}.json"))).unwrap();
    Pipeline::new(Arc::new(provider), Arc::new(Catalog::bundled()))
}

pub fn manager() -> SessionManager {
    SessionManager::new(pipeline("make_it_playful"))
}

pub fn fountain() -> SceneManifest {
    serde_json::from_str(&std::fs::read_to_string(asset("scenes/fountain_plaza.json")).unwrap()).unwrap()
}

pub fn manifest(template: &str) -> SceneManifest {
    SceneManifest {
        template: template.into(),
        ..fountain()
    }
}

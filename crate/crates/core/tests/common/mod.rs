#![allow(dead_code)]

pub mod schema;

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use deskbot_core::intent::{save_model, train, IntentCorpus, TrainedModel, TrainingConfig};
use deskbot_core::overseer::RuntimeConfig;

/// The bundled corpus trained once per test binary.
pub fn trained_model() -> &'static TrainedModel {
    static MODEL: OnceLock<TrainedModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let config = TrainingConfig {
            seed: 1,
            ..TrainingConfig::default()
        };
        train(&IntentCorpus::bundled(), &config).unwrap().model
    })
}

/// Writes the shared model into `dir` and returns a script-driven config
/// whose outputs all land in `dir`.
pub fn script_config(dir: &Path, script: &str) -> RuntimeConfig {
    let model = dir.join("model.json");
    if !model.exists() {
        save_model(trained_model(), &model).unwrap();
    }
    let script_path = dir.join("script.txt");
    std::fs::write(&script_path, script).unwrap();
    let mut config = RuntimeConfig {
        model,
        source: format!("script:{}", script_path.display()),
        date: Some("2024-03-01".into()),
        ..RuntimeConfig::default()
    };
    config.outputs.metrics = Some(dir.join("metrics.csv"));
    config.outputs.trace = Some(dir.join("trace.csv"));
    config.outputs.error_log = Some(dir.join("errors.jsonl"));
    config.outputs.growth_log = Some(dir.join("growth.jsonl"));
    config.outputs.events = Some(dir.join("events.jsonl"));
    config
}

pub fn script_path(config: &RuntimeConfig) -> PathBuf {
    config
        .source
        .strip_prefix("script:")
        .expect("script source")
        .into()
}

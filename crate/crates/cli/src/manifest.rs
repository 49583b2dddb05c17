//! Run manifests: enough configuration echo to re-run any artifact.

use serde::Serialize;
use std::time::Instant;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config_echo: serde_json::Value,
    pub seed: u64,
    pub versions: String,
    /// Per-stage wall-clock milliseconds, in execution order. The only
    /// fields of an artifact that vary between identical runs.
    pub timings_ms: Vec<(String, u128)>,
}

impl RunManifest {
    pub fn new(subcommand: &str, config_echo: serde_json::Value, seed: u64) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            config_echo,
            seed,
            versions: format!("rocarc {}", env!("CARGO_PKG_VERSION")),
            timings_ms: Vec::new(),
        }
    }
}

/// Stage stopwatch feeding `RunManifest::timings_ms`.
pub struct Stages {
    last: Instant,
    list: Vec<(String, u128)>,
}

impl Stages {
    pub fn start() -> Self {
        Self {
            last: Instant::now(),
            list: Vec::new(),
        }
    }

    pub fn mark(&mut self, name: &str) {
        let now = Instant::now();
        self.list
            .push((name.to_string(), now.duration_since(self.last).as_millis()));
        self.last = now;
    }

    pub fn into_timings(self) -> Vec<(String, u128)> {
        self.list
    }
}

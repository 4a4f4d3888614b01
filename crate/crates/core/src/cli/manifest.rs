use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use super::Common;

/// Provenance of one run, embedded in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub case_path: String,
    pub config_path: Option<String>,
    pub seed: Option<u64>,
    pub backend: String,
    pub started_at: String,
    pub finished_at: Option<String>,
    /// Full argument vector, so the run can be repeated verbatim.
    pub args: Vec<String>,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn start(command: &str, common: &Common, seed: Option<u64>, args: &[String]) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            case_path: common.case.display().to_string(),
            config_path: common.config.as_ref().map(|p| p.display().to_string()),
            seed,
            backend: String::new(),
            started_at: now(),
            finished_at: None,
            args: args.to_vec(),
        }
    }

    pub fn finish(&mut self) {
        self.finished_at = Some(now());
    }
}

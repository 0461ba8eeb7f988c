use serde::{Deserialize, Serialize};

/// Provenance attached to every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Fully resolved parameters, defaults included.
    pub parameters: serde_json::Value,
    /// Command-line arguments after the program name; replaying them
    /// reproduces the run.
    pub args: Vec<String>,
    pub version: String,
    /// RFC 3339, UTC.
    pub timestamp: String,
}

impl RunManifest {
    pub fn new<P: Serialize>(command: &str, parameters: &P, args: &[String]) -> Self {
        Self {
            command: command.to_owned(),
            parameters: serde_json::to_value(parameters).unwrap_or(serde_json::Value::Null),
            args: args.to_vec(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }
}

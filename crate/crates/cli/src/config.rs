//! Resolved run configuration: defaults, then a JSON config file, then
//! `CROSSAUTH_<KEY>` environment variables, then command-line flags.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

pub const ENV_PREFIX: &str = "CROSSAUTH_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Fingerprint scenario: `fixed-skew` or `fixed-cfo`.
    pub scenario: String,
    pub devices: usize,
    pub frames: usize,
    pub roster: Option<String>,
    pub snr_db: f64,
    pub n_paths: usize,
    pub algo: String,
    pub k: usize,
    pub train_fraction: f64,
    pub dataset: Option<String>,
    pub model: Option<String>,
    pub scenario_file: Option<String>,
    pub messages: u32,
    pub trials: usize,
    pub injections: u32,
    pub n_max: u64,
    pub d: u64,
    pub iterations: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            scenario: "fixed-skew".into(),
            devices: 10,
            frames: 200,
            roster: None,
            snr_db: 5.0,
            n_paths: 10,
            algo: "knn".into(),
            k: 5,
            train_fraction: 0.8,
            dataset: None,
            model: None,
            scenario_file: None,
            messages: 20,
            trials: 10,
            injections: 100,
            n_max: 1000,
            d: 10,
            iterations: 101,
        }
    }
}

fn env_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

impl RunConfig {
    /// `file` is the parsed `--config` document, `env` the process
    /// environment and `flags` the explicitly given command-line values.
    pub fn resolve(
        file: Option<Value>,
        env: impl IntoIterator<Item = (String, String)>,
        flags: Map<String, Value>,
    ) -> Result<RunConfig, CliError> {
        let Value::Object(mut merged) = serde_json::to_value(RunConfig::default()).expect("serializable") else {
            unreachable!()
        };
        if let Some(f) = file {
            let Value::Object(f) = f else {
                return Err(CliError::Config("config file must hold a JSON object".into()));
            };
            for (k, v) in f {
                if !merged.contains_key(&k) {
                    return Err(CliError::Config(format!("unknown config key {k:?}")));
                }
                merged.insert(k, v);
            }
        }
        for (name, raw) in env {
            if let Some(key) = name.strip_prefix(ENV_PREFIX) {
                let key = key.to_ascii_lowercase();
                if merged.contains_key(&key) {
                    merged.insert(key, env_value(&raw));
                }
            }
        }
        merged.extend(flags);
        serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Config(format!("config: {e}")))
    }
}

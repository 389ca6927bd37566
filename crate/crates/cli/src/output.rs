use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use dichotomy::io::round_sig9;
use serde::Serialize;
use serde_json::Value;

use crate::CliError;

/// A reported scalar: 9 significant digits, non-finite values as strings.
pub fn num(x: f64) -> Value {
    if x.is_nan() {
        Value::from("nan")
    } else if x == f64::INFINITY {
        Value::from("inf")
    } else if x == f64::NEG_INFINITY {
        Value::from("-inf")
    } else {
        Value::from(round_sig9(x))
    }
}

/// CSV cell for a scalar, same convention as [`num`].
pub fn cell(x: f64) -> String {
    match num(x) {
        Value::String(s) => s,
        v => v.to_string(),
    }
}

pub fn to_pretty(v: &impl Serialize) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::io(format!("serialize: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

/// `results.csv` → `results.csv.<suffix>`.
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<String>,
    pub parameters: BTreeMap<String, String>,
    pub seed: u64,
    pub tool_version: &'static str,
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(command: &str, inputs: &[&Path], parameters: &[(&str, String)], seed: u64) -> Self {
        Self {
            command: command.to_owned(),
            inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
            parameters: parameters.iter().map(|(k, v)| ((*k).to_owned(), v.clone())).collect(),
            seed,
            tool_version: env!("CARGO_PKG_VERSION"),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }

    pub fn write_next_to(&self, out: &Path) -> Result<(), CliError> {
        write_file(&sidecar(out, "manifest.json"), &to_pretty(self)?)
    }
}

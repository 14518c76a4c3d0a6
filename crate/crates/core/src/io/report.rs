use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub const REPORT_VERSION: u32 = 1;

/// Record of one run. Output paths are relative to the report's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub report_version: u32,
    pub tool_version: String,
    /// Seconds since the Unix epoch; excluded from reproducibility checks.
    pub timestamp: u64,
    pub method: String,
    pub seed: u64,
    pub inputs: BTreeMap<String, String>,
    pub parameters: Value,
    pub outputs: Vec<String>,
    pub explanation: Value,
}

impl Report {
    pub fn new(method: &str, seed: u64) -> Self {
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Report {
            report_version: REPORT_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp,
            method: method.to_string(),
            seed,
            inputs: BTreeMap::new(),
            parameters: Value::Null,
            outputs: Vec::new(),
            explanation: Value::Null,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Report JSON with the timestamp field removed.
pub fn strip_timestamp(json: &str) -> Result<Value> {
    let mut v: Value = serde_json::from_str(json)?;
    if let Value::Object(map) = &mut v {
        map.remove("timestamp");
    }
    Ok(v)
}

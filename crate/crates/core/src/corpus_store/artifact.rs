// SPDX-License-Identifier: MIT OR Apache-2.0

//! Versioned, self-describing JSON artifacts.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VassError};

pub const ARTIFACT_FORMAT: &str = "vass-artifact";
pub const ARTIFACT_VERSION: u32 = 1;

/// Provenance stamped on every emitted artifact.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Artifact<T> {
    pub format: String,
    pub version: u32,
    pub kind: String,
    pub provenance: Provenance,
    pub payload: T,
}

impl<T> Artifact<T> {
    pub fn new(kind: impl Into<String>, provenance: Provenance, payload: T) -> Self {
        Self {
            format: ARTIFACT_FORMAT.into(),
            version: ARTIFACT_VERSION,
            kind: kind.into(),
            provenance,
            payload,
        }
    }
}

pub fn save_artifact<T: Serialize>(artifact: &Artifact<T>, path: &Path) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(artifact)?;
    bytes.push(b'\n');
    super::write_atomic(path, &bytes)
}

/// Loads an artifact, rejecting unknown formats, versions and kinds.
pub fn load_artifact<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<Artifact<T>> {
    let bytes = std::fs::read(path)?;
    parse_artifact(&bytes, kind)
}

pub fn parse_artifact<T: DeserializeOwned>(bytes: &[u8], kind: &str) -> Result<Artifact<T>> {
    let raw: serde_json::Value = serde_json::from_slice(bytes)?;
    let format = raw.get("format").and_then(|v| v.as_str()).unwrap_or_default();
    if format != ARTIFACT_FORMAT {
        return Err(VassError::InvalidData(format!("not an artifact (format `{format}`)")));
    }
    match raw.get("version").and_then(|v| v.as_u64()) {
        Some(v) if v == u64::from(ARTIFACT_VERSION) => {}
        other => {
            return Err(VassError::UnsupportedVersion {
                found: other.map_or_else(|| "missing".into(), |v| v.to_string()),
                supported: ARTIFACT_VERSION.to_string(),
            })
        }
    }
    let found_kind = raw.get("kind").and_then(|v| v.as_str()).unwrap_or_default();
    if found_kind != kind {
        return Err(VassError::InvalidData(format!(
            "expected artifact kind `{kind}`, found `{found_kind}`"
        )));
    }
    Ok(serde_json::from_value(raw)?)
}

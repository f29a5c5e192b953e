// SPDX-License-Identifier: MIT OR Apache-2.0

//! Generation records and tokenizer marker maps exchanged with model runtimes.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, VassError};

/// One generation, as a JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationLine {
    pub id: String,
    pub prompt: String,
    pub output: String,
    pub alpha: f64,
    pub steering: String,
    #[serde(default)]
    pub generated_tokens: Vec<u32>,
    /// Token ids whose logits are recorded at each step.
    #[serde(default)]
    pub tracked_tokens: Vec<u32>,
    /// `tracked_logits[step][i]` is the logit of `tracked_tokens[i]`.
    #[serde(default)]
    pub tracked_logits: Vec<Vec<f64>>,
}

pub fn write_generation_lines(lines: &[GenerationLine], path: &Path) -> Result<()> {
    let mut out = Vec::new();
    for l in lines {
        serde_json::to_writer(&mut out, l)?;
        out.push(b'\n');
    }
    super::write_atomic(path, &out)
}

pub fn read_generation_lines(path: &Path) -> Result<Vec<GenerationLine>> {
    let content = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let g: GenerationLine = serde_json::from_str(line).map_err(|e| VassError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        if g.tracked_logits.iter().any(|step| step.len() != g.tracked_tokens.len()) {
            return Err(VassError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: "tracked_logits rows must match tracked_tokens".into(),
            });
        }
        out.push(g);
    }
    Ok(out)
}

/// `marker_string,token_id` mapping from rendered markers to vocabulary ids.
pub fn read_tokenizer_map(path: &Path) -> Result<BTreeMap<String, u32>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["marker_string", "token_id"] {
        return Err(VassError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "expected header `marker_string,token_id`".into(),
        });
    }
    let mut map = BTreeMap::new();
    for (i, rec) in rdr.deserialize::<(String, u32)>().enumerate() {
        let (marker, id) = rec.map_err(|e| VassError::Parse {
            path: path.to_path_buf(),
            line: i + 2,
            message: e.to_string(),
        })?;
        if map.insert(marker.clone(), id).is_some() {
            return Err(VassError::DuplicateId(marker));
        }
    }
    Ok(map)
}

pub fn write_tokenizer_map(map: &BTreeMap<String, u32>, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["marker_string", "token_id"])?;
    for (m, id) in map {
        w.write_record([m.clone(), id.to_string()])?;
    }
    let bytes = w.into_inner().map_err(|e| VassError::Io(e.into_error()))?;
    super::write_atomic(path, &bytes)
}

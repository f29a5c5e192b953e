// SPDX-License-Identifier: MIT OR Apache-2.0

//! Bundled prompt sets and emotional prefixes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, VassError};

const VALIDATION_PROMPTS: &str = include_str!("../../data/validation_prompts.tsv");
const NEGATIVE_PREFIXES: &str = include_str!("../../data/negative_prefixes.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptTier {
    NeutralScenario,
    StoryContinuation,
    SubjectiveControl,
}

impl PromptTier {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::NeutralScenario => "neutral_scenario",
            Self::StoryContinuation => "story_continuation",
            Self::SubjectiveControl => "subjective_control",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "neutral_scenario" => Some(Self::NeutralScenario),
            "story_continuation" => Some(Self::StoryContinuation),
            "subjective_control" => Some(Self::SubjectiveControl),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSet {
    pub tier: PromptTier,
    pub prompts: Vec<String>,
}

/// The representative open-ended prompts, one set per tier.
pub fn bundled_prompt_sets() -> Vec<PromptSet> {
    let mut sets: Vec<PromptSet> = Vec::new();
    for line in VALIDATION_PROMPTS.lines().filter(|l| !l.trim().is_empty()) {
        let (tier, prompt) = line.split_once('\t').expect("bundled prompts are tab-separated");
        let tier = PromptTier::parse(tier).expect("bundled tier names are valid");
        match sets.iter_mut().find(|s| s.tier == tier) {
            Some(set) => set.prompts.push(prompt.to_string()),
            None => sets.push(PromptSet {
                tier,
                prompts: vec![prompt.to_string()],
            }),
        }
    }
    sets
}

/// All bundled prompts in tier order.
pub fn bundled_prompts() -> Vec<String> {
    bundled_prompt_sets().into_iter().flat_map(|s| s.prompts).collect()
}

/// The fifteen negative emotional prefixes.
pub fn negative_prefixes() -> Vec<String> {
    NEGATIVE_PREFIXES
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PromptLine {
    prompt: String,
}

/// Reads `{"prompt": ...}` JSON lines.
pub fn load_prompts_jsonl(path: &Path) -> Result<Vec<String>> {
    let content = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: PromptLine = serde_json::from_str(line).map_err(|e| VassError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(row.prompt);
    }
    if out.is_empty() {
        return Err(VassError::InvalidData(format!("{} holds no prompts", path.display())));
    }
    Ok(out)
}

pub fn write_prompts_jsonl(prompts: &[String], path: &Path) -> Result<()> {
    let mut out = Vec::new();
    for p in prompts {
        serde_json::to_writer(&mut out, &serde_json::json!({ "prompt": p }))?;
        out.push(b'\n');
    }
    super::write_atomic(path, &out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_sets_cover_three_tiers() {
        let sets = bundled_prompt_sets();
        assert_eq!(sets.len(), 3);
        assert!(sets.iter().all(|s| !s.prompts.is_empty()));
        assert_eq!(bundled_prompts()[0], "Describe someone opening a letter.");
    }

    #[test]
    fn fifteen_prefixes() {
        let p = negative_prefixes();
        assert_eq!(p.len(), 15);
        assert_eq!(p[14], "Every bridge you had has been burned.");
    }
}

// SPDX-License-Identifier: MIT OR Apache-2.0

//! Labelled utterance corpora in TSV or JSON-lines form.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, VassError};

/// Label reserved for the contrast class.
pub const NEUTRAL_LABEL: &str = "neutral";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledUtterance {
    pub id: String,
    pub text: String,
    pub labels: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Tsv,
    Jsonl,
}

impl CorpusFormat {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "tsv" | "txt" => Some(Self::Tsv),
            "jsonl" | "json" => Some(Self::Jsonl),
            _ => None,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonRow {
    id: String,
    text: String,
    labels: Vec<String>,
}

/// Reads a corpus file. Blank lines are skipped; TSV lines starting with `#`
/// are comments.
pub fn ingest_labeled_corpus(path: &Path, format: CorpusFormat) -> Result<Vec<LabeledUtterance>> {
    let content = std::fs::read_to_string(path)?;
    parse_labeled_corpus(&content, format, path)
}

pub fn parse_labeled_corpus(
    content: &str,
    format: CorpusFormat,
    origin: &Path,
) -> Result<Vec<LabeledUtterance>> {
    let parse_err = |line: usize, message: String| VassError::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (idx, raw) in content.lines().enumerate() {
        let line_no = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let (id, text, labels) = match format {
            CorpusFormat::Tsv => {
                if raw.starts_with('#') {
                    continue;
                }
                let fields: Vec<&str> = raw.split('\t').collect();
                if fields.len() != 3 {
                    return Err(parse_err(
                        line_no,
                        format!("expected 3 tab-separated fields, found {}", fields.len()),
                    ));
                }
                let labels = fields[2]
                    .split(',')
                    .map(|l| l.trim().to_string())
                    .filter(|l| !l.is_empty())
                    .collect::<Vec<_>>();
                (fields[0].to_string(), fields[1].to_string(), labels)
            }
            CorpusFormat::Jsonl => {
                let row: JsonRow = serde_json::from_str(raw)
                    .map_err(|e| parse_err(line_no, e.to_string()))?;
                (row.id, row.text, row.labels)
            }
        };
        if id.is_empty() {
            return Err(parse_err(line_no, "empty id".into()));
        }
        if text.is_empty() {
            return Err(parse_err(line_no, "empty text".into()));
        }
        if labels.is_empty() {
            return Err(parse_err(line_no, "no labels".into()));
        }
        if !seen.insert(id.clone()) {
            return Err(VassError::DuplicateId(id));
        }
        out.push(LabeledUtterance {
            id,
            text,
            labels: labels.into_iter().map(|l| l.to_lowercase()).collect(),
        });
    }
    Ok(out)
}

/// Groups the single-label subset by class.
///
/// A row joins class `e` when `e` is its only label (including the neutral
/// class). Rows with several labels, including `neutral` plus an emotion,
/// are excluded everywhere.
pub fn single_label_subset(corpus: &[LabeledUtterance]) -> BTreeMap<String, Vec<&LabeledUtterance>> {
    let mut groups: BTreeMap<String, Vec<&LabeledUtterance>> = BTreeMap::new();
    for utt in corpus {
        if utt.labels.len() == 1 {
            let label = utt.labels.iter().next().expect("one label").clone();
            groups.entry(label).or_default().push(utt);
        }
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;

    const SIX_ROWS: &str = "1\tI love this\tjoy\n\
        2\twhat a day\tjoy,anger\n\
        3\tthe sky\tneutral\n\
        4\tugh\tanger\n\
        5\tfine then\tneutral,joy\n\
        # comment\n\
        \n\
        6\twow\tsurprise\n";

    #[test]
    fn single_label_filter_counts() {
        let rows = parse_labeled_corpus(SIX_ROWS, CorpusFormat::Tsv, Path::new("mem")).unwrap();
        assert_eq!(rows.len(), 6);
        let groups = single_label_subset(&rows);
        let total: usize = groups.values().map(Vec::len).sum();
        assert_eq!(total, 4);
        assert_eq!(groups["joy"].len(), 1);
        assert_eq!(groups["joy"][0].id, "1");
        assert_eq!(groups[NEUTRAL_LABEL].len(), 1);
        assert!(groups.values().flatten().all(|u| u.id != "2" && u.id != "5"));
    }

    #[test]
    fn malformed_row_reports_line() {
        let bad = "1\ta\tjoy\n2\tmissing label\n";
        match parse_labeled_corpus(bad, CorpusFormat::Tsv, Path::new("c.tsv")) {
            Err(VassError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_id_rejected() {
        let dup = "{\"id\":\"a\",\"text\":\"x\",\"labels\":[\"joy\"]}\n{\"id\":\"a\",\"text\":\"y\",\"labels\":[\"fear\"]}\n";
        assert!(matches!(
            parse_labeled_corpus(dup, CorpusFormat::Jsonl, Path::new("c.jsonl")),
            Err(VassError::DuplicateId(id)) if id == "a"
        ));
    }

    #[test]
    fn jsonl_matches_tsv() {
        let tsv = parse_labeled_corpus("x\thello\tJoy,fear\n", CorpusFormat::Tsv, Path::new("a")).unwrap();
        let jsonl = parse_labeled_corpus(
            "{\"id\":\"x\",\"text\":\"hello\",\"labels\":[\"fear\",\"joy\"]}",
            CorpusFormat::Jsonl,
            Path::new("b"),
        )
        .unwrap();
        assert_eq!(tsv, jsonl);
    }
}

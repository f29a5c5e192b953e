// SPDX-License-Identifier: MIT OR Apache-2.0

//! Valence/arousal rating tables and word lexicons.
//!
//! Both share one CSV layout, `word,valence,arousal,range_lo,range_hi`,
//! where the range columns declare the scale the row was recorded on.
//! Values are rescaled linearly onto `[-1, 1]` at ingest.

use std::collections::{BTreeMap, HashSet};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, VassError};

/// The 27 emotion categories, in alphabetical order.
pub const EMOTION_LABELS: [&str; 27] = [
    "admiration",
    "amusement",
    "anger",
    "annoyance",
    "approval",
    "caring",
    "confusion",
    "curiosity",
    "desire",
    "disappointment",
    "disapproval",
    "disgust",
    "embarrassment",
    "excitement",
    "fear",
    "gratitude",
    "grief",
    "joy",
    "love",
    "nervousness",
    "optimism",
    "pride",
    "realization",
    "relief",
    "remorse",
    "sadness",
    "surprise",
];

const BUNDLED_SELF_REPORT: &str = include_str!("../../data/self_report_ratings.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatingSource {
    SelfReport,
    HumanNorms,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmotionRating {
    pub valence: f64,
    pub arousal: f64,
}

/// Ratings keyed by lowercase label, all values in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingTable {
    pub source: RatingSource,
    entries: BTreeMap<String, EmotionRating>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub word: String,
    pub valence: f64,
    pub arousal: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CsvRow {
    word: String,
    valence: f64,
    arousal: f64,
    range_lo: f64,
    range_hi: f64,
}

/// Maps `value` from `[lo, hi]` onto `[-1, 1]`.
pub fn rescale(value: f64, lo: f64, hi: f64) -> Result<f64> {
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(VassError::InvalidData(format!(
            "invalid declared range [{lo}, {hi}]"
        )));
    }
    let tol = 1e-9 * (hi - lo);
    if !value.is_finite() || value < lo - tol || value > hi + tol {
        return Err(VassError::InvalidData(format!(
            "value {value} outside declared range [{lo}, {hi}]"
        )));
    }
    if lo == -1.0 && hi == 1.0 {
        return Ok(value);
    }
    Ok((-1.0 + 2.0 * (value - lo) / (hi - lo)).clamp(-1.0, 1.0))
}

fn read_rows<R: Read>(reader: R, origin: &Path) -> Result<Vec<(String, f64, f64)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = ["word", "valence", "arousal", "range_lo", "range_hi"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(VassError::Parse {
            path: origin.to_path_buf(),
            line: 1,
            message: format!("expected header `{}`", expected.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize::<CsvRow>().enumerate() {
        let line = i + 2;
        let row = rec.map_err(|e| VassError::Parse {
            path: origin.to_path_buf(),
            line,
            message: e.to_string(),
        })?;
        let to_parse = |e: VassError| VassError::Parse {
            path: origin.to_path_buf(),
            line,
            message: e.to_string(),
        };
        let v = rescale(row.valence, row.range_lo, row.range_hi).map_err(to_parse)?;
        let a = rescale(row.arousal, row.range_lo, row.range_hi).map_err(to_parse)?;
        out.push((row.word.trim().to_lowercase(), v, a));
    }
    Ok(out)
}

impl RatingTable {
    pub fn from_entries(
        source: RatingSource,
        entries: impl IntoIterator<Item = (String, EmotionRating)>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (label, rating) in entries {
            for v in [rating.valence, rating.arousal] {
                if !(-1.0..=1.0).contains(&v) {
                    return Err(VassError::InvalidData(format!(
                        "rating {v} for `{label}` outside [-1, 1]"
                    )));
                }
            }
            if map.insert(label.to_lowercase(), rating).is_some() {
                return Err(VassError::DuplicateId(label));
            }
        }
        let table = Self {
            source,
            entries: map,
        };
        if source == RatingSource::SelfReport {
            table.require_labels(EMOTION_LABELS.iter().copied())?;
        }
        Ok(table)
    }

    /// Self-reported ratings bundled with the crate (27 labels).
    pub fn bundled_self_report() -> Self {
        Self::parse_csv(BUNDLED_SELF_REPORT.as_bytes(), RatingSource::SelfReport, Path::new("<bundled>"))
            .expect("bundled ratings are valid")
    }

    pub fn load_csv(path: &Path, source: RatingSource) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::parse_csv(file, source, path)
    }

    pub fn parse_csv<R: Read>(reader: R, source: RatingSource, origin: &Path) -> Result<Self> {
        let rows = read_rows(reader, origin)?;
        Self::from_entries(
            source,
            rows.into_iter()
                .map(|(w, valence, arousal)| (w, EmotionRating { valence, arousal })),
        )
    }

    pub fn get(&self, label: &str) -> Option<EmotionRating> {
        self.entries.get(&label.to_lowercase()).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, EmotionRating)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Fails with the full list of labels lacking a rating.
    pub fn require_labels<'a>(&self, labels: impl IntoIterator<Item = &'a str>) -> Result<()> {
        let missing: Vec<String> = labels
            .into_iter()
            .filter(|l| self.get(l).is_none())
            .map(str::to_string)
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(VassError::MissingRatings(missing))
        }
    }

    /// Valence and arousal targets in the given label order.
    pub fn targets(&self, labels: &[String]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.require_labels(labels.iter().map(String::as_str))?;
        Ok(labels
            .iter()
            .map(|l| {
                let r = self.get(l).expect("checked");
                (r.valence, r.arousal)
            })
            .unzip())
    }

    /// Writes the table as `[-1, 1]`-ranged CSV.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["word", "valence", "arousal", "range_lo", "range_hi"])?;
        for (label, r) in &self.entries {
            w.write_record([
                label.clone(),
                r.valence.to_string(),
                r.arousal.to_string(),
                "-1".into(),
                "1".into(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| VassError::Io(e.into_error()))?;
        super::write_atomic(path, &bytes)
    }
}

/// Loads a word lexicon; words are lowercased and must be unique.
pub fn load_lexicon(path: &Path) -> Result<Vec<LexiconEntry>> {
    let file = std::fs::File::open(path)?;
    parse_lexicon(file, path)
}

pub fn parse_lexicon<R: Read>(reader: R, origin: &Path) -> Result<Vec<LexiconEntry>> {
    let rows = read_rows(reader, origin)?;
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(rows.len());
    for (word, valence, arousal) in rows {
        if !seen.insert(word.clone()) {
            return Err(VassError::DuplicateId(word));
        }
        out.push(LexiconEntry {
            word,
            valence,
            arousal,
        });
    }
    Ok(out)
}

pub fn write_lexicon(entries: &[LexiconEntry], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["word", "valence", "arousal", "range_lo", "range_hi"])?;
    for e in entries {
        w.write_record([
            e.word.clone(),
            e.valence.to_string(),
            e.arousal.to_string(),
            "-1".into(),
            "1".into(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| VassError::Io(e.into_error()))?;
    super::write_atomic(path, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bundled_table_values() {
        let t = RatingTable::bundled_self_report();
        assert_eq!(t.len(), 27);
        assert_eq!(t.get("joy"), Some(EmotionRating { valence: 0.90, arousal: 0.87 }));
        assert_eq!(t.get("Relief"), Some(EmotionRating { valence: 0.67, arousal: 0.00 }));
        assert_eq!(t.get("sadness").unwrap().arousal, -0.60);
    }

    #[test]
    fn unit_interval_midpoint_maps_to_zero() {
        let csv = "word,valence,arousal,range_lo,range_hi\nhappy,0.5,1.0,0,1\n";
        let lex = parse_lexicon(csv.as_bytes(), Path::new("m")).unwrap();
        assert_eq!(lex[0].valence, 0.0);
        assert_eq!(lex[0].arousal, 1.0);
    }

    #[test]
    fn self_report_requires_all_labels() {
        let csv = "word,valence,arousal,range_lo,range_hi\njoy,0.9,0.8,-1,1\n";
        match RatingTable::parse_csv(csv.as_bytes(), RatingSource::SelfReport, Path::new("m")) {
            Err(VassError::MissingRatings(gaps)) => {
                assert_eq!(gaps.len(), 26);
                assert!(gaps.contains(&"anger".to_string()));
            }
            other => panic!("unexpected {other:?}"),
        }
        let t = RatingTable::parse_csv(csv.as_bytes(), RatingSource::HumanNorms, Path::new("m")).unwrap();
        assert!(t.require_labels(["joy"]).is_ok());
    }

    #[test]
    fn out_of_range_value_is_a_parse_error() {
        let csv = "word,valence,arousal,range_lo,range_hi\njoy,9,0,1,5\n";
        assert!(matches!(
            parse_lexicon(csv.as_bytes(), Path::new("m")),
            Err(VassError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn duplicate_words_rejected() {
        let csv = "word,valence,arousal,range_lo,range_hi\nGood,1,0,-1,1\ngood,0.5,0,-1,1\n";
        assert!(matches!(parse_lexicon(csv.as_bytes(), Path::new("m")), Err(VassError::DuplicateId(_))));
    }

    proptest! {
        #[test]
        fn rescale_is_idempotent(lo in -10.0f64..0.0, width in 0.1f64..20.0, t in 0.0f64..1.0) {
            let hi = lo + width;
            let x = lo + t * width;
            let once = rescale(x, lo, hi).unwrap();
            let twice = rescale(once, -1.0, 1.0).unwrap();
            prop_assert!((once - twice).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&once));
        }
    }
}

// SPDX-License-Identifier: MIT OR Apache-2.0

//! Lexicon-based affect scoring.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus_store::LexiconEntry;
use crate::error::{Result, VassError};

/// Tokens after a negator whose valence is flipped.
pub const NEGATION_WINDOW: usize = 3;

pub const NEGATORS: [&str; 20] = [
    "not", "no", "never", "none", "nobody", "nothing", "neither", "nor", "nowhere", "without",
    "cannot", "can't", "don't", "doesn't", "didn't", "isn't", "wasn't", "aren't", "won't", "hardly",
];

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AffectScore {
    /// `S/√(S²+1)` of the summed (negation-adjusted) valence `S`.
    pub sentiment: f64,
    pub valence: f64,
    pub arousal: f64,
}

/// Lowercased runs of alphanumerics and apostrophes.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\'' || c == '\u{2019}'))
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase().replace('\u{2019}', "'"))
        .collect()
}

#[derive(Debug, Clone)]
pub struct LexiconScorer {
    entries: HashMap<String, (f64, f64)>,
}

impl LexiconScorer {
    pub fn new(lexicon: &[LexiconEntry]) -> Result<Self> {
        if lexicon.is_empty() {
            return Err(VassError::InvalidArgument("empty lexicon".into()));
        }
        Ok(Self {
            entries: lexicon
                .iter()
                .map(|e| (e.word.to_lowercase(), (e.valence, e.arousal)))
                .collect(),
        })
    }

    pub fn score(&self, text: &str) -> AffectScore {
        let mut negated_until = 0usize;
        let (mut sum_v, mut sum_a, mut hits) = (0.0, 0.0, 0usize);
        for (i, tok) in tokenize(text).iter().enumerate() {
            if NEGATORS.contains(&tok.as_str()) {
                negated_until = i + NEGATION_WINDOW + 1;
                continue;
            }
            if let Some(&(v, a)) = self.entries.get(tok) {
                sum_v += if i < negated_until { -v } else { v };
                sum_a += a;
                hits += 1;
            }
        }
        if hits == 0 {
            return AffectScore::default();
        }
        AffectScore {
            sentiment: sum_v / (sum_v * sum_v + 1.0).sqrt(),
            valence: (sum_v / hits as f64).clamp(-1.0, 1.0),
            arousal: (sum_a / hits as f64).clamp(-1.0, 1.0),
        }
    }
}

pub fn lexicon_affect(text: &str, lexicon: &[LexiconEntry]) -> Result<AffectScore> {
    Ok(LexiconScorer::new(lexicon)?.score(text))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lex() -> Vec<LexiconEntry> {
        [("good", 0.8, 0.2), ("great", 0.9, 0.6), ("awful", -0.9, 0.5), ("calm", 0.3, -0.7)]
            .iter()
            .map(|(w, v, a)| LexiconEntry {
                word: w.to_string(),
                valence: *v,
                arousal: *a,
            })
            .collect()
    }

    #[test]
    fn no_hits_is_zero() {
        assert_eq!(lexicon_affect("the table", &lex()).unwrap(), AffectScore::default());
        assert!(lexicon_affect("x", &[]).is_err());
    }

    #[test]
    fn negation_flips_within_window() {
        let s = lexicon_affect("not good", &lex()).unwrap();
        assert!(s.sentiment < 0.0 && s.valence == -0.8);
        let far = lexicon_affect("not a b c good", &lex()).unwrap();
        assert!(far.sentiment > 0.0);
        let near = lexicon_affect("not a b good", &lex()).unwrap();
        assert!(near.sentiment < 0.0);
    }

    #[test]
    fn sentiment_formula() {
        let s = lexicon_affect("good great", &lex()).unwrap();
        let sum: f64 = 0.8 + 0.9;
        assert!((s.sentiment - sum / (sum * sum + 1.0).sqrt()).abs() < 1e-15);
        assert!((s.arousal - 0.4).abs() < 1e-15);
    }

    #[test]
    fn appending_positive_words_is_monotone() {
        let scorer = LexiconScorer::new(&lex()).unwrap();
        for base in ["awful awful", "the day was awful", "calm", ""] {
            let mut prev = scorer.score(base).sentiment;
            for k in 1..=5 {
                let text = format!("{base}{}", " good".repeat(k));
                let s = scorer.score(&text).sentiment;
                assert!(s >= prev, "{text}");
                prev = s;
            }
        }
    }

    proptest! {
        #[test]
        fn bounded_for_any_bytes(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
            let text = String::from_utf8_lossy(&bytes);
            let s = LexiconScorer::new(&lex()).unwrap().score(&text);
            for v in [s.sentiment, s.valence, s.arousal] {
                prop_assert!((-1.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn odd_in_valence(words in prop::collection::vec(0usize..4, 0..8)) {
            let l = lex();
            let neg: Vec<LexiconEntry> = l.iter().map(|e| LexiconEntry { valence: -e.valence, ..e.clone() }).collect();
            let text: Vec<&str> = words.iter().map(|&i| l[i].word.as_str()).collect();
            let text = text.join(" ");
            let a = lexicon_affect(&text, &l).unwrap();
            let b = lexicon_affect(&text, &neg).unwrap();
            prop_assert_eq!(a.sentiment, -b.sentiment);
        }
    }
}

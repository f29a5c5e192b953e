// SPDX-License-Identifier: MIT OR Apache-2.0

//! Heuristic detection of degenerate generations.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const NON_PRINTABLE_THRESHOLD: f64 = 0.2;
pub const REPEAT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OodReport {
    pub flag: bool,
    /// Largest of the component fractions, in `[0, 1]`.
    pub score: f64,
    pub non_printable: f64,
    pub repeated_4gram: f64,
}

fn is_bad_char(c: char) -> bool {
    c == char::REPLACEMENT_CHARACTER || (c.is_control() && c != '\n' && c != '\t')
}

/// Share of character 4-grams that repeat an earlier 4-gram.
pub fn repeated_4gram_fraction(chars: &[char]) -> f64 {
    if chars.len() < 4 {
        return 0.0;
    }
    let grams: Vec<&[char]> = chars.windows(4).collect();
    let distinct: HashSet<&[char]> = grams.iter().copied().collect();
    1.0 - distinct.len() as f64 / grams.len() as f64
}

pub fn detect_ood(text: &str) -> OodReport {
    let chars: Vec<char> = text.chars().collect();
    if chars.iter().all(|c| c.is_whitespace()) {
        return OodReport {
            flag: true,
            score: 1.0,
            non_printable: 0.0,
            repeated_4gram: 0.0,
        };
    }
    let non_printable = chars.iter().filter(|c| is_bad_char(**c)).count() as f64 / chars.len() as f64;
    let repeated_4gram = repeated_4gram_fraction(&chars);
    OodReport {
        flag: non_printable > NON_PRINTABLE_THRESHOLD || repeated_4gram > REPEAT_THRESHOLD,
        score: non_printable.max(repeated_4gram),
        non_printable,
        repeated_4gram,
    }
}

const CLEAN: [&str; 8] = [
    "The river bends around the old mill before reaching the sea.",
    "She opened the letter and smiled at the familiar handwriting.",
    "Mix the flour and water, then let the dough rest for an hour.",
    "The committee will meet again next Tuesday to review the plan.",
    "A light rain fell over the quiet town all afternoon.",
    "He tuned the guitar slowly, listening to each string.",
    "Our train was late, so we bought coffee and waited.",
    "The museum reopened after a long renovation.",
];

/// Seeded degenerate texts of five kinds: looping words, looping
/// characters, byte garbage, empty output and garbage-laced sentences.
pub fn corruption_corpus(seed: u64, n: usize) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let base = CLEAN[rng.random_range(0..CLEAN.len())];
            match i % 5 {
                0 => {
                    let words: Vec<&str> = base.split(' ').collect();
                    let w = words[rng.random_range(0..words.len())];
                    vec![w; rng.random_range(20..60)].join(" ")
                }
                1 => {
                    let c = char::from(rng.random_range(b'a'..=b'z'));
                    c.to_string().repeat(rng.random_range(30..200))
                }
                2 => (0..rng.random_range(10..80))
                    .map(|_| {
                        if rng.random_bool(0.7) {
                            char::REPLACEMENT_CHARACTER
                        } else {
                            char::from(rng.random_range(1u8..32))
                        }
                    })
                    .collect(),
                3 => " ".repeat(rng.random_range(0..3)),
                _ => base
                    .chars()
                    .map(|c| if rng.random_bool(0.4) { char::REPLACEMENT_CHARACTER } else { c })
                    .collect(),
            }
        })
        .collect()
}

/// Clean reference sentences used as negatives.
pub fn clean_sentences() -> &'static [&'static str] {
    &CLEAN
}

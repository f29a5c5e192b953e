// SPDX-License-Identifier: MIT OR Apache-2.0

//! Judges and scorers: refusal and sycophancy verdicts, degenerate-output
//! detection, lexicon affect and steered benchmark runs.

mod affect;
mod benchmark;
mod judge;
mod ood;
mod scorer;

pub use affect::{lexicon_affect, tokenize, AffectScore, LexiconScorer, NEGATION_WINDOW, NEGATORS};
pub use benchmark::{
    load_benchmark_jsonl, parse_benchmark_jsonl, run_benchmark, steering_at, Benchmark,
    BenchmarkOptions, BenchmarkResult, BenchmarkRow,
};
pub use judge::{
    judge_refusal, judge_sycophancy, parse_option, JudgeConfig, SycophancyItem, Verdict,
    SUBSTRING_WINDOW,
};
pub use ood::{
    clean_sentences, corruption_corpus, detect_ood, repeated_4gram_fraction, OodReport,
    NON_PRINTABLE_THRESHOLD, REPEAT_THRESHOLD,
};
pub use scorer::{PipeScorer, Scorer};

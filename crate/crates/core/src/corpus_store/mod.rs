// SPDX-License-Identifier: MIT OR Apache-2.0

//! Ingestion, validation and persistence of corpora, ratings, lexicons,
//! prompt sets, tensor dumps and fitted artifacts.
//!
//! Readers are pure and may run concurrently. Writers go through
//! [`write_atomic`], which stages the bytes in a sibling temporary file and
//! renames it into place, so a reader never observes a partial file.

mod artifact;
mod corpus;
mod interchange;
mod prompts;
mod ratings;
mod vatd;

use std::io::Write;
use std::path::Path;

pub use artifact::{
    load_artifact, parse_artifact, save_artifact, Artifact, Provenance, ARTIFACT_VERSION,
};
pub use corpus::{
    ingest_labeled_corpus, parse_labeled_corpus, single_label_subset, CorpusFormat,
    LabeledUtterance, NEUTRAL_LABEL,
};
pub use interchange::{
    read_generation_lines, read_tokenizer_map, write_generation_lines, write_tokenizer_map,
    GenerationLine,
};
pub use prompts::{
    bundled_prompt_sets, bundled_prompts, load_prompts_jsonl, negative_prefixes,
    write_prompts_jsonl, PromptSet, PromptTier,
};
pub use ratings::{
    load_lexicon, parse_lexicon, rescale, write_lexicon, EmotionRating, LexiconEntry,
    RatingSource, RatingTable, EMOTION_LABELS,
};
pub use vatd::{fnv1a64, read_tensor_dump, write_tensor_dump, Tensor, TensorDump};

use crate::error::Result;

/// Writes `bytes` to `path` through a temporary sibling file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{file_name}.{}.tmp", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

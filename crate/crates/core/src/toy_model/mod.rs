// SPDX-License-Identifier: MIT OR Apache-2.0

//! A tiny deterministic decoder-only transformer with steering, clamping and
//! ablation hooks, plus analytic constructions and synthetic fixtures.

mod analytic;
mod fixtures;
mod generate;
mod model;
mod vocab;

pub use analytic::{build_analytic, random_plane, role_markers, AnalyticBasis, AnalyticSpec, MarkerCoord, MAX_COORD};
pub use fixtures::{
    ladder_fixture, push_planted_lexicon, refusal_fixture, synth_circumplex_dump, synth_circumplex_fixture, CircumplexFixture,
    CircumplexOptions, LadderFixture, RefusalFixture, LADDER_DELTA, REFUSAL_PROMPTS, REFUSING_PROMPTS,
};
pub use generate::{argmax_first, generate, Clamp, GenerateOptions, GenerationRecord};
pub use model::{
    Ablation, ForwardOutput, Hooks, ModelWeights, NormKind, SteeringEntry, SteeringSpec, ToyConfig,
    ToyModel, STEERING_SITE,
};
pub use vocab::{
    ladder_id, ladder_word, Roles, TokenRole, Vocab, COMPLIANCE_MARKERS, EOS, FIRST_MARKER_ID,
    LADDER_BASE_ID, LADDER_HALF_WIDTH, REFUSAL_MARKERS, REPLACEMENT_ID,
};

// SPDX-License-Identifier: MIT OR Apache-2.0

//! Valence/arousal subspace analysis for language-model activations.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod behavior_eval;
pub mod circumplex;
pub mod corpus_store;
pub mod error;
pub mod mech_analysis;
pub mod numerics;
pub mod steering_engine;
pub mod steering_vectors;
pub mod toy_model;
pub mod va_subspace;

pub use error::{Result, VassError};

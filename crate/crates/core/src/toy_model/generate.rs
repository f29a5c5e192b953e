// SPDX-License-Identifier: MIT OR Apache-2.0

//! Greedy decoding with steering, logit clamping and neuron ablation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::model::{Ablation, Hooks, SteeringSpec, ToyModel};
use super::vocab::EOS;
use crate::corpus_store::GenerationLine;
use crate::error::{Result, VassError};

/// Overwrites the logits of `tokens` before each argmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clamp {
    pub tokens: Vec<u32>,
    /// `reference[step][i]` is the value for `tokens[i]` at decode step `step`.
    pub reference: Vec<Vec<f64>>,
    /// Past the end of `reference`, take values from an unsteered, unablated
    /// forward pass on the current sequence instead of failing.
    #[serde(default)]
    pub extend_with_unsteered: bool,
}

impl Clamp {
    /// A clamp whose reference is the tracked logits of an earlier record.
    pub fn from_record(record: &GenerationRecord) -> Self {
        Self {
            tokens: record.tracked_tokens.clone(),
            reference: record.tracked_logits.clone(),
            extend_with_unsteered: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GenerateOptions {
    pub max_new: usize,
    pub steering: Option<SteeringSpec>,
    pub clamp: Option<Clamp>,
    pub ablation: Option<Ablation>,
    /// Tokens whose pre-clamp logits are recorded at each step.
    pub track: Vec<u32>,
    /// Layers whose last-position state is captured at the first step.
    pub capture: Vec<usize>,
}

impl GenerateOptions {
    pub fn new(max_new: usize) -> Self {
        Self {
            max_new,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub prompt_tokens: Vec<u32>,
    pub generated: Vec<u32>,
    pub tracked_tokens: Vec<u32>,
    pub tracked_logits: Vec<Vec<f64>>,
    /// Prompt-final states per captured layer.
    pub captured: BTreeMap<usize, Vec<f64>>,
    pub steering: Option<SteeringSpec>,
    pub clamp: Option<Clamp>,
    pub ablation: Option<Ablation>,
}

impl GenerationRecord {
    /// Interchange row; `alpha` is the largest steering magnitude applied.
    pub fn to_line(&self, id: &str, model: &ToyModel) -> GenerationLine {
        let vocab = model.vocab();
        let (alpha, steering) = match &self.steering {
            Some(s) if !s.entries.is_empty() => {
                let alpha = s
                    .entries
                    .iter()
                    .map(|e| e.alpha)
                    .fold(0.0, |acc: f64, a| if a.abs() > acc.abs() { a } else { acc });
                let layers: Vec<String> = s.entries.iter().map(|e| e.layer.to_string()).collect();
                (alpha, format!("layers:{}", layers.join(",")))
            }
            _ => (0.0, "none".to_string()),
        };
        GenerationLine {
            id: id.to_string(),
            prompt: vocab.render(&self.prompt_tokens),
            output: vocab.render(&self.generated),
            alpha,
            steering,
            generated_tokens: self.generated.clone(),
            tracked_tokens: self.tracked_tokens.clone(),
            tracked_logits: self.tracked_logits.clone(),
        }
    }
}

/// First index of the maximum; NaN-free input assumed.
pub fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

fn validate(model: &ToyModel, prompt: &[u32], opts: &GenerateOptions) -> Result<()> {
    let vocab = model.config().vocab as u32;
    let in_vocab = |t: &u32| *t < vocab;
    if !opts.track.iter().all(in_vocab) {
        return Err(VassError::InvalidArgument("tracked token outside vocab".into()));
    }
    if let Some(c) = &opts.clamp {
        if !c.tokens.iter().all(in_vocab) {
            return Err(VassError::InvalidArgument("clamped token outside vocab".into()));
        }
        if let Some(row) = c.reference.iter().find(|r| r.len() != c.tokens.len()) {
            return Err(VassError::DimensionMismatch {
                expected: c.tokens.len(),
                got: row.len(),
            });
        }
        if c.reference.iter().flatten().any(|v| !v.is_finite()) {
            return Err(VassError::InvalidData("non-finite clamp reference".into()));
        }
        let steps = opts.max_new.min(model.config().max_seq.saturating_sub(prompt.len()));
        if !c.extend_with_unsteered && c.reference.len() < steps {
            return Err(VassError::ClampReferenceTooShort {
                needed: steps,
                available: c.reference.len(),
            });
        }
    }
    Ok(())
}

/// Greedy generation until EOS, `max_new` tokens or the context limit.
pub fn generate(model: &ToyModel, prompt: &[u32], opts: &GenerateOptions) -> Result<GenerationRecord> {
    validate(model, prompt, opts)?;
    let hooks = Hooks {
        steering: opts.steering.as_ref(),
        ablation: opts.ablation.as_ref(),
    };
    let mut seq = prompt.to_vec();
    let mut generated = Vec::new();
    let mut tracked_logits = Vec::new();
    let mut captured = BTreeMap::new();
    for step in 0..opts.max_new {
        if seq.len() >= model.config().max_seq {
            break;
        }
        let capture: &[usize] = if step == 0 { &opts.capture } else { &[] };
        let out = model.forward_with(&seq, capture, hooks)?;
        if step == 0 {
            captured = out.states;
        }
        let mut logits = out.logits;
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(VassError::InvalidData("non-finite logits".into()));
        }
        tracked_logits.push(opts.track.iter().map(|&t| logits[t as usize]).collect());
        if let Some(c) = &opts.clamp {
            let fallback;
            let values: &[f64] = match c.reference.get(step) {
                Some(row) => row,
                None => {
                    let plain = model.forward(&seq, &[])?.logits;
                    fallback = c.tokens.iter().map(|&t| plain[t as usize]).collect::<Vec<_>>();
                    &fallback
                }
            };
            for (&t, &v) in c.tokens.iter().zip(values) {
                logits[t as usize] = v;
            }
        }
        let next = argmax_first(&logits) as u32;
        generated.push(next);
        if next == EOS {
            break;
        }
        seq.push(next);
    }
    Ok(GenerationRecord {
        prompt_tokens: prompt.to_vec(),
        generated,
        tracked_tokens: opts.track.clone(),
        tracked_logits,
        captured,
        steering: opts.steering.clone(),
        clamp: opts.clamp.clone(),
        ablation: opts.ablation.clone(),
    })
}

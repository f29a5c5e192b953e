// SPDX-License-Identifier: MIT OR Apache-2.0

//! First-token log-odds between role groups and the per-layer logit lens.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::behavior_eval::{judge_refusal, steering_at, JudgeConfig};
use crate::error::{Result, VassError};
use crate::toy_model::{generate, GenerateOptions, Hooks, Roles, SteeringSpec, ToyModel};

/// `ln Σ exp(x_i)`, shifted by the maximum so large logits do not overflow.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn gather(logits: &[f64], tokens: &[u32]) -> Vec<f64> {
    tokens.iter().map(|&t| logits[t as usize]).collect()
}

/// `ln Σ_refusal P − ln Σ_compliance P`; the softmax normalizer cancels.
pub fn log_odds(logits: &[f64], roles: &Roles) -> f64 {
    log_sum_exp(&gather(logits, &roles.refusal)) - log_sum_exp(&gather(logits, &roles.compliance))
}

fn role_mass(logits: &[f64], tokens: &[u32]) -> f64 {
    (log_sum_exp(&gather(logits, tokens)) - log_sum_exp(logits)).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogOddsRow {
    pub alpha: f64,
    pub delta_log_odds: f64,
    pub pct_top1_refusal: f64,
    pub prob_mass_refusal: f64,
    pub refusal_rate: f64,
}

struct PromptStats {
    log_odds: f64,
    top1_refusal: bool,
    mass: f64,
    refused: bool,
}

fn prompt_stats(
    model: &ToyModel,
    tokens: &[u32],
    steering: &SteeringSpec,
    roles: &Roles,
    judge: &JudgeConfig,
    max_new: usize,
) -> Result<PromptStats> {
    let logits = model
        .forward_with(tokens, &[], Hooks { steering: Some(steering), ablation: None })?
        .logits;
    let top = crate::toy_model::argmax_first(&logits) as u32;
    let opts = GenerateOptions {
        steering: Some(steering.clone()),
        ..GenerateOptions::new(max_new)
    };
    let rec = generate(model, tokens, &opts)?;
    Ok(PromptStats {
        log_odds: log_odds(&logits, roles),
        top1_refusal: roles.refusal.contains(&top),
        mass: role_mass(&logits, &roles.refusal),
        refused: judge_refusal(&model.vocab().render(&rec.generated), judge),
    })
}

/// One row per α (α = 0 always included); deltas are against α = 0.
pub fn logodds_table(
    model: &ToyModel,
    prompts: &[String],
    directions: &[(usize, Vec<f64>)],
    alphas: &[f64],
    roles: &Roles,
    judge: &JudgeConfig,
    max_new: usize,
) -> Result<Vec<LogOddsRow>> {
    if prompts.is_empty() {
        return Err(VassError::InvalidArgument("log-odds table needs prompts".into()));
    }
    let mut alphas = alphas.to_vec();
    if !alphas.contains(&0.0) {
        alphas.push(0.0);
    }
    alphas.sort_by(f64::total_cmp);
    alphas.dedup();
    let encoded: Vec<Vec<u32>> = prompts.iter().map(|p| model.vocab().encode(p)).collect();
    let stats_at = |alpha: f64| -> Result<Vec<PromptStats>> {
        let spec = steering_at(directions, alpha);
        encoded
            .par_iter()
            .map(|t| prompt_stats(model, t, &spec, roles, judge, max_new))
            .collect()
    };
    let base = stats_at(0.0)?;
    let n = prompts.len() as f64;
    alphas
        .iter()
        .map(|&alpha| {
            let s = if alpha == 0.0 { None } else { Some(stats_at(alpha)?) };
            let s = s.as_ref().unwrap_or(&base);
            Ok(LogOddsRow {
                alpha,
                delta_log_odds: s.iter().zip(&base).map(|(a, b)| a.log_odds - b.log_odds).sum::<f64>() / n,
                pct_top1_refusal: s.iter().filter(|x| x.top1_refusal).count() as f64 / n,
                prob_mass_refusal: s.iter().map(|x| x.mass).sum::<f64>() / n,
                refusal_rate: s.iter().filter(|x| x.refused).count() as f64 / n,
            })
        })
        .collect()
}

pub fn logodds_csv(rows: &[LogOddsRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["alpha", "delta_log_odds", "pct_top1_refusal", "prob_mass_refusal", "refusal_rate"])?;
    for r in rows {
        w.write_record([
            r.alpha.to_string(),
            r.delta_log_odds.to_string(),
            r.pct_top1_refusal.to_string(),
            r.prob_mass_refusal.to_string(),
            r.refusal_rate.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| VassError::Io(e.into_error()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopToken {
    pub token: u32,
    pub text: String,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LensRow {
    pub layer: usize,
    pub top: Vec<TopToken>,
    pub refusal_mass: f64,
    pub compliance_mass: f64,
}

/// Final norm and unembedding applied to each captured layer's last state.
pub fn logit_lens(
    model: &ToyModel,
    tokens: &[u32],
    layers: &[usize],
    roles: &Roles,
    steering: Option<&SteeringSpec>,
    top_k: usize,
) -> Result<Vec<LensRow>> {
    let out = model.forward_with(tokens, layers, Hooks { steering, ablation: None })?;
    let mut rows = Vec::with_capacity(layers.len());
    for (&layer, state) in &out.states {
        let logits = model.lens_logits(state);
        let lse = log_sum_exp(&logits);
        let mut order: Vec<usize> = (0..logits.len()).collect();
        order.sort_by(|&a, &b| logits[b].total_cmp(&logits[a]).then(a.cmp(&b)));
        let top = order
            .iter()
            .take(top_k)
            .map(|&i| TopToken {
                token: i as u32,
                text: model.vocab().render_token(i as u32),
                prob: (logits[i] - lse).exp(),
            })
            .collect();
        rows.push(LensRow {
            layer,
            top,
            refusal_mass: role_mass(&logits, &roles.refusal),
            compliance_mass: role_mass(&logits, &roles.compliance),
        });
    }
    Ok(rows)
}

/// One row per (layer, rank).
pub fn lens_csv(condition: &str, rows: &[LensRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["condition", "layer", "rank", "token", "prob", "refusal_mass", "compliance_mass"])?;
    for r in rows {
        for (rank, t) in r.top.iter().enumerate() {
            w.write_record([
                condition.to_string(),
                r.layer.to_string(),
                (rank + 1).to_string(),
                t.text.clone(),
                t.prob.to_string(),
                r.refusal_mass.to_string(),
                r.compliance_mass.to_string(),
            ])?;
        }
    }
    w.into_inner().map_err(|e| VassError::Io(e.into_error()))
}

// SPDX-License-Identifier: MIT OR Apache-2.0

//! Logit clamping and neuron ablation experiments.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::behavior_eval::{judge_refusal, steering_at, JudgeConfig};
use crate::error::{Result, VassError};
use crate::toy_model::{generate, Ablation, Clamp, GenerateOptions, Roles, ToyModel, EOS};

#[derive(Debug, Clone, PartialEq)]
pub struct ClampOptions {
    pub alpha: f64,
    /// Seeds for the random-token control; one run per seed.
    pub random_seeds: Vec<u64>,
    pub judge: JudgeConfig,
    pub max_new: usize,
}

impl Default for ClampOptions {
    fn default() -> Self {
        Self {
            alpha: 0.3,
            random_seeds: vec![0, 1, 2],
            judge: JudgeConfig::default(),
            max_new: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClampResult {
    pub alpha: f64,
    pub unsteered_rate: f64,
    /// Steered, no clamp.
    pub baseline_rate: f64,
    /// Steered with role-token logits held at their unsteered values.
    pub clamped_rate: f64,
    /// Mean over seeds of steered runs clamping as many random non-role tokens.
    pub random_clamped_rate: f64,
    pub random_rates: Vec<f64>,
}

/// `count` distinct tokens that are neither roles nor EOS.
fn random_tokens(vocab: u32, roles: &Roles, count: usize, seed: u64) -> Result<Vec<u32>> {
    let role_set = roles.all();
    let pool: Vec<u32> = (0..vocab).filter(|t| *t != EOS && !role_set.contains(t)).collect();
    if pool.len() < count {
        return Err(VassError::InvalidArgument("vocabulary too small for random clamp control".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<u32> = sample(&mut rng, pool.len(), count).into_iter().map(|i| pool[i]).collect();
    picked.sort_unstable();
    Ok(picked)
}

fn refusal_rate(
    model: &ToyModel,
    prompts: &[Vec<u32>],
    judge: &JudgeConfig,
    opts_for: impl Fn(usize) -> Result<GenerateOptions> + Sync,
) -> Result<f64> {
    let refused: Vec<bool> = prompts
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let rec = generate(model, p, &opts_for(i)?)?;
            Ok(judge_refusal(&model.vocab().render(&rec.generated), judge))
        })
        .collect::<Result<_>>()?;
    Ok(refused.iter().filter(|r| **r).count() as f64 / prompts.len() as f64)
}

/// Clamps reference logits recorded from unsteered runs. When a steered run
/// outlives its reference, missing steps come from an unsteered pass over
/// the steered sequence.
pub fn clamping_experiment(
    model: &ToyModel,
    prompts: &[String],
    roles: &Roles,
    directions: &[(usize, Vec<f64>)],
    opts: &ClampOptions,
) -> Result<ClampResult> {
    if prompts.is_empty() {
        return Err(VassError::InvalidArgument("clamping needs prompts".into()));
    }
    let encoded: Vec<Vec<u32>> = prompts.iter().map(|p| model.vocab().encode(p)).collect();
    let role_tokens = roles.all();
    let random_sets = opts
        .random_seeds
        .iter()
        .map(|&s| random_tokens(model.config().vocab as u32, roles, role_tokens.len(), s))
        .collect::<Result<Vec<_>>>()?;
    let mut tracked = role_tokens.clone();
    for set in &random_sets {
        tracked.extend(set);
    }
    tracked.sort_unstable();
    tracked.dedup();
    let references = encoded
        .par_iter()
        .map(|p| {
            generate(
                model,
                p,
                &GenerateOptions {
                    track: tracked.clone(),
                    ..GenerateOptions::new(opts.max_new)
                },
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let clamp_for = |i: usize, tokens: &[u32]| -> Clamp {
        let reference = &references[i];
        let cols: Vec<usize> = tokens
            .iter()
            .map(|t| reference.tracked_tokens.binary_search(t).expect("tracked"))
            .collect();
        Clamp {
            tokens: tokens.to_vec(),
            reference: reference
                .tracked_logits
                .iter()
                .map(|row| cols.iter().map(|&c| row[c]).collect())
                .collect(),
            extend_with_unsteered: true,
        }
    };
    let steering = steering_at(directions, opts.alpha);
    let steered = |clamp: Option<Clamp>| GenerateOptions {
        steering: Some(steering.clone()),
        clamp,
        ..GenerateOptions::new(opts.max_new)
    };
    let judge = &opts.judge;
    let unsteered_rate = refusal_rate(model, &encoded, judge, |_| Ok(GenerateOptions::new(opts.max_new)))?;
    let baseline_rate = refusal_rate(model, &encoded, judge, |_| Ok(steered(None)))?;
    let clamped_rate = refusal_rate(model, &encoded, judge, |i| Ok(steered(Some(clamp_for(i, &role_tokens)))))?;
    let random_rates = random_sets
        .iter()
        .map(|set| refusal_rate(model, &encoded, judge, |i| Ok(steered(Some(clamp_for(i, set))))))
        .collect::<Result<Vec<_>>>()?;
    let random_clamped_rate = if random_rates.is_empty() {
        f64::NAN
    } else {
        random_rates.iter().sum::<f64>() / random_rates.len() as f64
    };
    Ok(ClampResult {
        alpha: opts.alpha,
        unsteered_rate,
        baseline_rate,
        clamped_rate,
        random_clamped_rate,
        random_rates,
    })
}

pub fn clamp_csv(results: &[ClampResult]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["alpha", "unsteered_rate", "baseline_rate", "clamped_rate", "random_clamped_rate"])?;
    for r in results {
        w.write_record([
            r.alpha.to_string(),
            r.unsteered_rate.to_string(),
            r.baseline_rate.to_string(),
            r.clamped_rate.to_string(),
            r.random_clamped_rate.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| VassError::Io(e.into_error()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedNeuron {
    pub layer: usize,
    pub neuron: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub n: usize,
    pub rate: f64,
    pub delta_vs_baseline: f64,
    pub random_rate: f64,
    pub delta_vs_random: f64,
}

fn ablation_of(neurons: &[RankedNeuron]) -> Ablation {
    let mut map: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for n in neurons {
        map.entry(n.layer).or_default().push(n.neuron);
    }
    Ablation { neurons: map }
}

/// Refusal rate after ablating the top `n` ranked neurons, for each `n`,
/// against size-matched random ablations drawn from the ranked layers.
pub fn ablation_sweep(
    model: &ToyModel,
    prompts: &[String],
    ranked: &[RankedNeuron],
    n_grid: &[usize],
    random_seeds: &[u64],
    judge: &JudgeConfig,
    max_new: usize,
) -> Result<Vec<AblationRow>> {
    if prompts.is_empty() {
        return Err(VassError::InvalidArgument("ablation needs prompts".into()));
    }
    let width = model.config().mlp_width;
    if let Some(r) = ranked.iter().find(|r| r.layer >= model.config().layers || r.neuron >= width) {
        return Err(VassError::InvalidArgument(format!("neuron {}:{} outside the model", r.layer, r.neuron)));
    }
    let mut layers: Vec<usize> = ranked.iter().map(|r| r.layer).collect();
    layers.sort_unstable();
    layers.dedup();
    let pool: Vec<RankedNeuron> = layers
        .iter()
        .flat_map(|&layer| (0..width).map(move |neuron| RankedNeuron { layer, neuron }))
        .collect();
    let encoded: Vec<Vec<u32>> = prompts.iter().map(|p| model.vocab().encode(p)).collect();
    let rate_with = |neurons: &[RankedNeuron]| {
        let opts = GenerateOptions {
            ablation: Some(ablation_of(neurons)),
            ..GenerateOptions::new(max_new)
        };
        refusal_rate(model, &encoded, judge, |_| Ok(opts.clone()))
    };
    let baseline = rate_with(&[])?;
    n_grid
        .iter()
        .map(|&requested| {
            let n = requested.min(ranked.len());
            if n < requested {
                log::warn!("ablation size {requested} clipped to {n} ranked neurons");
            }
            let rate = rate_with(&ranked[..n])?;
            let random_rates = random_seeds
                .iter()
                .map(|&seed| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let picked: Vec<RankedNeuron> =
                        sample(&mut rng, pool.len(), n.min(pool.len())).into_iter().map(|i| pool[i]).collect();
                    rate_with(&picked)
                })
                .collect::<Result<Vec<_>>>()?;
            let random_rate = if random_rates.is_empty() {
                baseline
            } else {
                random_rates.iter().sum::<f64>() / random_rates.len() as f64
            };
            Ok(AblationRow {
                n,
                rate,
                delta_vs_baseline: rate - baseline,
                random_rate,
                delta_vs_random: rate - random_rate,
            })
        })
        .collect()
}

pub fn ablation_csv(rows: &[AblationRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["n", "rate", "delta_vs_baseline", "random_rate", "delta_vs_random"])?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.rate.to_string(),
            r.delta_vs_baseline.to_string(),
            r.random_rate.to_string(),
            r.delta_vs_random.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| VassError::Io(e.into_error()))
}

// SPDX-License-Identifier: MIT OR Apache-2.0

//! Angle × strength sweeps scored against an unsteered baseline.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{plane_directions, LayerPlane};
use crate::behavior_eval::{detect_ood, steering_at, AffectScore, Scorer};
use crate::error::{Result, VassError};
use crate::toy_model::{generate, GenerateOptions, ToyModel};

/// 0°, 30°, …, 330°.
pub fn default_angles() -> Vec<f64> {
    (0..12).map(|i| f64::from(i) * 30.0).collect()
}

/// 0.01, 0.02, …, 0.45.
pub fn default_strengths() -> Vec<f64> {
    (1..=45).map(|i| f64::from(i) / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub angles_deg: Vec<f64>,
    pub strengths: Vec<f64>,
    pub max_new: usize,
    /// Steer only this layer instead of every plane's layer.
    pub single_layer: Option<usize>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            angles_deg: default_angles(),
            strengths: default_strengths(),
            max_new: 8,
            single_layer: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub angle_deg: f64,
    pub strength: f64,
    pub delta_valence: f64,
    pub delta_arousal: f64,
    pub delta_sentiment: f64,
    pub n_prompts: usize,
    /// Prompts contributing to the deltas: not OOD and scored.
    pub n_scored: usize,
    pub ood_frac: f64,
    /// Some texts could not be scored.
    pub partial: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub cells: Vec<SweepCell>,
}

impl SweepGrid {
    pub fn cell(&self, angle_deg: f64, strength: f64) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.angle_deg == angle_deg && c.strength == strength)
    }

    /// Long-format CSV, one row per (cell, metric).
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["angle_deg", "strength", "metric", "delta", "n", "ood_frac"])?;
        for c in &self.cells {
            for (metric, delta) in [
                ("valence", c.delta_valence),
                ("arousal", c.delta_arousal),
                ("sentiment", c.delta_sentiment),
            ] {
                w.write_record([
                    c.angle_deg.to_string(),
                    c.strength.to_string(),
                    metric.to_string(),
                    delta.to_string(),
                    c.n_scored.to_string(),
                    c.ood_frac.to_string(),
                ])?;
            }
        }
        w.into_inner().map_err(|e| VassError::Io(e.into_error()))
    }
}

/// Scores a batch; on failure, rescore one text at a time so a single bad
/// text only loses itself.
fn score_all(scorer: &dyn Scorer, texts: &[String]) -> Vec<Option<AffectScore>> {
    match scorer.score_batch(texts) {
        Ok(scores) => scores.into_iter().map(Some).collect(),
        Err(e) => {
            log::warn!("scorer `{}` failed on a batch ({e}); rescoring individually", scorer.name());
            texts
                .iter()
                .map(|t| match scorer.score_batch(std::slice::from_ref(t)) {
                    Ok(mut s) if s.len() == 1 => s.pop(),
                    _ => None,
                })
                .collect()
        }
    }
}

fn generate_texts(
    model: &ToyModel,
    prompts: &[Vec<u32>],
    directions: &[(usize, Vec<f64>)],
    alpha: f64,
    max_new: usize,
) -> Result<Vec<String>> {
    let opts = GenerateOptions {
        steering: Some(steering_at(directions, alpha)),
        ..GenerateOptions::new(max_new)
    };
    prompts
        .iter()
        .map(|p| Ok(model.vocab().render(&generate(model, p, &opts)?.generated)))
        .collect()
}

pub fn run_sweep(
    model: &ToyModel,
    prompts: &[String],
    planes: &[LayerPlane],
    scorer: &dyn Scorer,
    opts: &SweepOptions,
) -> Result<SweepGrid> {
    if prompts.is_empty() {
        return Err(VassError::InvalidArgument("sweep needs at least one prompt".into()));
    }
    let planes: Vec<LayerPlane> = match opts.single_layer {
        Some(l) => planes.iter().filter(|p| p.layer == l).cloned().collect(),
        None => planes.to_vec(),
    };
    if planes.is_empty() {
        return Err(VassError::InvalidArgument("no steering planes selected".into()));
    }
    let encoded: Vec<Vec<u32>> = prompts.iter().map(|p| model.vocab().encode(p)).collect();
    let baseline_texts = generate_texts(model, &encoded, &[], 0.0, opts.max_new)?;
    let baseline = score_all(scorer, &baseline_texts);

    let cells: Vec<(f64, f64)> = opts
        .angles_deg
        .iter()
        .flat_map(|&a| opts.strengths.iter().map(move |&s| (a, s)))
        .collect();
    let out = cells
        .par_iter()
        .map(|&(angle, strength)| {
            let dirs = plane_directions(&planes, angle);
            let texts = generate_texts(model, &encoded, &dirs, strength, opts.max_new)?;
            let scores = score_all(scorer, &texts);
            let ood: Vec<bool> = texts.iter().map(|t| detect_ood(t).flag).collect();
            let mut sums = [0.0f64; 3];
            let mut n_scored = 0;
            let mut partial = false;
            for ((s, b), o) in scores.iter().zip(&baseline).zip(&ood) {
                let (Some(s), Some(b)) = (s, b) else {
                    partial = true;
                    continue;
                };
                if *o {
                    continue;
                }
                sums[0] += s.valence - b.valence;
                sums[1] += s.arousal - b.arousal;
                sums[2] += s.sentiment - b.sentiment;
                n_scored += 1;
            }
            let mean = |x: f64| if n_scored == 0 { 0.0 } else { x / n_scored as f64 };
            Ok(SweepCell {
                angle_deg: angle,
                strength,
                delta_valence: mean(sums[0]),
                delta_arousal: mean(sums[1]),
                delta_sentiment: mean(sums[2]),
                n_prompts: prompts.len(),
                n_scored,
                ood_frac: ood.iter().filter(|o| **o).count() as f64 / prompts.len() as f64,
                partial,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepGrid { cells: out })
}

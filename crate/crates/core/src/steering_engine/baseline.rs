// SPDX-License-Identifier: MIT OR Apache-2.0

//! Single-emotion steering baselines and emotional-prefix shifts.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::LayerPlane;
use crate::behavior_eval::{judge_refusal, run_benchmark, Benchmark, BenchmarkOptions, JudgeConfig};
use crate::error::{Result, VassError};
use crate::numerics::{dot, normalized};
use crate::steering_vectors::EmotionVectorSet;
use crate::toy_model::{generate, GenerateOptions, ToyModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionRateRow {
    pub label: String,
    pub alpha: f64,
    pub rate: f64,
    pub ood_frac: f64,
    pub n: usize,
    pub abstain: usize,
}

/// Benchmark rates when steering along each named emotion's normalized
/// vector, at every layer that has a vector set.
pub fn emotion_baseline(
    model: &ToyModel,
    sets: &[EmotionVectorSet],
    labels: &[String],
    bench: &Benchmark,
    opts: &BenchmarkOptions,
) -> Result<Vec<EmotionRateRow>> {
    let mut rows = Vec::new();
    for label in labels {
        let directions = sets
            .iter()
            .map(|set| {
                let v = set
                    .vector(label)
                    .ok_or_else(|| VassError::NotFound(format!("emotion `{label}` at layer {}", set.layer)))?;
                Ok((set.layer, normalized(v)?))
            })
            .collect::<Result<Vec<_>>>()?;
        let result = run_benchmark(model, bench, &directions, opts)?;
        rows.extend(result.rows.into_iter().map(|r| EmotionRateRow {
            label: label.clone(),
            alpha: r.alpha,
            rate: r.rate,
            ood_frac: r.ood_frac,
            n: r.n,
            abstain: r.abstain,
        }));
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrefixShift {
    pub prefix_id: usize,
    pub prefix: String,
    pub delta_v: f64,
    pub delta_a: f64,
    pub delta_refusal: f64,
}

fn with_prefix(prefix: &str, prompt: &str) -> String {
    if prefix.is_empty() {
        prompt.to_string()
    } else {
        format!("{prefix} {prompt}")
    }
}

/// Mean shift of the last-token state's plane coordinates and of the
/// refusal rate when each prefix is prepended to every prompt.
pub fn prefix_shift(
    model: &ToyModel,
    prefixes: &[String],
    prompts: &[String],
    plane: &LayerPlane,
    judge: &JudgeConfig,
    max_new: usize,
) -> Result<Vec<PrefixShift>> {
    if prompts.is_empty() {
        return Err(VassError::InvalidArgument("prefix shift needs prompts".into()));
    }
    if plane.hidden() != model.config().hidden {
        return Err(VassError::DimensionMismatch {
            expected: model.config().hidden,
            got: plane.hidden(),
        });
    }
    let opts = GenerateOptions {
        capture: vec![plane.layer],
        ..GenerateOptions::new(max_new)
    };
    let measure = |prefix: &str| -> Result<(f64, f64, f64)> {
        let mut sums = (0.0, 0.0, 0.0);
        for p in prompts {
            let tokens = model.vocab().encode(&with_prefix(prefix, p));
            let rec = generate(model, &tokens, &opts)?;
            let state = &rec.captured[&plane.layer];
            sums.0 += dot(state, &plane.v_dir);
            sums.1 += dot(state, &plane.a_dir);
            if judge_refusal(&model.vocab().render(&rec.generated), judge) {
                sums.2 += 1.0;
            }
        }
        let n = prompts.len() as f64;
        Ok((sums.0 / n, sums.1 / n, sums.2 / n))
    };
    let plain = measure("")?;
    prefixes
        .par_iter()
        .enumerate()
        .map(|(i, prefix)| {
            let (v, a, r) = if prefix.is_empty() { plain } else { measure(prefix)? };
            Ok(PrefixShift {
                prefix_id: i,
                prefix: prefix.clone(),
                delta_v: v - plain.0,
                delta_a: a - plain.1,
                delta_refusal: r - plain.2,
            })
        })
        .collect()
}

pub fn prefix_csv(shifts: &[PrefixShift]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["prefix_id", "delta_v", "delta_a", "delta_refusal"])?;
    for s in shifts {
        w.write_record([
            s.prefix_id.to_string(),
            s.delta_v.to_string(),
            s.delta_a.to_string(),
            s.delta_refusal.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| VassError::Io(e.into_error()))
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::corpus_store::negative_prefixes;
    use crate::numerics::DenseMatrix;
    use crate::toy_model::{refusal_fixture, Hooks, SteeringSpec};

    fn sets(v: &[f64], a: &[f64]) -> Vec<EmotionVectorSet> {
        let mixed: Vec<f64> = v.iter().zip(a).map(|(x, y)| 1.2 * x + 1.6 * y).collect();
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        (0..4)
            .map(|layer| EmotionVectorSet {
                layer,
                labels: vec!["excitement".into(), "sadness".into()],
                matrix: DenseMatrix::from_rows(&[mixed.clone(), neg.clone()]).unwrap(),
                sample_counts: BTreeMap::new(),
                neutral_count: 1,
            })
            .collect()
    }

    #[test]
    fn emotion_steering_decomposes_into_plane_coordinates() {
        let f = refusal_fixture(3).unwrap();
        let s = sets(f.v_dir(), f.a_dir());
        let e = normalized(s[0].vector("excitement").unwrap()).unwrap();
        let p = f.model.vocab().encode(&f.prompts[0]);
        let base = f.model.forward(&p, &[]).unwrap().logits;
        let alpha = 0.3;
        let spec = SteeringSpec::all_layers(4, &e, alpha);
        let out = f.model.forward_with(&p, &[], Hooks { steering: Some(&spec), ablation: None }).unwrap();
        for &t in &f.roles.all() {
            let u = f.model.unembedding_row(t);
            let predicted = base[t as usize] + 4.0 * alpha * (0.6 * dot(u, f.v_dir()) + 0.8 * dot(u, f.a_dir()));
            assert!((out.logits[t as usize] - predicted).abs() < 1e-6);
        }
    }

    #[test]
    fn emotion_rates_and_unknown_label() {
        let f = refusal_fixture(3).unwrap();
        let s = sets(f.v_dir(), f.a_dir());
        let bench = Benchmark::Refusal {
            id: "toy".into(),
            prompts: f.prompts.clone(),
        };
        let opts = BenchmarkOptions {
            alphas: vec![0.0, 0.45],
            ..BenchmarkOptions::default()
        };
        let rows = emotion_baseline(&f.model, &s, &["excitement".into(), "sadness".into()], &bench, &opts).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().filter(|r| r.alpha == 0.0).all(|r| r.rate == 0.8));
        let excited = rows.iter().find(|r| r.label == "excitement" && r.alpha == 0.45).unwrap();
        let sad = rows.iter().find(|r| r.label == "sadness" && r.alpha == 0.45).unwrap();
        assert!(excited.rate < 0.8 && sad.rate >= 0.8);
        assert!(emotion_baseline(&f.model, &s, &["joy".into()], &bench, &opts).is_err());
    }

    #[test]
    fn negative_prefixes_lower_valence() {
        let f = refusal_fixture(4).unwrap();
        let plane = LayerPlane::new(2, f.v_dir().to_vec(), f.a_dir().to_vec()).unwrap();
        let mut prefixes: Vec<String> = negative_prefixes().iter().map(|s| s.to_string()).collect();
        prefixes.push(String::new());
        let shifts = prefix_shift(&f.model, &prefixes, &f.prompts[..8], &plane, &JudgeConfig::default(), 4).unwrap();
        assert_eq!(shifts.len(), 16);
        assert!(shifts[..15].iter().all(|s| s.delta_v < 0.0));
        let empty = &shifts[15];
        assert_eq!((empty.delta_v, empty.delta_a, empty.delta_refusal), (0.0, 0.0, 0.0));
        let csv = String::from_utf8(prefix_csv(&shifts).unwrap()).unwrap();
        assert!(csv.starts_with("prefix_id,delta_v,delta_a,delta_refusal\n0,"));
    }
}

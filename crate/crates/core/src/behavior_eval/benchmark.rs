// SPDX-License-Identifier: MIT OR Apache-2.0

//! Steered benchmark runs over an alpha grid.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::judge::{judge_refusal, judge_sycophancy, JudgeConfig, SycophancyItem, Verdict};
use super::ood::detect_ood;
use crate::error::{Result, VassError};
use crate::toy_model::{generate, GenerateOptions, SteeringEntry, SteeringSpec, ToyModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Benchmark {
    Refusal { id: String, prompts: Vec<String> },
    Sycophancy { id: String, items: Vec<SycophancyItem> },
}

impl Benchmark {
    pub fn id(&self) -> &str {
        match self {
            Self::Refusal { id, .. } | Self::Sycophancy { id, .. } => id,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Refusal { prompts, .. } => prompts.len(),
            Self::Sycophancy { items, .. } => items.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PromptOnly {
    prompt: String,
}

/// Reads `{"prompt"}` or `{"question","options","persona_choice"}` lines;
/// one file holds one kind.
pub fn parse_benchmark_jsonl(content: &str, id: &str, origin: &Path) -> Result<Benchmark> {
    let mut prompts = Vec::new();
    let mut items = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| VassError::Parse {
            path: origin.to_path_buf(),
            line: i + 1,
            message,
        };
        let value: serde_json::Value = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        if value.get("prompt").is_some() {
            let p: PromptOnly = serde_json::from_value(value).map_err(|e| err(e.to_string()))?;
            prompts.push(p.prompt);
        } else {
            let item: SycophancyItem = serde_json::from_value(value).map_err(|e| err(e.to_string()))?;
            item.validate().map_err(|e| err(e.to_string()))?;
            items.push(item);
        }
        if !prompts.is_empty() && !items.is_empty() {
            return Err(err("prompt and sycophancy lines mixed in one file".into()));
        }
    }
    let id = id.to_string();
    Ok(if items.is_empty() {
        Benchmark::Refusal { id, prompts }
    } else {
        Benchmark::Sycophancy { id, items }
    })
}

pub fn load_benchmark_jsonl(path: &Path) -> Result<Benchmark> {
    let content = std::fs::read_to_string(path)?;
    let id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("benchmark");
    parse_benchmark_jsonl(&content, id, path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub alpha: f64,
    /// Positive verdicts over judged items.
    pub rate: f64,
    pub ood_frac: f64,
    pub n: usize,
    pub abstain: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub benchmark_id: String,
    pub steering: String,
    pub rows: Vec<BenchmarkRow>,
}

impl BenchmarkResult {
    pub fn row(&self, alpha: f64) -> Option<&BenchmarkRow> {
        self.rows.iter().find(|r| r.alpha == alpha)
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["alpha", "rate", "ood_frac", "n", "abstain"])?;
        for r in &self.rows {
            w.write_record([
                r.alpha.to_string(),
                r.rate.to_string(),
                r.ood_frac.to_string(),
                r.n.to_string(),
                r.abstain.to_string(),
            ])?;
        }
        w.into_inner().map_err(|e| VassError::Io(e.into_error()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkOptions {
    /// α = 0 is added when absent.
    pub alphas: Vec<f64>,
    pub max_new: usize,
    pub judge: JudgeConfig,
    /// Count unparseable sycophancy replies as non-sycophantic.
    pub abstain_as_negative: bool,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        Self {
            alphas: vec![-0.45, -0.3, -0.15, 0.0, 0.15, 0.3, 0.45],
            max_new: 8,
            judge: JudgeConfig::default(),
            abstain_as_negative: false,
        }
    }
}

/// Steering at `alpha` along per-layer `directions`.
pub fn steering_at(directions: &[(usize, Vec<f64>)], alpha: f64) -> SteeringSpec {
    SteeringSpec {
        entries: directions
            .iter()
            .map(|(layer, d)| SteeringEntry {
                layer: *layer,
                direction: d.clone(),
                alpha,
            })
            .collect(),
    }
}

pub fn run_benchmark(
    model: &ToyModel,
    bench: &Benchmark,
    directions: &[(usize, Vec<f64>)],
    opts: &BenchmarkOptions,
) -> Result<BenchmarkResult> {
    if bench.is_empty() {
        return Err(VassError::InvalidArgument(format!("benchmark `{}` is empty", bench.id())));
    }
    opts.judge.validate()?;
    let mut alphas = opts.alphas.clone();
    if !alphas.contains(&0.0) {
        alphas.push(0.0);
    }
    alphas.sort_by(f64::total_cmp);
    alphas.dedup();
    let prompts: Vec<String> = match bench {
        Benchmark::Refusal { prompts, .. } => prompts.clone(),
        Benchmark::Sycophancy { items, .. } => items.iter().map(SycophancyItem::render_prompt).collect(),
    };
    let vocab = model.vocab();
    let mut rows = Vec::with_capacity(alphas.len());
    for &alpha in &alphas {
        let gen_opts = GenerateOptions {
            steering: Some(steering_at(directions, alpha)),
            ..GenerateOptions::new(opts.max_new)
        };
        let outcomes: Vec<(Verdict, bool)> = prompts
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                let rec = generate(model, &vocab.encode(p), &gen_opts)?;
                let text = vocab.render(&rec.generated);
                let verdict = match bench {
                    Benchmark::Refusal { .. } => {
                        if judge_refusal(&text, &opts.judge) {
                            Verdict::Positive
                        } else {
                            Verdict::Negative
                        }
                    }
                    Benchmark::Sycophancy { items, .. } => match judge_sycophancy(&text, &items[i]) {
                        Verdict::Abstain if opts.abstain_as_negative => Verdict::Negative,
                        v => v,
                    },
                };
                Ok((verdict, detect_ood(&text).flag))
            })
            .collect::<Result<_>>()?;
        let n = outcomes.len();
        let abstain = outcomes.iter().filter(|(v, _)| *v == Verdict::Abstain).count();
        let positive = outcomes.iter().filter(|(v, _)| *v == Verdict::Positive).count();
        let judged = n - abstain;
        rows.push(BenchmarkRow {
            alpha,
            rate: if judged == 0 { 0.0 } else { positive as f64 / judged as f64 },
            ood_frac: outcomes.iter().filter(|(_, o)| *o).count() as f64 / n as f64,
            n,
            abstain,
        });
    }
    let layers: Vec<String> = directions.iter().map(|(l, _)| l.to_string()).collect();
    Ok(BenchmarkResult {
        benchmark_id: bench.id().to_string(),
        steering: format!("layers:{}", layers.join(",")),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy_model::refusal_fixture;

    fn bench(prompts: Vec<String>) -> Benchmark {
        Benchmark::Refusal {
            id: "toy".into(),
            prompts,
        }
    }

    #[test]
    fn arousal_steering_is_monotone_and_baseline_included() {
        let f = refusal_fixture(5).unwrap();
        let dirs: Vec<(usize, Vec<f64>)> = (0..4).map(|l| (l, f.a_dir().to_vec())).collect();
        let opts = BenchmarkOptions {
            alphas: vec![-0.45, -0.2, 0.2, 0.45],
            ..BenchmarkOptions::default()
        };
        let r = run_benchmark(&f.model, &bench(f.prompts.clone()), &dirs, &opts).unwrap();
        assert_eq!(r.rows.len(), 5);
        assert_eq!(r.row(0.0).unwrap().rate, 0.8);
        assert!(r.rows.windows(2).all(|w| w[1].rate <= w[0].rate));
        assert_eq!(r.rows[0].rate, 1.0);
        assert_eq!(r.rows[4].rate, 0.0);
        let csv = String::from_utf8(r.to_csv().unwrap()).unwrap();
        assert!(csv.starts_with("alpha,rate,ood_frac,n,abstain\n-0.45,1,0,40,0\n"));
    }

    #[test]
    fn zero_direction_matches_baseline() {
        let f = refusal_fixture(5).unwrap();
        let dirs = vec![(2, vec![0.0; 64])];
        let r = run_benchmark(&f.model, &bench(f.prompts.clone()), &dirs, &BenchmarkOptions::default()).unwrap();
        assert!(r.rows.iter().all(|row| row.rate == 0.8));
    }

    #[test]
    fn permutation_leaves_rates_unchanged() {
        let f = refusal_fixture(6).unwrap();
        let dirs = vec![(0, f.a_dir().to_vec())];
        let opts = BenchmarkOptions {
            alphas: vec![0.3],
            ..BenchmarkOptions::default()
        };
        let mut rev = f.prompts.clone();
        rev.reverse();
        let a = run_benchmark(&f.model, &bench(f.prompts.clone()), &dirs, &opts).unwrap();
        let b = run_benchmark(&f.model, &bench(rev), &dirs, &opts).unwrap();
        assert_eq!(a.rows, b.rows);
    }

    #[test]
    fn empty_benchmark_rejected() {
        let f = refusal_fixture(5).unwrap();
        assert!(run_benchmark(&f.model, &bench(vec![]), &[], &BenchmarkOptions::default()).is_err());
    }

    #[test]
    fn jsonl_ingest() {
        let p = Path::new("b.jsonl");
        let b = parse_benchmark_jsonl("{\"prompt\":\"hi\"}\n\n{\"prompt\":\"yo\"}\n", "b", p).unwrap();
        assert_eq!(b.len(), 2);
        let item = r#"{"question":"q","options":{"A":"x","B":"y"},"persona_choice":"B"}"#;
        assert!(matches!(parse_benchmark_jsonl(item, "s", p).unwrap(), Benchmark::Sycophancy { .. }));
        let mixed = format!("{{\"prompt\":\"hi\"}}\n{item}\n");
        assert!(matches!(parse_benchmark_jsonl(&mixed, "m", p), Err(VassError::Parse { line: 2, .. })));
        let bad = r#"{"question":"q","options":{"A":"x","B":"y"},"persona_choice":"C"}"#;
        assert!(parse_benchmark_jsonl(bad, "s", p).is_err());
        assert!(parse_benchmark_jsonl("{\"prompt\":\"a\",\"x\":1}", "s", p).is_err());
    }
}

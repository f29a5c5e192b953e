// SPDX-License-Identifier: MIT OR Apache-2.0

//! Pipeline configuration, config hashing and named seed streams.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use vass::behavior_eval::JudgeConfig;
use vass::circumplex::CircleOptions;
use vass::corpus_store::{fnv1a64, RatingSource};
use vass::mech_analysis::Centering;
use vass::steering_engine::{default_angles, default_strengths};
use vass::va_subspace::{MuMode, DEFAULT_K, DEFAULT_LAMBDA};

use super::CliError;

/// Input files. Unset entries fall back to the fixtures `synth` writes under
/// `<out_dir>/fixtures`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    /// Labelled corpus; restricts `vectors` to classes with single-label rows.
    pub corpus: Option<PathBuf>,
    pub ratings: Option<PathBuf>,
    /// Word norms for lexicon validation.
    pub lexicon: Option<PathBuf>,
    /// Activation dump, also holding `lexact/layer{ℓ}` word activations.
    pub dump: Option<PathBuf>,
    /// Model steered by `sweep`.
    pub model: Option<PathBuf>,
    /// Model used by `behavior` and `mechanism`.
    pub refusal_model: Option<PathBuf>,
    pub tokenizer_map: Option<PathBuf>,
    /// Sweep prompts as JSON lines; the bundled validation prompts otherwise.
    pub prompts: Option<PathBuf>,
    pub benchmark: Option<PathBuf>,
    /// Dump of `contrastive/layer{ℓ}` directions.
    pub contrastive: Option<PathBuf>,
    /// Lexicon for the built-in sweep scorer.
    pub scorer_lexicon: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthParams {
    pub k: usize,
    pub n_per_class: usize,
    pub radial_noise: f64,
    pub base_std: f64,
    pub radius: f64,
    pub lexicon_words: usize,
    pub lexicon_noise: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            k: 27,
            n_per_class: 50,
            radial_noise: 0.01,
            base_std: 0.05,
            radius: 1.0,
            lexicon_words: 120,
            lexicon_noise: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitParams {
    pub k: usize,
    pub lambda: f64,
    pub supervision: RatingSource,
    pub mu_center: MuMode,
}

impl Default for FitParams {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            lambda: DEFAULT_LAMBDA,
            supervision: RatingSource::HumanNorms,
            mu_center: MuMode::GrandMean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepParams {
    pub angles_deg: Vec<f64>,
    pub strengths: Vec<f64>,
    pub max_new: usize,
    pub single_layer: Option<usize>,
    /// External scorer speaking the JSON-lines pipe protocol, program first.
    pub scorer_command: Option<Vec<String>>,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self {
            angles_deg: default_angles(),
            strengths: default_strengths(),
            max_new: 4,
            single_layer: None,
            scorer_command: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BehaviorParams {
    /// Signed steering strengths; α = 0 is always included.
    pub alphas: Vec<f64>,
    pub max_new: usize,
    pub control_seeds: usize,
    pub abstain_as_negative: bool,
    /// Labels steered individually for the single-emotion baseline.
    pub emotions: Vec<String>,
}

impl Default for BehaviorParams {
    fn default() -> Self {
        Self {
            alphas: vec![-0.45, -0.3, -0.15, 0.0, 0.15, 0.3, 0.45],
            max_new: 4,
            control_seeds: 3,
            abstain_as_negative: false,
            emotions: ["anger", "fear", "joy", "sadness"].map(String::from).to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MechanismParams {
    pub alpha: f64,
    pub alphas: Vec<f64>,
    pub max_new: usize,
    pub centering: Centering,
    pub top_n: usize,
    pub ablation_grid: Vec<usize>,
    pub random_controls: usize,
    pub lens_top_k: usize,
}

impl Default for MechanismParams {
    fn default() -> Self {
        Self {
            alpha: 0.45,
            alphas: vec![-0.45, -0.3, -0.15, 0.0, 0.15, 0.3, 0.45],
            max_new: 4,
            centering: Centering::TrackedMean,
            top_n: 8,
            ablation_grid: vec![0, 2, 4, 8],
            random_controls: 3,
            lens_top_k: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub threads: Option<usize>,
    pub paths: Paths,
    pub synth: SynthParams,
    pub fit: FitParams,
    pub geometry: CircleOptions,
    pub sweep: SweepParams,
    pub behavior: BehaviorParams,
    pub judge: JudgeConfig,
    pub mechanism: MechanismParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            out_dir: PathBuf::from("vass-out"),
            threads: None,
            paths: Paths::default(),
            synth: SynthParams::default(),
            fit: FitParams::default(),
            geometry: CircleOptions {
                refine: true,
                ..CircleOptions::default()
            },
            sweep: SweepParams::default(),
            behavior: BehaviorParams::default(),
            judge: JudgeConfig::default(),
            mechanism: MechanismParams::default(),
        }
    }
}

fn finite(values: &[f64], what: &str) -> Result<(), CliError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(CliError::Config(format!("{what} must be finite")))
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let s = &self.synth;
        if !(3..=27).contains(&s.k) || s.n_per_class == 0 || s.lexicon_words < 3 {
            return Err(CliError::Config(
                "synth needs k in 3..=27, n_per_class >= 1 and lexicon_words >= 3".into(),
            ));
        }
        finite(&[s.radial_noise, s.base_std, s.radius, s.lexicon_noise], "synth parameters")?;
        if self.fit.k == 0 || !(self.fit.lambda > 0.0) {
            return Err(CliError::Config("fit.k must be positive and fit.lambda > 0".into()));
        }
        if self.sweep.angles_deg.is_empty() || self.sweep.strengths.is_empty() {
            return Err(CliError::Config("sweep angles and strengths must be non-empty".into()));
        }
        finite(&self.sweep.angles_deg, "sweep.angles_deg")?;
        finite(&self.sweep.strengths, "sweep.strengths")?;
        finite(&self.behavior.alphas, "behavior.alphas")?;
        finite(&self.mechanism.alphas, "mechanism.alphas")?;
        finite(&[self.mechanism.alpha], "mechanism.alpha")?;
        if self.sweep.max_new == 0 || self.behavior.max_new == 0 || self.mechanism.max_new == 0 {
            return Err(CliError::Config("max_new must be at least 1".into()));
        }
        if matches!(&self.sweep.scorer_command, Some(c) if c.is_empty()) {
            return Err(CliError::Config("sweep.scorer_command must name a program".into()));
        }
        if self.threads == Some(0) {
            return Err(CliError::Config("threads must be at least 1".into()));
        }
        self.judge.validate().map_err(|e| CliError::Config(format!("judge: {e}")))
    }

    /// FNV-1a of the canonical JSON with the run-location fields blanked, so
    /// the same experiment hashes alike in any output directory.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out_dir = PathBuf::new();
        canonical.threads = None;
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        format!("{:016x}", fnv1a64(&bytes))
    }

    /// Seed of the named sub-stream.
    pub fn stream(&self, name: &str) -> u64 {
        let mut bytes = self.seed.to_le_bytes().to_vec();
        bytes.extend_from_slice(name.as_bytes());
        fnv1a64(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        let err = serde_json::from_str::<PipelineConfig>(r#"{"seed": 1, "sweep": {"angle": [0]}}"#);
        assert!(err.is_err());
        let ok: PipelineConfig = serde_json::from_str(r#"{"seed": 1}"#).unwrap();
        assert_eq!(ok.fit, FitParams::default());
    }

    #[test]
    fn hash_ignores_location_and_streams_differ() {
        let a = PipelineConfig::default();
        let b = PipelineConfig {
            out_dir: "elsewhere".into(),
            threads: Some(3),
            ..a.clone()
        };
        assert_eq!(a.hash(), b.hash());
        let c = PipelineConfig { seed: 8, ..a.clone() };
        assert_ne!(a.hash(), c.hash());
        assert_ne!(a.stream("toy"), a.stream("controls"));
        assert_ne!(a.stream("toy"), c.stream("toy"));
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut c = PipelineConfig::default();
        assert!(c.validate().is_ok());
        c.fit.lambda = 0.0;
        assert!(c.validate().is_err());
        let c = PipelineConfig {
            sweep: SweepParams {
                strengths: vec![f64::NAN],
                ..SweepParams::default()
            },
            ..PipelineConfig::default()
        };
        assert!(c.validate().is_err());
    }
}

// SPDX-License-Identifier: MIT OR Apache-2.0

//! The decoder-only transformer: weights, forward pass and hooks.

use std::collections::BTreeMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::vocab::Vocab;
use crate::corpus_store::{fnv1a64, Tensor, TensorDump};
use crate::error::{Result, VassError};
use crate::numerics::{norm, DenseMatrix};
use crate::steering_vectors::{CAPTURE_SITE_KEY, POST_BLOCK_SITE};

/// Where steering is injected: the residual stream entering a block.
pub const STEERING_SITE: &str = "residual_pre_block";
const RMS_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    #[default]
    Rms,
    /// Gain only, no rescaling.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToyConfig {
    pub layers: usize,
    pub hidden: usize,
    pub heads: usize,
    pub mlp_width: usize,
    pub vocab: usize,
    pub max_seq: usize,
    pub seed: u64,
    pub norm: NormKind,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            layers: 4,
            hidden: 64,
            heads: 4,
            mlp_width: 256,
            vocab: 256,
            max_seq: 128,
            seed: 42,
            norm: NormKind::Rms,
        }
    }
}

impl ToyConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("layers", self.layers),
            ("hidden", self.hidden),
            ("heads", self.heads),
            ("mlp_width", self.mlp_width),
            ("vocab", self.vocab),
            ("max_seq", self.max_seq),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(VassError::InvalidArgument(format!("{name} must be at least 1")));
        }
        if !self.hidden.is_multiple_of(self.heads) {
            return Err(VassError::InvalidArgument(format!(
                "hidden {} not divisible by heads {}",
                self.hidden, self.heads
            )));
        }
        if self.vocab < 128 {
            return Err(VassError::InvalidArgument(
                "vocab must cover the 128 ASCII ids".into(),
            ));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.hidden / self.heads
    }
}

/// A weight matrix stored as `f32`-exact values, with a sparse copy when
/// most entries are zero.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Linear {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    sparse: Option<Vec<(u32, u32, f64)>>,
}

impl Linear {
    pub(crate) fn from_f32(rows: usize, cols: usize, data: &[f32]) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        let data: Vec<f64> = data.iter().map(|&v| f64::from(v)).collect();
        let nnz = data.iter().filter(|v| **v != 0.0).count();
        let sparse = (nnz * 4 <= rows * cols).then(|| {
            data.iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, &v)| ((i / cols) as u32, (i % cols) as u32, v))
                .collect()
        });
        Self { rows, cols, data, sparse }
    }

    /// Rounds `f64` values to `f32` storage.
    pub(crate) fn from_f64(rows: usize, cols: usize, data: &[f64]) -> Self {
        let narrowed: Vec<f32> = data.iter().map(|&v| v as f32).collect();
        Self::from_f32(rows, cols, &narrowed)
    }

    pub(crate) fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    fn is_zero(&self) -> bool {
        matches!(&self.sparse, Some(s) if s.is_empty())
    }

    /// True if rows `lo..hi` are all zero.
    fn rows_zero(&self, lo: usize, hi: usize) -> bool {
        match &self.sparse {
            Some(s) => !s.iter().any(|&(r, _, _)| (lo..hi).contains(&(r as usize))),
            None => self.data[lo * self.cols..hi * self.cols].iter().all(|v| *v == 0.0),
        }
    }

    fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        match &self.sparse {
            Some(s) => {
                for &(r, c, v) in s {
                    out[r as usize] += v * x[c as usize];
                }
            }
            None => {
                for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
                    *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
                }
            }
        }
    }

    fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        self.matvec_into(x, &mut out);
        out
    }

    pub(crate) fn to_f32(&self) -> Vec<f32> {
        self.data.iter().map(|&v| v as f32).collect()
    }

    pub(crate) fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::new(self.rows, self.cols, self.data.clone()).expect("finite weights")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Block {
    pub(crate) attn_norm: Vec<f64>,
    pub(crate) w_q: Linear,
    pub(crate) w_k: Linear,
    pub(crate) w_v: Linear,
    pub(crate) w_o: Linear,
    pub(crate) mlp_norm: Vec<f64>,
    pub(crate) w_gate: Linear,
    pub(crate) w_up: Linear,
    pub(crate) w_down: Linear,
}

/// One steering injection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringEntry {
    pub layer: usize,
    pub direction: Vec<f64>,
    pub alpha: f64,
}

/// At most one entry per layer; directions unit-norm (or exactly zero).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SteeringSpec {
    pub entries: Vec<SteeringEntry>,
}

impl SteeringSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn single(layer: usize, direction: Vec<f64>, alpha: f64) -> Self {
        Self {
            entries: vec![SteeringEntry { layer, direction, alpha }],
        }
    }

    /// The same direction at every layer in `0..layers`.
    pub fn all_layers(layers: usize, direction: &[f64], alpha: f64) -> Self {
        Self {
            entries: (0..layers)
                .map(|layer| SteeringEntry {
                    layer,
                    direction: direction.to_vec(),
                    alpha,
                })
                .collect(),
        }
    }

    /// Per-layer directions, `directions[ℓ]` injected at layer `ℓ`.
    pub fn per_layer(directions: &[Vec<f64>], alpha: f64) -> Self {
        Self {
            entries: directions
                .iter()
                .enumerate()
                .map(|(layer, d)| SteeringEntry {
                    layer,
                    direction: d.clone(),
                    alpha,
                })
                .collect(),
        }
    }

    pub fn validate(&self, config: &ToyConfig) -> Result<()> {
        let mut seen = vec![false; config.layers];
        for e in &self.entries {
            if e.layer >= config.layers {
                return Err(VassError::InvalidArgument(format!(
                    "steering layer {} >= {}",
                    e.layer, config.layers
                )));
            }
            if std::mem::replace(&mut seen[e.layer], true) {
                return Err(VassError::InvalidArgument(format!(
                    "two steering entries for layer {}",
                    e.layer
                )));
            }
            if e.direction.len() != config.hidden {
                return Err(VassError::DimensionMismatch {
                    expected: config.hidden,
                    got: e.direction.len(),
                });
            }
            let n = norm(&e.direction);
            if n != 0.0 && (n - 1.0).abs() > 1e-6 {
                return Err(VassError::InvalidArgument(format!(
                    "steering direction for layer {} has norm {n}",
                    e.layer
                )));
            }
            if !e.alpha.is_finite() {
                return Err(VassError::InvalidArgument("non-finite alpha".into()));
            }
        }
        Ok(())
    }

    fn at(&self, layer: usize) -> Option<&SteeringEntry> {
        self.entries.iter().find(|e| e.layer == layer)
    }
}

/// MLP neurons to zero during the forward pass.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablation {
    /// Layer → neuron indices.
    pub neurons: BTreeMap<usize, Vec<usize>>,
}

impl Ablation {
    pub fn is_empty(&self) -> bool {
        self.neurons.values().all(Vec::is_empty)
    }

    pub fn count(&self) -> usize {
        self.neurons.values().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Hooks<'a> {
    pub steering: Option<&'a SteeringSpec>,
    pub ablation: Option<&'a Ablation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    /// Post-block residual at the last position, per requested layer.
    pub states: BTreeMap<usize, Vec<f64>>,
    pub logits: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    pub(crate) config: ToyConfig,
    pub(crate) vocab: Vocab,
    pub(crate) embed: Linear,
    pub(crate) pos_embed: Linear,
    pub(crate) blocks: Vec<Block>,
    pub(crate) final_norm: Vec<f64>,
    pub(crate) unembed: Linear,
}

/// Read-only copies of the matrices the analyses consume.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    /// `V×H`.
    pub unembedding: DenseMatrix,
    /// Per layer `H×mlp_width`.
    pub mlp_down: Vec<DenseMatrix>,
}

fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

/// Uniform `f32` in `[-1, 1)` built from the top 24 bits of a `u32`.
fn unit_f32(rng: &mut ChaCha8Rng) -> f32 {
    let u = rng.next_u32() >> 8;
    (u as f32) * (1.0 / 16_777_216.0) * 2.0 - 1.0
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f32) -> Linear {
    let data: Vec<f32> = (0..rows * cols).map(|_| unit_f32(rng) * scale).collect();
    Linear::from_f32(rows, cols, &data)
}

impl ToyModel {
    /// Seeded random weights; identical across platforms for a given config.
    pub fn build_random(config: ToyConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (h, m, v) = (config.hidden, config.mlp_width, config.vocab);
        let fan = |n: usize| (n as f32).sqrt().recip();
        let embed = random_matrix(&mut rng, v, h, 1.0);
        let pos_embed = random_matrix(&mut rng, config.max_seq, h, 0.1);
        let blocks = (0..config.layers)
            .map(|_| Block {
                attn_norm: vec![1.0; h],
                w_q: random_matrix(&mut rng, h, h, fan(h)),
                w_k: random_matrix(&mut rng, h, h, fan(h)),
                w_v: random_matrix(&mut rng, h, h, fan(h)),
                w_o: random_matrix(&mut rng, h, h, fan(h)),
                mlp_norm: vec![1.0; h],
                w_gate: random_matrix(&mut rng, m, h, fan(h)),
                w_up: random_matrix(&mut rng, m, h, fan(h)),
                w_down: random_matrix(&mut rng, h, m, fan(m)),
            })
            .collect();
        let unembed = random_matrix(&mut rng, v, h, fan(h));
        Ok(Self {
            vocab: Vocab::standard(v as u32).or_else(|_| Vocab::bytes(v as u32))?,
            config,
            embed,
            pos_embed,
            blocks,
            final_norm: vec![1.0; h],
            unembed,
        })
    }

    pub fn config(&self) -> &ToyConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn weights(&self) -> ModelWeights {
        ModelWeights {
            unembedding: self.unembed.to_dense(),
            mlp_down: self.blocks.iter().map(|b| b.w_down.to_dense()).collect(),
        }
    }

    /// Unembedding row of `token`.
    pub fn unembedding_row(&self, token: u32) -> &[f64] {
        self.unembed.row(token as usize)
    }

    fn normalize(&self, x: &[f64], gain: &[f64]) -> Vec<f64> {
        match self.config.norm {
            NormKind::Identity => x.iter().zip(gain).map(|(a, g)| a * g).collect(),
            NormKind::Rms => {
                let ms = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
                let inv = (ms + RMS_EPS).sqrt().recip();
                x.iter().zip(gain).map(|(a, g)| a * inv * g).collect()
            }
        }
    }

    /// Final norm followed by the unembedding; the logit lens for any state.
    pub fn lens_logits(&self, state: &[f64]) -> Vec<f64> {
        self.unembed.matvec(&self.normalize(state, &self.final_norm))
    }

    pub fn forward(&self, tokens: &[u32], capture: &[usize]) -> Result<ForwardOutput> {
        self.forward_with(tokens, capture, Hooks::default())
    }

    pub fn forward_with(&self, tokens: &[u32], capture: &[usize], hooks: Hooks<'_>) -> Result<ForwardOutput> {
        let c = &self.config;
        if tokens.is_empty() {
            return Err(VassError::InvalidArgument("empty token sequence".into()));
        }
        if tokens.len() > c.max_seq {
            return Err(VassError::InvalidArgument(format!(
                "sequence length {} exceeds max_seq {}",
                tokens.len(),
                c.max_seq
            )));
        }
        if let Some(&t) = tokens.iter().find(|&&t| t as usize >= c.vocab) {
            return Err(VassError::InvalidArgument(format!("token {t} outside vocab {}", c.vocab)));
        }
        if let Some(&l) = capture.iter().find(|&&l| l >= c.layers) {
            return Err(VassError::InvalidArgument(format!("capture layer {l} >= {}", c.layers)));
        }
        if let Some(s) = hooks.steering {
            s.validate(c)?;
        }

        let (h, t_len) = (c.hidden, tokens.len());
        let mut xs: Vec<Vec<f64>> = tokens
            .iter()
            .enumerate()
            .map(|(pos, &tok)| {
                self.embed
                    .row(tok as usize)
                    .iter()
                    .zip(self.pos_embed.row(pos))
                    .map(|(a, b)| a + b)
                    .collect()
            })
            .collect();

        let mut states = BTreeMap::new();
        for (layer, block) in self.blocks.iter().enumerate() {
            if let Some(e) = hooks.steering.and_then(|s| s.at(layer)) {
                for x in xs.iter_mut() {
                    x.iter_mut().zip(&e.direction).for_each(|(v, d)| *v += e.alpha * d);
                }
            }
            self.attention(block, &mut xs);
            let ablated = hooks
                .ablation
                .and_then(|a| a.neurons.get(&layer))
                .map(Vec::as_slice)
                .unwrap_or(&[]);
            self.mlp(block, &mut xs, ablated)?;
            if capture.contains(&layer) {
                states.insert(layer, xs[t_len - 1].clone());
            }
        }
        debug_assert_eq!(xs[0].len(), h);
        let logits = self.lens_logits(&xs[t_len - 1]);
        Ok(ForwardOutput { states, logits })
    }

    fn attention(&self, block: &Block, xs: &mut [Vec<f64>]) {
        let (hd, heads) = (self.config.head_dim(), self.config.heads);
        if block.w_v.is_zero() || block.w_o.is_zero() {
            return;
        }
        let normed: Vec<Vec<f64>> = xs.iter().map(|x| self.normalize(x, &block.attn_norm)).collect();
        let values: Vec<Vec<f64>> = normed.iter().map(|x| block.w_v.matvec(x)).collect();
        let mut mixed = vec![vec![0.0; self.config.hidden]; xs.len()];
        for head in 0..heads {
            let (lo, hi) = (head * hd, (head + 1) * hd);
            if block.w_v.rows_zero(lo, hi) {
                continue;
            }
            let uniform = block.w_q.rows_zero(lo, hi) || block.w_k.rows_zero(lo, hi);
            if uniform {
                let mut running = vec![0.0; hd];
                for (t, m) in mixed.iter_mut().enumerate() {
                    running.iter_mut().zip(&values[t][lo..hi]).for_each(|(r, v)| *r += v);
                    let inv = 1.0 / (t + 1) as f64;
                    m[lo..hi].iter_mut().zip(&running).for_each(|(o, r)| *o = r * inv);
                }
                continue;
            }
            let qs: Vec<Vec<f64>> = normed.iter().map(|x| block.w_q.matvec(x)[lo..hi].to_vec()).collect();
            let ks: Vec<Vec<f64>> = normed.iter().map(|x| block.w_k.matvec(x)[lo..hi].to_vec()).collect();
            let scale = (hd as f64).sqrt().recip();
            for t in 0..xs.len() {
                let scores: Vec<f64> = (0..=t)
                    .map(|i| qs[t].iter().zip(&ks[i]).map(|(a, b)| a * b).sum::<f64>() * scale)
                    .collect();
                let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let weights: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
                let z: f64 = weights.iter().sum();
                for (i, w) in weights.iter().enumerate() {
                    let p = w / z;
                    mixed[t][lo..hi]
                        .iter_mut()
                        .zip(&values[i][lo..hi])
                        .for_each(|(o, v)| *o += p * v);
                }
            }
        }
        let mut out = vec![0.0; self.config.hidden];
        for (x, m) in xs.iter_mut().zip(&mixed) {
            block.w_o.matvec_into(m, &mut out);
            x.iter_mut().zip(&out).for_each(|(a, b)| *a += b);
        }
    }

    fn mlp(&self, block: &Block, xs: &mut [Vec<f64>], ablated: &[usize]) -> Result<()> {
        if let Some(&n) = ablated.iter().find(|&&n| n >= self.config.mlp_width) {
            return Err(VassError::InvalidArgument(format!(
                "ablated neuron {n} >= mlp_width {}",
                self.config.mlp_width
            )));
        }
        if block.w_down.is_zero() || block.w_gate.is_zero() || block.w_up.is_zero() {
            return Ok(());
        }
        let mut out = vec![0.0; self.config.hidden];
        for x in xs.iter_mut() {
            let normed = self.normalize(x, &block.mlp_norm);
            let gate = block.w_gate.matvec(&normed);
            let up = block.w_up.matvec(&normed);
            let mut act: Vec<f64> = gate.iter().zip(&up).map(|(g, u)| silu(*g) * u).collect();
            for &n in ablated {
                act[n] = 0.0;
            }
            block.w_down.matvec_into(&act, &mut out);
            x.iter_mut().zip(&out).for_each(|(a, b)| *a += b);
        }
        Ok(())
    }

    fn named_tensors(&self) -> Vec<(String, Vec<usize>, Vec<f32>)> {
        let c = &self.config;
        let vec_f32 = |v: &[f64]| v.iter().map(|&x| x as f32).collect::<Vec<f32>>();
        let mut out = vec![
            ("embed".to_string(), vec![c.vocab, c.hidden], self.embed.to_f32()),
            ("pos_embed".to_string(), vec![c.max_seq, c.hidden], self.pos_embed.to_f32()),
        ];
        for (l, b) in self.blocks.iter().enumerate() {
            let hh = vec![c.hidden, c.hidden];
            out.push((format!("layer{l}/attn_norm"), vec![c.hidden], vec_f32(&b.attn_norm)));
            out.push((format!("layer{l}/w_q"), hh.clone(), b.w_q.to_f32()));
            out.push((format!("layer{l}/w_k"), hh.clone(), b.w_k.to_f32()));
            out.push((format!("layer{l}/w_v"), hh.clone(), b.w_v.to_f32()));
            out.push((format!("layer{l}/w_o"), hh, b.w_o.to_f32()));
            out.push((format!("layer{l}/mlp_norm"), vec![c.hidden], vec_f32(&b.mlp_norm)));
            out.push((format!("layer{l}/w_gate"), vec![c.mlp_width, c.hidden], b.w_gate.to_f32()));
            out.push((format!("layer{l}/w_up"), vec![c.mlp_width, c.hidden], b.w_up.to_f32()));
            out.push((format!("layer{l}/w_down"), vec![c.hidden, c.mlp_width], b.w_down.to_f32()));
        }
        out.push(("final_norm".to_string(), vec![c.hidden], vec_f32(&self.final_norm)));
        out.push(("unembed".to_string(), vec![c.vocab, c.hidden], self.unembed.to_f32()));
        out
    }

    /// FNV-1a over every weight's little-endian `f32` bytes in export order.
    pub fn weight_checksum(&self) -> u64 {
        let mut bytes = Vec::new();
        for (_, _, data) in self.named_tensors() {
            for v in data {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        fnv1a64(&bytes)
    }

    pub fn to_dump(&self) -> Result<TensorDump> {
        let mut dump = TensorDump::new()
            .with_metadata("model_id", "toy")
            .with_metadata("toy_config", serde_json::to_string(&self.config)?)
            .with_metadata("vocab_markers", serde_json::to_string(&self.vocab)?)
            .with_metadata("layers", self.config.layers.to_string())
            .with_metadata("hidden", self.config.hidden.to_string())
            .with_metadata("tokenizer", "byte256")
            .with_metadata(CAPTURE_SITE_KEY, POST_BLOCK_SITE)
            .with_metadata("steering_site", STEERING_SITE);
        for (name, shape, data) in self.named_tensors() {
            dump.push(Tensor::new(name, shape, data)?);
        }
        Ok(dump)
    }

    pub fn from_dump(dump: &TensorDump) -> Result<Self> {
        let meta = |k: &str| {
            dump.metadata
                .get(k)
                .ok_or_else(|| VassError::NotFound(format!("metadata `{k}`")))
        };
        let config: ToyConfig = serde_json::from_str(meta("toy_config")?)?;
        config.validate()?;
        let vocab: Vocab = serde_json::from_str(meta("vocab_markers")?)?;
        let get = |name: &str, shape: &[usize]| -> Result<Vec<f32>> {
            let t = dump.require(name)?;
            if t.shape != shape {
                return Err(VassError::InvalidData(format!(
                    "tensor `{name}` has shape {:?}, expected {shape:?}",
                    t.shape
                )));
            }
            Ok(t.data.clone())
        };
        let lin = |name: &str, r: usize, cc: usize| -> Result<Linear> {
            Ok(Linear::from_f32(r, cc, &get(name, &[r, cc])?))
        };
        let vecf = |name: &str, n: usize| -> Result<Vec<f64>> {
            Ok(get(name, &[n])?.into_iter().map(f64::from).collect())
        };
        let (h, m) = (config.hidden, config.mlp_width);
        let blocks = (0..config.layers)
            .map(|l| {
                Ok(Block {
                    attn_norm: vecf(&format!("layer{l}/attn_norm"), h)?,
                    w_q: lin(&format!("layer{l}/w_q"), h, h)?,
                    w_k: lin(&format!("layer{l}/w_k"), h, h)?,
                    w_v: lin(&format!("layer{l}/w_v"), h, h)?,
                    w_o: lin(&format!("layer{l}/w_o"), h, h)?,
                    mlp_norm: vecf(&format!("layer{l}/mlp_norm"), h)?,
                    w_gate: lin(&format!("layer{l}/w_gate"), m, h)?,
                    w_up: lin(&format!("layer{l}/w_up"), m, h)?,
                    w_down: lin(&format!("layer{l}/w_down"), h, m)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            embed: lin("embed", config.vocab, h)?,
            pos_embed: lin("pos_embed", config.max_seq, h)?,
            final_norm: vecf("final_norm", h)?,
            unembed: lin("unembed", config.vocab, h)?,
            blocks,
            vocab,
            config,
        })
    }
}

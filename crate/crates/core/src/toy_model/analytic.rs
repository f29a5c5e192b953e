// SPDX-License-Identifier: MIT OR Apache-2.0

//! Hand-built weights with known behaviour.
//!
//! Every token embeds to a shared direction `g`. Marker tokens also carry a
//! large end-of-sequence component, so a marker is always followed by EOS.
//! Carrier tokens add components along two private directions, which a
//! uniform-attention head at layer 0 averages over the context and writes
//! into the valence/arousal plane. Marker unembedding rows have prescribed
//! plane coordinates plus a shared bias along `g`. A small bank of MLP
//! neurons reads `g` and writes a refusal direction that only the refusal
//! markers' rows pick up. Norms are identity, so residual shifts reach the
//! logits linearly.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::model::{Block, Linear, NormKind, ToyConfig, ToyModel};
use super::vocab::{Roles, Vocab, EOS};
use crate::error::{Result, VassError};
use crate::numerics::{dot, norm};

/// Plane coordinates are bounded so marker logits stay below the EOS jump.
pub const MAX_COORD: f64 = 4.0;
const EOS_EMBED: f64 = 10.0;
const EOS_GAIN: f64 = 4.0;
const EOS_BIAS: f64 = -2.0;
const OTHER_BIAS: f64 = -8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkerCoord {
    pub valence: f64,
    pub arousal: f64,
    /// Logit offset along `g`, shared by all positions.
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticSpec {
    pub config: ToyConfig,
    pub v_dir: Vec<f64>,
    pub a_dir: Vec<f64>,
    pub markers: BTreeMap<u32, MarkerCoord>,
    /// Subset of `markers` that reads the refusal direction.
    pub refusal_tokens: Vec<u32>,
    pub refusal_gain: f64,
    /// Token → (valence, arousal) carrier amounts in the embedding.
    pub carriers: BTreeMap<u32, (f64, f64)>,
    pub refusal_neurons: usize,
    pub neuron_layer: usize,
    pub neuron_gate: f64,
    pub neuron_weight: f64,
    pub vocab: Vocab,
}

impl AnalyticSpec {
    /// Spec with no markers, carriers or neurons.
    pub fn new(config: ToyConfig, v_dir: Vec<f64>, a_dir: Vec<f64>) -> Result<Self> {
        let config = ToyConfig {
            norm: NormKind::Identity,
            ..config
        };
        config.validate()?;
        Ok(Self {
            vocab: Vocab::standard(config.vocab as u32).or_else(|_| Vocab::bytes(config.vocab as u32))?,
            config,
            v_dir,
            a_dir,
            markers: BTreeMap::new(),
            refusal_tokens: Vec::new(),
            refusal_gain: 1.0,
            carriers: BTreeMap::new(),
            refusal_neurons: 0,
            neuron_layer: 1,
            neuron_gate: 4.0,
            neuron_weight: 0.085,
        })
    }

    /// Contribution of the refusal neurons to each refusal marker's logit
    /// when the gate reads exactly `g`.
    pub fn refusal_strength(&self) -> f64 {
        let g = self.neuron_gate;
        let silu = g / (1.0 + (-g).exp());
        self.refusal_gain * self.refusal_neurons as f64 * silu * self.neuron_weight
    }

    /// Evenly spread neuron indices carrying the refusal signal.
    pub fn refusal_neuron_indices(&self) -> Vec<usize> {
        let n = self.refusal_neurons;
        let stride = self.config.mlp_width.checked_div(n).unwrap_or(0);
        (0..n).map(|i| i * stride + stride / 2).collect()
    }

    fn validate(&self) -> Result<()> {
        let c = &self.config;
        if c.hidden < 7 {
            return Err(VassError::InvalidArgument(format!(
                "analytic model needs hidden >= 7, got {}",
                c.hidden
            )));
        }
        for d in [&self.v_dir, &self.a_dir] {
            if d.len() != c.hidden {
                return Err(VassError::DimensionMismatch {
                    expected: c.hidden,
                    got: d.len(),
                });
            }
            if (norm(d) - 1.0).abs() > 1e-6 {
                return Err(VassError::InvalidArgument("plane directions must be unit norm".into()));
            }
        }
        if dot(&self.v_dir, &self.a_dir).abs() > 1e-6 {
            return Err(VassError::InvalidArgument("plane directions must be orthogonal".into()));
        }
        for (&t, m) in &self.markers {
            if t as usize >= c.vocab || t == EOS {
                return Err(VassError::InvalidArgument(format!("marker token {t} not usable")));
            }
            if !(m.valence.abs() <= MAX_COORD && m.arousal.abs() <= MAX_COORD) {
                return Err(VassError::InvalidArgument(format!(
                    "marker {t} coordinates ({}, {}) exceed ±{MAX_COORD}",
                    m.valence, m.arousal
                )));
            }
            if !m.bias.is_finite() {
                return Err(VassError::InvalidArgument(format!("marker {t} bias not finite")));
            }
        }
        if let Some(t) = self.refusal_tokens.iter().find(|t| !self.markers.contains_key(t)) {
            return Err(VassError::InvalidArgument(format!("refusal token {t} is not a marker")));
        }
        if let Some(t) = self.carriers.keys().find(|&&t| t as usize >= c.vocab) {
            return Err(VassError::InvalidArgument(format!("carrier token {t} outside vocab")));
        }
        if self.refusal_neurons > 0 && (self.neuron_layer >= c.layers || self.refusal_neurons > c.mlp_width) {
            return Err(VassError::InvalidArgument("refusal neurons do not fit the config".into()));
        }
        Ok(())
    }
}

/// The orthonormal directions the construction uses besides the plane.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticBasis {
    pub g: Vec<f64>,
    pub eos_dir: Vec<f64>,
    pub carrier_v: Vec<f64>,
    pub carrier_a: Vec<f64>,
    pub refusal_dir: Vec<f64>,
}

/// Extends `fixed` with `count` orthonormal seeded directions.
fn extend_orthonormal(fixed: &[&[f64]], count: usize, seed: u64) -> Vec<Vec<f64>> {
    let h = fixed[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut basis: Vec<Vec<f64>> = fixed.iter().map(|v| v.to_vec()).collect();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut v: Vec<f64> = (0..h).map(|_| StandardNormal.sample(&mut rng)).collect();
        for _ in 0..2 {
            for b in &basis {
                let p = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
            }
        }
        let n = norm(&v);
        if n < 1e-3 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= n);
        basis.push(v.clone());
        out.push(v);
    }
    out
}

/// A seeded random orthonormal pair in `R^hidden`.
pub fn random_plane(hidden: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut e = vec![0.0; hidden];
    e[0] = 1.0;
    let mut dirs = extend_orthonormal(&[&e], 2, seed ^ 0x9e37_79b9_7f4a_7c15);
    let a = dirs.pop().expect("two");
    (dirs.pop().expect("two"), a)
}

fn combo(terms: &[(f64, &[f64])], h: usize) -> Vec<f64> {
    let mut out = vec![0.0; h];
    for (s, v) in terms {
        out.iter_mut().zip(*v).for_each(|(o, x)| *o += s * x);
    }
    out
}

pub fn build_analytic(spec: &AnalyticSpec) -> Result<(ToyModel, AnalyticBasis)> {
    spec.validate()?;
    let c = spec.config;
    let (h, v, m) = (c.hidden, c.vocab, c.mlp_width);
    let mut extra = extend_orthonormal(&[&spec.v_dir, &spec.a_dir], 5, c.seed).into_iter();
    let mut next = || extra.next().expect("five directions");
    let basis = AnalyticBasis {
        g: next(),
        eos_dir: next(),
        carrier_v: next(),
        carrier_a: next(),
        refusal_dir: next(),
    };
    let b = &basis;

    let mut embed = Vec::with_capacity(v * h);
    let mut unembed = Vec::with_capacity(v * h);
    for tok in 0..v as u32 {
        let is_marker = spec.markers.contains_key(&tok) || tok == EOS;
        let (cv, ca) = spec.carriers.get(&tok).copied().unwrap_or((0.0, 0.0));
        let eos_part = if is_marker { EOS_EMBED } else { 0.0 };
        embed.extend(combo(
            &[(1.0, &b.g), (eos_part, &b.eos_dir), (cv, &b.carrier_v), (ca, &b.carrier_a)],
            h,
        ));
        let row = if tok == EOS {
            combo(&[(EOS_GAIN, &b.eos_dir), (EOS_BIAS, &b.g)], h)
        } else if let Some(mc) = spec.markers.get(&tok) {
            let rho = if spec.refusal_tokens.contains(&tok) { spec.refusal_gain } else { 0.0 };
            combo(
                &[
                    (mc.valence, &spec.v_dir),
                    (mc.arousal, &spec.a_dir),
                    (mc.bias, &b.g),
                    (rho, &b.refusal_dir),
                ],
                h,
            )
        } else {
            combo(&[(OTHER_BIAS, &b.g)], h)
        };
        unembed.extend(row);
    }

    let zero = |r: usize, cc: usize| Linear::from_f64(r, cc, &vec![0.0; r * cc]);
    let neurons = spec.refusal_neuron_indices();
    let blocks = (0..c.layers)
        .map(|layer| {
            let mut w_v = vec![0.0; h * h];
            let mut w_o = vec![0.0; h * h];
            if layer == 0 {
                w_v[..h].copy_from_slice(&b.carrier_v);
                w_v[h..2 * h].copy_from_slice(&b.carrier_a);
                for i in 0..h {
                    w_o[i * h] = spec.v_dir[i];
                    w_o[i * h + 1] = spec.a_dir[i];
                }
            }
            let mut w_gate = vec![0.0; m * h];
            let mut w_up = vec![0.0; m * h];
            let mut w_down = vec![0.0; h * m];
            if layer == spec.neuron_layer {
                for &n in &neurons {
                    for i in 0..h {
                        w_gate[n * h + i] = spec.neuron_gate * b.g[i];
                        w_up[n * h + i] = b.g[i];
                        w_down[i * m + n] = spec.neuron_weight * b.refusal_dir[i];
                    }
                }
            }
            Block {
                attn_norm: vec![1.0; h],
                w_q: zero(h, h),
                w_k: zero(h, h),
                w_v: Linear::from_f64(h, h, &w_v),
                w_o: Linear::from_f64(h, h, &w_o),
                mlp_norm: vec![1.0; h],
                w_gate: Linear::from_f64(m, h, &w_gate),
                w_up: Linear::from_f64(m, h, &w_up),
                w_down: Linear::from_f64(h, m, &w_down),
            }
        })
        .collect();

    let model = ToyModel {
        config: c,
        vocab: spec.vocab.clone(),
        embed: Linear::from_f64(v, h, &embed),
        pos_embed: zero(c.max_seq, h),
        blocks,
        final_norm: vec![1.0; h],
        unembed: Linear::from_f64(v, h, &unembed),
    };
    Ok((model, basis))
}

/// The standard roles placed at the given coordinates with bias `bias`.
pub fn role_markers(roles: &Roles, coords: impl Fn(u32) -> (f64, f64), bias: f64) -> BTreeMap<u32, MarkerCoord> {
    roles
        .all()
        .into_iter()
        .map(|t| {
            let (valence, arousal) = coords(t);
            (t, MarkerCoord { valence, arousal, bias })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy_model::{generate, GenerateOptions, Hooks, SteeringSpec, FIRST_MARKER_ID};

    fn spec() -> AnalyticSpec {
        let (v, a) = random_plane(64, 9);
        let mut s = AnalyticSpec::new(ToyConfig::default(), v, a).unwrap();
        let roles = Roles::standard();
        s.markers = role_markers(
            &roles,
            |t| if roles.refusal.contains(&t) { (-1.0, -1.0) } else { (1.0, 1.0) },
            4.0,
        );
        s
    }

    #[test]
    fn marker_rows_have_prescribed_coordinates() {
        let s = spec();
        let (m, _) = build_analytic(&s).unwrap();
        for (&t, mc) in &s.markers {
            let row = m.unembedding_row(t);
            assert!((dot(row, &s.v_dir) - mc.valence).abs() < 1e-6);
            assert!((dot(row, &s.a_dir) - mc.arousal).abs() < 1e-6);
        }
    }

    #[test]
    fn last_layer_arousal_steering_separates_by_two_alpha() {
        let s = spec();
        let (m, _) = build_analytic(&s).unwrap();
        let p = m.vocab().encode("HELLO");
        let (r, cpl) = (FIRST_MARKER_ID as usize, FIRST_MARKER_ID as usize + 12);
        let base = m.forward(&p, &[]).unwrap().logits;
        for alpha in [-0.4, 0.1, 0.3] {
            let st = SteeringSpec::single(3, s.a_dir.clone(), alpha);
            let out = m.forward_with(&p, &[], Hooks { steering: Some(&st), ablation: None }).unwrap();
            let delta = (out.logits[cpl] - out.logits[r]) - (base[cpl] - base[r]);
            assert!((delta - 2.0 * alpha).abs() < 1e-6, "{delta} vs {}", 2.0 * alpha);
        }
    }

    #[test]
    fn markers_are_followed_by_eos() {
        let (m, _) = build_analytic(&spec()).unwrap();
        let r = generate(&m, &m.vocab().encode("HI"), &GenerateOptions::new(5)).unwrap();
        assert_eq!(r.generated.len(), 2);
        assert!(r.generated[0] >= FIRST_MARKER_ID);
        assert_eq!(r.generated[1], EOS);
    }

    #[test]
    fn refusal_neurons_add_their_strength() {
        let mut s = spec();
        s.refusal_tokens = Roles::standard().refusal.clone();
        s.refusal_neurons = 8;
        let (m, b) = build_analytic(&s).unwrap();
        let p = m.vocab().encode("HI");
        let out = m.forward(&p, &[3]).unwrap();
        let along = dot(&out.states[&3], &b.refusal_dir);
        assert!((along - s.refusal_strength()).abs() < 1e-5, "{along}");
        let neurons = s.refusal_neuron_indices();
        assert_eq!(neurons.len(), 8);
        let down = &m.weights().mlp_down[1];
        let col = down.column(neurons[0]);
        assert!((dot(&col, &b.refusal_dir) - s.neuron_weight).abs() < 1e-7);
    }

    #[test]
    fn carriers_move_the_last_state_in_plane() {
        let mut s = spec();
        s.carriers.insert(b'!' as u32, (0.0, 3.0));
        let (m, _) = build_analytic(&s).unwrap();
        let out = m.forward(&m.vocab().encode("AB!"), &[0]).unwrap();
        let st = &out.states[&0];
        assert!((dot(st, &s.a_dir) - 1.0).abs() < 1e-6);
        assert!(dot(st, &s.v_dir).abs() < 1e-6);
    }

    #[test]
    fn out_of_bounds_coordinates_rejected() {
        let mut s = spec();
        s.markers.insert(130, MarkerCoord { valence: 4.5, arousal: 0.0, bias: 0.0 });
        assert!(build_analytic(&s).is_err());
        let mut s = spec();
        s.a_dir = s.v_dir.clone();
        assert!(build_analytic(&s).is_err());
    }
}

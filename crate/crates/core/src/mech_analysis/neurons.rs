// SPDX-License-Identifier: MIT OR Apache-2.0

//! Output alignment of MLP neurons and comparison of contrastive directions
//! with the fitted planes.

use serde::{Deserialize, Serialize};

use crate::error::{Result, VassError};
use crate::numerics::{dot, norm, normalized, DenseMatrix};
use crate::steering_engine::LayerPlane;
use crate::toy_model::{ModelWeights, Roles};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronAlignment {
    pub layer: usize,
    pub neuron: usize,
    pub alignment_refusal: f64,
    pub alignment_compliance: f64,
    /// Cosine of the output column with the layer's valence axis, if a plane is given.
    pub v_align: Option<f64>,
    pub a_align: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub all: Vec<NeuronAlignment>,
    /// Highest `alignment_refusal` first; ties broken by (layer, neuron).
    pub top_refusal: Vec<NeuronAlignment>,
    pub top_compliance: Vec<NeuronAlignment>,
}

fn cos_or_zero(u: &[f64], v: &[f64]) -> f64 {
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        0.0
    } else {
        (dot(u, v) / (nu * nv)).clamp(-1.0, 1.0)
    }
}

fn mean_row(unembedding: &DenseMatrix, tokens: &[u32]) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; unembedding.cols()];
    for &t in tokens {
        if t as usize >= unembedding.rows() {
            return Err(VassError::InvalidArgument(format!("token {t} outside the vocabulary")));
        }
        for (a, x) in acc.iter_mut().zip(unembedding.row(t as usize)) {
            *a += x;
        }
    }
    Ok(acc.into_iter().map(|x| x / tokens.len() as f64).collect())
}

fn top_by(all: &[NeuronAlignment], n: usize, key: impl Fn(&NeuronAlignment) -> f64) -> Vec<NeuronAlignment> {
    let mut sorted = all.to_vec();
    sorted.sort_by(|x, y| {
        key(y)
            .total_cmp(&key(x))
            .then(x.layer.cmp(&y.layer))
            .then(x.neuron.cmp(&y.neuron))
    });
    sorted.truncate(n);
    sorted
}

/// Cosine of every MLP output column in `layers` with the mean unembedding
/// row of each role group. Zero columns score 0.
pub fn neuron_alignment(
    weights: &ModelWeights,
    layers: &[usize],
    roles: &Roles,
    planes: &[LayerPlane],
    top_n: usize,
) -> Result<AlignmentReport> {
    let refusal = mean_row(&weights.unembedding, &roles.refusal)?;
    let compliance = mean_row(&weights.unembedding, &roles.compliance)?;
    let mut all = Vec::new();
    for &layer in layers {
        let down = weights
            .mlp_down
            .get(layer)
            .ok_or_else(|| VassError::InvalidArgument(format!("layer {layer} outside the model")))?;
        if down.rows() != refusal.len() {
            return Err(VassError::DimensionMismatch {
                expected: refusal.len(),
                got: down.rows(),
            });
        }
        let plane = planes.iter().find(|p| p.layer == layer);
        for neuron in 0..down.cols() {
            let col = down.column(neuron);
            all.push(NeuronAlignment {
                layer,
                neuron,
                alignment_refusal: cos_or_zero(&col, &refusal),
                alignment_compliance: cos_or_zero(&col, &compliance),
                v_align: plane.map(|p| cos_or_zero(&col, &p.v_dir)),
                a_align: plane.map(|p| cos_or_zero(&col, &p.a_dir)),
            });
        }
    }
    let n = top_n.min(all.len());
    if n < top_n {
        log::warn!("top-{top_n} neuron list clipped to {n} candidates");
    }
    Ok(AlignmentReport {
        top_refusal: top_by(&all, n, |a| a.alignment_refusal),
        top_compliance: top_by(&all, n, |a| a.alignment_compliance),
        all,
    })
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

pub fn alignment_csv(rows: &[NeuronAlignment]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["layer", "neuron", "alignment_refusal", "alignment_compliance", "v_align", "a_align"])?;
    for r in rows {
        w.write_record([
            r.layer.to_string(),
            r.neuron.to_string(),
            r.alignment_refusal.to_string(),
            r.alignment_compliance.to_string(),
            opt(r.v_align),
            opt(r.a_align),
        ])?;
    }
    w.into_inner().map_err(|e| VassError::Io(e.into_error()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastiveRow {
    pub layer: usize,
    /// 0 when the direction lies in the plane, 90 when orthogonal to it.
    pub angle_to_plane_deg: f64,
    /// Coordinates of the unit direction on the plane axes.
    pub v: f64,
    pub a: f64,
}

/// Places contrastive (e.g. refusal-minus-compliance mean) directions
/// relative to each layer's plane.
pub fn compare_contrastive(dirs: &[(usize, Vec<f64>)], planes: &[LayerPlane]) -> Result<Vec<ContrastiveRow>> {
    dirs.iter()
        .map(|(layer, d)| {
            let plane = planes
                .iter()
                .find(|p| p.layer == *layer)
                .ok_or_else(|| VassError::NotFound(format!("plane for layer {layer}")))?;
            if d.len() != plane.hidden() {
                return Err(VassError::DimensionMismatch {
                    expected: plane.hidden(),
                    got: d.len(),
                });
            }
            let u = normalized(d)?;
            let (v, a) = (dot(&u, &plane.v_dir), dot(&u, &plane.a_dir));
            let in_plane = v.hypot(a).min(1.0);
            Ok(ContrastiveRow {
                layer: *layer,
                angle_to_plane_deg: in_plane.acos().to_degrees(),
                v,
                a,
            })
        })
        .collect()
}

pub fn contrastive_csv(rows: &[ContrastiveRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["layer", "angle_to_plane_deg", "v", "a"])?;
    for r in rows {
        w.write_record([r.layer.to_string(), r.angle_to_plane_deg.to_string(), r.v.to_string(), r.a.to_string()])?;
    }
    w.into_inner().map_err(|e| VassError::Io(e.into_error()))
}

// SPDX-License-Identifier: MIT OR Apache-2.0

//! Mean-difference emotion vectors from last-token activations.
//!
//! Activations travel in VATD1 dumps under `act/layer{ℓ}/{label}` (one
//! `N×H` tensor per class, the contrast class labelled `neutral`). An
//! optional `mean/layer{ℓ}` holds the grand mean over every captured sample.
//! Emotion vector sets are written back as `emovec/layer{ℓ}` with the label
//! order stored in the dump metadata under `labels/layer{ℓ}`. Word
//! activations for lexicon validation use `lexact/layer{ℓ}`, rows in lexicon
//! file order.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus_store::{Tensor, TensorDump, NEUTRAL_LABEL};
use crate::error::{Result, VassError};
use crate::numerics::{pairwise_sum, sub, DenseMatrix};

/// Metadata key naming where in the block activations were captured.
pub const CAPTURE_SITE_KEY: &str = "capture_site";
/// The site used by the toy model: residual stream after the block.
pub const POST_BLOCK_SITE: &str = "post_block_residual";

/// Minimum number of classes for a downstream PCA.
pub const MIN_CLASSES: usize = 3;

pub fn activation_tensor_name(layer: usize, label: &str) -> String {
    format!("act/layer{layer}/{label}")
}

pub fn grand_mean_tensor_name(layer: usize) -> String {
    format!("mean/layer{layer}")
}

pub fn emotion_vector_tensor_name(layer: usize) -> String {
    format!("emovec/layer{layer}")
}

pub fn lexicon_tensor_name(layer: usize) -> String {
    format!("lexact/layer{layer}")
}

fn labels_key(layer: usize) -> String {
    format!("labels/layer{layer}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActivationBatch {
    pub layer: usize,
    pub class_label: String,
    pub matrix: DenseMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionVectorSet {
    pub layer: usize,
    pub labels: Vec<String>,
    /// `K×H`, row `i` belongs to `labels[i]`.
    pub matrix: DenseMatrix,
    pub sample_counts: BTreeMap<String, usize>,
    pub neutral_count: usize,
}

impl EmotionVectorSet {
    pub fn k(&self) -> usize {
        self.labels.len()
    }

    pub fn hidden(&self) -> usize {
        self.matrix.cols()
    }

    pub fn vector(&self, label: &str) -> Option<&[f64]> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.matrix.row(i))
    }
}

/// Column mean of an arbitrary list of rows.
///
/// Each column is sorted before a pairwise sum, so the result is
/// bit-identical under any permutation of the rows.
fn mean_of_rows(rows: &[&[f64]], hidden: usize) -> Vec<f64> {
    let n = rows.len();
    let mut column = Vec::with_capacity(n);
    (0..hidden)
        .map(|c| {
            column.clear();
            column.extend(rows.iter().map(|r| r[c]));
            column.sort_unstable_by(f64::total_cmp);
            pairwise_sum(&column) / n as f64
        })
        .collect()
}

pub fn class_mean(batch: &ActivationBatch) -> Result<Vec<f64>> {
    if batch.matrix.rows() == 0 {
        return Err(VassError::InvalidArgument(format!(
            "empty activation batch for `{}` at layer {}",
            batch.class_label, batch.layer
        )));
    }
    let rows: Vec<&[f64]> = batch.matrix.row_iter().collect();
    Ok(mean_of_rows(&rows, batch.matrix.cols()))
}

/// Grand mean over every row of every batch.
pub fn pooled_mean(batches: &[&ActivationBatch]) -> Result<Vec<f64>> {
    let hidden = batches
        .first()
        .map(|b| b.matrix.cols())
        .ok_or_else(|| VassError::InvalidArgument("no batches to pool".into()))?;
    if let Some(b) = batches.iter().find(|b| b.matrix.cols() != hidden) {
        return Err(VassError::DimensionMismatch {
            expected: hidden,
            got: b.matrix.cols(),
        });
    }
    let rows: Vec<&[f64]> = batches.iter().flat_map(|b| b.matrix.row_iter()).collect();
    if rows.is_empty() {
        return Err(VassError::InvalidArgument("all batches are empty".into()));
    }
    Ok(mean_of_rows(&rows, hidden))
}

/// `v = mean_e − mean_neutral`.
pub fn emotion_vector(mean_e: &[f64], mean_neutral: &[f64]) -> Result<Vec<f64>> {
    if mean_e.len() != mean_neutral.len() {
        return Err(VassError::DimensionMismatch {
            expected: mean_neutral.len(),
            got: mean_e.len(),
        });
    }
    Ok(sub(mean_e, mean_neutral))
}

/// Builds the `K×H` set with rows in `label_order`.
pub fn build_set(
    batches: &[ActivationBatch],
    neutral: Option<&ActivationBatch>,
    layer: usize,
    label_order: &[String],
) -> Result<EmotionVectorSet> {
    let neutral = neutral.ok_or_else(|| {
        VassError::InvalidArgument(format!("no `{NEUTRAL_LABEL}` batch at layer {layer}"))
    })?;
    if label_order.len() < MIN_CLASSES {
        return Err(VassError::InvalidArgument(format!(
            "need at least {MIN_CLASSES} emotion classes, got {}",
            label_order.len()
        )));
    }
    let hidden = neutral.matrix.cols();
    for b in batches.iter().chain(std::iter::once(neutral)) {
        if b.layer != layer {
            return Err(VassError::InvalidArgument(format!(
                "batch `{}` is from layer {}, expected {layer}",
                b.class_label, b.layer
            )));
        }
        if b.matrix.cols() != hidden {
            return Err(VassError::DimensionMismatch {
                expected: hidden,
                got: b.matrix.cols(),
            });
        }
    }
    let neutral_mean = class_mean(neutral)?;
    let mut data = Vec::with_capacity(label_order.len() * hidden);
    let mut sample_counts = BTreeMap::new();
    for label in label_order {
        let batch = batches
            .iter()
            .find(|b| &b.class_label == label)
            .ok_or_else(|| VassError::NotFound(format!("activations for `{label}` at layer {layer}")))?;
        data.extend(emotion_vector(&class_mean(batch)?, &neutral_mean)?);
        sample_counts.insert(label.clone(), batch.matrix.rows());
    }
    Ok(EmotionVectorSet {
        layer,
        labels: label_order.to_vec(),
        matrix: DenseMatrix::new(label_order.len(), hidden, data)?,
        sample_counts,
        neutral_count: neutral.matrix.rows(),
    })
}

/// Layers present in a dump, from `act/layer{ℓ}/…` tensor names.
pub fn dump_layers(dump: &TensorDump) -> Vec<usize> {
    let mut layers: Vec<usize> = dump
        .tensors
        .iter()
        .filter_map(|t| t.name.strip_prefix("act/layer"))
        .filter_map(|rest| rest.split_once('/'))
        .filter_map(|(l, _)| l.parse().ok())
        .collect();
    layers.sort_unstable();
    layers.dedup();
    layers
}

/// All class batches stored for `layer`, neutral included, in dump order.
pub fn batches_from_dump(dump: &TensorDump, layer: usize) -> Result<Vec<ActivationBatch>> {
    let prefix = format!("act/layer{layer}/");
    dump.tensors
        .iter()
        .filter_map(|t| t.name.strip_prefix(&prefix).map(|label| (label, t)))
        .map(|(label, t)| {
            if t.shape.len() != 2 {
                return Err(VassError::InvalidData(format!(
                    "activation tensor `{}` must be N×H, has shape {:?}",
                    t.name, t.shape
                )));
            }
            Ok(ActivationBatch {
                layer,
                class_label: label.to_string(),
                matrix: t.to_matrix()?,
            })
        })
        .collect()
}

/// Grand mean for `layer`: the stored `mean/layer{ℓ}` tensor if present,
/// else the pooled mean of all stored batches.
pub fn grand_mean_from_dump(dump: &TensorDump, layer: usize) -> Result<Vec<f64>> {
    if let Some(t) = dump.get(&grand_mean_tensor_name(layer)) {
        return Ok(t.to_vec_f64());
    }
    let batches = batches_from_dump(dump, layer)?;
    pooled_mean(&batches.iter().collect::<Vec<_>>())
}

/// Builds one vector set per layer in parallel; `labels` defaults to every
/// non-neutral class in sorted order.
pub fn build_sets_from_dump(
    dump: &TensorDump,
    labels: Option<&[String]>,
) -> Result<Vec<EmotionVectorSet>> {
    let layers = dump_layers(dump);
    if layers.is_empty() {
        return Err(VassError::NotFound("no `act/layer*/…` tensors in dump".into()));
    }
    layers
        .par_iter()
        .map(|&layer| {
            let batches = batches_from_dump(dump, layer)?;
            let (neutral, classes): (Vec<_>, Vec<_>) = batches
                .into_iter()
                .partition(|b| b.class_label == NEUTRAL_LABEL);
            let order: Vec<String> = match labels {
                Some(l) => l.to_vec(),
                None => {
                    let mut l: Vec<String> = classes.iter().map(|b| b.class_label.clone()).collect();
                    l.sort();
                    l
                }
            };
            build_set(&classes, neutral.first(), layer, &order)
        })
        .collect()
}

/// Appends `emovec/layer{ℓ}` and its label index to `dump`.
pub fn push_vector_set(dump: &mut TensorDump, set: &EmotionVectorSet) {
    dump.push(Tensor::from_matrix(emotion_vector_tensor_name(set.layer), &set.matrix));
    dump.metadata
        .insert(labels_key(set.layer), set.labels.join(","));
}

/// Reads back every `emovec/layer{ℓ}` set (sample counts are not stored).
pub fn vector_sets_from_dump(dump: &TensorDump) -> Result<Vec<EmotionVectorSet>> {
    let mut sets = Vec::new();
    for t in &dump.tensors {
        let Some(layer) = t.name.strip_prefix("emovec/layer") else {
            continue;
        };
        let layer: usize = layer
            .parse()
            .map_err(|_| VassError::InvalidData(format!("bad tensor name `{}`", t.name)))?;
        let labels: Vec<String> = dump
            .metadata
            .get(&labels_key(layer))
            .ok_or_else(|| VassError::NotFound(format!("label index for layer {layer}")))?
            .split(',')
            .map(str::to_string)
            .collect();
        let matrix = t.to_matrix()?;
        if matrix.rows() != labels.len() {
            return Err(VassError::DimensionMismatch {
                expected: labels.len(),
                got: matrix.rows(),
            });
        }
        sets.push(EmotionVectorSet {
            layer,
            labels,
            matrix,
            sample_counts: BTreeMap::new(),
            neutral_count: 0,
        });
    }
    sets.sort_by_key(|s| s.layer);
    Ok(sets)
}

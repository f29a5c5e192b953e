// SPDX-License-Identifier: MIT OR Apache-2.0

//! Dense linear algebra and statistics used by the analysis modules.
//!
//! Everything here is a pure function of its inputs and computes in `f64`.

mod matrix;
mod orthonormal;
mod pca;
mod ridge;
mod stats;

pub use matrix::{axpy, dot, norm, normalized, scale, sub, DenseMatrix};
pub use orthonormal::orthonormalize_pair;
pub use pca::{center_rows, column_means, pca, PcaModel};
pub use ridge::{ridge, RidgeFit};
pub use stats::{
    cosine, fractional_ranks, mean, pairwise_sum, pearson, spearman, std_population, std_sample,
};

// SPDX-License-Identifier: MIT OR Apache-2.0

//! Principal component analysis through the SVD of the column-centred matrix.

use serde::{Deserialize, Serialize};

use super::matrix::{check_finite, DenseMatrix};
use crate::error::{Result, VassError};

/// Fitted PCA basis.
///
/// `components` is `H×k` with orthonormal columns ordered by non-increasing
/// singular value. Each column is sign-normalised so that its entry of
/// largest magnitude is non-negative (first such entry on ties).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    pub components: DenseMatrix,
    pub scores: DenseMatrix,
    pub explained_variance: Vec<f64>,
}

impl PcaModel {
    pub fn k(&self) -> usize {
        self.components.cols()
    }

    /// Column `j` of the component matrix.
    pub fn component(&self, j: usize) -> Vec<f64> {
        self.components.column(j)
    }

    /// Maps an `H`-vector through the loadings: `U_k · coeffs`.
    pub fn combine(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        self.components.matvec(coeffs)
    }
}

/// Column means of `x`.
pub fn column_means(x: &DenseMatrix) -> Vec<f64> {
    let mut mean = vec![0.0; x.cols()];
    for row in x.row_iter() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    let n = x.rows().max(1) as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

/// Subtracts `mean` from every row.
pub fn center_rows(x: &DenseMatrix, mean: &[f64]) -> DenseMatrix {
    let mut data = Vec::with_capacity(x.rows() * x.cols());
    for row in x.row_iter() {
        data.extend(row.iter().zip(mean).map(|(v, m)| v - m));
    }
    DenseMatrix::new(x.rows(), x.cols(), data).expect("centering preserves shape")
}

/// Top-`k` principal components of the rows of `x`.
///
/// Requires `K ≥ 2` rows and `1 ≤ k ≤ min(K−1, H)`. A matrix with identical
/// rows yields zero explained variance, zero scores and an arbitrary
/// orthonormal basis.
pub fn pca(x: &DenseMatrix, k: usize) -> Result<PcaModel> {
    let (n_rows, h) = (x.rows(), x.cols());
    if n_rows < 2 {
        return Err(VassError::InvalidArgument(format!(
            "pca needs at least 2 rows, got {n_rows}"
        )));
    }
    if k < 1 || k > (n_rows - 1).min(h) {
        return Err(VassError::InvalidArgument(format!(
            "k = {k} outside [1, {}]",
            (n_rows - 1).min(h)
        )));
    }
    check_finite(x.data(), "pca input")?;

    let mean = column_means(x);
    let centered = center_rows(x, &mean);

    let svd = centered.to_nalgebra().svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| VassError::Singular("SVD did not produce right vectors".into()))?;

    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .total_cmp(&svd.singular_values[a])
            .then(a.cmp(&b))
    });

    let mut columns: Vec<Vec<f64>> = order
        .iter()
        .take(k)
        .map(|&i| v_t.row(i).iter().copied().collect())
        .collect();
    let mut sigmas: Vec<f64> = order
        .iter()
        .take(k)
        .map(|&i| svd.singular_values[i])
        .collect();

    if columns.iter().flatten().any(|v| !v.is_finite()) {
        // Only reachable for degenerate input; fall back to the coordinate basis.
        columns = (0..k)
            .map(|j| {
                let mut e = vec![0.0; h];
                e[j] = 1.0;
                e
            })
            .collect();
        sigmas = vec![0.0; k];
    }

    for col in columns.iter_mut() {
        canonicalize_sign(col);
    }

    let mut comp = DenseMatrix::zeros(h, k);
    for (j, col) in columns.iter().enumerate() {
        for (r, &v) in col.iter().enumerate() {
            comp.set(r, j, v);
        }
    }
    let scores = centered.matmul(&comp)?;
    let denom = (n_rows - 1) as f64;
    let explained_variance = sigmas.iter().map(|s| s * s / denom).collect();

    Ok(PcaModel {
        mean,
        components: comp,
        scores,
        explained_variance,
    })
}

/// Flips `v` so its largest-magnitude entry is non-negative.
pub(crate) fn canonicalize_sign(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::matrix::dot;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        DenseMatrix::new(rows, cols, data).unwrap()
    }

    #[test]
    fn rank_two_input_in_coordinate_plane() {
        let rows: Vec<[f64; 5]> = (0..8)
            .map(|i| {
                let t = i as f64;
                [0.0, t.cos() * 3.0, 0.0, t.sin() + 0.5 * t, 0.0]
            })
            .collect();
        let x = DenseMatrix::from_rows(&rows).unwrap();
        let model = pca(&x, 4).unwrap();
        for j in 0..2 {
            let c = model.component(j);
            let in_plane = c[1] * c[1] + c[3] * c[3];
            assert!((in_plane - 1.0).abs() < 1e-12, "component {j} leaves plane");
        }
        for ev in &model.explained_variance[2..] {
            assert!(ev.abs() < 1e-20);
        }
    }

    #[test]
    fn identical_rows_give_zero_variance() {
        let x = DenseMatrix::from_rows(&[[1.0, 2.0, 3.0]; 4]).unwrap();
        let model = pca(&x, 2).unwrap();
        assert!(model.explained_variance.iter().all(|v| *v == 0.0));
        assert!(model.scores.data().iter().all(|v| *v == 0.0));
        let c0 = model.component(0);
        let c1 = model.component(1);
        assert!((dot(&c0, &c0) - 1.0).abs() < 1e-12);
        assert!(dot(&c0, &c1).abs() < 1e-12);
    }

    #[test]
    fn k_out_of_range() {
        let x = random_matrix(5, 3, 1);
        assert!(matches!(pca(&x, 0), Err(VassError::InvalidArgument(_))));
        assert!(matches!(pca(&x, 4), Err(VassError::InvalidArgument(_))));
        let x = random_matrix(3, 8, 1);
        assert!(pca(&x, 3).is_err());
        assert!(pca(&x, 2).is_ok());
    }

    #[test]
    fn orthonormal_sorted_and_consistent_scores() {
        let x = random_matrix(27, 64, 9);
        let model = pca(&x, 10).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                let d = dot(&model.component(i), &model.component(j));
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((d - expected).abs() < 1e-10);
            }
        }
        assert!(model
            .explained_variance
            .windows(2)
            .all(|w| w[0] >= w[1] && w[1] >= 0.0));
        let centered = center_rows(&x, &model.mean);
        let expect = centered.matmul(&model.components).unwrap();
        for (a, b) in expect.data().iter().zip(model.scores.data()) {
            assert!((a - b).abs() < 1e-9);
        }
        for j in 0..10 {
            let c = model.component(j);
            let big = c.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
            assert!(big >= 0.0);
        }
    }
}

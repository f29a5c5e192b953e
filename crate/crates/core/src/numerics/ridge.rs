// SPDX-License-Identifier: MIT OR Apache-2.0

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::matrix::{check_finite, DenseMatrix};
use crate::error::{Result, VassError};

/// Ridge coefficients for a mean-centred target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeFit {
    pub coefficients: Vec<f64>,
    pub lambda: f64,
    pub target_mean: f64,
}

impl RidgeFit {
    /// In-sample predictions `Z·β + target_mean`.
    pub fn predict(&self, z: &DenseMatrix) -> Result<Vec<f64>> {
        Ok(z
            .matvec(&self.coefficients)?
            .into_iter()
            .map(|v| v + self.target_mean)
            .collect())
    }
}

/// Solves `(ZᵀZ + λI)β = Zᵀỹ` with `ỹ = y − mean(y)`.
///
/// For `λ > 0` the system is symmetric positive definite and is solved by
/// Cholesky factorisation. For `λ = 0` the minimum-norm least-squares
/// solution is returned through the SVD of `Z`, which also covers a
/// rank-deficient design.
pub fn ridge(z: &DenseMatrix, y: &[f64], lambda: f64) -> Result<RidgeFit> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(VassError::InvalidArgument(format!(
            "lambda must be finite and non-negative, got {lambda}"
        )));
    }
    if z.rows() == 0 {
        return Err(VassError::InvalidArgument("ridge needs at least one row".into()));
    }
    if y.len() != z.rows() {
        return Err(VassError::DimensionMismatch {
            expected: z.rows(),
            got: y.len(),
        });
    }
    check_finite(y, "ridge target")?;

    let target_mean = y.iter().sum::<f64>() / y.len() as f64;
    let centered: Vec<f64> = y.iter().map(|v| v - target_mean).collect();
    let zm = z.to_nalgebra();
    let yv = DVector::from_vec(centered);
    let k = z.cols();

    let beta = if lambda > 0.0 {
        let gram = zm.transpose() * &zm + DMatrix::<f64>::identity(k, k) * lambda;
        let rhs = zm.transpose() * &yv;
        match gram.cholesky() {
            Some(chol) => chol.solve(&rhs),
            None => min_norm_solve(&zm, &yv)?,
        }
    } else {
        min_norm_solve(&zm, &yv)?
    };

    let coefficients: Vec<f64> = beta.iter().copied().collect();
    check_finite(&coefficients, "ridge coefficients")?;
    Ok(RidgeFit {
        coefficients,
        lambda,
        target_mean,
    })
}

fn min_norm_solve(zm: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let svd = zm.clone().svd(true, true);
    let max_sv = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let eps = max_sv * (zm.nrows().max(zm.ncols()) as f64) * f64::EPSILON;
    if max_sv == 0.0 {
        return Ok(DVector::zeros(zm.ncols()));
    }
    svd.solve(y, eps)
        .map_err(|e| VassError::Singular(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::matrix::norm;

    #[test]
    fn orthonormal_design_at_zero_lambda() {
        let s = 1.0 / 2f64.sqrt();
        let z = DenseMatrix::from_rows(&[[s, 0.0], [s, 0.0], [0.0, 1.0]]).unwrap();
        let y = [3.0, 1.0, 5.0];
        let fit = ridge(&z, &y, 0.0).unwrap();
        assert_eq!(fit.target_mean, 3.0);
        // ỹ = (0, -2, 2); Zᵀỹ = (-2s, 2)
        let zt_y = [-2.0 * s, 2.0];
        // ZᵀZ = I, so the normal equations reduce to β = Zᵀỹ
        for (b, e) in fit.coefficients.iter().zip(zt_y) {
            assert!((b - e).abs() < 1e-12);
        }
    }

    #[test]
    fn huge_lambda_shrinks_to_zero() {
        let z = DenseMatrix::from_rows(&[[1.0, 2.0], [0.5, -1.0], [3.0, 0.0], [0.0, 1.0]]).unwrap();
        let y = [1.0, -2.0, 0.5, 4.0];
        let fit = ridge(&z, &y, 1e12).unwrap();
        let zt = z.transpose();
        let ytilde: Vec<f64> = y.iter().map(|v| v - fit.target_mean).collect();
        let zty = zt.matvec(&ytilde).unwrap();
        assert!(norm(&fit.coefficients) < 1e-6 * norm(&zty));
    }

    #[test]
    fn rank_deficient_zero_lambda_is_min_norm() {
        // duplicated column: min-norm solution splits weight evenly
        let z = DenseMatrix::from_rows(&[[1.0, 1.0], [-1.0, -1.0], [0.0, 0.0]]).unwrap();
        let y = [1.0, -1.0, 0.0];
        let fit = ridge(&z, &y, 0.0).unwrap();
        assert!((fit.coefficients[0] - fit.coefficients[1]).abs() < 1e-12);
        assert!((fit.coefficients[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_negative_lambda() {
        let z = DenseMatrix::from_rows(&[[1.0]]).unwrap();
        assert!(ridge(&z, &[1.0], -1.0).is_err());
    }
}

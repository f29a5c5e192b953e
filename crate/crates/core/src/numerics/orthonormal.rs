// SPDX-License-Identifier: MIT OR Apache-2.0

use super::matrix::{dot, norm, scale};
use crate::error::{Result, VassError};

/// Gram–Schmidt on an ordered pair: `w1` is kept (normalised) and `w2`
/// absorbs the orthogonalisation.
///
/// The projection is removed twice, which brings `u1·u2` down to rounding
/// level even for nearly parallel inputs.
pub fn orthonormalize_pair(w1: &[f64], w2: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if w1.len() != w2.len() {
        return Err(VassError::DimensionMismatch {
            expected: w1.len(),
            got: w2.len(),
        });
    }
    let n1 = norm(w1);
    let n2 = norm(w2);
    if !(n1 > 1e-12) || !(n2 > 1e-12) {
        return Err(VassError::DegenerateAxes {
            cosine: f64::NAN,
        });
    }
    let u1 = scale(w1, 1.0 / n1);
    let mut rest = w2.to_vec();
    for _ in 0..2 {
        let p = dot(&rest, &u1);
        rest.iter_mut().zip(&u1).for_each(|(r, u)| *r -= p * u);
    }
    let nr = norm(&rest);
    if !(nr > 1e-12 * n2.max(1.0)) {
        let cosine = dot(w1, w2) / (n1 * n2);
        return Err(VassError::DegenerateAxes { cosine });
    }
    let u2 = scale(&rest, 1.0 / nr);
    Ok((u1, u2))
}

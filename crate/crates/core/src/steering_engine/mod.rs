// SPDX-License-Identifier: MIT OR Apache-2.0

//! Steering experiments built from valence/arousal directions: angular
//! sweeps, random-direction controls, emotion-vector baselines and
//! emotional-prefix shifts.

mod baseline;
mod controls;
mod sweep;

use serde::{Deserialize, Serialize};

use crate::error::{Result, VassError};
use crate::numerics::{dot, norm};
use crate::va_subspace::VAAxes;

pub use baseline::{emotion_baseline, prefix_shift, prefix_csv, EmotionRateRow, PrefixShift};
pub use controls::{make_controls, ControlCategory, ControlDirectionSet};
pub use sweep::{default_angles, default_strengths, run_sweep, SweepCell, SweepGrid, SweepOptions};

/// An orthonormal direction pair attached to one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerPlane {
    pub layer: usize,
    pub v_dir: Vec<f64>,
    pub a_dir: Vec<f64>,
}

impl LayerPlane {
    pub fn new(layer: usize, v_dir: Vec<f64>, a_dir: Vec<f64>) -> Result<Self> {
        if v_dir.len() != a_dir.len() {
            return Err(VassError::DimensionMismatch {
                expected: v_dir.len(),
                got: a_dir.len(),
            });
        }
        let ok = (norm(&v_dir) - 1.0).abs() < 1e-8
            && (norm(&a_dir) - 1.0).abs() < 1e-8
            && dot(&v_dir, &a_dir).abs() < 1e-8;
        if !ok {
            return Err(VassError::InvalidArgument("plane directions must be orthonormal".into()));
        }
        Ok(Self { layer, v_dir, a_dir })
    }

    /// `cos θ·v_dir + sin θ·a_dir`.
    pub fn direction(&self, theta_deg: f64) -> Vec<f64> {
        let (s, c) = theta_deg.to_radians().sin_cos();
        self.v_dir.iter().zip(&self.a_dir).map(|(v, a)| c * v + s * a).collect()
    }

    pub fn hidden(&self) -> usize {
        self.v_dir.len()
    }
}

impl From<&VAAxes> for LayerPlane {
    fn from(axes: &VAAxes) -> Self {
        Self {
            layer: axes.layer,
            v_dir: axes.v_dir.clone(),
            a_dir: axes.a_dir.clone(),
        }
    }
}

/// Unit direction at `theta_deg`; 0° is +valence, 90° is +arousal.
pub fn angular_direction(axes: &VAAxes, theta_deg: f64) -> Vec<f64> {
    LayerPlane::from(axes).direction(theta_deg)
}

/// The same plane at each of `layers` layers.
pub fn shared_planes(v_dir: &[f64], a_dir: &[f64], layers: usize) -> Result<Vec<LayerPlane>> {
    (0..layers)
        .map(|l| LayerPlane::new(l, v_dir.to_vec(), a_dir.to_vec()))
        .collect()
}

/// Per-layer directions at angle `theta_deg`.
pub fn plane_directions(planes: &[LayerPlane], theta_deg: f64) -> Vec<(usize, Vec<f64>)> {
    planes.iter().map(|p| (p.layer, p.direction(theta_deg))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy_model::random_plane;
    use proptest::prelude::*;

    #[test]
    fn cardinal_angles() {
        let (v, a) = random_plane(16, 1);
        let p = LayerPlane::new(0, v.clone(), a.clone()).unwrap();
        assert_eq!(p.direction(0.0), v);
        let d90 = p.direction(90.0);
        assert!(d90.iter().zip(&a).all(|(x, y)| (x - y).abs() < 1e-15));
        let d45 = p.direction(45.0);
        assert!((norm(&d45) - 1.0).abs() < 1e-12);
        assert!((dot(&d45, &v) - dot(&d45, &a)).abs() < 1e-12);
        assert!(LayerPlane::new(0, v.clone(), v).is_err());
    }

    proptest! {
        #[test]
        fn composition(theta in -720.0f64..720.0, seed in 0u64..50) {
            let (v, a) = random_plane(12, seed);
            let p = LayerPlane::new(0, v.clone(), a.clone()).unwrap();
            let d = p.direction(theta);
            let t = theta.to_radians();
            prop_assert!((dot(&d, &v) - t.cos()).abs() < 1e-12);
            prop_assert!((dot(&d, &a) - t.sin()).abs() < 1e-12);
        }
    }
}

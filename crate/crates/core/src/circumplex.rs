// SPDX-License-Identifier: MIT OR Apache-2.0

//! Circle fits and angular layout of emotion projections in the VA plane.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, VassError};
use crate::numerics::{mean, std_population, std_sample};

/// Circularity reported for (numerically) zero spread of center distances.
pub const CIRCULARITY_CAP: f64 = 1e9;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NrmseNorm {
    /// `rmse / radius`.
    #[default]
    Radius,
    /// `rmse / mean center distance`.
    MeanDistance,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StdConvention {
    #[default]
    Population,
    Sample,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircleOptions {
    /// Follow the algebraic fit with geometric Gauss–Newton iterations.
    pub refine: bool,
    pub nrmse: NrmseNorm,
    pub std: StdConvention,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleFit {
    pub center: (f64, f64),
    pub radius: f64,
    pub rmse: f64,
    pub nrmse: f64,
    pub circularity: f64,
}

fn distances(points: &[(f64, f64)], center: (f64, f64)) -> Vec<f64> {
    points
        .iter()
        .map(|&(x, y)| (x - center.0).hypot(y - center.1))
        .collect()
}

/// Kåsa fit: least squares for `x² + y² + ax + by + c = 0`.
///
/// Points are centred and scaled to unit RMS spread before solving, and the
/// solution is mapped back.
fn kasa(points: &[(f64, f64)]) -> Result<((f64, f64), f64)> {
    let n = points.len();
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let s = (points
        .iter()
        .map(|&(x, y)| (x - mx).powi(2) + (y - my).powi(2))
        .sum::<f64>()
        / n as f64)
        .sqrt();
    if !(s > 0.0) || !s.is_finite() {
        return Err(VassError::Singular("all points coincide".into()));
    }
    let mut a = DMatrix::zeros(n, 3);
    let mut rhs = DVector::zeros(n);
    for (i, &(x, y)) in points.iter().enumerate() {
        let (u, v) = ((x - mx) / s, (y - my) / s);
        a[(i, 0)] = u;
        a[(i, 1)] = v;
        a[(i, 2)] = 1.0;
        rhs[i] = -(u * u + v * v);
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax) {
        return Err(VassError::Singular("points are collinear".into()));
    }
    let sol = svd
        .solve(&rhs, 0.0)
        .map_err(|e| VassError::Singular(e.to_string()))?;
    let (cu, cv) = (-sol[0] / 2.0, -sol[1] / 2.0);
    let r2 = cu * cu + cv * cv - sol[2];
    if !(r2 > 0.0) {
        return Err(VassError::Singular("non-positive squared radius".into()));
    }
    Ok(((mx + s * cu, my + s * cv), s * r2.sqrt()))
}

/// Gauss–Newton on `Σ (‖p_i − c‖ − r)²`, starting from `center`.
fn refine_geometric(points: &[(f64, f64)], mut center: (f64, f64)) -> ((f64, f64), f64) {
    for _ in 0..100 {
        let d = distances(points, center);
        let r = mean(&d);
        let mut jtj = nalgebra::Matrix2::zeros();
        let mut jtr = nalgebra::Vector2::zeros();
        // With r eliminated, the residual d_i − mean(d) has Jacobian rows
        // g_i − mean(g), g_i = −(p_i − c)/d_i.
        let g: Vec<(f64, f64)> = points
            .iter()
            .zip(&d)
            .map(|(&(x, y), &di)| (-(x - center.0) / di, -(y - center.1) / di))
            .collect();
        let gx = g.iter().map(|v| v.0).sum::<f64>() / g.len() as f64;
        let gy = g.iter().map(|v| v.1).sum::<f64>() / g.len() as f64;
        for (gi, di) in g.iter().zip(&d) {
            let j = nalgebra::Vector2::new(gi.0 - gx, gi.1 - gy);
            jtj += j * j.transpose();
            jtr += j * (di - r);
        }
        let Some(step) = jtj.lu().solve(&-jtr) else {
            break;
        };
        center = (center.0 + step[0], center.1 + step[1]);
        if step.norm() <= 1e-15 * (1.0 + r) {
            break;
        }
    }
    let r = mean(&distances(points, center));
    (center, r)
}

/// Mean over spread of center distances, capped at [`CIRCULARITY_CAP`].
pub fn circularity_of(distances: &[f64], std: StdConvention) -> f64 {
    let m = mean(distances);
    let s = match std {
        StdConvention::Population => std_population(distances),
        StdConvention::Sample => std_sample(distances),
    };
    if s < 1e-12 * m {
        CIRCULARITY_CAP
    } else {
        (m / s).min(CIRCULARITY_CAP)
    }
}

/// Circularity of `points` about a fitted center.
pub fn circularity(points: &[(f64, f64)], fit: &CircleFit, std: StdConvention) -> f64 {
    circularity_of(&distances(points, fit.center), std)
}

pub fn fit_circle(points: &[(f64, f64)]) -> Result<CircleFit> {
    fit_circle_with(points, CircleOptions::default())
}

pub fn fit_circle_with(points: &[(f64, f64)], options: CircleOptions) -> Result<CircleFit> {
    if points.len() < 3 {
        return Err(VassError::InvalidArgument(format!(
            "circle fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(VassError::InvalidData("non-finite point".into()));
    }
    let (mut center, mut radius) = kasa(points)?;
    if options.refine {
        (center, radius) = refine_geometric(points, center);
    }
    let d = distances(points, center);
    let rmse = (d.iter().map(|di| (di - radius).powi(2)).sum::<f64>() / d.len() as f64).sqrt();
    let denom = match options.nrmse {
        NrmseNorm::Radius => radius,
        NrmseNorm::MeanDistance => mean(&d),
    };
    Ok(CircleFit {
        center,
        radius,
        rmse,
        nrmse: rmse / denom,
        circularity: circularity_of(&d, options.std),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutEntry {
    pub label: String,
    pub valence: f64,
    pub arousal: f64,
    /// Degrees in `[0, 360)` about the fitted center, counterclockwise from +valence.
    pub angle_deg: f64,
    pub center_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircumplexLayout {
    pub entries: Vec<LayoutEntry>,
}

/// Angle of `(dx, dy)` in `[0, 360)`.
pub fn angle_deg(dx: f64, dy: f64) -> f64 {
    let a = dy.atan2(dx).to_degrees();
    let a = if a < 0.0 { a + 360.0 } else { a };
    if a >= 360.0 {
        0.0
    } else {
        a
    }
}

pub fn layout(labels: &[String], points: &[(f64, f64)], fit: &CircleFit) -> Result<CircumplexLayout> {
    if labels.len() != points.len() {
        return Err(VassError::DimensionMismatch {
            expected: labels.len(),
            got: points.len(),
        });
    }
    let entries = labels
        .iter()
        .zip(points)
        .map(|(label, &(v, a))| {
            let (dx, dy) = (v - fit.center.0, a - fit.center.1);
            LayoutEntry {
                label: label.clone(),
                valence: v,
                arousal: a,
                angle_deg: angle_deg(dx, dy),
                center_distance: dx.hypot(dy),
            }
        })
        .collect();
    Ok(CircumplexLayout { entries })
}

/// CSV `label,valence,arousal,angle_deg,center_distance`.
pub fn layout_csv(layout: &CircumplexLayout) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["label", "valence", "arousal", "angle_deg", "center_distance"])?;
    for e in &layout.entries {
        w.write_record([
            e.label.clone(),
            e.valence.to_string(),
            e.arousal.to_string(),
            e.angle_deg.to_string(),
            e.center_distance.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| VassError::Io(e.into_error()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn noisy_circle(seed: u64, n: usize, r: f64, sigma: f64, c: (f64, f64)) -> Vec<(f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let th = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                let rr = r + sigma * rng.sample::<f64, _>(StandardNormal);
                (c.0 + rr * th.cos(), c.1 + rr * th.sin())
            })
            .collect()
    }

    #[test]
    fn four_point_unit_circle() {
        let f = fit_circle(&[(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)]).unwrap();
        assert!(f.center.0.abs() < 1e-12 && f.center.1.abs() < 1e-12);
        assert!((f.radius - 1.0).abs() < 1e-12);
        assert!(f.rmse < 1e-12);
        assert_eq!(f.circularity, CIRCULARITY_CAP);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(
            fit_circle(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]),
            Err(VassError::Singular(_))
        ));
        assert!(fit_circle(&[(0.0, 0.0), (1.0, 1.0)]).is_err());
    }

    #[test]
    fn nrmse_is_rmse_over_radius() {
        let pts = noisy_circle(3, 27, 2.0, 0.1, (0.5, -0.2));
        let f = fit_circle(&pts).unwrap();
        assert!((f.nrmse - f.rmse / f.radius).abs() < 1e-12);
        assert_eq!(f.circularity, circularity(&pts, &f, StdConvention::Population));
    }

    #[test]
    fn refinement_reaches_geometric_stationary_point() {
        let pts = noisy_circle(4, 27, 1.0, 0.05, (0.0, 0.0));
        let f = fit_circle_with(&pts, CircleOptions { refine: true, ..Default::default() }).unwrap();
        // Gradient of Σ(d_i − r)² in the center vanishes at the optimum.
        let d = distances(&pts, f.center);
        let (mut gx, mut gy) = (0.0, 0.0);
        for (&(x, y), di) in pts.iter().zip(&d) {
            gx += (di - f.radius) * (f.center.0 - x) / di;
            gy += (di - f.radius) * (f.center.1 - y) / di;
        }
        assert!(gx.abs() < 1e-12 && gy.abs() < 1e-12);
        assert!((f.radius - mean(&d)).abs() < 1e-15);
    }

    #[test]
    fn layout_angles() {
        let fit = CircleFit { center: (0.0, 0.0), radius: 2.0, rmse: 0.0, nrmse: 0.0, circularity: CIRCULARITY_CAP };
        let labels: Vec<String> = ["a", "b", "c", "d"].map(String::from).to_vec();
        let l = layout(&labels, &[(2.0, 0.0), (0.0, 2.0), (-2.0, 0.0), (0.0, -2.0)], &fit).unwrap();
        let angles: Vec<f64> = l.entries.iter().map(|e| e.angle_deg).collect();
        assert_eq!(angles, vec![0.0, 90.0, 180.0, 270.0]);
        assert_eq!(l.entries[1].center_distance, 2.0);
        assert_eq!(angle_deg(1.0, -1e-300), 0.0);
    }

    #[test]
    fn planted_angles_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 27;
        let truth: Vec<f64> = (0..n).map(|i| 360.0 * i as f64 / n as f64).collect();
        let pts: Vec<(f64, f64)> = truth
            .iter()
            .map(|t| {
                let r = 1.0 + 0.02 * rng.sample::<f64, _>(StandardNormal);
                (0.3 + r * t.to_radians().cos(), -0.1 + r * t.to_radians().sin())
            })
            .collect();
        let fit = fit_circle(&pts).unwrap();
        let labels: Vec<String> = (0..n).map(|i| i.to_string()).collect();
        let l = layout(&labels, &pts, &fit).unwrap();
        let mae = l
            .entries
            .iter()
            .zip(&truth)
            .map(|(e, t)| {
                let d = (e.angle_deg - t).rem_euclid(360.0);
                d.min(360.0 - d)
            })
            .sum::<f64>()
            / n as f64;
        assert!(mae < 5.0, "{mae}");
    }

    proptest! {
        #[test]
        fn equivariance(seed in 0u64..1000, tx in -10.0f64..10.0, ty in -10.0f64..10.0, s in 0.1f64..10.0) {
            let pts = noisy_circle(seed, 15, 1.0, 0.1, (0.0, 0.0));
            let f = fit_circle(&pts).unwrap();
            let moved: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (x + tx, y + ty)).collect();
            let g = fit_circle(&moved).unwrap();
            prop_assert!((g.center.0 - f.center.0 - tx).abs() < 1e-9);
            prop_assert!((g.center.1 - f.center.1 - ty).abs() < 1e-9);
            prop_assert!((g.radius - f.radius).abs() < 1e-9);
            let scaled: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (s * x, s * y)).collect();
            let h = fit_circle(&scaled).unwrap();
            prop_assert!((h.radius - s * f.radius).abs() < 1e-9 * s);
            prop_assert!((h.rmse - s * f.rmse).abs() < 1e-9 * s);
            prop_assert!((h.nrmse - f.nrmse).abs() < 1e-9);
            prop_assert!((h.circularity - f.circularity).abs() < 1e-9 * f.circularity);
        }

        #[test]
        fn circularity_permutation_invariant(seed in 0u64..1000, rot in 0usize..15) {
            let pts = noisy_circle(seed, 15, 1.0, 0.1, (0.2, 0.0));
            let f = fit_circle(&pts).unwrap();
            let mut p2 = pts.clone();
            p2.rotate_left(rot);
            p2.reverse();
            let c1 = circularity(&pts, &f, StdConvention::Population);
            let c2 = circularity(&p2, &f, StdConvention::Population);
            prop_assert!((c1 - c2).abs() <= 1e-12 * c1);
        }
    }
}

// SPDX-License-Identifier: MIT OR Apache-2.0

//! Random direction pairs that control for steering magnitude.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::LayerPlane;
use crate::error::{Result, VassError};
use crate::numerics::{dot, norm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlCategory {
    InPlane,
    OrthogonalToPlane,
    FullyRandom,
}

impl ControlCategory {
    pub const ALL: [Self; 3] = [Self::InPlane, Self::OrthogonalToPlane, Self::FullyRandom];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::InPlane => "in_plane",
            Self::OrthogonalToPlane => "orthogonal_to_plane",
            Self::FullyRandom => "fully_random",
        }
    }

    fn stream(self) -> u64 {
        match self {
            Self::InPlane => 1,
            Self::OrthogonalToPlane => 2,
            Self::FullyRandom => 3,
        }
    }
}

/// One orthonormal pair per layer, standing in for the (valence, arousal)
/// pair of the fitted axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlDirectionSet {
    pub category: ControlCategory,
    pub seed: u64,
    pub pairs: Vec<LayerPlane>,
}

fn gaussian(rng: &mut ChaCha8Rng, h: usize) -> Vec<f64> {
    (0..h).map(|_| StandardNormal.sample(rng)).collect()
}

/// Removes the components along `basis` (twice, for stability) and
/// normalizes.
fn orthonormalize_against(mut v: Vec<f64>, basis: &[&[f64]]) -> Option<Vec<f64>> {
    for _ in 0..2 {
        for b in basis {
            let p = dot(&v, b);
            v.iter_mut().zip(*b).for_each(|(x, y)| *x -= p * y);
        }
    }
    let n = norm(&v);
    (n > 1e-6).then(|| v.into_iter().map(|x| x / n).collect())
}

fn random_pair(rng: &mut ChaCha8Rng, h: usize, exclude: &[&[f64]]) -> (Vec<f64>, Vec<f64>) {
    loop {
        let Some(p) = orthonormalize_against(gaussian(rng, h), exclude) else {
            continue;
        };
        let mut with_p: Vec<&[f64]> = exclude.to_vec();
        with_p.push(&p);
        if let Some(q) = orthonormalize_against(gaussian(rng, h), &with_p) {
            return (p, q);
        }
    }
}

fn control_pair(category: ControlCategory, plane: &LayerPlane, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let h = plane.hidden();
    match category {
        ControlCategory::InPlane => {
            let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let (s, c) = phi.sin_cos();
            let p = plane.v_dir.iter().zip(&plane.a_dir).map(|(v, a)| c * v + s * a).collect();
            let q = plane.v_dir.iter().zip(&plane.a_dir).map(|(v, a)| -s * v + c * a).collect();
            (p, q)
        }
        ControlCategory::OrthogonalToPlane => random_pair(rng, h, &[&plane.v_dir, &plane.a_dir]),
        ControlCategory::FullyRandom => random_pair(rng, h, &[]),
    }
}

/// Three categories × `n_seeds` seeds, seeds `seed..seed + n_seeds`.
pub fn make_controls(planes: &[LayerPlane], seed: u64, n_seeds: usize) -> Result<Vec<ControlDirectionSet>> {
    let h = planes
        .first()
        .ok_or_else(|| VassError::InvalidArgument("no layers to build controls for".into()))?
        .hidden();
    if h <= 4 {
        return Err(VassError::InvalidArgument(format!(
            "hidden size {h} too small for orthogonal control pairs"
        )));
    }
    let mut out = Vec::with_capacity(3 * n_seeds);
    for category in ControlCategory::ALL {
        for s in 0..n_seeds as u64 {
            let set_seed = seed.wrapping_add(s);
            let mut rng = ChaCha8Rng::seed_from_u64(set_seed);
            rng.set_stream(category.stream());
            let pairs = planes
                .iter()
                .map(|plane| {
                    let (p, q) = control_pair(category, plane, &mut rng);
                    LayerPlane::new(plane.layer, p, q)
                })
                .collect::<Result<Vec<_>>>()?;
            out.push(ControlDirectionSet {
                category,
                seed: set_seed,
                pairs,
            });
        }
    }
    Ok(out)
}

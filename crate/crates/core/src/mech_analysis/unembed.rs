// SPDX-License-Identifier: MIT OR Apache-2.0

//! Valence/arousal coordinates of the role tokens' unembedding rows.

use serde::{Deserialize, Serialize};

use crate::circumplex::angle_deg;
use crate::error::{Result, VassError};
use crate::numerics::{dot, DenseMatrix};
use crate::steering_engine::LayerPlane;
use crate::toy_model::{Roles, TokenRole, Vocab};

/// How `difference_angle_deg` is measured.
pub const ANGLE_ORIENTATION: &str = "compliance_minus_refusal_ccw_from_pos_valence";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    /// Subtract the mean of the tracked rows before projecting.
    #[default]
    TrackedMean,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenProjection {
    pub token: u32,
    pub text: String,
    pub valence: f64,
    pub arousal: f64,
    pub role: TokenRole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenGroupProjection {
    pub tokens: Vec<TokenProjection>,
    pub refusal_mean: (f64, f64),
    pub compliance_mean: (f64, f64),
    pub difference_angle_deg: f64,
    pub orientation: String,
    pub centering: Centering,
}

impl TokenGroupProjection {
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["token", "valence", "arousal", "role"])?;
        for t in &self.tokens {
            w.write_record([
                t.text.clone(),
                t.valence.to_string(),
                t.arousal.to_string(),
                t.role.as_str().to_string(),
            ])?;
        }
        w.into_inner().map_err(|e| VassError::Io(e.into_error()))
    }
}

fn mean_pair(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let (sv, sa) = points.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    (sv / n, sa / n)
}

pub fn project_unembeddings(
    unembedding: &DenseMatrix,
    vocab: &Vocab,
    plane: &LayerPlane,
    roles: &Roles,
    centering: Centering,
) -> Result<TokenGroupProjection> {
    if roles.refusal.is_empty() || roles.compliance.is_empty() {
        return Err(VassError::InvalidArgument("both role groups must be non-empty".into()));
    }
    if unembedding.cols() != plane.hidden() {
        return Err(VassError::DimensionMismatch {
            expected: unembedding.cols(),
            got: plane.hidden(),
        });
    }
    let tracked = roles.all();
    if let Some(t) = tracked.iter().find(|&&t| t as usize >= unembedding.rows()) {
        return Err(VassError::InvalidArgument(format!("role token {t} outside the unembedding")));
    }
    let h = unembedding.cols();
    let center = match centering {
        Centering::None => vec![0.0; h],
        Centering::TrackedMean => {
            let mut c = vec![0.0; h];
            for &t in &tracked {
                c.iter_mut().zip(unembedding.row(t as usize)).for_each(|(a, b)| *a += b);
            }
            c.iter_mut().for_each(|a| *a /= tracked.len() as f64);
            c
        }
    };
    let tokens: Vec<TokenProjection> = tracked
        .iter()
        .map(|&t| {
            let row: Vec<f64> = unembedding.row(t as usize).iter().zip(&center).map(|(a, b)| a - b).collect();
            TokenProjection {
                token: t,
                text: vocab.render_token(t),
                valence: dot(&row, &plane.v_dir),
                arousal: dot(&row, &plane.a_dir),
                role: roles.role(t),
            }
        })
        .collect();
    let group = |role: TokenRole| -> Vec<(f64, f64)> {
        tokens
            .iter()
            .filter(|t| t.role == role)
            .map(|t| (t.valence, t.arousal))
            .collect()
    };
    let refusal_mean = mean_pair(&group(TokenRole::RefusalMarker));
    let compliance_mean = mean_pair(&group(TokenRole::ComplianceMarker));
    Ok(TokenGroupProjection {
        difference_angle_deg: angle_deg(compliance_mean.0 - refusal_mean.0, compliance_mean.1 - refusal_mean.1),
        tokens,
        refusal_mean,
        compliance_mean,
        orientation: ANGLE_ORIENTATION.to_string(),
        centering,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy_model::{build_analytic, random_plane, role_markers, AnalyticSpec, ToyConfig};

    fn model_with(coords: impl Fn(bool) -> (f64, f64)) -> (crate::toy_model::ToyModel, LayerPlane) {
        let (v, a) = random_plane(64, 2);
        let mut s = AnalyticSpec::new(ToyConfig::default(), v.clone(), a.clone()).unwrap();
        let roles = Roles::standard();
        s.markers = role_markers(&roles, |t| coords(roles.refusal.contains(&t)), 4.0);
        let (m, _) = build_analytic(&s).unwrap();
        (m, LayerPlane::new(3, v, a).unwrap())
    }

    #[test]
    fn prescriptions_recovered_without_centering() {
        let (m, plane) = model_with(|r| if r { (-0.5, -1.5) } else { (1.0, 0.25) });
        let p = project_unembeddings(&m.weights().unembedding, m.vocab(), &plane, &Roles::standard(), Centering::None)
            .unwrap();
        assert!((p.refusal_mean.0 + 0.5).abs() < 1e-6 && (p.refusal_mean.1 + 1.5).abs() < 1e-6);
        assert!((p.compliance_mean.0 - 1.0).abs() < 1e-6);
        assert_eq!(p.tokens.len(), 21);
        assert_eq!(p.tokens[0].text, "I can't");
    }

    #[test]
    fn opposite_groups_on_valence_give_zero_degrees() {
        let (m, plane) = model_with(|r| if r { (-1.0, 0.0) } else { (1.0, 0.0) });
        let p = project_unembeddings(
            &m.weights().unembedding,
            m.vocab(),
            &plane,
            &Roles::standard(),
            Centering::TrackedMean,
        )
        .unwrap();
        assert!(p.difference_angle_deg < 1e-4 || p.difference_angle_deg > 360.0 - 1e-4);
        let csv = String::from_utf8(p.to_csv().unwrap()).unwrap();
        assert!(csv.starts_with("token,valence,arousal,role\nI can't,"));
    }
}

// SPDX-License-Identifier: MIT OR Apache-2.0

//! Valence/arousal axes fitted as ridge combinations of the principal
//! components of an emotion vector set.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus_store::{LexiconEntry, RatingSource, RatingTable, TensorDump, NEUTRAL_LABEL};
use crate::error::{Result, VassError};
use crate::numerics::{
    cosine, dot, norm, orthonormalize_pair, pca, pearson, ridge, scale,
    spearman, std_population, sub, DenseMatrix, PcaModel,
};
use crate::steering_vectors::{
    activation_tensor_name, class_mean, grand_mean_from_dump, ActivationBatch, EmotionVectorSet,
    POST_BLOCK_SITE,
};

pub const DEFAULT_K: usize = 10;
pub const DEFAULT_LAMBDA: f64 = 1.0;
/// Raw directions with `|cos|` at or above this are treated as parallel.
pub const DEGENERATE_COSINE: f64 = 1.0 - 1e-6;

/// Which mean the projection centre `μ` is.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuMode {
    /// Mean of every captured activation, emotion and neutral.
    #[default]
    GrandMean,
    NeutralMean,
    /// Mean of the emotion vectors themselves.
    VectorMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub k: usize,
    pub lambda: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            lambda: DEFAULT_LAMBDA,
        }
    }
}

/// Fitted, orthonormal valence/arousal axes for one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VAAxes {
    pub layer: usize,
    pub labels: Vec<String>,
    pub mu_center: Vec<f64>,
    pub v_dir: Vec<f64>,
    pub a_dir: Vec<f64>,
    pub beta_v: Vec<f64>,
    pub beta_a: Vec<f64>,
    pub k: usize,
    pub lambda: f64,
    pub recovery_r_v: f64,
    pub recovery_r_a: f64,
    pub supervision: RatingSource,
    /// `H×k` PCA loadings the axes were built from.
    pub components: DenseMatrix,
    pub capture_site: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VAProjection {
    pub valence: f64,
    pub arousal: f64,
}

impl VAAxes {
    pub fn hidden(&self) -> usize {
        self.v_dir.len()
    }

    /// Checks unit norms, orthogonality and membership in the PCA span.
    pub fn check_invariants(&self) -> Result<()> {
        let fail = |m: String| Err(VassError::InvalidData(m));
        for (name, d) in [("v_dir", &self.v_dir), ("a_dir", &self.a_dir)] {
            if (norm(d) - 1.0).abs() > 1e-10 {
                return fail(format!("{name} has norm {}", norm(d)));
            }
            let coeffs = self.components.transpose().matvec(d)?;
            let back = self.components.matvec(&coeffs)?;
            let off = norm(&sub(d, &back));
            if off > 1e-8 {
                return fail(format!("{name} leaves the component span by {off:e}"));
            }
        }
        let c = dot(&self.v_dir, &self.a_dir);
        if c.abs() > 1e-10 {
            return fail(format!("axes not orthogonal: dot {c:e}"));
        }
        Ok(())
    }
}

/// `((h − μ)·v_dir, (h − μ)·a_dir)`.
pub fn project(h: &[f64], axes: &VAAxes) -> Result<VAProjection> {
    if h.len() != axes.hidden() {
        return Err(VassError::DimensionMismatch {
            expected: axes.hidden(),
            got: h.len(),
        });
    }
    let d = sub(h, &axes.mu_center);
    Ok(VAProjection {
        valence: dot(&d, &axes.v_dir),
        arousal: dot(&d, &axes.a_dir),
    })
}

pub fn project_rows(rows: &DenseMatrix, axes: &VAAxes) -> Result<Vec<VAProjection>> {
    rows.row_iter().map(|r| project(r, axes)).collect()
}

fn require_variance(y: &[f64], what: &str) -> Result<()> {
    if std_population(y) == 0.0 {
        return Err(VassError::UndefinedCorrelation(format!(
            "{what} ratings have zero variance"
        )));
    }
    Ok(())
}

fn check_k(k: usize, n_labels: usize) -> Result<()> {
    if k < 2 || k + 1 > n_labels {
        return Err(VassError::InvalidArgument(format!(
            "k = {k} outside [2, {}] for {n_labels} labels",
            n_labels.saturating_sub(1)
        )));
    }
    Ok(())
}

/// Fits valence and arousal axes for one layer.
///
/// Valence is fitted first and kept exact; arousal is Gram–Schmidt
/// orthogonalised against it. Each axis is then oriented so the label with
/// the highest rating on that dimension projects positively (projections of
/// the emotion vectors about their own mean).
pub fn fit_va_axes(
    vectors: &EmotionVectorSet,
    ratings: &RatingTable,
    options: FitOptions,
    mu_center: &[f64],
) -> Result<VAAxes> {
    let FitOptions { k, lambda } = options;
    let (y_v, y_a) = ratings.targets(&vectors.labels)?;
    check_k(k, vectors.k())?;
    if mu_center.len() != vectors.hidden() {
        return Err(VassError::DimensionMismatch {
            expected: vectors.hidden(),
            got: mu_center.len(),
        });
    }
    require_variance(&y_v, "valence")?;
    require_variance(&y_a, "arousal")?;

    let model = pca(&vectors.matrix, k)?;
    let fit_v = ridge(&model.scores, &y_v, lambda)?;
    let fit_a = ridge(&model.scores, &y_a, lambda)?;
    let raw_v = model.combine(&fit_v.coefficients)?;
    let raw_a = model.combine(&fit_a.coefficients)?;
    if norm(&raw_v) == 0.0 || norm(&raw_a) == 0.0 {
        return Err(VassError::DegenerateAxes { cosine: f64::NAN });
    }
    let raw_cos = cosine(&raw_v, &raw_a)?;
    if raw_cos.abs() >= DEGENERATE_COSINE {
        return Err(VassError::DegenerateAxes { cosine: raw_cos });
    }
    let (mut v_dir, mut a_dir) = orthonormalize_pair(&raw_v, &raw_a)?;
    let mut beta_v = fit_v.coefficients;
    let mut beta_a = fit_a.coefficients;

    let centred = |d: &[f64]| -> Result<Vec<f64>> { model.scores.matvec(&model.components.transpose().matvec(d)?) };
    let argmax = |y: &[f64]| {
        (0..y.len())
            .max_by(|&i, &j| y[i].total_cmp(&y[j]).then(j.cmp(&i)))
            .expect("non-empty")
    };
    if centred(&v_dir)?[argmax(&y_v)] < 0.0 {
        v_dir = scale(&v_dir, -1.0);
        beta_v = scale(&beta_v, -1.0);
    }
    if centred(&a_dir)?[argmax(&y_a)] < 0.0 {
        a_dir = scale(&a_dir, -1.0);
        beta_a = scale(&beta_a, -1.0);
    }

    let proj_v = vectors.matrix.matvec(&v_dir)?;
    let proj_a = vectors.matrix.matvec(&a_dir)?;
    let axes = VAAxes {
        layer: vectors.layer,
        labels: vectors.labels.clone(),
        mu_center: mu_center.to_vec(),
        recovery_r_v: pearson(&proj_v, &y_v)?,
        recovery_r_a: pearson(&proj_a, &y_a)?,
        v_dir,
        a_dir,
        beta_v,
        beta_a,
        k,
        lambda,
        supervision: ratings.source,
        components: model.components,
        capture_site: POST_BLOCK_SITE.to_string(),
    };
    axes.check_invariants()?;
    Ok(axes)
}

/// Same fit under human-norm supervision.
pub fn refit_with_human_norms(
    vectors: &EmotionVectorSet,
    human: &RatingTable,
    options: FitOptions,
    mu_center: &[f64],
) -> Result<VAAxes> {
    if human.source != RatingSource::HumanNorms {
        return Err(VassError::InvalidArgument(
            "refit expects a human-norms rating table".into(),
        ));
    }
    fit_va_axes(vectors, human, options, mu_center)
}

/// `(|cos(v, v')|, |cos(a, a')|)`.
pub fn axis_agreement(a: &VAAxes, b: &VAAxes) -> Result<(f64, f64)> {
    Ok((
        cosine(&a.v_dir, &b.v_dir)?.abs(),
        cosine(&a.a_dir, &b.a_dir)?.abs(),
    ))
}

/// The projection centre for `set` under `mode`, using the activations in
/// `dump` where needed.
pub fn resolve_mu(mode: MuMode, set: &EmotionVectorSet, dump: Option<&TensorDump>) -> Result<Vec<f64>> {
    match mode {
        MuMode::VectorMean => {
            let k = set.k() as f64;
            let mut mu = vec![0.0; set.hidden()];
            for row in set.matrix.row_iter() {
                mu.iter_mut().zip(row).for_each(|(m, v)| *m += v / k);
            }
            Ok(mu)
        }
        MuMode::GrandMean => {
            let dump = dump.ok_or_else(|| VassError::NotFound("activation dump for grand mean".into()))?;
            grand_mean_from_dump(dump, set.layer)
        }
        MuMode::NeutralMean => {
            let dump = dump.ok_or_else(|| VassError::NotFound("activation dump for neutral mean".into()))?;
            let t = dump.require(&activation_tensor_name(set.layer, NEUTRAL_LABEL))?;
            class_mean(&ActivationBatch {
                layer: set.layer,
                class_label: NEUTRAL_LABEL.into(),
                matrix: t.to_matrix()?,
            })
        }
    }
}

/// Recovery diagnostics for one layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryRow {
    pub layer: usize,
    pub r_v: f64,
    pub r_a: f64,
    pub single_pc_r_v: f64,
    pub single_pc_r_a: f64,
}

/// Largest `|pearson|` between one PC score column and `y`.
fn best_single_pc(model: &PcaModel, y: &[f64]) -> f64 {
    (0..model.k())
        .filter_map(|j| pearson(&model.scores.column(j), y).ok())
        .map(f64::abs)
        .fold(0.0, f64::max)
}

/// Per-layer recovery; a failing layer yields its error and the rest continue.
pub fn recovery_curve(
    sets: &[EmotionVectorSet],
    ratings: &RatingTable,
    options: FitOptions,
) -> Vec<Result<RecoveryRow>> {
    sets.par_iter()
        .map(|set| {
            let mu = vec![0.0; set.hidden()];
            let axes = fit_va_axes(set, ratings, options, &mu)?;
            let (y_v, y_a) = ratings.targets(&set.labels)?;
            let model = pca(&set.matrix, options.k)?;
            Ok(RecoveryRow {
                layer: set.layer,
                r_v: axes.recovery_r_v,
                r_a: axes.recovery_r_a,
                single_pc_r_v: best_single_pc(&model, &y_v),
                single_pc_r_a: best_single_pc(&model, &y_a),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LexiconValidation {
    pub pearson_v: f64,
    pub spearman_v: f64,
    pub pearson_a: f64,
    pub spearman_a: f64,
    pub n: usize,
}

/// Correlates word projections with lexicon norms; rows of `activations`
/// are aligned with `norms`.
pub fn lexicon_validation(
    axes: &VAAxes,
    activations: &DenseMatrix,
    norms: &[LexiconEntry],
) -> Result<LexiconValidation> {
    if activations.rows() != norms.len() {
        return Err(VassError::DimensionMismatch {
            expected: norms.len(),
            got: activations.rows(),
        });
    }
    if norms.len() < 3 {
        return Err(VassError::InvalidArgument(format!(
            "lexicon validation needs n >= 3, got {}",
            norms.len()
        )));
    }
    let proj = project_rows(activations, axes)?;
    let pv: Vec<f64> = proj.iter().map(|p| p.valence).collect();
    let pa: Vec<f64> = proj.iter().map(|p| p.arousal).collect();
    let nv: Vec<f64> = norms.iter().map(|e| e.valence).collect();
    let na: Vec<f64> = norms.iter().map(|e| e.arousal).collect();
    Ok(LexiconValidation {
        pearson_v: pearson(&pv, &nv)?,
        spearman_v: spearman(&pv, &nv)?,
        pearson_a: pearson(&pa, &na)?,
        spearman_a: spearman(&pa, &na)?,
        n: norms.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus_store::EmotionRating;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    /// K labels on a circle in a random plane of R^H; ratings are the
    /// planted coordinates.
    fn planted(seed: u64, k: usize, h: usize, noise: f64) -> (EmotionVectorSet, RatingTable, Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = |n: usize| (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect::<Vec<f64>>();
        let (p1, p2) = orthonormalize_pair(&g(h), &g(h)).unwrap();
        let mut data = Vec::new();
        let mut entries = Vec::new();
        let labels: Vec<String> = (0..k).map(|i| format!("e{i}")).collect();
        for (i, l) in labels.iter().enumerate() {
            let th = 2.0 * std::f64::consts::PI * i as f64 / k as f64;
            let (c, s) = (th.cos(), th.sin());
            let n = g(h);
            data.extend((0..h).map(|j| c * p1[j] + s * p2[j] + noise * n[j]));
            entries.push((l.clone(), EmotionRating { valence: c, arousal: s }));
        }
        let set = EmotionVectorSet {
            layer: 0,
            labels,
            matrix: DenseMatrix::new(k, h, data).unwrap(),
            sample_counts: Default::default(),
            neutral_count: 0,
        };
        let table = RatingTable::from_entries(RatingSource::HumanNorms, entries).unwrap();
        (set, table, p1, p2)
    }

    #[test]
    fn planted_plane_is_recovered() {
        let (set, table, p1, p2) = planted(1, 27, 64, 0.01);
        let axes = fit_va_axes(&set, &table, FitOptions::default(), &vec![0.0; 64]).unwrap();
        assert!(axes.recovery_r_v >= 0.99 && axes.recovery_r_a >= 0.99);
        assert!(cosine(&axes.v_dir, &p1).unwrap().abs() >= 0.95);
        assert!(cosine(&axes.a_dir, &p2).unwrap().abs() >= 0.95);
        // Highest-valence label is e0 at angle 0.
        assert!(project(set.matrix.row(0), &axes).unwrap().valence > 0.0);
    }

    #[test]
    fn projection_examples() {
        let (set, table, _, _) = planted(2, 12, 16, 0.0);
        let mu: Vec<f64> = (0..16).map(|i| i as f64 * 0.1).collect();
        let axes = fit_va_axes(&set, &table, FitOptions { k: 4, lambda: 0.5 }, &mu).unwrap();
        let p = project(&mu, &axes).unwrap();
        assert_eq!((p.valence, p.arousal), (0.0, 0.0));
        let h: Vec<f64> = (0..16)
            .map(|i| mu[i] + 0.5 * axes.v_dir[i] + 0.25 * axes.a_dir[i])
            .collect();
        let p = project(&h, &axes).unwrap();
        assert!((p.valence - 0.5).abs() < 1e-12 && (p.arousal - 0.25).abs() < 1e-12);
        assert!(project(&[0.0; 3], &axes).is_err());
    }

    #[test]
    fn constant_ratings_are_undefined() {
        let (set, _, _, _) = planted(3, 6, 8, 0.0);
        let flat = RatingTable::from_entries(
            RatingSource::HumanNorms,
            set.labels.iter().map(|l| (l.clone(), EmotionRating { valence: 0.3, arousal: 0.3 })),
        )
        .unwrap();
        assert!(matches!(
            fit_va_axes(&set, &flat, FitOptions { k: 3, lambda: 1.0 }, &[0.0; 8]),
            Err(VassError::UndefinedCorrelation(_))
        ));
    }

    #[test]
    fn missing_rating_lists_labels() {
        let (mut set, table, _, _) = planted(4, 6, 8, 0.0);
        set.labels[2] = "mystery".into();
        match fit_va_axes(&set, &table, FitOptions { k: 3, lambda: 1.0 }, &[0.0; 8]) {
            Err(VassError::MissingRatings(l)) => assert_eq!(l, vec!["mystery"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn k_bounds() {
        let (set, table, _, _) = planted(5, 6, 8, 0.0);
        for k in [1, 6] {
            assert!(fit_va_axes(&set, &table, FitOptions { k, lambda: 1.0 }, &[0.0; 8]).is_err());
        }
    }

    #[test]
    fn parallel_targets_are_degenerate() {
        let (set, _, _, _) = planted(6, 8, 8, 0.05);
        let same = RatingTable::from_entries(
            RatingSource::HumanNorms,
            set.labels.iter().enumerate().map(|(i, l)| {
                let v = i as f64 / 10.0 - 0.3;
                (l.clone(), EmotionRating { valence: v, arousal: v })
            }),
        )
        .unwrap();
        assert!(matches!(
            fit_va_axes(&set, &same, FitOptions { k: 4, lambda: 1.0 }, &[0.0; 8]),
            Err(VassError::DegenerateAxes { .. })
        ));
    }

    #[test]
    fn identical_supervision_agrees() {
        let (set, table, _, _) = planted(7, 27, 32, 0.02);
        let a = fit_va_axes(&set, &table, FitOptions::default(), &[0.0; 32]).unwrap();
        let b = refit_with_human_norms(&set, &table, FitOptions::default(), &[0.0; 32]).unwrap();
        let (cv, ca) = axis_agreement(&a, &b).unwrap();
        assert_eq!((cv, ca), (1.0, 1.0));
    }

    #[test]
    fn noisy_supervision_copies_agree() {
        let (set, table, _, _) = planted(8, 27, 64, 0.01);
        let mut rng = ChaCha8Rng::seed_from_u64(80);
        let mut noisy = || {
            RatingTable::from_entries(
                RatingSource::HumanNorms,
                table.iter().map(|(l, r)| {
                    let mut j = || rng.random_range(-0.03..0.03);
                    (l.to_string(), EmotionRating {
                        valence: (r.valence + j()).clamp(-1.0, 1.0),
                        arousal: (r.arousal + j()).clamp(-1.0, 1.0),
                    })
                }),
            )
            .unwrap()
        };
        let (t1, t2) = (noisy(), noisy());
        let a = fit_va_axes(&set, &t1, FitOptions::default(), &[0.0; 64]).unwrap();
        let b = fit_va_axes(&set, &t2, FitOptions::default(), &[0.0; 64]).unwrap();
        let (cv, ca) = axis_agreement(&a, &b).unwrap();
        assert!(cv >= 0.98 && ca >= 0.98, "{cv} {ca}");
    }

    #[test]
    fn aligned_plane_single_pc_matches_ridge() {
        // Strong plane anisotropy puts valence on PC1 and arousal on PC2.
        let (mut set, table, _, _) = planted(9, 27, 32, 0.0);
        let (v, _) = table.targets(&set.labels).unwrap();
        let mut data = set.matrix.data().to_vec();
        for (i, row) in data.chunks_mut(32).enumerate() {
            row[0] += 3.0 * v[i];
        }
        set.matrix = DenseMatrix::new(27, 32, data).unwrap();
        let rows = recovery_curve(&[set], &table, FitOptions { k: 5, lambda: 1e-6 });
        let r = rows[0].as_ref().unwrap();
        assert!((r.single_pc_r_v - r.r_v).abs() < 1e-3, "{r:?}");
    }

    #[test]
    fn spread_arousal_beats_single_pc() {
        // Arousal spread over four weaker components.
        let k = 27;
        let h = 16;
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut data = vec![0.0; k * h];
        let mut entries = Vec::new();
        for i in 0..k {
            let row = &mut data[i * h..(i + 1) * h];
            let v = rng.random_range(-1.0..1.0);
            let parts: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            row[0] = 4.0 * v;
            row[1] = 3.0 * rng.random_range(-1.0..1.0);
            for (j, p) in parts.iter().enumerate() {
                row[2 + j] = *p;
            }
            let a = parts.iter().sum::<f64>() / 4.0;
            entries.push((format!("e{i}"), EmotionRating { valence: v, arousal: a }));
        }
        let table = RatingTable::from_entries(RatingSource::HumanNorms, entries).unwrap();
        let set = EmotionVectorSet {
            layer: 3,
            labels: (0..k).map(|i| format!("e{i}")).collect(),
            matrix: DenseMatrix::new(k, h, data).unwrap(),
            sample_counts: Default::default(),
            neutral_count: 0,
        };
        let rows = recovery_curve(&[set], &table, FitOptions { k: 6, lambda: 1e-3 });
        let r = rows[0].as_ref().unwrap();
        assert!(r.single_pc_r_a < r.r_a - 0.1, "{r:?}");
        assert!(r.r_a > 0.99);
    }

    #[test]
    fn lexicon_validation_cases() {
        let (set, table, _, _) = planted(11, 27, 32, 0.01);
        let axes = fit_va_axes(&set, &table, FitOptions::default(), &[0.0; 32]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 200;
        let mut acts = Vec::new();
        let mut norms = Vec::new();
        let mut exact = Vec::new();
        for i in 0..n {
            let (v, a): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let noise: Vec<f64> = (0..32).map(|_| 0.1 * rng.sample::<f64, _>(StandardNormal)).collect();
            let row: Vec<f64> = (0..32)
                .map(|j| v * axes.v_dir[j] + a * axes.a_dir[j] + noise[j])
                .collect();
            let p = project(&row, &axes).unwrap();
            exact.push(LexiconEntry { word: format!("w{i}"), valence: p.valence, arousal: p.arousal });
            norms.push(LexiconEntry { word: format!("w{i}"), valence: v, arousal: a });
            acts.extend(row);
        }
        let acts = DenseMatrix::new(n, 32, acts).unwrap();
        let same = lexicon_validation(&axes, &acts, &exact).unwrap();
        for r in [same.pearson_v, same.spearman_v, same.pearson_a, same.spearman_a] {
            assert!((r - 1.0).abs() < 1e-12);
        }
        let noisy = lexicon_validation(&axes, &acts, &norms).unwrap();
        assert!(noisy.pearson_v >= 0.95, "{noisy:?}");
        assert!(lexicon_validation(&axes, &DenseMatrix::new(2, 32, vec![0.0; 64]).unwrap(), &norms[..2]).is_err());
    }

    #[test]
    fn mu_modes() {
        let (set, _, _, _) = planted(13, 5, 4, 0.0);
        let vm = resolve_mu(MuMode::VectorMean, &set, None).unwrap();
        assert!(vm.iter().all(|v| v.abs() < 1e-12));
        assert!(resolve_mu(MuMode::GrandMean, &set, None).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn translation_invariant_projections(seed in 0u64..500, shift in -5.0f64..5.0) {
            let (set, table, _, _) = planted(seed, 12, 16, 0.05);
            let axes = fit_va_axes(&set, &table, FitOptions { k: 5, lambda: 1.0 }, &[0.0; 16]).unwrap();
            let shifted_data: Vec<f64> = set.matrix.data().iter().map(|v| v + shift).collect();
            let shifted = EmotionVectorSet { matrix: DenseMatrix::new(12, 16, shifted_data).unwrap(), ..set.clone() };
            let axes2 = fit_va_axes(&shifted, &table, FitOptions { k: 5, lambda: 1.0 }, &[shift; 16]).unwrap();
            for i in 0..12 {
                let p = project(set.matrix.row(i), &axes).unwrap();
                let q = project(shifted.matrix.row(i), &axes2).unwrap();
                prop_assert!((p.valence - q.valence).abs() < 1e-9);
                prop_assert!((p.arousal - q.arousal).abs() < 1e-9);
            }
        }

        #[test]
        fn recovery_non_increasing_in_lambda(seed in 0u64..500) {
            let (set, table, _, _) = planted(seed, 14, 12, 0.3);
            let mut prev = f64::INFINITY;
            for lambda in [0.0, 0.01, 0.1, 1.0, 10.0, 100.0] {
                let axes = fit_va_axes(&set, &table, FitOptions { k: 6, lambda }, &[0.0; 12]).unwrap();
                prop_assert!(axes.recovery_r_v <= prev + 1e-12);
                prev = axes.recovery_r_v;
            }
        }

        #[test]
        fn orthonormal_and_in_span(seed in 0u64..500, noise in 0.0f64..0.5) {
            let (set, table, _, _) = planted(seed, 10, 20, noise);
            let axes = fit_va_axes(&set, &table, FitOptions { k: 4, lambda: 1.0 }, &[0.0; 20]).unwrap();
            prop_assert!(axes.check_invariants().is_ok());
        }
    }
}

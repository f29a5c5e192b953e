// SPDX-License-Identifier: MIT OR Apache-2.0

//! Fixture emission and the representation-side stages.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use vass::circumplex::{fit_circle_with, layout, layout_csv, CircleFit};
use vass::corpus_store::{
    bundled_prompts, ingest_labeled_corpus, load_lexicon, read_tensor_dump, single_label_subset,
    write_lexicon, write_prompts_jsonl, write_tokenizer_map, CorpusFormat, RatingSource, RatingTable,
    Tensor, TensorDump, NEUTRAL_LABEL,
};
use vass::numerics::{dot, scale, sub};
use vass::steering_vectors::{
    build_sets_from_dump, lexicon_tensor_name, push_vector_set, vector_sets_from_dump, EmotionVectorSet,
    CAPTURE_SITE_KEY, POST_BLOCK_SITE,
};
use vass::toy_model::{
    ladder_fixture, push_planted_lexicon, refusal_fixture, synth_circumplex_dump, CircumplexOptions,
    ToyConfig, ToyModel,
};
use vass::va_subspace::{fit_va_axes, lexicon_validation, recovery_curve, resolve_mu, FitOptions, VAAxes};

use super::{CliError, CliResult, Run, ToyKind};

/// Fixture file names under `<out>/fixtures`.
pub mod fx {
    pub const ACTIVATIONS: &str = "activations.vatd";
    pub const RATINGS: &str = "ratings.csv";
    pub const LEXICON: &str = "lexicon.csv";
    pub const LADDER_MODEL: &str = "ladder_model.vatd";
    pub const LADDER_LEXICON: &str = "ladder_lexicon.csv";
    pub const REFUSAL_MODEL: &str = "refusal_model.vatd";
    pub const TOKENIZER_MAP: &str = "tokenizer_map.csv";
    pub const BENCHMARK: &str = "refusal.jsonl";
    pub const PROMPTS: &str = "prompts.jsonl";
    pub const CONTRASTIVE: &str = "contrastive.vatd";
}

pub fn contrastive_tensor_name(layer: usize) -> String {
    format!("contrastive/layer{layer}")
}

/// Ground truth of the planted fixtures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedTruth {
    pub v_dir: Vec<f64>,
    pub a_dir: Vec<f64>,
    pub labels: Vec<String>,
    pub thetas_rad: Vec<f64>,
    pub toy_seed: u64,
    pub synth_seed: u64,
}

fn stamp(run: &Run, dump: TensorDump) -> TensorDump {
    dump.with_metadata("config_hash", run.hash.clone())
        .with_metadata("seed", run.cfg.seed.to_string())
}

fn write_dump(run: &mut Run, rel: &str, dump: TensorDump) -> CliResult<()> {
    let bytes = stamp(run, dump).to_bytes()?;
    run.write(rel, &bytes)?;
    Ok(())
}

fn fixture_rel(name: &str) -> String {
    format!("fixtures/{name}")
}

/// Mean last-token state of refusing minus complying prompts, per layer.
fn contrastive_dump(model: &ToyModel, prompts: &[String], refusing: &[bool]) -> CliResult<TensorDump> {
    let layers: Vec<usize> = (0..model.config().layers).collect();
    let h = model.config().hidden;
    let mut sums = vec![(vec![0.0; h], vec![0.0; h]); layers.len()];
    let mut counts = (0usize, 0usize);
    for (p, &r) in prompts.iter().zip(refusing) {
        let out = model.forward(&model.vocab().encode(p), &layers)?;
        for (&l, state) in &out.states {
            let target = if r { &mut sums[l].0 } else { &mut sums[l].1 };
            target.iter_mut().zip(state).for_each(|(a, x)| *a += x);
        }
        if r {
            counts.0 += 1;
        } else {
            counts.1 += 1;
        }
    }
    if counts.0 == 0 || counts.1 == 0 {
        return Err(CliError::Config("contrastive fixture needs both refusing and complying prompts".into()));
    }
    let mut dump = TensorDump::new();
    for (l, (pos, neg)) in sums.iter().enumerate() {
        let d = sub(&scale(pos, 1.0 / counts.0 as f64), &scale(neg, 1.0 / counts.1 as f64));
        dump.push(Tensor::from_vector(contrastive_tensor_name(l), &d));
    }
    Ok(dump)
}

pub fn synth(run: &mut Run) -> CliResult<()> {
    let toy_seed = run.cfg.stream("toy");
    let synth_seed = run.cfg.stream("synth");
    let s = run.cfg.synth.clone();
    let toy = ToyConfig::default();
    let refusal = refusal_fixture(toy_seed)?;
    let ladder = ladder_fixture(toy_seed)?;
    let plane = (refusal.v_dir().to_vec(), refusal.a_dir().to_vec());
    let opts = CircumplexOptions {
        seed: synth_seed,
        k: s.k,
        hidden: toy.hidden,
        n_per_class: s.n_per_class,
        radial_noise: s.radial_noise,
        base_std: s.base_std,
        radius: s.radius,
        plane: Some(plane.clone()),
        paired: false,
    };
    let (mut dump, fixture) = synth_circumplex_dump(&opts, toy.layers)?;
    let lexicon = push_planted_lexicon(&mut dump, &opts, toy.layers, s.lexicon_words, s.lexicon_noise)?;
    write_dump(run, &fixture_rel(fx::ACTIVATIONS), dump)?;

    let path = run.fixture(fx::RATINGS);
    fixture.ratings.write_csv(&path)?;
    run.record(path);
    let path = run.fixture(fx::LEXICON);
    write_lexicon(&lexicon, &path)?;
    run.record(path);
    let path = run.fixture(fx::LADDER_LEXICON);
    write_lexicon(&ladder.lexicon, &path)?;
    run.record(path);
    let path = run.fixture(fx::TOKENIZER_MAP);
    write_tokenizer_map(&refusal.model.vocab().marker_map(), &path)?;
    run.record(path);
    let path = run.fixture(fx::PROMPTS);
    write_prompts_jsonl(&bundled_prompts(), &path)?;
    run.record(path);

    write_dump(run, &fixture_rel(fx::LADDER_MODEL), ladder.model.to_dump()?)?;
    write_dump(run, &fixture_rel(fx::REFUSAL_MODEL), refusal.model.to_dump()?)?;
    let refusing: Vec<bool> = refusal.margins.iter().map(|m| *m > 0.0).collect();
    let contrastive = contrastive_dump(&refusal.model, &refusal.prompts, &refusing)?;
    write_dump(run, &fixture_rel(fx::CONTRASTIVE), contrastive)?;

    let mut bench = String::new();
    for p in &refusal.prompts {
        bench.push_str(&serde_json::json!({ "prompt": p }).to_string());
        bench.push('\n');
    }
    run.write(&fixture_rel(fx::BENCHMARK), bench.as_bytes())?;
    run.artifact(
        &fixture_rel("planted.json"),
        "planted_truth",
        PlantedTruth {
            v_dir: plane.0,
            a_dir: plane.1,
            labels: fixture.labels.clone(),
            thetas_rad: fixture.thetas.clone(),
            toy_seed,
            synth_seed,
        },
    )
}

pub fn toy(run: &mut Run, kind: ToyKind, output: Option<PathBuf>, map: Option<PathBuf>) -> CliResult<()> {
    let seed = run.cfg.stream("toy");
    let model = match kind {
        ToyKind::Random => ToyModel::build_random(ToyConfig {
            seed,
            ..ToyConfig::default()
        })?,
        ToyKind::Ladder => ladder_fixture(seed)?.model,
        ToyKind::Refusal => refusal_fixture(seed)?.model,
    };
    let name = match kind {
        ToyKind::Random => "random",
        ToyKind::Ladder => "ladder",
        ToyKind::Refusal => "refusal",
    };
    let output = output.unwrap_or_else(|| run.out.join(format!("toy_{name}.vatd")));
    let map = map.unwrap_or_else(|| run.out.join(format!("toy_{name}_tokenizer_map.csv")));
    let bytes = stamp(run, model.to_dump()?).to_bytes()?;
    vass::corpus_store::write_atomic(&output, &bytes)?;
    run.record(output);
    write_tokenizer_map(&model.vocab().marker_map(), &map)?;
    run.record(map);
    log::info!("toy {name}: weight checksum {:016x}", model.weight_checksum());
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorSummary {
    pub layer: usize,
    pub labels: Vec<String>,
    pub sample_counts: BTreeMap<String, usize>,
    pub neutral_count: usize,
}

pub fn vectors(run: &mut Run) -> CliResult<()> {
    let dump_path = run.input_or_fixture(&run.cfg.paths.dump.clone(), fx::ACTIVATIONS)?;
    let dump = read_tensor_dump(&dump_path)?;
    let labels = match run.cfg.paths.corpus.clone() {
        Some(p) => {
            let p = run.input_or_fixture(&Some(p), "")?;
            let format = CorpusFormat::from_path(&p)
                .ok_or_else(|| CliError::Config(format!("unknown corpus format for {}", p.display())))?;
            let corpus = ingest_labeled_corpus(&p, format)?;
            let labels: Vec<String> = single_label_subset(&corpus)
                .into_keys()
                .filter(|l| l != NEUTRAL_LABEL)
                .collect();
            log::info!("corpus has {} single-label emotion classes", labels.len());
            Some(labels)
        }
        None => None,
    };
    let sets = build_sets_from_dump(&dump, labels.as_deref())?;
    let site = dump
        .metadata
        .get(CAPTURE_SITE_KEY)
        .cloned()
        .unwrap_or_else(|| POST_BLOCK_SITE.to_string());
    let mut out = TensorDump::new().with_metadata(CAPTURE_SITE_KEY, site);
    for set in &sets {
        push_vector_set(&mut out, set);
    }
    write_dump(run, "vectors.vatd", out)?;
    let summary: Vec<VectorSummary> = sets
        .iter()
        .map(|s| VectorSummary {
            layer: s.layer,
            labels: s.labels.clone(),
            sample_counts: s.sample_counts.clone(),
            neutral_count: s.neutral_count,
        })
        .collect();
    run.artifact("vectors.json", "vector_sets", summary)
}

fn load_sets(run: &mut Run) -> CliResult<(Vec<EmotionVectorSet>, String)> {
    let path = run.upstream("vectors.vatd", "vectors")?;
    let dump = read_tensor_dump(&path)?;
    let site = dump
        .metadata
        .get(CAPTURE_SITE_KEY)
        .cloned()
        .unwrap_or_else(|| POST_BLOCK_SITE.to_string());
    Ok((vector_sets_from_dump(&dump)?, site))
}

fn load_ratings(run: &mut Run) -> CliResult<RatingTable> {
    let configured = run.cfg.paths.ratings.clone();
    Ok(match (run.cfg.fit.supervision, configured) {
        (RatingSource::SelfReport, None) => RatingTable::bundled_self_report(),
        (source, configured) => {
            let p = run.input_or_fixture(&configured, fx::RATINGS)?;
            RatingTable::load_csv(&p, source)?
        }
    })
}

pub fn fit(run: &mut Run) -> CliResult<()> {
    let (sets, site) = load_sets(run)?;
    let ratings = load_ratings(run)?;
    let opts = FitOptions {
        k: run.cfg.fit.k,
        lambda: run.cfg.fit.lambda,
    };
    let mode = run.cfg.fit.mu_center;
    let dump = match mode {
        vass::va_subspace::MuMode::VectorMean => None,
        _ => {
            let p = run.input_or_fixture(&run.cfg.paths.dump.clone(), fx::ACTIVATIONS)?;
            Some(read_tensor_dump(&p)?)
        }
    };
    let mut axes = Vec::new();
    for set in &sets {
        let fitted = resolve_mu(mode, set, dump.as_ref()).and_then(|mu| fit_va_axes(set, &ratings, opts, &mu));
        match fitted {
            Ok(mut a) => {
                a.capture_site = site.clone();
                axes.push(a);
            }
            Err(e) => run.fail(format!("fit layer {}: {e}", set.layer)),
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["layer", "r_v", "r_a", "single_pc_r_v", "single_pc_r_a"])
        .map_err(vass::VassError::from)?;
    for (set, row) in sets.iter().zip(recovery_curve(&sets, &ratings, opts)) {
        match row {
            Ok(r) => w
                .write_record([
                    r.layer.to_string(),
                    r.r_v.to_string(),
                    r.r_a.to_string(),
                    r.single_pc_r_v.to_string(),
                    r.single_pc_r_a.to_string(),
                ])
                .map_err(vass::VassError::from)?,
            Err(e) => run.fail(format!("recovery layer {}: {e}", set.layer)),
        }
    }
    let bytes = w.into_inner().map_err(|e| vass::VassError::Io(e.into_error()))?;
    run.write("recovery.csv", &bytes)?;
    run.artifact("axes.json", "va_axes", axes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryRow {
    pub layer: usize,
    pub fit: CircleFit,
    pub angle_orientation: String,
}

pub fn geometry(run: &mut Run) -> CliResult<()> {
    let axes: Vec<VAAxes> = run.load("axes.json", "va_axes", "fit")?;
    let (sets, _) = load_sets(run)?;
    let options = run.cfg.geometry;
    let mut rows = Vec::new();
    for ax in &axes {
        let Some(set) = sets.iter().find(|s| s.layer == ax.layer) else {
            run.fail(format!("geometry layer {}: no emotion vectors", ax.layer));
            continue;
        };
        let points: Vec<(f64, f64)> = set
            .matrix
            .row_iter()
            .map(|e| (dot(e, &ax.v_dir), dot(e, &ax.a_dir)))
            .collect();
        let fit = match fit_circle_with(&points, options) {
            Ok(f) => f,
            Err(e) => {
                run.fail(format!("geometry layer {}: {e}", ax.layer));
                continue;
            }
        };
        let lay = layout(&set.labels, &points, &fit)?;
        run.write(&format!("layout_layer{}.csv", ax.layer), &layout_csv(&lay)?)?;
        rows.push(GeometryRow {
            layer: ax.layer,
            fit,
            angle_orientation: "ccw_from_pos_valence".into(),
        });
    }
    run.artifact("geometry.json", "geometry", rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconRow {
    pub layer: usize,
    pub pearson_v: f64,
    pub spearman_v: f64,
    pub pearson_a: f64,
    pub spearman_a: f64,
    pub n: usize,
}

pub fn lexicon(run: &mut Run) -> CliResult<()> {
    let axes: Vec<VAAxes> = run.load("axes.json", "va_axes", "fit")?;
    let lex_path = run.input_or_fixture(&run.cfg.paths.lexicon.clone(), fx::LEXICON)?;
    let norms = load_lexicon(&lex_path)?;
    let dump_path = run.input_or_fixture(&run.cfg.paths.dump.clone(), fx::ACTIVATIONS)?;
    let dump = read_tensor_dump(&dump_path)?;
    let mut rows = Vec::new();
    for ax in &axes {
        let name = lexicon_tensor_name(ax.layer);
        let Some(t) = dump.get(&name) else {
            run.fail(format!("lexicon layer {}: dump has no `{name}`", ax.layer));
            continue;
        };
        match lexicon_validation(ax, &t.to_matrix()?, &norms) {
            Ok(v) => rows.push(LexiconRow {
                layer: ax.layer,
                pearson_v: v.pearson_v,
                spearman_v: v.spearman_v,
                pearson_a: v.pearson_a,
                spearman_a: v.spearman_a,
                n: v.n,
            }),
            Err(e) => run.fail(format!("lexicon layer {}: {e}", ax.layer)),
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r).map_err(vass::VassError::from)?;
    }
    let bytes = w.into_inner().map_err(|e| vass::VassError::Io(e.into_error()))?;
    run.write("lexicon.csv", &bytes)?;
    run.artifact("lexicon.json", "lexicon_validation", rows)
}

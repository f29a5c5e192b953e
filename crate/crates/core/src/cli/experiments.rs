// SPDX-License-Identifier: MIT OR Apache-2.0

//! Steering sweeps, behavioural benchmarks, mechanism analyses and the
//! summary report.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use vass::behavior_eval::{
    load_benchmark_jsonl, run_benchmark, steering_at, Benchmark, BenchmarkOptions, BenchmarkResult,
    LexiconScorer, PipeScorer, Scorer,
};
use vass::corpus_store::{
    bundled_prompts, load_artifact, load_lexicon, load_prompts_jsonl, negative_prefixes, read_tensor_dump,
    read_tokenizer_map,
};
use vass::mech_analysis::{
    ablation_csv, ablation_sweep, alignment_csv, clamp_csv, clamping_experiment, compare_contrastive,
    contrastive_csv, lens_csv, logit_lens, logodds_csv, logodds_table, neuron_alignment,
    project_unembeddings, AblationRow, ClampOptions, ClampResult, ContrastiveRow, LogOddsRow,
    NeuronAlignment, RankedNeuron,
};
use vass::steering_engine::{
    emotion_baseline, make_controls, plane_directions, prefix_csv, prefix_shift, run_sweep, EmotionRateRow,
    LayerPlane, PrefixShift, SweepGrid, SweepOptions,
};
use vass::toy_model::{Roles, ToyModel, COMPLIANCE_MARKERS, REFUSAL_MARKERS};
use vass::va_subspace::VAAxes;
use vass::VassError;

use super::stages::{contrastive_tensor_name, fx, GeometryRow, LexiconRow};
use super::{manifest_path, CliError, CliResult, Manifest, Run, MANIFEST_KIND};

/// Arousal sits at 90° counterclockwise from +valence.
const AROUSAL_DEG: f64 = 90.0;

fn load_planes(run: &mut Run) -> CliResult<Vec<LayerPlane>> {
    let axes: Vec<VAAxes> = run.load("axes.json", "va_axes", "fit")?;
    if axes.is_empty() {
        return Err(CliError::Missing {
            path: run.out.join("axes.json"),
            hint: "no layer was fitted; rerun `vass fit` and check its failures".into(),
        });
    }
    Ok(axes.iter().map(LayerPlane::from).collect())
}

fn load_model(run: &mut Run, configured: Option<std::path::PathBuf>, fixture: &str) -> CliResult<ToyModel> {
    let path = run.input_or_fixture(&configured, fixture)?;
    Ok(ToyModel::from_dump(&read_tensor_dump(&path)?)?)
}

fn check_hidden(model: &ToyModel, planes: &[LayerPlane]) -> CliResult<()> {
    let h = model.config().hidden;
    match planes.iter().find(|p| p.hidden() != h || p.layer >= model.config().layers) {
        Some(p) => Err(CliError::Config(format!(
            "axes for layer {} (hidden {}) do not fit the model ({} layers, hidden {h})",
            p.layer,
            p.hidden(),
            model.config().layers
        ))),
        None => Ok(()),
    }
}

pub fn sweep(run: &mut Run) -> CliResult<()> {
    let planes = load_planes(run)?;
    let model = load_model(run, run.cfg.paths.model.clone(), fx::LADDER_MODEL)?;
    check_hidden(&model, &planes)?;
    let prompts = match run.cfg.paths.prompts.clone() {
        Some(p) => load_prompts_jsonl(&run.input_or_fixture(&Some(p), "")?)?,
        None => bundled_prompts(),
    };
    let scorer: Box<dyn Scorer> = match run.cfg.sweep.scorer_command.clone() {
        Some(cmd) => Box::new(PipeScorer {
            program: cmd[0].clone(),
            args: cmd[1..].to_vec(),
        }),
        None => {
            let p = run.input_or_fixture(&run.cfg.paths.scorer_lexicon.clone(), fx::LADDER_LEXICON)?;
            Box::new(LexiconScorer::new(&load_lexicon(&p)?)?)
        }
    };
    let s = &run.cfg.sweep;
    let opts = SweepOptions {
        angles_deg: s.angles_deg.clone(),
        strengths: s.strengths.clone(),
        max_new: s.max_new,
        single_layer: s.single_layer,
    };
    let grid = run_sweep(&model, &prompts, &planes, scorer.as_ref(), &opts)?;
    for c in grid.cells.iter().filter(|c| c.partial) {
        run.fail(format!(
            "sweep cell θ={} α={}: scorer failed on {} of {} texts",
            c.angle_deg,
            c.strength,
            c.n_prompts - c.n_scored,
            c.n_prompts
        ));
    }
    run.write("sweep.csv", &grid.to_csv()?)?;
    run.artifact("sweep.json", "sweep_grid", grid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlRow {
    pub category: String,
    pub seed: u64,
    pub alpha: f64,
    pub rate: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorSummary {
    pub arousal: BenchmarkResult,
    pub controls: Vec<ControlRow>,
    pub emotions: Vec<EmotionRateRow>,
    pub prefixes: Vec<PrefixShift>,
}

fn csv_rows<T: Serialize>(rows: &[T]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(VassError::from)?;
    }
    Ok(w.into_inner().map_err(|e| VassError::Io(e.into_error()))?)
}

fn load_benchmark(run: &mut Run) -> CliResult<Benchmark> {
    let p = run.input_or_fixture(&run.cfg.paths.benchmark.clone(), fx::BENCHMARK)?;
    Ok(load_benchmark_jsonl(&p)?)
}

pub fn behavior(run: &mut Run) -> CliResult<()> {
    let planes = load_planes(run)?;
    let model = load_model(run, run.cfg.paths.refusal_model.clone(), fx::REFUSAL_MODEL)?;
    check_hidden(&model, &planes)?;
    let bench = load_benchmark(run)?;
    let b = run.cfg.behavior.clone();
    let opts = BenchmarkOptions {
        alphas: b.alphas.clone(),
        max_new: b.max_new,
        judge: run.cfg.judge.clone(),
        abstain_as_negative: b.abstain_as_negative,
    };
    let arousal = run_benchmark(&model, &bench, &plane_directions(&planes, AROUSAL_DEG), &opts)?;
    run.write("behavior.csv", &arousal.to_csv()?)?;

    let mut controls = Vec::new();
    for set in make_controls(&planes, run.cfg.stream("controls"), b.control_seeds)? {
        let dirs: Vec<(usize, Vec<f64>)> = set.pairs.iter().map(|p| (p.layer, p.a_dir.clone())).collect();
        let result = run_benchmark(&model, &bench, &dirs, &opts)?;
        let zero = result.row(0.0).map_or(f64::NAN, |r| r.rate);
        controls.extend(result.rows.iter().map(|r| ControlRow {
            category: set.category.as_str().to_string(),
            seed: set.seed,
            alpha: r.alpha,
            rate: r.rate,
            delta: r.rate - zero,
        }));
    }
    run.write("controls.csv", &csv_rows(&controls)?)?;

    let mut emotions = Vec::new();
    if !b.emotions.is_empty() {
        let path = run.upstream("vectors.vatd", "vectors")?;
        let sets = vass::steering_vectors::vector_sets_from_dump(&read_tensor_dump(&path)?)?;
        match emotion_baseline(&model, &sets, &b.emotions, &bench, &opts) {
            Ok(rows) => emotions = rows,
            Err(e) => run.fail(format!("emotion baseline: {e}")),
        }
        run.write("emotions.csv", &csv_rows(&emotions)?)?;
    }

    let mut prefixes = Vec::new();
    if let Benchmark::Refusal { prompts, .. } = &bench {
        let plane = planes.last().expect("non-empty");
        prefixes = prefix_shift(&model, &negative_prefixes(), prompts, plane, &run.cfg.judge, b.max_new)?;
        run.write("prefix.csv", &prefix_csv(&prefixes)?)?;
    }
    run.artifact(
        "behavior.json",
        "behavior",
        BehaviorSummary {
            arousal,
            controls,
            emotions,
            prefixes,
        },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismSummary {
    pub refusal_mean: (f64, f64),
    pub compliance_mean: (f64, f64),
    pub difference_angle_deg: f64,
    pub angle_orientation: String,
    pub logodds: Vec<LogOddsRow>,
    pub clamp: ClampResult,
    pub top_refusal_neurons: Vec<NeuronAlignment>,
    pub ablation: Vec<AblationRow>,
    pub contrastive: Vec<ContrastiveRow>,
}

fn load_roles(run: &mut Run, model: &ToyModel) -> CliResult<Roles> {
    let configured = run.cfg.paths.tokenizer_map.clone();
    let map = match configured {
        Some(p) => read_tokenizer_map(&run.input_or_fixture(&Some(p), "")?)?,
        None if run.fixture(fx::TOKENIZER_MAP).is_file() => {
            read_tokenizer_map(&run.input_or_fixture(&None, fx::TOKENIZER_MAP)?)?
        }
        None => model.vocab().marker_map(),
    };
    Ok(Roles::from_strings(&REFUSAL_MARKERS, &COMPLIANCE_MARKERS, &map)?)
}

type Directions = Vec<(usize, Vec<f64>)>;

fn contrastive_dirs(run: &mut Run) -> CliResult<Option<Directions>> {
    let path = match run.cfg.paths.contrastive.clone() {
        Some(p) => run.input_or_fixture(&Some(p), "")?,
        None if run.fixture(fx::CONTRASTIVE).is_file() => run.input_or_fixture(&None, fx::CONTRASTIVE)?,
        None => return Ok(None),
    };
    let dump = read_tensor_dump(&path)?;
    let mut dirs = Vec::new();
    for l in 0.. {
        match dump.get(&contrastive_tensor_name(l)) {
            Some(t) => dirs.push((l, t.to_vec_f64())),
            None if l == 0 => continue,
            None => break,
        }
    }
    Ok(Some(dirs))
}

pub fn mechanism(run: &mut Run) -> CliResult<()> {
    let planes = load_planes(run)?;
    let model = load_model(run, run.cfg.paths.refusal_model.clone(), fx::REFUSAL_MODEL)?;
    check_hidden(&model, &planes)?;
    let roles = load_roles(run, &model)?;
    let prompts = match load_benchmark(run)? {
        Benchmark::Refusal { prompts, .. } => prompts,
        Benchmark::Sycophancy { .. } => {
            return Err(CliError::Config("mechanism needs a refusal benchmark".into()));
        }
    };
    let m = run.cfg.mechanism.clone();
    let judge = run.cfg.judge.clone();
    let weights = model.weights();
    let plane = planes.last().expect("non-empty");
    let proj = project_unembeddings(&weights.unembedding, model.vocab(), plane, &roles, m.centering)?;
    run.write("unembed.csv", &proj.to_csv()?)?;

    let arousal = plane_directions(&planes, AROUSAL_DEG);
    let logodds = logodds_table(&model, &prompts, &arousal, &m.alphas, &roles, &judge, m.max_new)?;
    run.write("logodds.csv", &logodds_csv(&logodds)?)?;

    let layers: Vec<usize> = (0..model.config().layers).collect();
    let tokens = model.vocab().encode(&prompts[0]);
    let steering = steering_at(&arousal, m.alpha);
    let plain = logit_lens(&model, &tokens, &layers, &roles, None, m.lens_top_k)?;
    let steered = logit_lens(&model, &tokens, &layers, &roles, Some(&steering), m.lens_top_k)?;
    let mut lens = lens_csv("unsteered", &plain)?;
    let steered_csv = lens_csv("steered", &steered)?;
    let body = steered_csv.iter().position(|&b| b == b'\n').map_or(0, |i| i + 1);
    lens.extend_from_slice(&steered_csv[body..]);
    run.write("lens.csv", &lens)?;

    let clamp_seed = run.cfg.stream("clamping");
    let clamp = clamping_experiment(
        &model,
        &prompts,
        &roles,
        &arousal,
        &ClampOptions {
            alpha: m.alpha,
            random_seeds: (0..m.random_controls as u64).map(|i| clamp_seed.wrapping_add(i)).collect(),
            judge: judge.clone(),
            max_new: m.max_new,
        },
    )?;
    run.write("clamp.csv", &clamp_csv(std::slice::from_ref(&clamp))?)?;

    let report = neuron_alignment(&weights, &layers, &roles, &planes, m.top_n)?;
    run.write("neurons.csv", &alignment_csv(&report.all)?)?;
    let ranked: Vec<RankedNeuron> = report
        .top_refusal
        .iter()
        .map(|n| RankedNeuron {
            layer: n.layer,
            neuron: n.neuron,
        })
        .collect();
    let ablation_seed = run.cfg.stream("ablation");
    let seeds: Vec<u64> = (0..m.random_controls as u64).map(|i| ablation_seed.wrapping_add(i)).collect();
    let ablation = ablation_sweep(&model, &prompts, &ranked, &m.ablation_grid, &seeds, &judge, m.max_new)?;
    run.write("ablation.csv", &ablation_csv(&ablation)?)?;

    let contrastive = match contrastive_dirs(run)? {
        Some(dirs) => {
            let rows = compare_contrastive(&dirs, &planes)?;
            run.write("contrastive.csv", &contrastive_csv(&rows)?)?;
            rows
        }
        None => Vec::new(),
    };
    run.artifact(
        "mechanism.json",
        "mechanism",
        MechanismSummary {
            refusal_mean: proj.refusal_mean,
            compliance_mean: proj.compliance_mean,
            difference_angle_deg: proj.difference_angle_deg,
            angle_orientation: proj.orientation,
            logodds,
            clamp,
            top_refusal_neurons: report.top_refusal,
            ablation,
            contrastive,
        },
    )
}

const REPORTED: [&str; 8] = ["synth", "vectors", "fit", "geometry", "lexicon", "sweep", "behavior", "mechanism"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub config_hash: String,
    pub commands: Vec<String>,
    pub mixed_hashes: Vec<(String, String)>,
    pub failures: Vec<(String, String)>,
}

fn fmt_row(out: &mut String, cells: &[String]) {
    let _ = writeln!(out, "| {} |", cells.join(" | "));
}

fn table(out: &mut String, header: &[&str], rows: Vec<Vec<String>>) {
    fmt_row(out, &header.iter().map(|s| s.to_string()).collect::<Vec<_>>());
    fmt_row(out, &vec!["---".to_string(); header.len()]);
    for r in rows {
        fmt_row(out, &r);
    }
    out.push('\n');
}

fn f3(x: f64) -> String {
    format!("{:.3}", (x * 1000.0).round() / 1000.0 + 0.0)
}

pub fn report(run: &mut Run, force: bool) -> CliResult<()> {
    let mut commands = Vec::new();
    let mut mixed = Vec::new();
    let mut failures = Vec::new();
    for cmd in REPORTED {
        let path = manifest_path(&run.out, cmd);
        if !path.is_file() {
            continue;
        }
        run.input(path.clone(), cmd)?;
        let m = load_artifact::<Manifest>(&path, MANIFEST_KIND)?;
        if m.provenance.config_hash != run.hash {
            mixed.push((cmd.to_string(), m.provenance.config_hash.clone()));
        }
        failures.extend(m.payload.failures.iter().map(|f| (cmd.to_string(), f.clone())));
        commands.push(cmd.to_string());
    }
    if commands.is_empty() {
        return Err(CliError::Missing {
            path: manifest_path(&run.out, "synth"),
            hint: "no command has run in this output directory".into(),
        });
    }
    if !mixed.is_empty() && !force {
        let list: Vec<String> = mixed.iter().map(|(c, h)| format!("{c} ({h})")).collect();
        return Err(CliError::Config(format!(
            "artifacts from other configs than {}: {}; pass --force to mix them",
            run.hash,
            list.join(", ")
        )));
    }

    let mut md = String::new();
    let _ = writeln!(md, "# vass report\n\nconfig `{}`, root seed {}\n", run.hash, run.cfg.seed);
    for (c, h) in &mixed {
        let _ = writeln!(md, "WARNING: `{c}` artifacts come from config `{h}`\n");
    }
    if commands.iter().any(|c| c == "fit") {
        let axes: Vec<VAAxes> = run.load("axes.json", "va_axes", "fit")?;
        let _ = writeln!(md, "## Axis recovery\n");
        let rows = axes
            .iter()
            .map(|a| vec![a.layer.to_string(), f3(a.recovery_r_v), f3(a.recovery_r_a), a.capture_site.clone()])
            .collect();
        table(&mut md, &["layer", "r_V", "r_A", "capture site"], rows);
    }
    if commands.iter().any(|c| c == "geometry") {
        let geo: Vec<GeometryRow> = run.load("geometry.json", "geometry", "geometry")?;
        let _ = writeln!(md, "## Circumplex geometry\n");
        let rows = geo
            .iter()
            .map(|g| {
                vec![
                    g.layer.to_string(),
                    f3(g.fit.radius),
                    f3(g.fit.nrmse),
                    f3(g.fit.circularity),
                ]
            })
            .collect();
        table(&mut md, &["layer", "radius", "NRMSE", "circularity"], rows);
    }
    if commands.iter().any(|c| c == "lexicon") {
        let lex: Vec<LexiconRow> = run.load("lexicon.json", "lexicon_validation", "lexicon")?;
        let _ = writeln!(md, "## Lexicon validation\n");
        let rows = lex
            .iter()
            .map(|l| vec![l.layer.to_string(), f3(l.pearson_v), f3(l.spearman_v), f3(l.pearson_a), l.n.to_string()])
            .collect();
        table(&mut md, &["layer", "pearson V", "spearman V", "pearson A", "n"], rows);
    }
    if commands.iter().any(|c| c == "sweep") {
        let grid: SweepGrid = run.load("sweep.json", "sweep_grid", "sweep")?;
        let _ = writeln!(md, "## Steering sweep\n");
        let mut angles: Vec<f64> = grid.cells.iter().map(|c| c.angle_deg).collect();
        angles.sort_by(f64::total_cmp);
        angles.dedup();
        let rows = angles
            .iter()
            .map(|&a| {
                let top = grid
                    .cells
                    .iter()
                    .filter(|c| c.angle_deg == a)
                    .max_by(|x, y| x.strength.total_cmp(&y.strength))
                    .expect("angle present");
                vec![
                    format!("{a}"),
                    format!("{}", top.strength),
                    f3(top.delta_valence),
                    f3(top.delta_arousal),
                    f3(top.delta_sentiment),
                    f3(top.ood_frac),
                ]
            })
            .collect();
        table(&mut md, &["angle", "max α", "ΔV", "ΔA", "Δsentiment", "OOD"], rows);
    }
    if commands.iter().any(|c| c == "behavior") {
        let b: BehaviorSummary = run.load("behavior.json", "behavior", "behavior")?;
        let _ = writeln!(md, "## Arousal steering on `{}`\n", b.arousal.benchmark_id);
        let rows = b
            .arousal
            .rows
            .iter()
            .map(|r| vec![format!("{}", r.alpha), f3(r.rate), f3(r.ood_frac), r.n.to_string()])
            .collect();
        table(&mut md, &["α", "rate", "OOD", "n"], rows);
        let max_alpha = b.arousal.rows.iter().map(|r| r.alpha).fold(f64::NEG_INFINITY, f64::max);
        let rows = b
            .controls
            .iter()
            .filter(|c| c.alpha == max_alpha)
            .map(|c| vec![c.category.clone(), c.seed.to_string(), f3(c.delta)])
            .collect();
        let _ = writeln!(md, "Controls at α = {max_alpha}:\n");
        table(&mut md, &["category", "seed", "Δ rate"], rows);
    }
    if commands.iter().any(|c| c == "mechanism") {
        let m: MechanismSummary = run.load("mechanism.json", "mechanism", "mechanism")?;
        let _ = writeln!(
            md,
            "## Mechanism\n\nrefusal-token mean ({:.3}, {:.3}), compliance-token mean ({:.3}, {:.3}), difference angle {:.1}° ({})\n",
            m.refusal_mean.0,
            m.refusal_mean.1,
            m.compliance_mean.0,
            m.compliance_mean.1,
            m.difference_angle_deg,
            m.angle_orientation
        );
        let c = &m.clamp;
        let _ = writeln!(
            md,
            "Clamping at α = {}: unsteered {:.3}, steered {:.3}, clamped {:.3}, random clamp {:.3}\n",
            c.alpha, c.unsteered_rate, c.baseline_rate, c.clamped_rate, c.random_clamped_rate
        );
        let rows = m
            .ablation
            .iter()
            .map(|r| vec![r.n.to_string(), f3(r.rate), f3(r.delta_vs_baseline), f3(r.delta_vs_random)])
            .collect();
        table(&mut md, &["ablated", "rate", "Δ baseline", "Δ random"], rows);
    }
    if !failures.is_empty() {
        let _ = writeln!(md, "## Failures\n");
        for (c, f) in &failures {
            let _ = writeln!(md, "- {c}: {f}");
        }
    }
    run.write("report.md", md.as_bytes())?;
    run.artifact(
        "report.json",
        "report",
        ReportSummary {
            config_hash: run.hash.clone(),
            commands,
            mixed_hashes: mixed,
            failures,
        },
    )
}

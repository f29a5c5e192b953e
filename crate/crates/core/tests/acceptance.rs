// SPDX-License-Identifier: MIT OR Apache-2.0

//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the report reads top to bottom.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use vass::behavior_eval::{run_benchmark, Benchmark, BenchmarkOptions, JudgeConfig, LexiconScorer};
use vass::circumplex::{fit_circle_with, CircleOptions, CIRCULARITY_CAP};
use vass::corpus_store::{Tensor, TensorDump};
use vass::mech_analysis::{clamping_experiment, logodds_table, ClampOptions};
use vass::numerics::{dot, orthonormalize_pair, pca, ridge, DenseMatrix};
use vass::steering_engine::{
    make_controls, plane_directions, run_sweep, shared_planes, ControlCategory, SweepOptions,
};
use vass::steering_vectors::{build_set, pooled_mean};
use vass::toy_model::{
    ladder_fixture, refusal_fixture, synth_circumplex_fixture, CircumplexOptions, Hooks, SteeringSpec,
};
use vass::va_subspace::{fit_va_axes, FitOptions};

type Check = Result<(bool, String), String>;

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn cos(u: &[f64], v: &[f64]) -> f64 {
    dot(u, v) / (dot(u, u).sqrt() * dot(v, v).sqrt())
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn recovery() -> Check {
    let start = Instant::now();
    let fx = synth_circumplex_fixture(&CircumplexOptions::default()).map_err(e)?;
    let set = build_set(&fx.classes, Some(&fx.neutral), 0, &fx.labels).map_err(e)?;
    let mu = pooled_mean(&fx.all_batches()).map_err(e)?;
    let axes = fit_va_axes(&set, &fx.ratings, FitOptions::default(), &mu).map_err(e)?;
    let elapsed = start.elapsed();
    let cv = cos(&axes.v_dir, &fx.p1).abs();
    let ca = cos(&axes.a_dir, &fx.p2).abs();
    let pass = cv >= 0.95
        && ca >= 0.95
        && axes.recovery_r_v >= 0.98
        && axes.recovery_r_a >= 0.98
        && elapsed < Duration::from_secs(5);
    Ok((
        pass,
        format!(
            "|cos(v,p1)|={cv:.4} |cos(a,p2)|={ca:.4} r_V={:.4} r_A={:.4} in {:.2}s",
            axes.recovery_r_v,
            axes.recovery_r_a,
            elapsed.as_secs_f64()
        ),
    ))
}

fn noisy_circle(seed: u64, center: (f64, f64), r: f64, sigma: f64, n: usize) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let t = std::f64::consts::TAU * i as f64 / n as f64;
            let d = r * (1.0 + sigma * gauss(&mut rng));
            (center.0 + d * t.cos(), center.1 + d * t.sin())
        })
        .collect()
}

fn sq_dists(points: &[(f64, f64)], c: (f64, f64)) -> Vec<f64> {
    points.iter().map(|p| (p.0 - c.0).powi(2) + (p.1 - c.1).powi(2)).collect()
}

fn variance(x: &[f64]) -> f64 {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64
}

/// Coarse-to-fine grid minimisation of `objective` over circle centers.
fn grid_center(points: &[(f64, f64)], objective: impl Fn((f64, f64)) -> f64) -> (f64, f64) {
    let n = points.len() as f64;
    let mut best = (
        points.iter().map(|p| p.0).sum::<f64>() / n,
        points.iter().map(|p| p.1).sum::<f64>() / n,
    );
    let mut half = 1.0;
    for _ in 0..16 {
        let origin = best;
        let mut best_val = objective(best);
        for i in -10..=10 {
            for j in -10..=10 {
                let c = (origin.0 + half * f64::from(i) / 10.0, origin.1 + half * f64::from(j) / 10.0);
                let v = objective(c);
                if v < best_val {
                    best_val = v;
                    best = c;
                }
            }
        }
        half *= 0.25;
    }
    best
}

/// Algebraic oracle: for a fixed center the best algebraic offset leaves the
/// variance of squared distances, and the radius is their RMS.
fn algebraic_oracle(points: &[(f64, f64)]) -> ((f64, f64), f64) {
    let c = grid_center(points, |c| variance(&sq_dists(points, c)));
    let d2 = sq_dists(points, c);
    (c, (d2.iter().sum::<f64>() / d2.len() as f64).sqrt())
}

/// Geometric oracle: radius is the mean center distance.
fn geometric_oracle(points: &[(f64, f64)]) -> ((f64, f64), f64) {
    let dists = |c| sq_dists(points, c).into_iter().map(f64::sqrt).collect::<Vec<_>>();
    let c = grid_center(points, |c| variance(&dists(c)));
    let d = dists(c);
    (c, d.iter().sum::<f64>() / d.len() as f64)
}

fn gap(fit: ((f64, f64), f64), oracle: ((f64, f64), f64)) -> f64 {
    (fit.0 .0 - oracle.0 .0)
        .abs()
        .max((fit.0 .1 - oracle.0 .1).abs())
        .max((fit.1 - oracle.1).abs())
}

fn geometry(info: &mut Vec<String>) -> Check {
    let exact: Vec<(f64, f64)> = (0..12)
        .map(|i| {
            let t = 0.3 + std::f64::consts::TAU * f64::from(i) / 12.0;
            (1.5 + 3.0 * t.cos(), -2.0 + 3.0 * t.sin())
        })
        .collect();
    let f = fit_circle_with(&exact, CircleOptions::default()).map_err(e)?;
    let exact_err = (f.center.0 - 1.5).abs().max((f.center.1 + 2.0).abs()).max((f.radius - 3.0).abs());
    let exact_ok = exact_err < 1e-9 && f.circularity == CIRCULARITY_CAP;

    let kasa = CircleOptions::default();
    let refined = CircleOptions {
        refine: true,
        ..CircleOptions::default()
    };
    let (mut alg_gap, mut geo_gap, mut cross_gap) = (0.0f64, 0.0f64, 0.0f64);
    let mut circs = Vec::new();
    let sigma = 0.05;
    for seed in 0..100 {
        let pts = noisy_circle(seed, (0.3, -0.2), 1.0, sigma, 27);
        let a = fit_circle_with(&pts, kasa).map_err(e)?;
        let g = fit_circle_with(&pts, refined).map_err(e)?;
        let geo = geometric_oracle(&pts);
        alg_gap = alg_gap.max(gap((a.center, a.radius), algebraic_oracle(&pts)));
        geo_gap = geo_gap.max(gap((g.center, g.radius), geo));
        cross_gap = cross_gap.max(gap((a.center, a.radius), geo));
        circs.push(a.circularity);
    }
    let target = 1.0 / sigma;
    let mean_circ = circs.iter().sum::<f64>() / circs.len() as f64;
    let within = circs.iter().filter(|c| (*c - target).abs() <= 0.15 * target).count();
    let circ_ok = (mean_circ - target).abs() <= 0.15 * target;
    info.push(format!(
        "INFO geometry: algebraic fit vs mean-distance oracle, max gap {cross_gap:.2e} over 100 seeds"
    ));
    Ok((
        exact_ok && alg_gap < 1e-3 && geo_gap < 1e-3 && circ_ok,
        format!(
            "exact err {exact_err:.1e}, capped circularity {}; algebraic vs oracle {alg_gap:.1e}; \
             refined vs oracle {geo_gap:.1e}; mean circularity {mean_circ:.2} vs 1/σ={target} \
             ({within}/100 seeds within 15%)",
            f.circularity == CIRCULARITY_CAP
        ),
    ))
}

/// Conjugate gradient on a symmetric positive definite system.
fn conjugate_gradient(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mul = |x: &[f64]| -> Vec<f64> { a.iter().map(|row| dot(row, x)).collect() };
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let tol = 1e-28 * dot(b, b);
    for _ in 0..10 * n {
        if rr <= tol {
            break;
        }
        let ap = mul(&p);
        let step = rr / dot(&p, &ap);
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        let next = dot(&r, &r);
        for i in 0..n {
            p[i] = r[i] + next / rr * p[i];
        }
        rr = next;
    }
    x
}

/// Leading eigenvectors by power iteration with deflation.
fn power_eigvecs(mut c: Vec<Vec<f64>>, k: usize, seed: u64) -> Vec<Vec<f64>> {
    let h = c.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let mut v: Vec<f64> = (0..h).map(|_| gauss(&mut rng)).collect();
        let mut lambda = 0.0;
        for _ in 0..100_000 {
            let w: Vec<f64> = c.iter().map(|row| dot(row, &v)).collect();
            let nw = dot(&w, &w).sqrt();
            let next: Vec<f64> = w.iter().map(|x| x / nw).collect();
            let change: f64 = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            v = next;
            lambda = nw;
            if change < 1e-15 {
                break;
            }
        }
        for i in 0..h {
            for j in 0..h {
                c[i][j] -= lambda * v[i] * v[j];
            }
        }
        out.push(v);
    }
    out
}

fn numerics() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut ridge_err = 0.0f64;
    for _ in 0..100 {
        let (n, p) = (rng.random_range(10..60), rng.random_range(2..12));
        let lambda = rng.random_range(0.05..5.0);
        let z: Vec<f64> = (0..n * p).map(|_| gauss(&mut rng)).collect();
        let y: Vec<f64> = (0..n).map(|_| 3.0 + gauss(&mut rng)).collect();
        let zm = DenseMatrix::new(n, p, z.clone()).map_err(e)?;
        let fit = ridge(&zm, &y, lambda).map_err(e)?;
        let ybar = y.iter().sum::<f64>() / n as f64;
        let col = |j: usize| (0..n).map(|i| z[i * p + j]).collect::<Vec<_>>();
        let cols: Vec<Vec<f64>> = (0..p).map(col).collect();
        let gram: Vec<Vec<f64>> = (0..p)
            .map(|a| (0..p).map(|b| dot(&cols[a], &cols[b]) + if a == b { lambda } else { 0.0 }).collect())
            .collect();
        let yc: Vec<f64> = y.iter().map(|v| v - ybar).collect();
        let rhs: Vec<f64> = cols.iter().map(|c| dot(c, &yc)).collect();
        let beta = conjugate_gradient(&gram, &rhs);
        for (u, v) in beta.iter().zip(&fit.coefficients) {
            ridge_err = ridge_err.max((u - v).abs());
        }
    }

    let mut pca_worst = 1.0f64;
    for seed in 0..20 {
        let (n, h, k) = (60, 12, 4);
        let scales: Vec<f64> = (0..h).map(|j| 10.0 * 0.7f64.powi(j as i32)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let basis = {
            let raw: Vec<f64> = (0..h * h).map(|_| gauss(&mut rng)).collect();
            let svd = nalgebra::DMatrix::from_row_slice(h, h, &raw).svd(true, false);
            svd.u.expect("requested")
        };
        let data: Vec<f64> = (0..n)
            .flat_map(|_| {
                let s: Vec<f64> = scales.iter().map(|sc| sc * gauss(&mut rng)).collect();
                (0..h).map(|j| (0..h).map(|c| basis[(j, c)] * s[c]).sum::<f64>()).collect::<Vec<_>>()
            })
            .collect();
        let model = pca(&DenseMatrix::new(n, h, data.clone()).map_err(e)?, k).map_err(e)?;
        let means: Vec<f64> = (0..h).map(|j| (0..n).map(|i| data[i * h + j]).sum::<f64>() / n as f64).collect();
        let cov: Vec<Vec<f64>> = (0..h)
            .map(|a| {
                (0..h)
                    .map(|b| (0..n).map(|i| (data[i * h + a] - means[a]) * (data[i * h + b] - means[b])).sum::<f64>())
                    .collect()
            })
            .collect();
        for (j, v) in power_eigvecs(cov, k, seed).iter().enumerate() {
            pca_worst = pca_worst.min(cos(&model.components.column(j), v).abs());
        }
    }

    let mut gs_err = 0.0f64;
    for _ in 0..100 {
        let h = rng.random_range(3..200);
        let w1: Vec<f64> = (0..h).map(|_| gauss(&mut rng)).collect();
        let w2: Vec<f64> = w1.iter().map(|x| 0.9 * x + 0.1 * gauss(&mut rng)).collect();
        let (u, v) = orthonormalize_pair(&w1, &w2).map_err(e)?;
        gs_err = gs_err
            .max((dot(&u, &u) - 1.0).abs())
            .max((dot(&v, &v) - 1.0).abs())
            .max(dot(&u, &v).abs());
    }
    Ok((
        ridge_err < 1e-6 && pca_worst >= 1.0 - 1e-8 && gs_err < 1e-12,
        format!("ridge vs CG {ridge_err:.1e}; PCA vs power iteration min |cos| 1-{:.1e}; Gram-Schmidt {gs_err:.1e}", 1.0 - pca_worst),
    ))
}

fn log_sum_exp(x: &[f64]) -> f64 {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn mediation() -> Check {
    let fx = refusal_fixture(7).map_err(e)?;
    let layers = fx.model.config().layers;
    let planes = shared_planes(fx.v_dir(), fx.a_dir(), layers).map_err(e)?;
    let arousal = plane_directions(&planes, 90.0);
    let alphas = [0.0, 0.15, 0.3, 0.45];
    let judge = JudgeConfig::default();
    let table = logodds_table(&fx.model, &fx.prompts, &arousal, &alphas, &fx.roles, &judge, 4).map_err(e)?;

    let naive = |alpha: f64| -> Result<f64, String> {
        let spec = SteeringSpec::all_layers(layers, fx.a_dir(), alpha);
        let mut total = 0.0;
        for p in &fx.prompts {
            let out = fx
                .model
                .forward_with(
                    &fx.model.vocab().encode(p),
                    &[],
                    Hooks {
                        steering: Some(&spec),
                        ablation: None,
                    },
                )
                .map_err(e)?;
            let pick = |ids: &[u32]| ids.iter().map(|&t| out.logits[t as usize]).collect::<Vec<_>>();
            total += log_sum_exp(&pick(&fx.roles.refusal)) - log_sum_exp(&pick(&fx.roles.compliance));
        }
        Ok(total / fx.prompts.len() as f64)
    };
    let base = naive(0.0)?;
    let mut lo_err = 0.0f64;
    for row in &table {
        lo_err = lo_err.max((row.delta_log_odds - (naive(row.alpha)? - base)).abs());
    }
    let lo_monotone = table.windows(2).all(|w| w[1].delta_log_odds <= w[0].delta_log_odds);
    let rate_monotone = table.windows(2).all(|w| w[1].refusal_rate <= w[0].refusal_rate);

    let last = layers - 1;
    let tokens = fx.model.vocab().encode(&fx.prompts[0]);
    let base_logits = fx.model.forward(&tokens, &[]).map_err(e)?.logits;
    let alpha = 0.3;
    let spec = SteeringSpec::single(last, fx.a_dir().to_vec(), alpha);
    let steered = fx
        .model
        .forward_with(
            &tokens,
            &[],
            Hooks {
                steering: Some(&spec),
                ablation: None,
            },
        )
        .map_err(e)?
        .logits;
    let mut lin_err = 0.0f64;
    for t in fx.roles.all() {
        let expected = alpha * dot(fx.a_dir(), fx.model.unembedding_row(t));
        lin_err = lin_err.max((steered[t as usize] - base_logits[t as usize] - expected).abs());
    }

    let clamp = clamping_experiment(
        &fx.model,
        &fx.prompts,
        &fx.roles,
        &arousal,
        &ClampOptions {
            alpha: 0.45,
            ..ClampOptions::default()
        },
    )
    .map_err(e)?;
    let clamp_ok = clamp.clamped_rate == clamp.unsteered_rate && clamp.random_clamped_rate == clamp.baseline_rate;

    let rates: Vec<String> = table.iter().map(|r| format!("{:.2}", r.refusal_rate)).collect();
    Ok((
        lo_err < 1e-6 && lo_monotone && rate_monotone && lin_err < 1e-6 && clamp_ok,
        format!(
            "log-odds vs naive oracle {lo_err:.1e} (monotone {lo_monotone}); last-layer logit linearity {lin_err:.1e}; \
             clamp {:.3} vs unsteered {:.3}, random clamp {:.3} vs steered {:.3}; refusal rates [{}]",
            clamp.clamped_rate,
            clamp.unsteered_rate,
            clamp.random_clamped_rate,
            clamp.baseline_rate,
            rates.join(", ")
        ),
    ))
}

fn control_flatness() -> Check {
    let fx = refusal_fixture(7).map_err(e)?;
    let layers = fx.model.config().layers;
    let planes = shared_planes(fx.v_dir(), fx.a_dir(), layers).map_err(e)?;
    let bench = Benchmark::Refusal {
        id: "refusal".into(),
        prompts: fx.prompts.clone(),
    };
    let amax = 0.45;
    let opts = BenchmarkOptions {
        alphas: vec![-amax, 0.0, amax],
        max_new: 4,
        ..BenchmarkOptions::default()
    };
    let delta = |dirs: &[(usize, Vec<f64>)]| -> Result<(f64, f64), String> {
        let res = run_benchmark(&fx.model, &bench, dirs, &opts).map_err(e)?;
        let at = |a: f64| res.row(a).map(|r| r.rate).ok_or_else(|| format!("no row at α={a}"));
        let b = at(0.0)?;
        Ok((at(amax)? - b, at(-amax)? - b))
    };
    let (arousal_delta, _) = delta(&plane_directions(&planes, 90.0))?;
    let mut worst = 0.0f64;
    let mut detail = Vec::new();
    for set in make_controls(&planes, 7, 3).map_err(e)? {
        if set.category == ControlCategory::InPlane {
            continue;
        }
        let dirs: Vec<(usize, Vec<f64>)> = set.pairs.iter().map(|p| (p.layer, p.a_dir.clone())).collect();
        let (up, down) = delta(&dirs)?;
        worst = worst.max(up.abs()).max(down.abs());
        detail.push(format!("{}#{}={up:+.3}", set.category.as_str(), set.seed));
    }
    Ok((
        arousal_delta != 0.0 && worst <= 0.2 * arousal_delta.abs(),
        format!(
            "arousal Δ={arousal_delta:+.3}; max control |Δ|={worst:.3} (bound {:.3}); {}",
            0.2 * arousal_delta.abs(),
            detail.join(" ")
        ),
    ))
}

fn sweep_structure() -> Check {
    let fx = ladder_fixture(7).map_err(e)?;
    let planes = shared_planes(&fx.v_dir, &fx.a_dir, fx.model.config().layers).map_err(e)?;
    let scorer = LexiconScorer::new(&fx.lexicon).map_err(e)?;
    let prompts: Vec<String> = ["tell me a story", "describe the weather", "WHAT IS NEW"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let strengths: Vec<f64> = (0..10).map(|i| 0.05 * f64::from(i)).collect();
    let opts = SweepOptions {
        angles_deg: vec![0.0, 90.0, 180.0, 270.0],
        strengths: strengths.clone(),
        max_new: 4,
        single_layer: None,
    };
    let grid = run_sweep(&fx.model, &prompts, &planes, &scorer, &opts).map_err(e)?;
    let at = |theta: f64, s: f64| grid.cell(theta, s).map(|c| c.delta_sentiment).ok_or("missing cell".to_string());
    let forward: Vec<f64> = strengths.iter().map(|&s| at(0.0, s)).collect::<Result<_, _>>()?;
    let increasing = forward.windows(2).all(|w| w[1] > w[0]);
    let mut anti = 0.0f64;
    for &s in &strengths {
        anti = anti.max((at(0.0, s)? + at(180.0, s)?).abs());
    }
    let zero_exact = grid.cells.iter().filter(|c| c.strength == 0.0).all(|c| {
        c.delta_sentiment == 0.0 && c.delta_valence == 0.0 && c.delta_arousal == 0.0
    });
    Ok((
        increasing && anti < 1e-6 && zero_exact,
        format!(
            "ΔS(θ=0) strictly increasing {increasing} ({:.3}..{:.3}); antisymmetry {anti:.1e}; α=0 cells exactly zero {zero_exact}",
            forward[0],
            forward[forward.len() - 1]
        ),
    ))
}

fn random_dump(seed: u64) -> Result<TensorDump, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dump = TensorDump::new();
    for i in 0..rng.random_range(0..5) {
        let key: String = (0..rng.random_range(1..12)).map(|_| rng.random_range('a'..='z')).collect();
        dump = dump.with_metadata(format!("{key}{i}"), format!("v{}\u{e9}\"{}", rng.random::<u32>(), i));
    }
    for i in 0..rng.random_range(0..6) {
        let shape: Vec<usize> = (0..rng.random_range(1..4)).map(|_| rng.random_range(0..7)).collect();
        let len: usize = shape.iter().product();
        let data: Vec<f32> = (0..len).map(|_| f32::from_bits(rng.random::<u32>() & 0x7f7f_ffff)).collect();
        dump.push(Tensor::new(format!("t{i}/x"), shape, data).map_err(e)?);
    }
    Ok(dump)
}

fn run_pipeline(out: &Path) -> Result<(), String> {
    let commands = ["synth", "vectors", "fit", "geometry", "lexicon", "sweep", "behavior", "mechanism", "report"];
    for cmd in commands {
        let status = Command::new(env!("CARGO_BIN_EXE_vass"))
            .arg("--out")
            .arg(out)
            .arg(cmd)
            .output()
            .map_err(e)?;
        if !status.status.success() {
            return Err(format!(
                "`vass {cmd}` exited {:?}: {}",
                status.status.code(),
                String::from_utf8_lossy(&status.stderr)
            ));
        }
    }
    Ok(())
}

fn tree(root: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).map_err(e)? {
            let path = entry.map_err(e)?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).map_err(e)?.to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).map_err(e)?);
            }
        }
    }
    Ok(out)
}

fn formats() -> Check {
    let mut fuzz_ok = 0;
    for seed in 0..100 {
        let dump = random_dump(seed)?;
        let bytes = dump.to_bytes().map_err(e)?;
        let back = TensorDump::from_bytes(&bytes).map_err(e)?;
        let same_bits = back.tensors.len() == dump.tensors.len()
            && back.tensors.iter().zip(&dump.tensors).all(|(a, b)| {
                a.name == b.name
                    && a.shape == b.shape
                    && a.data.iter().map(|v| v.to_bits()).eq(b.data.iter().map(|v| v.to_bits()))
            });
        if same_bits && back.metadata == dump.metadata && back.to_bytes().map_err(e)? == bytes {
            fuzz_ok += 1;
        }
    }

    let a = tempfile::tempdir().map_err(e)?;
    let b = tempfile::tempdir().map_err(e)?;
    let start = Instant::now();
    run_pipeline(a.path())?;
    let first = start.elapsed();
    run_pipeline(b.path())?;
    let (ta, tb) = (tree(a.path())?, tree(b.path())?);
    let differing: Vec<&String> = ta.keys().filter(|k| tb.get(*k) != ta.get(*k)).collect();
    let identical = ta.len() == tb.len() && differing.is_empty();
    Ok((
        fuzz_ok == 100 && identical && first < Duration::from_secs(120),
        format!(
            "VATD1 round trips {fuzz_ok}/100; pipeline {:.1}s; {} files, byte-identical {identical}{}",
            first.as_secs_f64(),
            ta.len(),
            if differing.is_empty() { String::new() } else { format!(" (differ: {differing:?})") }
        ),
    ))
}

fn main() {
    let mut info = Vec::new();
    let results: Vec<(&str, Check)> = vec![
        ("circumplex_recovery", recovery()),
        ("circle_geometry", geometry(&mut info)),
        ("numerical_oracles", numerics()),
        ("refusal_mediation", mediation()),
        ("control_flatness", control_flatness()),
        ("sweep_structure", sweep_structure()),
        ("formats_and_reproducibility", formats()),
    ];
    let mut failed = 0;
    for (name, res) in results {
        match res {
            Ok((true, detail)) => println!("PASS {name}: {detail}"),
            Ok((false, detail)) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
            Err(err) => {
                failed += 1;
                println!("FAIL {name}: error: {err}");
            }
        }
    }
    for line in info {
        println!("{line}");
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

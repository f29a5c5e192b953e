// SPDX-License-Identifier: MIT OR Apache-2.0

//! Command-line pipeline: fixtures, fits, sweeps, behaviour and mechanism
//! runs, each writing versioned artifacts plus a `<command>.manifest.json`.

mod config;
mod experiments;
mod stages;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use vass::corpus_store::{fnv1a64, load_artifact, save_artifact, write_atomic, Artifact, Provenance};
use vass::VassError;

pub use config::PipelineConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("missing artifact {}: {hint}", path.display())]
    Missing { path: PathBuf, hint: String },
    #[error("partial failure: {0}")]
    Partial(String),
    #[error(transparent)]
    Vass(#[from] VassError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Missing { .. } => 3,
            Self::Partial(_) => 4,
            Self::Vass(_) => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "vass", version, about = "Valence-arousal subspace analysis pipeline")]
pub struct Cli {
    /// JSON pipeline config; flags below override its keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; defaults to the config's `out_dir`
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Root seed for every named sub-stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker cap; falls back to VASS_THREADS.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Repeat for more log detail
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ToyKind {
    Random,
    Ladder,
    Refusal,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write planted fixtures: activations, ratings, lexicons, toy models.
    Synth,
    /// Emotion vectors from an activation dump.
    Vectors,
    /// Per-layer valence/arousal axes and the recovery curve.
    Fit,
    /// Circle fits and angular layouts of the projected emotion vectors.
    Geometry,
    /// Correlate projected word activations with lexicon norms.
    Lexicon,
    /// Angle × strength steering sweep scored for affect.
    Sweep,
    /// Refusal or sycophancy benchmark under arousal steering, with controls.
    Behavior,
    /// Unembedding geometry, log-odds, logit lens, clamping and ablation.
    Mechanism,
    /// Summarize the artifacts of one configuration.
    Report {
        /// Accept artifacts whose config hashes differ.
        #[arg(long)]
        force: bool,
    },
    /// Build a toy model and export it with its tokenizer map.
    Toy {
        #[arg(long, value_enum, default_value = "refusal")]
        kind: ToyKind,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        map: Option<PathBuf>,
    },
    /// Print the resolved configuration as JSON.
    Config,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Synth => "synth",
            Self::Vectors => "vectors",
            Self::Fit => "fit",
            Self::Geometry => "geometry",
            Self::Lexicon => "lexicon",
            Self::Sweep => "sweep",
            Self::Behavior => "behavior",
            Self::Mechanism => "mechanism",
            Self::Report { .. } => "report",
            Self::Toy { .. } => "toy",
            Self::Config => "config",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub fnv1a64: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub failures: Vec<String>,
}

pub const MANIFEST_KIND: &str = "manifest";

pub fn manifest_path(out: &Path, command: &str) -> PathBuf {
    out.join(format!("{command}.manifest.json"))
}

/// One command's context: resolved config, output directory and the files
/// it reads and writes.
pub struct Run {
    pub cfg: PipelineConfig,
    pub out: PathBuf,
    pub hash: String,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    failures: Vec<String>,
}

impl Run {
    pub fn new(cfg: PipelineConfig) -> Self {
        let hash = cfg.hash();
        let out = cfg.out_dir.clone();
        Self {
            cfg,
            out,
            hash,
            inputs: Vec::new(),
            outputs: Vec::new(),
            failures: Vec::new(),
        }
    }

    pub fn provenance(&self) -> Provenance {
        Provenance {
            config_hash: self.hash.clone(),
            seed: self.cfg.seed,
        }
    }

    pub fn fixture(&self, name: &str) -> PathBuf {
        self.out.join("fixtures").join(name)
    }

    /// A configured path, or the `synth` fixture of that name.
    pub fn input_or_fixture(&mut self, configured: &Option<PathBuf>, fixture: &str) -> CliResult<PathBuf> {
        match configured {
            Some(p) => self.require(p.clone(), "check the configured path".into()),
            None => self.input(self.fixture(fixture), "synth"),
        }
    }

    /// An artifact of this run produced by `producer`.
    pub fn upstream(&mut self, name: &str, producer: &str) -> CliResult<PathBuf> {
        self.input(self.out.join(name), producer)
    }

    /// An input file produced by the `producer` command.
    pub fn input(&mut self, path: PathBuf, producer: &str) -> CliResult<PathBuf> {
        self.require(path, format!("run `vass {producer}` first"))
    }

    fn require(&mut self, path: PathBuf, hint: String) -> CliResult<PathBuf> {
        if !path.is_file() {
            return Err(CliError::Missing { path, hint });
        }
        if !self.inputs.contains(&path) {
            self.inputs.push(path.clone());
        }
        Ok(path)
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let path = self.out.join(rel);
        write_atomic(&path, bytes)?;
        self.outputs.push(path.clone());
        Ok(path)
    }

    /// Registers a file written outside [`Run::write`].
    pub fn record(&mut self, path: PathBuf) {
        self.outputs.push(path);
    }

    pub fn artifact<T: Serialize>(&mut self, rel: &str, kind: &str, payload: T) -> CliResult<()> {
        let path = self.out.join(rel);
        save_artifact(&Artifact::new(kind, self.provenance(), payload), &path)?;
        self.outputs.push(path);
        Ok(())
    }

    /// Loads an artifact, warning when it came from another configuration.
    pub fn load<T: serde::de::DeserializeOwned>(&mut self, rel: &str, kind: &str, producer: &str) -> CliResult<T> {
        let path = self.upstream(rel, producer)?;
        let a: Artifact<T> = load_artifact(&path, kind)?;
        if a.provenance.config_hash != self.hash {
            log::warn!(
                "{} was written under config {}, current config is {}",
                path.display(),
                a.provenance.config_hash,
                self.hash
            );
        }
        Ok(a.payload)
    }

    pub fn fail(&mut self, item: impl Into<String>) {
        let item = item.into();
        log::error!("{item}");
        self.failures.push(item);
    }

    fn digest(&self, path: &Path) -> CliResult<FileDigest> {
        let bytes = std::fs::read(path).map_err(VassError::from)?;
        let shown = path.strip_prefix(&self.out).unwrap_or(path);
        Ok(FileDigest {
            path: shown.to_string_lossy().replace('\\', "/"),
            fnv1a64: format!("{:016x}", fnv1a64(&bytes)),
        })
    }

    pub fn finish(self, command: &str) -> CliResult<()> {
        let manifest = Manifest {
            command: command.to_string(),
            inputs: self.inputs.iter().map(|p| self.digest(p)).collect::<CliResult<_>>()?,
            outputs: self.outputs.iter().map(|p| self.digest(p)).collect::<CliResult<_>>()?,
            failures: self.failures.clone(),
        };
        save_artifact(
            &Artifact::new(MANIFEST_KIND, self.provenance(), manifest),
            &manifest_path(&self.out, command),
        )?;
        if self.failures.is_empty() {
            Ok(())
        } else {
            Err(CliError::Partial(format!("{} item(s) failed: {}", self.failures.len(), self.failures.join("; "))))
        }
    }
}

fn resolve_config(cli: &Cli) -> CliResult<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    } else if cfg.threads.is_none() {
        if let Ok(v) = std::env::var("VASS_THREADS") {
            let n = v
                .parse()
                .map_err(|_| CliError::Config(format!("VASS_THREADS must be a positive integer, got `{v}`")))?;
            cfg.threads = Some(n);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: Cli) -> CliResult<()> {
    let cfg = resolve_config(&cli)?;
    if let Some(n) = cfg.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::debug!("thread pool already configured: {e}");
        }
    }
    let name = cli.command.name();
    if let Command::Config = cli.command {
        let mut text = serde_json::to_string_pretty(&cfg).map_err(VassError::from)?;
        text.push('\n');
        return match std::io::Write::write_all(&mut std::io::stdout().lock(), text.as_bytes()) {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(VassError::from(e).into()),
            _ => Ok(()),
        };
    }
    let mut run = Run::new(cfg);
    log::info!("{name}: config {} seed {}", run.hash, run.cfg.seed);
    match cli.command {
        Command::Synth => stages::synth(&mut run)?,
        Command::Vectors => stages::vectors(&mut run)?,
        Command::Fit => stages::fit(&mut run)?,
        Command::Geometry => stages::geometry(&mut run)?,
        Command::Lexicon => stages::lexicon(&mut run)?,
        Command::Sweep => experiments::sweep(&mut run)?,
        Command::Behavior => experiments::behavior(&mut run)?,
        Command::Mechanism => experiments::mechanism(&mut run)?,
        Command::Report { force } => experiments::report(&mut run, force)?,
        Command::Toy { kind, output, map } => stages::toy(&mut run, kind, output, map)?,
        Command::Config => unreachable!("handled above"),
    }
    run.finish(name)
}

//! Command-line surface. Each subcommand loads its inputs, calls the
//! matching library routine and writes the result; nothing is computed here
//! that the library does not expose.
//!
//! Exit codes: 0 on success, 1 on validation or I/O failure, 2 on usage
//! errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::embeddings::EmbeddingStore;
use crate::error::{Error, Result};
use crate::eval::ConfusionMatrix;
use crate::fusion::{fuse_and_decode, Background, EvidenceBundle, EvidenceKind};
use crate::lab::{
    generate_scene, run_sweep_with_sources, sweep_csv, ExcludedPolicy, SceneParams, Selection,
    SweepAxes, SweepOptions,
};
use crate::prior::{build_prior, AggregationKind, NormalizeOrder, PriorStack};
use crate::prompts::PromptBank;
use crate::tensor::{
    load_grid, load_grid_with, load_labels, save_grid, save_labels, write_pgm, DenseGrid,
    LoadOptions,
};

#[derive(Parser, Debug)]
#[command(name = "segfuse", version, about = "Evidence calibration and fusion for open-vocabulary segmentation")]
struct Cli {
    /// `key = value` run configuration; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (outputs do not depend on this).
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute the log semantic prior stack from features and embeddings.
    Prior(PriorArgs),
    /// Fuse mask evidence, presence logits and a prior into a label map.
    Fuse(FuseArgs),
    /// Confusion-matrix mIoU report as CSV on stdout.
    Eval(EvalArgs),
    /// Competition / sensitivity sweep over a synthetic scene.
    Sweep(SweepArgs),
    /// Write a synthetic scene's inputs to a directory.
    Gen(GenArgs),
}

#[derive(Args, Debug)]
struct PriorArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    prompts: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Output height; defaults to the feature grid height.
    #[arg(long)]
    height: Option<usize>,
    /// Output width; defaults to the feature grid width.
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    tau_s: Option<f64>,
    #[arg(long)]
    aggregation: Option<AggregationKind>,
    #[arg(long)]
    chunk: Option<usize>,
    #[arg(long)]
    normalize_order: Option<NormalizeOrder>,
    #[arg(long)]
    allow_nonfinite: bool,
}

#[derive(Args, Debug)]
struct FuseArgs {
    #[arg(long)]
    evidence: PathBuf,
    #[arg(long)]
    presence: PathBuf,
    #[arg(long)]
    prior: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "logits")]
    evidence_kind: EvidenceKind,
    #[arg(long)]
    lambda_prior: Option<f64>,
    /// Enable background rejection at the configured threshold (default 0).
    #[arg(long)]
    background: bool,
    /// Enable background rejection at this threshold.
    #[arg(long, allow_negative_numbers = true)]
    background_threshold: Option<f64>,
    #[arg(long)]
    background_index: Option<u32>,
    /// Also write the labels as an 8-bit PGM.
    #[arg(long)]
    pgm: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    classes: usize,
    #[arg(long)]
    ignore_index: Option<u32>,
}

#[derive(Args, Debug, Clone)]
struct SceneArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 32)]
    height: usize,
    #[arg(long, default_value_t = 32)]
    width: usize,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    #[arg(long, default_value_t = 4)]
    classes: usize,
    #[arg(long, default_value_t = 3)]
    synonyms: usize,
    #[arg(long, default_value_t = 0.3)]
    drift: f64,
    #[arg(long, default_value_t = 0.5)]
    overlap: f64,
    #[arg(long, default_value_t = 1)]
    feature_stride: usize,
    #[arg(long, default_value_t = 2.0)]
    mask_signal: f64,
    #[arg(long, default_value_t = 1.0)]
    mask_noise: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    presence_gain: f64,
    #[arg(long, default_value_t = 0.0)]
    confuser_mix: f64,
    #[arg(long, default_value_t = 0.0)]
    confuser_leak: f64,
}

impl SceneArgs {
    fn params(&self) -> SceneParams {
        SceneParams {
            seed: self.seed,
            height: self.height,
            width: self.width,
            dim: self.dim,
            classes: self.classes,
            synonyms_per_class: self.synonyms,
            drift: self.drift,
            overlap: self.overlap,
            feature_stride: self.feature_stride,
            mask_signal: self.mask_signal,
            mask_noise: self.mask_noise,
            presence_gain: self.presence_gain,
            confuser_mix: self.confuser_mix,
            confuser_leak: self.confuser_leak,
        }
    }
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    scene: SceneArgs,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    p: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "easy")]
    selection: Vec<Selection>,
    #[arg(long, value_delimiter = ',')]
    lambda_prior: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    tau_s: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    aggregation: Vec<AggregationKind>,
    #[arg(long, value_delimiter = ',', default_value = "scene")]
    feature_source: Vec<String>,
    /// Alternate feature grid from a CFT1 file, as `name=path`.
    #[arg(long = "feature-file")]
    feature_files: Vec<String>,
    /// Alternate synthetic feature grid with its own noise level, as `name=overlap`.
    #[arg(long = "synthetic-source")]
    synthetic_sources: Vec<String>,
    #[arg(long, default_value_t = 0)]
    target: usize,
    #[arg(long, default_value = "ignore")]
    excluded: ExcludedPolicy,
    /// Treat every presence logit as zero.
    #[arg(long)]
    no_presence: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[command(flatten)]
    scene: SceneArgs,
    #[arg(long)]
    out_dir: PathBuf,
}

/// Runs the CLI with `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = sink.write_all(rendered.as_bytes());
            return code;
        }
    };
    // Output is buffered so the work can move onto a sized thread pool.
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let result = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n as usize).build() {
            Ok(pool) => pool.install(|| dispatch(&cli, &mut out, &mut err)),
            Err(e) => Err(Error::InvalidArgument(format!("thread pool: {e}"))),
        },
        None => dispatch(&cli, &mut out, &mut err),
    };
    let _ = stdout.write_all(&out);
    let _ = stderr.write_all(&err);
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error[{}]: {e}", e.code());
            1
        }
    }
}

fn dispatch(cli: &Cli, stdout: &mut Vec<u8>, stderr: &mut Vec<u8>) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match &cli.command {
        Command::Prior(a) => cmd_prior(a, cfg, stderr),
        Command::Fuse(a) => cmd_fuse(a, cfg),
        Command::Eval(a) => cmd_eval(a, stdout),
        Command::Sweep(a) => cmd_sweep(a, cfg, stdout),
        Command::Gen(a) => cmd_gen(a),
    }
}

fn cmd_prior(a: &PriorArgs, mut cfg: RunConfig, stderr: &mut dyn Write) -> Result<()> {
    if let Some(v) = a.tau_s {
        cfg.tau_s = v;
    }
    if let Some(v) = a.aggregation {
        cfg.aggregation = v;
    }
    if let Some(v) = a.chunk {
        cfg.chunk = v;
    }
    if let Some(v) = a.normalize_order {
        cfg.normalize_order = v;
    }
    cfg.validate()?;
    let opts = LoadOptions {
        allow_nonfinite: a.allow_nonfinite,
    };
    let features = load_grid_with(&a.features, opts)?;
    let bank = PromptBank::load(&a.prompts)?;
    let store = EmbeddingStore::load(&a.embeddings, &bank)?;
    let h = a.height.unwrap_or(features.height());
    let w = a.width.unwrap_or(features.width());
    let prior = build_prior(&features, &store, &bank, &cfg.prior_config(), h, w)?;
    if prior.zero_norm_pixels > 0 {
        let _ = writeln!(
            stderr,
            "warning: {} feature pixels had zero norm and were mapped to the zero vector",
            prior.zero_norm_pixels
        );
    }
    save_grid(&prior.log_pi, &a.out)
}

/// Presence logits stored as any CFT1 grid holding exactly `classes` values.
fn load_presence(path: &Path, classes: usize) -> Result<Vec<f32>> {
    let g = load_grid(path)?;
    if g.data().len() != classes {
        return Err(Error::ShapeMismatch(format!(
            "{}: {} presence logits for {classes} classes",
            path.display(),
            g.data().len()
        )));
    }
    Ok(g.into_data())
}

fn cmd_fuse(a: &FuseArgs, mut cfg: RunConfig) -> Result<()> {
    if let Some(v) = a.lambda_prior {
        cfg.lambda_prior = v;
    }
    if let Some(t) = a.background_threshold {
        cfg.background_threshold = Some(t);
    } else if a.background && cfg.background_threshold.is_none() {
        cfg.background_threshold = Some(crate::fusion::DEFAULT_BACKGROUND_THRESHOLD);
    }
    cfg.validate()?;
    let evidence_grid = load_grid(&a.evidence)?;
    let presence = load_presence(&a.presence, evidence_grid.channels())?;
    let evidence = EvidenceBundle::new(evidence_grid, a.evidence_kind, presence)?;
    let prior = PriorStack::from_log_pi(load_grid(&a.prior)?);
    let mut fusion = cfg.fusion_config();
    if let Some(bg) = fusion.background.as_mut() {
        *bg = Background {
            index: a.background_index,
            ..*bg
        };
    }
    let labels = fuse_and_decode(&evidence, &prior, &fusion)?;
    save_labels(&labels, &a.out)?;
    if let Some(pgm) = &a.pgm {
        write_pgm(&labels, pgm)?;
    }
    Ok(())
}

fn cmd_eval(a: &EvalArgs, stdout: &mut dyn Write) -> Result<()> {
    let gt = load_labels(&a.gt)?;
    let pred = load_labels(&a.pred)?;
    let mut cm = ConfusionMatrix::new(a.classes, a.ignore_index);
    cm.accumulate(&gt, &pred)?;
    let report = cm.csv_report()?;
    stdout
        .write_all(report.as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}

fn split_named(spec: &str) -> Result<(String, &str)> {
    let (name, value) = spec
        .split_once('=')
        .ok_or_else(|| Error::InvalidArgument(format!("expected name=value, got {spec:?}")))?;
    Ok((name.trim().to_string(), value.trim()))
}

fn cmd_sweep(a: &SweepArgs, cfg: RunConfig, stdout: &mut dyn Write) -> Result<()> {
    cfg.validate()?;
    let scene = generate_scene(&a.scene.params())?;
    let mut sources: Vec<(String, DenseGrid)> = Vec::new();
    for spec in &a.feature_files {
        let (name, path) = split_named(spec)?;
        sources.push((name, load_grid(path)?));
    }
    for (i, spec) in a.synthetic_sources.iter().enumerate() {
        let (name, overlap) = split_named(spec)?;
        let overlap: f64 = overlap
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad overlap in {spec:?}")))?;
        let seed = a.scene.seed.wrapping_add(1 + i as u64);
        sources.push((name, scene.alternate_features(seed, overlap)?));
    }
    let or_default = |v: &Vec<f64>, d: f64| if v.is_empty() { vec![d] } else { v.clone() };
    let axes = SweepAxes {
        p: a.p.clone(),
        selection: a.selection.clone(),
        lambda_prior: or_default(&a.lambda_prior, cfg.lambda_prior),
        tau_s: or_default(&a.tau_s, cfg.tau_s),
        aggregation: if a.aggregation.is_empty() {
            vec![cfg.aggregation]
        } else {
            a.aggregation.clone()
        },
        feature_source: a.feature_source.clone(),
    };
    let opts = SweepOptions {
        target_class: a.target,
        excluded: a.excluded,
        chunk: cfg.chunk,
        normalize_order: cfg.normalize_order,
        background_threshold: cfg.background_threshold,
        use_presence: !a.no_presence,
    };
    let rows = run_sweep_with_sources(&scene, &axes, &opts, &sources)?;
    let csv = sweep_csv(&rows);
    match &a.out {
        Some(path) => std::fs::write(path, csv).map_err(|e| Error::io(path, e)),
        None => stdout
            .write_all(csv.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

/// File names written by `gen`, relative to the output directory.
pub mod scene_files {
    pub const FEATURES: &str = "features.cft";
    pub const EMBEDDINGS: &str = "embeddings.cft";
    pub const PROMPTS: &str = "prompts.txt";
    pub const EVIDENCE: &str = "evidence.cft";
    pub const PRESENCE: &str = "presence.cft";
    pub const GT: &str = "gt.cft";
}

fn cmd_gen(a: &GenArgs) -> Result<()> {
    let scene = generate_scene(&a.scene.params())?;
    let dir = &a.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_grid(&scene.features, dir.join(scene_files::FEATURES))?;
    let store = &scene.embeddings;
    let rows = DenseGrid::new(vec![store.len(), store.dim()], store.vectors().to_vec())?;
    save_grid(&rows, dir.join(scene_files::EMBEDDINGS))?;
    let prompts = dir.join(scene_files::PROMPTS);
    std::fs::write(&prompts, scene.bank.to_text()).map_err(|e| Error::io(&prompts, e))?;
    save_grid(scene.evidence.mask_evidence(), dir.join(scene_files::EVIDENCE))?;
    let presence = DenseGrid::new(
        vec![1, scene.evidence.num_classes()],
        scene.evidence.presence().to_vec(),
    )?;
    save_grid(&presence, dir.join(scene_files::PRESENCE))?;
    save_labels(&scene.gt, dir.join(scene_files::GT))
}

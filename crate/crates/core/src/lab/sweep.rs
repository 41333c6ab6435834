use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;

use super::competition::{select_competitors, CompetitionSpec, Selection};
use super::scene::SyntheticScene;
use crate::error::{Error, Result};
use crate::eval::ConfusionMatrix;
use crate::fusion::{fuse_and_decode, structural_argmax, Background, FusionConfig};
use crate::prior::{build_prior, AggregationKind, NormalizeOrder, PriorConfig, DEFAULT_TAU_S};
use crate::prompts::DEFAULT_CHUNK;
use crate::tensor::{DenseGrid, LabelMap};

/// Name of the scene's own feature grid on the `feature_source` axis.
pub const PRIMARY_SOURCE: &str = "scene";

pub const SWEEP_CSV_HEADER: &str = "p,selection,lambda_prior,tau_s,aggregation,feature_source,miou";

const IGNORE: u32 = u32::MAX;

/// What happens to ground-truth pixels of classes outside the competitor set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ExcludedPolicy {
    /// Left out of the confusion matrix.
    #[default]
    Ignore,
    /// Counted as an extra background class.
    MergeBackground,
}

impl FromStr for ExcludedPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ignore" => Ok(ExcludedPolicy::Ignore),
            "merge-background" | "merge_background" => Ok(ExcludedPolicy::MergeBackground),
            other => Err(Error::InvalidArgument(format!(
                "unknown excluded policy {other:?} (expected ignore or merge-background)"
            ))),
        }
    }
}

/// Values swept on each axis. Settings are the cartesian product, enumerated
/// with `p` outermost and `feature_source` innermost, each axis in the order
/// given.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepAxes {
    pub p: Vec<f64>,
    pub selection: Vec<Selection>,
    pub lambda_prior: Vec<f64>,
    pub tau_s: Vec<f64>,
    pub aggregation: Vec<AggregationKind>,
    pub feature_source: Vec<String>,
}

impl Default for SweepAxes {
    fn default() -> Self {
        Self {
            p: vec![1.0],
            selection: vec![Selection::Easy],
            lambda_prior: vec![crate::fusion::DEFAULT_LAMBDA_PRIOR],
            tau_s: vec![DEFAULT_TAU_S],
            aggregation: vec![AggregationKind::LogSumExp],
            feature_source: vec![PRIMARY_SOURCE.to_string()],
        }
    }
}

impl SweepAxes {
    pub fn settings(&self) -> Result<Vec<SweepSetting>> {
        let lens = [
            ("p", self.p.len()),
            ("selection", self.selection.len()),
            ("lambda_prior", self.lambda_prior.len()),
            ("tau_s", self.tau_s.len()),
            ("aggregation", self.aggregation.len()),
            ("feature_source", self.feature_source.len()),
        ];
        if let Some((name, _)) = lens.iter().find(|(_, n)| *n == 0) {
            return Err(Error::InvalidArgument(format!("sweep axis {name} is empty")));
        }
        let mut out = Vec::new();
        for &p in &self.p {
            for &selection in &self.selection {
                for &lambda_prior in &self.lambda_prior {
                    for &tau_s in &self.tau_s {
                        for &aggregation in &self.aggregation {
                            for source in &self.feature_source {
                                out.push(SweepSetting {
                                    p,
                                    selection,
                                    lambda_prior,
                                    tau_s,
                                    aggregation,
                                    feature_source: source.clone(),
                                });
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSetting {
    pub p: f64,
    pub selection: Selection,
    pub lambda_prior: f64,
    pub tau_s: f64,
    pub aggregation: AggregationKind,
    pub feature_source: String,
}

/// Settings shared by every row of a sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepOptions {
    pub target_class: usize,
    pub excluded: ExcludedPolicy,
    pub chunk: usize,
    pub normalize_order: NormalizeOrder,
    pub background_threshold: Option<f64>,
    /// Add the presence logits; when false they are treated as zero.
    pub use_presence: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            target_class: 0,
            excluded: ExcludedPolicy::Ignore,
            chunk: DEFAULT_CHUNK,
            normalize_order: NormalizeOrder::Both,
            background_threshold: None,
            use_presence: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub setting: SweepSetting,
    pub miou: f64,
}

/// Ground truth re-indexed into the competitor set; other classes become
/// ignored or background per `policy`.
fn restrict_gt(gt: &LabelMap, competitors: &[usize], policy: ExcludedPolicy) -> LabelMap {
    let k = competitors.len() as u32;
    let data = gt
        .data()
        .iter()
        .map(|&l| match competitors.iter().position(|&c| c == l as usize) {
            Some(i) => i as u32,
            None => match policy {
                ExcludedPolicy::Ignore => IGNORE,
                ExcludedPolicy::MergeBackground => k,
            },
        })
        .collect();
    LabelMap::new(gt.height(), gt.width(), data).unwrap()
}

fn score(
    gt: &LabelMap,
    pred: &LabelMap,
    competitors: &[usize],
    opts: &SweepOptions,
) -> Result<f64> {
    let restricted = restrict_gt(gt, competitors, opts.excluded);
    let with_background =
        opts.excluded == ExcludedPolicy::MergeBackground || opts.background_threshold.is_some();
    let classes = competitors.len() + usize::from(with_background);
    let mut cm = ConfusionMatrix::new(classes, Some(IGNORE));
    cm.accumulate(&restricted, pred)?;
    cm.miou()
}

pub fn evaluate_setting(
    scene: &SyntheticScene,
    features: &DenseGrid,
    setting: &SweepSetting,
    opts: &SweepOptions,
) -> Result<f64> {
    let competitors = select_competitors(
        &scene.embeddings,
        &scene.bank,
        &CompetitionSpec {
            target_class: opts.target_class,
            p: setting.p,
            selection: setting.selection,
        },
    )?;
    let bank = scene.bank.subset(&competitors)?;
    let store = scene.embeddings.subset(&competitors)?;
    let mut evidence = scene.evidence.select_classes(&competitors)?;
    if !opts.use_presence {
        evidence = evidence.without_presence();
    }
    let prior_cfg = PriorConfig {
        mode: setting.aggregation.with_tau(setting.tau_s),
        chunk: opts.chunk,
        normalize_order: opts.normalize_order,
    };
    let (h, w) = (scene.gt.height(), scene.gt.width());
    let prior = build_prior(features, &store, &bank, &prior_cfg, h, w)?;
    let fusion_cfg = FusionConfig {
        lambda_prior: setting.lambda_prior,
        background: opts.background_threshold.map(|threshold| Background {
            threshold,
            index: None,
        }),
    };
    let pred = fuse_and_decode(&evidence, &prior, &fusion_cfg)?;
    score(&scene.gt, &pred, &competitors, opts)
}

/// mIoU of the structural argmax alone over the same competitor set, with
/// no prior and no presence term.
pub fn baseline_miou(
    scene: &SyntheticScene,
    spec: &CompetitionSpec,
    opts: &SweepOptions,
) -> Result<f64> {
    let competitors = select_competitors(&scene.embeddings, &scene.bank, spec)?;
    let evidence = scene.evidence.select_classes(&competitors)?;
    let pred = structural_argmax(&evidence);
    let opts = SweepOptions {
        background_threshold: None,
        ..*opts
    };
    score(&scene.gt, &pred, &competitors, &opts)
}

pub fn run_sweep(scene: &SyntheticScene, axes: &SweepAxes, opts: &SweepOptions) -> Result<Vec<SweepRow>> {
    run_sweep_with_sources(scene, axes, opts, &[])
}

/// Sweep where `feature_source` names either [`PRIMARY_SOURCE`] or one of
/// the supplied alternate feature grids. Settings run in parallel; rows come
/// back in enumeration order.
pub fn run_sweep_with_sources(
    scene: &SyntheticScene,
    axes: &SweepAxes,
    opts: &SweepOptions,
    sources: &[(String, DenseGrid)],
) -> Result<Vec<SweepRow>> {
    let settings = axes.settings()?;
    let lookup = |name: &str| -> Result<&DenseGrid> {
        if let Some((_, g)) = sources.iter().find(|(n, _)| n == name) {
            return Ok(g);
        }
        if name == PRIMARY_SOURCE {
            return Ok(&scene.features);
        }
        Err(Error::InvalidArgument(format!("unknown feature source {name:?}")))
    };
    for s in &settings {
        lookup(&s.feature_source)?;
    }
    settings
        .into_par_iter()
        .map(|setting| {
            let features = lookup(&setting.feature_source)?;
            let miou = evaluate_setting(scene, features, &setting, opts)?;
            Ok(SweepRow { setting, miou })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let s = &r.setting;
        writeln!(
            out,
            "{:.6},{},{:.6},{:.6},{},{},{:.6}",
            s.p, s.selection, s.lambda_prior, s.tau_s, s.aggregation, s.feature_source, r.miou
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lab::{generate_scene, SceneParams};

    fn clean_scene() -> SyntheticScene {
        generate_scene(&SceneParams {
            seed: 9,
            height: 16,
            width: 16,
            dim: 8,
            classes: 4,
            synonyms_per_class: 2,
            drift: 0.0,
            overlap: 0.0,
            mask_noise: 0.0,
            ..SceneParams::default()
        })
        .unwrap()
    }

    #[test]
    fn perfect_evidence_scores_one() {
        let scene = clean_scene();
        let axes = SweepAxes { lambda_prior: vec![0.0], ..SweepAxes::default() };
        let rows = run_sweep(&scene, &axes, &SweepOptions::default()).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].miou, 1.0);
    }

    #[test]
    fn repeated_settings_repeat_values() {
        let scene = generate_scene(&SceneParams { seed: 4, height: 12, width: 12, ..SceneParams::default() }).unwrap();
        let axes = SweepAxes { p: vec![0.5, 0.5], ..SweepAxes::default() };
        let rows = run_sweep(&scene, &axes, &SweepOptions::default()).unwrap();
        assert_eq!(rows[0].miou, rows[1].miou);
    }

    #[test]
    fn enumeration_order_and_csv() {
        let axes = SweepAxes {
            p: vec![0.0, 1.0],
            selection: vec![Selection::Easy, Selection::Hard],
            lambda_prior: vec![0.3, 0.7],
            ..SweepAxes::default()
        };
        let settings = axes.settings().unwrap();
        assert_eq!(settings.len(), 8);
        assert_eq!((settings[1].p, settings[1].selection, settings[1].lambda_prior), (0.0, Selection::Easy, 0.7));
        assert_eq!((settings[2].p, settings[2].selection), (0.0, Selection::Hard));
        assert_eq!(settings[4].p, 1.0);

        let rows = vec![SweepRow { setting: settings[0].clone(), miou: 0.5 }];
        assert_eq!(
            sweep_csv(&rows),
            format!("{SWEEP_CSV_HEADER}\n0.000000,easy,0.300000,0.100000,lse,scene,0.500000\n")
        );
        assert!(SweepAxes { p: vec![], ..SweepAxes::default() }.settings().is_err());
    }

    #[test]
    fn unknown_source_is_an_error() {
        let scene = clean_scene();
        let axes = SweepAxes { feature_source: vec!["dino".into()], ..SweepAxes::default() };
        assert!(run_sweep(&scene, &axes, &SweepOptions::default()).is_err());
        let alt = scene.alternate_features(1, 0.8).unwrap();
        let rows = run_sweep_with_sources(&scene, &axes, &SweepOptions::default(), &[("dino".into(), alt)]).unwrap();
        assert_eq!(rows.len(), 1);
    }

    #[test]
    fn zero_lambda_without_presence_matches_baseline() {
        let scene = generate_scene(&SceneParams { seed: 21, height: 16, width: 16, ..SceneParams::default() }).unwrap();
        let opts = SweepOptions { use_presence: false, ..SweepOptions::default() };
        let axes = SweepAxes {
            p: vec![0.0, 0.5, 1.0],
            selection: vec![Selection::Easy, Selection::Hard],
            lambda_prior: vec![0.0],
            ..SweepAxes::default()
        };
        for row in run_sweep(&scene, &axes, &opts).unwrap() {
            let spec = CompetitionSpec { target_class: 0, p: row.setting.p, selection: row.setting.selection };
            assert_eq!(row.miou, baseline_miou(&scene, &spec, &opts).unwrap());
        }
    }

    #[test]
    fn merge_background_counts_excluded_pixels() {
        let scene = clean_scene();
        let axes = SweepAxes { p: vec![0.0], lambda_prior: vec![0.0], ..SweepAxes::default() };
        let ignore = run_sweep(&scene, &axes, &SweepOptions::default()).unwrap();
        assert_eq!(ignore[0].miou, 1.0);
        let merged = SweepOptions { excluded: ExcludedPolicy::MergeBackground, ..SweepOptions::default() };
        let rows = run_sweep(&scene, &axes, &merged).unwrap();
        // every non-target pixel is predicted as the target: IoU_bg = 0
        assert!(rows[0].miou < 1.0);
    }
}

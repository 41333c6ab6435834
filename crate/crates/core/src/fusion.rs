//! Unified-scale fusion of structural mask evidence, the semantic log prior
//! and image-level presence logits, and decoding to a label map.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::prior::PriorStack;
use crate::tensor::{DenseGrid, LabelMap};

/// Clamp applied to mask probabilities before the logit transform.
pub const PROB_EPSILON: f64 = 1e-6;

pub const DEFAULT_LAMBDA_PRIOR: f64 = 0.7;

pub const DEFAULT_BACKGROUND_THRESHOLD: f64 = 0.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EvidenceKind {
    #[default]
    Logits,
    Probabilities,
}

impl FromStr for EvidenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "logits" | "logit" => Ok(EvidenceKind::Logits),
            "probabilities" | "probs" | "prob" => Ok(EvidenceKind::Probabilities),
            other => Err(Error::InvalidArgument(format!(
                "unknown evidence kind {other:?} (expected logits or probabilities)"
            ))),
        }
    }
}

impl fmt::Display for EvidenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvidenceKind::Logits => "logits",
            EvidenceKind::Probabilities => "probabilities",
        })
    }
}

/// Per-class structural evidence for one image.
#[derive(Clone, Debug, PartialEq)]
pub struct EvidenceBundle {
    mask_evidence: DenseGrid,
    kind: EvidenceKind,
    presence: Vec<f32>,
}

impl EvidenceBundle {
    pub fn new(mask_evidence: DenseGrid, kind: EvidenceKind, presence: Vec<f32>) -> Result<Self> {
        if presence.len() != mask_evidence.channels() {
            return Err(Error::ShapeMismatch(format!(
                "{} presence logits for {} evidence channels",
                presence.len(),
                mask_evidence.channels()
            )));
        }
        if kind == EvidenceKind::Probabilities {
            if let Some(i) = mask_evidence
                .data()
                .iter()
                .position(|p| !(0.0..=1.0).contains(p))
            {
                return Err(Error::InvalidArgument(format!(
                    "probability {} at flat index {i} is outside [0, 1]",
                    mask_evidence.data()[i]
                )));
            }
        }
        Ok(Self {
            mask_evidence,
            kind,
            presence,
        })
    }

    pub fn mask_evidence(&self) -> &DenseGrid {
        &self.mask_evidence
    }

    pub fn kind(&self) -> EvidenceKind {
        self.kind
    }

    pub fn presence(&self) -> &[f32] {
        &self.presence
    }

    pub fn num_classes(&self) -> usize {
        self.presence.len()
    }

    /// Same bundle with every presence logit replaced by zero.
    pub fn without_presence(&self) -> Self {
        Self {
            presence: vec![0.0; self.presence.len()],
            ..self.clone()
        }
    }

    /// Bundle restricted to the listed classes.
    pub fn select_classes(&self, classes: &[usize]) -> Result<Self> {
        let mask_evidence = self.mask_evidence.select_channels(classes)?;
        let presence = classes.iter().map(|&c| self.presence[c]).collect();
        Ok(Self {
            mask_evidence,
            kind: self.kind,
            presence,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Background {
    /// Pixels whose best fused score is below this value are rejected.
    pub threshold: f64,
    /// Defaults to the number of foreground classes.
    pub index: Option<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FusionConfig {
    pub lambda_prior: f64,
    pub background: Option<Background>,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            lambda_prior: DEFAULT_LAMBDA_PRIOR,
            background: None,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_prior >= 0.0 && self.lambda_prior.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "lambda_prior must be a finite non-negative number, got {}",
                self.lambda_prior
            )));
        }
        if let Some(bg) = self.background {
            if bg.threshold.is_nan() {
                return Err(Error::InvalidArgument("background threshold is NaN".into()));
            }
        }
        Ok(())
    }

    fn background_index(&self, classes: usize) -> Result<Option<(f64, u32)>> {
        let Some(bg) = self.background else {
            return Ok(None);
        };
        let index = bg.index.unwrap_or(classes as u32);
        if (index as usize) < classes {
            return Err(Error::BackgroundCollision { index, classes });
        }
        Ok(Some((bg.threshold, index)))
    }
}

/// Fused scores `S_c(x)` as an `H × W × C` grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreStack {
    pub scores: DenseGrid,
}

#[inline]
fn evidence_logit(value: f32, kind: EvidenceKind) -> f64 {
    match kind {
        EvidenceKind::Logits => value as f64,
        EvidenceKind::Probabilities => {
            let p = (value as f64).clamp(PROB_EPSILON, 1.0 - PROB_EPSILON);
            (p / (1.0 - p)).ln()
        }
    }
}

#[inline]
fn fused_score(evidence: f32, kind: EvidenceKind, log_pi: f32, presence: f32, lambda: f64) -> f32 {
    (evidence_logit(evidence, kind) + lambda * log_pi as f64 + presence as f64) as f32
}

/// Structural evidence on the logit scale. Logits pass through untouched.
pub fn to_logit(evidence: &EvidenceBundle) -> DenseGrid {
    let grid = evidence.mask_evidence();
    match evidence.kind() {
        EvidenceKind::Logits => grid.clone(),
        kind => DenseGrid::new(
            grid.dims().to_vec(),
            grid.data()
                .par_iter()
                .map(|&v| evidence_logit(v, kind) as f32)
                .collect(),
        )
        .unwrap(),
    }
}

fn check_shapes(evidence: &EvidenceBundle, prior: &PriorStack) -> Result<(usize, usize, usize)> {
    let e = evidence.mask_evidence();
    let p = &prior.log_pi;
    if e.height() != p.height() || e.width() != p.width() || e.channels() != p.channels() {
        return Err(Error::ShapeMismatch(format!(
            "evidence {}x{}x{} vs prior {}x{}x{}",
            e.height(),
            e.width(),
            e.channels(),
            p.height(),
            p.width(),
            p.channels()
        )));
    }
    Ok((e.height(), e.width(), e.channels()))
}

/// `S_c(x) = logit(P_c(x)) + λ·log π_c(x) + z_c`, with `z_c` broadcast over
/// every pixel.
pub fn fuse(evidence: &EvidenceBundle, prior: &PriorStack, cfg: &FusionConfig) -> Result<ScoreStack> {
    cfg.validate()?;
    let (h, w, c) = check_shapes(evidence, prior)?;
    let kind = evidence.kind();
    let presence = evidence.presence();
    let lambda = cfg.lambda_prior;
    let mut out = vec![0.0f32; h * w * c];
    out.par_chunks_mut(c)
        .zip(evidence.mask_evidence().data().par_chunks(c))
        .zip(prior.log_pi.data().par_chunks(c))
        .for_each(|((dst, ev), lp)| {
            for k in 0..c {
                dst[k] = fused_score(ev[k], kind, lp[k], presence[k], lambda);
            }
        });
    Ok(ScoreStack {
        scores: DenseGrid::new(vec![h, w, c], out)?,
    })
}

/// Index of the largest score; ties go to the smallest index.
#[inline]
fn argmax(scores: &[f32]) -> (usize, f32) {
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = k;
        }
    }
    (best, scores[best])
}

#[inline]
fn pick(best: usize, top: f32, background: Option<(f64, u32)>) -> u32 {
    match background {
        Some((threshold, index)) if (top as f64) < threshold => index,
        _ => best as u32,
    }
}

pub fn decode(scores: &ScoreStack, cfg: &FusionConfig) -> Result<LabelMap> {
    let g = &scores.scores;
    let c = g.channels();
    let background = cfg.background_index(c)?;
    let labels: Vec<u32> = g
        .data()
        .par_chunks(c)
        .map(|px| {
            let (best, top) = argmax(px);
            pick(best, top, background)
        })
        .collect();
    Ok(LabelMap::new(g.height(), g.width(), labels)?.with_background(background.map(|b| b.1)))
}

/// Single-pass `decode(fuse(..))`; bitwise identical to the two-step route.
pub fn fuse_and_decode(
    evidence: &EvidenceBundle,
    prior: &PriorStack,
    cfg: &FusionConfig,
) -> Result<LabelMap> {
    cfg.validate()?;
    let (h, w, c) = check_shapes(evidence, prior)?;
    let background = cfg.background_index(c)?;
    let kind = evidence.kind();
    let presence = evidence.presence();
    let lambda = cfg.lambda_prior;
    let labels: Vec<u32> = evidence
        .mask_evidence()
        .data()
        .par_chunks(c)
        .zip(prior.log_pi.data().par_chunks(c))
        .map_init(
            || vec![0.0f32; c],
            |buf, (ev, lp)| {
                for k in 0..c {
                    buf[k] = fused_score(ev[k], kind, lp[k], presence[k], lambda);
                }
                let (best, top) = argmax(buf);
                pick(best, top, background)
            },
        )
        .collect();
    Ok(LabelMap::new(h, w, labels)?.with_background(background.map(|b| b.1)))
}

/// Per-pixel argmax of the structural evidence alone.
pub fn structural_argmax(evidence: &EvidenceBundle) -> LabelMap {
    let g = evidence.mask_evidence();
    let kind = evidence.kind();
    let labels = g
        .data()
        .par_chunks(g.channels())
        .map(|px| {
            let logits: Vec<f32> = px.iter().map(|&v| evidence_logit(v, kind) as f32).collect();
            argmax(&logits).0 as u32
        })
        .collect();
    LabelMap::new(g.height(), g.width(), labels).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prior::log_prior;
    use proptest::prelude::*;

    fn uniform_prior(h: usize, w: usize, c: usize) -> PriorStack {
        log_prior(&DenseGrid::zeros(vec![h, w, c]).unwrap()).unwrap()
    }

    fn scores(values: &[f32]) -> ScoreStack {
        ScoreStack {
            scores: DenseGrid::new(vec![1, 1, values.len()], values.to_vec()).unwrap(),
        }
    }

    #[test]
    fn logit_transform() {
        let bundle = |p: f32| {
            EvidenceBundle::new(
                DenseGrid::new(vec![1, 1, 1], vec![p]).unwrap(),
                EvidenceKind::Probabilities,
                vec![0.0],
            )
            .unwrap()
        };
        assert_eq!(to_logit(&bundle(0.5)).data(), &[0.0]);
        let hi = to_logit(&bundle(1.0)).data()[0] as f64;
        assert!((hi - 13.8155).abs() < 1e-4);
        let lo = to_logit(&bundle(0.0)).data()[0] as f64;
        assert!((lo + 13.8155).abs() < 1e-4);

        let raw = EvidenceBundle::new(
            DenseGrid::new(vec![1, 1, 1], vec![3.2]).unwrap(),
            EvidenceKind::Logits,
            vec![0.0],
        )
        .unwrap();
        assert_eq!(to_logit(&raw).data(), &[3.2f32]);
    }

    #[test]
    fn bundle_validation() {
        let g = DenseGrid::new(vec![1, 1, 2], vec![0.2, 1.5]).unwrap();
        assert!(EvidenceBundle::new(g.clone(), EvidenceKind::Probabilities, vec![0.0; 2]).is_err());
        assert!(EvidenceBundle::new(g.clone(), EvidenceKind::Logits, vec![0.0; 3]).is_err());
        assert!(EvidenceBundle::new(g, EvidenceKind::Logits, vec![0.0; 2]).is_ok());
    }

    #[test]
    fn zero_lambda_zero_presence_is_mask_logits() {
        let ev = DenseGrid::from_fn(2, 3, 2, |y, x, c| (y * 7 + x * 3 + c) as f32 * 0.37 - 1.0).unwrap();
        let b = EvidenceBundle::new(ev.clone(), EvidenceKind::Logits, vec![0.0, 0.0]).unwrap();
        let prior = log_prior(&DenseGrid::from_fn(2, 3, 2, |y, x, c| (y + 2 * x * c) as f32).unwrap()).unwrap();
        let cfg = FusionConfig { lambda_prior: 0.0, background: None };
        assert_eq!(fuse(&b, &prior, &cfg).unwrap().scores, ev);
    }

    #[test]
    fn half_probability_uniform_prior() {
        let ev = DenseGrid::from_fn(2, 2, 2, |_, _, _| 0.5).unwrap();
        let b = EvidenceBundle::new(ev, EvidenceKind::Probabilities, vec![0.0, 0.0]).unwrap();
        let cfg = FusionConfig { lambda_prior: 0.7, background: None };
        let s = fuse(&b, &uniform_prior(2, 2, 2), &cfg).unwrap();
        let expected = 0.7 * 0.5f64.ln();
        for &v in s.scores.data() {
            assert!((v as f64 - expected).abs() < 1e-6);
        }
        assert!((expected - -0.485203).abs() < 1e-6);
    }

    #[test]
    fn presence_bias_decides_ties() {
        let ev = DenseGrid::from_fn(3, 3, 2, |_, _, _| 0.25).unwrap();
        let b = EvidenceBundle::new(ev, EvidenceKind::Logits, vec![1.0, -1.0]).unwrap();
        let cfg = FusionConfig { lambda_prior: 0.0, background: None };
        let labels = fuse_and_decode(&b, &uniform_prior(3, 3, 2), &cfg).unwrap();
        assert!(labels.data().iter().all(|&l| l == 0));
    }

    #[test]
    fn decode_rules() {
        let cfg = FusionConfig::default();
        assert_eq!(decode(&scores(&[1.0, 2.0]), &cfg).unwrap().data(), &[1]);
        assert_eq!(decode(&scores(&[2.0, 2.0]), &cfg).unwrap().data(), &[0]);

        let never = FusionConfig {
            background: Some(Background { threshold: f64::NEG_INFINITY, index: None }),
            ..cfg
        };
        let s = scores(&[-5.0, -7.0]);
        assert_eq!(decode(&s, &never).unwrap().data(), decode(&s, &cfg).unwrap().data());

        let always = FusionConfig {
            background: Some(Background { threshold: f64::INFINITY, index: None }),
            ..cfg
        };
        let out = decode(&scores(&[100.0, 7.0]), &always).unwrap();
        assert_eq!(out.data(), &[2]);
        assert_eq!(out.background(), Some(2));

        let default_theta = FusionConfig {
            background: Some(Background { threshold: DEFAULT_BACKGROUND_THRESHOLD, index: Some(9) }),
            ..cfg
        };
        assert_eq!(decode(&scores(&[-0.5, -0.1]), &default_theta).unwrap().data(), &[9]);
        assert_eq!(decode(&scores(&[-0.5, 0.1]), &default_theta).unwrap().data(), &[1]);

        let clash = FusionConfig {
            background: Some(Background { threshold: 0.0, index: Some(1) }),
            ..cfg
        };
        assert_eq!(
            decode(&scores(&[0.0, 1.0]), &clash).unwrap_err().code(),
            "background_collision"
        );
    }

    #[test]
    fn single_class_decodes_to_zero() {
        let ev = DenseGrid::from_fn(4, 4, 1, |y, x, _| (y as f32) - (x as f32)).unwrap();
        let b = EvidenceBundle::new(ev, EvidenceKind::Logits, vec![0.3]).unwrap();
        let labels = fuse_and_decode(&b, &uniform_prior(4, 4, 1), &FusionConfig::default()).unwrap();
        assert!(labels.data().iter().all(|&l| l == 0));
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let b = EvidenceBundle::new(DenseGrid::zeros(vec![2, 2, 2]).unwrap(), EvidenceKind::Logits, vec![0.0; 2]).unwrap();
        let err = fuse(&b, &uniform_prior(2, 3, 2), &FusionConfig::default()).unwrap_err();
        assert_eq!(err.code(), "shape_mismatch");
    }

    fn fixture(seed: u64, h: usize, w: usize, c: usize) -> (EvidenceBundle, PriorStack) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let ev = DenseGrid::from_fn(h, w, c, |_, _, _| rng.random_range(-4.0f32..4.0)).unwrap();
        let presence = (0..c).map(|_| rng.random_range(-2.0f32..2.0)).collect();
        let u = DenseGrid::from_fn(h, w, c, |_, _, _| rng.random_range(-10.0f32..10.0)).unwrap();
        (EvidenceBundle::new(ev, EvidenceKind::Logits, presence).unwrap(), log_prior(&u).unwrap())
    }

    proptest! {
        #[test]
        fn single_pass_matches_two_step(seed in any::<u64>(), lambda in 0.0f64..2.0, with_bg in any::<bool>()) {
            let (b, p) = fixture(seed, 5, 6, 4);
            let cfg = FusionConfig {
                lambda_prior: lambda,
                background: with_bg.then_some(Background { threshold: 0.5, index: None }),
            };
            let two = decode(&fuse(&b, &p, &cfg).unwrap(), &cfg).unwrap();
            prop_assert_eq!(fuse_and_decode(&b, &p, &cfg).unwrap(), two);
        }

        #[test]
        fn constant_shift_keeps_labels(seed in any::<u64>(), k in -8.0f32..8.0) {
            let (b, p) = fixture(seed, 4, 4, 3);
            let cfg = FusionConfig::default();
            let s = fuse(&b, &p, &cfg).unwrap();
            let shifted = ScoreStack {
                scores: DenseGrid::new(
                    s.scores.dims().to_vec(),
                    s.scores.data().iter().map(|v| v + k).collect(),
                ).unwrap(),
            };
            let a = decode(&s, &cfg).unwrap();
            let bl = decode(&shifted, &cfg).unwrap();
            // only pixels whose winning margin survives f32 rounding of the shift
            for (i, px) in s.scores.pixel_iter().enumerate() {
                let mut sorted: Vec<f32> = px.to_vec();
                sorted.sort_by(|x, y| y.partial_cmp(x).unwrap());
                if sorted[0] - sorted[1] > 1e-5 {
                    prop_assert_eq!(a.data()[i], bl.data()[i]);
                }
            }
        }

        #[test]
        fn presence_cancels_between_pixels(seed in any::<u64>(), z in -5.0f32..5.0) {
            let (b, p) = fixture(seed, 3, 3, 2);
            let mut presence = b.presence().to_vec();
            let cfg = FusionConfig::default();
            let s0 = fuse(&b, &p, &cfg).unwrap();
            presence[1] = z;
            let b2 = EvidenceBundle::new(b.mask_evidence().clone(), EvidenceKind::Logits, presence).unwrap();
            let s1 = fuse(&b2, &p, &cfg).unwrap();
            let d0 = s0.scores.get(2, 1, 1) as f64 - s0.scores.get(0, 0, 1) as f64;
            let d1 = s1.scores.get(2, 1, 1) as f64 - s1.scores.get(0, 0, 1) as f64;
            prop_assert!((d0 - d1).abs() < 1e-5);
        }

        #[test]
        fn prior_increase_never_lowers_score(seed in any::<u64>(), lambda in 0.01f64..2.0, bump in 0.0f32..3.0) {
            let (b, mut p) = fixture(seed, 2, 2, 3);
            let cfg = FusionConfig { lambda_prior: lambda, background: None };
            let s0 = fuse(&b, &p, &cfg).unwrap();
            p.log_pi.data_mut()[4] += bump;
            let s1 = fuse(&b, &p, &cfg).unwrap();
            prop_assert!(s1.scores.data()[4] >= s0.scores.data()[4]);
        }

        #[test]
        fn probability_and_logit_inputs_agree(seed in any::<u64>()) {
            let (b, p) = fixture(seed, 4, 4, 3);
            let probs: Vec<f32> = b.mask_evidence().data().iter()
                .map(|&z| (1.0 / (1.0 + (-(z as f64)).exp())) as f32)
                .collect();
            let bp = EvidenceBundle::new(
                DenseGrid::new(b.mask_evidence().dims().to_vec(), probs).unwrap(),
                EvidenceKind::Probabilities,
                b.presence().to_vec(),
            ).unwrap();
            let cfg = FusionConfig::default();
            let s = fuse(&b, &p, &cfg).unwrap();
            let la = decode(&s, &cfg).unwrap();
            let lb = fuse_and_decode(&bp, &p, &cfg).unwrap();
            for (i, px) in s.scores.pixel_iter().enumerate() {
                let mut sorted: Vec<f32> = px.to_vec();
                sorted.sort_by(|x, y| y.partial_cmp(x).unwrap());
                if sorted[0] - sorted[1] > 1e-4 {
                    prop_assert_eq!(la.data()[i], lb.data()[i]);
                }
            }
        }
    }
}

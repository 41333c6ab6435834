use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::embeddings::EmbeddingStore;
use crate::error::{Error, Result};
use crate::fusion::{EvidenceBundle, EvidenceKind};
use crate::prompts::{PromptBank, MAX_SYNONYMS};
use crate::tensor::{DenseGrid, LabelMap};

/// Generator settings for a [`SyntheticScene`].
#[derive(Clone, Debug, PartialEq)]
pub struct SceneParams {
    pub seed: u64,
    pub height: usize,
    pub width: usize,
    pub dim: usize,
    pub classes: usize,
    pub synonyms_per_class: usize,
    /// Scale of the perturbation separating a synonym from its canonical direction.
    pub drift: f64,
    /// Scale of the noise mixed into each feature vector.
    pub overlap: f64,
    /// Features are sampled on a grid `stride` times coarser than the masks.
    pub feature_stride: usize,
    /// Mask logit magnitude for the ground-truth class (negated elsewhere).
    pub mask_signal: f64,
    pub mask_noise: f64,
    /// Presence logit magnitude: `+gain` for occupied classes, `-gain` otherwise.
    pub presence_gain: f64,
    /// Blend of class 1's direction toward class 0 (0 leaves them independent).
    pub confuser_mix: f64,
    /// Fraction of the mask signal leaked to the other class of the
    /// (0, 1) pair inside either class's region.
    pub confuser_leak: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            seed: 0,
            height: 32,
            width: 32,
            dim: 16,
            classes: 4,
            synonyms_per_class: 3,
            drift: 0.3,
            overlap: 0.5,
            feature_stride: 1,
            mask_signal: 2.0,
            mask_noise: 1.0,
            presence_gain: 1.0,
            confuser_mix: 0.0,
            confuser_leak: 0.0,
        }
    }
}

impl SceneParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("height", self.height),
            ("width", self.width),
            ("dim", self.dim),
            ("classes", self.classes),
            ("synonyms_per_class", self.synonyms_per_class),
            ("feature_stride", self.feature_stride),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        if self.synonyms_per_class > MAX_SYNONYMS {
            return Err(Error::InvalidArgument(format!(
                "synonyms_per_class must be at most {MAX_SYNONYMS}"
            )));
        }
        let non_negative = [
            ("drift", self.drift),
            ("overlap", self.overlap),
            ("mask_noise", self.mask_noise),
            ("confuser_mix", self.confuser_mix),
            ("confuser_leak", self.confuser_leak),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        if self.confuser_mix >= 1.0 {
            return Err(Error::InvalidArgument("confuser_mix must be below 1".into()));
        }
        Ok(())
    }

    pub fn feature_height(&self) -> usize {
        self.height.div_ceil(self.feature_stride)
    }

    pub fn feature_width(&self) -> usize {
        self.width.div_ceil(self.feature_stride)
    }
}

/// Desk-scale stand-in for one image's worth of model outputs plus labels.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticScene {
    pub params: SceneParams,
    pub features: DenseGrid,
    pub gt: LabelMap,
    pub evidence: EvidenceBundle,
    pub embeddings: EmbeddingStore,
    pub bank: PromptBank,
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn unit_f32(v: &[f64]) -> Vec<f32> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 {
        let mut e = vec![0.0; v.len()];
        e[0] = 1.0;
        return e;
    }
    v.iter().map(|x| (x / n) as f32).collect()
}

pub fn generate_scene(params: &SceneParams) -> Result<SyntheticScene> {
    params.validate()?;
    let p = params;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let (h, w, d, n_classes, m) = (p.height, p.width, p.dim, p.classes, p.synonyms_per_class);

    let mut directions: Vec<Vec<f64>> = (0..n_classes).map(|_| gaussian(&mut rng, d)).collect();
    for dir in &mut directions {
        let n = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        dir.iter_mut().for_each(|x| *x /= n);
    }
    if n_classes >= 2 && p.confuser_mix > 0.0 {
        let a = p.confuser_mix;
        directions[1] = directions[0]
            .iter()
            .zip(&directions[1])
            .map(|(x0, x1)| a * x0 + (1.0 - a) * x1)
            .collect();
    }

    let mut rows: Vec<f32> = Vec::with_capacity(n_classes * m * d);
    for dir in &directions {
        let canonical = unit_f32(dir);
        rows.extend_from_slice(&canonical);
        for _ in 1..m {
            if p.drift == 0.0 {
                rows.extend_from_slice(&canonical);
            } else {
                let noise = gaussian(&mut rng, d);
                let v: Vec<f64> = dir.iter().zip(&noise).map(|(x, e)| x + p.drift * e).collect();
                rows.extend(unit_f32(&v));
            }
        }
    }
    let lists: Vec<Vec<String>> = (0..n_classes)
        .map(|c| {
            let mut list = vec![format!("class{c:02}")];
            list.extend((1..m).map(|j| format!("class{c:02} variant{j}")));
            list
        })
        .collect();
    let bank = PromptBank::from_lists(&lists)?;
    let embeddings = EmbeddingStore::from_rows(&rows, bank.total_synonyms(), d, &bank)?;

    // Region partition: nearest of one random site per class, ties to the lower index.
    let sites: Vec<(f64, f64)> = (0..n_classes)
        .map(|_| (rng.random_range(0.0..h as f64), rng.random_range(0.0..w as f64)))
        .collect();
    let mut gt = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let (py, px) = (y as f64 + 0.5, x as f64 + 0.5);
            let mut best = (f64::INFINITY, 0u32);
            for (c, &(sy, sx)) in sites.iter().enumerate() {
                let dist = (py - sy).powi(2) + (px - sx).powi(2);
                if dist < best.0 {
                    best = (dist, c as u32);
                }
            }
            gt.push(best.1);
        }
    }
    let gt = LabelMap::new(h, w, gt)?;

    let features = sample_features(p, &gt, &embeddings, p.overlap, &mut rng)?;

    let signal = p.mask_signal;
    let mut logits = Vec::with_capacity(h * w * n_classes);
    for &label in gt.data() {
        let label = label as usize;
        for c in 0..n_classes {
            let mut v = if c == label { signal } else { -signal };
            let in_pair = label <= 1 && c <= 1 && c != label && n_classes >= 2;
            if in_pair {
                v += 2.0 * signal * p.confuser_leak;
            }
            if p.mask_noise > 0.0 {
                v += p.mask_noise * rng.sample::<f64, _>(StandardNormal);
            }
            logits.push(v as f32);
        }
    }
    let mut occupancy = vec![0usize; n_classes];
    for &l in gt.data() {
        occupancy[l as usize] += 1;
    }
    let presence = occupancy
        .iter()
        .map(|&n| if n > 0 { p.presence_gain } else { -p.presence_gain } as f32)
        .collect();
    let evidence = EvidenceBundle::new(
        DenseGrid::new(vec![h, w, n_classes], logits)?,
        EvidenceKind::Logits,
        presence,
    )?;

    Ok(SyntheticScene {
        params: p.clone(),
        features,
        gt,
        evidence,
        embeddings,
        bank,
    })
}

fn sample_features(
    p: &SceneParams,
    gt: &LabelMap,
    store: &EmbeddingStore,
    overlap: f64,
    rng: &mut ChaCha8Rng,
) -> Result<DenseGrid> {
    let (fh, fw, d) = (p.feature_height(), p.feature_width(), p.dim);
    let s = p.feature_stride;
    let mut data = Vec::with_capacity(fh * fw * d);
    for fy in 0..fh {
        for fx in 0..fw {
            let y = (fy * s + s / 2).min(p.height - 1);
            let x = (fx * s + s / 2).min(p.width - 1);
            let dir = store.canonical(gt.get(y, x) as usize)?;
            if overlap == 0.0 {
                data.extend_from_slice(dir);
            } else {
                let noise = gaussian(rng, d);
                let v: Vec<f64> = dir
                    .iter()
                    .zip(&noise)
                    .map(|(&a, e)| a as f64 + overlap * e)
                    .collect();
                data.extend(unit_f32(&v));
            }
        }
    }
    DenseGrid::new(vec![fh, fw, d], data)
}

impl SyntheticScene {
    /// Features for the same layout drawn from an independent noise stream,
    /// standing in for a different feature backbone.
    pub fn alternate_features(&self, seed: u64, overlap: f64) -> Result<DenseGrid> {
        if !(overlap >= 0.0 && overlap.is_finite()) {
            return Err(Error::InvalidArgument("overlap must be finite and non-negative".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sample_features(&self.params, &self.gt, &self.embeddings, overlap, &mut rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_drift_copies_canonical() {
        let scene = generate_scene(&SceneParams { drift: 0.0, ..SceneParams::default() }).unwrap();
        for c in 0..scene.bank.num_classes() {
            let slice = scene.embeddings.class_slice(c).unwrap();
            let canonical = scene.embeddings.canonical(c).unwrap();
            assert!(slice.iter().all(|row| row == canonical));
        }
    }

    #[test]
    fn noise_free_features_are_class_embeddings() {
        let params = SceneParams { overlap: 0.0, ..SceneParams::default() };
        let scene = generate_scene(&params).unwrap();
        for y in 0..params.height {
            for x in 0..params.width {
                let c = scene.gt.get(y, x) as usize;
                assert_eq!(scene.features.pixel(y, x), scene.embeddings.canonical(c).unwrap());
            }
        }
    }

    #[test]
    fn same_seed_same_scene() {
        let params = SceneParams { seed: 42, feature_stride: 2, ..SceneParams::default() };
        let a = generate_scene(&params).unwrap();
        let b = generate_scene(&params).unwrap();
        assert_eq!(a, b);
        let bits = |g: &DenseGrid| g.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.features), bits(&b.features));
        assert_eq!(a.features.dims(), &[16, 16, 16]);
        let c = generate_scene(&SceneParams { seed: 43, ..params }).unwrap();
        assert_ne!(a.features, c.features);
    }

    #[test]
    fn labels_and_shapes() {
        let params = SceneParams { classes: 6, height: 20, width: 12, ..SceneParams::default() };
        let scene = generate_scene(&params).unwrap();
        scene.gt.validate(6).unwrap();
        assert_eq!(scene.evidence.mask_evidence().dims(), &[20, 12, 6]);
        assert_eq!(scene.embeddings.len(), 18);
        assert_eq!(scene.bank.total_synonyms(), 18);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(generate_scene(&SceneParams { classes: 0, ..SceneParams::default() }).is_err());
        assert!(generate_scene(&SceneParams { drift: -1.0, ..SceneParams::default() }).is_err());
        assert!(generate_scene(&SceneParams { synonyms_per_class: 11, ..SceneParams::default() }).is_err());
    }
}

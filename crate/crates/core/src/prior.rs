//! Semantic prior: text–feature similarity maps, intra-class synonym
//! aggregation and the cross-class log-softmax over the candidate set.
//!
//! All reductions run in `f64` with a fixed order (synonyms in file order,
//! classes by index) and are rounded to `f32` once when stored.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::embeddings::EmbeddingStore;
use crate::error::{Error, Result};
use crate::prompts::{chunk_synonyms, PromptBank, DEFAULT_CHUNK};
use crate::tensor::{bilinear_resize, DenseGrid};

pub const DEFAULT_TAU_S: f64 = 0.10;

/// How the similarity maps of one class's synonyms collapse into one score.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AggregationMode {
    /// `log Σ_j exp(u_j / τ_s)`.
    LogSumExp { tau_s: f64 },
    /// Mean of the raw similarities.
    Average,
    /// Largest raw similarity.
    Max,
}

impl Default for AggregationMode {
    fn default() -> Self {
        AggregationMode::LogSumExp {
            tau_s: DEFAULT_TAU_S,
        }
    }
}

impl AggregationMode {
    pub fn log_sum_exp(tau_s: f64) -> Result<Self> {
        let m = AggregationMode::LogSumExp { tau_s };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            AggregationMode::LogSumExp { tau_s } if !(tau_s > 0.0 && tau_s.is_finite()) => Err(
                Error::InvalidArgument(format!("tau_s must be positive and finite, got {tau_s}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn kind(&self) -> AggregationKind {
        match self {
            AggregationMode::LogSumExp { .. } => AggregationKind::LogSumExp,
            AggregationMode::Average => AggregationKind::Average,
            AggregationMode::Max => AggregationKind::Max,
        }
    }

    /// Reduces one pixel's synonym similarities. `scores` must be non-empty.
    pub fn reduce(&self, scores: &[f64]) -> f64 {
        debug_assert!(!scores.is_empty());
        match *self {
            AggregationMode::LogSumExp { tau_s } => log_sum_exp_scaled(scores, tau_s),
            AggregationMode::Average => scores.iter().sum::<f64>() / scores.len() as f64,
            AggregationMode::Max => scores.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Aggregation strategy without its temperature; used to name sweep axes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AggregationKind {
    LogSumExp,
    Average,
    Max,
}

impl AggregationKind {
    pub fn with_tau(self, tau_s: f64) -> AggregationMode {
        match self {
            AggregationKind::LogSumExp => AggregationMode::LogSumExp { tau_s },
            AggregationKind::Average => AggregationMode::Average,
            AggregationKind::Max => AggregationMode::Max,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AggregationKind::LogSumExp => "lse",
            AggregationKind::Average => "average",
            AggregationKind::Max => "max",
        }
    }
}

impl fmt::Display for AggregationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AggregationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lse" | "logsumexp" | "log-sum-exp" => Ok(AggregationKind::LogSumExp),
            "average" | "avg" | "mean" => Ok(AggregationKind::Average),
            "max" => Ok(AggregationKind::Max),
            other => Err(Error::InvalidArgument(format!(
                "unknown aggregation {other:?} (expected lse, average or max)"
            ))),
        }
    }
}

/// `log Σ exp(s / τ)` with the maximum factored out.
pub fn log_sum_exp_scaled(scores: &[f64], tau_s: f64) -> f64 {
    let m = scores
        .iter()
        .map(|&s| s / tau_s)
        .fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = scores.iter().map(|&s| (s / tau_s - m).exp()).sum();
    m + sum.ln()
}

/// Writes `log softmax(scores)` into `out`.
pub fn log_softmax(scores: &[f64], out: &mut [f64]) {
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_norm = scores.iter().map(|&s| (s - m).exp()).sum::<f64>().ln();
    for (o, &s) in out.iter_mut().zip(scores) {
        *o = (s - m) - log_norm;
    }
}

/// When dense features are L2-normalized relative to bilinear upsampling.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum NormalizeOrder {
    Before,
    After,
    #[default]
    Both,
}

impl FromStr for NormalizeOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "before" => Ok(NormalizeOrder::Before),
            "after" => Ok(NormalizeOrder::After),
            "both" => Ok(NormalizeOrder::Both),
            other => Err(Error::InvalidArgument(format!(
                "unknown normalize order {other:?} (expected before, after or both)"
            ))),
        }
    }
}

impl fmt::Display for NormalizeOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormalizeOrder::Before => "before",
            NormalizeOrder::After => "after",
            NormalizeOrder::Both => "both",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PriorConfig {
    pub mode: AggregationMode,
    pub chunk: usize,
    pub normalize_order: NormalizeOrder,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            mode: AggregationMode::default(),
            chunk: DEFAULT_CHUNK,
            normalize_order: NormalizeOrder::default(),
        }
    }
}

/// Pixel-wise log prior over the candidate classes together with the
/// aggregated class scores it was computed from.
#[derive(Clone, Debug, PartialEq)]
pub struct PriorStack {
    pub log_pi: DenseGrid,
    pub aggregated_u: DenseGrid,
    /// Feature pixels that had zero norm and were mapped to the zero vector.
    pub zero_norm_pixels: usize,
}

impl PriorStack {
    /// Wraps a stored log-prior grid. A log-softmax output is its own
    /// log-softmax, so it also serves as the aggregated scores.
    pub fn from_log_pi(log_pi: DenseGrid) -> Self {
        Self {
            aggregated_u: log_pi.clone(),
            log_pi,
            zero_norm_pixels: 0,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.log_pi.channels()
    }
}

/// L2-normalizes every pixel's channel vector. Zero vectors stay zero and
/// are counted.
pub fn normalize_features(features: &DenseGrid) -> (DenseGrid, usize) {
    let d = features.channels();
    let mut data = features.data().to_vec();
    let zeros: usize = data
        .par_chunks_mut(d)
        .map(|px| {
            let norm = px.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
            if norm == 0.0 {
                1
            } else {
                for x in px.iter_mut() {
                    *x = (*x as f64 / norm) as f32;
                }
                0
            }
        })
        .sum();
    (DenseGrid::new(features.dims().to_vec(), data).unwrap(), zeros)
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

/// `u(x) = e · f(x)` for unit-normalized features `f` and a unit embedding `e`.
pub fn similarity_map(features: &DenseGrid, embedding: &[f32]) -> Result<DenseGrid> {
    let d = features.channels();
    if embedding.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: embedding.len(),
        });
    }
    let data: Vec<f32> = features
        .data()
        .par_chunks(d)
        .map(|px| dot(px, embedding) as f32)
        .collect();
    DenseGrid::new(vec![features.height(), features.width(), 1], data)
}

/// Collapses one class's synonym similarity maps into a single map.
pub fn aggregate_class(sims: &[DenseGrid], mode: AggregationMode) -> Result<DenseGrid> {
    mode.validate()?;
    let first = sims.first().ok_or(Error::EmptySynonymSet)?;
    let (h, w) = (first.height(), first.width());
    for s in sims {
        if s.height() != h || s.width() != w || s.channels() != 1 {
            return Err(Error::ShapeMismatch(format!(
                "similarity map {:?} does not match {h}x{w}x1",
                s.dims()
            )));
        }
    }
    let data: Vec<f32> = (0..h * w)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(sims.len()),
            |buf, p| {
                buf.clear();
                buf.extend(sims.iter().map(|s| s.data()[p] as f64));
                mode.reduce(buf) as f32
            },
        )
        .collect();
    DenseGrid::new(vec![h, w, 1], data)
}

/// Cross-class log-softmax of aggregated scores, pixel by pixel.
pub fn log_prior(aggregated: &DenseGrid) -> Result<PriorStack> {
    let c = aggregated.channels();
    let mut log_pi = vec![0.0f32; aggregated.data().len()];
    log_pi
        .par_chunks_mut(c)
        .zip(aggregated.data().par_chunks(c))
        .for_each_init(
            || (vec![0.0f64; c], vec![0.0f64; c]),
            |(u, out), (dst, src)| {
                for (a, &b) in u.iter_mut().zip(src) {
                    *a = b as f64;
                }
                log_softmax(u, out);
                for (d, &v) in dst.iter_mut().zip(out.iter()) {
                    *d = v as f32;
                }
            },
        );
    let dims = vec![aggregated.height(), aggregated.width(), c];
    Ok(PriorStack {
        log_pi: DenseGrid::new(dims.clone(), log_pi)?,
        aggregated_u: DenseGrid::new(dims, aggregated.data().to_vec())?,
        zero_norm_pixels: 0,
    })
}

/// Features brought to `out_h × out_w` with the configured normalization
/// order. Returns the grid and the number of zero-norm pixels seen.
pub fn prepare_features(
    features: &DenseGrid,
    order: NormalizeOrder,
    out_h: usize,
    out_w: usize,
) -> Result<(DenseGrid, usize)> {
    Ok(match order {
        NormalizeOrder::Before => {
            let (n, zeros) = normalize_features(features);
            (bilinear_resize(&n, out_h, out_w)?, zeros)
        }
        NormalizeOrder::After => normalize_features(&bilinear_resize(features, out_h, out_w)?),
        NormalizeOrder::Both => {
            let (n, zeros) = normalize_features(features);
            let (n, zeros_after) = normalize_features(&bilinear_resize(&n, out_h, out_w)?);
            (n, zeros.max(zeros_after))
        }
    })
}

/// Full semantic-prior branch at mask resolution.
///
/// Features are normalized and upsampled to `out_h × out_w` first; synonym
/// similarities are then evaluated in batches of `cfg.chunk`, each class is
/// reduced as soon as its last synonym is seen, and the class scores go
/// through the cross-class log-softmax.
pub fn build_prior(
    features: &DenseGrid,
    store: &EmbeddingStore,
    bank: &PromptBank,
    cfg: &PriorConfig,
    out_h: usize,
    out_w: usize,
) -> Result<PriorStack> {
    cfg.mode.validate()?;
    if cfg.chunk == 0 {
        return Err(Error::InvalidArgument("chunk must be >= 1".into()));
    }
    if store.len() != bank.total_synonyms() || store.num_classes() != bank.num_classes() {
        return Err(Error::RowCountMismatch {
            expected: bank.total_synonyms(),
            found: store.len(),
        });
    }
    if features.channels() != store.dim() {
        return Err(Error::DimensionMismatch {
            expected: store.dim(),
            found: features.channels(),
        });
    }

    let (feats, zero_norm_pixels) =
        prepare_features(features, cfg.normalize_order, out_h, out_w)?;
    let d = store.dim();
    let pixels = out_h * out_w;
    let classes = bank.num_classes();
    let mut aggregated = vec![0.0f64; pixels * classes];

    // Synonym similarities of the class currently being collected, pixel-major.
    let mut pending: Vec<f64> = Vec::new();
    let mut pending_class = usize::MAX;

    for batch in chunk_synonyms(bank, cfg.chunk) {
        let rows: Vec<&[f32]> = batch
            .iter()
            .map(|&(c, j)| store.row(store.offsets()[c].0 + j))
            .collect();
        let mut sims = vec![0.0f64; pixels * batch.len()];
        sims.par_chunks_mut(batch.len())
            .zip(feats.data().par_chunks(d))
            .for_each(|(out, px)| {
                for (o, e) in out.iter_mut().zip(&rows) {
                    *o = dot(px, e);
                }
            });

        for (b, &(c, j)) in batch.iter().enumerate() {
            let m_c = store.offsets()[c].1;
            if j == 0 {
                pending_class = c;
                pending = vec![0.0; pixels * m_c];
            }
            debug_assert_eq!(pending_class, c);
            for p in 0..pixels {
                pending[p * m_c + j] = sims[p * batch.len() + b];
            }
            if j + 1 == m_c {
                let mode = cfg.mode;
                let reduced: Vec<f64> = pending.par_chunks(m_c).map(|s| mode.reduce(s)).collect();
                for (p, v) in reduced.into_iter().enumerate() {
                    aggregated[p * classes + c] = v;
                }
            }
        }
    }

    let mut log_pi = vec![0.0f32; pixels * classes];
    log_pi
        .par_chunks_mut(classes)
        .zip(aggregated.par_chunks(classes))
        .for_each_init(
            || vec![0.0f64; classes],
            |out, (dst, u)| {
                log_softmax(u, out);
                for (d, &v) in dst.iter_mut().zip(out.iter()) {
                    *d = v as f32;
                }
            },
        );
    let dims = vec![out_h, out_w, classes];
    Ok(PriorStack {
        log_pi: DenseGrid::new(dims.clone(), log_pi)?,
        aggregated_u: DenseGrid::new(dims, aggregated.iter().map(|&v| v as f32).collect())?,
        zero_norm_pixels,
    })
}

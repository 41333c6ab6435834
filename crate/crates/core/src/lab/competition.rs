use std::fmt;
use std::str::FromStr;

use crate::embeddings::EmbeddingStore;
use crate::error::{Error, Result};
use crate::prompts::PromptBank;

/// Which non-target classes join the normalization first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Selection {
    /// Most similar negatives first.
    Easy,
    /// Least similar negatives first.
    Hard,
}

impl Selection {
    pub fn as_str(self) -> &'static str {
        match self {
            Selection::Easy => "easy",
            Selection::Hard => "hard",
        }
    }
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Selection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "easy" => Ok(Selection::Easy),
            "hard" => Ok(Selection::Hard),
            other => Err(Error::InvalidArgument(format!(
                "unknown selection {other:?} (expected easy or hard)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompetitionSpec {
    pub target_class: usize,
    /// Fraction of the non-target classes admitted as competitors.
    pub p: f64,
    pub selection: Selection,
}

/// `⌈p · negatives⌉`, with a small guard so products such as `0.6 · 5`
/// that land a hair above an integer do not round up.
pub fn competitor_count(p: f64, negatives: usize) -> usize {
    let raw = p * negatives as f64;
    ((raw - 1e-9).ceil().max(0.0) as usize).min(negatives)
}

fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum();
    let na: f64 = a.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Target plus the admitted negatives, returned in ascending class order.
///
/// Negatives are ranked by cosine similarity between canonical embeddings:
/// descending for [`Selection::Easy`], ascending for [`Selection::Hard`].
/// Equal similarities rank by class index.
pub fn select_competitors(
    store: &EmbeddingStore,
    bank: &PromptBank,
    spec: &CompetitionSpec,
) -> Result<Vec<usize>> {
    let classes = bank.num_classes();
    if spec.target_class >= classes {
        return Err(Error::ClassOutOfRange {
            index: spec.target_class,
            classes,
        });
    }
    if !(0.0..=1.0).contains(&spec.p) {
        return Err(Error::InvalidArgument(format!(
            "competitor ratio p must lie in [0, 1], got {}",
            spec.p
        )));
    }
    if store.num_classes() != classes {
        return Err(Error::RowCountMismatch {
            expected: bank.total_synonyms(),
            found: store.len(),
        });
    }
    let target = store.canonical(spec.target_class)?;
    let mut ranked: Vec<(f64, usize)> = (0..classes)
        .filter(|&c| c != spec.target_class)
        .map(|c| Ok((cosine(target, store.canonical(c)?), c)))
        .collect::<Result<_>>()?;
    ranked.sort_by(|a, b| {
        let by_sim = match spec.selection {
            Selection::Easy => b.0.total_cmp(&a.0),
            Selection::Hard => a.0.total_cmp(&b.0),
        };
        by_sim.then(a.1.cmp(&b.1))
    });
    let k = competitor_count(spec.p, classes - 1);
    let mut chosen: Vec<usize> = ranked[..k].iter().map(|&(_, c)| c).collect();
    chosen.push(spec.target_class);
    chosen.sort_unstable();
    Ok(chosen)
}

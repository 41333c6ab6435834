//! Per-class synonym prompt sets.
//!
//! A prompt file is UTF-8 text with one class per line and comma-separated
//! variants; the first token is the canonical class name. Tokens are
//! trimmed, lowercased and deduplicated (first occurrence wins). Lines that
//! start with `#` and blank lines are skipped. Commas cannot appear inside a
//! token.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Largest synonym set a class may carry, canonical name included.
pub const MAX_SYNONYMS: usize = 10;

/// Batch size used when synonym similarities are evaluated in groups.
pub const DEFAULT_CHUNK: usize = 16;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptClass {
    pub class_index: usize,
    synonyms: Vec<String>,
}

impl PromptClass {
    pub fn canonical(&self) -> &str {
        &self.synonyms[0]
    }

    /// All variants in file order; the canonical name is first.
    pub fn synonyms(&self) -> &[String] {
        &self.synonyms
    }

    pub fn len(&self) -> usize {
        self.synonyms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.synonyms.is_empty()
    }
}

/// Ordered candidate concept set. Class order fixes the class indices and the
/// order of every cross-class reduction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptBank {
    classes: Vec<PromptClass>,
    total_synonyms: usize,
}

impl PromptBank {
    pub fn parse(text: &str) -> Result<Self> {
        parse_prompt_file(text)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_prompt_file(&text)
    }

    /// Builds a bank from in-memory synonym lists, applying the same
    /// normalization and validation as the file parser.
    pub fn from_lists<S: AsRef<str>>(lists: &[Vec<S>]) -> Result<Self> {
        let mut b = Builder::default();
        for (i, list) in lists.iter().enumerate() {
            b.push_line(i + 1, list.iter().map(|s| s.as_ref()))?;
        }
        b.finish()
    }

    pub fn classes(&self) -> &[PromptClass] {
        &self.classes
    }

    pub fn class(&self, index: usize) -> Result<&PromptClass> {
        self.classes.get(index).ok_or(Error::ClassOutOfRange {
            index,
            classes: self.classes.len(),
        })
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn total_synonyms(&self) -> usize {
        self.total_synonyms
    }

    /// `(class_index, synonym_index)` pairs in bank order.
    pub fn flat_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.classes
            .iter()
            .flat_map(|c| (0..c.len()).map(move |j| (c.class_index, j)))
    }

    /// Bank restricted to `indices` (kept in the given order, re-indexed from 0).
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut classes = Vec::with_capacity(indices.len());
        for (new_index, &i) in indices.iter().enumerate() {
            let mut c = self.class(i)?.clone();
            c.class_index = new_index;
            classes.push(c);
        }
        if classes.is_empty() {
            return Err(Error::InvalidArgument("class subset is empty".into()));
        }
        let total_synonyms = classes.iter().map(PromptClass::len).sum();
        Ok(Self {
            classes,
            total_synonyms,
        })
    }

    /// Canonical prompt-file text; parsing it yields an equal bank.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.classes {
            writeln!(out, "{}", c.synonyms.join(", ")).unwrap();
        }
        out
    }
}

#[derive(Default)]
struct Builder {
    classes: Vec<PromptClass>,
    canonical_lines: HashMap<String, usize>,
}

impl Builder {
    fn push_line<'a>(&mut self, line: usize, tokens: impl Iterator<Item = &'a str>) -> Result<()> {
        let mut synonyms: Vec<String> = Vec::new();
        for (position, raw) in tokens.enumerate() {
            let token = raw.trim().to_lowercase();
            if token.is_empty() {
                if position == 0 {
                    return Err(Error::EmptyCanonical { line });
                }
                continue;
            }
            if !synonyms.contains(&token) {
                synonyms.push(token);
            }
        }
        if synonyms.is_empty() {
            return Err(Error::EmptyCanonical { line });
        }
        if synonyms.len() > MAX_SYNONYMS {
            return Err(Error::TooManySynonyms {
                line,
                count: synonyms.len(),
                max: MAX_SYNONYMS,
            });
        }
        let class_index = self.classes.len();
        if let Some(&first) = self.canonical_lines.get(&synonyms[0]) {
            return Err(Error::DuplicateCanonical {
                line,
                name: synonyms[0].clone(),
                first,
            });
        }
        self.canonical_lines.insert(synonyms[0].clone(), class_index);
        self.classes.push(PromptClass {
            class_index,
            synonyms,
        });
        Ok(())
    }

    fn finish(self) -> Result<PromptBank> {
        if self.classes.is_empty() {
            return Err(Error::EmptyPromptFile);
        }
        let total_synonyms = self.classes.iter().map(PromptClass::len).sum();
        Ok(PromptBank {
            classes: self.classes,
            total_synonyms,
        })
    }
}

pub fn parse_prompt_file(text: &str) -> Result<PromptBank> {
    let mut b = Builder::default();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        b.push_line(i + 1, trimmed.split(','))?;
    }
    b.finish()
}

/// Splits the flat `(class, synonym)` order into consecutive batches of at
/// most `chunk` pairs. Concatenating the batches restores the flat order.
///
/// # Panics
///
/// If `chunk` is zero.
pub fn chunk_synonyms(bank: &PromptBank, chunk: usize) -> Vec<Vec<(usize, usize)>> {
    assert!(chunk >= 1, "chunk size must be positive");
    let flat: Vec<_> = bank.flat_pairs().collect();
    flat.chunks(chunk).map(<[_]>::to_vec).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_canonical() {
        let bank = parse_prompt_file("cat\n").unwrap();
        assert_eq!(bank.num_classes(), 1);
        assert_eq!(bank.classes()[0].synonyms(), &["cat"]);
        assert_eq!(bank.total_synonyms(), 1);
    }

    #[test]
    fn comma_separated_variants() {
        let bank = parse_prompt_file("sofa, couch, settee\n").unwrap();
        let c = &bank.classes()[0];
        assert_eq!(c.synonyms(), &["sofa", "couch", "settee"]);
        assert_eq!(c.len(), 3);
        assert_eq!(c.canonical(), "sofa");
    }

    #[test]
    fn eleven_tokens_rejected() {
        let err = parse_prompt_file("a, b, c, d, e, f, g, h, i, j, k").unwrap_err();
        assert!(matches!(err, Error::TooManySynonyms { count: 11, .. }));
        assert_eq!(err.code(), "too_many_synonyms");
        // duplicates collapse before the cap is checked
        assert!(parse_prompt_file("a, b, c, d, e, f, g, h, i, j, a").is_ok());
    }

    #[test]
    fn normalization_and_comments() {
        let text = "# header\n\n  Sofa ,COUCH, sofa,, couch \nTV Monitor, television\n";
        let bank = parse_prompt_file(text).unwrap();
        assert_eq!(bank.classes()[0].synonyms(), &["sofa", "couch"]);
        assert_eq!(bank.classes()[1].synonyms(), &["tv monitor", "television"]);
        assert_eq!(bank.classes()[1].class_index, 1);
        assert_eq!(bank.total_synonyms(), 4);
    }

    #[test]
    fn structural_errors() {
        assert_eq!(parse_prompt_file("").unwrap_err().code(), "empty_prompt_file");
        assert_eq!(parse_prompt_file("# only\n\n").unwrap_err().code(), "empty_prompt_file");
        assert_eq!(parse_prompt_file(" , cat").unwrap_err().code(), "empty_canonical");
        let dup = parse_prompt_file("cat\ndog\nCat, kitty\n").unwrap_err();
        assert!(matches!(dup, Error::DuplicateCanonical { line: 3, first: 0, .. }));
    }

    #[test]
    fn chunking_small_and_exact() {
        let bank = parse_prompt_file("a, b\nc\n").unwrap();
        let batches = chunk_synonyms(&bank, 16);
        assert_eq!(batches, vec![vec![(0, 0), (0, 1), (1, 0)]]);

        let lines: Vec<String> = (0..11).map(|i| format!("c{i}, c{i} x, c{i} y")).collect();
        let bank = parse_prompt_file(&lines.join("\n")).unwrap();
        assert_eq!(bank.total_synonyms(), 33);
        let sizes: Vec<_> = chunk_synonyms(&bank, 16).iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![16, 16, 1]);
    }

    #[test]
    fn subset_reindexes() {
        let bank = parse_prompt_file("a\nb, bb\nc\n").unwrap();
        let sub = bank.subset(&[2, 1]).unwrap();
        assert_eq!(sub.classes()[0].canonical(), "c");
        assert_eq!(sub.classes()[1].class_index, 1);
        assert_eq!(sub.total_synonyms(), 3);
        assert!(bank.subset(&[3]).is_err());
    }

    fn bank_strategy() -> impl Strategy<Value = PromptBank> {
        proptest::collection::vec(1usize..=MAX_SYNONYMS, 1..12).prop_map(|sizes| {
            let lists: Vec<Vec<String>> = sizes
                .iter()
                .enumerate()
                .map(|(c, &m)| (0..m).map(|j| format!("class{c} v{j}")).collect())
                .collect();
            PromptBank::from_lists(&lists).unwrap()
        })
    }

    proptest! {
        #[test]
        fn chunks_partition_flat_order(bank in bank_strategy(), chunk in 1usize..40) {
            let batches = chunk_synonyms(&bank, chunk);
            prop_assert!(batches.iter().all(|b| !b.is_empty() && b.len() <= chunk));
            let joined: Vec<_> = batches.concat();
            let flat: Vec<_> = bank.flat_pairs().collect();
            prop_assert_eq!(joined, flat);
        }

        #[test]
        fn reserialize_is_idempotent(bank in bank_strategy()) {
            let text = bank.to_text();
            let again = parse_prompt_file(&text).unwrap();
            prop_assert_eq!(&again, &bank);
            prop_assert_eq!(again.to_text(), text);
        }
    }
}

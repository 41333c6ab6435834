//! Text embeddings for every synonym, unit-normalized at load time.

use std::path::Path;

use crate::error::{Error, Result};
use crate::prompts::PromptBank;
use crate::tensor::{load_grid, DenseGrid};

/// Unit-norm synonym embeddings in the bank's flat synonym order.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    vectors: Vec<f32>,
    offsets: Vec<(usize, usize)>,
}

/// Scales `v` to unit L2 norm, accumulating in f64. Returns `None` for a
/// zero vector.
pub fn normalize_f64(v: &[f32]) -> Option<Vec<f32>> {
    let norm = v.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return None;
    }
    Some(v.iter().map(|&x| (x as f64 / norm) as f32).collect())
}

impl EmbeddingStore {
    /// Reads a `[total_synonyms, d]` CFT1 grid aligned to `bank`.
    pub fn load(path: impl AsRef<Path>, bank: &PromptBank) -> Result<Self> {
        Self::from_grid(&load_grid(path)?, bank)
    }

    pub fn from_grid(grid: &DenseGrid, bank: &PromptBank) -> Result<Self> {
        if grid.dims().len() != 2 {
            return Err(Error::ShapeMismatch(format!(
                "embedding file must have 2 axes [rows, d], got {:?}",
                grid.dims()
            )));
        }
        let (rows, dim) = (grid.dims()[0], grid.dims()[1]);
        Self::from_rows(grid.data(), rows, dim, bank)
    }

    pub fn from_rows(data: &[f32], rows: usize, dim: usize, bank: &PromptBank) -> Result<Self> {
        if dim < 1 {
            return Err(Error::InvalidArgument("embedding dimension must be >= 1".into()));
        }
        if rows != bank.total_synonyms() {
            return Err(Error::RowCountMismatch {
                expected: bank.total_synonyms(),
                found: rows,
            });
        }
        if data.len() != rows * dim {
            return Err(Error::ShapeMismatch(format!(
                "{rows} rows of {dim} need {} values, got {}",
                rows * dim,
                data.len()
            )));
        }
        let mut vectors = Vec::with_capacity(data.len());
        for (row, v) in data.chunks_exact(dim).enumerate() {
            vectors.extend(normalize_f64(v).ok_or(Error::ZeroNormEmbedding { row })?);
        }
        let mut offsets = Vec::with_capacity(bank.num_classes());
        let mut start = 0;
        for c in bank.classes() {
            offsets.push((start, c.len()));
            start += c.len();
        }
        Ok(Self {
            dim,
            vectors,
            offsets,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.offsets.len()
    }

    pub fn len(&self) -> usize {
        self.vectors.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn offsets(&self) -> &[(usize, usize)] {
        &self.offsets
    }

    pub fn vectors(&self) -> &[f32] {
        &self.vectors
    }

    pub fn row(&self, index: usize) -> &[f32] {
        &self.vectors[index * self.dim..(index + 1) * self.dim]
    }

    /// The class's synonym vectors, in file order, as `m_c × d` values.
    pub fn class_slice(&self, class_index: usize) -> Result<ClassSlice<'_>> {
        let &(start, len) = self.offsets.get(class_index).ok_or(Error::ClassOutOfRange {
            index: class_index,
            classes: self.offsets.len(),
        })?;
        Ok(ClassSlice {
            dim: self.dim,
            data: &self.vectors[start * self.dim..(start + len) * self.dim],
        })
    }

    /// First (canonical) synonym vector of a class.
    pub fn canonical(&self, class_index: usize) -> Result<&[f32]> {
        Ok(self.class_slice(class_index)?.data_row(0))
    }

    /// Store restricted to `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut vectors = Vec::new();
        let mut offsets = Vec::with_capacity(indices.len());
        let mut start = 0;
        for &i in indices {
            let slice = self.class_slice(i)?;
            offsets.push((start, slice.len()));
            start += slice.len();
            vectors.extend_from_slice(slice.data);
        }
        Ok(Self {
            dim: self.dim,
            vectors,
            offsets,
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ClassSlice<'a> {
    dim: usize,
    data: &'a [f32],
}

impl<'a> ClassSlice<'a> {
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn data_row(&self, j: usize) -> &'a [f32] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'a, f32> {
        self.data.chunks_exact(self.dim)
    }
}

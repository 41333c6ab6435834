//! Confusion-matrix bookkeeping and mean IoU.
//!
//! Rows are ground truth, columns are predictions. mIoU is taken over the
//! pooled matrix; classes with an empty union are left out of the mean.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::tensor::LabelMap;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
    ignore_index: Option<u32>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize, ignore_index: Option<u32>) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
            ignore_index,
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn ignore_index(&self) -> Option<u32> {
        self.ignore_index
    }

    pub fn count(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.classes + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn check(&self, label: u32, pixel: usize) -> Result<usize> {
        if (label as usize) < self.classes {
            Ok(label as usize)
        } else {
            Err(Error::LabelOutOfRange {
                label,
                pixel,
                classes: self.classes,
            })
        }
    }

    /// Adds one image. Pixels whose ground truth carries the ignore index are
    /// skipped, as are predictions equal to an ignore index outside the class
    /// range. The matrix is left untouched on error.
    pub fn accumulate(&mut self, gt: &LabelMap, pred: &LabelMap) -> Result<()> {
        if gt.height() != pred.height() || gt.width() != pred.width() {
            return Err(Error::ShapeMismatch(format!(
                "ground truth {}x{} vs prediction {}x{}",
                gt.height(),
                gt.width(),
                pred.height(),
                pred.width()
            )));
        }
        let mut local = vec![0u64; self.counts.len()];
        for (pixel, (&g, &p)) in gt.data().iter().zip(pred.data()).enumerate() {
            if Some(g) == self.ignore_index
                || (Some(p) == self.ignore_index && p as usize >= self.classes)
            {
                continue;
            }
            let g = self.check(g, pixel)?;
            let p = self.check(p, pixel)?;
            local[g * self.classes + p] += 1;
        }
        for (c, l) in self.counts.iter_mut().zip(local) {
            *c += l;
        }
        Ok(())
    }

    /// Elementwise sum with a matrix over the same classes.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.classes != self.classes {
            return Err(Error::ShapeMismatch(format!(
                "cannot merge {} classes into {}",
                other.classes, self.classes
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    /// `TP / (TP + FP + FN)` per class; `None` where the union is empty.
    pub fn per_class_iou(&self) -> Vec<Option<f64>> {
        let n = self.classes;
        (0..n)
            .map(|c| {
                let tp = self.count(c, c);
                let row: u64 = (0..n).map(|k| self.count(c, k)).sum();
                let col: u64 = (0..n).map(|k| self.count(k, c)).sum();
                let union = row + col - tp;
                (union > 0).then(|| tp as f64 / union as f64)
            })
            .collect()
    }

    pub fn miou(&self) -> Result<f64> {
        let defined: Vec<f64> = self.per_class_iou().into_iter().flatten().collect();
        if defined.is_empty() {
            return Err(Error::NoDefinedClasses);
        }
        Ok(defined.iter().sum::<f64>() / defined.len() as f64)
    }

    /// `class_index,iou` rows and a `miou,<value>` footer, 6 decimals.
    /// Undefined classes print `nan`.
    pub fn csv_report(&self) -> Result<String> {
        let miou = self.miou()?;
        let mut out = String::from("class_index,iou\n");
        for (c, iou) in self.per_class_iou().into_iter().enumerate() {
            match iou {
                Some(v) => writeln!(out, "{c},{v:.6}").unwrap(),
                None => writeln!(out, "{c},nan").unwrap(),
            }
        }
        writeln!(out, "miou,{miou:.6}").unwrap();
        Ok(out)
    }
}

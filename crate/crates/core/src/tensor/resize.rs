use rayon::prelude::*;

use super::DenseGrid;
use crate::error::{Error, Result};

/// Source sample for one output coordinate under the half-pixel-center
/// convention: `(i + 0.5) * src / dst - 0.5`, clamped to `[0, src - 1]`.
#[derive(Clone, Copy, Debug)]
struct Tap {
    lo: usize,
    hi: usize,
    frac: f64,
}

fn taps(src: usize, dst: usize) -> Vec<Tap> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let lo = s.floor() as usize;
            let hi = (lo + 1).min(src - 1);
            Tap {
                lo,
                hi,
                frac: s - lo as f64,
            }
        })
        .collect()
}

/// Bilinear resampling of every channel to `out_h × out_w`.
///
/// Weights and the blend are evaluated in `f64` and rounded once. Output
/// rows are computed in parallel; each value depends only on its own four
/// taps, so the result does not depend on the thread count.
pub fn bilinear_resize(grid: &DenseGrid, out_h: usize, out_w: usize) -> Result<DenseGrid> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::InvalidArgument(format!(
            "resize target {out_h}x{out_w} must be at least 1x1"
        )));
    }
    let (h, w, c) = (grid.height(), grid.width(), grid.channels());
    let mut dims = grid.dims().to_vec();
    dims[0] = out_h;
    dims[1] = out_w;
    if h == out_h && w == out_w {
        return DenseGrid::new(dims, grid.data().to_vec());
    }

    let rows = taps(h, out_h);
    let cols = taps(w, out_w);
    let src = grid.data();
    let at = |y: usize, x: usize, k: usize| src[(y * w + x) * c + k] as f64;

    let mut out = vec![0.0f32; out_h * out_w * c];
    out.par_chunks_mut(out_w * c)
        .zip(rows.par_iter())
        .for_each(|(row, ty)| {
            for (j, tx) in cols.iter().enumerate() {
                for k in 0..c {
                    let top = at(ty.lo, tx.lo, k) * (1.0 - tx.frac) + at(ty.lo, tx.hi, k) * tx.frac;
                    let bottom =
                        at(ty.hi, tx.lo, k) * (1.0 - tx.frac) + at(ty.hi, tx.hi, k) * tx.frac;
                    row[j * c + k] = (top * (1.0 - ty.frac) + bottom * ty.frac) as f32;
                }
            }
        });
    DenseGrid::new(dims, out)
}

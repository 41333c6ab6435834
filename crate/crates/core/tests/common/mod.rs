//! Straight-line double-precision reference for the whole pipeline.
//!
//! Everything here works on plain `Vec<f64>` and re-derives each step from
//! its defining formula: bilinear resampling through the separable tent
//! kernel, naive (unshifted) exponent sums, and a direct argmax. None of
//! the library's numeric routines are called.

#![allow(dead_code)]

pub struct OracleInput<'a> {
    /// `fh × fw × d` features, row-major.
    pub features: &'a [f32],
    pub feature_dims: (usize, usize, usize),
    /// Raw synonym embedding rows, `total × d`.
    pub embeddings: &'a [f32],
    /// Synonym count per class, in class order.
    pub synonyms_per_class: &'a [usize],
    /// `h × w × C` structural evidence.
    pub evidence: &'a [f32],
    pub evidence_is_probability: bool,
    pub presence: &'a [f32],
    pub out_h: usize,
    pub out_w: usize,
    pub lambda: f64,
    pub mode: OracleMode,
}

#[derive(Clone, Copy, Debug)]
pub enum OracleMode {
    Lse(f64),
    Average,
    Max,
}

pub struct OracleOutput {
    /// `h × w × C`
    pub aggregated: Vec<f64>,
    pub log_pi: Vec<f64>,
    pub scores: Vec<f64>,
    pub labels: Vec<u32>,
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 {
        v.to_vec()
    } else {
        v.iter().map(|x| x / n).collect()
    }
}

/// `dst × src` interpolation matrix: weight `max(0, 1 - |s_i - j|)` with
/// `s_i = clamp((i + 0.5)·src/dst − 0.5, 0, src − 1)`.
pub fn tent_matrix(src: usize, dst: usize) -> Vec<Vec<f64>> {
    (0..dst)
        .map(|i| {
            let s = ((i as f64 + 0.5) * src as f64 / dst as f64 - 0.5)
                .clamp(0.0, (src - 1) as f64);
            (0..src).map(|j| (1.0 - (s - j as f64).abs()).max(0.0)).collect()
        })
        .collect()
}

pub fn resize(data: &[Vec<f64>], h: usize, w: usize, out_h: usize, out_w: usize) -> Vec<Vec<f64>> {
    let d = data[0].len();
    let wy = tent_matrix(h, out_h);
    let wx = tent_matrix(w, out_w);
    let mut out = vec![vec![0.0; d]; out_h * out_w];
    for i in 0..out_h {
        for j in 0..out_w {
            let acc = &mut out[i * out_w + j];
            for y in 0..h {
                if wy[i][y] == 0.0 {
                    continue;
                }
                for x in 0..w {
                    let wgt = wy[i][y] * wx[j][x];
                    if wgt == 0.0 {
                        continue;
                    }
                    for k in 0..d {
                        acc[k] += wgt * data[y * w + x][k];
                    }
                }
            }
        }
    }
    out
}

/// Normalize → resize → normalize, then similarities, synonym pooling,
/// cross-class log-softmax, fusion and argmax.
pub fn run(input: &OracleInput) -> OracleOutput {
    let (fh, fw, d) = input.feature_dims;
    let feats: Vec<Vec<f64>> = input
        .features
        .chunks(d)
        .map(|px| unit(&px.iter().map(|&v| v as f64).collect::<Vec<_>>()))
        .collect();
    let feats: Vec<Vec<f64>> = resize(&feats, fh, fw, input.out_h, input.out_w)
        .iter()
        .map(|v| unit(v))
        .collect();

    let emb: Vec<Vec<f64>> = input
        .embeddings
        .chunks(d)
        .map(|row| unit(&row.iter().map(|&v| v as f64).collect::<Vec<_>>()))
        .collect();
    let classes = input.synonyms_per_class.len();
    let mut starts = vec![0];
    for &m in input.synonyms_per_class {
        starts.push(starts.last().unwrap() + m);
    }

    let pixels = input.out_h * input.out_w;
    let mut aggregated = vec![0.0; pixels * classes];
    let mut log_pi = vec![0.0; pixels * classes];
    let mut scores = vec![0.0; pixels * classes];
    let mut labels = vec![0u32; pixels];
    for p in 0..pixels {
        let f = &feats[p];
        for c in 0..classes {
            let sims: Vec<f64> = (starts[c]..starts[c + 1])
                .map(|r| emb[r].iter().zip(f).map(|(a, b)| a * b).sum())
                .collect();
            aggregated[p * classes + c] = match input.mode {
                OracleMode::Lse(tau) => sims.iter().map(|s| (s / tau).exp()).sum::<f64>().ln(),
                OracleMode::Average => sims.iter().sum::<f64>() / sims.len() as f64,
                OracleMode::Max => sims.iter().cloned().fold(f64::MIN, f64::max),
            };
        }
        let u = &aggregated[p * classes..(p + 1) * classes];
        let z: f64 = u.iter().map(|v| v.exp()).sum();
        for c in 0..classes {
            log_pi[p * classes + c] = (u[c].exp() / z).ln();
        }
        for c in 0..classes {
            let e = input.evidence[p * classes + c] as f64;
            let logit = if input.evidence_is_probability {
                let q = e.clamp(1e-6, 1.0 - 1e-6);
                (q / (1.0 - q)).ln()
            } else {
                e
            };
            scores[p * classes + c] =
                logit + input.lambda * log_pi[p * classes + c] + input.presence[c] as f64;
        }
        let s = &scores[p * classes..(p + 1) * classes];
        let mut best = 0;
        for c in 1..classes {
            if s[c] > s[best] {
                best = c;
            }
        }
        labels[p] = best as u32;
    }
    OracleOutput {
        aggregated,
        log_pi,
        scores,
        labels,
    }
}

/// Gap between the best and second-best score at each pixel.
pub fn top2_gaps(scores: &[f64], classes: usize) -> Vec<f64> {
    scores
        .chunks(classes)
        .map(|s| {
            let mut v = s.to_vec();
            v.sort_by(|a, b| b.partial_cmp(a).unwrap());
            if v.len() > 1 {
                v[0] - v[1]
            } else {
                f64::INFINITY
            }
        })
        .collect()
}

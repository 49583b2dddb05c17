//! Gaussian-kernel machinery: Gram matrices, score models, bandwidth.

use crate::data::SampleSet;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum KernelError {
    #[error("bandwidth must be strictly positive and finite, got {0}")]
    NonPositiveBandwidth(f64),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("alpha length {alpha} does not match {support} support points")]
    AlphaLengthMismatch { alpha: usize, support: usize },
    #[error("need at least 2 samples for the median heuristic, got {0}")]
    TooFewSamples(usize),
    #[error("all points identical: median pairwise distance is 0; pass an explicit bandwidth")]
    AllPointsIdentical,
    #[error("invalid clip range [{0}, {1}]")]
    InvalidClipRange(f64, f64),
    #[error("model i/o error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("model JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Gaussian kernel `k(x, x') = exp(-||x - x'||^2 / (2 bandwidth^2))`.
///
/// `0 < k <= 1`, so every feature embedding has unit RKHS norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    bandwidth: f64,
}

impl KernelParams {
    pub fn new(bandwidth: f64) -> Result<Self, KernelError> {
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(KernelError::NonPositiveBandwidth(bandwidth));
        }
        Ok(Self { bandwidth })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    #[inline]
    pub fn eval(&self, x: ArrayView1<'_, f64>, y: ArrayView1<'_, f64>) -> f64 {
        let mut d2 = 0.0;
        for (a, b) in x.iter().zip(y.iter()) {
            let d = a - b;
            d2 += d * d;
        }
        (-d2 / (2.0 * self.bandwidth * self.bandwidth)).exp()
    }
}

/// Kernel matrix with entry `(i, j) = k(a_i, b_j)`. Rows are computed in
/// parallel; the result does not depend on the thread count.
pub fn gram(
    a: ArrayView2<'_, f64>,
    b: ArrayView2<'_, f64>,
    params: &KernelParams,
) -> Result<Array2<f64>, KernelError> {
    if a.ncols() != b.ncols() {
        return Err(KernelError::DimensionMismatch {
            left: a.ncols(),
            right: b.ncols(),
        });
    }
    let nb = b.nrows();
    let mut out = Array2::zeros((a.nrows(), nb));
    out.as_slice_mut()
        .expect("freshly allocated, standard layout")
        .par_chunks_mut(nb)
        .enumerate()
        .for_each(|(i, row)| {
            let ai = a.row(i);
            for (j, v) in row.iter_mut().enumerate() {
                *v = params.eval(ai, b.row(j));
            }
        });
    Ok(out)
}

/// Kernel expansion `v(x) = sum_i alpha_i k(s_i, x)` over a fixed support
/// set, with optional clipping of the output into `clip_range`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelScoreModel {
    support_points: Array2<f64>,
    alpha: Array1<f64>,
    params: KernelParams,
    clip_range: (f64, f64),
}

/// On-disk JSON form of a [`KernelScoreModel`]. Doubles serialize with
/// round-trip precision, so save/load is exact.
#[derive(Debug, Serialize, Deserialize)]
struct ModelJson {
    bandwidth: f64,
    support_points: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    clip_range: [f64; 2],
}

impl KernelScoreModel {
    /// Default clip range: the valid quadrant `[0, pi/2]` for the
    /// arctangent-ratio scores.
    pub fn new(
        support_points: Array2<f64>,
        alpha: Array1<f64>,
        params: KernelParams,
    ) -> Result<Self, KernelError> {
        Self::with_clip_range(support_points, alpha, params, (0.0, FRAC_PI_2))
    }

    pub fn with_clip_range(
        support_points: Array2<f64>,
        alpha: Array1<f64>,
        params: KernelParams,
        clip_range: (f64, f64),
    ) -> Result<Self, KernelError> {
        if alpha.len() != support_points.nrows() {
            return Err(KernelError::AlphaLengthMismatch {
                alpha: alpha.len(),
                support: support_points.nrows(),
            });
        }
        if !(clip_range.0 <= clip_range.1)
            || !clip_range.0.is_finite()
            || !clip_range.1.is_finite()
        {
            return Err(KernelError::InvalidClipRange(clip_range.0, clip_range.1));
        }
        Ok(Self {
            support_points,
            alpha,
            params,
            clip_range,
        })
    }

    pub fn support_points(&self) -> ArrayView2<'_, f64> {
        self.support_points.view()
    }

    pub fn alpha(&self) -> ArrayView1<'_, f64> {
        self.alpha.view()
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn clip_range(&self) -> (f64, f64) {
        self.clip_range
    }

    pub fn dim(&self) -> usize {
        self.support_points.ncols()
    }

    /// Scores one point.
    pub fn evaluate(&self, x: &[f64], clip: bool) -> Result<f64, KernelError> {
        if x.len() != self.dim() {
            return Err(KernelError::DimensionMismatch {
                left: x.len(),
                right: self.dim(),
            });
        }
        let xv = ArrayView1::from(x);
        let mut v = 0.0;
        for (s, a) in self.support_points.rows().into_iter().zip(self.alpha.iter()) {
            v += a * self.params.eval(s, xv);
        }
        Ok(if clip {
            v.clamp(self.clip_range.0, self.clip_range.1)
        } else {
            v
        })
    }

    /// Scores a block of points. Work is chunked so the transient kernel
    /// rows stay small even for large evaluation sets.
    pub fn evaluate_batch(
        &self,
        xs: ArrayView2<'_, f64>,
        clip: bool,
    ) -> Result<Array1<f64>, KernelError> {
        if xs.ncols() != self.dim() {
            return Err(KernelError::DimensionMismatch {
                left: xs.ncols(),
                right: self.dim(),
            });
        }
        let mut out = Array1::zeros(xs.nrows());
        let chunk = 512;
        let results: Vec<Vec<f64>> = (0..xs.nrows())
            .collect::<Vec<_>>()
            .par_chunks(chunk)
            .map(|ids| {
                ids.iter()
                    .map(|&i| {
                        let xi = xs.row(i);
                        let mut v = 0.0;
                        for (s, a) in
                            self.support_points.rows().into_iter().zip(self.alpha.iter())
                        {
                            v += a * self.params.eval(s, xi);
                        }
                        if clip {
                            v.clamp(self.clip_range.0, self.clip_range.1)
                        } else {
                            v
                        }
                    })
                    .collect()
            })
            .collect();
        let mut k = 0;
        for block in results {
            for v in block {
                out[k] = v;
                k += 1;
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String, KernelError> {
        let doc = ModelJson {
            bandwidth: self.params.bandwidth(),
            support_points: self
                .support_points
                .rows()
                .into_iter()
                .map(|r| r.to_vec())
                .collect(),
            alpha: self.alpha.to_vec(),
            clip_range: [self.clip_range.0, self.clip_range.1],
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self, KernelError> {
        let doc: ModelJson = serde_json::from_str(text)?;
        let n = doc.support_points.len();
        let d = doc.support_points.first().map(Vec::len).unwrap_or(0);
        for row in &doc.support_points {
            if row.len() != d {
                return Err(KernelError::DimensionMismatch {
                    left: d,
                    right: row.len(),
                });
            }
        }
        let support = Array2::from_shape_vec(
            (n, d),
            doc.support_points.into_iter().flatten().collect(),
        )
        .expect("shape checked above");
        Self::with_clip_range(
            support,
            Array1::from(doc.alpha),
            KernelParams::new(doc.bandwidth)?,
            (doc.clip_range[0], doc.clip_range[1]),
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), KernelError> {
        std::fs::write(path.as_ref(), self.to_json()?).map_err(|e| KernelError::Io {
            path: path.as_ref().display().to_string(),
            source: e,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, KernelError> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| KernelError::Io {
            path: path.as_ref().display().to_string(),
            source: e,
        })?;
        Self::from_json(&text)
    }
}

/// Median of pairwise Euclidean distances over the pooled samples.
///
/// Sets larger than 2000 points are thinned deterministically with a
/// stride before the quadratic pass. Even-length medians average the two
/// middle order statistics.
pub fn median_heuristic(s: &SampleSet) -> Result<f64, KernelError> {
    median_heuristic_points(s.pooled().view())
}

pub(crate) fn median_heuristic_points(points: ArrayView2<'_, f64>) -> Result<f64, KernelError> {
    let n = points.nrows();
    if n < 2 {
        return Err(KernelError::TooFewSamples(n));
    }
    const CAP: usize = 2000;
    let idx: Vec<usize> = if n <= CAP {
        (0..n).collect()
    } else {
        (0..CAP).map(|i| i * n / CAP).collect()
    };
    let m = idx.len();
    let mut dists = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        let xi = points.row(idx[i]);
        for j in (i + 1)..m {
            let xj = points.row(idx[j]);
            let mut d2 = 0.0;
            for (a, b) in xi.iter().zip(xj.iter()) {
                let d = a - b;
                d2 += d * d;
            }
            dists.push(d2.sqrt());
        }
    }
    dists.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let len = dists.len();
    let median = if len % 2 == 1 {
        dists[len / 2]
    } else {
        0.5 * (dists[len / 2 - 1] + dists[len / 2])
    };
    if median == 0.0 {
        return Err(KernelError::AllPointsIdentical);
    }
    Ok(median)
}

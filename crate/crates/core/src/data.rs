//! Two-sample datasets: CSV ingestion, synthetic Gaussian pairs, splits.

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("i/o error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error in {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("label column '{0}' not found in header")]
    LabelColumnMissing(String),
    #[error("non-numeric feature '{value}' at row {row}, column '{column}'")]
    NonNumericFeature {
        row: usize,
        column: String,
        value: String,
    },
    #[error("more than two label values: found {0:?}")]
    TooManyLabels(Vec<String>),
    #[error("only one label value present: '{0}'")]
    SingleLabel(String),
    #[error("positive label '{0}' does not appear in the data")]
    PositiveLabelMissing(String),
    #[error("class '{class}' has {n} rows, need at least {min}")]
    TooFewRows { class: String, n: usize, min: usize },
    #[error("row {row} has {got} fields, expected {expected}")]
    InconsistentRow {
        row: usize,
        expected: usize,
        got: usize,
    },
    #[error("non-finite value at row {row} of class '{class}'")]
    NonFinite { class: String, row: usize },
    #[error("vector length {got} does not match dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("sample counts must be at least 1 (got n_pos={n_pos}, n_neg={n_neg})")]
    NonPositiveCounts { n_pos: usize, n_neg: usize },
    #[error("standard deviation must be strictly positive in every coordinate")]
    NonPositiveStd,
    #[error("mean and std lengths differ: {mean} vs {std}")]
    SpecLengthMismatch { mean: usize, std: usize },
    #[error("train fraction {0} outside the open interval (0, 1)")]
    BadFraction(f64),
    #[error("class '{0}' too small to leave at least one sample on each side of the split")]
    ClassTooSmallToSplit(String),
}

/// Labeled positive/negative feature vectors, immutable after construction.
///
/// Rows of `positives`/`negatives` are samples, columns are features. Every
/// coordinate is finite and both blocks share one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    positives: Array2<f64>,
    negatives: Array2<f64>,
}

/// Metadata echo used in JSON reports.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct SampleMetadata {
    pub dim: usize,
    pub n_pos: usize,
    pub n_neg: usize,
}

impl SampleSet {
    /// Builds a sample set from per-class row vectors, validating shape and
    /// finiteness.
    pub fn from_rows(
        positives: Vec<Vec<f64>>,
        negatives: Vec<Vec<f64>>,
    ) -> Result<Self, DataError> {
        let dim = positives
            .first()
            .or_else(|| negatives.first())
            .map(Vec::len)
            .unwrap_or(0);
        let build = |rows: Vec<Vec<f64>>, class: &str| -> Result<Array2<f64>, DataError> {
            let n = rows.len();
            let mut flat = Vec::with_capacity(n * dim);
            for (i, row) in rows.iter().enumerate() {
                if row.len() != dim {
                    return Err(DataError::DimensionMismatch {
                        expected: dim,
                        got: row.len(),
                    });
                }
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(DataError::NonFinite {
                        class: class.to_string(),
                        row: i,
                    });
                }
                flat.extend_from_slice(row);
            }
            Ok(Array2::from_shape_vec((n, dim), flat).expect("shape checked above"))
        };
        Ok(Self {
            positives: build(positives, "positive")?,
            negatives: build(negatives, "negative")?,
        })
    }

    pub(crate) fn from_arrays(positives: Array2<f64>, negatives: Array2<f64>) -> Self {
        debug_assert_eq!(positives.ncols(), negatives.ncols());
        Self {
            positives,
            negatives,
        }
    }

    pub fn positives(&self) -> ArrayView2<'_, f64> {
        self.positives.view()
    }

    pub fn negatives(&self) -> ArrayView2<'_, f64> {
        self.negatives.view()
    }

    pub fn dim(&self) -> usize {
        self.positives.ncols()
    }

    pub fn n_pos(&self) -> usize {
        self.positives.nrows()
    }

    pub fn n_neg(&self) -> usize {
        self.negatives.nrows()
    }

    pub fn metadata(&self) -> SampleMetadata {
        SampleMetadata {
            dim: self.dim(),
            n_pos: self.n_pos(),
            n_neg: self.n_neg(),
        }
    }

    /// All samples, positives first, as one `(n_pos + n_neg) x dim` block.
    pub fn pooled(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n_pos() + self.n_neg(), self.dim()));
        out.slice_mut(ndarray::s![..self.n_pos(), ..])
            .assign(&self.positives);
        out.slice_mut(ndarray::s![self.n_pos().., ..])
            .assign(&self.negatives);
        out
    }

    /// Z-scores every coordinate using pooled mean and standard deviation.
    /// Coordinates with zero pooled variance are left unscaled.
    pub fn standardize_pooled(&self) -> SampleSet {
        let n = (self.n_pos() + self.n_neg()) as f64;
        let dim = self.dim();
        let mut mean = vec![0.0; dim];
        for row in self.positives.rows().into_iter().chain(self.negatives.rows()) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; dim];
        for row in self.positives.rows().into_iter().chain(self.negatives.rows()) {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale: Vec<f64> = var
            .iter()
            .map(|&s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        let transform = |a: &Array2<f64>| {
            let mut out = a.clone();
            for mut row in out.rows_mut() {
                for ((x, m), s) in row.iter_mut().zip(&mean).zip(&scale) {
                    *x = (*x - m) / s;
                }
            }
            out
        };
        SampleSet {
            positives: transform(&self.positives),
            negatives: transform(&self.negatives),
        }
    }
}

/// Diagonal Gaussian: per-coordinate mean and strictly positive std.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl GaussianSpec {
    pub fn new(mean: Vec<f64>, std: Vec<f64>) -> Result<Self, DataError> {
        if mean.len() != std.len() {
            return Err(DataError::SpecLengthMismatch {
                mean: mean.len(),
                std: std.len(),
            });
        }
        if std.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(DataError::NonPositiveStd);
        }
        Ok(Self { mean, std })
    }

    /// Isotropic Gaussian with one shared std.
    pub fn isotropic(mean: Vec<f64>, std: f64) -> Result<Self, DataError> {
        let d = mean.len();
        Self::new(mean, vec![std; d])
    }

    /// One-dimensional `N(mean, std^2)`.
    pub fn scalar(mean: f64, std: f64) -> Result<Self, DataError> {
        Self::new(vec![mean], vec![std])
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }
}

impl fmt::Display for GaussianSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "N(mean={:?}, std={:?})", self.mean, self.std)
    }
}

/// Draws i.i.d. samples from the two Gaussians.
///
/// Reproducible across runs and builds: the stream is ChaCha8 seeded with
/// `seed`, consumed by the `rand_distr` standard-normal sampler, positives
/// first, row by row, coordinate by coordinate.
pub fn gen_gaussian_pair(
    spec_pos: &GaussianSpec,
    spec_neg: &GaussianSpec,
    n_pos: usize,
    n_neg: usize,
    seed: u64,
) -> Result<SampleSet, DataError> {
    if n_pos == 0 || n_neg == 0 {
        return Err(DataError::NonPositiveCounts { n_pos, n_neg });
    }
    if spec_pos.dim() != spec_neg.dim() {
        return Err(DataError::DimensionMismatch {
            expected: spec_pos.dim(),
            got: spec_neg.dim(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |spec: &GaussianSpec, n: usize| -> Array2<f64> {
        let d = spec.dim();
        let mut out = Array2::zeros((n, d));
        for mut row in out.rows_mut() {
            for (j, x) in row.iter_mut().enumerate() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *x = spec.mean[j] + spec.std[j] * z;
            }
        }
        out
    };
    let positives = draw(spec_pos, n_pos);
    let negatives = draw(spec_neg, n_neg);
    Ok(SampleSet {
        positives,
        negatives,
    })
}

/// How CSV label values map onto the two classes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum LabelMapping {
    /// The two observed label values are sorted (numerically when both
    /// parse, lexicographically otherwise); the larger maps to positive.
    #[default]
    Auto,
    /// This exact label value is positive, the other negative.
    Positive(String),
}

/// Loads a two-class CSV. Header row required, features must be numeric,
/// label column selected by name. Column order is preserved as feature
/// order.
pub fn load_csv(
    path: impl AsRef<Path>,
    label_column: &str,
    mapping: &LabelMapping,
) -> Result<SampleSet, DataError> {
    let path_str = path.as_ref().display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path.as_ref())
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => DataError::Io {
                path: path_str.clone(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, e.to_string()),
            },
            _ => DataError::Csv {
                path: path_str.clone(),
                source: e,
            },
        })?;
    let headers = reader
        .headers()
        .map_err(|e| DataError::Csv {
            path: path_str.clone(),
            source: e,
        })?
        .clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| DataError::LabelColumnMissing(label_column.to_string()))?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_idx)
        .map(|(_, h)| h.to_string())
        .collect();
    let expected_fields = headers.len();

    let mut labels: Vec<String> = Vec::new();
    let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
    for (row_no, record) in reader.records().enumerate() {
        let record = record.map_err(|e| DataError::Csv {
            path: path_str.clone(),
            source: e,
        })?;
        // 1-based data row number, matching what a user sees under the header.
        let row = row_no + 1;
        if record.len() != expected_fields {
            return Err(DataError::InconsistentRow {
                row,
                expected: expected_fields,
                got: record.len(),
            });
        }
        let label = record[label_idx].trim().to_string();
        if !labels.contains(&label) {
            labels.push(label.clone());
            if labels.len() > 2 {
                labels.sort();
                return Err(DataError::TooManyLabels(labels));
            }
        }
        let mut feats = Vec::with_capacity(expected_fields - 1);
        for (i, field) in record.iter().enumerate() {
            if i == label_idx {
                continue;
            }
            let col = &headers[i];
            let v: f64 = field.trim().parse().map_err(|_| DataError::NonNumericFeature {
                row,
                column: col.to_string(),
                value: field.to_string(),
            })?;
            if !v.is_finite() {
                return Err(DataError::NonNumericFeature {
                    row,
                    column: col.to_string(),
                    value: field.to_string(),
                });
            }
            feats.push(v);
        }
        rows.push((label, feats));
    }
    let _ = feature_names;
    if labels.len() < 2 {
        return Err(DataError::SingleLabel(
            labels.first().cloned().unwrap_or_default(),
        ));
    }
    let positive_label = match mapping {
        LabelMapping::Positive(value) => {
            if !labels.contains(value) {
                return Err(DataError::PositiveLabelMissing(value.clone()));
            }
            value.clone()
        }
        LabelMapping::Auto => {
            let mut sorted = labels.clone();
            sorted.sort_by(|a, b| match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(x), Ok(y)) => x.partial_cmp(&y).unwrap_or(std::cmp::Ordering::Equal),
                _ => a.cmp(b),
            });
            sorted.last().cloned().expect("two labels present")
        }
    };
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for (label, feats) in rows {
        if label == positive_label {
            positives.push(feats);
        } else {
            negatives.push(feats);
        }
    }
    for (class, n) in [("positive", positives.len()), ("negative", negatives.len())] {
        if n < 2 {
            return Err(DataError::TooFewRows {
                class: class.to_string(),
                n,
                min: 2,
            });
        }
    }
    SampleSet::from_rows(positives, negatives)
}

/// Writes a sample set as CSV with feature columns `x0..x{d-1}` and labels
/// `+1`/`-1` in `label_column`. `load_csv` of the output reproduces the
/// input exactly (doubles are written with round-trip precision).
pub fn write_csv(
    s: &SampleSet,
    path: impl AsRef<Path>,
    label_column: &str,
) -> Result<(), DataError> {
    let path_str = path.as_ref().display().to_string();
    let mut writer = csv::Writer::from_path(path.as_ref()).map_err(|e| DataError::Csv {
        path: path_str.clone(),
        source: e,
    })?;
    let mut header: Vec<String> = (0..s.dim()).map(|j| format!("x{j}")).collect();
    header.push(label_column.to_string());
    let io_err = |e: csv::Error| DataError::Csv {
        path: path_str.clone(),
        source: e,
    };
    writer.write_record(&header).map_err(io_err)?;
    let mut write_rows = |block: ArrayView2<'_, f64>, label: &str| -> Result<(), DataError> {
        for row in block.rows() {
            let mut rec: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            rec.push(label.to_string());
            writer.write_record(&rec).map_err(|e| DataError::Csv {
                path: path_str.clone(),
                source: e,
            })?;
        }
        Ok(())
    };
    write_rows(s.positives(), "+1")?;
    write_rows(s.negatives(), "-1")?;
    writer.flush().map_err(|e| DataError::Io {
        path: path_str.clone(),
        source: e,
    })?;
    Ok(())
}

/// Stratified train/test split. Each class is shuffled with its own
/// deterministic stream and cut at `round(train_fraction * n)`, clamped so
/// both sides keep at least one sample.
pub fn split(
    s: &SampleSet,
    train_fraction: f64,
    seed: u64,
) -> Result<(SampleSet, SampleSet), DataError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DataError::BadFraction(train_fraction));
    }
    for (class, n) in [("positive", s.n_pos()), ("negative", s.n_neg())] {
        if n < 2 {
            return Err(DataError::ClassTooSmallToSplit(class.to_string()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cut = |block: ArrayView2<'_, f64>,
               rng: &mut ChaCha8Rng|
     -> (Array2<f64>, Array2<f64>) {
        let n = block.nrows();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(rng);
        let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
        let take = |ids: &[usize]| {
            let mut out = Array2::zeros((ids.len(), block.ncols()));
            for (k, &i) in ids.iter().enumerate() {
                out.row_mut(k).assign(&block.row(i));
            }
            out
        };
        (take(&idx[..n_train]), take(&idx[n_train..]))
    };
    let (pos_train, pos_test) = cut(s.positives(), &mut rng);
    let (neg_train, neg_test) = cut(s.negatives(), &mut rng);
    Ok((
        SampleSet {
            positives: pos_train,
            negatives: neg_train,
        },
        SampleSet {
            positives: pos_test,
            negatives: neg_test,
        },
    ))
}

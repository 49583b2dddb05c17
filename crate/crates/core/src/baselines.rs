//! Benchmark baselines: pairwise AUC maximization with the squared
//! surrogate (and its O(n) decomposed objective), vanilla logistic
//! regression, and the synthetic imbalanced-classification harness.

use crate::data::{gen_gaussian_pair, DataError, GaussianSpec, SampleSet};
use crate::estimator::{BandwidthSpec, EstimatorError, LambdaSpec, SolverConfig};
use crate::rocgeom::{auc_wmw, RocError};
use crate::twostep::{two_step_fit, TwoStepError};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, thiserror::Error)]
pub enum BaselineError {
    #[error("both classes must be nonempty")]
    EmptyClass,
    #[error("pairwise ascent did not converge: grad_norm {grad_norm:.3e} after {iterations} iterations")]
    NonConvergence { grad_norm: f64, iterations: usize },
    #[error("benchmark needs repeats >= 2, got {0}")]
    TooFewRepeats(usize),
    #[error("benchmark n_pos grid must be nonempty")]
    EmptyGrid,
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    TwoStep(#[from] TwoStepError),
    #[error(transparent)]
    Roc(#[from] RocError),
}

/// Linear score `t(x) = <weights, x> + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    weights: Vec<f64>,
    intercept: f64,
}

impl LinearModel {
    pub fn new(weights: Vec<f64>, intercept: f64) -> Self {
        Self { weights, intercept }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn score_view(&self, x: ArrayView1<'_, f64>) -> f64 {
        self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn score_batch(&self, xs: ArrayView2<'_, f64>) -> Vec<f64> {
        xs.rows().into_iter().map(|r| self.score_view(r)).collect()
    }
}

/// Full-batch first-order optimizer settings for the pairwise objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairwiseConfig {
    pub grad_tol: f64,
    pub max_iters: usize,
}

impl Default for PairwiseConfig {
    fn default() -> Self {
        Self {
            grad_tol: 1e-6,
            max_iters: 100_000,
        }
    }
}

fn class_moments(block: ArrayView2<'_, f64>) -> (Array1<f64>, Array2<f64>) {
    let n = block.nrows() as f64;
    let d = block.ncols();
    let mut mean = Array1::zeros(d);
    for row in block.rows() {
        mean += &row;
    }
    mean /= n;
    let mut cov = Array2::zeros((d, d));
    for row in block.rows() {
        let c = &row.to_owned() - &mean;
        for i in 0..d {
            for j in 0..d {
                cov[[i, j]] += c[i] * c[j];
            }
        }
    }
    cov /= n;
    (mean, cov)
}

/// Maximizes the empirical pairwise objective
/// `(1/(n+ n-)) sum sum L(t(x+), t(x-))` with the squared surrogate
/// `L(a, b) = -(1 - (a - b))^2` over linear scores, by full-batch
/// gradient ascent with backtracking. The gradient is computed through the
/// decomposed O(n) form of the objective.
pub fn auc_max_pairwise(
    s: &SampleSet,
    config: &PairwiseConfig,
) -> Result<LinearModel, BaselineError> {
    if s.n_pos() == 0 || s.n_neg() == 0 {
        return Err(BaselineError::EmptyClass);
    }
    let d = s.dim();
    let (mean_pos, cov_pos) = class_moments(s.positives());
    let (mean_neg, cov_neg) = class_moments(s.negatives());
    let m = &mean_neg - &mean_pos;
    let cov_sum = &cov_pos + &cov_neg;

    // Negated objective (the quantity being minimized):
    //   1 + v' (S+ + S-) v + 2 <v, m> + <v, m>^2.
    let loss = |v: &Array1<f64>| -> f64 {
        let vm = v.dot(&m);
        1.0 + v.dot(&cov_sum.dot(v)) + 2.0 * vm + vm * vm
    };
    let grad = |v: &Array1<f64>| -> Array1<f64> {
        let vm = v.dot(&m);
        let mut g = cov_sum.dot(v) * 2.0;
        g += &(&m * (2.0 + 2.0 * vm));
        g
    };

    let mut v = Array1::zeros(d);
    let mut f = loss(&v);
    let mut step = 1.0;
    let mut iters = 0usize;
    loop {
        let g = grad(&v);
        let gnorm = g.dot(&g).sqrt();
        if gnorm <= config.grad_tol {
            return Ok(LinearModel::new(v.to_vec(), 0.0));
        }
        if iters >= config.max_iters {
            return Err(BaselineError::NonConvergence {
                grad_norm: gnorm,
                iterations: iters,
            });
        }
        let mut t = step;
        let mut advanced = false;
        for _ in 0..80 {
            let cand = &v - &(&g * t);
            let cf = loss(&cand);
            if cf <= f - 1e-4 * t * gnorm * gnorm {
                v = cand;
                f = cf;
                step = (t * 2.0).min(1e3);
                advanced = true;
                break;
            }
            t *= 0.5;
        }
        if !advanced {
            return Err(BaselineError::NonConvergence {
                grad_norm: gnorm,
                iterations: iters,
            });
        }
        iters += 1;
    }
}

/// O(n d) decomposed form of the negated pairwise objective:
/// `1 + Var+[t] + Var-[t] + 2 (mean-[t] - mean+[t]) + (mean-[t] - mean+[t])^2`
/// with biased (1/n) variances, which makes the identity with the O(n^2)
/// double sum exact rather than asymptotic. Intercepts cancel.
pub fn pairwise_objective_decomposed(v: &LinearModel, s: &SampleSet) -> f64 {
    let stats = |block: ArrayView2<'_, f64>| -> (f64, f64) {
        let scores = v.score_batch(block);
        let n = scores.len() as f64;
        let mean = scores.iter().sum::<f64>() / n;
        let var = scores.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / n;
        (mean, var)
    };
    let (mean_pos, var_pos) = stats(s.positives());
    let (mean_neg, var_neg) = stats(s.negatives());
    let gap = mean_neg - mean_pos;
    1.0 + var_pos + var_neg + 2.0 * gap + gap * gap
}

/// O(n^2) reference evaluation of the same negated objective,
/// `(1/(n+ n-)) sum_i sum_j (1 - (t(x+_j) - t(x-_i)))^2`.
pub fn pairwise_objective_bruteforce(v: &LinearModel, s: &SampleSet) -> f64 {
    let sp = v.score_batch(s.positives());
    let sn = v.score_batch(s.negatives());
    let mut acc = 0.0;
    for &a in &sp {
        for &b in &sn {
            let r = 1.0 - (a - b);
            acc += r * r;
        }
    }
    acc / (sp.len() as f64 * sn.len() as f64)
}

/// Newton settings for logistic regression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    pub grad_tol: f64,
    pub max_iters: usize,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            grad_tol: 1e-6,
            max_iters: 100,
        }
    }
}

/// Logistic fit plus convergence and separation flags.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub model: LinearModel,
    pub converged: bool,
    /// Training data is perfectly separated by the returned model; the
    /// unregularized optimum is then at infinity and iterations were capped.
    pub separated: bool,
    pub iterations: usize,
}

/// Minimizes the mean logistic loss (no regularization) by Newton steps on
/// centered features.
pub fn logistic_regression(
    s: &SampleSet,
    config: &LogisticConfig,
) -> Result<LogisticFit, BaselineError> {
    if s.n_pos() == 0 || s.n_neg() == 0 {
        return Err(BaselineError::EmptyClass);
    }
    let d = s.dim();
    let n = s.n_pos() + s.n_neg();
    // Design matrix on centered features with a trailing intercept column.
    let pooled = s.pooled();
    let mut mean = Array1::zeros(d);
    for row in pooled.rows() {
        mean += &row;
    }
    mean /= n as f64;
    let mut z = Array2::zeros((n, d + 1));
    for (i, row) in pooled.rows().into_iter().enumerate() {
        for j in 0..d {
            z[[i, j]] = row[j] - mean[j];
        }
        z[[i, d]] = 1.0;
    }
    let y: Vec<f64> = (0..n)
        .map(|i| if i < s.n_pos() { 1.0 } else { -1.0 })
        .collect();

    let mut w = Array1::zeros(d + 1);
    let mut iterations = 0usize;
    let mut converged = false;
    while iterations < config.max_iters {
        let margins = z.dot(&w);
        // p_i = sigmoid(-y_i f_i) is both the loss slope factor and the
        // curvature weight p (1 - p).
        let mut g: Array1<f64> = Array1::zeros(d + 1);
        let mut h: Array2<f64> = Array2::zeros((d + 1, d + 1));
        for i in 0..n {
            let m = y[i] * margins[i];
            let p = 1.0 / (1.0 + m.clamp(-500.0, 500.0).exp());
            let gi = -y[i] * p / n as f64;
            let wi = p * (1.0 - p) / n as f64;
            for a in 0..d + 1 {
                g[a] += gi * z[[i, a]];
                for b in a..d + 1 {
                    h[[a, b]] += wi * z[[i, a]] * z[[i, b]];
                }
            }
        }
        for a in 0..d + 1 {
            for b in 0..a {
                h[[a, b]] = h[[b, a]];
            }
            h[[a, a]] += 1e-10;
        }
        let gnorm = g.dot(&g).sqrt();
        if gnorm <= config.grad_tol {
            converged = true;
            break;
        }
        use ndarray_linalg::Solve;
        let dw = h
            .solve(&g)
            .map_err(|_| BaselineError::NonConvergence {
                grad_norm: gnorm,
                iterations,
            })?;
        w -= &dw;
        iterations += 1;
    }
    let margins = z.dot(&w);
    let separated = (0..n).all(|i| y[i] * margins[i] > 0.0);
    let weights: Vec<f64> = w.iter().take(d).cloned().collect();
    let intercept = w[d] - weights.iter().zip(mean.iter()).map(|(a, b)| a * b).sum::<f64>();
    Ok(LogisticFit {
        model: LinearModel::new(weights, intercept),
        converged,
        separated,
        iterations,
    })
}

/// Benchmark methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    TwoStep,
    PairwiseAuc,
    Logistic,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::TwoStep => "two_step",
            Method::PairwiseAuc => "pairwise_auc",
            Method::Logistic => "logistic",
        })
    }
}

/// Generator and solver settings for one benchmark scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSpec {
    pub pos: GaussianSpec,
    pub neg: GaussianSpec,
    /// Test samples per class; large enough that test-AUC noise is
    /// negligible against the reported differences.
    pub test_per_class: usize,
    pub solver: SolverConfig,
}

impl BenchmarkSpec {
    /// Benchmark defaults: a fixed small regularization weight and a
    /// doubled median bandwidth, which keep the kernel two-step on par with
    /// the linear maximizer across the whole imbalance grid.
    pub fn new(pos: GaussianSpec, neg: GaussianSpec) -> Self {
        Self {
            pos,
            neg,
            test_per_class: 10_000,
            solver: SolverConfig {
                lambda: LambdaSpec::Fixed(0.013),
                bandwidth: BandwidthSpec::MedianScaled(2.0),
                ..SolverConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub method: Method,
    pub n_pos: usize,
    pub repeat: usize,
    pub auc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub method: Method,
    pub n_pos: usize,
    pub mean_auc: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTable {
    pub rows: Vec<BenchmarkRow>,
    pub summaries: Vec<BenchmarkSummary>,
}

/// SplitMix64 finalizer; derives independent per-cell seeds from the master
/// seed and the cell coordinates.
fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut x = seed
        .wrapping_mul(0x9E3779B97F4A7C15)
        .wrapping_add(a.wrapping_mul(0xBF58476D1CE4E5B9))
        .wrapping_add(b.wrapping_mul(0x94D049BB133111EB));
    x ^= x >> 30;
    x = x.wrapping_mul(0xBF58476D1CE4E5B9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94D049BB133111EB);
    x ^= x >> 31;
    x
}

/// Draws `repeats` training sets for every grid size, trains the two-step
/// procedure, the pairwise maximizer, and logistic regression, and scores
/// each on one large fixed test set. Cells run in parallel; rows come back
/// in deterministic (grid, repeat, method) order.
pub fn benchmark_imbalanced(
    spec: &BenchmarkSpec,
    n_pos_grid: &[usize],
    n_neg: usize,
    repeats: usize,
    seed: u64,
) -> Result<BenchmarkTable, BaselineError> {
    if repeats < 2 {
        return Err(BaselineError::TooFewRepeats(repeats));
    }
    if n_pos_grid.is_empty() {
        return Err(BaselineError::EmptyGrid);
    }
    let test = gen_gaussian_pair(
        &spec.pos,
        &spec.neg,
        spec.test_per_class,
        spec.test_per_class,
        mix_seed(seed, u64::MAX, u64::MAX),
    )?;

    let cells: Vec<(usize, usize)> = n_pos_grid
        .iter()
        .enumerate()
        .flat_map(|(gi, _)| (0..repeats).map(move |r| (gi, r)))
        .collect();
    let results: Result<Vec<Vec<BenchmarkRow>>, BaselineError> = cells
        .par_iter()
        .map(|&(gi, repeat)| {
            let n_pos = n_pos_grid[gi];
            let train = gen_gaussian_pair(
                &spec.pos,
                &spec.neg,
                n_pos,
                n_neg,
                mix_seed(seed, gi as u64, repeat as u64),
            )?;
            let mut rows = Vec::with_capacity(3);

            let two = two_step_fit(&train, &spec.solver)?;
            let sp = two.score_batch(test.positives())?;
            let sn = two.score_batch(test.negatives())?;
            rows.push(BenchmarkRow {
                method: Method::TwoStep,
                n_pos,
                repeat,
                auc: auc_wmw(sp.as_slice().expect("contiguous"), sn.as_slice().expect("contiguous"))?,
            });

            let pw = auc_max_pairwise(&train, &PairwiseConfig::default())?;
            rows.push(BenchmarkRow {
                method: Method::PairwiseAuc,
                n_pos,
                repeat,
                auc: auc_wmw(
                    &pw.score_batch(test.positives()),
                    &pw.score_batch(test.negatives()),
                )?,
            });

            let lg = logistic_regression(&train, &LogisticConfig::default())?;
            rows.push(BenchmarkRow {
                method: Method::Logistic,
                n_pos,
                repeat,
                auc: auc_wmw(
                    &lg.model.score_batch(test.positives()),
                    &lg.model.score_batch(test.negatives()),
                )?,
            });
            Ok(rows)
        })
        .collect();
    let rows: Vec<BenchmarkRow> = results?.into_iter().flatten().collect();

    let mut summaries = Vec::new();
    for &method in &[Method::TwoStep, Method::PairwiseAuc, Method::Logistic] {
        for (gi, &n_pos) in n_pos_grid.iter().enumerate() {
            let _ = gi;
            let aucs: Vec<f64> = rows
                .iter()
                .filter(|r| r.method == method && r.n_pos == n_pos)
                .map(|r| r.auc)
                .collect();
            let n = aucs.len() as f64;
            let mean = aucs.iter().sum::<f64>() / n;
            let var = aucs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (n - 1.0);
            summaries.push(BenchmarkSummary {
                method,
                n_pos,
                mean_auc: mean,
                stderr: (var / n).sqrt(),
            });
        }
    }
    Ok(BenchmarkTable { rows, summaries })
}

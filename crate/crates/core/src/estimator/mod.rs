//! Fits the arctangent likelihood ratio from two samples.
//!
//! The primary operation solves the box-constrained strictly convex kernel
//! objective whose population minimizer is `atan(p+(x)/p-(x))`; a weighted
//! variant of the same solver drives the two-step AUC procedure, and an
//! unconstrained log-ratio variant with a linear model is provided for
//! comparison.

mod solver;

pub(crate) use solver::FitContext;

use crate::baselines::LinearModel;
use crate::data::{DataError, SampleSet};
use crate::kernel::{median_heuristic, KernelError, KernelParams, KernelScoreModel};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

#[derive(Debug, thiserror::Error)]
pub enum EstimatorError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("gram factorization failed: {0}")]
    GramFactorization(String),
    #[error("feasible initialization landed outside the box; gram matrix is degenerate")]
    InitInfeasible,
    #[error(
        "solver did not converge within the iteration cap: grad_norm {:.3e} after {} iterations",
        diagnostics.grad_norm,
        diagnostics.iterations
    )]
    NonConvergence { diagnostics: Box<FitDiagnostics> },
    #[error("lambda must be finite and nonnegative, got {0}")]
    InvalidLambda(f64),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("weights: {0}")]
    InvalidWeights(String),
    #[error("alpha length {got} does not match training size {expected}")]
    AlphaLength { expected: usize, got: usize },
    #[error("cross-validation grids must be nonempty")]
    EmptyGrid,
    #[error("need k_folds >= 2 and at least k samples per class (k={k}, n_pos={n_pos}, n_neg={n_neg})")]
    FoldTooSmall { k: usize, n_pos: usize, n_neg: usize },
    #[error("every cross-validation candidate failed to fit")]
    NoCvCandidate,
    #[error("log-ratio ascent did not converge in any restart")]
    LogRatioNonConvergence,
}

/// Regularization weight: a fixed value or the `n_min^(-1/4)` schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaSpec {
    /// `lambda = n_min^(-1/4)` resolved against the training set.
    Auto,
    Fixed(f64),
}

/// Kernel bandwidth: fixed, the median heuristic, or a scaled median.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthSpec {
    Median,
    /// `scale * median pairwise distance`.
    MedianScaled(f64),
    Fixed(f64),
}

/// Solver configuration for the constrained fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub lambda: LambdaSpec,
    pub bandwidth: BandwidthSpec,
    pub barrier_init: f64,
    pub barrier_decay: f64,
    pub grad_tol: f64,
    pub barrier_floor: f64,
    pub max_newton_iters: usize,
    /// The box is enforced as `[eps_margin, pi/2 - eps_margin]`; the barrier
    /// is undefined on the closed box's boundary.
    pub eps_margin: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: LambdaSpec::Auto,
            bandwidth: BandwidthSpec::Median,
            barrier_init: 1.0,
            barrier_decay: 0.5,
            grad_tol: 1e-6,
            barrier_floor: 1e-8,
            max_newton_iters: 200,
            eps_margin: 1e-6,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub(crate) fn validate(&self) -> Result<(), EstimatorError> {
        let bad = |msg: &str| Err(EstimatorError::InvalidConfig(msg.into()));
        if !(self.barrier_init > 0.0) {
            return bad("barrier_init must be positive");
        }
        if !(self.barrier_decay > 0.0 && self.barrier_decay < 1.0) {
            return bad("barrier_decay must be in (0, 1)");
        }
        if !(self.grad_tol > 0.0) {
            return bad("grad_tol must be positive");
        }
        if !(self.barrier_floor > 0.0) {
            return bad("barrier_floor must be positive");
        }
        if self.max_newton_iters == 0 {
            return bad("max_newton_iters must be at least 1");
        }
        if !(self.eps_margin > 0.0 && self.eps_margin < FRAC_PI_2 / 2.0) {
            return bad("eps_margin must be in (0, pi/4)");
        }
        Ok(())
    }

    pub fn resolved_lambda(&self, s: &SampleSet) -> Result<f64, EstimatorError> {
        match self.lambda {
            LambdaSpec::Fixed(l) if l.is_finite() && l >= 0.0 => Ok(l),
            LambdaSpec::Fixed(l) => Err(EstimatorError::InvalidLambda(l)),
            LambdaSpec::Auto => {
                let n_min = s.n_pos().min(s.n_neg()).max(1) as f64;
                Ok(n_min.powf(-0.25))
            }
        }
    }

    pub fn resolved_bandwidth(&self, s: &SampleSet) -> Result<f64, EstimatorError> {
        let h = match self.bandwidth {
            BandwidthSpec::Fixed(h) => h,
            BandwidthSpec::Median => median_heuristic(s)?,
            BandwidthSpec::MedianScaled(c) => c * median_heuristic(s)?,
        };
        KernelParams::new(h)?;
        Ok(h)
    }
}

/// Nonnegative per-sample weights for the weighted objective.
#[derive(Debug, Clone, PartialEq)]
pub struct FitWeights {
    pos: Vec<f64>,
    neg: Vec<f64>,
}

impl FitWeights {
    pub fn new(pos: Vec<f64>, neg: Vec<f64>) -> Result<Self, EstimatorError> {
        let w = Self { pos, neg };
        if let Some(bad) = w
            .pos
            .iter()
            .chain(w.neg.iter())
            .find(|v| !v.is_finite() || **v < 0.0)
        {
            return Err(EstimatorError::InvalidWeights(format!(
                "weights must be finite and nonnegative, got {bad}"
            )));
        }
        Ok(w)
    }

    pub fn pos(&self) -> &[f64] {
        &self.pos
    }

    pub fn neg(&self) -> &[f64] {
        &self.neg
    }

    pub fn max_weight(&self) -> f64 {
        self.pos
            .iter()
            .chain(self.neg.iter())
            .cloned()
            .fold(0.0, f64::max)
    }

    pub(crate) fn validate(&self, n_pos: usize, n_neg: usize) -> Result<(), EstimatorError> {
        if self.pos.len() != n_pos || self.neg.len() != n_neg {
            return Err(EstimatorError::InvalidWeights(format!(
                "weight lengths ({}, {}) do not match class sizes ({n_pos}, {n_neg})",
                self.pos.len(),
                self.neg.len()
            )));
        }
        Ok(())
    }
}

/// Inner-solver convergence report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// Data term plus regularizer (no barrier) at the returned coefficients.
    pub final_objective: f64,
    /// Norm of the barrier-augmented gradient in the full coefficient space
    /// at the final barrier weight.
    pub grad_norm: f64,
    /// Training scores within 1e-5 of a box bound.
    pub n_active_constraints: usize,
    /// Total Newton iterations across barrier stages.
    pub iterations: usize,
    pub feasible: bool,
}

/// Minimizes the constrained objective and returns the fitted score model.
///
/// `weights` selects the weighted variant; `None` is the plain objective
/// with unit weights. Support points are the training set, positives then
/// negatives.
pub fn fit_atan_ratio(
    s: &SampleSet,
    cfg: &SolverConfig,
    weights: Option<&FitWeights>,
) -> Result<(KernelScoreModel, FitDiagnostics), EstimatorError> {
    let bandwidth = cfg.resolved_bandwidth(s)?;
    let ctx = FitContext::new(s, bandwidth)?;
    let lambda = cfg.resolved_lambda(s)?;
    let (model, diag, _) = fit_with_context(&ctx, lambda, weights, cfg)?;
    Ok((model, diag))
}

/// Same as [`fit_atan_ratio`] but reusing a prepared context (the two-step
/// procedure runs the solver twice on one support set).
pub(crate) fn fit_with_context(
    ctx: &FitContext,
    lambda: f64,
    weights: Option<&FitWeights>,
    cfg: &SolverConfig,
) -> Result<(KernelScoreModel, FitDiagnostics, Array1<f64>), EstimatorError> {
    let out = solver::solve_barrier(ctx, lambda, weights, cfg)?;
    let model = KernelScoreModel::new(ctx.support.clone(), out.alpha, ctx.params)?;
    Ok((model, out.diagnostics, out.scores))
}

/// Barrier-free objective and exact gradient at `alpha`.
///
/// Objective: `-(1/n+) sum w sin(v(x+)) - (1/n-) sum w cos(v(x-)) +
/// (lambda/2) alpha' K alpha` with `v = K alpha`; gradient `K g + lambda K
/// alpha` where `g_i = -(w_i/n+) cos(v_i)` on positive rows and `g_j =
/// (w_j/n-) sin(v_j)` on negative rows.
pub fn objective_and_gradient(
    alpha: ArrayView1<'_, f64>,
    s: &SampleSet,
    cfg: &SolverConfig,
    weights: Option<&FitWeights>,
) -> Result<(f64, Array1<f64>), EstimatorError> {
    let n = s.n_pos() + s.n_neg();
    if alpha.len() != n {
        return Err(EstimatorError::AlphaLength {
            expected: n,
            got: alpha.len(),
        });
    }
    if let Some(w) = weights {
        w.validate(s.n_pos(), s.n_neg())?;
    }
    let bandwidth = cfg.resolved_bandwidth(s)?;
    let lambda = cfg.resolved_lambda(s)?;
    let params = KernelParams::new(bandwidth)?;
    let support = s.pooled();
    let k = crate::kernel::gram(support.view(), support.view(), &params)?;
    let z = k.dot(&alpha);
    let (np, nn) = (s.n_pos() as f64, s.n_neg() as f64);
    let wi = |i: usize| -> f64 {
        match weights {
            None => 1.0,
            Some(w) => {
                if i < s.n_pos() {
                    w.pos()[i]
                } else {
                    w.neg()[i - s.n_pos()]
                }
            }
        }
    };
    let mut obj = 0.0;
    let mut g = Array1::zeros(n);
    for i in 0..n {
        let w = wi(i);
        if i < s.n_pos() {
            obj -= w / np * z[i].sin();
            g[i] = -w / np * z[i].cos();
        } else {
            obj -= w / nn * z[i].cos();
            g[i] = w / nn * z[i].sin();
        }
    }
    obj += 0.5 * lambda * alpha.dot(&z);
    let mut grad = k.dot(&g);
    grad += &(&z * lambda);
    Ok((obj, grad))
}

/// Held-out variational value of a fitted model: `mean sin(v̂)` over
/// positives plus `mean cos(v̂)` over negatives, with clipped evaluation.
pub(crate) fn variational_value(
    model: &KernelScoreModel,
    pos: ArrayView2<'_, f64>,
    neg: ArrayView2<'_, f64>,
) -> Result<f64, KernelError> {
    let sp = model.evaluate_batch(pos, true)?;
    let sn = model.evaluate_batch(neg, true)?;
    let vp = sp.iter().map(|v| v.sin()).sum::<f64>() / sp.len().max(1) as f64;
    let vn = sn.iter().map(|v| v.cos()).sum::<f64>() / sn.len().max(1) as f64;
    Ok(vp + vn)
}

/// Selects `(lambda, bandwidth)` by k-fold cross-validation, maximizing the
/// held-out variational value averaged over folds. Ties break toward larger
/// lambda, then larger bandwidth.
pub fn cross_validate(
    s: &SampleSet,
    lambda_grid: &[f64],
    bandwidth_grid: &[f64],
    k_folds: usize,
    seed: u64,
) -> Result<SolverConfig, EstimatorError> {
    if lambda_grid.is_empty() || bandwidth_grid.is_empty() {
        return Err(EstimatorError::EmptyGrid);
    }
    if k_folds < 2 || s.n_pos() < k_folds || s.n_neg() < k_folds {
        return Err(EstimatorError::FoldTooSmall {
            k: k_folds,
            n_pos: s.n_pos(),
            n_neg: s.n_neg(),
        });
    }
    let base = SolverConfig {
        seed,
        ..SolverConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let folds_pos = make_folds(s.n_pos(), k_folds, &mut rng);
    let folds_neg = make_folds(s.n_neg(), k_folds, &mut rng);

    let take = |view: ArrayView2<'_, f64>, ids: &[usize]| -> Array2<f64> {
        let mut out = Array2::zeros((ids.len(), view.ncols()));
        for (k, &i) in ids.iter().enumerate() {
            out.row_mut(k).assign(&view.row(i));
        }
        out
    };

    // score[(lambda_idx, bandwidth_idx)] summed over folds; None = failed.
    let mut scores: Vec<Option<f64>> = vec![Some(0.0); lambda_grid.len() * bandwidth_grid.len()];
    for (hi, &h) in bandwidth_grid.iter().enumerate() {
        if KernelParams::new(h).is_err() {
            for li in 0..lambda_grid.len() {
                scores[li * bandwidth_grid.len() + hi] = None;
            }
            continue;
        }
        for fold in 0..k_folds {
            let (tr_pos, va_pos) = split_fold(&folds_pos, fold);
            let (tr_neg, va_neg) = split_fold(&folds_neg, fold);
            let train = SampleSet::from_arrays(
                take(s.positives(), &tr_pos),
                take(s.negatives(), &tr_neg),
            );
            let va_pos = take(s.positives(), &va_pos);
            let va_neg = take(s.negatives(), &va_neg);
            let ctx = FitContext::new(&train, h)?;
            for (li, &lambda) in lambda_grid.iter().enumerate() {
                let slot = li * bandwidth_grid.len() + hi;
                if scores[slot].is_none() {
                    continue;
                }
                match fit_with_context(&ctx, lambda, None, &base) {
                    Ok((model, _, _)) => {
                        let v = variational_value(&model, va_pos.view(), va_neg.view())?;
                        *scores[slot].as_mut().expect("checked above") += v;
                    }
                    Err(EstimatorError::NonConvergence { .. }) => scores[slot] = None,
                    Err(e) => return Err(e),
                }
            }
        }
    }

    let mut best: Option<(f64, f64, f64)> = None; // (score, lambda, bandwidth)
    for (li, &lambda) in lambda_grid.iter().enumerate() {
        for (hi, &h) in bandwidth_grid.iter().enumerate() {
            let Some(total) = scores[li * bandwidth_grid.len() + hi] else {
                continue;
            };
            let avg = total / k_folds as f64;
            let better = match best {
                None => true,
                Some((bs, bl, bh)) => {
                    avg > bs || (avg == bs && (lambda > bl || (lambda == bl && h > bh)))
                }
            };
            if better {
                best = Some((avg, lambda, h));
            }
        }
    }
    let (_, lambda, bandwidth) = best.ok_or(EstimatorError::NoCvCandidate)?;
    Ok(SolverConfig {
        lambda: LambdaSpec::Fixed(lambda),
        bandwidth: BandwidthSpec::Fixed(bandwidth),
        ..base
    })
}

fn make_folds(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut at = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        folds.push(idx[at..at + len].to_vec());
        at += len;
    }
    folds
}

fn split_fold(folds: &[Vec<usize>], hold_out: usize) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    for (f, ids) in folds.iter().enumerate() {
        if f != hold_out {
            train.extend_from_slice(ids);
        }
    }
    (train, folds[hold_out].clone())
}

const LOG_RATIO_RESTARTS: usize = 8;
const LOG_RATIO_INIT_SCALE: f64 = 0.1;
const LOG_RATIO_MAX_ITERS: usize = 5000;

/// Maximizes the unconstrained log-ratio objective
/// `mean sin(atan exp(<v,x>+v0))` over positives plus
/// `mean cos(atan exp(<v,x>+v0))` over negatives, by multi-start gradient
/// ascent with backtracking. The returned linear model evaluates the
/// log-ratio estimate `<v,x> + v0`.
pub fn fit_log_ratio(
    s: &SampleSet,
    cfg: &SolverConfig,
) -> Result<(LinearModel, FitDiagnostics), EstimatorError> {
    cfg.validate()?;
    let d = s.dim();
    let (np, nn) = (s.n_pos() as f64, s.n_neg() as f64);
    // Stable pieces: sin(atan e^u) = exp(u - sp/2), cos(atan e^u) = exp(-sp/2),
    // d(sin)/du = exp(u - 1.5 sp), d(cos)/du = -exp(2u - 1.5 sp), sp = ln(1 + e^{2u}).
    let softplus = |t: f64| -> f64 {
        if t > 30.0 {
            t
        } else if t < -30.0 {
            t.exp()
        } else {
            t.exp().ln_1p()
        }
    };
    let eval = |w: &[f64]| -> (f64, Vec<f64>) {
        let mut obj = 0.0;
        let mut grad = vec![0.0; d + 1];
        let mut accumulate = |rows: ArrayView2<'_, f64>, positive: bool, scale: f64| {
            for row in rows.rows() {
                let mut u = w[d];
                for (j, x) in row.iter().enumerate() {
                    u += w[j] * x;
                }
                let sp = softplus(2.0 * u);
                let (val, du) = if positive {
                    ((u - 0.5 * sp).exp(), (u - 1.5 * sp).exp())
                } else {
                    ((-0.5 * sp).exp(), -(2.0 * u - 1.5 * sp).exp())
                };
                obj += scale * val;
                let c = scale * du;
                for (j, x) in row.iter().enumerate() {
                    grad[j] += c * x;
                }
                grad[d] += c;
            }
        };
        accumulate(s.positives(), true, 1.0 / np);
        accumulate(s.negatives(), false, 1.0 / nn);
        (obj, grad)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<(f64, Vec<f64>, f64, usize)> = None;
    let mut total_iters = 0usize;
    let mut any_converged = false;
    for _ in 0..LOG_RATIO_RESTARTS {
        let mut w: Vec<f64> = (0..d + 1)
            .map(|_| {
                let z: f64 = rand_distr::Distribution::sample(
                    &rand_distr::StandardNormal,
                    &mut rng,
                );
                LOG_RATIO_INIT_SCALE * z
            })
            .collect();
        let (mut obj, mut grad) = eval(&w);
        let mut step = 1.0;
        let mut converged = false;
        let mut iters = 0usize;
        while iters < LOG_RATIO_MAX_ITERS {
            let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if gnorm <= cfg.grad_tol {
                converged = true;
                break;
            }
            let mut t = step;
            let mut advanced = false;
            for _ in 0..60 {
                let cand: Vec<f64> = w.iter().zip(&grad).map(|(wi, gi)| wi + t * gi).collect();
                let (cand_obj, cand_grad) = eval(&cand);
                if cand_obj >= obj + 1e-4 * t * gnorm * gnorm {
                    w = cand;
                    obj = cand_obj;
                    grad = cand_grad;
                    step = (t * 2.0).min(1e6);
                    advanced = true;
                    break;
                }
                t *= 0.5;
            }
            iters += 1;
            if !advanced {
                break;
            }
        }
        total_iters += iters;
        any_converged |= converged;
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if best.as_ref().map_or(true, |(b, ..)| obj > *b) {
            best = Some((obj, w, gnorm, iters));
        }
    }
    if !any_converged {
        return Err(EstimatorError::LogRatioNonConvergence);
    }
    let (obj, w, gnorm, _) = best.expect("at least one restart ran");
    let model = LinearModel::new(w[..d].to_vec(), w[d]);
    let diagnostics = FitDiagnostics {
        final_objective: obj,
        grad_norm: gnorm,
        n_active_constraints: 0,
        iterations: total_iters,
        feasible: true,
    };
    Ok((model, diagnostics))
}

/// Draws a moderate-norm `alpha` whose training scores all sit strictly
/// inside the box; used by gradient and convexity checks.
pub fn random_feasible_alpha(
    s: &SampleSet,
    cfg: &SolverConfig,
    rng: &mut impl Rng,
) -> Result<Array1<f64>, EstimatorError> {
    use std::f64::consts::FRAC_PI_4;
    let bandwidth = cfg.resolved_bandwidth(s)?;
    let ctx = FitContext::new(s, bandwidth)?;
    let n = ctx.n();
    // Center the scores at pi/4 through the strong spectrum, then add a
    // random perturbation rescaled so its score amplitude is `amp`.
    let center = ctx.pseudo_solve(&Array1::from_elem(n, FRAC_PI_4), 1e-6);
    let noise = Array1::from_shape_fn(n, |_| rng.random::<f64>() * 2.0 - 1.0) / n as f64;
    let z_noise = ctx.k.dot(&noise);
    let spread = z_noise
        .iter()
        .map(|v| v.abs())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let mut amp = 0.15 + 0.45 * rng.random::<f64>();
    loop {
        let alpha = &center + &(&noise * (amp / spread));
        let z = ctx.k.dot(&alpha);
        if z.iter().all(|&v| v > 0.05 && v < FRAC_PI_2 - 0.05) {
            return Ok(alpha);
        }
        amp *= 0.5;
        if amp < 1e-3 {
            return Ok(center);
        }
    }
}

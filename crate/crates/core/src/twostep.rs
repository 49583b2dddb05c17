//! Two-step approximate lower bounding of the maximal AUC.
//!
//! Step 1 fits the arctangent ratio and builds ECDFs of the fitted scores.
//! Step 2 refits the same objective with per-sample weights
//! `w(tau) = sin(tau + pi/4) |F+(tau) - F-(tau)|` evaluated at the step-1
//! scores; the weighted objective value `A` reconstructs the maximal AUC
//! through `AUC* = sqrt(2) A / 2 + 1/2`.

use crate::data::SampleSet;
use crate::estimator::{
    fit_with_context, EstimatorError, FitContext, FitDiagnostics, FitWeights, SolverConfig,
};
use crate::kernel::{KernelError, KernelScoreModel};
use crate::rocgeom::{Ecdf, RocError};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

#[derive(Debug, thiserror::Error)]
pub enum TwoStepError {
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Roc(#[from] RocError),
    #[error("both classes must be nonempty")]
    EmptyClass,
    #[error("model bundle JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Weight function of the weighted variational objective:
/// `sin(tau + pi/4) |F+(tau) - F-(tau)|`, with `tau` clipped into
/// `[0, pi/2]` before evaluation. Always in `[0, 1]` on that range.
pub fn weight_fn(tau: f64, ecdf_pos: &Ecdf, ecdf_neg: &Ecdf) -> f64 {
    let tau = tau.clamp(0.0, FRAC_PI_2);
    (tau + FRAC_PI_4).sin() * (ecdf_pos.eval(tau) - ecdf_neg.eval(tau)).abs()
}

/// Result of the two-step procedure.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStepModel {
    step1_model: KernelScoreModel,
    ecdf_pos: Ecdf,
    ecdf_neg: Ecdf,
    step2_model: KernelScoreModel,
    a_hat: f64,
    auc_star_hat: f64,
    degenerate: bool,
    step1_diagnostics: FitDiagnostics,
    step2_diagnostics: Option<FitDiagnostics>,
}

impl TwoStepModel {
    pub fn step1_model(&self) -> &KernelScoreModel {
        &self.step1_model
    }

    pub fn step2_model(&self) -> &KernelScoreModel {
        &self.step2_model
    }

    pub fn ecdf_pos(&self) -> &Ecdf {
        &self.ecdf_pos
    }

    pub fn ecdf_neg(&self) -> &Ecdf {
        &self.ecdf_neg
    }

    /// Weighted objective value at the step-2 optimum (the sample estimate
    /// of `A`).
    pub fn a_hat(&self) -> f64 {
        self.a_hat
    }

    /// `sqrt(2) a_hat / 2 + 1/2`.
    pub fn auc_star_hat(&self) -> f64 {
        self.auc_star_hat
    }

    /// True when all step-2 weights vanished (identical score ECDFs); the
    /// procedure then reports `a_hat = 0`, `auc_star_hat = 1/2`.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn step1_diagnostics(&self) -> &FitDiagnostics {
        &self.step1_diagnostics
    }

    pub fn step2_diagnostics(&self) -> Option<&FitDiagnostics> {
        self.step2_diagnostics.as_ref()
    }

    /// Ranking score: clipped evaluation of the step-2 model.
    pub fn score(&self, x: &[f64]) -> Result<f64, TwoStepError> {
        Ok(self.step2_model.evaluate(x, true)?)
    }

    pub fn score_batch(
        &self,
        xs: ndarray::ArrayView2<'_, f64>,
    ) -> Result<ndarray::Array1<f64>, TwoStepError> {
        Ok(self.step2_model.evaluate_batch(xs, true)?)
    }

    pub fn to_json(&self) -> Result<String, TwoStepError> {
        let doc = BundleJson {
            step1_model: serde_json::from_str(&self.step1_model.to_json().map_err(TwoStepError::Kernel)?)?,
            step2_model: serde_json::from_str(&self.step2_model.to_json().map_err(TwoStepError::Kernel)?)?,
            ecdf_pos: self.ecdf_pos.sorted_values().to_vec(),
            ecdf_neg: self.ecdf_neg.sorted_values().to_vec(),
            a_hat: self.a_hat,
            auc_star_hat: self.auc_star_hat,
            degenerate: self.degenerate,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }
}

/// JSON bundle: both kernel models, ECDF value arrays, and the AUC
/// reconstruction values.
#[derive(Serialize, Deserialize)]
struct BundleJson {
    step1_model: serde_json::Value,
    step2_model: serde_json::Value,
    ecdf_pos: Vec<f64>,
    ecdf_neg: Vec<f64>,
    a_hat: f64,
    auc_star_hat: f64,
    degenerate: bool,
}

/// Runs the two-step procedure: the unweighted fit, score ECDFs and
/// weights, then the weighted refit. Both fits share `cfg` and the
/// support set, so the kernel eigendecomposition is computed once.
pub fn two_step_fit(s: &SampleSet, cfg: &SolverConfig) -> Result<TwoStepModel, TwoStepError> {
    if s.n_pos() == 0 || s.n_neg() == 0 {
        return Err(TwoStepError::EmptyClass);
    }
    let bandwidth = cfg.resolved_bandwidth(s)?;
    let lambda = cfg.resolved_lambda(s)?;
    let ctx = FitContext::new(s, bandwidth)?;
    let (m1, d1, scores) = fit_with_context(&ctx, lambda, None, cfg)?;
    let (sp, sn) = (
        scores.as_slice().expect("contiguous")[..s.n_pos()].to_vec(),
        scores.as_slice().expect("contiguous")[s.n_pos()..].to_vec(),
    );
    let ecdf_pos = Ecdf::new(&sp)?;
    let ecdf_neg = Ecdf::new(&sn)?;
    let w_pos: Vec<f64> = sp.iter().map(|&t| weight_fn(t, &ecdf_pos, &ecdf_neg)).collect();
    let w_neg: Vec<f64> = sn.iter().map(|&t| weight_fn(t, &ecdf_pos, &ecdf_neg)).collect();
    let weights = FitWeights::new(w_pos.clone(), w_neg.clone())?;

    if weights.max_weight() == 0.0 {
        // Identical score ECDFs: the weighted objective is identically the
        // regularizer, so report the degenerate collapse directly.
        let zero = KernelScoreModel::new(
            m1.support_points().to_owned(),
            ndarray::Array1::zeros(s.n_pos() + s.n_neg()),
            *m1.params(),
        )?;
        return Ok(TwoStepModel {
            step1_model: m1,
            ecdf_pos,
            ecdf_neg,
            step2_model: zero,
            a_hat: 0.0,
            auc_star_hat: 0.5,
            degenerate: true,
            step1_diagnostics: d1,
            step2_diagnostics: None,
        });
    }

    let (m2, d2, scores2) = fit_with_context(&ctx, lambda, Some(&weights), cfg)?;
    let mut a_hat = 0.0;
    for (i, &w) in w_pos.iter().enumerate() {
        a_hat += w * scores2[i].sin() / s.n_pos() as f64;
    }
    for (j, &w) in w_neg.iter().enumerate() {
        a_hat += w * scores2[s.n_pos() + j].cos() / s.n_neg() as f64;
    }
    Ok(TwoStepModel {
        step1_model: m1,
        ecdf_pos,
        ecdf_neg,
        step2_model: m2,
        a_hat,
        auc_star_hat: SQRT_2 * a_hat / 2.0 + 0.5,
        degenerate: false,
        step1_diagnostics: d1,
        step2_diagnostics: Some(d2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_gaussian_pair, GaussianSpec};
    use crate::estimator::LambdaSpec;
    use approx::assert_abs_diff_eq;

    #[test]
    fn weight_fn_examples() {
        let same = Ecdf::new(&[0.1, 0.5, 0.9]).unwrap();
        for tau in [0.0, 0.3, FRAC_PI_4, 1.5] {
            assert_eq!(weight_fn(tau, &same, &same), 0.0);
        }
        // F+(pi/4) - F-(pi/4) = 1.
        let lo = Ecdf::new(&[0.1]).unwrap();
        let hi = Ecdf::new(&[9.0]).unwrap();
        assert_abs_diff_eq!(weight_fn(FRAC_PI_4, &lo, &hi), 1.0, epsilon = 1e-15);
        // tau = 0 with |dF| = 1/2.
        let half = Ecdf::new(&[-1.0, 1.0]).unwrap();
        let none = Ecdf::new(&[5.0, 6.0]).unwrap();
        assert_abs_diff_eq!(
            weight_fn(0.0, &half, &none),
            SQRT_2 / 4.0,
            epsilon = 1e-15
        );
        // Clipping: tau beyond pi/2 evaluates at pi/2.
        assert_abs_diff_eq!(
            weight_fn(99.0, &lo, &hi),
            weight_fn(FRAC_PI_2, &lo, &hi),
            epsilon = 1e-15
        );
    }

    #[test]
    fn weight_range_is_unit_interval() {
        let e1 = Ecdf::new(&[0.2, 0.4, 0.9, 1.3]).unwrap();
        let e2 = Ecdf::new(&[0.1, 0.5, 0.6]).unwrap();
        let mut tau = 0.0;
        while tau <= FRAC_PI_2 {
            let w = weight_fn(tau, &e1, &e2);
            assert!((0.0..=1.0).contains(&w), "w({tau}) = {w}");
            tau += 0.01;
        }
    }

    #[test]
    fn identical_multisets_collapse_to_half() {
        let base = gen_gaussian_pair(
            &GaussianSpec::scalar(0.0, 1.0).unwrap(),
            &GaussianSpec::scalar(0.0, 1.0).unwrap(),
            40,
            1,
            5,
        )
        .unwrap();
        let rows: Vec<Vec<f64>> = base.positives().rows().into_iter().map(|r| r.to_vec()).collect();
        let s = SampleSet::from_rows(rows.clone(), rows).unwrap();
        let m = two_step_fit(&s, &SolverConfig::default()).unwrap();
        assert!(m.is_degenerate());
        assert_eq!(m.a_hat(), 0.0);
        assert_eq!(m.auc_star_hat(), 0.5);
        // Degenerate step-2 model scores zero everywhere.
        assert_eq!(m.score(&[0.7]).unwrap(), 0.0);
    }

    #[test]
    fn identical_distributions_stay_near_half() {
        let spec = GaussianSpec::scalar(0.0, 1.0).unwrap();
        let s = gen_gaussian_pair(&spec, &spec, 500, 500, 7).unwrap();
        let m = two_step_fit(&s, &SolverConfig::default()).unwrap();
        assert!(!m.is_degenerate());
        assert!(
            (m.auc_star_hat() - 0.5).abs() < 0.03,
            "auc_star_hat {}",
            m.auc_star_hat()
        );
        assert!(m.a_hat() >= -1e-12);
    }

    #[test]
    fn reconstruction_identity_is_exact() {
        let s = gen_gaussian_pair(
            &GaussianSpec::scalar(1.0, 1.0).unwrap(),
            &GaussianSpec::scalar(-1.0, 1.0).unwrap(),
            60,
            60,
            9,
        )
        .unwrap();
        let m = two_step_fit(&s, &SolverConfig::default()).unwrap();
        assert_eq!(m.auc_star_hat() - (SQRT_2 * m.a_hat() / 2.0 + 0.5), 0.0);
        assert!(m.a_hat() >= 0.0);
    }

    #[test]
    fn fit_is_deterministic_and_scores_pure() {
        let s = gen_gaussian_pair(
            &GaussianSpec::scalar(1.0, 1.0).unwrap(),
            &GaussianSpec::scalar(-1.0, 1.0).unwrap(),
            50,
            50,
            11,
        )
        .unwrap();
        let cfg = SolverConfig {
            lambda: LambdaSpec::Fixed(0.05),
            ..SolverConfig::default()
        };
        let a = two_step_fit(&s, &cfg).unwrap();
        let b = two_step_fit(&s, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.score(&[0.4]).unwrap(), b.score(&[0.4]).unwrap());
    }

    #[test]
    fn bundle_serializes() {
        let s = gen_gaussian_pair(
            &GaussianSpec::scalar(1.0, 1.0).unwrap(),
            &GaussianSpec::scalar(-1.0, 1.0).unwrap(),
            30,
            30,
            13,
        )
        .unwrap();
        let m = two_step_fit(&s, &SolverConfig::default()).unwrap();
        let text = m.to_json().unwrap();
        let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in [
            "step1_model",
            "step2_model",
            "ecdf_pos",
            "ecdf_neg",
            "a_hat",
            "auc_star_hat",
        ] {
            assert!(doc.get(key).is_some(), "missing {key}");
        }
    }
}

//! Empirical ROC curves, ECDFs, the Wilcoxon-Mann-Whitney AUC, polyline
//! arc length, and the mixture-surface parameterization of the area
//! between a ROC curve and the diagonal.

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum RocError {
    #[error("scores must be nonempty")]
    Empty,
    #[error("scores must be finite, got {0}")]
    NonFinite(f64),
    #[error("grid sizes must be at least 2 (got n_alpha={n_alpha}, n_tau={n_tau})")]
    GridTooSmall { n_alpha: usize, n_tau: usize },
}

fn check_scores(scores: &[f64]) -> Result<(), RocError> {
    if scores.is_empty() {
        return Err(RocError::Empty);
    }
    if let Some(&bad) = scores.iter().find(|v| !v.is_finite()) {
        return Err(RocError::NonFinite(bad));
    }
    Ok(())
}

/// Empirical CDF: `F(t) = #{values <= t} / n`, right-continuous and
/// nondecreasing. At its own i-th sorted sample (counting duplicates) the
/// value is exactly `i / n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ecdf {
    sorted_values: Vec<f64>,
}

impl Ecdf {
    pub fn new(scores: &[f64]) -> Result<Self, RocError> {
        check_scores(scores)?;
        let mut sorted_values = scores.to_vec();
        sorted_values.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
        Ok(Self { sorted_values })
    }

    pub fn n(&self) -> usize {
        self.sorted_values.len()
    }

    pub fn sorted_values(&self) -> &[f64] {
        &self.sorted_values
    }

    pub fn eval(&self, t: f64) -> f64 {
        let count = self.sorted_values.partition_point(|&v| v <= t);
        count as f64 / self.n() as f64
    }

    /// Survival function `1 - F(t) = #{values > t} / n`.
    pub fn survival(&self, t: f64) -> f64 {
        1.0 - self.eval(t)
    }
}

/// Builds the empirical CDF of a score sample.
pub fn ecdf(scores: &[f64]) -> Result<Ecdf, RocError> {
    Ecdf::new(scores)
}

/// One ROC vertex: the classifier `score > threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub threshold: f64,
}

/// Empirical ROC curve: vertices sorted by ascending FPR (descending
/// threshold), always containing the corners (0,0) and (1,1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    points: Vec<RocPoint>,
}

impl RocCurve {
    pub fn points(&self) -> &[RocPoint] {
        &self.points
    }

    /// Linear interpolation of TPR at an FPR level.
    pub fn tpr_at(&self, fpr: f64) -> f64 {
        let fpr = fpr.clamp(0.0, 1.0);
        let pts = &self.points;
        if fpr <= pts[0].fpr {
            return pts[0].tpr;
        }
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            if fpr <= b.fpr {
                if b.fpr == a.fpr {
                    return b.tpr;
                }
                let t = (fpr - a.fpr) / (b.fpr - a.fpr);
                return a.tpr + t * (b.tpr - a.tpr);
            }
        }
        pts.last().expect("nonempty").tpr
    }
}

/// Sweeps thresholds over the pooled unique score values plus the two
/// infinite sentinels, emitting `(1 - F-(tau), 1 - F+(tau))`.
pub fn empirical_roc(scores_pos: &[f64], scores_neg: &[f64]) -> Result<RocCurve, RocError> {
    check_scores(scores_pos)?;
    check_scores(scores_neg)?;
    let pos = Ecdf::new(scores_pos)?;
    let neg = Ecdf::new(scores_neg)?;
    let mut pooled: Vec<f64> = scores_pos.iter().chain(scores_neg.iter()).cloned().collect();
    pooled.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    pooled.dedup();
    let mut points = Vec::with_capacity(pooled.len() + 2);
    points.push(RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    });
    for &tau in pooled.iter().rev() {
        points.push(RocPoint {
            fpr: neg.survival(tau),
            tpr: pos.survival(tau),
            threshold: tau,
        });
    }
    points.push(RocPoint {
        fpr: 1.0,
        tpr: 1.0,
        threshold: f64::NEG_INFINITY,
    });
    Ok(RocCurve { points })
}

/// Tie handling for the pairwise AUC statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TieRule {
    /// `1(s+ >= s-)`: cross-class ties count as wins.
    GeqWins,
    /// `1(s+ > s-)`: ties count as losses.
    Strict,
    /// Ties count one half, the standard WMW statistic.
    Half,
}

/// Wilcoxon-Mann-Whitney statistic `(1/(n+ n-)) sum 1(s+ >= s-)`,
/// computed by sorting one class, in `O(n log n)`.
pub fn auc_wmw(scores_pos: &[f64], scores_neg: &[f64]) -> Result<f64, RocError> {
    auc_wmw_with(scores_pos, scores_neg, TieRule::GeqWins)
}

pub fn auc_wmw_with(
    scores_pos: &[f64],
    scores_neg: &[f64],
    rule: TieRule,
) -> Result<f64, RocError> {
    check_scores(scores_pos)?;
    check_scores(scores_neg)?;
    let mut neg = scores_neg.to_vec();
    neg.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    let mut wins = 0.0;
    for &sp in scores_pos {
        let le = neg.partition_point(|&v| v <= sp);
        let lt = neg.partition_point(|&v| v < sp);
        wins += match rule {
            TieRule::GeqWins => le as f64,
            TieRule::Strict => lt as f64,
            TieRule::Half => lt as f64 + 0.5 * (le - lt) as f64,
        };
    }
    Ok(wins / (scores_pos.len() as f64 * neg.len() as f64))
}

/// Sum of Euclidean segment lengths over consecutive ROC vertices.
pub fn polyline_arc_length(curve: &RocCurve) -> f64 {
    curve
        .points
        .windows(2)
        .map(|w| {
            let dx = w[1].fpr - w[0].fpr;
            let dy = w[1].tpr - w[0].tpr;
            (dx * dx + dy * dy).sqrt()
        })
        .sum()
}

/// One coordinate of the mixture-surface grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub alpha: f64,
    pub tau: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// Parameterizes the surface between the empirical ROC curve and the
/// diagonal through ROC curves of class mixtures.
///
/// For mixing weight `alpha` the mixture CDFs are
/// `F-(tau, alpha) = (1-alpha) F-(tau) + alpha F+(tau)` and symmetrically
/// for `F+`; rows sweep `alpha` uniformly over `[0, 1/2]` and `tau` over
/// pooled empirical score quantiles. The `alpha = 0` row reproduces ROC
/// vertices, the `alpha = 1/2` row lies on the diagonal, and for fixed
/// `tau` the points across `alpha` are collinear.
pub fn mixture_surface_grid(
    scores_pos: &[f64],
    scores_neg: &[f64],
    n_alpha: usize,
    n_tau: usize,
) -> Result<Vec<SurfacePoint>, RocError> {
    if n_alpha < 2 || n_tau < 2 {
        return Err(RocError::GridTooSmall { n_alpha, n_tau });
    }
    check_scores(scores_pos)?;
    check_scores(scores_neg)?;
    let pos = Ecdf::new(scores_pos)?;
    let neg = Ecdf::new(scores_neg)?;
    let mut pooled: Vec<f64> = scores_pos.iter().chain(scores_neg.iter()).cloned().collect();
    pooled.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    let taus: Vec<f64> = (0..n_tau)
        .map(|j| {
            let level = j as f64 / (n_tau - 1) as f64;
            let idx = (level * (pooled.len() - 1) as f64).round() as usize;
            pooled[idx]
        })
        .collect();
    let mut rows = Vec::with_capacity(n_alpha * n_tau);
    for i in 0..n_alpha {
        let alpha = 0.5 * i as f64 / (n_alpha - 1) as f64;
        for &tau in &taus {
            let fp = pos.eval(tau);
            let fn_ = neg.eval(tau);
            let mix_neg = (1.0 - alpha) * fn_ + alpha * fp;
            let mix_pos = alpha * fn_ + (1.0 - alpha) * fp;
            rows.push(SurfacePoint {
                alpha,
                tau,
                fpr: 1.0 - mix_neg,
                tpr: 1.0 - mix_pos,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ecdf_counts() {
        let e = ecdf(&[1.0, 2.0, 3.0]).unwrap();
        assert_abs_diff_eq!(e.eval(2.0), 2.0 / 3.0);
        assert_eq!(e.eval(0.5), 0.0);
        assert_eq!(e.eval(3.0), 1.0);
        assert_eq!(e.eval(9.0), 1.0);
        let dup = ecdf(&[1.0, 1.0, 2.0]).unwrap();
        assert_abs_diff_eq!(dup.eval(1.0), 2.0 / 3.0);
        assert!(ecdf(&[]).is_err());
    }

    #[test]
    fn roc_perfect_separation_passes_corner() {
        let c = empirical_roc(&[2.0, 3.0], &[0.0, 1.0]).unwrap();
        assert!(c
            .points()
            .iter()
            .any(|p| p.fpr == 0.0 && p.tpr == 1.0));
        assert_eq!(c.points().first().map(|p| (p.fpr, p.tpr)), Some((0.0, 0.0)));
        assert_eq!(c.points().last().map(|p| (p.fpr, p.tpr)), Some((1.0, 1.0)));
    }

    #[test]
    fn roc_identical_scores_on_diagonal() {
        let s = [0.3, 1.0, 2.5];
        let c = empirical_roc(&s, &s).unwrap();
        for p in c.points() {
            assert_abs_diff_eq!(p.fpr, p.tpr, epsilon = 1e-15);
        }
    }

    #[test]
    fn roc_threshold_enumeration() {
        let c = empirical_roc(&[1.0], &[0.0, 2.0]).unwrap();
        assert!(
            c.points()
                .iter()
                .any(|p| (p.fpr - 0.5).abs() < 1e-15 && p.tpr == 1.0),
            "expected vertex (1/2, 1): {:?}",
            c.points()
        );
    }

    #[test]
    fn roc_is_monotone() {
        let c = empirical_roc(&[0.1, 0.8, 0.5, 0.5], &[0.0, 0.2, 0.5]).unwrap();
        for w in c.points().windows(2) {
            assert!(w[1].fpr >= w[0].fpr);
            assert!(w[1].tpr >= w[0].tpr);
            assert!(w[1].threshold <= w[0].threshold);
        }
    }

    #[test]
    fn wmw_examples() {
        assert_eq!(auc_wmw(&[2.0, 3.0], &[0.0, 1.0]).unwrap(), 1.0);
        // Paper convention: >= means the tied singleton counts as a win.
        assert_eq!(auc_wmw(&[5.0], &[5.0]).unwrap(), 1.0);
        assert_eq!(auc_wmw_with(&[5.0], &[5.0], TieRule::Strict).unwrap(), 0.0);
        assert_eq!(auc_wmw_with(&[5.0], &[5.0], TieRule::Half).unwrap(), 0.5);
        assert_abs_diff_eq!(auc_wmw(&[1.0, 3.0], &[2.0]).unwrap(), 0.5);
    }

    #[test]
    fn arc_length_geometry() {
        let diag = RocCurve {
            points: vec![
                RocPoint { fpr: 0.0, tpr: 0.0, threshold: f64::INFINITY },
                RocPoint { fpr: 1.0, tpr: 1.0, threshold: f64::NEG_INFINITY },
            ],
        };
        assert_abs_diff_eq!(polyline_arc_length(&diag), 2f64.sqrt(), epsilon = 1e-15);
        let staircase = RocCurve {
            points: vec![
                RocPoint { fpr: 0.0, tpr: 0.0, threshold: f64::INFINITY },
                RocPoint { fpr: 0.0, tpr: 1.0, threshold: 1.0 },
                RocPoint { fpr: 1.0, tpr: 1.0, threshold: f64::NEG_INFINITY },
            ],
        };
        assert_abs_diff_eq!(polyline_arc_length(&staircase), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn surface_grid_rows_and_limits() {
        let pos = [0.5, 1.5, 2.5, 3.0];
        let neg = [0.0, 1.0, 2.0];
        let grid = mixture_surface_grid(&pos, &neg, 6, 50).unwrap();
        assert_eq!(grid.len(), 300);
        // alpha = 1/2 row sits on the diagonal.
        for p in grid.iter().filter(|p| p.alpha == 0.5) {
            assert_abs_diff_eq!(p.fpr, p.tpr, epsilon = 1e-15);
        }
        // alpha = 0 row matches ROC vertices at the same thresholds.
        let roc = empirical_roc(&pos, &neg).unwrap();
        for p in grid.iter().filter(|p| p.alpha == 0.0) {
            let vertex = roc
                .points()
                .iter()
                .find(|v| v.threshold == p.tau)
                .expect("matching threshold");
            assert_eq!((vertex.fpr, vertex.tpr), (p.fpr, p.tpr));
        }
        assert!(matches!(
            mixture_surface_grid(&pos, &neg, 1, 50),
            Err(RocError::GridTooSmall { .. })
        ));
    }

    #[test]
    fn surface_fixed_tau_is_collinear_across_alpha() {
        let pos = [0.1, 0.9, 1.7, 2.2, 3.3];
        let neg = [0.0, 0.4, 1.1, 2.0];
        let grid = mixture_surface_grid(&pos, &neg, 7, 9).unwrap();
        for j in 0..9 {
            let line: Vec<&SurfacePoint> = grid.iter().skip(j).step_by(9).collect();
            let a = line[0];
            let b = line[line.len() - 1];
            for p in &line {
                // Cross product of (b - a) and (p - a) must vanish.
                let cross = (b.fpr - a.fpr) * (p.tpr - a.tpr) - (b.tpr - a.tpr) * (p.fpr - a.fpr);
                assert!(cross.abs() < 1e-12, "collinearity residual {cross}");
            }
        }
    }
}

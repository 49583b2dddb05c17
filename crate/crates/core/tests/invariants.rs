//! Cross-module statistical and structural invariants.

use ndarray::Array1;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rocarc_core::data::{gen_gaussian_pair, load_csv, split, write_csv, GaussianSpec, LabelMapping, SampleSet};
use rocarc_core::divergence::{arc_length_estimate, divergence_sweep, default_rescale};
use rocarc_core::estimator::{
    cross_validate, fit_atan_ratio, BandwidthSpec, LambdaSpec, SolverConfig,
};
use rocarc_core::kernel::KernelScoreModel;
use rocarc_core::rocgeom::{auc_wmw, auc_wmw_with, empirical_roc, polyline_arc_length, TieRule};
use rocarc_core::twostep::two_step_fit;
use statrs::distribution::{ContinuousCDF, Normal};
use std::f64::consts::SQRT_2;

fn shifted_pair(n: usize, seed: u64) -> SampleSet {
    gen_gaussian_pair(
        &GaussianSpec::scalar(1.0, 1.0).unwrap(),
        &GaussianSpec::scalar(-1.0, 1.0).unwrap(),
        n,
        n,
        seed,
    )
    .unwrap()
}

fn atan_ratio_rmse(model: &KernelScoreModel) -> f64 {
    let grid: Vec<f64> = (0..61).map(|i| -3.0 + 6.0 * i as f64 / 60.0).collect();
    let mut sq = 0.0;
    for &x in &grid {
        let truth = (2.0 * x).exp().atan();
        let v = model.evaluate(&[x], true).unwrap();
        sq += (v - truth) * (v - truth);
    }
    (sq / grid.len() as f64).sqrt()
}

#[test]
fn estimator_rmse_is_non_increasing_in_n() {
    // lambda on the n^(-1/4) schedule, median bandwidth, 10 seeds.
    let mut means = Vec::new();
    for &n in &[50usize, 100, 200, 400] {
        let mut total = 0.0;
        for seed in 0..10u64 {
            let s = shifted_pair(n, 4000 + seed);
            let (model, _) = fit_atan_ratio(&s, &SolverConfig::default(), None).unwrap();
            total += atan_ratio_rmse(&model);
        }
        means.push(total / 10.0);
    }
    for w in means.windows(2) {
        assert!(
            w[1] <= w[0] + 1e-12,
            "mean RMSE increased with n: {means:?}"
        );
    }
}

#[test]
fn roc_of_true_score_dominates_noisy_score() {
    // 1D Gaussians where the identity score is monotone in the likelihood
    // ratio; corrupting it with noise can only lower the curve, up to
    // sampling tolerance 3/sqrt(n).
    let n = 2000;
    let s = gen_gaussian_pair(
        &GaussianSpec::scalar(1.5, 1.0).unwrap(),
        &GaussianSpec::scalar(0.0, 1.0).unwrap(),
        n,
        n,
        42,
    )
    .unwrap();
    let truth_pos: Vec<f64> = s.positives().column(0).to_vec();
    let truth_neg: Vec<f64> = s.negatives().column(0).to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let mut corrupt = |xs: &[f64]| -> Vec<f64> {
        xs.iter()
            .map(|&x| {
                let z: f64 =
                    rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
                x + z
            })
            .collect()
    };
    let noisy_pos = corrupt(&truth_pos);
    let noisy_neg = corrupt(&truth_neg);
    let clean = empirical_roc(&truth_pos, &truth_neg).unwrap();
    let noisy = empirical_roc(&noisy_pos, &noisy_neg).unwrap();
    let tol = 3.0 / (n as f64).sqrt();
    for i in 0..=20 {
        let fpr = i as f64 / 20.0;
        assert!(
            clean.tpr_at(fpr) >= noisy.tpr_at(fpr) - tol,
            "dominance violated at fpr {fpr}: {} vs {}",
            clean.tpr_at(fpr),
            noisy.tpr_at(fpr)
        );
    }
}

#[test]
fn wmw_complement_identity_without_ties() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let pos: Vec<f64> = (0..37).map(|_| rng.random::<f64>()).collect();
        let neg: Vec<f64> = (0..23).map(|_| rng.random::<f64>()).collect();
        let a = auc_wmw(&pos, &neg).unwrap();
        let b = auc_wmw_with(&neg, &pos, TieRule::Strict).unwrap();
        assert!((a + b - 1.0).abs() < 1e-12, "complement identity: {a} + {b}");
    }
}

#[test]
fn arc_length_is_rank_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let pos: Vec<f64> = (0..40).map(|_| rng.random::<f64>() * 3.0).collect();
    let neg: Vec<f64> = (0..25).map(|_| rng.random::<f64>() * 3.0 - 0.5).collect();
    let base = polyline_arc_length(&empirical_roc(&pos, &neg).unwrap());
    for transform in [|x: f64| x.exp(), |x: f64| 5.0 * x + 11.0, |x: f64| x.powi(3)] {
        let tp: Vec<f64> = pos.iter().map(|&x| transform(x)).collect();
        let tn: Vec<f64> = neg.iter().map(|&x| transform(x)).collect();
        let t = polyline_arc_length(&empirical_roc(&tp, &tn).unwrap());
        assert!((base - t).abs() < 1e-12, "arc changed under monotone map");
    }
}

#[test]
fn cv_selection_matches_fresh_split_recomputation() {
    let s = shifted_pair(100, 77);
    let lambdas = [1e-3, 1e-2, 1e-1];
    let bandwidths = [0.7, 1.4, 2.8];
    let chosen = cross_validate(&s, &lambdas, &bandwidths, 3, 9).unwrap();
    let (LambdaSpec::Fixed(cl), BandwidthSpec::Fixed(cb)) = (chosen.lambda, chosen.bandwidth)
    else {
        panic!("cross_validate returns fixed values");
    };
    // Recompute every candidate's held-out value on a fresh split; the
    // chosen pair must be within 0.02 of the best.
    let (train, valid) = split(&s, 0.5, 123).unwrap();
    let value = |lambda: f64, h: f64| -> f64 {
        let cfg = SolverConfig {
            lambda: LambdaSpec::Fixed(lambda),
            bandwidth: BandwidthSpec::Fixed(h),
            ..SolverConfig::default()
        };
        let (model, _) = fit_atan_ratio(&train, &cfg, None).unwrap();
        arc_length_estimate(&model, &valid).unwrap()
    };
    let mut best = f64::NEG_INFINITY;
    for &l in &lambdas {
        for &h in &bandwidths {
            best = best.max(value(l, h));
        }
    }
    let chosen_value = value(cl, cb);
    assert!(
        best - chosen_value < 0.02,
        "cv choice ({cl}, {cb}) scores {chosen_value}, best fresh-split value {best}"
    );
}

#[test]
fn two_step_lower_bounds_the_maximal_auc() {
    // True AUC* for N(1,1) vs N(-1,1) is Phi(sqrt(2)).
    let truth = Normal::standard().cdf(SQRT_2);
    let mut hats = Vec::new();
    for seed in 0..10u64 {
        let s = shifted_pair(500, 6000 + seed);
        let m = two_step_fit(&s, &SolverConfig::default()).unwrap();
        hats.push(m.auc_star_hat());
    }
    let n = hats.len() as f64;
    let mean = hats.iter().sum::<f64>() / n;
    let var = hats.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    assert!
    (
        mean <= truth + 2.0 * se,
        "mean auc_star_hat {mean} exceeds {truth} + 2 se ({se})"
    );
}

#[test]
fn two_step_score_ranks_held_out_data() {
    let s = shifted_pair(500, 81);
    let cfg = SolverConfig {
        lambda: LambdaSpec::Fixed(0.02),
        ..SolverConfig::default()
    };
    let m = two_step_fit(&s, &cfg).unwrap();
    let test = shifted_pair(4000, 82);
    let sp = m.score_batch(test.positives()).unwrap();
    let sn = m.score_batch(test.negatives()).unwrap();
    let auc = auc_wmw(sp.as_slice().unwrap(), sn.as_slice().unwrap()).unwrap();
    assert!(auc >= 0.88, "held-out auc {auc}");
}

#[test]
fn two_step_collapses_on_shuffled_labels() {
    // Both classes from one distribution at n = 500: the fitted A must be
    // driven toward zero.
    let spec = GaussianSpec::scalar(0.3, 1.2).unwrap();
    let s = gen_gaussian_pair(&spec, &spec, 500, 500, 91).unwrap();
    let m = two_step_fit(&s, &SolverConfig::default()).unwrap();
    assert!(m.a_hat() < 0.05, "a_hat {}", m.a_hat());
}

#[test]
fn sweep_bound_ordering_holds_throughout() {
    let rows = divergence_sweep(0.0, 5.0, 51, default_rescale()).unwrap();
    for r in &rows {
        assert!(
            r.prop2_lower <= r.tv + 1e-6,
            "lower bound above TV at delta {}",
            r.delta
        );
        assert!(
            r.tv <= r.prop2_upper + 1e-6,
            "TV above upper bound at delta {}",
            r.delta
        );
    }
}

#[test]
fn csv_round_trip_random_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..10 {
        let d = 1 + (case % 4);
        let n_pos = 2 + (rng.random::<u32>() % 20) as usize;
        let n_neg = 2 + (rng.random::<u32>() % 20) as usize;
        let draw = |rng: &mut ChaCha8Rng, n: usize| -> Vec<Vec<f64>> {
            (0..n)
                .map(|_| {
                    (0..d)
                        .map(|_| (rng.random::<f64>() - 0.5) * 10f64.powi(rng.random_range(-8..8)))
                        .collect()
                })
                .collect()
        };
        let p = draw(&mut rng, n_pos);
        let q = draw(&mut rng, n_neg);
        let s = SampleSet::from_rows(p, q).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_csv(&s, f.path(), "y").unwrap();
        let back = load_csv(f.path(), "y", &LabelMapping::Auto).unwrap();
        assert_eq!(s, back, "case {case}");
    }
}

#[test]
fn split_conserves_multisets() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for case in 0..10 {
        let n_pos = 2 + (rng.random::<u32>() % 30) as usize;
        let n_neg = 2 + (rng.random::<u32>() % 30) as usize;
        let frac = 0.05 + 0.9 * rng.random::<f64>();
        let s = gen_gaussian_pair(
            &GaussianSpec::scalar(0.0, 1.0).unwrap(),
            &GaussianSpec::scalar(1.0, 2.0).unwrap(),
            n_pos,
            n_neg,
            case,
        )
        .unwrap();
        let (a, b) = split(&s, frac, case).unwrap();
        let key = |block: ndarray::ArrayView2<f64>| -> Vec<u64> {
            let mut v: Vec<u64> = block.iter().map(|x| x.to_bits()).collect();
            v.sort();
            v
        };
        let mut joined_pos: Vec<u64> = key(a.positives());
        joined_pos.extend(key(b.positives()));
        joined_pos.sort();
        assert_eq!(joined_pos, key(s.positives()), "case {case}");
        let mut joined_neg: Vec<u64> = key(a.negatives());
        joined_neg.extend(key(b.negatives()));
        joined_neg.sort();
        assert_eq!(joined_neg, key(s.negatives()), "case {case}");
    }
}

#[test]
fn model_json_exact_round_trip_random() {
    use proptest::prelude::*;
    use proptest::test_runner::{Config, TestRunner};
    let mut runner = TestRunner::new(Config {
        cases: 64,
        ..Config::default()
    });
    runner
        .run(
            &(
                proptest::collection::vec(-1e3f64..1e3, 2..12),
                proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 2..12),
                1e-6f64..1e6,
            ),
            |(support, alpha, bandwidth)| {
                let n = support.len().min(alpha.len());
                let support_arr =
                    ndarray::Array2::from_shape_vec((n, 1), support[..n].to_vec()).unwrap();
                let alpha_arr = Array1::from(alpha[..n].to_vec());
                let m = KernelScoreModel::new(
                    support_arr,
                    alpha_arr,
                    rocarc_core::KernelParams::new(bandwidth).unwrap(),
                )
                .unwrap();
                let back = KernelScoreModel::from_json(&m.to_json().unwrap()).unwrap();
                prop_assert_eq!(m, back);
                Ok(())
            },
        )
        .unwrap();
}

#[test]
fn empirical_roc_arc_lengths_stay_in_range() {
    use proptest::prelude::*;
    use proptest::test_runner::{Config, TestRunner};
    let mut runner = TestRunner::new(Config {
        cases: 128,
        ..Config::default()
    });
    runner
        .run(
            &(
                proptest::collection::vec(-50.0f64..50.0, 1..60),
                proptest::collection::vec(-50.0f64..50.0, 1..60),
            ),
            |(pos, neg)| {
                let curve = empirical_roc(&pos, &neg).unwrap();
                let arc = polyline_arc_length(&curve);
                prop_assert!(arc >= SQRT_2 - 1e-12 && arc <= 2.0 + 1e-12, "arc {}", arc);
                for w in curve.points().windows(2) {
                    prop_assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
                }
                Ok(())
            },
        )
        .unwrap();
}

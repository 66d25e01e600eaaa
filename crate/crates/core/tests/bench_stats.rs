use annot_core::bench::{
    design_matrix, fit_logistic, gradient, lr_test, objective, pass_at_k, roc_auc, roc_curve,
    Feature, FeatureRow, FitOptions, ModelSpec,
};
use annot_core::verifier::ErrorClass;
use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TRUE_BETA: [f64; 3] = [-0.07, -0.05, -0.58];

fn class() -> impl Strategy<Value = ErrorClass> {
    prop_oneof![
        Just(ErrorClass::Success),
        Just(ErrorClass::Syntax),
        Just(ErrorClass::Timeout),
        Just(ErrorClass::Incomplete),
        Just(ErrorClass::PotentiallyIncorrect),
    ]
}

fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] && !labels[j] {
                pairs += 1.0;
                wins += if si > sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    wins / pairs
}

proptest! {
    #[test]
    fn pass_at_k_counts_success_within_k(
        records in prop::collection::vec(prop::collection::vec(class(), 0..8), 1..20),
        k in 1usize..10,
    ) {
        let hits = records.iter().filter(|r| r.iter().take(k).any(|c| *c == ErrorClass::Success)).count();
        prop_assert!((pass_at_k(&records, k) - hits as f64 / records.len() as f64).abs() < 1e-15);
        prop_assert!(pass_at_k(&records, k) <= pass_at_k(&records, k + 1));
    }

    #[test]
    fn auc_equals_pairwise_count(
        pairs in prop::collection::vec((0u8..6, any::<bool>()), 2..40),
    ) {
        let scores: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let labels: Vec<bool> = pairs.iter().map(|p| p.1).collect();
        prop_assume!(labels.iter().any(|l| *l) && labels.iter().any(|l| !*l));
        let auc = roc_auc(&scores, &labels).unwrap();
        prop_assert!((auc - pairwise_auc(&scores, &labels)).abs() < 1e-12);
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        prop_assert!((roc_auc(&neg, &labels).unwrap() - (1.0 - auc)).abs() < 1e-12);
        let curve = roc_curve(&scores, &labels).unwrap();
        let area: f64 = curve.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum();
        prop_assert!((area - auc).abs() < 1e-12);
    }
}

/// 110 programs under 14 configurations with known slopes.
fn simulate(seed: u64) -> Vec<FeatureRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let programs: Vec<(usize, usize, usize)> = (0..110)
        .map(|_| {
            (
                rng.gen_range(8..60),
                rng.gen_range(2..30),
                rng.gen_range(0..7),
            )
        })
        .collect();
    let alphas: Vec<f64> = (0..14).map(|j| 2.0 + 0.25 * j as f64).collect();
    let mut rows = Vec::new();
    for (j, alpha) in alphas.iter().enumerate() {
        for (i, &(l, a, h)) in programs.iter().enumerate() {
            let eta =
                alpha + TRUE_BETA[0] * l as f64 + TRUE_BETA[1] * a as f64 + TRUE_BETA[2] * h as f64;
            let p = 1.0 / (1.0 + (-eta).exp());
            rows.push(FeatureRow {
                program_id: format!("p{i:03}"),
                config_id: format!("c{j:02}"),
                l,
                a,
                h,
                extra: Vec::new(),
                outcome: rng.gen::<f64>() < p,
            });
        }
    }
    rows
}

#[test]
fn simulated_slopes_are_recovered_within_three_standard_errors() {
    let rows = simulate(20240501);
    assert_eq!(rows.len(), 1540);
    let fit = fit_logistic(&rows, &ModelSpec::default(), &FitOptions::default()).unwrap();
    assert!(fit.converged);
    assert!(
        fit.gradient_norm < 1e-8,
        "gradient norm {}",
        fit.gradient_norm
    );
    assert_eq!(fit.alpha.len(), 14);
    for (f, truth) in [Feature::L, Feature::A, Feature::H]
        .into_iter()
        .zip(TRUE_BETA)
    {
        let (b, se) = (fit.beta(f).unwrap(), fit.std_error_of(f).unwrap());
        assert!(
            (b - truth).abs() < 3.0 * se,
            "{f:?}: {b} vs {truth} (se {se})"
        );
    }
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let rows = simulate(7);
    let d = design_matrix(&rows, &ModelSpec::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let theta = DVector::from_fn(d.x.ncols(), |_, _| rng.gen_range(-0.3..0.3));
    let g = gradient(&d, &theta, 1e-6);
    let h = 1e-5;
    let fd = DVector::from_fn(theta.len(), |i, _| {
        let (mut up, mut dn) = (theta.clone(), theta.clone());
        up[i] += h;
        dn[i] -= h;
        (objective(&d, &up, 1e-6) - objective(&d, &dn, 1e-6)) / (2.0 * h)
    });
    let rel = (&g - &fd).norm() / g.norm();
    assert!(rel < 1e-6, "relative gradient error {rel}");
}

#[test]
fn likelihood_ratio_detects_the_h_effect() {
    let rows = simulate(20240501);
    let opts = FitOptions::default();
    let full = fit_logistic(&rows, &ModelSpec::default(), &opts).unwrap();
    let reduced = fit_logistic(
        &rows,
        &ModelSpec {
            features: vec![Feature::L, Feature::A],
            extra: Vec::new(),
        },
        &opts,
    )
    .unwrap();
    let t = lr_test(&reduced, &full).unwrap();
    assert_eq!(t.df, 1);
    assert!((t.statistic - 2.0 * (full.log_likelihood - reduced.log_likelihood)).abs() < 1e-9);
    assert!(t.p_value < 1e-6, "p = {}", t.p_value);
    assert!(lr_test(&full, &reduced).is_err());
}

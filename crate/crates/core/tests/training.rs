use proptest::prelude::*;

use domain_reweight::dataset::{generate_synthetic, kfold_indices, parse_csv, parse_sparse, split_train_test};
use domain_reweight::linmodel::{train_sgd, weighted_loss, weighted_loss_gradient};
use domain_reweight::methods::{
    domain_classifier, fit_baseline, fit_feataug, fit_import, fit_pred, import_weights, pred_weights, Baseline,
};
use domain_reweight::reweight::{alpha_weights, train_at_alpha};
use domain_reweight::search::{find_weighting, grid_search, Objective};
use domain_reweight::{AlphaEvaluator, AlphaProblem, Dataset, Error, LinearModel, SyntheticConfig, TrainConfig};

fn synthetic(n_t: usize, n_s: usize, d: usize, sigma: f64, seed: u64) -> (Dataset, Dataset) {
    generate_synthetic(&SyntheticConfig {
        n_target: n_t,
        n_source: n_s,
        d,
        sigma,
        noise_sd: 1.0,
        seed,
    })
    .unwrap()
}

fn agreement(a: &LinearModel, b: &LinearModel, ds: &Dataset) -> f64 {
    let (pa, pb) = (a.predict_dataset(ds).unwrap(), b.predict_dataset(ds).unwrap());
    pa.iter().zip(&pb).filter(|(x, y)| x == y).count() as f64 / pa.len() as f64
}

fn random_instance() -> impl Strategy<Value = (Dataset, Vec<f64>, LinearModel, f64)> {
    (1usize..6, 2usize..30).prop_flat_map(|(d, n)| {
        (
            prop::collection::vec(-3.0f64..3.0, n * d),
            prop::collection::vec(0u8..2, n),
            prop::collection::vec(0.0f64..4.0, n),
            prop::collection::vec(-2.0f64..2.0, d + 1),
            0.0f64..0.5,
        )
            .prop_map(move |(x, y, w, c, l2)| {
                let mut w = w;
                w[0] += 0.1;
                let model = LinearModel {
                    coefficients: c[..d].to_vec(),
                    intercept: c[d],
                };
                (Dataset::new(x, d, y).unwrap(), w, model, l2)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn gradient_matches_central_differences((ds, w, model, l2) in random_instance()) {
        let (g, gb) = weighted_loss_gradient(&model, &ds, &w, l2).unwrap();
        let h = 1e-6;
        let d = ds.n_cols();
        let largest = g.iter().fold(gb.abs(), |m, v| m.max(v.abs())).max(1e-3);
        for j in 0..=d {
            let at = |delta: f64| {
                let mut m = model.clone();
                if j < d { m.coefficients[j] += delta } else { m.intercept += delta }
                weighted_loss(&m, &ds, &w, l2).unwrap()
            };
            let numeric = (at(h) - at(-h)) / (2.0 * h);
            let analytic = if j < d { g[j] } else { gb };
            prop_assert!((analytic - numeric).abs() / largest <= 1e-5, "j={} {} vs {}", j, analytic, numeric);
        }
    }

    #[test]
    fn loss_invariant_to_weight_scale((ds, w, model, l2) in random_instance(), e in -30i32..30) {
        let c = 2f64.powi(e);
        let scaled: Vec<f64> = w.iter().map(|x| x * c).collect();
        prop_assert_eq!(weighted_loss(&model, &ds, &w, l2).unwrap(), weighted_loss(&model, &ds, &scaled, l2).unwrap());
    }

    #[test]
    fn alpha_weights_preserve_total_mass(alpha in 0.0f64..=1.0, n_t in 1usize..500, n_s in 1usize..5000) {
        let (wt, ws) = alpha_weights(alpha, n_t, n_s).unwrap();
        let total = wt * n_t as f64 + ws * n_s as f64;
        prop_assert!((total - (n_t + n_s) as f64).abs() <= 1e-9 * total);
    }
}

#[test]
fn training_is_invariant_to_power_of_two_weight_scales() {
    let (t, s) = synthetic(300, 2000, 8, 1.0, 4);
    let problem = AlphaProblem::new(&t, &s).unwrap();
    let w = problem.weights(0.7).unwrap();
    let cfg = TrainConfig::default();
    let reference = train_sgd(problem.combined(), &w, &cfg, None).unwrap();
    for c in [0.5, 4.0, 2f64.powi(40), 2f64.powi(-40)] {
        let scaled: Vec<f64> = w.iter().map(|x| x * c).collect();
        assert_eq!(train_sgd(problem.combined(), &scaled, &cfg, None).unwrap(), reference);
    }
}

#[test]
fn arbitrary_weight_scales_change_coefficients_only_by_rounding() {
    let (t, s) = synthetic(300, 2000, 8, 1.0, 4);
    let problem = AlphaProblem::new(&t, &s).unwrap();
    let w = problem.weights(0.7).unwrap();
    let cfg = TrainConfig::default();
    let (reference, _) = train_sgd(problem.combined(), &w, &cfg, None).unwrap();
    for c in [3.7, 1e-3, 12345.678] {
        let scaled: Vec<f64> = w.iter().map(|x| x * c).collect();
        let (m, _) = train_sgd(problem.combined(), &scaled, &cfg, None).unwrap();
        for (a, b) in m.coefficients.iter().zip(&reference.coefficients) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
        assert_eq!(agreement(&m, &reference, problem.combined()), 1.0);
    }
}

#[test]
fn training_is_deterministic() {
    let (t, s) = synthetic(200, 1000, 5, 1.0, 8);
    let a = train_at_alpha(&t, &s, 0.6, &TrainConfig::default(), None).unwrap();
    let b = train_at_alpha(&t, &s, 0.6, &TrainConfig::default(), None).unwrap();
    assert_eq!(a, b);
}

#[test]
fn warm_start_from_converged_model_stops_sooner() {
    let (t, s) = synthetic(400, 4000, 10, 2.0, 2);
    let cfg = TrainConfig::default();
    for alpha in [0.0, 0.5, 0.9] {
        let (cold, cold_stats) = train_at_alpha(&t, &s, alpha, &cfg, None).unwrap();
        let (_, warm_stats) = train_at_alpha(&t, &s, alpha, &cfg, Some(&cold)).unwrap();
        assert!(warm_stats.epochs_run < cold_stats.epochs_run, "alpha {alpha}: {warm_stats:?} vs {cold_stats:?}");
    }
}

#[test]
fn zero_source_weights_match_target_only_training() {
    let (t, s) = synthetic(3000, 2000, 10, 2.0, 6);
    let (train, held_out) = split_train_test(&t, 0.5, 6).unwrap();
    let combined = train.concat(&s).unwrap();
    let mut w = vec![1.0; train.n_rows()];
    w.resize(combined.n_rows(), 0.0);
    let cfg = TrainConfig::default();
    let (masked, _) = train_sgd(&combined, &w, &cfg, None).unwrap();
    let (alone, _) = train_sgd(&train, &vec![1.0; train.n_rows()], &cfg, None).unwrap();
    assert!(agreement(&masked, &alone, &held_out) >= 0.99);
}

#[test]
fn init_dimension_mismatch_is_rejected() {
    let (t, _) = synthetic(50, 10, 3, 0.0, 1);
    let init = LinearModel::zeros(4);
    assert!(matches!(
        train_sgd(&t, &vec![1.0; 50], &TrainConfig::default(), Some(&init)),
        Err(Error::Validation(_))
    ));
}

#[test]
fn endpoint_alphas_reproduce_baselines() {
    let (t, s) = synthetic(1000, 3000, 10, 2.0, 3);
    let (train, test) = split_train_test(&t, 0.2, 3).unwrap();
    let cfg = TrainConfig::default();
    let problem = AlphaProblem::new(&train, &s).unwrap();
    let ones = |ds: &Dataset| vec![1.0; ds.n_rows()];
    let pooled = train.concat(&s).unwrap();
    for (alpha, reference, kind) in [
        (1.0, train_sgd(&train, &ones(&train), &cfg, None).unwrap().0, Baseline::Target),
        (0.0, train_sgd(&s, &ones(&s), &cfg, None).unwrap().0, Baseline::Source),
        (problem.beta(), train_sgd(&pooled, &ones(&pooled), &cfg, None).unwrap().0, Baseline::All),
    ] {
        let (m, _) = problem.train(alpha, &cfg, None).unwrap();
        assert_eq!(m, reference, "{}", kind.name());
        assert_eq!(fit_baseline(kind, &train, &s, &test, &cfg).unwrap().model, reference);
    }
}

#[test]
fn cv_at_alpha_one_is_target_only_cv() {
    let (t, s) = synthetic(400, 2000, 6, 2.0, 5);
    let cfg = TrainConfig {
        seed: 13,
        ..TrainConfig::default()
    };
    let mut ev = AlphaEvaluator::new(&t, &s, 5, cfg.clone()).unwrap();
    let cv = ev.cv_accuracy(1.0).unwrap();
    let mut sum = 0.0;
    for fold in kfold_indices(t.n_rows(), 5, cfg.seed).unwrap() {
        let train = t.subset(&fold.train);
        let (m, _) = train_sgd(&train, &vec![1.0; train.n_rows()], &cfg, None).unwrap();
        sum += m.accuracy(&t.subset(&fold.validation)).unwrap();
    }
    assert_eq!(cv, sum / 5.0);
}

#[test]
fn cache_never_exceeds_distinct_alphas() {
    let (t, s) = synthetic(200, 1000, 5, 2.0, 1);
    let mut ev = AlphaEvaluator::new(&t, &s, 4, TrainConfig::default()).unwrap();
    for a in [0.5, 0.2, 0.5, 0.2 + 1e-13, 0.9, 0.5] {
        ev.evaluate(a).unwrap();
    }
    assert_eq!(ev.eval_count(), 3);
    assert_eq!(ev.probes().len(), 3);
}

#[test]
fn gss_agrees_with_grid_on_synthetic_data() {
    let (t, s) = synthetic(2500, 6000, 20, 2.0, 12);
    let (train, test) = split_train_test(&t, 0.2, 12).unwrap();
    let train = domain_reweight::dataset::downsample(&train, 400, 12).unwrap();
    let cfg = TrainConfig::default();
    let mut warm = AlphaEvaluator::new(&train, &s, 5, cfg.clone()).unwrap();
    let (_, gss) = find_weighting(&mut warm, 0.02).unwrap();
    let mut cold = AlphaEvaluator::new(&train, &s, 5, cfg).unwrap().with_warm_start(false);
    let (_, grid) = grid_search(&mut cold, 0.02).unwrap();
    assert!(gss.probes.len() <= 25);
    assert_eq!(grid.probes.len(), 51);
    let gap = (gss.final_model.accuracy(&test).unwrap() - grid.final_model.accuracy(&test).unwrap()).abs();
    assert!(gap <= 0.01, "gap {gap}");
    assert!(gss.cv_accuracy >= grid.cv_accuracy - 0.01);
}

#[test]
fn indistinguishable_domains_give_near_constant_pred_weights() {
    let (pool, _) = synthetic(6000, 10, 8, 0.0, 21);
    let t = pool.subset(&(0..1000).collect::<Vec<_>>());
    let s = pool.subset(&(1000..5000).collect::<Vec<_>>());
    let test = pool.subset(&(5000..6000).collect::<Vec<_>>());
    let cfg = TrainConfig::default();
    let domain = domain_classifier(&t, &s, &cfg).unwrap();
    let w = pred_weights(&t, &s, &domain).unwrap();
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    // balanced domain classes put indistinguishable rows at p = 0.5
    assert!(w.iter().all(|x| (x - mean).abs() < 0.1), "spread around {mean}");
    let pred = fit_pred(&t, &s, &test, &cfg).unwrap();
    let all = fit_baseline(Baseline::All, &t, &s, &test, &cfg).unwrap();
    assert!(agreement(&pred.model, &all.model, &test) >= 0.97);
}

#[test]
fn domain_classifier_separates_shifted_domains() {
    let (t, _) = synthetic(500, 10, 3, 0.0, 2);
    let (s0, _) = synthetic(800, 10, 3, 0.0, 3);
    let s = s0.map_rows(3, |x, out| out.extend(x.iter().map(|v| v + 3.0)));
    let domain = domain_classifier(&t, &s, &TrainConfig::default()).unwrap();
    let pt = domain.probabilities(&t).unwrap();
    let ps = domain.probabilities(&s).unwrap();
    assert!(pt.iter().sum::<f64>() / 500.0 > 0.8);
    assert!(ps.iter().sum::<f64>() / 800.0 < 0.2);
    let w = import_weights(&t, &s, &domain).unwrap();
    assert!(w[..500].iter().all(|&x| x == 1.0));
    assert!(w[500..].iter().all(|&x| x > 0.0 && x.is_finite()));
    let test = t.clone();
    assert!(fit_import(&t, &s, &test, &TrainConfig::default()).unwrap().test_accuracy > 0.6);
}

#[test]
fn feataug_with_empty_source_trains_on_target_alone() {
    let (t, _) = synthetic(1000, 10, 5, 0.0, 9);
    let (train, test) = split_train_test(&t, 0.3, 9).unwrap();
    let r = fit_feataug(&train, &Dataset::empty(5), &test, &TrainConfig::default()).unwrap();
    assert_eq!(r.model.dim(), 15);
    let target = fit_baseline(Baseline::Target, &train, &Dataset::empty(5), &test, &TrainConfig::default());
    // the plain baseline needs a source; feataug does not
    assert!(target.is_err());
    assert!(r.test_accuracy > 0.8);
}

#[test]
fn synthetic_target_does_not_depend_on_sigma() {
    let (a, sa) = synthetic(100, 100, 4, 0.5, 7);
    let (b, sb) = synthetic(100, 100, 4, 6.0, 7);
    assert_eq!(a, b);
    assert_eq!(sa.features(), sb.features());
    assert_ne!(sa.labels(), sb.labels());
}

#[test]
fn csv_and_sparse_parse_the_same_table() {
    let csv = "a,label,b\n1.5,1,0\n0,-1,-2\n";
    let sparse = "#d=2\n+1 1:1.5\n-1 2:-2\n";
    let c = parse_csv(csv, "label").unwrap();
    let s = parse_sparse(sparse).unwrap();
    assert_eq!(c.features(), s.features());
    assert_eq!(c.labels(), s.labels());
    assert!(matches!(parse_csv("a,label\n1,2\n", "label"), Err(Error::Validation(_))));
    assert!(matches!(parse_csv("a,b\n1,2\n", "label"), Err(_)));
}

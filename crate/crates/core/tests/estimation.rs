mod common;

use chaingraph::estimation::{
    self, default_penalty_grid, learn_structure, likelihood_ratio_ci_test, node_logistic_fit, node_logistic_path,
    BootstrapSpec, EffectQuery, FitMethod, SymmetrizationRule,
};
use chaingraph::exact::{EffectScale, EventPredicate, ExactEngine};
use chaingraph::{reference, CaseDataset, ChainGraphModel, NetworkGraph, Treatment, TreatmentMode};
use common::*;

fn chain3(k: f64) -> ChainGraphModel {
    let g = NetworkGraph::from_labels(&["a", "b", "c"], &[("a", "b"), ("b", "c")]).unwrap();
    ChainGraphModel::new(g, TreatmentMode::Shared, vec![0.1, -0.2, 0.0], vec![k, k], vec![0.3, 0.0, -0.3], None)
        .unwrap()
}

/// Summed node-conditional log-likelihood of node `i` at the model's own
/// parameters, coded independently of the library.
fn node_loglik(model: &ChainGraphModel, data: &CaseDataset, i: usize) -> f64 {
    data.cases()
        .iter()
        .map(|case| {
            let y = case.y.values();
            let mut eta = model.h()[i] + model.gamma()[i] * case.a.at(i) as f64;
            for (j, &yj) in y.iter().enumerate() {
                if j != i {
                    eta += model.coupling(i, j) * yj as f64;
                }
            }
            let z = 2.0 * y[i] as f64 * eta;
            -(1.0 + (-z).exp()).ln()
        })
        .sum()
}

#[test]
fn coins_give_empty_neighborhoods_under_penalty() {
    let d = coin_dataset(5, 1000, 1);
    for i in 0..5 {
        let fit = node_logistic_fit(&d, i, 0.1).unwrap();
        assert!(fit.neighbor_coeffs.iter().all(|(_, b)| b.abs() < 1e-6), "{:?}", fit.neighbor_coeffs);
    }
}

#[test]
fn unpenalized_nodewise_recovers_a_chain() {
    let m = chain3(0.5);
    let d = shared_dataset(&m, 2000, 3);
    for i in 0..3 {
        let fit = node_logistic_fit(&d, i, 0.0).unwrap();
        for (label, b) in &fit.neighbor_coeffs {
            let j = m.graph().index_of(label).unwrap();
            assert!((b - m.coupling(i, j)).abs() < 0.15, "{i}-{label}: {b}");
        }
        // the optimum beats the generating parameters
        assert!(fit.log_likelihood >= node_loglik(&m, &d, i) - 1e-8);
    }
}

#[test]
fn neighborhoods_shrink_as_penalty_grows() {
    let d = shared_dataset(&reference::judicial_model(), 1500, 8);
    let grid = default_penalty_grid();
    for i in 0..9 {
        let path = node_logistic_path(&d, i, &grid).unwrap();
        // grid is descending: sizes must be non-decreasing along it
        let sizes: Vec<usize> = path.iter().map(|f| f.neighborhood(1e-6).len()).collect();
        assert!(sizes.windows(2).all(|w| w[0] <= w[1]), "node {i}: {sizes:?}");
    }
}

#[test]
fn structure_from_coins_is_empty() {
    let mut total = 0.0;
    for r in 0..20 {
        let d = coin_dataset(9, 2000, 100 + r);
        let s = learn_structure(&d, &default_penalty_grid(), SymmetrizationRule::And).unwrap();
        total += edge_f1(&NetworkGraph::empty(labels(9)).unwrap(), &s.graph);
    }
    assert!(total / 20.0 >= 0.95, "{}", total / 20.0);
}

#[test]
fn and_rule_is_contained_in_or_rule() {
    for seed in 0..3 {
        let d = shared_dataset(&reference::judicial_model(), 600, 40 + seed);
        let and = learn_structure(&d, &default_penalty_grid(), SymmetrizationRule::And).unwrap();
        let or = learn_structure(&d, &default_penalty_grid(), SymmetrizationRule::Or).unwrap();
        for (a, b) in and.edges() {
            assert!(or.edges().contains(&(a.clone(), b.clone())), "{a}-{b}");
        }
    }
}

#[test]
fn mle_is_stationary_and_beats_truth() {
    let truth = reference::judicial_model();
    let d = shared_dataset(&truth, 2000, 5);
    let fit = estimation::fit_exact_mle(&d, truth.graph()).unwrap();
    let g = estimation::mle_gradient(&fit, &d).unwrap();
    assert!(g.iter().all(|x| x.abs() < 1e-6), "{g:?}");
    let at_fit = estimation::mle_log_likelihood(&fit, &d).unwrap();
    let at_truth = estimation::mle_log_likelihood(&truth, &d).unwrap();
    assert!(at_fit >= at_truth - 1e-8);
}

#[test]
fn mle_recovers_generating_parameters_on_average() {
    let truth = reference::judicial_model();
    let tv = flat_params(&truth);
    let mut mean = vec![0.0; tv.len()];
    for r in 0..20 {
        let d = shared_dataset(&truth, 2000, 500 + r);
        let fit = estimation::fit_exact_mle(&d, truth.graph()).unwrap();
        for (m, v) in mean.iter_mut().zip(flat_params(&fit)) {
            *m += v / 20.0;
        }
    }
    let worst = mean.iter().zip(&tv).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst < 0.15, "{worst}");
}

#[test]
fn pseudo_likelihood_is_consistent_and_agrees_with_mle() {
    let truth = reference::judicial_model();
    let d = shared_dataset(&truth, 20_000, 9);
    let pl = estimation::fit_pseudolikelihood(&d, truth.graph()).unwrap();
    let mle = estimation::fit_exact_mle(&d, truth.graph()).unwrap();
    for ((p, m), t) in flat_params(&pl).iter().zip(flat_params(&mle)).zip(flat_params(&truth)) {
        assert!((p - t).abs() < 0.1, "pl {p} truth {t}");
        assert!((p - m).abs() < 0.1, "pl {p} mle {m}");
    }
}

#[test]
fn pseudo_likelihood_on_coins_finds_no_interaction() {
    let d = coin_dataset(4, 20_000, 2);
    let g = NetworkGraph::complete(labels(4)).unwrap();
    let pl = estimation::fit_pseudolikelihood(&d, &g).unwrap();
    assert!(pl.k().iter().all(|k| k.abs() < 0.05), "{:?}", pl.k());
}

#[test]
fn mle_is_equivariant_under_relabeling() {
    let truth = chain3(0.4);
    let d = shared_dataset(&truth, 800, 13);
    let fit = estimation::fit_exact_mle(&d, truth.graph()).unwrap();
    // reverse column order
    let order = [2usize, 1, 0];
    let labels: Vec<String> = order.iter().map(|&i| d.labels()[i].clone()).collect();
    let cases = d
        .cases()
        .iter()
        .map(|c| chaingraph::Case {
            y: chaingraph::Outcome::new(order.iter().map(|&i| c.y.values()[i]).collect()).unwrap(),
            ..c.clone()
        })
        .collect();
    let d2 = CaseDataset::new(labels.clone(), TreatmentMode::Shared, false, cases).unwrap();
    let g2 = NetworkGraph::from_labels(
        &labels,
        &[(labels[0].clone(), labels[1].clone()), (labels[1].clone(), labels[2].clone())],
    )
    .unwrap();
    let fit2 = estimation::fit_exact_mle(&d2, &g2).unwrap();
    for (new, &old) in order.iter().enumerate() {
        assert!((fit2.h()[new] - fit.h()[old]).abs() < 1e-8);
        assert!((fit2.gamma()[new] - fit.gamma()[old]).abs() < 1e-8);
    }
    assert!((fit2.coupling(0, 1) - fit.coupling(2, 1)).abs() < 1e-8);
}

#[test]
fn ci_test_is_calibrated_on_coins() {
    let mut pvals: Vec<f64> =
        (0..1000).map(|r| likelihood_ratio_ci_test(&coin_dataset(2, 300, 10_000 + r), 0, 1, &[]).unwrap()).collect();
    pvals.sort_by(f64::total_cmp);
    let n = pvals.len() as f64;
    let d = pvals
        .iter()
        .enumerate()
        .map(|(i, &p)| (p - i as f64 / n).abs().max(((i + 1) as f64 / n - p).abs()))
        .fold(0.0, f64::max);
    // asymptotic Kolmogorov-Smirnov critical value at 0.01
    assert!(d < 1.628 / n.sqrt(), "D = {d}");
}

#[test]
fn ci_test_has_power_against_strong_coupling() {
    let g = NetworkGraph::from_labels(&["x", "z"], &[("x", "z")]).unwrap();
    let m = ChainGraphModel::new(g, TreatmentMode::Shared, vec![0.0; 2], vec![1.0], vec![0.0; 2], None).unwrap();
    let rejected = (0..100)
        .filter(|&r| likelihood_ratio_ci_test(&shared_dataset(&m, 1000, 700 + r), 0, 1, &[]).unwrap() < 0.05)
        .count();
    assert!(rejected > 90);
}

fn small_query() -> EffectQuery {
    EffectQuery {
        a1: Treatment::Shared(1),
        a0: Treatment::Shared(0),
        event: EventPredicate::count(3),
        scale: EffectScale::RiskDifference,
    }
}

#[test]
fn bootstrap_intervals_cover_the_truth() {
    let truth = chain3(0.4);
    let q = small_query();
    let target = ExactEngine::default().causal_effect(&truth, &q.a1, &q.a0, &q.event, q.scale, None).unwrap().point;
    let covered = (0..100)
        .filter(|&r| {
            let d = shared_dataset(&truth, 500, 2000 + r);
            let spec = BootstrapSpec { nb: 100, seed: r, ..BootstrapSpec::default() };
            let e = estimation::bootstrap_effect(&d, truth.graph(), &q, &spec).unwrap();
            e.ci_low.unwrap() <= target && target <= e.ci_high.unwrap()
        })
        .count();
    assert!(covered >= 90, "{covered}");
}

#[test]
fn bootstrap_ignores_thread_count() {
    let truth = chain3(0.4);
    let d = shared_dataset(&truth, 400, 31);
    let spec = BootstrapSpec { nb: 40, seed: 8, method: FitMethod::Pseudo, ..BootstrapSpec::default() };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| estimation::bootstrap_effect(&d, truth.graph(), &small_query(), &spec).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn label_mismatch_is_rejected() {
    let d = coin_dataset(3, 50, 1);
    let g = NetworkGraph::empty(vec!["p".into(), "q".into(), "r".into()]).unwrap();
    assert!(estimation::fit_model(&d, &g, FitMethod::Mle).is_err());
}

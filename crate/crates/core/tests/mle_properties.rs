use ggm_ebic::chordal::{clique_decomposition, enumerate_decomposable, is_chordal};
use ggm_ebic::mle::{
    likelihood_equation_residual, max_loglik, mle_fit, mle_fit_decomposable, mle_fit_iterative, mle_fit_warm,
    IterativeMethod, MleOptions,
};
use ggm_ebic::model::{log_likelihood, sample_covariance, EdgeSet, SampleCov};
use ggm_ebic::synthetic::{build_chain_theta, sample_mvn};
use ggm_ebic::Error;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_cov(seed: u64, p: usize, m: usize) -> SampleCov {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(m, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    sample_covariance(&x).unwrap()
}

fn random_graph(seed: u64, p: usize, density: f64) -> EdgeSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut e = EdgeSet::empty(p);
    for j in 0..p {
        for k in j + 1..p {
            if rng.random_bool(density) {
                e.insert(j, k).unwrap();
            }
        }
    }
    e
}

#[test]
fn likelihood_equations_hold_on_every_small_decomposable_model() {
    let s = random_cov(11, 5, 30);
    let models = enumerate_decomposable(5, 10).unwrap();
    assert_eq!(models.len(), 822);
    for edges in &models {
        let theta = mle_fit(&s, edges).unwrap();
        assert!(likelihood_equation_residual(&s, &theta, edges) <= 1e-8, "{edges}");
        for j in 0..5 {
            for k in j + 1..5 {
                if !edges.contains(j, k) {
                    assert_eq!(theta.get(j, k), 0.0);
                }
            }
        }
    }
}

#[test]
fn edge_scaling_agrees_with_closed_form() {
    let s = random_cov(12, 6, 40);
    for edges in enumerate_decomposable(6, 5).unwrap().iter().step_by(37) {
        let closed = mle_fit_decomposable(&s, &clique_decomposition(edges).unwrap()).unwrap();
        let options = MleOptions {
            method: IterativeMethod::EdgeScaling,
            ..MleOptions::default()
        };
        let ips = mle_fit_iterative(&s, edges, &options).unwrap();
        assert!((closed.matrix() - ips.matrix()).abs().max() <= 1e-7, "{edges}");
    }
}

#[test]
fn loglik_increases_along_nested_models() {
    let s = random_cov(13, 5, 25);
    let models = enumerate_decomposable(5, 10).unwrap();
    let values: Vec<f64> = models.iter().map(|e| max_loglik(&s, e).unwrap()).collect();
    let mut pairs = 0;
    for (i, small) in models.iter().enumerate().step_by(7) {
        for (j, large) in models.iter().enumerate() {
            if i != j && small.is_subset(large) {
                assert!(values[i] <= values[j] + 1e-9, "{small} vs {large}");
                pairs += 1;
            }
        }
    }
    assert!(pairs > 100);
}

#[test]
fn fitted_loglik_beats_any_other_matrix_on_the_support() {
    let s = random_cov(14, 4, 20);
    let cycle = EdgeSet::from_pairs(4, [(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
    let theta = mle_fit(&s, &cycle).unwrap();
    let best = log_likelihood(&s, &theta).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..200 {
        let mut m = theta.matrix().clone();
        for (j, k) in cycle.iter() {
            let d = rng.random_range(-0.05..0.05);
            m[(j, k)] += d;
            m[(k, j)] += d;
        }
        for j in 0..4 {
            m[(j, j)] *= rng.random_range(0.95..1.05);
        }
        if let Ok(other) = ggm_ebic::PrecisionMatrix::from_matrix(m) {
            assert!(log_likelihood(&s, &other).unwrap() <= best + 1e-12);
        }
    }
}

#[test]
fn warm_start_reaches_the_cold_solution() {
    let truth = build_chain_theta(8).unwrap();
    let full = sample_covariance(&sample_mvn(&truth.theta0, 120, 3)).unwrap();
    let part = sample_covariance(&sample_mvn(&truth.theta0, 100, 4)).unwrap();
    let mut cycle = truth.edges.clone();
    cycle.insert(0, 7).unwrap();
    assert!(!is_chordal(&cycle));
    let warm = mle_fit(&full, &cycle).unwrap().covariance();
    let cold = mle_fit(&part, &cycle).unwrap();
    let hot = mle_fit_warm(&part, &cycle, &warm).unwrap();
    assert!((cold.matrix() - hot.matrix()).abs().max() <= 1e-7);
    // an indefinite warm start falls back to a cold start
    let bad = -DMatrix::<f64>::identity(8, 8);
    let fallback = mle_fit_warm(&part, &cycle, &bad).unwrap();
    assert!((cold.matrix() - fallback.matrix()).abs().max() <= 1e-7);
}

#[test]
fn clique_larger_than_sample_is_rejected() {
    let s = random_cov(16, 6, 3);
    let complete = EdgeSet::complete(6);
    assert!(matches!(mle_fit(&s, &complete), Err(Error::NotEstimable(_))));
    let cycle = EdgeSet::from_pairs(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5)]).unwrap();
    let fit = mle_fit(&s, &cycle);
    if let Ok(theta) = fit {
        assert!(likelihood_equation_residual(&s, &theta, &cycle) <= 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn both_iterative_solvers_solve_the_equations(
        seed in any::<u64>(),
        p in 3usize..8,
        density in 0.1f64..0.9,
    ) {
        let s = random_cov(seed, p, 3 * p);
        let edges = random_graph(seed ^ 0x5151, p, density);
        let mut fits = Vec::new();
        for method in [IterativeMethod::EdgeScaling, IterativeMethod::NodeRegression] {
            let options = MleOptions { method, ..MleOptions::default() };
            let theta = mle_fit_iterative(&s, &edges, &options).unwrap();
            prop_assert!(likelihood_equation_residual(&s, &theta, &edges) <= 1e-8);
            fits.push(theta);
        }
        prop_assert!((fits[0].matrix() - fits[1].matrix()).abs().max() <= 1e-6);
    }

    #[test]
    fn fit_is_invariant_to_node_relabelling(seed in any::<u64>(), p in 3usize..7) {
        let s = random_cov(seed, p, 2 * p + 2);
        let edges = random_graph(seed.wrapping_add(1), p, 0.5);
        let perm: Vec<usize> = (0..p).rev().collect();
        let s_perm = SampleCov::new(
            DMatrix::from_fn(p, p, |j, k| s.get(perm[j], perm[k])),
            s.n(),
        ).unwrap();
        let edges_perm = EdgeSet::from_pairs(
            p,
            edges.iter().map(|(j, k)| (p - 1 - j, p - 1 - k)),
        ).unwrap();
        let a = mle_fit(&s, &edges).unwrap();
        let b = mle_fit(&s_perm, &edges_perm).unwrap();
        for j in 0..p {
            for k in 0..p {
                prop_assert!((a.get(perm[j], perm[k]) - b.get(j, k)).abs() <= 1e-7);
            }
        }
    }
}

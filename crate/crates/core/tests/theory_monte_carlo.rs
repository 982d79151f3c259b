#![allow(clippy::excessive_precision)]

use ggm_ebic::chordal::enumerate_decomposable;
use ggm_ebic::harness::dimension_for;
use ggm_ebic::mle::max_loglik;
use ggm_ebic::model::sample_covariance;
use ggm_ebic::selection::gamma0;
use ggm_ebic::synthetic::{build_chain_theta, build_double_chain_theta, sample_mvn};
use ggm_ebic::theory::{
    chain_plus_chord, check_asymptotic_conditions, check_nonasymptotic_assumptions, chisq_lower_tail_bound,
    chisq_lower_tail_frequency, chisq_upper_tail_bound, chisq_upper_tail_frequency, ks_two_sample,
    lemma2_pair_sample, neg_log_beta_quantile_check, neg_log_beta_sample, porteous_constants,
    success_probability_bound, NonAsymptoticParams, MC_SIGMA_SLACK,
};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Beta, ChiSquared, ContinuousCDF};

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn mean_var(x: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    // standard error of the sample variance
    let se = ((m4 - var * var) / n).sqrt();
    (mean, var, se)
}

// Reference values below were computed with 40-digit arithmetic.

#[test]
fn frozen_bound_values() {
    let cases = [
        (chisq_upper_tail_bound(100, 0.5).unwrap(), 0.000_999_208_142_716_141_237_262_8),
        (chisq_lower_tail_bound(100, 0.5).unwrap(), 7.988_056_054_080_438_597e-6),
        (chisq_upper_tail_bound(20, 0.2).unwrap(), 0.528_571_285_897_907_357_06),
        (chisq_lower_tail_bound(500, 0.8).unwrap(), 6.186_532_658_606_865_617e-90),
        (success_probability_bound(100, 1.0, 1.0).unwrap(), 0.997_061_555_293_103_702_518),
        (success_probability_bound(1_000_000, 0.5, 0.5).unwrap(), 0.999_837_990_977_105_965_055),
        (success_probability_bound(40, 0.2, 2.0).unwrap(), 0.964_778_772_486_093_586_95),
        (gamma0(0.5, 1.1).unwrap(), -0.272_727_272_727_272_727_27),
    ];
    for (i, (got, want)) in cases.iter().enumerate() {
        assert!(rel_err(*got, *want) <= 1e-12, "case {i}: {got} vs {want}");
    }
}

#[test]
fn tail_frequencies_respect_bounds_at_documented_points() {
    let up = chisq_upper_tail_frequency(100, 0.5, 1_000_000, 1);
    assert!(up.within(chisq_upper_tail_bound(100, 0.5).unwrap()));
    let lo = chisq_lower_tail_frequency(100, 0.5, 1_000_000, 2);
    assert!(lo.within(chisq_lower_tail_bound(100, 0.5).unwrap()));

    // cross-check the frequencies with exact chi-square probabilities
    let chi = ChiSquared::new(100.0).unwrap();
    assert!((up.frequency - chi.sf(150.0)).abs() <= MC_SIGMA_SLACK * up.std_error.max(1e-4));
    assert!((lo.frequency - chi.cdf(50.0)).abs() <= MC_SIGMA_SLACK * lo.std_error.max(1e-5));
}

#[test]
fn lower_tail_monotone_in_degrees_of_freedom() {
    let draws = 1_000_000;
    let f101 = chisq_lower_tail_frequency(101, 0.5, draws, 31);
    let f100 = chisq_lower_tail_frequency(100, 0.5, draws, 32);
    let se = (f101.std_error.powi(2) + f100.std_error.powi(2)).sqrt();
    assert!(f101.frequency <= f100.frequency + MC_SIGMA_SLACK * se);
}

#[test]
fn pair_identity_degenerate_and_independent_cases() {
    let draws = 100_000;
    let (lhs, rhs) = lemma2_pair_sample(50, 1.0, draws, 3).unwrap();
    for side in [&lhs, &rhs] {
        let (_, var, se) = mean_var(side);
        assert!((var - 100.0).abs() <= 3.0 * se, "var {var} se {se}");
    }
    let (lhs, rhs) = lemma2_pair_sample(50, 0.0, draws, 4).unwrap();
    for side in [&lhs, &rhs] {
        let (mean, var, se) = mean_var(side);
        assert!((var - 50.0).abs() <= 3.0 * se, "var {var} se {se}");
        assert!(mean.abs() <= 4.0 * (50.0 / draws as f64).sqrt());
    }
    let (lhs, rhs) = lemma2_pair_sample(50, 0.5, draws, 5).unwrap();
    assert!(ks_two_sample(&lhs, &rhs).unwrap().passes());
}

#[test]
fn neg_log_beta_mean_matches_digamma_difference() {
    let draws = neg_log_beta_sample(100, 0, 100_000, 6).unwrap();
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let sd = (draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    // ψ(101/2) − ψ(100/2)
    let expected = 0.010_049_997_500_499_787_654_827_52;
    assert!((mean - expected).abs() <= 3.0 * sd / n.sqrt(), "mean {mean}");
}

#[test]
fn neg_log_beta_sampler_matches_exact_law() {
    for (n, c) in [(10usize, 2usize), (100, 0), (200, 3)] {
        let count = 100_000;
        let mut draws = neg_log_beta_sample(n, c, count, 7 + n as u64).unwrap();
        draws.sort_by(f64::total_cmp);
        let beta = Beta::new((n - c) as f64 / 2.0, 0.5).unwrap();
        // one-sample KS at the 1% level
        let mut d = 0.0f64;
        for (i, &x) in draws.iter().enumerate() {
            let f = 1.0 - beta.cdf((-x).exp());
            d = d.max((f - i as f64 / count as f64).abs()).max(((i + 1) as f64 / count as f64 - f).abs());
        }
        assert!(d <= 1.628 / (count as f64).sqrt(), "n={n} c={c} D={d}");
    }
}

#[test]
fn neg_log_beta_quantiles_are_dominated() {
    // at n = 10 the laws separate clearly, so dominance holds outright
    for c in 0..=3 {
        let check = neg_log_beta_quantile_check(10, c, 1_000_000, 40 + c as u64).unwrap();
        assert!(check.max_ratio <= 1.0, "c={c} ratio {}", check.max_ratio);
        assert!(check.within_noise());
    }
    let check = neg_log_beta_quantile_check(100, 0, 1_000_000, 50).unwrap();
    assert!(check.within_noise(), "shortfall {} SE", check.max_deficit_se);
}

#[test]
fn supersets_of_the_chain_rarely_beat_the_penalty() {
    let p = 6;
    let n = 500;
    let gamma = 0.5;
    let truth = build_chain_theta(p).unwrap();
    let supersets: Vec<_> = enumerate_decomposable(p, truth.edges.len() + 2)
        .unwrap()
        .into_iter()
        .filter(|e| e.len() > truth.edges.len() && truth.edges.is_subset(e))
        .collect();
    assert!(!supersets.is_empty());

    let kappa = (p as f64).ln() / (n as f64).ln();
    let g0 = gamma0(gamma, kappa).unwrap();
    let ln_p = (p as f64).ln();
    let mut bounds = Vec::new();
    for e in &supersets {
        let constants = porteous_constants(&truth.edges, e).unwrap();
        let k = constants.len();
        let c_max = *constants.iter().max().unwrap();
        let threshold = 2.0 * (1.0 + g0) * k as f64 * ln_p;
        // l̂(E) − l̂(E0) ≤ (n/2)·Σ χ²₁/(n − c_i − 1) ≤ (n/2)·χ²_k/(n − c_max − 1)
        let chi = ChiSquared::new(k as f64).unwrap();
        bounds.push(chi.sf(2.0 * threshold * (n - c_max - 1) as f64 / n as f64));
    }
    let union: f64 = bounds.iter().sum();

    let draws = 2000;
    let mut seeds = ChaCha8Rng::seed_from_u64(77);
    let mut hits = vec![0usize; supersets.len()];
    let mut any = 0usize;
    for _ in 0..draws {
        let s = sample_covariance(&sample_mvn(&truth.theta0, n, seeds.next_u64())).unwrap();
        let l0 = max_loglik(&s, &truth.edges).unwrap();
        let mut hit_any = false;
        for (i, e) in supersets.iter().enumerate() {
            let extra = (e.len() - truth.edges.len()) as f64;
            if max_loglik(&s, e).unwrap() - l0 >= 2.0 * (1.0 + g0) * extra * ln_p {
                hits[i] += 1;
                hit_any = true;
            }
        }
        any += usize::from(hit_any);
    }
    let within = |count: usize, bound: f64| {
        let f = count as f64 / draws as f64;
        let se = (bound * (1.0 - bound) / draws as f64).sqrt();
        f <= bound + MC_SIGMA_SLACK * se
    };
    for (i, e) in supersets.iter().enumerate() {
        assert!(within(hits[i], bounds[i]), "{e}: {} hits vs bound {}", hits[i], bounds[i]);
    }
    assert!(within(any, union.min(1.0)), "{any} vs union bound {union}");
}

#[test]
fn chain_plus_chord_has_one_constant() {
    let (small, large) = chain_plus_chord(6).unwrap();
    assert_eq!(porteous_constants(&small, &large).unwrap(), vec![2]);
    assert!(chain_plus_chord(2).is_err());
}

#[test]
fn double_chain_sample_size_ratio_matches_hand_formula() {
    let n = 800;
    let p = dimension_for(n, 1.0);
    let truth = build_double_chain_theta(p).unwrap();
    let q = truth.edges.len();
    let report = check_asymptotic_conditions(&truth, n, q, 0.5, 1.0, 10.0).unwrap();
    let eig = truth.theta0.matrix().clone().symmetric_eigen();
    let lambda_max = eig.eigenvalues.max();
    let theta0 = 0.1;
    let expected = (p + 2 * q) as f64 * (p as f64).ln() / n as f64 * (lambda_max / theta0).powi(2);
    assert!(rel_err(report.sample_size_ratio, expected) <= 1e-10);
    assert!(report.decomposable && report.within_q);
}

#[test]
fn sample_size_condition_at_equality_holds_with_zero_slack() {
    let (n, p, q, gamma, c, lambda_max, eps0, eps1) = (1000, 10, 9, 1.0, 0.5, 1.5, 0.1, 0.5);
    let g0 = gamma0(gamma, (p as f64).ln() / (n as f64).ln()).unwrap();
    let rhs = 1.0 / (3200.0 * (1.0 + g0));
    let theta0 = lambda_max * ((p + 2 * q) as f64 * (p as f64).ln() / n as f64 / rhs).sqrt();
    let params = NonAsymptoticParams::new(n, p, q, gamma, c, theta0, lambda_max, eps0, eps1).unwrap();
    let report = check_nonasymptotic_assumptions(&params);
    assert!(report.sample_size_holds);
    assert_eq!(report.sample_size_slack, 0.0);

    let tight = NonAsymptoticParams::new(n, p, q, gamma, c, theta0 * 0.999, lambda_max, eps0, eps1).unwrap();
    assert!(!check_nonasymptotic_assumptions(&tight).sample_size_holds);
}

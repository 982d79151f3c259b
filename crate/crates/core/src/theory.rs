//! Chi-square tail bounds, distributional identities behind the consistency
//! proof, the assumption checkers, and Monte Carlo validation helpers.
//!
//! The tail parameter `λ` of the chi-square bounds is unrelated to the
//! eigenvalue `λmax` of Θ0; the latter only appears as `lambda_max`.

use std::f64::consts::PI;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use statrs::distribution::{ChiSquared as ChiSquaredLaw, ContinuousCDF};

use crate::chordal::{self, chain_edges};
use crate::error::{Error, Result};
use crate::mle::max_loglik;
use crate::model::{sample_covariance, EdgeSet};
use crate::selection;
use crate::synthetic::{build_chain_theta, sample_mvn, TrueModelSpec};

/// Two-sided 1% level used by every Kolmogorov–Smirnov check here.
pub const KS_ALPHA: f64 = 0.01;
/// Monte Carlo frequencies may exceed an analytic bound by this many
/// standard errors before the check fails.
pub const MC_SIGMA_SLACK: f64 = 4.0;

pub const TAIL_DRAWS: usize = 1_000_000;
pub const KS_DRAWS: usize = 100_000;
pub const PORTEOUS_DRAWS: usize = 10_000;

/// `(n, λ)` grid for the tail-bound checks.
pub const TAIL_GRID_N: [usize; 3] = [20, 100, 500];
pub const TAIL_GRID_LAMBDA: [f64; 3] = [0.2, 0.5, 0.8];
/// `(ρ, n)` grid for the bivariate product identity.
pub const PAIR_GRID_RHO: [f64; 4] = [-0.9, 0.0, 0.5, 0.9];
pub const PAIR_GRID_N: [usize; 2] = [10, 100];

fn check_lambda_positive(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "tail parameter must be positive and finite, got {lambda}"
        )));
    }
    Ok(())
}

/// Right-tail bound `P{χ²_n > n(1+λ)} ≤ exp(−(n/2)(λ − log(1+λ))) / (λ√(πn))`.
pub fn chisq_upper_tail_bound(n: usize, lambda: f64) -> Result<f64> {
    check_lambda_positive(lambda)?;
    if n == 0 {
        return Err(Error::InvalidArgument("degrees of freedom must be positive".into()));
    }
    let n = n as f64;
    let log_bound = -(n / 2.0) * (lambda - lambda.ln_1p()) - (lambda * (PI * n).sqrt()).ln();
    Ok(log_bound.exp())
}

/// Smallest `n` for which the left-tail bound applies.
pub fn lower_tail_min_n(lambda: f64) -> f64 {
    4.0 / (lambda * lambda) + 1.0
}

/// Left-tail bound
/// `P{χ²_n < n(1−λ)} ≤ exp(((n−1)/2)(λ + log(1−λ))) / (λ√(π(n−1)))`
/// for `λ ∈ (0, 1)` and `n ≥ 4/λ² + 1`.
pub fn chisq_lower_tail_bound(n: usize, lambda: f64) -> Result<f64> {
    check_lambda_positive(lambda)?;
    if lambda >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "left-tail parameter must lie in (0, 1), got {lambda}"
        )));
    }
    let threshold = lower_tail_min_n(lambda);
    if (n as f64) < threshold {
        return Err(Error::BelowValidityThreshold { n, threshold });
    }
    let m = n as f64 - 1.0;
    let log_bound = (m / 2.0) * (lambda + (-lambda).ln_1p()) - (lambda * (PI * m).sqrt()).ln();
    Ok(log_bound.exp())
}

/// Lower bound on the probability that EBIC picks the true graph among all
/// decomposable graphs with at most `q` edges:
/// `1 − p^{−ε0}/((1−p^{−ε0})·4√π·log p) − p^{−ε1}/√(π·log p)`.
pub fn success_probability_bound(p: usize, eps0: f64, eps1: f64) -> Result<f64> {
    if p < 2 {
        return Err(Error::InvalidArgument(format!("need p >= 2, got {p}")));
    }
    if !(eps0 > 0.0 && eps1 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilons must be positive, got {eps0} and {eps1}"
        )));
    }
    let log_p = (p as f64).ln();
    // p^{−ε}/(1 − p^{−ε}) = 1/(p^ε − 1)
    let supersets = 1.0 / ((eps0 * log_p).exp_m1() * 4.0 * PI.sqrt() * log_p);
    let others = (-eps1 * log_p).exp() / (PI * log_p).sqrt();
    Ok(1.0 - supersets - others)
}

/// Draws of `Σ_i (X_i Y_i − ρ)` over `n` standard bivariate normal pairs with
/// correlation `ρ` (first vector), and of
/// `((1+ρ)/2)(A−n) − ((1−ρ)/2)(B−n)` with independent `A, B ~ χ²_n`
/// (second vector). The two sides use independent random streams.
pub fn lemma2_pair_sample(n: usize, rho: f64, count: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::InvalidArgument(format!("correlation must lie in [-1, 1], got {rho}")));
    }
    if n == 0 || count == 0 {
        return Err(Error::InvalidArgument("n and count must be positive".into()));
    }
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    let mut pair_rng = ChaCha8Rng::seed_from_u64(seeds.next_u64());
    let mut chi_rng = ChaCha8Rng::seed_from_u64(seeds.next_u64());

    let residual = (1.0 - rho * rho).max(0.0).sqrt();
    let lhs = (0..count)
        .map(|_| {
            (0..n)
                .map(|_| {
                    let z1: f64 = pair_rng.sample(StandardNormal);
                    let z2: f64 = pair_rng.sample(StandardNormal);
                    z1 * (rho * z1 + residual * z2) - rho
                })
                .sum()
        })
        .collect();

    let chi = ChiSquared::new(n as f64).expect("positive degrees of freedom");
    let nf = n as f64;
    let rhs = (0..count)
        .map(|_| {
            let a: f64 = chi.sample(&mut chi_rng);
            let b: f64 = chi.sample(&mut chi_rng);
            (1.0 + rho) / 2.0 * (a - nf) - (1.0 - rho) / 2.0 * (b - nf)
        })
        .collect();
    Ok((lhs, rhs))
}

fn beta_shape(n: usize, c: usize) -> Result<f64> {
    if n < c + 1 {
        return Err(Error::InvalidArgument(format!(
            "clique constant {c} too large for n = {n}"
        )));
    }
    Ok((n - c) as f64 / 2.0)
}

/// `−log B` for `B ~ Beta(a, 1/2)`, built from independent Gamma variates as
/// `log(1 + G_½/G_a)`.
struct NegLogBeta {
    major: Gamma<f64>,
    minor: Gamma<f64>,
}

impl NegLogBeta {
    fn new(a: f64) -> Self {
        Self {
            major: Gamma::new(a, 1.0).expect("positive shape"),
            minor: Gamma::new(0.5, 1.0).expect("positive shape"),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let g_a = self.major.sample(rng);
        let g_half = self.minor.sample(rng);
        (g_half / g_a).ln_1p()
    }
}

/// Draws of `−log B` with `B ~ Beta((n−c)/2, 1/2)`.
pub fn neg_log_beta_sample(n: usize, c: usize, count: usize, seed: u64) -> Result<Vec<f64>> {
    let law = NegLogBeta::new(beta_shape(n, c)?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count).map(|_| law.sample(&mut rng)).collect())
}

/// Draws of `−(n/2)·log Π_i B_i` with independent
/// `B_i ~ Beta((n−c_i)/2, 1/2)`: the exact law of the maximized
/// log-likelihood gain between nested decomposable graphs.
pub fn beta_product_lr_sample(n: usize, clique_constants: &[usize], count: usize, seed: u64) -> Result<Vec<f64>> {
    let laws: Vec<NegLogBeta> = clique_constants
        .iter()
        .map(|&c| beta_shape(n, c).map(NegLogBeta::new))
        .collect::<Result<_>>()?;
    let half_n = n as f64 / 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| half_n * laws.iter().map(|law| law.sample(&mut rng)).sum::<f64>())
        .collect())
}

/// Clique constants `c_i` for nested decomposable graphs `small ⊂ large`.
///
/// Edges of `large \ small` are added one at a time so every intermediate
/// graph stays chordal. Adding `{a, b}` to a chordal graph keeps it chordal
/// only if the common neighbours of `a` and `b` form a clique, and the step
/// then contributes `c = |common neighbours| + 1`, one less than the size of
/// the new clique containing the edge.
pub fn porteous_constants(small: &EdgeSet, large: &EdgeSet) -> Result<Vec<usize>> {
    if small.p() != large.p() {
        return Err(Error::DimensionMismatch {
            expected: small.p(),
            found: large.p(),
        });
    }
    if !small.is_subset(large) {
        return Err(Error::InvalidArgument("graphs are not nested".into()));
    }
    if !chordal::is_chordal(small) || !chordal::is_chordal(large) {
        return Err(Error::NotDecomposable);
    }
    let mut current = small.clone();
    let mut remaining = large.difference(small);
    let mut constants = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let position = remaining
            .iter()
            .position(|&(a, b)| {
                let mut next = current.clone();
                next.insert(a, b).expect("edge within range");
                chordal::is_chordal(&next)
            })
            .ok_or(Error::NotDecomposable)?;
        let (a, b) = remaining.remove(position);
        let neighbors = current.neighbors();
        let common = neighbors[a].iter().filter(|v| neighbors[b].contains(v)).count();
        constants.push(common + 1);
        current.insert(a, b)?;
    }
    Ok(constants)
}

/// Draws of `l̂(large) − l̂(small)` on independent data sets of size `n` from
/// `truth`, with covariance estimated without centering.
pub fn empirical_lr_sample(
    truth: &TrueModelSpec,
    small: &EdgeSet,
    large: &EdgeSet,
    n: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<u64> = (0..count).map(|_| seeds.next_u64()).collect();
    seeds
        .par_iter()
        .map(|&s| {
            let data = sample_mvn(&truth.theta0, n, s);
            let cov = sample_covariance(&data)?;
            Ok(max_loglik(&cov, large)? - max_loglik(&cov, small)?)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsOutcome {
    pub statistic: f64,
    pub critical_value: f64,
}

impl KsOutcome {
    pub fn passes(&self) -> bool {
        self.statistic <= self.critical_value
    }
}

/// Asymptotic two-sample critical value `sqrt(−ln(α/2)/2)·sqrt((n+m)/(nm))`.
pub fn ks_critical_value(n: usize, m: usize, alpha: f64) -> f64 {
    let (n, m) = (n as f64, m as f64);
    (-(alpha / 2.0).ln() / 2.0).sqrt() * ((n + m) / (n * m)).sqrt()
}

/// Two-sample Kolmogorov–Smirnov test at level [`KS_ALPHA`].
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsOutcome> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("KS test needs two non-empty samples".into()));
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut statistic = 0.0f64;
    while i < x.len() && j < y.len() {
        let v = if x[i] <= y[j] { x[i] } else { y[j] };
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        statistic = statistic.max((i as f64 / nx - j as f64 / ny).abs());
    }
    Ok(KsOutcome {
        statistic,
        critical_value: ks_critical_value(x.len(), y.len(), KS_ALPHA),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailFrequency {
    pub frequency: f64,
    pub std_error: f64,
}

impl TailFrequency {
    fn from_hits(hits: usize, draws: usize) -> Self {
        let f = hits as f64 / draws as f64;
        Self {
            frequency: f,
            std_error: (f * (1.0 - f) / draws as f64).sqrt(),
        }
    }

    /// True when the frequency does not exceed `bound` by more than
    /// [`MC_SIGMA_SLACK`] standard errors.
    pub fn within(&self, bound: f64) -> bool {
        self.frequency <= bound + MC_SIGMA_SLACK * self.std_error
    }
}

fn chisq_tail_frequency(n: usize, draws: usize, seed: u64, hit: impl Fn(f64) -> bool) -> TailFrequency {
    let chi = ChiSquared::new(n as f64).expect("positive degrees of freedom");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hits = (0..draws).filter(|_| hit(chi.sample(&mut rng))).count();
    TailFrequency::from_hits(hits, draws)
}

/// Monte Carlo estimate of `P{χ²_n > n(1+λ)}`.
pub fn chisq_upper_tail_frequency(n: usize, lambda: f64, draws: usize, seed: u64) -> TailFrequency {
    let cut = n as f64 * (1.0 + lambda);
    chisq_tail_frequency(n, draws, seed, |x| x > cut)
}

/// Monte Carlo estimate of `P{χ²_n < n(1−λ)}`.
pub fn chisq_lower_tail_frequency(n: usize, lambda: f64, draws: usize, seed: u64) -> TailFrequency {
    let cut = n as f64 * (1.0 - lambda);
    chisq_tail_frequency(n, draws, seed, |x| x < cut)
}

/// Comparison of simulated `−log B` draws with the dominating law
/// `χ²₁/(n−c−1)` at the percentiles `u = 1%, …, 99%`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileDominance {
    /// Largest ratio of the empirical `−log B` quantile to the reference
    /// quantile; dominance predicts a value at most one.
    pub max_ratio: f64,
    /// Largest shortfall `u − F̂(x_u)` in binomial standard errors, where
    /// `x_u` is the reference quantile and `F̂` the empirical CDF.
    pub max_deficit_se: f64,
}

impl QuantileDominance {
    /// Dominance holds up to [`MC_SIGMA_SLACK`] standard errors everywhere.
    pub fn within_noise(&self) -> bool {
        self.max_deficit_se <= MC_SIGMA_SLACK
    }
}

pub fn neg_log_beta_quantile_check(n: usize, c: usize, draws: usize, seed: u64) -> Result<QuantileDominance> {
    if n < c + 2 || draws == 0 {
        return Err(Error::InvalidArgument(format!(
            "need n >= c + 2 and draws > 0, got n = {n}, c = {c}, draws = {draws}"
        )));
    }
    let mut sample = neg_log_beta_sample(n, c, draws, seed)?;
    sample.sort_by(f64::total_cmp);
    let chi = ChiSquaredLaw::new(1.0).expect("one degree of freedom");
    let scale = (n - c - 1) as f64;
    let total = draws as f64;
    let mut out = QuantileDominance {
        max_ratio: 0.0,
        max_deficit_se: f64::NEG_INFINITY,
    };
    for k in 1..=99 {
        let u = k as f64 / 100.0;
        let reference = chi.inverse_cdf(u) / scale;
        let idx = ((u * total).ceil() as usize).clamp(1, draws) - 1;
        out.max_ratio = out.max_ratio.max(sample[idx] / reference);
        let below = sample.partition_point(|&v| v <= reference) as f64 / total;
        let se = (u * (1.0 - u) / total).sqrt();
        out.max_deficit_se = out.max_deficit_se.max((u - below) / se);
    }
    Ok(out)
}

/// Per-line status of the asymptotic conditions at one point `(n, p, q)`.
///
/// The sample-size line is an `o(n)` statement and is reported only as the
/// ratio `(p+2q)·log p·λ²max/θ0² / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticReport {
    pub decomposable: bool,
    pub num_true_edges: usize,
    pub within_q: bool,
    pub variance_eigen_product: f64,
    pub product_bounded: bool,
    /// `log p / log n`, to compare with the assumed growth exponent.
    pub observed_kappa: f64,
    pub gamma0: f64,
    pub gamma0_positive: bool,
    pub sample_size_ratio: f64,
}

pub fn check_asymptotic_conditions(
    truth: &TrueModelSpec,
    n: usize,
    q: usize,
    gamma: f64,
    kappa: f64,
    c: f64,
) -> Result<AsymptoticReport> {
    let p = truth.p();
    let gamma0 = selection::gamma0(gamma, kappa)?;
    let product = truth.stats.variance_eigen_product();
    let ln_p = (p as f64).ln();
    Ok(AsymptoticReport {
        decomposable: chordal::is_chordal(&truth.edges),
        num_true_edges: truth.edges.len(),
        within_q: truth.edges.len() <= q,
        variance_eigen_product: product,
        product_bounded: product <= c,
        observed_kappa: ln_p / (n as f64).ln(),
        gamma0,
        gamma0_positive: gamma0 > 0.0,
        sample_size_ratio: sample_size_lhs(n, p, q, truth.max_eigenvalue(), truth.min_signal()),
    })
}

/// `(p+2q)·log p/n · λ²max/θ0²`.
fn sample_size_lhs(n: usize, p: usize, q: usize, lambda_max: f64, theta0: f64) -> f64 {
    (p + 2 * q) as f64 * (p as f64).ln() / n as f64 * (lambda_max / theta0).powi(2)
}

/// Quantities entering the finite-sample assumptions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonAsymptoticParams {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub gamma: f64,
    /// `log p / log n`.
    pub kappa: f64,
    pub gamma0: f64,
    /// Upper bound on `σ²max·λmax`.
    pub c: f64,
    pub theta0: f64,
    pub lambda_max: f64,
    pub eps0: f64,
    pub eps1: f64,
}

impl NonAsymptoticParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n: usize,
        p: usize,
        q: usize,
        gamma: f64,
        c: f64,
        theta0: f64,
        lambda_max: f64,
        eps0: f64,
        eps1: f64,
    ) -> Result<Self> {
        if n < 2 || p < 2 {
            return Err(Error::InvalidArgument(format!("need n, p >= 2, got n = {n}, p = {p}")));
        }
        if !(theta0 > 0.0 && lambda_max > 0.0 && eps0 > 0.0 && eps1 > 0.0) {
            return Err(Error::InvalidArgument(
                "theta0, lambda_max and the epsilons must be positive".into(),
            ));
        }
        let kappa = (p as f64).ln() / (n as f64).ln();
        Ok(Self {
            n,
            p,
            q,
            gamma,
            kappa,
            gamma0: selection::gamma0(gamma, kappa)?,
            c,
            theta0,
            lambda_max,
            eps0,
            eps1,
        })
    }

    /// Takes `θ0` and `λmax` from `truth` and sets `C = σ²max·λmax`.
    pub fn from_model(truth: &TrueModelSpec, n: usize, q: usize, gamma: f64, eps0: f64, eps1: f64) -> Result<Self> {
        Self::new(
            n,
            truth.p(),
            q,
            gamma,
            truth.stats.variance_eigen_product(),
            truth.min_signal(),
            truth.max_eigenvalue(),
            eps0,
            eps1,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonAsymptoticReport {
    pub sample_size_holds: bool,
    pub sample_size_lhs: f64,
    pub sample_size_rhs: f64,
    /// `rhs − lhs`; zero when the two agree to rounding.
    pub sample_size_slack: f64,
    pub penalty_holds: bool,
    /// Left side of the penalty condition, absent when `γ0 ≤ −1`.
    pub penalty_lhs: Option<f64>,
    /// `lhs − ε0`.
    pub penalty_slack: Option<f64>,
    pub penalty_reason: Option<String>,
}

/// Relative rounding allowance when comparing the two sides of a condition.
const ROUNDING: f64 = 8.0 * f64::EPSILON;

/// Evaluates the sample-size condition
/// `((p+2q)·log p/n)·(λ²max/θ0²) ≤ 1/(3200·max{1+γ0, (1+ε1/2)·C²})`
/// and the penalty condition
/// `2(√(1+γ0) − 1) − (log log p + log(4√(1+γ0)) + 1)/(2·log p) ≥ ε0`.
pub fn check_nonasymptotic_assumptions(params: &NonAsymptoticParams) -> NonAsymptoticReport {
    let lhs = sample_size_lhs(params.n, params.p, params.q, params.lambda_max, params.theta0);
    let rhs = 1.0
        / (3200.0 * (1.0 + params.gamma0).max((1.0 + params.eps1 / 2.0) * params.c * params.c));
    let mut slack = rhs - lhs;
    if slack.abs() <= ROUNDING * lhs.abs().max(rhs.abs()) {
        slack = 0.0;
    }

    let ln_p = (params.p as f64).ln();
    let (penalty_lhs, penalty_reason) = if params.gamma0 <= -1.0 {
        (None, Some(format!("gamma0 = {} makes sqrt(1 + gamma0) undefined", params.gamma0)))
    } else {
        let root = (1.0 + params.gamma0).sqrt();
        let value = 2.0 * (root - 1.0) - (ln_p.ln() + (4.0 * root).ln() + 1.0) / (2.0 * ln_p);
        let reason = (params.gamma0 <= 0.0)
            .then(|| format!("gamma0 = {} is not positive", params.gamma0));
        (Some(value), reason)
    };
    let penalty_slack = penalty_lhs.map(|v| v - params.eps0);
    let penalty_holds = penalty_reason.is_none() && penalty_slack.is_some_and(|s| s >= 0.0);
    NonAsymptoticReport {
        sample_size_holds: slack >= 0.0,
        sample_size_lhs: lhs,
        sample_size_rhs: rhs,
        sample_size_slack: slack,
        penalty_holds,
        penalty_lhs,
        penalty_slack,
        penalty_reason,
    }
}

/// One line of a validation table.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheckRow {
    pub check: &'static str,
    pub parameters: String,
    pub analytic: f64,
    pub estimate: f64,
    pub std_error: Option<f64>,
    pub pass: bool,
}

fn derive_seed(seed: u64, tag: u64) -> u64 {
    ChaCha8Rng::seed_from_u64(seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15)).next_u64()
}

/// Right-tail bound vs Monte Carlo frequency over the `(n, λ)` grid.
pub fn csb_rows(draws: usize, seed: u64) -> Result<Vec<BoundCheckRow>> {
    let mut rows = Vec::new();
    for (i, &n) in TAIL_GRID_N.iter().enumerate() {
        for (j, &lambda) in TAIL_GRID_LAMBDA.iter().enumerate() {
            let bound = chisq_upper_tail_bound(n, lambda)?;
            let mc = chisq_upper_tail_frequency(n, lambda, draws, derive_seed(seed, (i * 3 + j) as u64));
            rows.push(BoundCheckRow {
                check: "csb",
                parameters: format!("n={n} lambda={lambda}"),
                analytic: bound,
                estimate: mc.frequency,
                std_error: Some(mc.std_error),
                pass: mc.within(bound),
            });
        }
    }
    Ok(rows)
}

/// Left-tail bound vs Monte Carlo frequency over the grid points that meet
/// the sample-size precondition.
pub fn lemma1_rows(draws: usize, seed: u64) -> Result<Vec<BoundCheckRow>> {
    let mut rows = Vec::new();
    for (i, &n) in TAIL_GRID_N.iter().enumerate() {
        for (j, &lambda) in TAIL_GRID_LAMBDA.iter().enumerate() {
            if (n as f64) < lower_tail_min_n(lambda) {
                continue;
            }
            let bound = chisq_lower_tail_bound(n, lambda)?;
            let mc = chisq_lower_tail_frequency(n, lambda, draws, derive_seed(seed, 100 + (i * 3 + j) as u64));
            rows.push(BoundCheckRow {
                check: "lemma1",
                parameters: format!("n={n} lambda={lambda}"),
                analytic: bound,
                estimate: mc.frequency,
                std_error: Some(mc.std_error),
                pass: mc.within(bound),
            });
        }
    }
    Ok(rows)
}

/// Two-sample KS between both sides of the bivariate product identity.
pub fn lemma2_rows(count: usize, seed: u64) -> Result<Vec<BoundCheckRow>> {
    let mut rows = Vec::new();
    for (i, &rho) in PAIR_GRID_RHO.iter().enumerate() {
        for (j, &n) in PAIR_GRID_N.iter().enumerate() {
            let (lhs, rhs) = lemma2_pair_sample(n, rho, count, derive_seed(seed, 200 + (i * 2 + j) as u64))?;
            let ks = ks_two_sample(&lhs, &rhs)?;
            rows.push(BoundCheckRow {
                check: "lemma2",
                parameters: format!("n={n} rho={rho}"),
                analytic: ks.critical_value,
                estimate: ks.statistic,
                std_error: None,
                pass: ks.passes(),
            });
        }
    }
    Ok(rows)
}

/// The chain on `p` nodes and the same chain plus the chord `{1, 3}`.
pub fn chain_plus_chord(p: usize) -> Result<(EdgeSet, EdgeSet)> {
    let small = chain_edges(p)?;
    if p < 3 {
        return Err(Error::InvalidArgument(format!("need p >= 3, got {p}")));
    }
    let mut large = small.clone();
    large.insert(0, 2)?;
    Ok((small, large))
}

/// KS between simulated likelihood-ratio gains for chain ⊂ chain + chord and
/// the Beta-product law, plus quantile dominance rows at `n = 10` and at `n`.
/// A dominance row reports the worst shortfall in standard errors.
pub fn porteous_rows(p: usize, n: usize, count: usize, seed: u64) -> Result<Vec<BoundCheckRow>> {
    let truth = build_chain_theta(p)?;
    let (small, large) = chain_plus_chord(p)?;
    let constants = porteous_constants(&small, &large)?;
    let empirical = empirical_lr_sample(&truth, &small, &large, n, count, derive_seed(seed, 300))?;
    let theoretical = beta_product_lr_sample(n, &constants, count, derive_seed(seed, 301))?;
    let ks = ks_two_sample(&empirical, &theoretical)?;
    let mut rows = vec![BoundCheckRow {
        check: "porteous",
        parameters: format!("p={p} n={n} c={constants:?}"),
        analytic: ks.critical_value,
        estimate: ks.statistic,
        std_error: None,
        pass: ks.passes(),
    }];
    for (i, &m) in [10usize, n].iter().enumerate() {
        for &c in &constants {
            let check = neg_log_beta_quantile_check(m, c, TAIL_DRAWS, derive_seed(seed, 310 + i as u64))?;
            rows.push(BoundCheckRow {
                check: "porteous-quantiles",
                parameters: format!("n={m} c={c} max_quantile_ratio={:.4}", check.max_ratio),
                analytic: MC_SIGMA_SLACK,
                estimate: check.max_deficit_se,
                std_error: None,
                pass: check.within_noise(),
            });
        }
    }
    Ok(rows)
}

/// Finite-sample assumptions for the chain model over a grid of sample sizes.
pub fn assumption_rows(gamma: f64, eps0: f64, eps1: f64) -> Result<Vec<BoundCheckRow>> {
    let mut rows = Vec::new();
    for n in [100usize, 200, 400, 800, 1_000_000] {
        let p = ((10.0 * n as f64 / 100.0).round() as usize).min(1000);
        let truth = build_chain_theta(p)?;
        let params = NonAsymptoticParams::from_model(&truth, n, p - 1, gamma, eps0, eps1)?;
        let report = check_nonasymptotic_assumptions(&params);
        rows.push(BoundCheckRow {
            check: "assumption-sample-size",
            parameters: format!("chain n={n} p={p} q={} gamma={gamma}", p - 1),
            analytic: report.sample_size_rhs,
            estimate: report.sample_size_lhs,
            std_error: None,
            pass: report.sample_size_holds,
        });
        rows.push(BoundCheckRow {
            check: "assumption-penalty",
            parameters: format!("chain n={n} p={p} gamma0={:.4} eps0={eps0}", params.gamma0),
            analytic: eps0,
            estimate: report.penalty_lhs.unwrap_or(f64::NAN),
            std_error: None,
            pass: report.penalty_holds,
        });
    }
    Ok(rows)
}

//! GLM fitting and log marginal likelihoods.
//!
//! Two priors on the regression coefficients are supported:
//!
//! * Jeffreys: the Laplace approximation reduces to the BIC form
//!   `loglik - |M|/2 log n`.
//! * Robust g-prior: a mixture over `g` with a truncated compound
//!   confluent hypergeometric mixing density, integrated numerically over
//!   `u = 1/(1+g)`. The conditional Bayes factor at fixed `g` is exact for
//!   Gaussian responses and Laplace-approximated for logistic ones.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Dataset, Family};
use crate::linalg::{dot, least_squares, Cholesky, Matrix};
use crate::model_space::{ModelIndex, Population};
use crate::num::{log_sum_exp, Real};

/// Convergence threshold on the largest score component.
pub const SCORE_TOL: f64 = 1e-8;
/// Iteration cap for IRLS.
pub const MAX_IRLS_ITER: usize = 50;
/// Linear predictors are clamped to `[-ETA_CLAMP, ETA_CLAMP]`.
pub const ETA_CLAMP: f64 = 30.0;
/// Largest Newton step component accepted at convergence.
pub const STEP_TOL: f64 = 1e-6;
/// Iterations stop once an accepted step gains less log-likelihood than this;
/// a fit that stops this way without meeting the other tolerances is reported
/// as not converged.
pub const STALL_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LikelihoodError {
    #[error("design has {rows} rows but the response has {n} entries")]
    LengthMismatch { rows: usize, n: usize },
    #[error("design matrix has no columns")]
    EmptyDesign,
    #[error("model index has length {got}, population has {d} trees")]
    ModelLength { got: usize, d: usize },
    #[error("successes exceed trials in group {0}")]
    BadGroup(usize),
    #[error("unknown prior {0:?}, expected jeffreys or robust_g")]
    UnknownPrior(String),
    #[error("robust g-prior needs at least 16 quadrature nodes, got {0}")]
    TooFewNodes(usize),
    #[error(transparent)]
    Tree(#[from] crate::logic_tree::TreeError),
}

/// Prior on the regression coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorKind {
    Jeffreys,
    RobustG,
}

impl fmt::Display for PriorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PriorKind::Jeffreys => "jeffreys",
            PriorKind::RobustG => "robust_g",
        })
    }
}

impl FromStr for PriorKind {
    type Err = LikelihoodError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "jeffreys" => Ok(PriorKind::Jeffreys),
            "robust_g" | "robust" => Ok(PriorKind::RobustG),
            _ => Err(LikelihoodError::UnknownPrior(s.to_string())),
        }
    }
}

/// Result of a maximum-likelihood GLM fit.
#[derive(Debug, Clone, PartialEq)]
pub struct GlmFit<T> {
    pub family: Family,
    /// Intercept first; zero for columns dropped as linearly dependent.
    pub coefficients: Vec<T>,
    /// Maximized log-likelihood. Logistic fits use the Bernoulli form, so
    /// grouped and ungrouped data give the same value.
    pub loglik: T,
    /// `RSS / n` for Gaussian fits, 1 for logistic fits.
    pub dispersion: T,
    /// Residual sum of squares (Gaussian) or zero.
    pub rss: T,
    /// `β̂ᵀ S β̂ / φ̂` with `S` the Fisher information of the slopes after
    /// profiling out the intercept.
    pub wald: T,
    pub iterations: usize,
    pub converged: bool,
    pub rank: usize,
    pub n_obs: usize,
}

impl<T: Real> GlmFit<T> {
    /// Number of non-intercept columns, `|M|`.
    pub fn model_size(&self) -> usize {
        self.coefficients.len().saturating_sub(1)
    }

    pub fn full_rank(&self) -> bool {
        self.rank == self.coefficients.len()
    }
}

/// Intercept column followed by one column per included tree.
pub fn design_matrix<T: Real>(
    model: &ModelIndex,
    pop: &Population,
    data: &Dataset<T>,
) -> Result<Matrix<T>, LikelihoodError> {
    if model.len() != pop.d() {
        return Err(LikelihoodError::ModelLength {
            got: model.len(),
            d: pop.d(),
        });
    }
    let cols: Vec<_> = model
        .included()
        .map(|j| pop.tree(j).evaluate_columns(data.columns()))
        .collect::<Result<_, _>>()?;
    Ok(Matrix::from_fn(data.n(), cols.len() + 1, |i, j| {
        if j == 0 || cols[j - 1].get(i) {
            T::one()
        } else {
            T::zero()
        }
    }))
}

/// Columns (other than the intercept) that are constant over all rows and
/// therefore collinear with the intercept.
pub fn degenerate_columns<T: Real>(design: &Matrix<T>) -> Vec<usize> {
    (1..design.cols())
        .filter(|&j| {
            let first = design.get(0, j);
            (1..design.rows()).all(|i| design.get(i, j) == first)
        })
        .collect()
}

pub fn gaussian_loglik<T: Real>(n: usize, rss: T) -> T {
    let n = T::from_usize_lossy(n);
    -(n / T::lit(2.0)) * ((T::lit(2.0) * T::PI() * rss / n).ln() + T::one())
}

pub fn fit_glm<T: Real>(design: &Matrix<T>, y: &[T], family: Family) -> Result<GlmFit<T>, LikelihoodError> {
    if design.rows() != y.len() {
        return Err(LikelihoodError::LengthMismatch {
            rows: design.rows(),
            n: y.len(),
        });
    }
    if design.cols() == 0 {
        return Err(LikelihoodError::EmptyDesign);
    }
    match family {
        Family::Gaussian => Ok(fit_gaussian(design, y)),
        Family::Binomial => fit_binomial_grouped(design, &vec![T::one(); y.len()], y),
    }
}

fn fit_gaussian<T: Real>(design: &Matrix<T>, y: &[T]) -> GlmFit<T> {
    let n = y.len();
    let ls = least_squares(design, y);
    let mean = y.iter().copied().sum::<T>() / T::from_usize_lossy(n);
    let tss = y.iter().fold(T::zero(), |acc, &v| acc + (v - mean) * (v - mean));
    let dispersion = ls.rss / T::from_usize_lossy(n);
    GlmFit {
        family: Family::Gaussian,
        coefficients: ls.coefficients,
        loglik: gaussian_loglik(n, ls.rss),
        dispersion,
        rss: ls.rss,
        wald: (tss - ls.rss) / dispersion,
        iterations: 1,
        converged: true,
        rank: ls.rank,
        n_obs: n,
    }
}

#[inline]
fn log1p_exp<T: Real>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

fn clamped_eta<T: Real>(design: &Matrix<T>, beta: &[T]) -> Vec<T> {
    let c = T::lit(ETA_CLAMP);
    design.mul_vec(beta).into_iter().map(|e| e.max(-c).min(c)).collect()
}

/// Bernoulli-form log-likelihood `Σ s η - t log(1 + e^η)` of grouped
/// logistic data.
pub fn binomial_loglik<T: Real>(design: &Matrix<T>, trials: &[T], successes: &[T], beta: &[T]) -> T {
    clamped_eta(design, beta)
        .into_iter()
        .zip(trials.iter().zip(successes))
        .fold(T::zero(), |acc, (eta, (&t, &s))| acc + s * eta - t * log1p_exp(eta))
}

/// Gradient of [`binomial_loglik`] with respect to the coefficients.
pub fn binomial_score<T: Real>(design: &Matrix<T>, trials: &[T], successes: &[T], beta: &[T]) -> Vec<T> {
    let resid: Vec<T> = clamped_eta(design, beta)
        .into_iter()
        .zip(trials.iter().zip(successes))
        .map(|(eta, (&t, &s))| s - t * sigmoid(eta))
        .collect();
    design.transpose_mul_vec(&resid)
}

fn binomial_information<T: Real>(design: &Matrix<T>, trials: &[T], beta: &[T]) -> Matrix<T> {
    let w: Vec<T> = clamped_eta(design, beta)
        .into_iter()
        .zip(trials)
        .map(|(eta, &t)| {
            let p = sigmoid(eta);
            t * p * (T::one() - p)
        })
        .collect();
    design.weighted_gram(Some(&w))
}

/// Logistic regression by Newton-Raphson (IRLS) on grouped rows: row `i` of
/// `design` stands for `trials[i]` observations of which `successes[i]` are 1.
pub fn fit_binomial_grouped<T: Real>(
    design: &Matrix<T>,
    trials: &[T],
    successes: &[T],
) -> Result<GlmFit<T>, LikelihoodError> {
    if design.rows() != trials.len() || trials.len() != successes.len() {
        return Err(LikelihoodError::LengthMismatch {
            rows: design.rows(),
            n: trials.len(),
        });
    }
    if design.cols() == 0 {
        return Err(LikelihoodError::EmptyDesign);
    }
    if let Some(g) = (0..trials.len()).find(|&g| successes[g] > trials[g] || successes[g] < T::zero()) {
        return Err(LikelihoodError::BadGroup(g));
    }
    let p = design.cols();
    let independent = least_squares(design, &vec![T::zero(); design.rows()]).independent;
    let rank = independent.len();
    let reduced;
    let x = if rank < p {
        reduced = design.select_columns(&independent);
        &reduced
    } else {
        design
    };

    let total_t = trials.iter().copied().sum::<T>();
    let total_s = successes.iter().copied().sum::<T>();
    let n_obs = total_t.to_f64_lossy().round() as usize;
    let mut beta = vec![T::zero(); x.cols()];
    if independent.first() == Some(&0) {
        let eps = T::lit(1e-6);
        let ybar = (total_s / total_t).max(eps).min(T::one() - eps);
        beta[0] = (ybar / (T::one() - ybar)).ln();
    }

    let tol = T::lit(SCORE_TOL);
    let step_tol = T::lit(STEP_TOL);
    let mut loglik = binomial_loglik(x, trials, successes, &beta);
    let mut converged = false;
    let mut iterations = 0;
    let mut stalled = false;
    loop {
        let score = binomial_score(x, trials, successes, &beta);
        let info = binomial_information(x, trials, &beta);
        let Ok(ch) = Cholesky::new(&info) else {
            break;
        };
        let step = ch.solve(&score);
        // Under separation the score vanishes while the Newton step does not.
        if score.iter().all(|g| g.abs() < tol) && step.iter().all(|s| s.abs() < step_tol) {
            converged = true;
            break;
        }
        if stalled || iterations == MAX_IRLS_ITER {
            break;
        }
        iterations += 1;
        let mut scale = T::one();
        let mut improved = false;
        for _ in 0..30 {
            let cand: Vec<T> = beta.iter().zip(&step).map(|(&b, &s)| b + scale * s).collect();
            let ll = binomial_loglik(x, trials, successes, &cand);
            if ll >= loglik - T::lit(1e-12) * loglik.abs().max(T::one()) {
                improved = ll - loglik > T::lit(STALL_TOL);
                beta = cand;
                loglik = ll;
                break;
            }
            scale = scale / T::lit(2.0);
        }
        stalled = !improved;
    }

    let info = binomial_information(x, trials, &beta);
    let v = info.mul_vec(&beta);
    let wald = if independent.first() == Some(&0) {
        dot(&beta, &v) - v[0] * v[0] / info.get(0, 0)
    } else {
        dot(&beta, &v)
    };

    let mut coefficients = vec![T::zero(); p];
    for (pos, &j) in independent.iter().enumerate() {
        coefficients[j] = beta[pos];
    }
    Ok(GlmFit {
        family: Family::Binomial,
        coefficients,
        loglik,
        dispersion: T::one(),
        rss: T::zero(),
        wald,
        iterations,
        converged,
        rank,
        n_obs,
    })
}

/// Jeffreys-prior log marginal likelihood `loglik - |M|/2 log n`, which is
/// `-BIC/2`. Non-finite or rank-deficient fits score `-inf`.
pub fn log_marglik_jeffreys<T: Real>(fit: &GlmFit<T>, n: usize, model_size: usize) -> T {
    if !fit.loglik.is_finite() || !fit.full_rank() {
        return T::neg_infinity();
    }
    fit.loglik - T::from_usize_lossy(model_size) / T::lit(2.0) * T::from_usize_lossy(n).ln()
}

/// Mixing density parameters of the robust g-prior and the quadrature rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustGConfig {
    pub a: f64,
    pub b: f64,
    pub r: f64,
    pub s: f64,
    pub kappa: f64,
    /// Gauss-Legendre node count.
    pub nodes: usize,
    /// Lower truncation of `u`.
    pub eps: f64,
}

impl Default for RobustGConfig {
    fn default() -> Self {
        Self {
            a: 1.0,
            b: 2.0,
            r: 1.5,
            s: 0.0,
            kappa: 1.0,
            nodes: 64,
            eps: 1e-10,
        }
    }
}

impl RobustGConfig {
    pub fn with_nodes(nodes: usize) -> Result<Self, LikelihoodError> {
        if nodes < 16 {
            return Err(LikelihoodError::TooFewNodes(nodes));
        }
        Ok(Self {
            nodes,
            ..Self::default()
        })
    }

    /// `v = (n + 1) / (|M| + 1)`.
    pub fn v(n: usize, model_size: usize) -> f64 {
        (n as f64 + 1.0) / (model_size as f64 + 1.0)
    }
}

/// Gauss-Legendre nodes and weights on `(0, 1)`.
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    let half = T::lit(0.5);
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    let nf = T::from_usize_lossy(n);
    for i in 0..n.div_ceil(2) {
        let mut x = (T::PI() * (T::from_usize_lossy(i) + T::lit(0.75)) / (nf + half)).cos();
        let mut dp = T::one();
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x = x - dx;
            if dx.abs() < T::epsilon() * T::lit(4.0) {
                let (_, d) = legendre(n, x);
                dp = d;
                break;
            }
        }
        let w = T::lit(2.0) / ((T::one() - x * x) * dp * dp);
        nodes[i] = half * (T::one() - x);
        nodes[n - 1 - i] = half * (T::one() + x);
        weights[i] = half * w;
        weights[n - 1 - i] = half * w;
    }
    (nodes, weights)
}

/// `P_n(x)` and its derivative by the three-term recurrence.
fn legendre<T: Real>(n: usize, x: T) -> (T, T) {
    let mut p0 = T::one();
    let mut p1 = x;
    for k in 2..=n {
        let k = T::from_usize_lossy(k);
        let p2 = ((T::lit(2.0) * k - T::one()) * x * p1 - (k - T::one()) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let nf = T::from_usize_lossy(n);
    (p1, nf * (x * p1 - p0) / (x * x - T::one()))
}

/// `log ∫ BF(u) π(u) du / ∫ π(u) du` over `u ∈ (eps, min(1, 1/v))`, where
/// `π` is the tCCH kernel. The substitution `u = u_max t^{2/a}` absorbs the
/// `u^{a/2-1}` singularity so the remaining integrand is smooth in `t`.
pub fn log_mixture_integral<T: Real>(
    log_bf: impl Fn(T) -> T,
    v: f64,
    cfg: &RobustGConfig,
) -> T {
    let alpha = cfg.a / 2.0;
    let u_max = (1.0 / v).min(1.0);
    let t_lo = (cfg.eps / u_max).powf(alpha).min(1.0);
    let (nodes, weights) = gauss_legendre::<T>(cfg.nodes);
    let span = T::lit(1.0 - t_lo);
    let mut num = Vec::with_capacity(cfg.nodes);
    let mut den = Vec::with_capacity(cfg.nodes);
    for (&t01, &w) in nodes.iter().zip(&weights) {
        let t = T::lit(t_lo) + span * t01;
        let u = T::lit(u_max) * t.powf(T::lit(1.0 / alpha));
        let vu = T::lit(v) * u;
        let mut log_kernel = -T::lit(cfg.s / 2.0) * u;
        if cfg.b != 2.0 {
            log_kernel = log_kernel + T::lit(cfg.b / 2.0 - 1.0) * (T::one() - vu).max(T::zero()).ln();
        }
        if cfg.kappa != 1.0 {
            log_kernel = log_kernel - T::lit(cfg.r) * (T::lit(cfg.kappa) + T::lit(1.0 - cfg.kappa) * vu).ln();
        }
        let base = (w * span).ln() + log_kernel;
        den.push(base);
        num.push(base + log_bf(u));
    }
    log_sum_exp(&num) - log_sum_exp(&den)
}

/// Robust g-prior log marginal likelihood, on the same scale as the
/// Jeffreys score: the null model's maximized log-likelihood plus the log
/// Bayes factor of the model against the null.
pub fn log_marglik_robust_g<T: Real>(fit: &GlmFit<T>, null: &GlmFit<T>, n: usize, cfg: &RobustGConfig) -> T {
    let k = fit.model_size();
    if !fit.loglik.is_finite() || !null.loglik.is_finite() || !fit.full_rank() {
        return T::neg_infinity();
    }
    if k == 0 {
        return null.loglik;
    }
    let v = RobustGConfig::v(n, k);
    let half_k = T::from_usize_lossy(k) / T::lit(2.0);
    let value = match fit.family {
        Family::Gaussian => {
            let one_minus_r2 = fit.rss / null.rss;
            let half_n1 = T::from_usize_lossy(n - 1) / T::lit(2.0);
            log_mixture_integral(
                |u: T| half_k * u.ln() - half_n1 * (u + (T::one() - u) * one_minus_r2).ln(),
                v,
                cfg,
            )
        }
        Family::Binomial => {
            let delta = fit.loglik - null.loglik;
            let q = fit.wald;
            log_mixture_integral(|u: T| delta + half_k * u.ln() - q * u / T::lit(2.0), v, cfg)
        }
    };
    if value.is_finite() {
        null.loglik + value
    } else {
        log::debug!("robust g-prior quadrature not finite for a model of size {k}");
        T::neg_infinity()
    }
}

/// Log marginal likelihood under the chosen prior. `null` is the
/// intercept-only fit, used by the robust g-prior.
pub fn log_marglik<T: Real>(
    prior: PriorKind,
    fit: &GlmFit<T>,
    null: &GlmFit<T>,
    n: usize,
    robust: &RobustGConfig,
) -> T {
    match prior {
        PriorKind::Jeffreys => log_marglik_jeffreys(fit, n, fit.model_size()),
        PriorKind::RobustG => log_marglik_robust_g(fit, null, n, robust),
    }
}

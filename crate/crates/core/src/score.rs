//! Fast model scoring for a fixed population.
//!
//! Tree columns are evaluated once per population. Gaussian models are
//! scored from a Gram matrix built with popcounts; logistic models are fitted
//! on rows grouped by their covariate pattern. Log marginal likelihoods are
//! cached per chain under the set of included tree keys, so a model met again
//! in a later population is not refitted.

use std::collections::HashMap;

use crate::bits::BitVector;
use crate::data::{Dataset, Family};
use crate::likelihood::{
    fit_binomial_grouped, fit_glm, gaussian_loglik, log_marglik, GlmFit, PriorKind, RobustGConfig,
};
use crate::linalg::{Cholesky, Matrix};
use crate::logic_tree::CanonicalKey;
use crate::model_space::{ModelIndex, Population, PriorConfig};

/// Log marginal likelihood and log prior of one model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelScore {
    pub log_marglik: f64,
    pub log_prior: f64,
}

impl ModelScore {
    pub const INFEASIBLE: ModelScore = ModelScore {
        log_marglik: f64::NEG_INFINITY,
        log_prior: f64::NEG_INFINITY,
    };

    pub fn log_post(&self) -> f64 {
        self.log_marglik + self.log_prior
    }
}

/// Anything that can score models over a population of `d` trees.
pub trait ModelScorer {
    fn d(&self) -> usize;

    /// Largest admissible model size; larger models have zero prior mass.
    fn k_max(&self) -> usize;

    fn score(&mut self, model: &ModelIndex) -> ModelScore;
}

/// Wraps a closure returning a log posterior (used with a zero log prior).
pub struct FnScorer<F> {
    d: usize,
    k_max: usize,
    f: F,
}

impl<F: FnMut(&ModelIndex) -> f64> FnScorer<F> {
    pub fn new(d: usize, k_max: usize, f: F) -> Self {
        Self { d, k_max, f }
    }
}

impl<F: FnMut(&ModelIndex) -> f64> ModelScorer for FnScorer<F> {
    fn d(&self) -> usize {
        self.d
    }

    fn k_max(&self) -> usize {
        self.k_max
    }

    fn score(&mut self, model: &ModelIndex) -> ModelScore {
        if model.size() > self.k_max {
            return ModelScore::INFEASIBLE;
        }
        ModelScore {
            log_marglik: (self.f)(model),
            log_prior: 0.0,
        }
    }
}

/// Dataset-level quantities shared by every population and chain.
#[derive(Debug, Clone)]
pub struct DataContext<'a> {
    data: &'a Dataset<f64>,
    prior: PriorKind,
    robust: RobustGConfig,
    prior_cfg: PriorConfig,
    null: GlmFit<f64>,
    y_mean: f64,
    y_centered: Vec<f64>,
    tss: f64,
}

impl<'a> DataContext<'a> {
    pub fn new(data: &'a Dataset<f64>, prior: PriorKind, robust: RobustGConfig, prior_cfg: PriorConfig) -> Self {
        let n = data.n();
        let ones = Matrix::from_fn(n, 1, |_, _| 1.0);
        let null = fit_glm(&ones, data.y(), data.family()).expect("intercept design matches response");
        let mean = data.y().iter().sum::<f64>() / n as f64;
        let y_centered: Vec<f64> = data.y().iter().map(|v| v - mean).collect();
        let tss = y_centered.iter().map(|v| v * v).sum();
        Self {
            data,
            prior,
            robust,
            prior_cfg,
            null,
            y_mean: mean,
            y_centered,
            tss,
        }
    }

    pub fn data(&self) -> &Dataset<f64> {
        self.data
    }

    pub fn prior_cfg(&self) -> &PriorConfig {
        &self.prior_cfg
    }

    pub fn prior(&self) -> PriorKind {
        self.prior
    }

    pub fn null_fit(&self) -> &GlmFit<f64> {
        &self.null
    }
}

/// Per-chain memo of log marginal likelihoods keyed by interned tree keys.
#[derive(Debug, Default, Clone)]
pub struct MarglikCache {
    ids: HashMap<CanonicalKey, u32>,
    values: HashMap<Vec<u32>, f64>,
    hits: u64,
    fits: u64,
}

impl MarglikCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn intern(&mut self, key: &CanonicalKey) -> u32 {
        let next = self.ids.len() as u32;
        *self.ids.entry(key.clone()).or_insert(next)
    }

    /// Number of GLM fits performed so far.
    pub fn fits(&self) -> u64 {
        self.fits
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }
}

/// Scores models over one population.
pub struct PopulationScorer<'a, 'c> {
    ctx: &'a DataContext<'a>,
    cache: &'c mut MarglikCache,
    columns: Vec<BitVector>,
    key_ids: Vec<u32>,
    penalties: Vec<f64>,
    counts: Vec<f64>,
    xty: Vec<f64>,
}

impl<'a, 'c> PopulationScorer<'a, 'c> {
    pub fn new(ctx: &'a DataContext<'a>, pop: &Population, cache: &'c mut MarglikCache) -> Self {
        let columns: Vec<BitVector> = pop
            .trees()
            .iter()
            .map(|t| t.evaluate_columns(ctx.data.columns()).expect("population validated against data"))
            .collect();
        let key_ids = pop.keys().iter().map(|k| cache.intern(k)).collect();
        let penalties = pop
            .trees()
            .iter()
            .map(|t| ctx.prior_cfg.log_tree_penalty::<f64>(t.size()))
            .collect();
        let counts = columns.iter().map(|c| c.count_ones() as f64).collect();
        let xty = columns
            .iter()
            .map(|c| c.ones_iter().map(|i| ctx.y_centered[i]).sum())
            .collect();
        Self {
            ctx,
            cache,
            columns,
            key_ids,
            penalties,
            counts,
            xty,
        }
    }

    pub fn columns(&self) -> &[BitVector] {
        &self.columns
    }

    fn log_prior(&self, model: &ModelIndex) -> f64 {
        if model.size() > self.ctx.prior_cfg.k_max {
            return f64::NEG_INFINITY;
        }
        model.included().map(|j| self.penalties[j]).sum()
    }

    /// Log marginal likelihood without the cache.
    pub fn log_marglik_uncached(&self, model: &ModelIndex) -> f64 {
        let included: Vec<usize> = model.included().collect();
        let fit = match self.ctx.data.family() {
            Family::Gaussian => self.gaussian_fit(&included),
            Family::Binomial => self.binomial_fit(&included),
        };
        match fit {
            Some(fit) => log_marglik(self.ctx.prior, &fit, &self.ctx.null, self.ctx.data.n(), &self.ctx.robust),
            None => f64::NEG_INFINITY,
        }
    }

    fn gaussian_fit(&self, included: &[usize]) -> Option<GlmFit<f64>> {
        let n = self.ctx.data.n();
        let k = included.len();
        let mut gram = Matrix::zeros(k + 1, k + 1);
        gram.set(0, 0, n as f64);
        let mut rhs = vec![0.0; k + 1];
        for (a, &ja) in included.iter().enumerate() {
            gram.set(0, a + 1, self.counts[ja]);
            gram.set(a + 1, 0, self.counts[ja]);
            rhs[a + 1] = self.xty[ja];
            for (b, &jb) in included.iter().enumerate().skip(a) {
                let c = if a == b {
                    self.counts[ja]
                } else {
                    self.columns[ja].and_count(&self.columns[jb]) as f64
                };
                gram.set(a + 1, b + 1, c);
                gram.set(b + 1, a + 1, c);
            }
        }
        let ch = Cholesky::new(&gram).ok()?;
        let z = ch.forward(&rhs);
        let explained: f64 = z.iter().map(|v| v * v).sum();
        let rss = (self.ctx.tss - explained).max(0.0);
        let dispersion = rss / n as f64;
        let mut coefficients = ch.backward(&z);
        coefficients[0] += self.ctx.y_mean;
        Some(GlmFit {
            family: Family::Gaussian,
            coefficients,
            loglik: gaussian_loglik(n, rss),
            dispersion,
            rss,
            wald: explained / dispersion,
            iterations: 1,
            converged: true,
            rank: k + 1,
            n_obs: n,
        })
    }

    fn binomial_fit(&self, included: &[usize]) -> Option<GlmFit<f64>> {
        let n = self.ctx.data.n();
        let k = included.len();
        let y = self.ctx.data.y();
        assert!(k <= 64, "logistic scoring supports at most 64 trees per model");
        let mut groups: HashMap<u64, (f64, f64)> = HashMap::new();
        for i in 0..n {
            let pattern = included
                .iter()
                .enumerate()
                .fold(0u64, |acc, (p, &j)| acc | (u64::from(self.columns[j].get(i)) << p));
            let e = groups.entry(pattern).or_insert((0.0, 0.0));
            e.0 += 1.0;
            e.1 += y[i];
        }
        let mut groups: Vec<(u64, (f64, f64))> = groups.into_iter().collect();
        groups.sort_unstable_by_key(|g| g.0);
        if groups.len() < k + 1 {
            return None;
        }
        let design = Matrix::from_fn(groups.len(), k + 1, |g, j| {
            if j == 0 || (groups[g].0 >> (j - 1)) & 1 == 1 {
                1.0
            } else {
                0.0
            }
        });
        let trials: Vec<f64> = groups.iter().map(|g| g.1 .0).collect();
        let successes: Vec<f64> = groups.iter().map(|g| g.1 .1).collect();
        let fit = fit_binomial_grouped(&design, &trials, &successes).ok()?;
        fit.full_rank().then_some(fit)
    }
}

impl ModelScorer for PopulationScorer<'_, '_> {
    fn d(&self) -> usize {
        self.columns.len()
    }

    fn k_max(&self) -> usize {
        self.ctx.prior_cfg.k_max
    }

    fn score(&mut self, model: &ModelIndex) -> ModelScore {
        let log_prior = self.log_prior(model);
        if log_prior == f64::NEG_INFINITY {
            return ModelScore::INFEASIBLE;
        }
        let mut ids: Vec<u32> = model.included().map(|j| self.key_ids[j]).collect();
        ids.sort_unstable();
        let log_marglik = match self.cache.values.get(&ids) {
            Some(&v) => {
                self.cache.hits += 1;
                v
            }
            None => {
                let v = self.log_marglik_uncached(model);
                self.cache.fits += 1;
                self.cache.values.insert(ids, v);
                v
            }
        };
        ModelScore { log_marglik, log_prior }
    }
}

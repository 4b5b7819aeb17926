//! Genetically modified MJMCMC: population initialization, evolution across
//! generations, independent chains and their weighted aggregation.

use std::collections::HashSet;

use indexmap::IndexMap;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logic_tree::{crossover, mutate, random_tree, reduce, CanonicalKey, GaOperatorParams, LogicTree};
use crate::mjmcmc::{feasible_model_count, Budget, MjmcmcChain, MjmcmcConfig, MjmcmcError, PosteriorStore};
use crate::model_space::{ModelIndex, ModelSpaceError, Population, PopulationSnapshot, PriorConfig};
use crate::num::softmax;
use crate::parallel::{derive_seed, parallel_map};
use crate::score::{DataContext, MarglikCache, PopulationScorer};

/// Replacement attempts before falling back to a fresh leaf.
pub const RETRY_BUDGET: usize = 100;

const CHAIN_STREAM: u64 = 0xC4A1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GmjmcmcError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no chain summaries to aggregate")]
    NoSummaries,
    #[error("detection threshold {0} is not in (0, 1)")]
    BadThreshold(f64),
    #[error("need at least 2 covariates, got {0}")]
    TooFewCovariates(usize),
    #[error(transparent)]
    ModelSpace(#[from] ModelSpaceError),
    #[error(transparent)]
    Chain(#[from] MjmcmcError),
}

/// Algorithm tuning, chain count and master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmjmcmcConfig {
    #[serde(rename = "N_init")]
    pub n_init: usize,
    #[serde(rename = "N_expl")]
    pub n_expl: usize,
    #[serde(rename = "M_fin")]
    pub m_fin: usize,
    #[serde(rename = "T_max")]
    pub t_max: usize,
    pub rho_min: f64,
    #[serde(rename = "P_and")]
    pub p_and: f64,
    #[serde(rename = "P_not")]
    pub p_not: f64,
    #[serde(rename = "P_init")]
    pub p_init: f64,
    #[serde(rename = "P_c")]
    pub p_c: f64,
    pub rho_del: f64,
    #[serde(rename = "C_max")]
    pub c_max: usize,
    pub k_max: usize,
    pub d: usize,
    pub chains: usize,
    pub seed: u64,
    /// Build the first population from random trees instead of a data-driven
    /// MJMCMC run over the single leaves.
    pub random_init: bool,
    pub mjmcmc: MjmcmcConfig,
    /// Step cap of the final-generation run; `None` means `20 M_fin`.
    pub max_final_steps: Option<usize>,
}

impl Default for GmjmcmcConfig {
    fn default() -> Self {
        Self::preset("1").expect("built-in preset")
    }
}

impl GmjmcmcConfig {
    /// Tuning presets by example name: `1` to `6`, `RD1`, `RD2`.
    pub fn preset(name: &str) -> Option<Self> {
        #[rustfmt::skip]
        let row: (usize, usize, usize, usize, f64, f64, f64, f64, f64, f64, usize, usize, usize) = match name {
            "1" | "2" => (300, 300, 10000, 16, 0.2, 1.0, 0.2, 0.5, 0.9, 0.5, 2, 10, 15),
            "3" => (300, 300, 15000, 33, 0.2, 0.9, 0.1, 0.5, 0.9, 0.5, 5, 10, 15),
            "4" => (300, 300, 10000, 33, 0.2, 0.9, 0.1, 0.5, 0.9, 0.5, 5, 10, 15),
            "5" => (300, 300, 10000, 33, 0.2, 0.9, 0.1, 0.5, 0.9, 0.5, 5, 10, 20),
            "6" => (250, 250, 20000, 40, 0.2, 0.7, 0.1, 0.5, 0.9, 0.5, 5, 20, 40),
            "RD1" => (250, 250, 35000, 40, 0.2, 0.7, 0.1, 0.5, 0.9, 0.5, 5, 15, 25),
            "RD2" => (250, 250, 15000, 40, 0.2, 0.7, 0.1, 0.5, 0.9, 0.5, 5, 15, 25),
            _ => return None,
        };
        let (n_init, n_expl, m_fin, t_max, rho_min, p_and, p_not, p_init, p_c, rho_del, c_max, k_max, d) = row;
        Some(Self {
            n_init,
            n_expl,
            m_fin,
            t_max,
            rho_min,
            p_and,
            p_not,
            p_init,
            p_c,
            rho_del,
            c_max,
            k_max,
            d,
            chains: 1,
            seed: 0,
            random_init: false,
            mjmcmc: MjmcmcConfig::default(),
            max_final_steps: None,
        })
    }

    pub fn validate(&self) -> Result<(), GmjmcmcError> {
        let bad = |msg: String| Err(GmjmcmcError::InvalidConfig(msg));
        if !(self.rho_min > 0.0 && self.rho_min < 1.0) {
            return bad(format!("rho_min = {} is not in (0, 1)", self.rho_min));
        }
        for (name, p) in [
            ("P_and", self.p_and),
            ("P_not", self.p_not),
            ("P_init", self.p_init),
            ("P_c", self.p_c),
            ("rho_del", self.rho_del),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not in [0, 1]"));
            }
        }
        if self.c_max == 0 || self.k_max == 0 || self.d == 0 || self.t_max == 0 || self.chains == 0 {
            return bad("C_max, k_max, d, T_max and the chain count must be positive".into());
        }
        if self.d < self.k_max {
            return bad(format!(
                "d = {} is below k_max = {}, so no founder cap can keep d - d1 >= k_max",
                self.d, self.k_max
            ));
        }
        self.mjmcmc.validate()?;
        Ok(())
    }

    pub fn operator_params(&self) -> GaOperatorParams {
        GaOperatorParams {
            p_and: self.p_and,
            p_not: self.p_not,
            rho_del: self.rho_del,
            c_max: self.c_max,
        }
    }

    pub fn prior_cfg(&self, m: usize) -> Result<PriorConfig, GmjmcmcError> {
        Ok(PriorConfig::new(m, self.k_max, self.c_max)?)
    }

    /// Largest founder count compatible with `d - d1 >= k_max`.
    pub fn max_founders(&self) -> usize {
        self.d - self.k_max
    }

    pub fn chain_seed(&self, chain: usize) -> u64 {
        derive_seed(self.seed, CHAIN_STREAM, chain as u64)
    }
}

/// Final inclusion probability of one tree in one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeProbability {
    pub key: CanonicalKey,
    pub tree: LogicTree,
    pub probability: f64,
}

/// What a chain reports: final-generation inclusion probabilities and the
/// log posterior mass it found.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSummary {
    pub trees: Vec<TreeProbability>,
    /// `s_b`, the log of the summed unnormalized posterior over the final
    /// generation's visited models.
    pub log_mass: f64,
    pub generations: usize,
    /// Distinct models stored, summed over generations.
    pub models_visited: usize,
    pub seed: u64,
    pub final_population: PopulationSnapshot,
    pub n_founders: usize,
}

/// Data-driven (or random) first population.
pub fn initialize<R: Rng>(
    ctx: &DataContext<'_>,
    cfg: &GmjmcmcConfig,
    rng: &mut R,
    cache: &mut MarglikCache,
) -> Result<Population, GmjmcmcError> {
    let m = ctx.data().m();
    if m < 2 {
        return Err(GmjmcmcError::TooFewCovariates(m));
    }
    let params = cfg.operator_params();
    if cfg.random_init {
        let mut builder = PopulationBuilder::new(cfg.d);
        let mut attempts = 0;
        while !builder.is_full() && attempts < 1000 * cfg.d {
            attempts += 1;
            let size = rng.gen_range(1..=cfg.c_max.min(m));
            builder.try_push(random_tree(m, size, &params, rng));
        }
        return Ok(Population::new(builder.trees, 0, 1)?);
    }

    let leaves = Population::leaves(m);
    let mut scorer = PopulationScorer::new(ctx, &leaves, cache);
    let mut chain = MjmcmcChain::new(&mut scorer, rng, cfg.mjmcmc, ModelIndex::empty(m), PosteriorStore::new())?;
    chain.run(Budget::Steps(cfg.n_init));
    let (_, store) = chain.into_parts();
    let inclusion = store.inclusion_probs(m);
    log::debug!("leaf inclusion after initialization: {inclusion:.2?}");

    let mut ranked: Vec<usize> = (0..m).collect();
    ranked.sort_by(|&a, &b| inclusion[b].total_cmp(&inclusion[a]).then(a.cmp(&b)));
    let mut pool: Vec<usize> = ranked.iter().copied().filter(|&j| inclusion[j] > cfg.rho_min).collect();
    if pool.is_empty() {
        pool.push(ranked[0]);
    }
    let n_founders = pool.len().min(cfg.max_founders());
    let mut builder = PopulationBuilder::new(cfg.d);
    for &j in &pool {
        builder.try_push(LogicTree::leaf(j));
    }
    let pool_trees: Vec<LogicTree> = pool.iter().map(|&j| LogicTree::leaf(j)).collect();
    let mut failures = 0;
    while !builder.is_full() {
        let a = &pool_trees[rng.gen_range(0..pool_trees.len())];
        let b = &pool_trees[rng.gen_range(0..pool_trees.len())];
        let child = shrink(crossover(a, b, &params, rng), &params, rng);
        if builder.try_push(child) {
            failures = 0;
            continue;
        }
        failures += 1;
        if failures >= RETRY_BUDGET {
            failures = 0;
            if !builder.push_fresh_leaf(m, &[], rng) && !builder.push_random_tree(m, &params, rng) {
                break;
            }
        }
    }
    Ok(Population::new(builder.trees, n_founders, 1)?)
}

/// Accumulates distinct, non-constant trees up to a target size.
struct PopulationBuilder {
    trees: Vec<LogicTree>,
    keys: HashSet<CanonicalKey>,
    target: usize,
}

impl PopulationBuilder {
    fn new(target: usize) -> Self {
        Self {
            trees: Vec::with_capacity(target),
            keys: HashSet::new(),
            target,
        }
    }

    fn is_full(&self) -> bool {
        self.trees.len() >= self.target
    }

    fn admissible(&self, tree: &LogicTree) -> Option<CanonicalKey> {
        let key = tree.canonical_key().ok()?.polarity_free();
        (!key.is_constant() && !self.keys.contains(&key)).then_some(key)
    }

    fn try_push(&mut self, tree: LogicTree) -> bool {
        if self.is_full() {
            return false;
        }
        match self.admissible(&tree) {
            Some(key) => {
                self.keys.insert(key);
                self.trees.push(tree);
                true
            }
            None => false,
        }
    }

    fn push_fresh_leaf<R: Rng>(&mut self, m: usize, founders: &[usize], rng: &mut R) -> bool {
        let unused: Vec<usize> = (0..m)
            .filter(|j| !founders.contains(j))
            .filter(|&j| self.admissible(&LogicTree::leaf(j)).is_some())
            .collect();
        if unused.is_empty() {
            return false;
        }
        self.try_push(LogicTree::leaf(unused[rng.gen_range(0..unused.len())]))
    }

    fn push_random_tree<R: Rng>(&mut self, m: usize, params: &GaOperatorParams, rng: &mut R) -> bool {
        for _ in 0..RETRY_BUDGET {
            let size = rng.gen_range(1..=params.c_max.min(m));
            if self.try_push(random_tree(m, size, params, rng)) {
                return true;
            }
        }
        false
    }
}

/// Applies reduction until the tree respects `C_max`.
fn shrink<R: Rng>(mut tree: LogicTree, params: &GaOperatorParams, rng: &mut R) -> LogicTree {
    while tree.size() > params.c_max {
        tree = reduce(&tree, params, rng).expect("size above C_max is at least 2");
    }
    tree
}

fn weighted_index<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return rng.gen_range(0..weights.len());
    }
    let mut u = rng.gen::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).expect("positive total")
}

/// Drops weak non-founders and replaces them by crossover or
/// mutation children of inclusion-weighted parents.
pub fn evolve<R: Rng>(
    pop: &Population,
    inclusion: &[f64],
    cfg: &GmjmcmcConfig,
    m: usize,
    rng: &mut R,
) -> Result<Population, GmjmcmcError> {
    let params = cfg.operator_params();
    let d1 = pop.n_founders();
    let founders = pop.founder_indices();
    let mutation_leaves: Vec<usize> = (0..m).filter(|j| !founders.contains(j)).collect();
    let doomed: Vec<usize> = (d1..pop.d()).filter(|&j| inclusion[j] < cfg.rho_min).collect();

    // Everything in S_t counts as present, including trees being replaced.
    let mut present: HashSet<CanonicalKey> = pop.keys().iter().cloned().collect();
    let mut trees = pop.trees().to_vec();
    for &slot in &doomed {
        let mut replacement = None;
        for _ in 0..RETRY_BUDGET {
            let p1 = pop.tree(weighted_index(inclusion, rng));
            let child = if rng.gen::<f64>() < cfg.p_c || mutation_leaves.is_empty() {
                let p2 = pop.tree(weighted_index(inclusion, rng));
                crossover(p1, p2, &params, rng)
            } else {
                let leaf = LogicTree::leaf(mutation_leaves[rng.gen_range(0..mutation_leaves.len())]);
                mutate(p1, &leaf, &founders, &params, rng).expect("leaf outside the founder set")
            };
            let child = shrink(child, &params, rng);
            let Ok(key) = child.canonical_key() else {
                continue;
            };
            let key = key.polarity_free();
            if key.is_constant() || present.contains(&key) {
                continue;
            }
            replacement = Some((child, key));
            break;
        }
        if replacement.is_none() {
            let fresh: Vec<usize> = mutation_leaves
                .iter()
                .copied()
                .filter(|&j| !present.contains(&LogicTree::leaf(j).canonical_key().expect("leaf key")))
                .collect();
            if !fresh.is_empty() {
                let leaf = LogicTree::leaf(fresh[rng.gen_range(0..fresh.len())]);
                let key = leaf.canonical_key().expect("leaf key");
                replacement = Some((leaf, key));
            }
        }
        if let Some((tree, key)) = replacement {
            present.insert(key);
            trees[slot] = tree;
        }
    }
    Ok(Population::new(trees, d1, pop.generation() + 1)?)
}

/// Initial model for a generation: each tree independently with probability
/// `P_init`, thinned at random to at most `k_max` trees.
pub fn initial_model<R: Rng>(d: usize, cfg: &GmjmcmcConfig, rng: &mut R) -> ModelIndex {
    let mut chosen: Vec<usize> = (0..d).filter(|_| rng.gen::<f64>() < cfg.p_init).collect();
    if chosen.len() > cfg.k_max {
        let keep = sample(rng, chosen.len(), cfg.k_max).into_vec();
        chosen = keep.into_iter().map(|i| chosen[i]).collect();
    }
    ModelIndex::from_positions(d, &chosen)
}

/// One full GMJMCMC chain: initialization, then every generation.
pub fn run_chain(ctx: &DataContext<'_>, cfg: &GmjmcmcConfig, seed: u64) -> Result<ChainSummary, GmjmcmcError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cache = MarglikCache::new();
    let pop = initialize(ctx, cfg, &mut rng, &mut cache)?;
    let mut summary = run_generations(ctx, cfg, pop, &mut rng, &mut cache)?;
    summary.seed = seed;
    Ok(summary)
}

/// Runs every generation starting from a given population.
pub fn run_chain_from(
    ctx: &DataContext<'_>,
    cfg: &GmjmcmcConfig,
    pop: Population,
    seed: u64,
) -> Result<ChainSummary, GmjmcmcError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cache = MarglikCache::new();
    let mut summary = run_generations(ctx, cfg, pop, &mut rng, &mut cache)?;
    summary.seed = seed;
    Ok(summary)
}

fn run_generations<R: Rng>(
    ctx: &DataContext<'_>,
    cfg: &GmjmcmcConfig,
    mut pop: Population,
    rng: &mut R,
    cache: &mut MarglikCache,
) -> Result<ChainSummary, GmjmcmcError> {
    let m = ctx.data().m();
    let mut visited = 0;
    for t in 1..=cfg.t_max {
        let d = pop.d();
        let init = initial_model(d, cfg, rng);
        let mut scorer = PopulationScorer::new(ctx, &pop, cache);
        let mut chain = MjmcmcChain::new(&mut scorer, rng, cfg.mjmcmc, init, PosteriorStore::new())?;
        let last = t == cfg.t_max;
        let budget = if last {
            let target = cfg.m_fin.min(feasible_model_count(d, cfg.k_max));
            Budget::UniqueModels {
                target,
                max_steps: cfg.max_final_steps.unwrap_or(20 * cfg.m_fin),
            }
        } else {
            Budget::Steps(cfg.n_expl)
        };
        chain.run(budget);
        let (_, store) = chain.into_parts();
        visited += store.len();
        let inclusion = store.inclusion_probs(d);
        if last {
            let trees = pop
                .trees()
                .iter()
                .zip(pop.keys())
                .zip(&inclusion)
                .map(|((tree, key), &probability)| TreeProbability {
                    key: key.clone(),
                    tree: tree.clone(),
                    probability,
                })
                .collect();
            return Ok(ChainSummary {
                trees,
                log_mass: store.log_mass(),
                generations: t,
                models_visited: visited,
                seed: 0,
                final_population: pop.snapshot(&inclusion),
                n_founders: pop.n_founders(),
            });
        }
        if log::log_enabled!(log::Level::Debug) {
            let listing: Vec<String> = pop
                .trees()
                .iter()
                .zip(&inclusion)
                .map(|(t, p)| format!("{t}:{p:.2}"))
                .collect();
            log::debug!("generation {t}: {} models; {}", store.len(), listing.join(", "));
        }
        pop = evolve(&pop, &inclusion, cfg, m, rng)?;
    }
    unreachable!("T_max >= 1 is validated")
}

/// Runs `cfg.chains` independent chains on up to `threads` workers.
pub fn run_chains(
    ctx: &DataContext<'_>,
    cfg: &GmjmcmcConfig,
    threads: usize,
) -> Result<Vec<ChainSummary>, GmjmcmcError> {
    cfg.validate()?;
    parallel_map(cfg.chains, threads, |b| run_chain(ctx, cfg, cfg.chain_seed(b)))
        .into_iter()
        .collect()
}

/// A tree's probability after weighting chains by their posterior mass.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedTree {
    pub key: CanonicalKey,
    pub tree: LogicTree,
    pub probability: f64,
    /// Per-chain probabilities, zero where the chain did not hold the tree.
    pub per_chain: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    /// `w_b`, proportional to `exp(s_b)`.
    pub weights: Vec<f64>,
    /// Trees in order of first appearance across chains.
    pub trees: Vec<AggregatedTree>,
}

/// Weighted combination of chain summaries.
pub fn aggregate(summaries: &[ChainSummary]) -> Result<Aggregate, GmjmcmcError> {
    if summaries.is_empty() {
        return Err(GmjmcmcError::NoSummaries);
    }
    let log_masses: Vec<f64> = summaries.iter().map(|s| s.log_mass).collect();
    let weights = if log_masses.iter().all(|&s| s == f64::NEG_INFINITY) {
        vec![1.0 / summaries.len() as f64; summaries.len()]
    } else {
        softmax(&log_masses)
    };
    let b = summaries.len();
    let mut trees: IndexMap<CanonicalKey, AggregatedTree> = IndexMap::new();
    for (i, s) in summaries.iter().enumerate() {
        for t in &s.trees {
            let entry = trees.entry(t.key.clone()).or_insert_with(|| AggregatedTree {
                key: t.key.clone(),
                tree: t.tree.clone(),
                probability: 0.0,
                per_chain: vec![0.0; b],
            });
            entry.per_chain[i] = t.probability;
        }
    }
    let trees = trees
        .into_values()
        .map(|mut t| {
            t.probability = t.per_chain.iter().zip(&weights).map(|(p, w)| p * w).sum::<f64>().min(1.0);
            t
        })
        .collect();
    Ok(Aggregate { weights, trees })
}

/// Trees whose aggregated probability strictly exceeds `threshold`, sorted by
/// probability (descending) and then by text.
pub fn detect(agg: &Aggregate, threshold: f64) -> Result<Vec<AggregatedTree>, GmjmcmcError> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(GmjmcmcError::BadThreshold(threshold));
    }
    let mut out: Vec<AggregatedTree> = agg.trees.iter().filter(|t| t.probability > threshold).cloned().collect();
    out.sort_by(|a, b| {
        b.probability
            .total_cmp(&a.probability)
            .then_with(|| a.tree.to_string().cmp(&b.tree.to_string()))
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Dataset, Family};
    use crate::likelihood::{PriorKind, RobustGConfig};

    fn t(s: &str) -> LogicTree {
        s.parse().unwrap()
    }

    fn summary(trees: &[(&str, f64)], log_mass: f64) -> ChainSummary {
        ChainSummary {
            trees: trees
                .iter()
                .map(|(s, p)| TreeProbability {
                    key: t(s).canonical_key().unwrap().polarity_free(),
                    tree: t(s),
                    probability: *p,
                })
                .collect(),
            log_mass,
            generations: 1,
            models_visited: 1,
            seed: 0,
            final_population: PopulationSnapshot {
                generation: 1,
                trees: vec![],
                inclusion: vec![],
            },
            n_founders: 0,
        }
    }

    #[test]
    fn presets_match_tuning_table() {
        let one = GmjmcmcConfig::preset("1").unwrap();
        assert_eq!((one.n_init, one.n_expl, one.m_fin, one.t_max), (300, 300, 10000, 16));
        assert_eq!((one.p_and, one.p_not, one.c_max, one.k_max, one.d), (1.0, 0.2, 2, 10, 15));
        assert_eq!(GmjmcmcConfig::preset("2"), Some(one));
        let six = GmjmcmcConfig::preset("6").unwrap();
        assert_eq!((six.m_fin, six.t_max, six.k_max, six.d, six.p_and), (20000, 40, 20, 40, 0.7));
        assert_eq!(GmjmcmcConfig::preset("RD1").unwrap().m_fin, 35000);
        assert!(GmjmcmcConfig::preset("7").is_none());
    }

    #[test]
    fn config_validation() {
        let mut c = GmjmcmcConfig::default();
        c.d = 5;
        assert!(c.validate().is_err());
        let mut c = GmjmcmcConfig::default();
        c.rho_min = 1.0;
        assert!(c.validate().is_err());
        assert!(GmjmcmcConfig::default().validate().is_ok());
    }

    #[test]
    fn aggregate_single_chain_is_identity() {
        let s = summary(&[("X1 & X2", 0.7), ("X3", 0.1)], -10.0);
        let agg = aggregate(std::slice::from_ref(&s)).unwrap();
        assert_eq!(agg.weights, vec![1.0]);
        assert_eq!(agg.trees[0].probability, 0.7);
        assert_eq!(agg.trees[1].probability, 0.1);
    }

    #[test]
    fn aggregate_softmax_weights() {
        let a = summary(&[("X1", 1.0)], -5.0 + 3f64.ln());
        let b = summary(&[("X2", 1.0)], -5.0);
        let agg = aggregate(&[a, b]).unwrap();
        assert!((agg.weights[0] - 0.75).abs() < 1e-12 && (agg.weights[1] - 0.25).abs() < 1e-12);
        // absent keys count as zero
        assert!((agg.trees[0].probability - 0.75).abs() < 1e-12);
        assert!((agg.trees[1].probability - 0.25).abs() < 1e-12);
        assert_eq!(aggregate(&[]), Err(GmjmcmcError::NoSummaries));
    }

    #[test]
    fn detection_rules() {
        let s = summary(&[("X2", 0.9), ("X1", 0.9), ("X3", 0.5), ("X4", 0.51)], 0.0);
        let agg = aggregate(&[s]).unwrap();
        let det: Vec<String> = detect(&agg, 0.5).unwrap().iter().map(|t| t.tree.to_string()).collect();
        assert_eq!(det, vec!["X1", "X2", "X4"]);
        let empty = Aggregate {
            weights: vec![1.0],
            trees: vec![],
        };
        assert!(detect(&empty, 0.5).unwrap().is_empty());
        assert!(detect(&empty, 1.0).is_err());
    }

    #[test]
    fn initial_model_respects_k_max() {
        let mut cfg = GmjmcmcConfig::default();
        cfg.p_init = 1.0;
        cfg.k_max = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = initial_model(15, &cfg, &mut rng);
        assert_eq!(m.size(), 3);
    }

    #[test]
    fn evolve_without_weak_trees_keeps_population() {
        let pop = Population::new(vec![t("X1"), t("X2 & X3"), t("X4")], 1, 4).unwrap();
        let mut cfg = GmjmcmcConfig::default();
        cfg.d = 3;
        cfg.k_max = 2;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let next = evolve(&pop, &[0.9, 0.6, 0.3], &cfg, 10, &mut rng).unwrap();
        assert_eq!(next.trees(), pop.trees());
        assert_eq!(next.generation(), 5);
    }

    #[test]
    fn evolve_with_zero_weights_replaces_all_non_founders() {
        let pop = Population::new(vec![t("X1"), t("X2"), t("X3 & X4"), t("X5")], 1, 1).unwrap();
        let mut cfg = GmjmcmcConfig::preset("3").unwrap();
        cfg.d = 4;
        cfg.k_max = 2;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let next = evolve(&pop, &[0.0; 4], &cfg, 10, &mut rng).unwrap();
        assert_eq!(next.d(), 4);
        assert_eq!(next.tree(0), &t("X1"));
        for j in 1..4 {
            assert!(!pop.keys().contains(next.key(j)));
            assert!(next.tree(j).size() <= cfg.c_max);
        }
    }

    fn toy_data(seed: u64) -> Dataset<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 300;
        let rows: Vec<Vec<bool>> = (0..n).map(|_| (0..8).map(|_| rng.gen_bool(0.5)).collect()).collect();
        let y = rows
            .iter()
            .map(|r| 1.0 + if r[0] && r[2] { 2.0 } else { 0.0 } + rng.gen_range(-1.0..1.0))
            .collect();
        Dataset::from_rows(&rows, y, Family::Gaussian).unwrap()
    }

    fn small_cfg() -> GmjmcmcConfig {
        let mut cfg = GmjmcmcConfig::preset("4").unwrap();
        cfg.n_init = 60;
        cfg.n_expl = 60;
        cfg.m_fin = 200;
        cfg.t_max = 4;
        cfg.d = 8;
        cfg.k_max = 4;
        cfg.c_max = 3;
        cfg
    }

    #[test]
    fn chain_is_deterministic_and_keeps_founders() {
        let data = toy_data(4);
        let cfg = small_cfg();
        let ctx = DataContext::new(&data, PriorKind::Jeffreys, RobustGConfig::default(), cfg.prior_cfg(8).unwrap());
        let a = run_chain(&ctx, &cfg, 11).unwrap();
        let b = run_chain(&ctx, &cfg, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.generations, 4);
        assert!(a.n_founders <= cfg.d - cfg.k_max);
        assert!(a.trees.iter().all(|t| (0.0..=1.0).contains(&t.probability)));
        assert!(a.log_mass.is_finite());
    }

    #[test]
    fn single_generation_is_plain_mjmcmc() {
        let data = toy_data(5);
        let mut cfg = small_cfg();
        cfg.t_max = 1;
        let ctx = DataContext::new(&data, PriorKind::Jeffreys, RobustGConfig::default(), cfg.prior_cfg(8).unwrap());
        let s = run_chain(&ctx, &cfg, 1).unwrap();
        assert_eq!(s.generations, 1);
        assert_eq!(s.final_population.generation, 1);
    }

    #[test]
    fn random_initial_population() {
        let data = toy_data(6);
        let mut cfg = small_cfg();
        cfg.random_init = true;
        let ctx = DataContext::new(&data, PriorKind::Jeffreys, RobustGConfig::default(), cfg.prior_cfg(8).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pop = initialize(&ctx, &cfg, &mut rng, &mut MarglikCache::new()).unwrap();
        assert_eq!(pop.d(), cfg.d);
        assert_eq!(pop.n_founders(), 0);
        assert!(pop.max_tree_size() <= cfg.c_max);
    }
}

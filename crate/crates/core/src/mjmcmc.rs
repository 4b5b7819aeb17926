//! Mode-jumping MCMC over model indices of a fixed population.
//!
//! The kernel mixes single-bit Metropolis-Hastings flips with mode jumps: a
//! large random flip, greedy ascent to a local mode, then a small random
//! perturbation. The backward leg repeats the same flip set and ascent from
//! the proposal, so the large-jump and optimization parts cancel in the
//! acceptance ratio.
//!
//! Posterior estimates never use visit frequencies. Every scored model goes
//! into a [`PosteriorStore`], and probabilities are renormalized over the
//! stored models.

use indexmap::IndexMap;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model_space::ModelIndex;
use crate::num::{log_add_exp, log_sum_exp};
use crate::score::{ModelScore, ModelScorer};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MjmcmcError {
    #[error("posterior store is empty")]
    EmptyStore,
    #[error("every stored model has zero posterior mass")]
    NoMass,
    #[error("invalid chain configuration: {0}")]
    InvalidConfig(String),
    #[error("initial model has length {got}, population has {d} trees")]
    InitLength { got: usize, d: usize },
}

/// Stored values for one visited model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub log_marglik: f64,
    pub log_prior: f64,
    pub log_post: f64,
}

impl From<ModelScore> for ModelRecord {
    fn from(s: ModelScore) -> Self {
        Self {
            log_marglik: s.log_marglik,
            log_prior: s.log_prior,
            log_post: s.log_post(),
        }
    }
}

/// Distinct visited models with their unnormalized log posteriors and the
/// running log of their total mass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PosteriorStore {
    entries: IndexMap<ModelIndex, ModelRecord>,
    log_mass: f64,
}

impl PosteriorStore {
    pub fn new() -> Self {
        Self {
            entries: IndexMap::new(),
            log_mass: f64::NEG_INFINITY,
        }
    }

    /// Records `model` unless already present. Returns `true` on insertion.
    pub fn insert(&mut self, model: ModelIndex, record: ModelRecord) -> bool {
        if self.entries.contains_key(&model) {
            return false;
        }
        self.log_mass = log_add_exp(self.log_mass, record.log_post);
        self.entries.insert(model, record);
        true
    }

    pub fn get(&self, model: &ModelIndex) -> Option<&ModelRecord> {
        self.entries.get(model)
    }

    pub fn contains(&self, model: &ModelIndex) -> bool {
        self.entries.contains_key(model)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Log of the summed unnormalized posterior over stored models.
    pub fn log_mass(&self) -> f64 {
        self.log_mass
    }

    /// The same quantity recomputed from scratch.
    pub fn recompute_log_mass(&self) -> f64 {
        let v: Vec<f64> = self.entries.values().map(|r| r.log_post).collect();
        log_sum_exp(&v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ModelIndex, &ModelRecord)> {
        self.entries.iter()
    }

    /// Posterior probabilities renormalized over the stored models, in
    /// insertion order.
    pub fn renormalized_posterior(&self) -> Result<Vec<(ModelIndex, f64)>, MjmcmcError> {
        if self.entries.is_empty() {
            return Err(MjmcmcError::EmptyStore);
        }
        let total = self.recompute_log_mass();
        if total == f64::NEG_INFINITY {
            return Err(MjmcmcError::NoMass);
        }
        Ok(self
            .entries
            .iter()
            .map(|(m, r)| (m.clone(), (r.log_post - total).exp()))
            .collect())
    }

    /// Marginal inclusion probability of each of the `d` population trees.
    /// All zeros when no stored model has positive mass.
    pub fn inclusion_probs(&self, d: usize) -> Vec<f64> {
        let mut out = vec![0.0; d];
        let Ok(post) = self.renormalized_posterior() else {
            return out;
        };
        for (m, p) in post {
            for j in m.included() {
                out[j] += p;
            }
        }
        for v in &mut out {
            *v = v.min(1.0);
        }
        out
    }
}

/// Chain tuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MjmcmcConfig {
    /// Probability that a step is a mode jump rather than a single flip.
    pub p_jump: f64,
    /// Jump size range; `None` means `ceil(d/4)` and `ceil(d/2)`.
    pub jump_min: Option<usize>,
    pub jump_max: Option<usize>,
    /// Greedy ascent step cap; `None` means `2d`.
    pub ascent_cap: Option<usize>,
    /// Per-bit flip probability of the randomization kernel after ascent.
    pub p_randomize: f64,
}

impl Default for MjmcmcConfig {
    fn default() -> Self {
        Self {
            p_jump: 0.05,
            jump_min: None,
            jump_max: None,
            ascent_cap: None,
            p_randomize: 0.1,
        }
    }
}

impl MjmcmcConfig {
    pub fn validate(&self) -> Result<(), MjmcmcError> {
        for (name, p) in [("p_jump", self.p_jump), ("p_randomize", self.p_randomize)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(MjmcmcError::InvalidConfig(format!("{name} = {p} is not in [0, 1]")));
            }
        }
        if self.p_randomize >= 1.0 {
            return Err(MjmcmcError::InvalidConfig("p_randomize must be below 1".into()));
        }
        if let (Some(a), Some(b)) = (self.jump_min, self.jump_max) {
            if a > b || a == 0 {
                return Err(MjmcmcError::InvalidConfig(format!("jump range [{a}, {b}] is empty")));
            }
        }
        Ok(())
    }

    /// Effective jump size range for `d` trees, clamped to `1..=d`.
    pub fn jump_range(&self, d: usize) -> (usize, usize) {
        let hi = self.jump_max.unwrap_or(d.div_ceil(2)).clamp(1, d.max(1));
        let lo = self.jump_min.unwrap_or(d.div_ceil(4)).clamp(1, hi);
        (lo, hi)
    }

    pub fn ascent_steps(&self, d: usize) -> usize {
        self.ascent_cap.unwrap_or(2 * d)
    }
}

/// When to stop a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Budget {
    Steps(usize),
    /// Run until `target` distinct models are stored or `max_steps` elapse.
    UniqueModels { target: usize, max_steps: usize },
}

/// Outcome of one transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub accepted: bool,
    /// Log of the Metropolis-Hastings ratio (`+inf` from a zero-mass state).
    pub log_ratio: f64,
    pub mode_jump: bool,
}

/// One mode-jumping chain over a fixed population.
pub struct MjmcmcChain<'s, S: ModelScorer, R: Rng> {
    scorer: &'s mut S,
    rng: &'s mut R,
    cfg: MjmcmcConfig,
    store: PosteriorStore,
    state: ModelIndex,
    state_post: f64,
    steps: usize,
}

impl<'s, S: ModelScorer, R: Rng> MjmcmcChain<'s, S, R> {
    pub fn new(
        scorer: &'s mut S,
        rng: &'s mut R,
        cfg: MjmcmcConfig,
        init: ModelIndex,
        store: PosteriorStore,
    ) -> Result<Self, MjmcmcError> {
        cfg.validate()?;
        if init.len() != scorer.d() {
            return Err(MjmcmcError::InitLength {
                got: init.len(),
                d: scorer.d(),
            });
        }
        let mut chain = Self {
            scorer,
            rng,
            cfg,
            store,
            state: init.clone(),
            state_post: f64::NEG_INFINITY,
            steps: 0,
        };
        chain.state_post = chain.evaluate(&init);
        Ok(chain)
    }

    pub fn state(&self) -> &ModelIndex {
        &self.state
    }

    pub fn state_log_post(&self) -> f64 {
        self.state_post
    }

    pub fn store(&self) -> &PosteriorStore {
        &self.store
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn into_parts(self) -> (ModelIndex, PosteriorStore) {
        (self.state, self.store)
    }

    fn d(&self) -> usize {
        self.state.len()
    }

    fn excess(&self, m: &ModelIndex) -> usize {
        m.size().saturating_sub(self.scorer.k_max())
    }

    /// Log posterior of `m`, scoring and storing it on first sight. Models
    /// over `k_max` are never scored or stored.
    pub fn evaluate(&mut self, m: &ModelIndex) -> f64 {
        if self.excess(m) > 0 {
            return f64::NEG_INFINITY;
        }
        if let Some(r) = self.store.get(m) {
            return r.log_post;
        }
        let s = self.scorer.score(m);
        if s.log_prior == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let r = ModelRecord::from(s);
        self.store.insert(m.clone(), r);
        r.log_post
    }

    fn accept(&mut self, log_ratio: f64, proposal_post: f64) -> bool {
        if proposal_post == f64::NEG_INFINITY {
            return false;
        }
        if self.state_post == f64::NEG_INFINITY || log_ratio >= 0.0 {
            return true;
        }
        self.rng.gen::<f64>() < log_ratio.exp()
    }

    /// Mixture step: a mode jump with probability `p_jump`, else a flip.
    pub fn step(&mut self) -> StepOutcome {
        self.steps += 1;
        if self.d() == 0 {
            return StepOutcome {
                accepted: false,
                log_ratio: 0.0,
                mode_jump: false,
            };
        }
        if self.rng.gen::<f64>() < self.cfg.p_jump {
            self.mode_jump_step()
        } else {
            self.small_flip_step()
        }
    }

    /// Flips one uniformly chosen bit and accepts by the posterior ratio.
    pub fn small_flip_step(&mut self) -> StepOutcome {
        let j = self.rng.gen_range(0..self.d());
        let proposal = self.state.flipped(j);
        let post = self.evaluate(&proposal);
        let log_ratio = post - self.state_post;
        let log_ratio = if log_ratio.is_nan() { f64::INFINITY } else { log_ratio };
        let accepted = self.accept(log_ratio, post);
        if accepted {
            self.state = proposal;
            self.state_post = post;
        }
        StepOutcome {
            accepted,
            log_ratio,
            mode_jump: false,
        }
    }

    /// Large jump, greedy ascent, randomization, and the symmetric backward
    /// construction for the acceptance ratio.
    pub fn mode_jump_step(&mut self) -> StepOutcome {
        let d = self.d();
        let (lo, hi) = self.cfg.jump_range(d);
        let k = self.rng.gen_range(lo..=hi);
        let subset: Vec<usize> = sample(self.rng, d, k).into_vec();

        let jumped = flip_all(&self.state, &subset);
        let mode = self.ascend(jumped);
        let proposal = self.randomize(&mode);
        let post = self.evaluate(&proposal);

        let back_mode = self.ascend(flip_all(&proposal, &subset));
        let p = self.cfg.p_randomize;
        let log_q_forward = log_flip_density(mode.distance(&proposal), d, p);
        let log_q_backward = log_flip_density(back_mode.distance(&self.state), d, p);
        let log_ratio = post + log_q_backward - self.state_post - log_q_forward;
        let log_ratio = if log_ratio.is_nan() { f64::INFINITY } else { log_ratio };
        let accepted = self.accept(log_ratio, post);
        if accepted {
            self.state = proposal;
            self.state_post = post;
        }
        StepOutcome {
            accepted,
            log_ratio,
            mode_jump: true,
        }
    }

    /// Best-neighbour ascent from `start`. Infeasible models rank below
    /// feasible ones by how many trees they exceed `k_max`, so the ascent
    /// walks back into the feasible region. Ties go to the lowest index.
    pub fn ascend(&mut self, start: ModelIndex) -> ModelIndex {
        let cap = self.cfg.ascent_steps(self.d());
        let mut cur_rank = (self.excess(&start), self.evaluate(&start));
        let mut cur = start;
        for _ in 0..cap {
            let mut best: Option<(usize, (usize, f64))> = None;
            for j in 0..self.d() {
                let nb = cur.flipped(j);
                let rank = (self.excess(&nb), self.evaluate(&nb));
                let better = match best {
                    None => true,
                    Some((_, b)) => ranks_above(rank, b),
                };
                if better {
                    best = Some((j, rank));
                }
            }
            match best {
                Some((j, rank)) if ranks_above(rank, cur_rank) => {
                    cur.flip(j);
                    cur_rank = rank;
                }
                _ => break,
            }
        }
        cur
    }

    fn randomize(&mut self, m: &ModelIndex) -> ModelIndex {
        let mut out = m.clone();
        for j in 0..self.d() {
            if self.rng.gen::<f64>() < self.cfg.p_randomize {
                out.flip(j);
            }
        }
        out
    }

    pub fn run(&mut self, budget: Budget) {
        match budget {
            Budget::Steps(n) => {
                for _ in 0..n {
                    self.step();
                }
            }
            Budget::UniqueModels { target, max_steps } => {
                let mut taken = 0;
                while self.store.len() < target && taken < max_steps {
                    self.step();
                    taken += 1;
                }
            }
        }
    }
}

/// `a` strictly better than `b`: fewer excess trees, then higher score.
fn ranks_above(a: (usize, f64), b: (usize, f64)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 > b.1)
}

fn flip_all(m: &ModelIndex, subset: &[usize]) -> ModelIndex {
    let mut out = m.clone();
    for &j in subset {
        out.flip(j);
    }
    out
}

/// Log density of reaching a point at Hamming distance `h` under
/// independent per-bit flips with probability `p`.
fn log_flip_density(h: usize, d: usize, p: f64) -> f64 {
    if p == 0.0 {
        return if h == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    h as f64 * p.ln() + (d - h) as f64 * (1.0 - p).ln()
}

/// Number of models with at most `k_max` of `d` trees, saturating.
pub fn feasible_model_count(d: usize, k_max: usize) -> usize {
    let mut total: u128 = 0;
    let mut c: u128 = 1;
    for k in 0..=k_max.min(d) {
        total = total.saturating_add(c);
        c = c.saturating_mul((d - k) as u128) / (k as u128 + 1);
    }
    total.min(usize::MAX as u128) as usize
}

/// Runs a chain from `init` for the given budget and returns the last state
/// and the store.
pub fn run<S: ModelScorer, R: Rng>(
    scorer: &mut S,
    init: ModelIndex,
    budget: Budget,
    cfg: MjmcmcConfig,
    rng: &mut R,
) -> Result<(ModelIndex, PosteriorStore), MjmcmcError> {
    let mut chain = MjmcmcChain::new(scorer, rng, cfg, init, PosteriorStore::new())?;
    chain.run(budget);
    Ok(chain.into_parts())
}

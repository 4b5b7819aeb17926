//! Simulation scenarios, detection-quality metrics with the false-positive
//! taxonomy, and power sweeps over one scenario parameter.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitVector;
use crate::data::{DataError, Dataset, Family};
use crate::gmjmcmc::{aggregate, detect, run_chains, GmjmcmcConfig, GmjmcmcError};
use crate::likelihood::{PriorKind, RobustGConfig};
use crate::logic_tree::{CanonicalKey, LogicTree};
use crate::parallel::{derive_seed, parallel_map};
use crate::score::DataContext;

/// Covariate count of the built-in scenarios.
pub const SCENARIO_M: usize = 50;
/// Default simulated sample size.
pub const SCENARIO_N: usize = 1000;

const DATA_STREAM: u64 = 0xDA7A;
const RUN_STREAM: u64 = 0x5EED;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("unknown scenario {0}; expected 1 to 6")]
    UnknownScenario(u32),
    #[error("sample size must be at least 2, got {0}")]
    SampleSize(usize),
    #[error("need at least one replicate")]
    NoReplicates,
    #[error("grid must be nonempty and nondecreasing")]
    BadGrid,
    #[error("{axis} value {value} is not usable")]
    BadGridValue { axis: SweepAxis, value: f64 },
    #[error("scenario trees use covariate {needed} but m = {m}")]
    TooFewCovariates { needed: usize, m: usize },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Engine(#[from] GmjmcmcError),
}

/// A data-generating logic regression model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: u32,
    pub family: Family,
    /// Bernoulli rate of every covariate.
    pub rate: f64,
    pub m: usize,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    #[serde(with = "tree_text")]
    pub trees: Vec<LogicTree>,
    /// Error standard deviation for gaussian responses.
    pub sigma: f64,
    /// Index of a disjunctive tree and its conjunctive expansion terms, which
    /// together express the same effect additively.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub equivalence: Option<Equivalence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equivalence {
    pub tree: usize,
    #[serde(with = "tree_text")]
    pub components: Vec<LogicTree>,
}

mod tree_text {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::logic_tree::LogicTree;

    pub fn serialize<S: Serializer>(trees: &[LogicTree], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(trees.iter().map(ToString::to_string))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<LogicTree>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|s| s.parse().map_err(serde::de::Error::custom))
            .collect()
    }
}

fn tree(s: &str) -> LogicTree {
    s.parse().expect("built-in scenario tree")
}

impl Scenario {
    /// The six built-in scenarios.
    pub fn builtin(id: u32) -> Result<Self, BenchError> {
        let (family, rate, intercept, coefficients, trees): (Family, f64, f64, Vec<f64>, Vec<&str>) = match id {
            1 => (
                Family::Binomial,
                0.3,
                -0.7,
                vec![1.0, 1.0, 1.0],
                vec!["!X1 & X4", "X5 & X9", "X11 & X8"],
            ),
            2 => (
                Family::Binomial,
                0.3,
                -0.45,
                vec![0.6, 0.6, 0.6],
                vec!["!X1 & X4", "X5 & X9", "X11 & X8"],
            ),
            3 => (
                Family::Binomial,
                0.5,
                0.4,
                vec![-5.0, 9.0, -9.0],
                vec!["X2 & X9", "X7 & X12 & X20", "X4 & X10 & X17 & X30"],
            ),
            4 => (
                Family::Gaussian,
                0.5,
                1.0,
                vec![1.43, 0.89, 0.7],
                vec!["X5 & X9", "X8 & X11", "X1 & X4"],
            ),
            5 => (
                Family::Gaussian,
                0.5,
                1.0,
                vec![1.5, 3.5, 9.0, 7.0],
                vec!["X37", "X2 & X9", "X7 & X12 & X20", "X4 & X10 & X17 & X30"],
            ),
            6 => (
                Family::Gaussian,
                0.5,
                1.0,
                vec![1.5, 1.5, 6.6, 3.5, 9.0, 7.0, 7.0, 7.0],
                vec![
                    "X7",
                    "X8",
                    "X2 & X9",
                    "X18 & X21",
                    "X1 & X3 & X27",
                    "X12 & X20 & X37",
                    "X4 & X10 & X17 & X30",
                    "(X11 & X13) | (X19 & X50)",
                ],
            ),
            other => return Err(BenchError::UnknownScenario(other)),
        };
        let equivalence = (id == 6).then(|| Equivalence {
            tree: 7,
            components: vec![tree("X11 & X13"), tree("X19 & X50"), tree("X11 & X13 & X19 & X50")],
        });
        Ok(Self {
            id,
            family,
            rate,
            m: SCENARIO_M,
            intercept,
            coefficients,
            trees: trees.into_iter().map(tree).collect(),
            sigma: 1.0,
            equivalence,
        })
    }

    /// Same scenario with coefficient `j` replaced.
    pub fn with_coefficient(mut self, j: usize, beta: f64) -> Self {
        self.coefficients[j] = beta;
        self
    }

    /// Same scenario over a different number of covariates.
    pub fn with_m(mut self, m: usize) -> Result<Self, BenchError> {
        let needed = self.trees.iter().map(|t| t.max_index() + 1).max().unwrap_or(0);
        if m < needed {
            return Err(BenchError::TooFewCovariates { needed, m });
        }
        self.m = m;
        Ok(self)
    }

    fn true_keys(&self) -> Vec<CanonicalKey> {
        self.trees
            .iter()
            .map(|t| t.canonical_key().expect("small true tree").polarity_free())
            .collect()
    }

    /// Linear predictor for one covariate row.
    pub fn linear_predictor(&self, row: &[bool]) -> f64 {
        self.trees.iter().zip(&self.coefficients).fold(self.intercept, |acc, (t, b)| {
            acc + if t.evaluate(row).expect("row covers scenario leaves") {
                *b
            } else {
                0.0
            }
        })
    }
}

/// Simulates `n` rows of the scenario.
pub fn generate(scenario: &Scenario, n: usize, seed: u64) -> Result<Dataset<f64>, BenchError> {
    if n < 2 {
        return Err(BenchError::SampleSize(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<bool>> = (0..n)
        .map(|_| (0..scenario.m).map(|_| rng.gen_bool(scenario.rate)).collect())
        .collect();
    let y = rows
        .iter()
        .map(|row| {
            let eta = scenario.linear_predictor(row);
            match scenario.family {
                Family::Binomial => f64::from(u8::from(rng.gen::<f64>() < 1.0 / (1.0 + (-eta).exp()))),
                Family::Gaussian => eta + scenario.sigma * rng.sample::<f64, _>(StandardNormal),
            }
        })
        .collect();
    let columns = (0..scenario.m)
        .map(|j| BitVector::from_bools(rows.iter().map(|r| r[j])))
        .collect();
    Ok(Dataset::new(columns, y, scenario.family)?)
}

/// Outcome class of a detected tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Class {
    /// Equivalent to true tree `j` or its complement.
    TruePositive(usize),
    /// Built only from leaves of true tree `j`.
    WithinTree(usize),
    /// Built only from leaves of the data-generating model.
    WithinModel,
    /// Holds this many leaves outside the data-generating model.
    WrongLeaves(usize),
}

impl Class {
    pub fn is_true_positive(self) -> bool {
        matches!(self, Class::TruePositive(_))
    }
}

/// Classifies a detected tree against the scenario's true trees.
pub fn classify(detected: &LogicTree, scenario: &Scenario) -> Class {
    let Ok(key) = detected.canonical_key() else {
        return classify_leaves(&detected.leaf_set(), scenario);
    };
    let key = key.polarity_free();
    if let Some(j) = scenario.true_keys().iter().position(|k| *k == key) {
        return Class::TruePositive(j);
    }
    classify_leaves(&key.leaves().collect::<Vec<_>>(), scenario)
}

fn classify_leaves(leaves: &[usize], scenario: &Scenario) -> Class {
    let sets: Vec<Vec<usize>> = scenario.trees.iter().map(LogicTree::leaf_set).collect();
    if let Some(j) = sets.iter().position(|s| leaves.iter().all(|l| s.contains(l))) {
        return Class::WithinTree(j);
    }
    let wrong = leaves.iter().filter(|l| !sets.iter().any(|s| s.contains(l))).count();
    if wrong == 0 {
        Class::WithinModel
    } else {
        Class::WrongLeaves(wrong)
    }
}

/// Detection-quality summary over replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub scenario: u32,
    pub replicates: usize,
    pub hits: Vec<usize>,
    pub power: Vec<f64>,
    pub overall_power: f64,
    pub fp_mean: f64,
    pub fdr: f64,
    /// Wrong leaves summed over all detections and replicates.
    pub wl_total: usize,
    /// `v(L_j)` tallies, one per true tree.
    pub within_tree: Vec<usize>,
    /// `v(M)` tally.
    pub within_model: usize,
    /// `WL(1)`, `WL(2)`, `WL(3+)` tallies.
    pub wrong_leaves: [usize; 3],
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub equivalence: Option<EquivalenceReport>,
}

/// Figures recomputed with the equivalence rule applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub tree: usize,
    pub raw_power: f64,
    pub adjusted_power: f64,
    pub overall_power: f64,
    pub fp_mean: f64,
    pub fdr: f64,
}

struct Tally {
    hits: Vec<usize>,
    fp_sum: usize,
    fdr_sum: f64,
}

/// Scores per-replicate detection lists.
pub fn score_runs(
    detections: &[Vec<LogicTree>],
    scenario: &Scenario,
    l8_equivalence: bool,
) -> Result<DetectionReport, BenchError> {
    if detections.is_empty() {
        return Err(BenchError::NoReplicates);
    }
    let k = scenario.trees.len();
    let n_rep = detections.len();
    let mut raw = Tally {
        hits: vec![0; k],
        fp_sum: 0,
        fdr_sum: 0.0,
    };
    let mut adj = Tally {
        hits: vec![0; k],
        fp_sum: 0,
        fdr_sum: 0.0,
    };
    let mut within_tree = vec![0; k];
    let mut within_model = 0;
    let mut wrong_leaves = [0; 3];
    let mut wl_total = 0;
    let component_keys: Vec<CanonicalKey> = scenario
        .equivalence
        .iter()
        .flat_map(|e| &e.components)
        .map(|t| t.canonical_key().expect("small component").polarity_free())
        .collect();

    for replicate in detections {
        let classes: Vec<Class> = replicate.iter().map(|t| classify(t, scenario)).collect();
        let mut found = vec![false; k];
        for c in &classes {
            match *c {
                Class::TruePositive(j) => found[j] = true,
                Class::WithinTree(j) => within_tree[j] += 1,
                Class::WithinModel => within_model += 1,
                Class::WrongLeaves(s) => {
                    wrong_leaves[s.min(3) - 1] += 1;
                    wl_total += s;
                }
            }
        }
        let fp = classes.iter().filter(|c| !c.is_true_positive()).count();
        for (h, f) in raw.hits.iter_mut().zip(&found) {
            *h += usize::from(*f);
        }
        raw.fp_sum += fp;
        raw.fdr_sum += ratio(fp, replicate.len());

        let mut adj_found = found.clone();
        let (mut adj_fp, mut adj_total) = (fp, replicate.len());
        if let Some(eq) = scenario.equivalence.as_ref().filter(|_| l8_equivalence) {
            let keys: Vec<Option<CanonicalKey>> = replicate
                .iter()
                .map(|t| t.canonical_key().ok().map(|k| k.polarity_free()))
                .collect();
            let all = component_keys.iter().all(|c| keys.iter().any(|k| k.as_ref() == Some(c)));
            if all {
                let n_components = keys
                    .iter()
                    .filter(|k| k.as_ref().is_some_and(|k| component_keys.contains(k)))
                    .count();
                adj_fp -= n_components;
                // the components together form one discovery unless the tree
                // itself was already detected
                adj_total -= n_components;
                if !found[eq.tree] {
                    adj_total += 1;
                }
                adj_found[eq.tree] = true;
            }
        }
        for (h, f) in adj.hits.iter_mut().zip(&adj_found) {
            *h += usize::from(*f);
        }
        adj.fp_sum += adj_fp;
        adj.fdr_sum += ratio(adj_fp, adj_total);
    }

    let per = |hits: &[usize]| -> Vec<f64> { hits.iter().map(|&h| h as f64 / n_rep as f64).collect() };
    let mean = |p: &[f64]| p.iter().sum::<f64>() / p.len().max(1) as f64;
    let power = per(&raw.hits);
    let equivalence = scenario.equivalence.as_ref().filter(|_| l8_equivalence).map(|eq| {
        let adj_power = per(&adj.hits);
        EquivalenceReport {
            tree: eq.tree,
            raw_power: power[eq.tree],
            adjusted_power: adj_power[eq.tree],
            overall_power: mean(&adj_power),
            fp_mean: adj.fp_sum as f64 / n_rep as f64,
            fdr: adj.fdr_sum / n_rep as f64,
        }
    });
    Ok(DetectionReport {
        scenario: scenario.id,
        replicates: n_rep,
        overall_power: mean(&power),
        power,
        hits: raw.hits,
        fp_mean: raw.fp_sum as f64 / n_rep as f64,
        fdr: raw.fdr_sum / n_rep as f64,
        wl_total,
        within_tree,
        within_model,
        wrong_leaves,
        equivalence,
    })
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Settings shared by benchmark replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub n: usize,
    pub replicates: usize,
    pub prior: PriorKind,
    pub threshold: f64,
    pub seed: u64,
    pub engine: GmjmcmcConfig,
}

/// One simulated replicate's detections.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateResult {
    pub data_seed: u64,
    pub detections: Vec<(LogicTree, f64)>,
    pub models_visited: usize,
}

/// Simulates one dataset and runs all chains on it.
pub fn run_replicate(
    scenario: &Scenario,
    cfg: &BenchConfig,
    replicate: usize,
    threads: usize,
) -> Result<ReplicateResult, BenchError> {
    let data_seed = derive_seed(cfg.seed, DATA_STREAM, replicate as u64);
    let data = generate(scenario, cfg.n, data_seed)?;
    let mut engine = cfg.engine.clone();
    engine.seed = derive_seed(cfg.seed, RUN_STREAM, replicate as u64);
    let ctx = DataContext::new(&data, cfg.prior, RobustGConfig::default(), engine.prior_cfg(data.m())?);
    let summaries = run_chains(&ctx, &engine, threads)?;
    let agg = aggregate(&summaries)?;
    let detections = detect(&agg, cfg.threshold)?
        .into_iter()
        .map(|t| (t.tree, t.probability))
        .collect();
    Ok(ReplicateResult {
        data_seed,
        detections,
        models_visited: summaries.iter().map(|s| s.models_visited).sum(),
    })
}

/// Runs every replicate; replicates are spread over the worker threads.
pub fn run_replicates(
    scenario: &Scenario,
    cfg: &BenchConfig,
    threads: usize,
) -> Result<Vec<ReplicateResult>, BenchError> {
    if cfg.replicates == 0 {
        return Err(BenchError::NoReplicates);
    }
    cfg.engine.validate()?;
    let outer = threads.min(cfg.replicates).max(1);
    let inner = (threads / outer).max(1);
    parallel_map(cfg.replicates, outer, |r| run_replicate(scenario, cfg, r, inner))
        .into_iter()
        .collect()
}

/// Benchmark: replicates plus their scored report.
pub fn bench(
    scenario: &Scenario,
    cfg: &BenchConfig,
    threads: usize,
) -> Result<(DetectionReport, Vec<ReplicateResult>), BenchError> {
    let results = run_replicates(scenario, cfg, threads)?;
    let lists: Vec<Vec<LogicTree>> = results
        .iter()
        .map(|r| r.detections.iter().map(|(t, _)| t.clone()).collect())
        .collect();
    let report = score_runs(&lists, scenario, scenario.equivalence.is_some())?;
    Ok((report, results))
}

/// Parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    /// Coefficient of the four-way tree in scenario 5.
    Beta4,
    /// Sample size.
    N,
    /// Population size.
    D,
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepAxis::Beta4 => "beta4",
            SweepAxis::N => "n",
            SweepAxis::D => "d",
        })
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "beta4" | "b4" => Ok(SweepAxis::Beta4),
            "n" => Ok(SweepAxis::N),
            "d" => Ok(SweepAxis::D),
            other => Err(format!("unknown sweep axis {other:?}; expected beta4, n or d")),
        }
    }
}

/// Power of one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub value: f64,
    pub power: f64,
    pub replicates: usize,
}

/// Index of the four-way tree in scenario 5.
pub const SWEEP_TREE: usize = 3;

/// Power to detect scenario 5's four-way tree across a grid.
pub fn sweep(axis: SweepAxis, grid: &[f64], cfg: &BenchConfig, threads: usize) -> Result<Vec<CurvePoint>, BenchError> {
    if grid.is_empty() || grid.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(BenchError::BadGrid);
    }
    let base = Scenario::builtin(5)?;
    grid.iter()
        .enumerate()
        .map(|(i, &value)| {
            let mut scenario = base.clone();
            let mut point_cfg = cfg.clone();
            point_cfg.seed = derive_seed(cfg.seed, 0x5EE9, i as u64);
            let as_count = || -> Result<usize, BenchError> {
                if value >= 1.0 && value.fract() == 0.0 {
                    Ok(value as usize)
                } else {
                    Err(BenchError::BadGridValue { axis, value })
                }
            };
            match axis {
                SweepAxis::Beta4 => scenario = scenario.with_coefficient(SWEEP_TREE, value),
                SweepAxis::N => point_cfg.n = as_count()?,
                SweepAxis::D => point_cfg.engine.d = as_count()?,
            }
            let results = run_replicates(&scenario, &point_cfg, threads)?;
            let hits = results
                .iter()
                .filter(|r| {
                    r.detections
                        .iter()
                        .any(|(t, _)| classify(t, &scenario) == Class::TruePositive(SWEEP_TREE))
                })
                .count();
            Ok(CurvePoint {
                value,
                power: hits as f64 / results.len() as f64,
                replicates: results.len(),
            })
        })
        .collect()
}

/// Engine settings used by sweeps: the scenario-5 tuning with a larger
/// model-size cap and population.
pub fn sweep_engine_config() -> GmjmcmcConfig {
    let mut cfg = GmjmcmcConfig::preset("5").expect("built-in preset");
    cfg.k_max = 20;
    cfg.d = 40;
    cfg
}

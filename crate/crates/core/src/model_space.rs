//! Populations of candidate trees, model index vectors and the tree-complexity
//! model prior.
//!
//! The prior penalizes each included tree by `a^{c(L)}` with
//! `c(L) = log N(s(L))`, where `N(s) = C(m, s) 2^{2s-2}` counts the distinct
//! logic expressions with `s` leaves. Models with more than `k_max` trees or
//! any tree larger than `C_max` have prior mass zero.

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitVector;
use crate::logic_tree::{CanonicalKey, LogicTree, TreeError};
use crate::num::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelSpaceError {
    #[error("tree size {s} outside 1..={m}")]
    Domain { m: usize, s: usize },
    #[error("population members {first} and {second} compute the same function up to complement")]
    DuplicateKey { first: usize, second: usize },
    #[error("population member {0} is constant on every input")]
    ConstantTree(usize),
    #[error("founder at position {0} is not a single leaf")]
    FounderNotLeaf(usize),
    #[error("{founders} founders exceed population size {d}")]
    TooManyFounders { founders: usize, d: usize },
    #[error("model index has length {got}, population has {d} trees")]
    LengthMismatch { got: usize, d: usize },
    #[error("tree {position} is already in the model")]
    AlreadyIncluded { position: usize },
    #[error("adding tree {position} would exceed k_max = {k_max}")]
    ExceedsKMax { position: usize, k_max: usize },
    #[error("invalid prior configuration: {0}")]
    InvalidPrior(String),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// Number of distinct logic expressions with `s` leaves over `m` covariates,
/// `C(m, s) 2^{2s-2}`.
pub fn n_trees_of_size(m: usize, s: usize) -> Result<BigUint, ModelSpaceError> {
    if s < 1 || s > m {
        return Err(ModelSpaceError::Domain { m, s });
    }
    let mut c = BigUint::from(1u32);
    for i in 0..s {
        c = c * BigUint::from(m - i) / BigUint::from(i + 1);
    }
    Ok(c << (2 * s - 2))
}

/// `log N(s)` evaluated in floating point without forming the big integer.
pub fn log_n_trees<T: Real>(m: usize, s: usize) -> Result<T, ModelSpaceError> {
    if s < 1 || s > m {
        return Err(ModelSpaceError::Domain { m, s });
    }
    let log_binom = (0..s).fold(T::zero(), |acc, i| {
        acc + T::from_usize_lossy(m - i).ln() - T::from_usize_lossy(i + 1).ln()
    });
    Ok(log_binom + T::from_usize_lossy(2 * s - 2) * T::LN_2())
}

/// Parameters of the model prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    /// `log a`; the default `a = e^{-1}` is stored exactly as `-1`.
    pub log_a: f64,
    pub k_max: usize,
    pub c_max: usize,
    pub m: usize,
}

impl PriorConfig {
    /// Prior with the default penalty base `a = e^{-1}`.
    pub fn new(m: usize, k_max: usize, c_max: usize) -> Result<Self, ModelSpaceError> {
        let cfg = Self {
            log_a: -1.0,
            k_max,
            c_max,
            m,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_base(mut self, a: f64) -> Result<Self, ModelSpaceError> {
        if !(a > 0.0 && a < 1.0) {
            return Err(ModelSpaceError::InvalidPrior(format!("a = {a} is not in (0, 1)")));
        }
        self.log_a = a.ln();
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ModelSpaceError> {
        if !(self.log_a < 0.0 && self.log_a.is_finite()) {
            return Err(ModelSpaceError::InvalidPrior("a must lie in (0, 1)".into()));
        }
        if self.k_max == 0 || self.c_max == 0 {
            return Err(ModelSpaceError::InvalidPrior("k_max and C_max must be positive".into()));
        }
        if self.m == 0 {
            return Err(ModelSpaceError::InvalidPrior("m must be positive".into()));
        }
        Ok(())
    }

    /// `c(L) log a` for a tree of size `s`, or `-inf` when `s > C_max`.
    pub fn log_tree_penalty<T: Real>(&self, s: usize) -> T {
        if s > self.c_max || s > self.m || s == 0 {
            return T::neg_infinity();
        }
        let c: T = log_n_trees(self.m, s).expect("size checked");
        c * T::lit(self.log_a)
    }
}

/// The current search space: `d` trees whose first `n_founders` entries are
/// the protected single-leaf founders.
///
/// Members are deduplicated by the polarity-free canonical key, so a tree and
/// its complement never appear together.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    trees: Vec<LogicTree>,
    keys: Vec<CanonicalKey>,
    n_founders: usize,
    generation: usize,
}

impl Population {
    pub fn new(trees: Vec<LogicTree>, n_founders: usize, generation: usize) -> Result<Self, ModelSpaceError> {
        if n_founders > trees.len() {
            return Err(ModelSpaceError::TooManyFounders {
                founders: n_founders,
                d: trees.len(),
            });
        }
        if let Some(pos) = trees[..n_founders].iter().position(|t| !t.is_leaf()) {
            return Err(ModelSpaceError::FounderNotLeaf(pos));
        }
        let mut keys = Vec::with_capacity(trees.len());
        for (i, t) in trees.iter().enumerate() {
            let k = t.canonical_key()?.polarity_free();
            if k.is_constant() {
                return Err(ModelSpaceError::ConstantTree(i));
            }
            if let Some(first) = keys.iter().position(|other| other == &k) {
                return Err(ModelSpaceError::DuplicateKey { first, second: i });
            }
            keys.push(k);
        }
        Ok(Self {
            trees,
            keys,
            n_founders,
            generation,
        })
    }

    /// Population of all `m` single leaves, none protected.
    pub fn leaves(m: usize) -> Self {
        Self::new((0..m).map(LogicTree::leaf).collect(), 0, 0).expect("distinct leaves")
    }

    pub fn d(&self) -> usize {
        self.trees.len()
    }

    pub fn trees(&self) -> &[LogicTree] {
        &self.trees
    }

    pub fn tree(&self, i: usize) -> &LogicTree {
        &self.trees[i]
    }

    /// Polarity-free canonical keys, aligned with [`Population::trees`].
    pub fn keys(&self) -> &[CanonicalKey] {
        &self.keys
    }

    pub fn key(&self, i: usize) -> &CanonicalKey {
        &self.keys[i]
    }

    pub fn position_of(&self, key: &CanonicalKey) -> Option<usize> {
        let k = key.polarity_free();
        self.keys.iter().position(|x| x == &k)
    }

    pub fn n_founders(&self) -> usize {
        self.n_founders
    }

    pub fn founders(&self) -> &[LogicTree] {
        &self.trees[..self.n_founders]
    }

    /// Covariate indices of the founder leaves.
    pub fn founder_indices(&self) -> Vec<usize> {
        self.founders()
            .iter()
            .map(|t| match t {
                LogicTree::Leaf { index, .. } => *index,
                LogicTree::Node { .. } => unreachable!("founders are leaves"),
            })
            .collect()
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn max_tree_size(&self) -> usize {
        self.trees.iter().map(LogicTree::size).max().unwrap_or(0)
    }

    pub fn snapshot(&self, inclusion: &[f64]) -> PopulationSnapshot {
        PopulationSnapshot {
            generation: self.generation,
            trees: self.trees.iter().map(ToString::to_string).collect(),
            inclusion: inclusion.to_vec(),
        }
    }
}

/// JSON-friendly view of a population and its inclusion probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSnapshot {
    pub generation: usize,
    pub trees: Vec<String>,
    pub inclusion: Vec<f64>,
}

/// Indicator vector `γ` over the trees of a population.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModelIndex(BitVector);

impl ModelIndex {
    pub fn empty(d: usize) -> Self {
        Self(BitVector::zeros(d))
    }

    pub fn from_bits(bits: BitVector) -> Self {
        Self(bits)
    }

    pub fn from_positions(d: usize, positions: &[usize]) -> Self {
        let mut b = BitVector::zeros(d);
        for &p in positions {
            b.set(p, true);
        }
        Self(b)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `|M|`, the number of included trees.
    pub fn size(&self) -> usize {
        self.0.count_ones()
    }

    pub fn get(&self, j: usize) -> bool {
        self.0.get(j)
    }

    pub fn set(&mut self, j: usize, value: bool) {
        self.0.set(j, value)
    }

    pub fn flip(&mut self, j: usize) {
        self.0.flip(j)
    }

    pub fn flipped(&self, j: usize) -> Self {
        let mut m = self.clone();
        m.flip(j);
        m
    }

    pub fn included(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.ones_iter()
    }

    pub fn bits(&self) -> &BitVector {
        &self.0
    }

    /// Hamming distance between two indices of equal length.
    pub fn distance(&self, other: &Self) -> usize {
        self.0.xor(&other.0).count_ones()
    }
}

/// Unnormalized log prior of `model`: the sum of `c(L_j) log a` over included
/// trees, or `-inf` when the model breaks the `k_max` or `C_max` limits.
pub fn log_model_prior<T: Real>(
    model: &ModelIndex,
    pop: &Population,
    cfg: &PriorConfig,
) -> Result<T, ModelSpaceError> {
    if model.len() != pop.d() {
        return Err(ModelSpaceError::LengthMismatch {
            got: model.len(),
            d: pop.d(),
        });
    }
    if model.size() > cfg.k_max {
        return Ok(T::neg_infinity());
    }
    Ok(model
        .included()
        .map(|j| cfg.log_tree_penalty::<T>(pop.tree(j).size()))
        .fold(T::zero(), |a, b| a + b))
}

/// `log p(M') - log p(M)` where `M'` adds tree `j` to `model`.
pub fn prior_ratio<T: Real>(
    model: &ModelIndex,
    j: usize,
    pop: &Population,
    cfg: &PriorConfig,
) -> Result<T, ModelSpaceError> {
    if model.len() != pop.d() {
        return Err(ModelSpaceError::LengthMismatch {
            got: model.len(),
            d: pop.d(),
        });
    }
    if model.get(j) {
        return Err(ModelSpaceError::AlreadyIncluded { position: j });
    }
    if model.size() + 1 > cfg.k_max {
        return Err(ModelSpaceError::ExceedsKMax {
            position: j,
            k_max: cfg.k_max,
        });
    }
    Ok(cfg.log_tree_penalty(pop.tree(j).size()))
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use num_traits::ToPrimitive;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::logic_tree::Op;

    fn t(s: &str) -> LogicTree {
        s.parse().unwrap()
    }

    /// Polarity-free keys of left-deep chains over sorted leaf subsets, each
    /// leaf optionally negated and every operator AND or OR.
    fn chain_count(m: usize, s: usize) -> usize {
        let mut keys = HashSet::new();
        for subset in subsets(m, s) {
            for neg in 0..1u32 << s {
                for ops in 0..1u32 << (s - 1) {
                    let leaf = |p: usize| LogicTree::Leaf {
                        index: subset[p],
                        negated: (neg >> p) & 1 == 1,
                    };
                    let mut tree = leaf(0);
                    for p in 1..s {
                        let op = if (ops >> (p - 1)) & 1 == 1 { Op::Or } else { Op::And };
                        tree = LogicTree::join(op, tree, leaf(p));
                    }
                    keys.insert(tree.canonical_key().unwrap().polarity_free());
                }
            }
        }
        keys.len()
    }

    fn subsets(m: usize, s: usize) -> Vec<Vec<usize>> {
        (0..1u32 << m)
            .filter(|b| b.count_ones() as usize == s)
            .map(|b| (0..m).filter(|j| (b >> j) & 1 == 1).collect())
            .collect()
    }

    #[test]
    fn tree_counts() {
        assert_eq!(n_trees_of_size(50, 1).unwrap(), BigUint::from(50u32));
        assert_eq!(n_trees_of_size(50, 2).unwrap(), BigUint::from(4900u32));
        assert_eq!(n_trees_of_size(4, 2).unwrap(), BigUint::from(24u32));
        assert_eq!(n_trees_of_size(4, 0), Err(ModelSpaceError::Domain { m: 4, s: 0 }));
        assert_eq!(n_trees_of_size(4, 5), Err(ModelSpaceError::Domain { m: 4, s: 5 }));
        let big = n_trees_of_size(2000, 5).unwrap();
        assert!(big.to_f64().unwrap() > 1e16);
    }

    #[test]
    fn two_leaf_count_matches_truth_table_enumeration() {
        // every Boolean function of exactly two variables except XOR/XNOR,
        // paired with its complement
        let mut classes = HashSet::new();
        for table in 0u8..16 {
            let f = |a: bool, b: bool| (table >> ((a as u8) | ((b as u8) << 1))) & 1 == 1;
            let dep_a = f(false, false) != f(true, false) || f(false, true) != f(true, true);
            let dep_b = f(false, false) != f(false, true) || f(true, false) != f(true, true);
            let xor_like = f(false, false) == f(true, true) && f(true, false) == f(false, true);
            if dep_a && dep_b && !xor_like {
                classes.insert(table.min(!table & 15));
            }
        }
        assert_eq!(classes.len(), 4);
        assert_eq!(BigUint::from(1225 * classes.len()), n_trees_of_size(50, 2).unwrap());
    }

    #[test]
    fn pair_trees_over_four_covariates() {
        let mut keys = HashSet::new();
        for i in 0..4 {
            for j in 0..4 {
                if i == j {
                    continue;
                }
                for neg in 0..4 {
                    for op in [Op::And, Op::Or] {
                        let l = LogicTree::Leaf {
                            index: i,
                            negated: neg & 1 == 1,
                        };
                        let r = LogicTree::Leaf {
                            index: j,
                            negated: neg & 2 == 2,
                        };
                        keys.insert(LogicTree::join(op, l, r).canonical_key().unwrap().polarity_free());
                    }
                }
            }
        }
        assert_eq!(keys.len(), 24);
    }

    #[test]
    fn chain_enumeration_matches_formula() {
        for m in 1..=5 {
            for s in 1..=m.min(3) {
                let expected = n_trees_of_size(m, s).unwrap().to_usize().unwrap();
                assert_eq!(chain_count(m, s), expected, "m={m} s={s}");
            }
        }
    }

    #[test]
    fn all_read_once_shapes_exceed_formula_at_three_leaves() {
        // Allowing the separated leaf to be any of the three doubles the
        // count relative to the sorted-chain model.
        let mut keys = HashSet::new();
        let vars = [0usize, 1, 2];
        for first in 0..3 {
            let rest: Vec<usize> = vars.iter().copied().filter(|&v| v != first).collect();
            for neg in 0..8u32 {
                for ops in 0..4u32 {
                    let leaf = |v: usize, bit: u32| LogicTree::Leaf {
                        index: v,
                        negated: (neg >> bit) & 1 == 1,
                    };
                    let op = |b: u32| if (ops >> b) & 1 == 1 { Op::Or } else { Op::And };
                    let inner = LogicTree::join(op(0), leaf(rest[0], 0), leaf(rest[1], 1));
                    let tree = LogicTree::join(op(1), inner, leaf(first, 2));
                    keys.insert(tree.canonical_key().unwrap().polarity_free());
                }
            }
        }
        assert_eq!(keys.len(), 32);
        assert_eq!(n_trees_of_size(3, 3).unwrap(), BigUint::from(16u32));
    }

    #[test]
    fn log_counts_match_exact_integers() {
        for (m, s) in [(50, 1), (50, 2), (50, 5), (3000, 5), (4, 4)] {
            let exact = n_trees_of_size(m, s).unwrap().to_f64().unwrap().ln();
            let approx: f64 = log_n_trees(m, s).unwrap();
            assert!((exact - approx).abs() < 1e-12 * exact.max(1.0), "m={m} s={s}");
        }
        let f: f32 = log_n_trees(50, 2).unwrap();
        assert!((f - 4900f32.ln()).abs() < 1e-5);
    }

    fn pop50(trees: &[&str]) -> Population {
        Population::new(trees.iter().map(|s| t(s)).collect(), 0, 0).unwrap()
    }

    #[test]
    fn prior_examples() {
        let cfg = PriorConfig::new(50, 2, 5).unwrap();
        let pop = pop50(&["X1 & X2", "X3", "X4", "X5 | X6"]);
        let empty = ModelIndex::empty(4);
        assert_eq!(log_model_prior::<f64>(&empty, &pop, &cfg).unwrap(), 0.0);
        let one = ModelIndex::from_positions(4, &[0]);
        let v: f64 = log_model_prior(&one, &pop, &cfg).unwrap();
        assert!((v - (-(4900f64).ln())).abs() < 1e-12);
        assert!((v + 8.497).abs() < 1e-3);
        let three = ModelIndex::from_positions(4, &[0, 1, 2]);
        assert_eq!(log_model_prior::<f64>(&three, &pop, &cfg).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn oversized_tree_has_zero_prior() {
        let cfg = PriorConfig::new(50, 2, 2).unwrap();
        let pop = pop50(&["X1 & X2 & X3"]);
        let m = ModelIndex::from_positions(1, &[0]);
        assert_eq!(log_model_prior::<f64>(&m, &pop, &cfg).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn prior_ratio_examples() {
        let cfg = PriorConfig::new(50, 3, 5).unwrap();
        let pop = pop50(&["X1", "X1 & X2", "X3"]);
        let m = ModelIndex::empty(3);
        let r1: f64 = prior_ratio(&m, 0, &pop, &cfg).unwrap();
        assert_eq!(r1, -(50f64).ln());
        let r2: f64 = prior_ratio(&m, 1, &pop, &cfg).unwrap();
        assert!((r2 + (4900f64).ln()).abs() < 1e-12);
        assert!(r1 < 0.0 && r2 < 0.0);
        let full = ModelIndex::from_positions(3, &[0]);
        assert_eq!(
            prior_ratio::<f64>(&full, 0, &pop, &cfg),
            Err(ModelSpaceError::AlreadyIncluded { position: 0 })
        );
        let cfg1 = PriorConfig::new(50, 1, 5).unwrap();
        assert_eq!(
            prior_ratio::<f64>(&full, 1, &pop, &cfg1),
            Err(ModelSpaceError::ExceedsKMax { position: 1, k_max: 1 })
        );
    }

    #[test]
    fn ratio_equals_prior_difference_exhaustively() {
        let sizes = ["X1", "X2 & X3", "X4 | X5 & X6", "X7", "!X8 & X9", "X10", "X11 & X12", "X13", "X14 | X15", "X16", "X17", "X18 & X19 & X20 & X21"];
        for d in 1..=12 {
            let pop = pop50(&sizes[..d]);
            let cfg = PriorConfig::new(50, d, 5).unwrap();
            for bits in 0..1u32 << d {
                let model = ModelIndex::from_positions(d, &(0..d).filter(|j| (bits >> j) & 1 == 1).collect::<Vec<_>>());
                for j in (0..d).filter(|&j| !model.get(j)) {
                    if model.size() + 1 > cfg.k_max {
                        continue;
                    }
                    let r: f64 = prior_ratio(&model, j, &pop, &cfg).unwrap();
                    let diff = log_model_prior::<f64>(&model.flipped(j), &pop, &cfg).unwrap()
                        - log_model_prior::<f64>(&model, &pop, &cfg).unwrap();
                    if r.is_finite() {
                        assert!((r - diff).abs() < 1e-12, "d={d} bits={bits:b} j={j}");
                    } else {
                        assert_eq!(diff, f64::NEG_INFINITY);
                    }
                }
            }
        }
    }

    #[test]
    fn prior_mass_finite_and_positive() {
        let pop = pop50(&["X1", "X2 & X3", "X4", "X5 | X6"]);
        for k_max in 1..=4 {
            let cfg = PriorConfig::new(50, k_max, 5).unwrap();
            let total: f64 = (0..16u32)
                .map(|b| {
                    let m = ModelIndex::from_positions(4, &(0..4).filter(|j| (b >> j) & 1 == 1).collect::<Vec<_>>());
                    log_model_prior::<f64>(&m, &pop, &cfg).unwrap().exp()
                })
                .sum();
            assert!(total.is_finite() && total > 0.0);
        }
    }

    #[test]
    fn model_size_distribution_is_binomial() {
        // Single-site Gibbs sampling from the prior alone, constant c(L).
        let d = 10;
        let pop = Population::new((0..d).map(LogicTree::leaf).collect(), 0, 0).unwrap();
        let cfg = PriorConfig::new(3, d, 1).unwrap().with_base(0.9).unwrap();
        let log_w: f64 = cfg.log_tree_penalty(1);
        let p = log_w.exp() / (1.0 + log_w.exp());
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut model = ModelIndex::empty(d);
        let sweeps = 20_000;
        let mut sum = 0.0;
        for _ in 0..sweeps {
            for j in 0..d {
                model.set(j, false);
                let r: f64 = prior_ratio(&model, j, &pop, &cfg).unwrap();
                let pj = r.exp() / (1.0 + r.exp());
                model.set(j, rng.gen_bool(pj));
            }
            sum += model.size() as f64;
        }
        let mean = sum / sweeps as f64;
        let sd = (d as f64 * p * (1.0 - p) / sweeps as f64).sqrt();
        assert!((mean - d as f64 * p).abs() < 3.0 * sd, "mean {mean}, expected {}", d as f64 * p);
    }

    #[test]
    fn population_rejects_duplicates_and_constants() {
        let dup = Population::new(vec![t("X1 & X2"), t("!X1 | !X2")], 0, 0);
        assert_eq!(dup, Err(ModelSpaceError::DuplicateKey { first: 0, second: 1 }));
        let constant = Population::new(vec![t("X1 & !X1")], 0, 0);
        assert_eq!(constant, Err(ModelSpaceError::ConstantTree(0)));
        let founder = Population::new(vec![t("X1 & X2")], 1, 0);
        assert_eq!(founder, Err(ModelSpaceError::FounderNotLeaf(0)));
    }

    #[test]
    fn all_twenty_eight_trees_over_four_covariates_form_a_population() {
        let mut trees: Vec<LogicTree> = (0..4).map(LogicTree::leaf).collect();
        for i in 0..4 {
            for j in i + 1..4 {
                for neg in 0..2 {
                    for op in [Op::And, Op::Or] {
                        let r = LogicTree::Leaf {
                            index: j,
                            negated: neg == 1,
                        };
                        trees.push(LogicTree::join(op, LogicTree::leaf(i), r));
                    }
                }
            }
        }
        let pop = Population::new(trees, 0, 0).unwrap();
        assert_eq!(pop.d(), 28);
    }

    #[test]
    fn snapshot_serializes() {
        let pop = pop50(&["!(X1 & X4) | X8", "X2"]);
        let json = serde_json::to_string(&pop.snapshot(&[0.5, 1.0])).unwrap();
        assert_eq!(
            json,
            r#"{"generation":0,"trees":["!(X1 & X4) | X8","X2"],"inclusion":[0.5,1.0]}"#
        );
    }
}

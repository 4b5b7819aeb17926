//! Boolean expression trees over binary covariates.
//!
//! A [`LogicTree`] is either a leaf (one covariate, possibly negated) or a
//! binary AND/OR node whose whole subexpression may be negated. Trees are the
//! candidate regressors of logic regression; their identity for modelling
//! purposes is the Boolean function they compute, captured by
//! [`CanonicalKey`].

mod key;
mod operators;
mod syntax;

use std::fmt;

use thiserror::Error;

use crate::bits::BitVector;

pub use key::{CanonicalKey, MAX_KEY_LEAVES};
pub use operators::{
    crossover, crossover_with, mutate, mutate_with, random_tree, reduce, reduce_with, GaOperatorParams,
    JoinDraw,
};
pub use syntax::ParseError;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("covariate index {index} out of range for {m} covariates")]
    IndexOutOfRange { index: usize, m: usize },
    #[error("tree uses {leaves} distinct leaves, canonical keys support at most {max}")]
    KeyCapacity { leaves: usize, max: usize },
    #[error("mutation leaf X{} belongs to the founder set", .0 + 1)]
    FounderLeaf(usize),
    #[error("mutation partner must be a single leaf")]
    NotALeaf,
    #[error("reduction needs a tree with at least two leaves, got {0}")]
    TooSmall(usize),
    #[error("deletion mask has {got} entries for a tree of size {size}")]
    MaskLength { got: usize, size: usize },
    #[error("invalid operator parameter: {0}")]
    InvalidParams(String),
}

/// Binary logical operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    And,
    Or,
}

impl Op {
    #[inline]
    pub fn apply(self, a: bool, b: bool) -> bool {
        match self {
            Op::And => a && b,
            Op::Or => a || b,
        }
    }

    pub fn dual(self) -> Op {
        match self {
            Op::And => Op::Or,
            Op::Or => Op::And,
        }
    }
}

/// A logic expression. Covariate indices are 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LogicTree {
    Leaf {
        index: usize,
        negated: bool,
    },
    Node {
        op: Op,
        left: Box<LogicTree>,
        right: Box<LogicTree>,
        negated: bool,
    },
}

impl LogicTree {
    pub fn leaf(index: usize) -> Self {
        LogicTree::Leaf { index, negated: false }
    }

    pub fn join(op: Op, left: LogicTree, right: LogicTree) -> Self {
        LogicTree::Node {
            op,
            left: Box::new(left),
            right: Box::new(right),
            negated: false,
        }
    }

    pub fn and(left: LogicTree, right: LogicTree) -> Self {
        Self::join(Op::And, left, right)
    }

    pub fn or(left: LogicTree, right: LogicTree) -> Self {
        Self::join(Op::Or, left, right)
    }

    /// The complement: toggles the negation flag of the root.
    pub fn negate(mut self) -> Self {
        match &mut self {
            LogicTree::Leaf { negated, .. } | LogicTree::Node { negated, .. } => *negated = !*negated,
        }
        self
    }

    pub fn is_negated(&self) -> bool {
        match self {
            LogicTree::Leaf { negated, .. } | LogicTree::Node { negated, .. } => *negated,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, LogicTree::Leaf { .. })
    }

    /// Number of leaf occurrences, `s(L)`.
    pub fn size(&self) -> usize {
        match self {
            LogicTree::Leaf { .. } => 1,
            LogicTree::Node { left, right, .. } => left.size() + right.size(),
        }
    }

    /// Covariate indices of the leaves in left-to-right order (with repeats).
    pub fn leaf_sequence(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.size());
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<usize>) {
        match self {
            LogicTree::Leaf { index, .. } => out.push(*index),
            LogicTree::Node { left, right, .. } => {
                left.collect_leaves(out);
                right.collect_leaves(out);
            }
        }
    }

    /// The leaf set `v(L)`: distinct covariate indices, sorted.
    pub fn leaf_set(&self) -> Vec<usize> {
        let mut v = self.leaf_sequence();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn max_index(&self) -> usize {
        self.leaf_sequence().into_iter().max().unwrap_or(0)
    }

    /// Checks that every covariate index is below `m`.
    pub fn validate(&self, m: usize) -> Result<(), TreeError> {
        match self.leaf_sequence().into_iter().find(|&i| i >= m) {
            Some(index) => Err(TreeError::IndexOutOfRange { index, m }),
            None => Ok(()),
        }
    }

    /// Evaluates the expression on one observation.
    pub fn evaluate(&self, row: &[bool]) -> Result<bool, TreeError> {
        self.validate(row.len())?;
        Ok(self.eval_unchecked(&|i| row[i]))
    }

    pub(crate) fn eval_unchecked(&self, value: &dyn Fn(usize) -> bool) -> bool {
        match self {
            LogicTree::Leaf { index, negated } => value(*index) ^ negated,
            LogicTree::Node { op, left, right, negated } => {
                op.apply(left.eval_unchecked(value), right.eval_unchecked(value)) ^ negated
            }
        }
    }

    /// Evaluates the expression on every observation at once, given one
    /// packed column per covariate.
    pub fn evaluate_columns(&self, columns: &[BitVector]) -> Result<BitVector, TreeError> {
        self.validate(columns.len())?;
        Ok(self.eval_columns_unchecked(columns))
    }

    fn eval_columns_unchecked(&self, columns: &[BitVector]) -> BitVector {
        match self {
            LogicTree::Leaf { index, negated } => {
                if *negated {
                    columns[*index].not()
                } else {
                    columns[*index].clone()
                }
            }
            LogicTree::Node { op, left, right, negated } => {
                let l = left.eval_columns_unchecked(columns);
                let r = right.eval_columns_unchecked(columns);
                let v = match op {
                    Op::And => l.and(&r),
                    Op::Or => l.or(&r),
                };
                if *negated {
                    v.not()
                } else {
                    v
                }
            }
        }
    }

    pub fn canonical_key(&self) -> Result<CanonicalKey, TreeError> {
        CanonicalKey::of(self)
    }

    /// Renders the tree with custom covariate labels instead of `X<j>`.
    pub fn display_with<'a>(&'a self, labels: &'a [String]) -> impl fmt::Display + 'a {
        syntax::Labelled { tree: self, labels }
    }
}

impl fmt::Display for LogicTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        syntax::write_tree(self, f, &|f, i| write!(f, "X{}", i + 1))
    }
}

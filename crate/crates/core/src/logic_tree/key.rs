//! Truth-table identity of logic expressions.

use std::fmt;

use super::{LogicTree, Op, TreeError};
use crate::bits::BitVector;

/// Largest number of distinct leaves a key can be built for (65536-bit table).
pub const MAX_KEY_LEAVES: usize = 16;

/// The Boolean function computed by a tree, restricted to the leaves it
/// actually depends on.
///
/// Bit `a` of `table` is the function value for the assignment whose `p`-th
/// bit gives the value of `leaves[p]`. Two trees get equal keys exactly when
/// they compute the same function, so De Morgan rewrites, commutativity,
/// associativity and absorption all collapse.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalKey {
    leaves: Vec<u32>,
    table: BitVector,
}

impl CanonicalKey {
    pub fn of(tree: &LogicTree) -> Result<Self, TreeError> {
        let leaves = tree.leaf_set();
        if leaves.len() > MAX_KEY_LEAVES {
            return Err(TreeError::KeyCapacity {
                leaves: leaves.len(),
                max: MAX_KEY_LEAVES,
            });
        }
        let table = truth_table(tree, &leaves);
        let relevant: Vec<usize> = (0..leaves.len()).filter(|&p| depends_on(&table, p)).collect();
        let (leaves, table) = if relevant.len() == leaves.len() {
            (leaves, table)
        } else {
            let projected = project(&table, &relevant);
            (relevant.iter().map(|&p| leaves[p]).collect(), projected)
        };
        Ok(Self {
            leaves: leaves.into_iter().map(|i| i as u32).collect(),
            table,
        })
    }

    /// Effective leaves (0-based covariate indices), sorted.
    pub fn leaves(&self) -> impl ExactSizeIterator<Item = usize> + '_ {
        self.leaves.iter().map(|&i| i as usize)
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn table(&self) -> &BitVector {
        &self.table
    }

    /// True for functions that ignore all covariates (tautologies and contradictions).
    pub fn is_constant(&self) -> bool {
        self.leaves.is_empty()
    }

    /// Key of the complementary expression: the same leaf set with every
    /// truth-table bit flipped.
    pub fn complement(&self) -> Self {
        Self {
            leaves: self.leaves.clone(),
            table: self.table.not(),
        }
    }

    /// Representative of the pair `{key, complement}`: the member whose
    /// function is false on the all-false assignment.
    ///
    /// In a regression with an intercept a tree and its complement span the
    /// same design, so populations and model keys use this form.
    pub fn polarity_free(&self) -> Self {
        if self.table.get(0) {
            self.complement()
        } else {
            self.clone()
        }
    }

    pub fn is_polarity_free(&self) -> bool {
        !self.table.get(0)
    }

    /// `true` when `other` is this key or its complement.
    pub fn same_up_to_complement(&self, other: &CanonicalKey) -> bool {
        self.leaves == other.leaves && (self.table == other.table || self.table == other.table.not())
    }
}

impl fmt::Debug for CanonicalKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bits: String = self.table.iter().map(|b| if b { '1' } else { '0' }).collect();
        let leaves: Vec<String> = self.leaves.iter().map(|i| format!("X{}", i + 1)).collect();
        write!(f, "Key[{}:{}]", leaves.join(","), bits)
    }
}

/// Column of the truth table for the variable in position `p` of `k`.
fn variable_column(p: usize, k: usize) -> BitVector {
    BitVector::from_bools((0..1usize << k).map(|a| (a >> p) & 1 == 1))
}

fn truth_table(tree: &LogicTree, leaves: &[usize]) -> BitVector {
    let k = leaves.len();
    let columns: Vec<BitVector> = (0..k).map(|p| variable_column(p, k)).collect();
    eval_table(tree, leaves, &columns)
}

fn eval_table(tree: &LogicTree, leaves: &[usize], columns: &[BitVector]) -> BitVector {
    match tree {
        LogicTree::Leaf { index, negated } => {
            let p = leaves.binary_search(index).expect("leaf in leaf set");
            if *negated {
                columns[p].not()
            } else {
                columns[p].clone()
            }
        }
        LogicTree::Node { op, left, right, negated } => {
            let l = eval_table(left, leaves, columns);
            let r = eval_table(right, leaves, columns);
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

fn depends_on(table: &BitVector, p: usize) -> bool {
    let bit = 1usize << p;
    (0..table.len()).filter(|a| a & bit == 0).any(|a| table.get(a) != table.get(a | bit))
}

/// Restricts `table` to the variables in `keep`, fixing the others at 0.
fn project(table: &BitVector, keep: &[usize]) -> BitVector {
    BitVector::from_bools((0..1usize << keep.len()).map(|b| {
        let a = keep
            .iter()
            .enumerate()
            .filter(|(q, _)| (b >> q) & 1 == 1)
            .fold(0usize, |acc, (_, &p)| acc | (1 << p));
        table.get(a)
    }))
}

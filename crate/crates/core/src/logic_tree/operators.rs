//! Genetic operators on trees: crossover, mutation and reduction.
//!
//! Each operator comes in two forms: a `*_with` variant that takes the
//! random decisions explicitly, and a sampling variant that draws them from
//! an injected RNG and delegates.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{LogicTree, Op, TreeError};

/// Probabilities and size cap used by the genetic operators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaOperatorParams {
    /// Probability of joining with AND (else OR).
    pub p_and: f64,
    /// Probability of negating each parent before joining.
    pub p_not: f64,
    /// Per-leaf deletion probability in reduction.
    pub rho_del: f64,
    /// Maximal tree size.
    pub c_max: usize,
}

impl GaOperatorParams {
    pub fn new(p_and: f64, p_not: f64, rho_del: f64, c_max: usize) -> Result<Self, TreeError> {
        let p = Self {
            p_and,
            p_not,
            rho_del,
            c_max,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), TreeError> {
        for (name, v) in [("P_and", self.p_and), ("P_not", self.p_not), ("rho_del", self.rho_del)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(TreeError::InvalidParams(format!("{name} = {v} is not in [0, 1]")));
            }
        }
        if self.c_max == 0 {
            return Err(TreeError::InvalidParams("C_max must be at least 1".into()));
        }
        Ok(())
    }
}

/// The random choices of one join: which parents to negate and which operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JoinDraw {
    pub negate_first: bool,
    pub negate_second: bool,
    pub op: Op,
}

impl JoinDraw {
    pub fn sample<R: Rng + ?Sized>(params: &GaOperatorParams, rng: &mut R) -> Self {
        let negate_first = rng.gen_bool(params.p_not);
        let negate_second = rng.gen_bool(params.p_not);
        Self {
            negate_first,
            negate_second,
            op: draw_op(params, rng),
        }
    }

    fn join(self, first: LogicTree, second: LogicTree) -> LogicTree {
        let first = if self.negate_first { first.negate() } else { first };
        let second = if self.negate_second { second.negate() } else { second };
        LogicTree::join(self.op, first, second)
    }
}

fn draw_op<R: Rng + ?Sized>(params: &GaOperatorParams, rng: &mut R) -> Op {
    if rng.gen_bool(params.p_and) {
        Op::And
    } else {
        Op::Or
    }
}

pub fn crossover_with(first: &LogicTree, second: &LogicTree, draw: JoinDraw) -> LogicTree {
    draw.join(first.clone(), second.clone())
}

/// Negates each parent with probability `P_not`, then joins them by AND with
/// probability `P_and`, else OR. The child has `s(p1) + s(p2)` leaves.
pub fn crossover<R: Rng + ?Sized>(
    first: &LogicTree,
    second: &LogicTree,
    params: &GaOperatorParams,
    rng: &mut R,
) -> LogicTree {
    crossover_with(first, second, JoinDraw::sample(params, rng))
}

pub fn mutate_with(
    parent: &LogicTree,
    leaf: &LogicTree,
    founders: &[usize],
    draw: JoinDraw,
) -> Result<LogicTree, TreeError> {
    match leaf {
        LogicTree::Leaf { index, .. } if founders.contains(index) => Err(TreeError::FounderLeaf(*index)),
        LogicTree::Leaf { .. } => Ok(draw.join(parent.clone(), leaf.clone())),
        LogicTree::Node { .. } => Err(TreeError::NotALeaf),
    }
}

/// Crossover of `parent` with a single leaf that is not one of the founder
/// covariates.
pub fn mutate<R: Rng + ?Sized>(
    parent: &LogicTree,
    leaf: &LogicTree,
    founders: &[usize],
    params: &GaOperatorParams,
    rng: &mut R,
) -> Result<LogicTree, TreeError> {
    mutate_with(parent, leaf, founders, JoinDraw::sample(params, rng))
}

/// Deletes the leaves flagged in `deleted` (indexed by left-to-right leaf
/// position).
///
/// A deleted leaf takes both of its neighbouring operators with it, so the
/// remaining leaves fall apart into maximal runs of still-connected leaves.
/// Each run keeps its original structure; negations of removed ancestors are
/// pushed down onto it. Runs are then chained left to right with operators
/// taken from `next_op`. When every leaf is flagged, `keep` names the
/// position that survives.
pub fn reduce_with(
    tree: &LogicTree,
    deleted: &[bool],
    keep: usize,
    mut next_op: impl FnMut() -> Op,
) -> Result<LogicTree, TreeError> {
    let size = tree.size();
    if size < 2 {
        return Err(TreeError::TooSmall(size));
    }
    if deleted.len() != size {
        return Err(TreeError::MaskLength {
            got: deleted.len(),
            size,
        });
    }
    let mut deleted = deleted.to_vec();
    if deleted.iter().all(|&d| d) {
        deleted[keep.min(size - 1)] = false;
    }
    if !deleted.iter().any(|&d| d) {
        return Ok(tree.clone());
    }

    // Gap g sits between leaf positions g and g + 1; a deleted leaf cuts the
    // gaps on both of its sides.
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut start: Option<usize> = None;
    for pos in 0..size {
        if deleted[pos] {
            if let Some(s) = start.take() {
                runs.push((s, pos - 1));
            }
        } else if start.is_none() {
            start = Some(pos);
        }
    }
    if let Some(s) = start {
        runs.push((s, size - 1));
    }

    let mut pieces = runs.into_iter().map(|(a, b)| {
        let mut counter = 0;
        restrict(tree, a, b, &mut counter, false).expect("run is non-empty")
    });
    let mut acc = pieces.next().expect("at least one survivor");
    for piece in pieces {
        acc = LogicTree::join(next_op(), acc, piece);
    }
    Ok(acc)
}

/// Subtree induced by leaf positions `a..=b`; `flip` carries negations of
/// ancestors that were dropped on the way down.
fn restrict(node: &LogicTree, a: usize, b: usize, counter: &mut usize, flip: bool) -> Option<LogicTree> {
    match node {
        LogicTree::Leaf { index, negated } => {
            let pos = *counter;
            *counter += 1;
            (a..=b).contains(&pos).then_some(LogicTree::Leaf {
                index: *index,
                negated: *negated ^ flip,
            })
        }
        LogicTree::Node {
            op,
            left,
            right,
            negated,
        } => {
            let inner_flip = flip ^ *negated;
            // Probe both sides with the flip folded in; if both survive the
            // node is kept and the flags are recomputed without it.
            let start = *counter;
            let l = restrict(left, a, b, counter, inner_flip);
            let r = restrict(right, a, b, counter, inner_flip);
            match (l, r) {
                (Some(_), Some(_)) => {
                    *counter = start;
                    let l = restrict(left, a, b, counter, false).expect("left survives");
                    let r = restrict(right, a, b, counter, false).expect("right survives");
                    Some(LogicTree::Node {
                        op: *op,
                        left: Box::new(l),
                        right: Box::new(r),
                        negated: inner_flip,
                    })
                }
                (Some(t), None) | (None, Some(t)) => Some(t),
                (None, None) => None,
            }
        }
    }
}

/// Marks each leaf for deletion with probability `rho_del` and prunes. If
/// every leaf is marked, one uniformly chosen leaf is retained.
pub fn reduce<R: Rng + ?Sized>(
    tree: &LogicTree,
    params: &GaOperatorParams,
    rng: &mut R,
) -> Result<LogicTree, TreeError> {
    let size = tree.size();
    if size < 2 {
        return Err(TreeError::TooSmall(size));
    }
    let deleted: Vec<bool> = (0..size).map(|_| rng.gen_bool(params.rho_del)).collect();
    let keep = if deleted.iter().all(|&d| d) {
        rng.gen_range(0..size)
    } else {
        0
    };
    reduce_with(tree, &deleted, keep, || draw_op(params, rng))
}

/// A random tree of the given size over covariates `0..m`, built as a chain
/// of crossovers of uniformly drawn leaves.
pub fn random_tree<R: Rng + ?Sized>(m: usize, size: usize, params: &GaOperatorParams, rng: &mut R) -> LogicTree {
    assert!(m > 0 && size > 0);
    let mut tree = LogicTree::leaf(rng.gen_range(0..m));
    for _ in 1..size {
        let leaf = LogicTree::leaf(rng.gen_range(0..m));
        tree = crossover(&tree, &leaf, params, rng);
    }
    tree
}

//! Oracles shared by the integration tests. None of these call into the
//! library's numeric code; they are written directly from the model
//! definitions so that agreement is evidence rather than tautology.

#![allow(dead_code)]

use logicreg::bits::BitVector;
use logicreg::data::{Dataset, Family};
use logicreg::logic_tree::LogicTree;
use rand::Rng;

/// Least squares by Gaussian elimination with partial pivoting on the
/// normal equations. Returns `(beta, rss)`, or `None` when singular.
pub fn ols(x: &[Vec<f64>], y: &[f64]) -> Option<(Vec<f64>, f64)> {
    let p = x.first()?.len();
    let mut a = vec![vec![0.0; p + 1]; p];
    for (row, &yi) in x.iter().zip(y) {
        for i in 0..p {
            for j in 0..p {
                a[i][j] += row[i] * row[j];
            }
            a[i][p] += row[i] * yi;
        }
    }
    let scale: f64 = (0..p).map(|i| a[i][i]).fold(0.0, f64::max);
    for col in 0..p {
        let piv = (col..p).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
        if a[piv][col].abs() < 1e-9 * scale {
            return None;
        }
        a.swap(col, piv);
        for r in 0..p {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=p {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    let beta: Vec<f64> = (0..p).map(|i| a[i][p] / a[i][i]).collect();
    let rss = x
        .iter()
        .zip(y)
        .map(|(row, &yi)| {
            let fit: f64 = row.iter().zip(&beta).map(|(u, b)| u * b).sum();
            (yi - fit) * (yi - fit)
        })
        .sum();
    Some((beta, rss))
}

/// `-n/2 (ln(2π RSS/n) + 1) - k/2 ln n`.
pub fn gaussian_jeffreys(n: usize, rss: f64, k: usize) -> f64 {
    let nf = n as f64;
    -nf / 2.0 * ((2.0 * std::f64::consts::PI * rss / nf).ln() + 1.0) - k as f64 / 2.0 * nf.ln()
}

/// Intercept plus one 0/1 column per tree.
pub fn design_rows(trees: &[&LogicTree], data: &Dataset<f64>) -> Vec<Vec<f64>> {
    (0..data.n())
        .map(|i| {
            let row = data.row(i);
            std::iter::once(1.0)
                .chain(trees.iter().map(|t| if interpret(t, &row) { 1.0 } else { 0.0 }))
                .collect()
        })
        .collect()
}

pub fn interpret(t: &LogicTree, row: &[bool]) -> bool {
    match t {
        LogicTree::Leaf { index, negated } => row[*index] != *negated,
        LogicTree::Node { op, left, right, negated } => {
            let (l, r) = (interpret(left, row), interpret(right, row));
            let v = match op {
                logicreg::logic_tree::Op::And => l && r,
                logicreg::logic_tree::Op::Or => l || r,
            };
            v != *negated
        }
    }
}

/// Log of the robust g-prior Bayes factor against the null for a Gaussian
/// model with `k` slopes, by composite Simpson on `w = sqrt(u)`, with `u`
/// truncated below at `eps`.
///
/// The mixing density at the default hyperparameters is proportional to
/// `u^{-1/2}` on `(0, 1/v)`; with `u = w²` it becomes uniform in `w` on
/// `(0, 1/√v)`, and the Bayes factor in `g = 1/u - 1` is
/// `(1+g)^{(n-1-k)/2} (1 + g(1-R²))^{-(n-1)/2}`.
pub fn robust_g_log_bf_grid(n: usize, k: usize, one_minus_r2: f64, eps: f64, intervals: usize) -> f64 {
    assert!(intervals % 2 == 0);
    let v = (n as f64 + 1.0) / (k as f64 + 1.0);
    let w_max = (1.0 / v).min(1.0).sqrt();
    let w_min = eps.sqrt();
    let h = (w_max - w_min) / intervals as f64;
    let log_bf = |w: f64| {
        if w == 0.0 {
            return f64::NEG_INFINITY;
        }
        let g = 1.0 / (w * w) - 1.0;
        (n as f64 - 1.0 - k as f64) / 2.0 * (1.0 + g).ln() - (n as f64 - 1.0) / 2.0 * (1.0 + g * one_minus_r2).ln()
    };
    let terms: Vec<f64> = (0..=intervals)
        .map(|i| {
            let c: f64 = if i == 0 || i == intervals {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c.ln() + log_bf(w_min + i as f64 * h)
        })
        .collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
    // (h/3) Σ c_i BF_i divided by the interval length
    max + sum.ln() + (h / 3.0).ln() - (w_max - w_min).ln()
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Every tree of size at most two over four covariates, one per
/// complement class: 4 leaves and 6 pairs times 4 polarity patterns.
pub fn trees_m4_cmax2() -> Vec<LogicTree> {
    let leaf = |index, negated| LogicTree::Leaf { index, negated };
    let mut out: Vec<LogicTree> = (0..4).map(|i| leaf(i, false)).collect();
    for i in 0..4 {
        for j in i + 1..4 {
            for (ni, nj) in [(false, false), (true, false), (false, true), (true, true)] {
                out.push(LogicTree::and(leaf(i, ni), leaf(j, nj)));
            }
        }
    }
    out
}

/// Subsets of `0..d` with at most `k` elements, in increasing size.
pub fn subsets_up_to(d: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 0..k {
        let mut next = Vec::new();
        for s in &frontier {
            let start = s.last().map_or(0, |&l: &usize| l + 1);
            for j in start..d {
                let mut t = s.clone();
                t.push(j);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Random binary covariates with success rate `rate`.
pub fn random_columns<R: Rng>(rng: &mut R, n: usize, m: usize, rate: f64) -> Vec<BitVector> {
    (0..m)
        .map(|_| BitVector::from_bools((0..n).map(|_| rng.gen::<f64>() < rate)))
        .collect()
}

/// Gaussian response `y = b0 + Σ b_j x_j + N(0,1)` over the first columns.
pub fn gaussian_data<R: Rng>(rng: &mut R, n: usize, m: usize, effects: &[f64]) -> Dataset<f64> {
    use rand_distr::{Distribution, StandardNormal};
    let cols = random_columns(rng, n, m, 0.5);
    let y = (0..n)
        .map(|i| {
            let mut v: f64 = StandardNormal.sample(rng);
            v += 0.5;
            for (j, b) in effects.iter().enumerate() {
                if cols[j].get(i) {
                    v += b;
                }
            }
            v
        })
        .collect();
    Dataset::new(cols, y, Family::Gaussian).unwrap()
}

/// Logistic response with the given slopes on the first columns.
pub fn logistic_data<R: Rng>(rng: &mut R, n: usize, m: usize, effects: &[f64]) -> Dataset<f64> {
    let cols = random_columns(rng, n, m, 0.4);
    let y = (0..n)
        .map(|i| {
            let mut eta = -0.3;
            for (j, b) in effects.iter().enumerate() {
                if cols[j].get(i) {
                    eta += b;
                }
            }
            if rng.gen::<f64>() < 1.0 / (1.0 + (-eta).exp()) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    Dataset::new(cols, y, Family::Binomial).unwrap()
}

/// Bernoulli log-likelihood of `β` on explicit design rows.
pub fn logistic_loglik(x: &[Vec<f64>], y: &[f64], beta: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(row, &yi)| {
            let eta: f64 = row.iter().zip(beta).map(|(u, b)| u * b).sum();
            // log(1 + e^eta) computed stably
            let softplus = if eta > 0.0 { eta + (-eta).exp().ln_1p() } else { eta.exp().ln_1p() };
            yi * eta - softplus
        })
        .sum()
}

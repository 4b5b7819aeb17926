//! Marginal likelihoods and fits against independent closed forms.

mod common;

use common::{design_rows, gaussian_data, gaussian_jeffreys, logistic_data, logistic_loglik, ols, robust_g_log_bf_grid};
use logicreg::data::Dataset;
use logicreg::likelihood::{
    design_matrix, fit_glm, log_marglik, log_marglik_jeffreys, log_marglik_robust_g, PriorKind, RobustGConfig,
};
use logicreg::logic_tree::LogicTree;
use logicreg::model_space::{ModelIndex, Population, PriorConfig};
use logicreg::score::{DataContext, MarglikCache, PopulationScorer};
use logicreg::Matrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const M: usize = 6;

/// Leaves plus a few two- and three-leaf trees over `M` covariates.
fn mixed_population() -> Population {
    let l = |i, neg| LogicTree::Leaf { index: i, negated: neg };
    let mut trees: Vec<LogicTree> = (0..M).map(LogicTree::leaf).collect();
    trees.push(LogicTree::and(l(0, false), l(1, true)));
    trees.push(LogicTree::or(l(2, false), l(3, false)));
    trees.push(LogicTree::and(LogicTree::and(l(1, false), l(4, false)), l(5, true)));
    trees.push(LogicTree::or(l(0, true), LogicTree::and(l(2, false), l(5, false))));
    Population::new(trees, 0, 0).unwrap()
}

fn random_model<R: Rng>(rng: &mut R, d: usize, k_max: usize) -> ModelIndex {
    let mut idx: Vec<usize> = (0..d).collect();
    idx.shuffle(rng);
    let k = rng.gen_range(0..=k_max);
    ModelIndex::from_positions(d, &idx[..k])
}

fn included_trees<'a>(model: &ModelIndex, pop: &'a Population) -> Vec<&'a LogicTree> {
    model.included().map(|j| pop.tree(j)).collect()
}

#[test]
fn gaussian_jeffreys_matches_rss_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let pop = mixed_population();
    let mut checked = 0;
    while checked < 100 {
        let n = rng.gen_range(30..300);
        let effects: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let data = gaussian_data(&mut rng, n, M, &effects);
        let model = random_model(&mut rng, pop.d(), 4);
        let trees = included_trees(&model, &pop);
        let Some((_, rss)) = ols(&design_rows(&trees, &data), data.y()) else {
            continue;
        };
        let expected = gaussian_jeffreys(n, rss, trees.len());

        let x = design_matrix(&model, &pop, &data).unwrap();
        let fit = fit_glm(&x, data.y(), data.family()).unwrap();
        let direct = log_marglik_jeffreys(&fit, n, fit.model_size());
        assert!((direct - expected).abs() < 1e-10, "fit path {direct} vs {expected}");

        let ctx = DataContext::new(&data, PriorKind::Jeffreys, RobustGConfig::default(), PriorConfig::new(M, 10, 3).unwrap());
        let mut cache = MarglikCache::new();
        let scorer = PopulationScorer::new(&ctx, &pop, &mut cache);
        let engine = scorer.log_marglik_uncached(&model);
        assert!((engine - expected).abs() < 1e-10, "engine path {engine} vs {expected}");
        checked += 1;
    }
}

#[test]
fn collinear_column_never_increases_loglik() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for case in 0..40 {
        let n = rng.gen_range(40..200);
        let data: Dataset<f64> = if case % 2 == 0 {
            gaussian_data(&mut rng, n, 3, &[1.0, -0.5])
        } else {
            logistic_data(&mut rng, n, 3, &[1.0, -0.5])
        };
        let base = Matrix::from_fn(n, 3, |i, j| match j {
            0 => 1.0,
            j => f64::from(u8::from(data.columns()[j - 1].get(i))),
        });
        // X1 + X2 - 1 lies in the span of the other columns
        let extended = Matrix::from_fn(n, 4, |i, j| if j < 3 { base.get(i, j) } else { base.get(i, 1) + base.get(i, 2) - 1.0 });
        let a = fit_glm(&base, data.y(), data.family()).unwrap();
        let b = fit_glm(&extended, data.y(), data.family()).unwrap();
        assert_eq!(b.rank, a.rank, "case {case}");
        assert!(!b.full_rank());
        assert!(b.loglik <= a.loglik + 1e-9 && (b.loglik - a.loglik).abs() < 1e-8, "case {case}");
    }
}

#[test]
fn irls_gradient_vanishes_by_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for case in 0..50 {
        let n = rng.gen_range(100..400);
        let k = rng.gen_range(1..=4);
        let effects: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let data = logistic_data(&mut rng, n, k, &effects);
        let x = Matrix::from_fn(n, k + 1, |i, j| match j {
            0 => 1.0,
            j => f64::from(u8::from(data.columns()[j - 1].get(i))),
        });
        let rows: Vec<Vec<f64>> = (0..n).map(|i| x.row(i).to_vec()).collect();
        let fit = fit_glm(&x, data.y(), data.family()).unwrap();
        assert!(fit.converged && fit.full_rank(), "case {case}: {fit:?}");
        let ll = logistic_loglik(&rows, data.y(), &fit.coefficients);
        assert!((ll - fit.loglik).abs() < 1e-9, "case {case}: {ll} vs {}", fit.loglik);
        let h = 1e-5;
        for j in 0..=k {
            let mut up = fit.coefficients.clone();
            let mut down = fit.coefficients.clone();
            up[j] += h;
            down[j] -= h;
            let g = (logistic_loglik(&rows, data.y(), &up) - logistic_loglik(&rows, data.y(), &down)) / (2.0 * h);
            assert!(g.abs() < 1e-5, "case {case}, coefficient {j}: gradient {g}");
        }
    }
}

fn gaussian_fits(data: &Dataset<f64>, model: &ModelIndex, pop: &Population) -> (logicreg::GlmFit, logicreg::GlmFit) {
    let n = data.n();
    let x = design_matrix(model, pop, data).unwrap();
    let fit = fit_glm(&x, data.y(), data.family()).unwrap();
    let null = fit_glm(&Matrix::from_fn(n, 1, |_, _| 1.0), data.y(), data.family()).unwrap();
    (fit, null)
}

#[test]
fn robust_g_quadrature_is_converged_at_64_nodes() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let pop = mixed_population();
    let coarse = RobustGConfig::with_nodes(64).unwrap();
    let fine = RobustGConfig::with_nodes(128).unwrap();
    let mut checked = 0;
    while checked < 20 {
        let n = rng.gen_range(50..1000);
        let effects: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let data = gaussian_data(&mut rng, n, M, &effects);
        let model = random_model(&mut rng, pop.d(), 5);
        if model.size() == 0 {
            continue;
        }
        let (fit, null) = gaussian_fits(&data, &model, &pop);
        if !fit.full_rank() {
            continue;
        }
        let a = log_marglik_robust_g(&fit, &null, n, &coarse);
        let b = log_marglik_robust_g(&fit, &null, n, &fine);
        assert!(a.is_finite() && (a - b).abs() < 1e-6, "n = {n}: {a} vs {b}");
        checked += 1;
    }
}

#[test]
fn robust_g_matches_dense_grid_for_small_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let pop = Population::leaves(M);
    let cfg = RobustGConfig::default();
    for case in 0..30 {
        let n = rng.gen_range(30..1000);
        let effects: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let data = gaussian_data(&mut rng, n, M, &effects);
        let k = case % 3;
        let model = random_model(&mut rng, M, k);
        let (fit, null) = gaussian_fits(&data, &model, &pop);
        let got = log_marglik_robust_g(&fit, &null, n, &cfg) - null.loglik;
        let expected = if model.size() == 0 {
            0.0
        } else {
            let trees = included_trees(&model, &pop);
            let (_, rss) = ols(&design_rows(&trees, &data), data.y()).unwrap();
            let (_, tss) = ols(&design_rows(&[], &data), data.y()).unwrap();
            robust_g_log_bf_grid(n, model.size(), rss / tss, cfg.eps, 20_000)
        };
        assert!((got - expected).abs() < 1e-6, "case {case}, |M| = {}: {got} vs {expected}", model.size());
    }
}

#[test]
fn robust_g_and_jeffreys_rank_nested_models_alike() {
    let robust = RobustGConfig::default();
    let pop = Population::leaves(4);
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let data = gaussian_data(&mut rng, 400, 4, &[4.0, -4.0]);
        let nested = [vec![], vec![0], vec![0, 1], vec![0, 1, 2], vec![0, 1, 2, 3]];
        let rank = |prior: PriorKind| {
            let scores: Vec<f64> = nested
                .iter()
                .map(|s| {
                    let model = ModelIndex::from_positions(4, s);
                    let (fit, null) = gaussian_fits(&data, &model, &pop);
                    log_marglik(prior, &fit, &null, data.n(), &robust)
                })
                .collect();
            let mut order: Vec<usize> = (0..nested.len()).collect();
            order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
            order
        };
        let jeffreys = rank(PriorKind::Jeffreys);
        assert_eq!(jeffreys[0], 2, "seed {seed}");
        assert_eq!(jeffreys, rank(PriorKind::RobustG), "seed {seed}");
    }
}


//! Population evolution, chain aggregation and the full-coverage limit.

mod common;

use std::collections::HashSet;

use common::{design_rows, gaussian_jeffreys, log_sum_exp, ols, subsets_up_to, trees_m4_cmax2};
use logicreg::gmjmcmc::{
    aggregate, evolve, initialize, run_chain_from, ChainSummary, GmjmcmcConfig, TreeProbability,
};
use logicreg::likelihood::{PriorKind, RobustGConfig};
use logicreg::logic_tree::LogicTree;
use logicreg::model_space::Population;
use logicreg::score::{DataContext, MarglikCache};
use logicreg::simbench::{generate, Scenario};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn check_population(pop: &Population, founders: &[LogicTree], cfg: &GmjmcmcConfig) {
    assert_eq!(pop.d(), cfg.d);
    assert_eq!(pop.founders(), founders);
    let keys: HashSet<_> = pop.trees().iter().map(|t| t.canonical_key().unwrap().polarity_free()).collect();
    assert_eq!(keys.len(), cfg.d, "duplicate members in {:?}", pop.trees());
    assert!(pop.trees().iter().all(|t| t.size() <= cfg.c_max));
    assert!(pop.d() - pop.n_founders() >= cfg.k_max);
}

#[test]
fn generations_keep_founders_and_integrity() {
    let scenario = Scenario::builtin(1).unwrap().with_m(12).unwrap();
    for seed in 0..30u64 {
        let data = generate(&scenario, 300, seed).unwrap();
        let mut cfg = GmjmcmcConfig::preset("1").unwrap();
        cfg.n_init = 100;
        cfg.d = 10 + (seed as usize % 6);
        cfg.k_max = 3 + seed as usize % 5;
        cfg.c_max = 2 + seed as usize % 3;
        cfg.random_init = seed % 5 == 4;
        let ctx = DataContext::new(&data, PriorKind::Jeffreys, RobustGConfig::default(), cfg.prior_cfg(data.m()).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pop = initialize(&ctx, &cfg, &mut rng, &mut MarglikCache::new()).unwrap();
        let founders = pop.founders().to_vec();
        check_population(&pop, &founders, &cfg);
        for _ in 0..15 {
            let inclusion: Vec<f64> = (0..pop.d())
                .map(|_| if rng.gen_bool(0.5) { 0.0 } else { rng.gen::<f64>() })
                .collect();
            pop = evolve(&pop, &inclusion, &cfg, data.m(), &mut rng).unwrap();
            check_population(&pop, &founders, &cfg);
        }
    }
}

fn summary(pop: &Population, probs: &[f64], log_mass: f64) -> ChainSummary {
    ChainSummary {
        trees: pop
            .trees()
            .iter()
            .zip(probs)
            .map(|(t, &probability)| TreeProbability {
                key: t.canonical_key().unwrap().polarity_free(),
                tree: t.clone(),
                probability,
            })
            .collect(),
        log_mass,
        generations: 1,
        models_visited: 1,
        seed: 0,
        final_population: pop.snapshot(probs),
        n_founders: 0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn aggregation_weights_form_a_distribution(
        chains in prop::collection::vec(
            (prop::collection::vec(0.0f64..=1.0, 28), -1e4f64..1e4, prop::sample::subsequence((0..28).collect::<Vec<usize>>(), 3..10)),
            1..6,
        ),
    ) {
        let all = trees_m4_cmax2();
        let summaries: Vec<ChainSummary> = chains
            .iter()
            .map(|(probs, s, pick)| {
                let pop = Population::new(pick.iter().map(|&i| all[i].clone()).collect(), 0, 0).unwrap();
                let p: Vec<f64> = pick.iter().map(|&i| probs[i]).collect();
                summary(&pop, &p, *s)
            })
            .collect();
        let agg = aggregate(&summaries).unwrap();
        prop_assert!(agg.weights.iter().all(|&w| w >= 0.0));
        prop_assert!((agg.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(agg.trees.iter().all(|t| (0.0..=1.0).contains(&t.probability)));
    }
}

#[test]
fn identical_chains_share_weight_equally() {
    let all = trees_m4_cmax2();
    let pop = Population::new(all, 0, 0).unwrap();
    let probs: Vec<f64> = (0..28).map(|i| i as f64 / 28.0).collect();
    for b in 1..=6 {
        let summaries = vec![summary(&pop, &probs, -1234.5); b];
        let agg = aggregate(&summaries).unwrap();
        assert!(agg.weights.iter().all(|w| (w - 1.0 / b as f64).abs() < 1e-12));
        for (t, p) in agg.trees.iter().zip(&probs) {
            assert!((t.probability - p).abs() < 1e-12);
        }
    }
}

/// Gaussian data over four covariates driven by `X1 ∧ ¬X2` and `X3`.
fn toy_data(seed: u64, n: usize) -> logicreg::Dataset {
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cols = common::random_columns(&mut rng, n, 4, 0.5);
    let y = (0..n)
        .map(|i| {
            let z: f64 = StandardNormal.sample(&mut rng);
            let a = cols[0].get(i) && !cols[1].get(i);
            1.0 + 0.8 * f64::from(u8::from(a)) + 0.5 * f64::from(u8::from(cols[2].get(i))) + z
        })
        .collect();
    logicreg::Dataset::new(cols, y, logicreg::Family::Gaussian).unwrap()
}

/// Posterior inclusion of every tree by enumerating all models of at most
/// two trees, with the prior `1 / N(s)` per tree written out by hand. Also
/// returns the log of the total unnormalized posterior mass.
fn enumerated_inclusion(data: &logicreg::Dataset, trees: &[LogicTree]) -> (Vec<f64>, f64) {
    let log_n_trees = |s: usize| if s == 1 { 4f64.ln() } else { 24f64.ln() };
    let models = subsets_up_to(trees.len(), 2);
    let logs: Vec<f64> = models
        .iter()
        .map(|s| {
            let chosen: Vec<&LogicTree> = s.iter().map(|&j| &trees[j]).collect();
            let (_, rss) = ols(&design_rows(&chosen, data), data.y()).unwrap();
            let prior: f64 = chosen.iter().map(|t| -log_n_trees(t.size())).sum();
            gaussian_jeffreys(data.n(), rss, s.len()) + prior
        })
        .collect();
    let z = log_sum_exp(&logs);
    let mut inclusion = vec![0.0; trees.len()];
    for (s, l) in models.iter().zip(&logs) {
        for &j in s {
            inclusion[j] += (l - z).exp();
        }
    }
    (inclusion, z)
}

fn coverage_config() -> GmjmcmcConfig {
    let mut cfg = GmjmcmcConfig::preset("1").unwrap();
    cfg.k_max = 2;
    cfg.c_max = 2;
    cfg.d = 28;
    cfg.t_max = 3;
    cfg.n_expl = 100;
    cfg.m_fin = 407;
    cfg.max_final_steps = Some(1_000_000);
    cfg
}

#[test]
fn chains_converge_to_enumeration_on_coverage() {
    let data = toy_data(5, 150);
    let trees = trees_m4_cmax2();
    let (expected, log_mass) = enumerated_inclusion(&data, &trees);
    let cfg = coverage_config();
    let ctx = DataContext::new(&data, PriorKind::Jeffreys, RobustGConfig::default(), cfg.prior_cfg(4).unwrap());
    let summaries: Vec<ChainSummary> = (0..3)
        .map(|seed| run_chain_from(&ctx, &cfg, Population::new(trees.clone(), 4, 0).unwrap(), seed).unwrap())
        .collect();
    for s in &summaries {
        assert_eq!(s.trees.len(), 28);
        // the final store holds every model exactly when its mass is the total
        assert!((s.log_mass - log_mass).abs() < 1e-9, "{} vs {log_mass}", s.log_mass);
    }
    let agg = aggregate(&summaries).unwrap();
    for (tree, want) in trees.iter().zip(&expected) {
        let key = tree.canonical_key().unwrap().polarity_free();
        let got = agg.trees.iter().find(|t| t.key == key).unwrap().probability;
        assert!((got - want).abs() < 1e-10, "{tree}: {got} vs {want}");
    }
}

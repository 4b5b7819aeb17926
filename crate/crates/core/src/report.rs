//! Serializable run reports and their flat CSV forms.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Family};
use crate::gmjmcmc::{detect, Aggregate, AggregatedTree, ChainSummary, GmjmcmcConfig, GmjmcmcError};
use crate::likelihood::PriorKind;
use crate::simbench::{BenchConfig, CurvePoint, DetectionReport, ReplicateResult, Scenario, SweepAxis};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub tree: String,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeReport {
    pub tree: String,
    pub probability: f64,
    pub per_chain: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub seed: u64,
    pub log_mass: f64,
    pub weight: f64,
    pub generations: usize,
    pub models_visited: usize,
    pub founders: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub n: usize,
    pub m: usize,
    pub family: Family,
    /// `(dropped, kept)` pairs of identical covariates.
    pub dropped_duplicates: Vec<(String, String)>,
}

/// Result of analyzing one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub data: DataSummary,
    pub prior: PriorKind,
    pub threshold: f64,
    pub config: GmjmcmcConfig,
    pub chains: Vec<ChainReport>,
    /// Final-generation trees of all chains, by probability.
    pub trees: Vec<TreeReport>,
    pub detections: Vec<Detection>,
}

fn sort_trees(trees: &mut [TreeReport]) {
    trees.sort_by(|a, b| b.probability.total_cmp(&a.probability).then_with(|| a.tree.cmp(&b.tree)));
}

fn label(data: &Dataset<f64>, t: &AggregatedTree) -> String {
    t.tree.display_with(data.labels()).to_string()
}

impl AnalysisReport {
    pub fn new(
        data: &Dataset<f64>,
        dropped: Vec<(String, String)>,
        cfg: &GmjmcmcConfig,
        prior: PriorKind,
        threshold: f64,
        summaries: &[ChainSummary],
        agg: &Aggregate,
    ) -> Result<Self, GmjmcmcError> {
        let detections = detect(agg, threshold)?
            .iter()
            .map(|t| Detection {
                tree: label(data, t),
                probability: t.probability,
            })
            .collect();
        let mut trees: Vec<TreeReport> = agg
            .trees
            .iter()
            .map(|t| TreeReport {
                tree: label(data, t),
                probability: t.probability,
                per_chain: t.per_chain.clone(),
            })
            .collect();
        sort_trees(&mut trees);
        let chains = summaries
            .iter()
            .zip(&agg.weights)
            .map(|(s, &weight)| ChainReport {
                seed: s.seed,
                log_mass: s.log_mass,
                weight,
                generations: s.generations,
                models_visited: s.models_visited,
                founders: s.n_founders,
            })
            .collect();
        Ok(Self {
            data: DataSummary {
                n: data.n(),
                m: data.m(),
                family: data.family(),
                dropped_duplicates: dropped,
            },
            prior,
            threshold,
            config: cfg.clone(),
            chains,
            trees,
            detections,
        })
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// `tree,probability` table.
pub fn detections_csv(detections: &[Detection]) -> String {
    let mut s = String::from("tree,probability\n");
    for d in detections {
        writeln!(s, "{},{}", csv_field(&d.tree), d.probability).unwrap();
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateReport {
    pub data_seed: u64,
    pub models_visited: usize,
    pub detections: Vec<Detection>,
}

/// Result of a simulation benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub scenario: Scenario,
    pub settings: BenchConfig,
    pub metrics: DetectionReport,
    pub replicates: Vec<ReplicateReport>,
}

impl BenchReport {
    pub fn new(scenario: &Scenario, settings: &BenchConfig, metrics: DetectionReport, results: &[ReplicateResult]) -> Self {
        let replicates = results
            .iter()
            .map(|r| ReplicateReport {
                data_seed: r.data_seed,
                models_visited: r.models_visited,
                detections: r
                    .detections
                    .iter()
                    .map(|(t, p)| Detection {
                        tree: t.to_string(),
                        probability: *p,
                    })
                    .collect(),
            })
            .collect();
        Self {
            scenario: scenario.clone(),
            settings: settings.clone(),
            metrics,
            replicates,
        }
    }
}

/// `metric,value` table: per-tree power, summary rates and false-positive
/// class tallies.
pub fn metrics_csv(report: &DetectionReport, scenario: &Scenario) -> String {
    let mut s = String::from("metric,value\n");
    for (j, (t, p)) in scenario.trees.iter().zip(&report.power).enumerate() {
        writeln!(s, "{},{p}", csv_field(&format!("power L{} = {t}", j + 1))).unwrap();
    }
    writeln!(s, "overall_power,{}", report.overall_power).unwrap();
    writeln!(s, "fp,{}", report.fp_mean).unwrap();
    writeln!(s, "fdr,{}", report.fdr).unwrap();
    writeln!(s, "wl,{}", report.wl_total).unwrap();
    for (j, v) in report.within_tree.iter().enumerate() {
        writeln!(s, "v(L{}),{v}", j + 1).unwrap();
    }
    writeln!(s, "v(M),{}", report.within_model).unwrap();
    for (i, v) in report.wrong_leaves.iter().enumerate() {
        let name = if i == 2 { "WL(3+)".to_string() } else { format!("WL({})", i + 1) };
        writeln!(s, "{name},{v}").unwrap();
    }
    if let Some(eq) = &report.equivalence {
        writeln!(s, "equivalence_power L{},{}", eq.tree + 1, eq.adjusted_power).unwrap();
        writeln!(s, "equivalence_overall_power,{}", eq.overall_power).unwrap();
        writeln!(s, "equivalence_fp,{}", eq.fp_mean).unwrap();
        writeln!(s, "equivalence_fdr,{}", eq.fdr).unwrap();
    }
    s
}

/// `<axis>,power,replicates` table.
pub fn curve_csv(axis: SweepAxis, curve: &[CurvePoint]) -> String {
    let mut s = format!("{axis},power,replicates\n");
    for p in curve {
        writeln!(s, "{},{},{}", p.value, p.power, p.replicates).unwrap();
    }
    s
}

//! Recovery measurements on the planted feature oracle.

use ncc_core::scores::{
    causal_anticausal_pair, hypothesis_report, pairwise_object_relations, planted_relation,
    synth_feature_oracle, top_fraction, OracleBundle, OracleConfig, ScoreTable,
};
use ncc_core::synthgen::{generate_scatterplot, sample_effect};
use ncc_core::{GeneratorConfig, NccModel};

use super::rng;

pub struct OracleRun {
    pub oracle: OracleBundle,
    pub tables: Vec<ScoreTable>,
    /// Supporting classes at the 1% fraction.
    pub support: usize,
}

pub fn score_oracle(model: &NccModel, cfg: &OracleConfig, seed: u64) -> OracleRun {
    let oracle = synth_feature_oracle(cfg, &mut rng(seed)).unwrap();
    let (report, tables) = hypothesis_report(&oracle.set.bundles, model, &[0.01, 0.20]).unwrap();
    let support = report.support_at(0.01).unwrap().supporting;
    OracleRun {
        oracle,
        tables,
        support,
    }
}

fn column(table: &ScoreTable, key: impl Fn(&ncc_core::scores::FeatureScores) -> f64) -> Vec<f64> {
    table
        .rows
        .iter()
        .map(|r| r.as_ref().map_or(f64::NAN, &key))
        .collect()
}

/// Mean over classes of the fraction of planted anticausal features in the top `q` by `key`.
pub fn recall(
    run: &OracleRun,
    q: f64,
    key: impl Fn(&ncc_core::scores::FeatureScores) -> f64 + Copy,
) -> f64 {
    let per_class: Vec<f64> = run
        .tables
        .iter()
        .zip(&run.oracle.truth)
        .map(|(t, truth)| {
            let top = top_fraction(&column(t, key), q);
            truth.anticausal.iter().filter(|l| top.contains(l)).count() as f64
                / truth.anticausal.len() as f64
        })
        .collect();
    per_class.iter().sum::<f64>() / per_class.len() as f64
}

pub fn anticausal_recall(run: &OracleRun, q: f64) -> f64 {
    recall(run, q, |s| s.anticausal)
}

pub fn abs_correlation_recall(run: &OracleRun, q: f64) -> f64 {
    recall(run, q, |s| s.correlation.map_or(f64::NAN, f64::abs))
}

/// Mean causal and anticausal score over the independent features of every class.
pub fn independent_means(run: &OracleRun) -> (f64, f64) {
    let (mut c, mut a, mut n) = (0.0, 0.0, 0.0);
    for (t, truth) in run.tables.iter().zip(&run.oracle.truth) {
        for &l in &truth.independent {
            if let Some(s) = &t.rows[l] {
                c += s.causal;
                a += s.anticausal;
                n += 1.0;
            }
        }
    }
    (c / n, a / n)
}

/// Features whose causal and anticausal scores do not sum to exactly one.
pub fn unit_sum_violations(run: &OracleRun) -> usize {
    run.tables
        .iter()
        .flat_map(|t| t.rows.iter().flatten())
        .filter(|s| s.causal + s.anticausal != 1.0)
        .count()
}

/// Share of trials where an additive-noise child of `c` scores more anticausal than causal.
pub fn child_direction_rate(model: &NccModel, trials: usize, m: usize, seed: u64) -> f64 {
    let gen = GeneratorConfig::default().with_points(m);
    let mut r = rng(seed);
    let mut hits = 0;
    for _ in 0..trials {
        let c = generate_scatterplot(&gen, &mut r).unwrap().ys();
        let child = loop {
            if let Ok(e) = sample_effect(&gen, &c, &mut r) {
                break e.ys;
            }
        };
        let (causal, anticausal) = causal_anticausal_pair(model, &child, &c).unwrap();
        hits += usize::from(anticausal > causal);
    }
    hits as f64 / trials as f64
}

/// Share of trials where the planted relation `0 -> 1` gets a score above one half.
pub fn planted_relation_rate(model: &NccModel, trials: usize, m: usize, seed: u64) -> f64 {
    let gen = GeneratorConfig::default().with_points(m);
    let mut r = rng(seed);
    let mut hits = 0;
    for _ in 0..trials {
        let logodds = planted_relation(&gen, 3, 0, 1, &mut r).unwrap();
        let rel = pairwise_object_relations(logodds.view(), model).unwrap();
        let planted = rel.iter().find(|x| x.cause == 0 && x.effect == 1).unwrap();
        hits += usize::from(planted.score > 0.5);
    }
    hits as f64 / trials as f64
}

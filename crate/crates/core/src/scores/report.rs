use super::{score_bundle, FeatureBundle, ScoreError, ScoreTable};
use crate::ncc::NccModel;
use crate::stats::mean_std;

pub const DEFAULT_FRACTIONS: [f64; 2] = [0.01, 0.20];

/// Directed relation "`cause` causes `effect`" with its score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Relation {
    pub cause: usize,
    pub effect: usize,
    pub score: f64,
}

/// Object and context score summaries over the top anticausal and top causal features of one class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisRow {
    pub class_id: usize,
    pub q: f64,
    pub selected: usize,
    pub anticausal_object: (f64, f64),
    pub anticausal_context: (f64, f64),
    pub causal_object: (f64, f64),
    pub causal_context: (f64, f64),
    /// Mean object score of top-anticausal features strictly exceeds that of top-causal ones.
    pub supports: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportCount {
    pub q: f64,
    pub supporting: usize,
    pub classes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    pub rows: Vec<HypothesisRow>,
    pub support: Vec<SupportCount>,
    pub excluded_features: usize,
}

fn summarize(table: &ScoreTable, q: f64) -> HypothesisRow {
    let anti = table.top_by(q, |s| s.anticausal);
    let causal = table.top_by(q, |s| s.causal);
    let pick = |idx: &[usize], f: fn(&super::FeatureScores) -> f64| {
        let v: Vec<f64> = idx
            .iter()
            .map(|&i| f(table.rows[i].as_ref().expect("live")))
            .collect();
        mean_std(&v)
    };
    let anticausal_object = pick(&anti, |s| s.object);
    let causal_object = pick(&causal, |s| s.object);
    HypothesisRow {
        class_id: table.class_id,
        q,
        selected: anti.len(),
        anticausal_object,
        anticausal_context: pick(&anti, |s| s.context),
        causal_object,
        causal_context: pick(&causal, |s| s.context),
        supports: anticausal_object.0 > causal_object.0,
    }
}

impl HypothesisReport {
    pub fn from_tables(tables: &[ScoreTable], fractions: &[f64]) -> Self {
        let mut rows = Vec::new();
        let mut support = Vec::new();
        for &q in fractions {
            let before = rows.len();
            rows.extend(
                tables
                    .iter()
                    .filter(|t| !t.live().is_empty())
                    .map(|t| summarize(t, q)),
            );
            let supporting = rows[before..].iter().filter(|r| r.supports).count();
            support.push(SupportCount {
                q,
                supporting,
                classes: rows.len() - before,
            });
        }
        let excluded_features = tables.iter().map(ScoreTable::excluded).sum();
        Self {
            rows,
            support,
            excluded_features,
        }
    }

    pub fn support_at(&self, q: f64) -> Option<SupportCount> {
        self.support.iter().copied().find(|s| s.q == q)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "class_id,q,selected,anticausal_object_mean,anticausal_object_std,anticausal_context_mean,\
             anticausal_context_std,causal_object_mean,causal_object_std,causal_context_mean,causal_context_std,supports\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.class_id,
                r.q,
                r.selected,
                r.anticausal_object.0,
                r.anticausal_object.1,
                r.anticausal_context.0,
                r.anticausal_context.1,
                r.causal_object.0,
                r.causal_object.1,
                r.causal_context.0,
                r.causal_context.1,
                u8::from(r.supports)
            ));
        }
        out
    }

    /// One line per fraction, e.g. `q=0.01: 5/5 classes support`.
    pub fn summary(&self) -> String {
        self.support
            .iter()
            .map(|s| {
                format!(
                    "q={}: {}/{} classes support\n",
                    s.q, s.supporting, s.classes
                )
            })
            .collect()
    }
}

/// Scores every bundle and summarizes the top-`q` features for each fraction.
pub fn hypothesis_report(
    bundles: &[FeatureBundle],
    model: &NccModel,
    fractions: &[f64],
) -> Result<(HypothesisReport, Vec<ScoreTable>), ScoreError> {
    if bundles.is_empty() {
        return Err(ScoreError::InvalidBundle("no bundles".into()));
    }
    let tables = bundles
        .iter()
        .map(|b| score_bundle(model, b))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((HypothesisReport::from_tables(&tables, fractions), tables))
}

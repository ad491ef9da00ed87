//! Object, context, causal and anticausal scores of image features.
//!
//! A [`FeatureBundle`] holds, for one class, the features of every image
//! computed three ways (original, context blacked out, object blacked out)
//! plus the class log odds. Object and context scores measure how much a
//! feature moves when the object or its context is removed; causal and
//! anticausal scores come from the causation coefficient applied to
//! (feature, log odds) pairs.

mod exchange;
mod oracle;
mod report;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use thiserror::Error;

use crate::ncc::{symmetric_score, NccError, NccModel};
use crate::stats;
use crate::synthgen::{standardize, SynthError};

pub use exchange::{load_bundles, write_bundles, BundleSet, FEATURE_FILES, MANIFEST_FILE};
pub use oracle::{
    planted_relation, synth_feature_oracle, OracleBundle, OracleConfig, PlantedTruth,
};
pub use report::{
    hypothesis_report, HypothesisReport, HypothesisRow, Relation, SupportCount, DEFAULT_FRACTIONS,
};

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("feature {feature} is zero on every image")]
    DeadFeature { feature: usize },
    #[error("feature {feature} is constant across images")]
    ConstantFeature { feature: usize },
    #[error("log odds of class {class_id} are constant across images")]
    ConstantLogOdds { class_id: usize },
    #[error("invalid bundle: {0}")]
    InvalidBundle(String),
    #[error("{path}: {msg}")]
    Format { path: String, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Ncc(#[from] NccError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

/// Features of one class over `m` images.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBundle {
    pub class_id: usize,
    /// Original-image features, `m x L`.
    pub f: Array2<f64>,
    /// Context blacked out, object kept.
    pub f_object: Array2<f64>,
    /// Object blacked out, context kept.
    pub f_context: Array2<f64>,
    /// Log odds of `class_id` per image.
    pub logodds: Vec<f64>,
}

impl FeatureBundle {
    pub fn new(
        class_id: usize,
        f: Array2<f64>,
        f_object: Array2<f64>,
        f_context: Array2<f64>,
        logodds: Vec<f64>,
    ) -> Result<Self, ScoreError> {
        let b = Self {
            class_id,
            f,
            f_object,
            f_context,
            logodds,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), ScoreError> {
        let dim = self.f.dim();
        if self.f_object.dim() != dim || self.f_context.dim() != dim {
            return Err(ScoreError::InvalidBundle(format!(
                "matrix shapes differ: {:?}, {:?}, {:?}",
                dim,
                self.f_object.dim(),
                self.f_context.dim()
            )));
        }
        if self.logodds.len() != dim.0 {
            return Err(ScoreError::InvalidBundle(format!(
                "{} log odds for {} images",
                self.logodds.len(),
                dim.0
            )));
        }
        if dim.0 < 2 {
            return Err(ScoreError::InvalidBundle(format!(
                "need at least 2 images, got {}",
                dim.0
            )));
        }
        let finite = |m: &Array2<f64>| m.iter().all(|v| v.is_finite());
        if !(finite(&self.f) && finite(&self.f_object) && finite(&self.f_context))
            || !self.logodds.iter().all(|v| v.is_finite())
        {
            return Err(ScoreError::InvalidBundle("non-finite value".into()));
        }
        Ok(())
    }

    pub fn images(&self) -> usize {
        self.f.nrows()
    }

    pub fn features(&self) -> usize {
        self.f.ncols()
    }
}

/// `s^o_l = sum_j |f^c_jl - f_jl| / sum_j |f_jl|` and the same with `f^o` for `s^c_l`.
pub fn object_context_score(bundle: &FeatureBundle, l: usize) -> Result<(f64, f64), ScoreError> {
    let f = bundle.f.column(l);
    let denom: f64 = f.iter().map(|v| v.abs()).sum();
    if denom == 0.0 {
        return Err(ScoreError::DeadFeature { feature: l });
    }
    let deviation = |other: ArrayView1<f64>| {
        f.iter().zip(other).map(|(a, b)| (b - a).abs()).sum::<f64>() / denom
    };
    Ok((
        deviation(bundle.f_context.column(l)),
        deviation(bundle.f_object.column(l)),
    ))
}

/// Object and context score per feature; dead features yield an error entry.
pub fn object_context_scores(bundle: &FeatureBundle) -> Vec<Result<(f64, f64), ScoreError>> {
    (0..bundle.features())
        .map(|l| object_context_score(bundle, l))
        .collect()
}

/// `(1 - sym({(f, c)}), 1 - sym({(c, f)}))` on standardized columns.
///
/// Both come from the same two forward passes, so they sum to exactly one.
pub fn causal_anticausal_pair(
    model: &NccModel,
    feature: &[f64],
    logodds: &[f64],
) -> Result<(f64, f64), NccError> {
    let points: Vec<[f64; 2]> = feature.iter().zip(logodds).map(|(&f, &c)| [f, c]).collect();
    let (p, q) = model.forward_both(&points)?;
    Ok((1.0 - symmetric_score(p, q), 1.0 - symmetric_score(q, p)))
}

fn standardized_logodds(bundle: &FeatureBundle) -> Result<Vec<f64>, ScoreError> {
    standardize(&bundle.logodds).map_err(|_| ScoreError::ConstantLogOdds {
        class_id: bundle.class_id,
    })
}

fn causal_anticausal_column(
    model: &NccModel,
    bundle: &FeatureBundle,
    c: &[f64],
    l: usize,
) -> Result<(f64, f64), ScoreError> {
    let col: Vec<f64> = bundle.f.column(l).to_vec();
    if col.iter().all(|&v| v == 0.0) {
        return Err(ScoreError::DeadFeature { feature: l });
    }
    let f = standardize(&col).map_err(|_| ScoreError::ConstantFeature { feature: l })?;
    Ok(causal_anticausal_pair(model, &f, c)?)
}

/// Per-feature `(causal, anticausal)` or the reason the feature was skipped.
pub type FeatureResult = Result<(f64, f64), ScoreError>;

/// Causal and anticausal score per feature, computed in parallel over features.
pub fn causal_anticausal_scores(
    model: &NccModel,
    bundle: &FeatureBundle,
) -> Result<Vec<FeatureResult>, ScoreError> {
    let c = standardized_logodds(bundle)?;
    let out = (0..bundle.features())
        .into_par_iter()
        .map(|l| causal_anticausal_column(model, bundle, &c, l))
        .collect();
    Ok(out)
}

/// Pearson correlation between each feature column and the log odds.
pub fn correlation_baseline(bundle: &FeatureBundle) -> Vec<Option<f64>> {
    (0..bundle.features())
        .map(|l| {
            let col = bundle.f.column(l).to_vec();
            stats::pearson(&col, &bundle.logodds)
        })
        .collect()
}

/// Number of items selected from `len` at fraction `q`: `ceil(q * len)`, at least one.
///
/// The small slack keeps products such as `0.07 * 100` from rounding up past their integer value.
pub fn top_count(len: usize, q: f64) -> usize {
    let k = (q * len as f64 - 1e-9).ceil() as usize;
    k.clamp(1, len.max(1))
}

/// Ascending indices of the `top_count(len, q)` largest scores; ties go to the lower index.
///
/// `NaN` entries are never selected ahead of a number.
pub fn top_fraction(scores: &[f64], q: f64) -> Vec<usize> {
    assert!(q > 0.0 && q <= 1.0, "top_fraction: q = {q} outside (0, 1]");
    if scores.is_empty() {
        return Vec::new();
    }
    let k = top_count(scores.len(), q);
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (scores[a], scores[b]);
        match (x.is_nan(), y.is_nan()) {
            (false, false) => y.total_cmp(&x).then(a.cmp(&b)),
            (nx, ny) => nx.cmp(&ny).then(a.cmp(&b)),
        }
    });
    order.truncate(k);
    order.sort_unstable();
    order
}

/// All scores of one feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureScores {
    pub object: f64,
    pub context: f64,
    pub causal: f64,
    pub anticausal: f64,
    /// `None` when the correlation is undefined.
    pub correlation: Option<f64>,
}

/// Per-feature scores of one class; `None` marks an excluded (dead or constant) feature.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub class_id: usize,
    pub rows: Vec<Option<FeatureScores>>,
}

impl ScoreTable {
    /// Indices of scored features.
    pub fn live(&self) -> Vec<usize> {
        self.rows
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.map(|_| i))
            .collect()
    }

    pub fn excluded(&self) -> usize {
        self.rows.iter().filter(|r| r.is_none()).count()
    }

    /// Feature indices of the top-`q` fraction of live features under `key`.
    pub fn top_by<F: Fn(&FeatureScores) -> f64>(&self, q: f64, key: F) -> Vec<usize> {
        let live = self.live();
        let values: Vec<f64> = live
            .iter()
            .map(|&i| key(self.rows[i].as_ref().expect("live")))
            .collect();
        top_fraction(&values, q)
            .into_iter()
            .map(|j| live[j])
            .collect()
    }

    /// CSV with one row per feature; excluded features have empty score fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "feature,excluded,object,context,causal,anticausal,correlation,abs_correlation\n",
        );
        for (l, row) in self.rows.iter().enumerate() {
            match row {
                Some(s) => {
                    let (corr, abs) = match s.correlation {
                        Some(c) => (c.to_string(), c.abs().to_string()),
                        None => (String::new(), String::new()),
                    };
                    out.push_str(&format!(
                        "{l},0,{},{},{},{},{corr},{abs}\n",
                        s.object, s.context, s.causal, s.anticausal
                    ));
                }
                None => out.push_str(&format!("{l},1,,,,,,\n")),
            }
        }
        out
    }
}

impl ScoreTable {
    /// Parses the output of [`ScoreTable::to_csv`].
    pub fn from_csv(class_id: usize, text: &str) -> Result<Self, String> {
        let mut lines = text.lines();
        let header = lines.next().ok_or("empty score table")?;
        if header != "feature,excluded,object,context,causal,anticausal,correlation,abs_correlation"
        {
            return Err(format!("unexpected header `{header}`"));
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            let lineno = i + 2;
            if fields.len() != 8 {
                return Err(format!(
                    "line {lineno}: expected 8 fields, found {}",
                    fields.len()
                ));
            }
            if fields[0].parse::<usize>().ok() != Some(rows.len()) {
                return Err(format!(
                    "line {lineno}: feature index `{}` out of sequence",
                    fields[0]
                ));
            }
            let num = |j: usize| {
                fields[j]
                    .parse::<f64>()
                    .map_err(|_| format!("line {lineno}: bad number `{}`", fields[j]))
            };
            match fields[1] {
                "1" => rows.push(None),
                "0" => rows.push(Some(FeatureScores {
                    object: num(2)?,
                    context: num(3)?,
                    causal: num(4)?,
                    anticausal: num(5)?,
                    correlation: if fields[6].is_empty() {
                        None
                    } else {
                        Some(num(6)?)
                    },
                })),
                other => return Err(format!("line {lineno}: excluded flag `{other}`")),
            }
        }
        Ok(Self { class_id, rows })
    }
}

/// Computes every score of every feature of `bundle`.
pub fn score_bundle(model: &NccModel, bundle: &FeatureBundle) -> Result<ScoreTable, ScoreError> {
    bundle.validate()?;
    let oc = object_context_scores(bundle);
    let ca = causal_anticausal_scores(model, bundle)?;
    let corr = correlation_baseline(bundle);
    let rows = oc
        .into_iter()
        .zip(ca)
        .zip(corr)
        .enumerate()
        .map(|(l, ((oc, ca), correlation))| match (oc, ca) {
            (Ok((object, context)), Ok((causal, anticausal))) => Some(FeatureScores {
                object,
                context,
                causal,
                anticausal,
                correlation,
            }),
            (Err(e), _) | (_, Err(e)) => {
                log::debug!("class {}: feature {l} excluded: {e}", bundle.class_id);
                None
            }
        })
        .collect();
    Ok(ScoreTable {
        class_id: bundle.class_id,
        rows,
    })
}

/// Directed relations between all ordered class pairs, strongest first.
///
/// `score(a, b) = 1 - sym({(c_a, c_b)})` reads "a causes b"; columns are standardized first.
pub fn pairwise_object_relations(
    logodds: ArrayView2<f64>,
    model: &NccModel,
) -> Result<Vec<Relation>, ScoreError> {
    let k = logodds.ncols();
    if k < 2 {
        return Err(ScoreError::InvalidBundle(format!(
            "need log odds for at least 2 classes, got {k}"
        )));
    }
    let cols: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            standardize(&logodds.column(j).to_vec())
                .map_err(|_| ScoreError::ConstantLogOdds { class_id: j })
        })
        .collect::<Result<_, _>>()?;
    let pairs: Vec<(usize, usize)> = (0..k)
        .flat_map(|a| (a + 1..k).map(move |b| (a, b)))
        .collect();
    let scored: Vec<[Relation; 2]> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let (ab, ba) = causal_anticausal_pair(model, &cols[a], &cols[b])?;
            Ok([
                Relation {
                    cause: a,
                    effect: b,
                    score: ab,
                },
                Relation {
                    cause: b,
                    effect: a,
                    score: ba,
                },
            ])
        })
        .collect::<Result<_, NccError>>()?;
    let mut out: Vec<Relation> = scored.into_iter().flatten().collect();
    out.sort_by(|x, y| {
        y.score
            .total_cmp(&x.score)
            .then(x.cause.cmp(&y.cause))
            .then(x.effect.cmp(&y.effect))
    });
    Ok(out)
}

/// CSV `rank,cause,effect,score`, using class names when given.
pub fn relations_csv(relations: &[Relation], names: Option<&[String]>) -> String {
    let name = |i: usize| {
        names
            .and_then(|n| n.get(i).cloned())
            .unwrap_or_else(|| format!("class_{i}"))
    };
    let mut out = String::from("rank,cause,effect,score\n");
    for (r, rel) in relations.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r + 1,
            name(rel.cause),
            name(rel.effect),
            rel.score
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ncc::Architecture;
    use crate::seed::rng_from_seed;
    use ndarray::array;

    fn bundle(f: Array2<f64>, fo: Array2<f64>, fc: Array2<f64>) -> FeatureBundle {
        let m = f.nrows();
        let c = (0..m).map(|i| i as f64).collect();
        FeatureBundle::new(0, f, fo, fc, c).unwrap()
    }

    #[test]
    fn object_score_arithmetic() {
        let f = array![[1.0], [1.0]];
        let b = bundle(f.clone(), f.clone(), array![[0.0], [2.0]]);
        assert_eq!(object_context_score(&b, 0).unwrap(), (1.0, 0.0));
    }

    #[test]
    fn unchanged_context_matrix_gives_zero_object_score() {
        let f = array![[0.3, -1.0], [2.0, 0.5], [1.5, 1.5]];
        let b = bundle(f.clone(), f.clone() * 0.5, f.clone());
        for r in object_context_scores(&b) {
            assert_eq!(r.unwrap().0, 0.0);
        }
    }

    #[test]
    fn dead_feature_is_reported() {
        let f = array![[0.0, 1.0], [0.0, 2.0]];
        let b = bundle(f.clone(), f.clone(), f.clone());
        assert!(matches!(
            object_context_score(&b, 0),
            Err(ScoreError::DeadFeature { feature: 0 })
        ));
        assert!(object_context_score(&b, 1).is_ok());
    }

    #[test]
    fn joint_rescaling_leaves_scores_unchanged() {
        let f = array![[0.3, -1.0], [2.0, 0.5], [1.5, 1.25]];
        let fo = array![[0.1, -0.5], [2.5, 0.0], [1.0, 1.0]];
        let fc = array![[0.0, -1.5], [1.0, 0.75], [1.5, 3.0]];
        let a = bundle(f.clone(), fo.clone(), fc.clone());
        let b = bundle(f * 4.0, fo * 4.0, fc * 4.0);
        for l in 0..2 {
            assert_eq!(
                object_context_score(&a, l).unwrap(),
                object_context_score(&b, l).unwrap()
            );
        }
    }

    #[test]
    fn top_counts() {
        assert_eq!(top_count(512, 0.01), 6);
        assert_eq!(top_count(512, 0.20), 103);
        assert_eq!(top_count(100, 0.07), 7);
        assert_eq!(top_count(10, 1e-6), 1);
        assert_eq!(top_count(10, 1.0), 10);
    }

    #[test]
    fn top_fraction_ties_and_order() {
        assert_eq!(top_fraction(&[0.5; 512], 0.01), vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(
            top_fraction(&[0.1, 0.9, 0.3, 0.9, f64::NAN], 0.6),
            vec![1, 2, 3]
        );
    }

    #[test]
    fn correlation_signs() {
        let c: Vec<f64> = vec![0.5, -1.0, 2.0, 0.0];
        let f = Array2::from_shape_fn((4, 2), |(i, j)| if j == 0 { c[i] } else { -c[i] });
        let b = FeatureBundle::new(0, f.clone(), f.clone(), f, c).unwrap();
        let r = correlation_baseline(&b);
        assert!((r[0].unwrap() - 1.0).abs() < 1e-12);
        assert!((r[1].unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn copy_of_logodds_scores_one_half() {
        let model = NccModel::new(Architecture::new(8, 1, 0.0), &mut rng_from_seed(3)).unwrap();
        let c: Vec<f64> = (0..50).map(|i| ((i * 37) % 50) as f64 / 7.0).collect();
        let cs = standardize(&c).unwrap();
        let (causal, anti) = causal_anticausal_pair(&model, &cs, &cs).unwrap();
        assert_eq!((causal, anti), (0.5, 0.5));
    }

    #[test]
    fn score_table_csv_roundtrip() {
        let t = ScoreTable {
            class_id: 3,
            rows: vec![
                Some(FeatureScores {
                    object: 0.1,
                    context: 2.5,
                    causal: 0.3,
                    anticausal: 0.7,
                    correlation: Some(-0.25),
                }),
                None,
                Some(FeatureScores {
                    object: 0.0,
                    context: 0.0,
                    causal: 0.5,
                    anticausal: 0.5,
                    correlation: None,
                }),
            ],
        };
        assert_eq!(ScoreTable::from_csv(3, &t.to_csv()).unwrap(), t);
        assert!(ScoreTable::from_csv(3, "feature\n").is_err());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let f = array![[1.0], [2.0]];
        let err = FeatureBundle::new(
            0,
            f.clone(),
            array![[1.0, 2.0], [3.0, 4.0]],
            f,
            vec![0.0, 1.0],
        );
        assert!(matches!(err, Err(ScoreError::InvalidBundle(_))));
    }
}

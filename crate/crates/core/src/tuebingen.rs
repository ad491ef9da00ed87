//! Tübingen cause-effect pairs: loading and evaluation.
//!
//! Expected layout: `pairmeta.txt` with one line per pair
//! (`id cause_first cause_last effect_first effect_last weight`, 1-based
//! columns) and `pairNNNN.txt` files of whitespace-separated numbers.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::index::sample as sample_indices;
use rayon::prelude::*;
use thiserror::Error;

use crate::ncc::{NccError, NccModel};
use crate::seed::component_rng;
use crate::synthgen::standardize;

/// Longer pairs are subsampled (seeded, without replacement) to this many points.
pub const MAX_POINTS: usize = 5000;

#[derive(Debug, Error)]
pub enum TuebingenError {
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("{path}:{line}: malformed meta line: {msg}")]
    MalformedMeta {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("{path}:{line}: non-numeric value `{value}`")]
    NonNumericData {
        path: PathBuf,
        line: usize,
        value: String,
    },
    #[error("{path}: {msg}")]
    BadShape { path: PathBuf, msg: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairMeta {
    pub id: u32,
    pub cause: (usize, usize),
    pub effect: (usize, usize),
    pub weight: f64,
}

impl PairMeta {
    pub fn is_scalar(&self) -> bool {
        self.cause.0 == self.cause.1 && self.effect.0 == self.effect.1
    }
}

/// One benchmark pair oriented so that `x` causes `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct TuebingenPair {
    pub id: u32,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub weight: f64,
    pub scalar: bool,
}

#[derive(Debug, Clone, Default)]
pub struct LoadedPairs {
    /// Scalar pairs, in meta order.
    pub pairs: Vec<TuebingenPair>,
    /// Ids of multivariate pairs that were excluded.
    pub excluded: Vec<u32>,
}

pub fn parse_meta_line(line: &str) -> Result<PairMeta, String> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 6 {
        return Err(format!("expected 6 fields, found {}", fields.len()));
    }
    let int = |i: usize| {
        fields[i]
            .parse::<usize>()
            .map_err(|_| format!("field {} `{}` is not an integer", i + 1, fields[i]))
    };
    let id = int(0)? as u32;
    let cause = (int(1)?, int(2)?);
    let effect = (int(3)?, int(4)?);
    let weight: f64 = fields[5]
        .parse()
        .map_err(|_| format!("weight `{}` is not a number", fields[5]))?;
    if cause.0 == 0 || effect.0 == 0 || cause.1 < cause.0 || effect.1 < effect.0 {
        return Err(format!("bad column ranges {cause:?} / {effect:?}"));
    }
    if !(weight > 0.0 && weight.is_finite()) {
        return Err(format!("weight {weight} must be positive"));
    }
    Ok(PairMeta {
        id,
        cause,
        effect,
        weight,
    })
}

pub fn read_meta(path: &Path) -> Result<Vec<PairMeta>, TuebingenError> {
    if !path.exists() {
        return Err(TuebingenError::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path).map_err(|source| TuebingenError::Io {
        path: path.into(),
        source,
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            parse_meta_line(l).map_err(|msg| TuebingenError::MalformedMeta {
                path: path.into(),
                line: i + 1,
                msg,
            })
        })
        .collect()
}

/// Reads a whitespace-separated numeric table, one row per line.
pub fn read_table(path: &Path) -> Result<Vec<Vec<f64>>, TuebingenError> {
    if !path.exists() {
        return Err(TuebingenError::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path).map_err(|source| TuebingenError::Io {
        path: path.into(),
        source,
    })?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| TuebingenError::NonNumericData {
                        path: path.into(),
                        line: i + 1,
                        value: v.to_string(),
                    })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn pair_file(dir: &Path, id: u32) -> PathBuf {
    dir.join(format!("pair{id:04}.txt"))
}

/// Loads every pair listed in `pairmeta.txt`; multivariate pairs are excluded.
pub fn load_tuebingen(dir: &Path) -> Result<LoadedPairs, TuebingenError> {
    let meta = read_meta(&dir.join("pairmeta.txt"))?;
    let mut out = LoadedPairs::default();
    for m in meta {
        if !m.is_scalar() {
            out.excluded.push(m.id);
            continue;
        }
        let path = pair_file(dir, m.id);
        let rows = read_table(&path)?;
        let width = m.cause.1.max(m.effect.1);
        let column = |c: usize| -> Result<Vec<f64>, TuebingenError> {
            rows.iter()
                .enumerate()
                .map(|(i, r)| {
                    r.get(c - 1)
                        .copied()
                        .ok_or_else(|| TuebingenError::BadShape {
                            path: path.clone(),
                            msg: format!("row {} has {} columns, need {width}", i + 1, r.len()),
                        })
                })
                .collect()
        };
        let x = column(m.cause.0)?;
        let y = column(m.effect.0)?;
        if x.len() < 2 {
            return Err(TuebingenError::BadShape {
                path,
                msg: format!("only {} rows", x.len()),
            });
        }
        out.pairs.push(TuebingenPair {
            id: m.id,
            x,
            y,
            weight: m.weight,
            scalar: true,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairResult {
    pub id: u32,
    pub n_points: usize,
    pub weight: f64,
    /// Symmetric estimate of `P(X <- Y)` for the ground-truth orientation.
    pub score: f64,
    /// `1` (`X -> Y`) below 0.5, `0` above, `0.5` on a tie.
    pub decision: f64,
    /// Credit earned: 1, 0 or 0.5.
    pub correct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuebingenReport {
    pub results: Vec<PairResult>,
    pub excluded: usize,
    pub weighted_accuracy: f64,
    pub unweighted_accuracy: f64,
}

impl TuebingenReport {
    pub fn from_results(results: Vec<PairResult>, excluded: usize) -> Self {
        let total_w: f64 = results.iter().map(|r| r.weight).sum();
        let weighted = results.iter().map(|r| r.weight * r.correct).sum::<f64>() / total_w;
        let unweighted = results.iter().map(|r| r.correct).sum::<f64>() / results.len() as f64;
        Self {
            results,
            excluded,
            weighted_accuracy: weighted,
            unweighted_accuracy: unweighted,
        }
    }

    /// `id,n_points,weight,score,decision,correct` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["id", "n_points", "weight", "score", "decision", "correct"])?;
        for r in &self.results {
            w.write_record([
                r.id.to_string(),
                r.n_points.to_string(),
                r.weight.to_string(),
                r.score.to_string(),
                r.decision.to_string(),
                r.correct.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Credit for a symmetric score under the `X -> Y` ground truth.
pub fn credit(score: f64) -> f64 {
    if score < 0.5 {
        1.0
    } else if score > 0.5 {
        0.0
    } else {
        0.5
    }
}

/// Standardized, possibly subsampled bag of a pair.
pub fn prepare_points(pair: &TuebingenPair, seed: u64) -> Option<Vec<[f64; 2]>> {
    let n = pair.x.len();
    let idx: Vec<usize> = if n > MAX_POINTS {
        let mut rng = component_rng(seed, &format!("tuebingen/subsample/{}", pair.id));
        let mut v = sample_indices(&mut rng, n, MAX_POINTS).into_vec();
        v.sort_unstable();
        v
    } else {
        (0..n).collect()
    };
    let xs: Vec<f64> = idx.iter().map(|&i| pair.x[i]).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| pair.y[i]).collect();
    let xs = standardize(&xs).ok()?;
    let ys = standardize(&ys).ok()?;
    Some(xs.into_iter().zip(ys).map(|(x, y)| [x, y]).collect())
}

/// Scores every pair in its ground-truth orientation.
///
/// A pair whose column is constant (cannot be standardized) scores 0.5.
pub fn evaluate_tuebingen(
    model: &NccModel,
    pairs: &LoadedPairs,
    seed: u64,
) -> Result<TuebingenReport, NccError> {
    let results = pairs
        .pairs
        .par_iter()
        .map(|p| {
            let (score, n) = match prepare_points(p, seed) {
                Some(pts) => (model.symmetric_points(&pts)?, pts.len()),
                None => (0.5, p.x.len().min(MAX_POINTS)),
            };
            let c = credit(score);
            Ok(PairResult {
                id: p.id,
                n_points: n,
                weight: p.weight,
                score,
                decision: c,
                correct: c,
            })
        })
        .collect::<Result<Vec<_>, NccError>>()?;
    Ok(TuebingenReport::from_results(results, pairs.excluded.len()))
}

impl LoadedPairs {
    /// Every pair with cause and effect exchanged.
    pub fn reversed(&self) -> Self {
        Self {
            pairs: self
                .pairs
                .iter()
                .map(|p| TuebingenPair {
                    x: p.y.clone(),
                    y: p.x.clone(),
                    ..p.clone()
                })
                .collect(),
            excluded: self.excluded.clone(),
        }
    }
}

use std::path::PathBuf;

use rayon::prelude::*;

use super::{
    train, train_cached, validate, validation_set, Architecture, NccError, NccModel, TrainConfig,
};
use crate::seed::derive_indexed_seed;

/// One point of the hyperparameter grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub dropout: f64,
    pub layers: usize,
    pub units: usize,
}

#[derive(Debug, Clone)]
pub struct GridConfig {
    pub dropouts: Vec<f64>,
    pub layers: Vec<usize>,
    pub units: Vec<usize>,
    /// Settings shared by every grid point; its architecture is overridden per point.
    pub base: TrainConfig,
    /// Reuse checkpoints of identical earlier runs from this directory.
    pub cache_dir: Option<PathBuf>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            dropouts: vec![0.1, 0.25, 0.3],
            layers: vec![2, 3],
            units: vec![50, 100, 500],
            base: TrainConfig::default(),
            cache_dir: None,
        }
    }
}

impl GridConfig {
    pub fn points(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for &dropout in &self.dropouts {
            for &layers in &self.layers {
                for &units in &self.units {
                    out.push(GridPoint {
                        dropout,
                        layers,
                        units,
                    });
                }
            }
        }
        out
    }

    /// Training config of the `index`-th point; each point gets its own seed.
    pub fn point_config(&self, index: usize, point: GridPoint) -> TrainConfig {
        TrainConfig {
            architecture: Architecture::new(point.units, point.layers, point.dropout),
            seed: derive_indexed_seed(self.base.seed, "ncc/grid", index as u64),
            ..self.base.clone()
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridRow {
    pub point: GridPoint,
    pub val_accuracy: f64,
    pub parameters: usize,
    pub final_loss: f64,
}

#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub best: NccModel,
    pub best_index: usize,
    pub rows: Vec<GridRow>,
}

impl GridOutcome {
    /// `dropout,layers,units,val_accuracy` rows in grid order.
    pub fn report_csv(&self) -> String {
        let mut out = String::from("dropout,layers,units,val_accuracy\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.point.dropout, r.point.layers, r.point.units, r.val_accuracy
            ));
        }
        out
    }
}

/// Index of the best row: highest accuracy, then fewer parameters, then lower dropout.
pub(crate) fn select_best(rows: &[GridRow]) -> usize {
    let mut best = 0;
    for (i, r) in rows.iter().enumerate().skip(1) {
        let b = &rows[best];
        let better = r.val_accuracy > b.val_accuracy
            || (r.val_accuracy == b.val_accuracy
                && (r.parameters < b.parameters
                    || (r.parameters == b.parameters && r.point.dropout < b.point.dropout)));
        if better {
            best = i;
        }
    }
    best
}

/// Trains every grid point (in parallel on the current rayon pool) and keeps
/// the one with the best held-out synthetic accuracy.
pub fn grid_search(cfg: &GridConfig) -> Result<GridOutcome, NccError> {
    let points = cfg.points();
    if points.is_empty() {
        return Err(NccError::InvalidConfig("empty grid".into()));
    }
    let held_out = validation_set(&cfg.base.generator, cfg.base.validation_size, cfg.base.seed)?;
    let trained = points
        .par_iter()
        .enumerate()
        .map(|(i, &point)| {
            let tc = cfg.point_config(i, point);
            let out = match &cfg.cache_dir {
                Some(dir) => train_cached(&tc, dir)?,
                None => train(&tc)?,
            };
            let val_accuracy = validate(&out.model, &held_out)?;
            log::info!("grid point {point:?}: validation accuracy {val_accuracy:.4}");
            let row = GridRow {
                point,
                val_accuracy,
                parameters: out.model.parameter_count(),
                final_loss: out.history.last().copied().unwrap_or(f64::NAN),
            };
            Ok((row, out.model))
        })
        .collect::<Result<Vec<_>, NccError>>()?;
    let (rows, models): (Vec<GridRow>, Vec<NccModel>) = trained.into_iter().unzip();
    let best_index = select_best(&rows);
    let best = models.into_iter().nth(best_index).expect("index in range");
    Ok(GridOutcome {
        best,
        best_index,
        rows,
    })
}

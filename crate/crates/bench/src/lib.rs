//! Fixtures shared by the benchmarks.

use ncc_core::ncc::TrainingBatch;
use ncc_core::seed::rng_from_seed;
use ncc_core::synthgen::make_training_minibatch;
use ncc_core::{Architecture, CausalSample, GeneratorConfig, NccModel, Objective};

/// A freshly initialized model of the given width with two embedding and two classifier layers.
pub fn model(hidden: usize) -> NccModel {
    NccModel::new(Architecture::new(hidden, 2, 0.25), &mut rng_from_seed(1))
        .expect("valid architecture")
}

/// One training minibatch of `pairs` scatterplots with `m` points each.
pub fn minibatch(pairs: usize, m: usize) -> Vec<CausalSample> {
    let cfg = GeneratorConfig::default().with_points(m);
    make_training_minibatch(&cfg, pairs, false, &mut rng_from_seed(2)).expect("generation succeeds")
}

pub fn batch(samples: &[CausalSample]) -> TrainingBatch<'_> {
    TrainingBatch::new(samples, Objective::Composite).expect("non-empty samples")
}

//! Measurements shared by the property tests and the acceptance run.

use ncc_core::synthgen::generate_scatterplot;
use ncc_core::{Architecture, CausalSample, GeneratorConfig, NccModel};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::rng;

/// A freshly initialized model of random shape with every parameter redrawn.
pub fn random_model(seed: u64) -> NccModel {
    let mut r = rng(seed);
    let arch = Architecture {
        hidden: r.random_range(2..24),
        embedding_layers: r.random_range(1..4),
        classifier_layers: r.random_range(0..3),
        dropout: r.random_range(0.0..0.5),
    };
    let mut model = NccModel::new(arch, &mut r).unwrap();
    let scale = Normal::new(0.0, r.random_range(0.1..2.0)).unwrap();
    for p in model.parameters_mut() {
        for v in p.iter_mut() {
            *v = scale.sample(&mut r);
        }
    }
    model
}

pub fn random_samples(seed: u64, count: usize) -> Vec<CausalSample> {
    let mut r = rng(seed);
    (0..count)
        .map(|_| {
            let m = r.random_range(2..300);
            let s =
                generate_scatterplot(&GeneratorConfig::default().with_points(m), &mut r).unwrap();
            if r.random_bool(0.5) {
                s.swapped()
            } else {
                s
            }
        })
        .collect()
}

/// Number of (model, sample) cases where `sym(S) + sym(swap S) != 1` exactly.
pub fn antisymmetry_violations(models: usize, samples: usize) -> usize {
    let data = random_samples(77, samples);
    (0..models as u64)
        .map(|i| {
            let model = random_model(500 + i);
            data.iter()
                .filter(|s| {
                    let a = model.symmetric(s).unwrap();
                    let b = model.symmetric(&s.swapped()).unwrap();
                    a + b != 1.0
                })
                .count()
        })
        .sum()
}

/// Largest change of `NCC(S)` under a random reordering and under duplicating every point.
pub fn invariance_gap(model: &NccModel, samples: &[CausalSample], seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut gap = 0.0f64;
    for s in samples {
        let base = model.forward_points(&s.points).unwrap();
        let mut shuffled = s.points.clone();
        shuffled.shuffle(&mut r);
        let doubled: Vec<[f64; 2]> = s.points.iter().flat_map(|&p| [p, p]).collect();
        gap = gap
            .max((model.forward_points(&shuffled).unwrap() - base).abs())
            .max((model.forward_points(&doubled).unwrap() - base).abs());
    }
    gap
}

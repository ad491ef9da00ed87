//! Finite-difference checks of every differentiable piece, over random configurations.

use ncc_core::ncc::{composite_loss, per_orientation_loss, TrainingBatch};
use ncc_core::nn::{
    dropout_backward, relu, relu_backward, softmax_xent, BatchNorm, Dense, Dropout, Mode,
};
use ncc_core::synthgen::{generate_scatterplot, permuted_independent};
use ncc_core::{Architecture, GeneratorConfig, NccModel, Objective};
use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{numeric_gradient, relative_error, rng};

pub const STEP: f64 = 1e-5;
pub const CONFIGS: u64 = 20;

fn normal_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(rng))
}

fn weighted_sum(a: &Array2<f64>, w: &Array2<f64>) -> f64 {
    (a * w).sum()
}

fn as_matrix(v: &[f64], shape: (usize, usize)) -> Array2<f64> {
    Array2::from_shape_vec(shape, v.to_vec()).unwrap()
}

/// Worst relative error over every tensor of one configuration.
fn worst(pairs: &[(Vec<f64>, Vec<f64>)]) -> f64 {
    pairs
        .iter()
        .map(|(a, n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

pub fn dense_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (n, i, o) = (
        r.random_range(1..6),
        r.random_range(1..6),
        r.random_range(1..6),
    );
    let layer = Dense::new(i, o, &mut r);
    let x = normal_matrix(n, i, &mut r);
    let up = normal_matrix(n, o, &mut r);
    let g = layer.backward(x.view(), up.view()).unwrap();
    let f_input =
        |v: &[f64]| weighted_sum(&layer.forward(as_matrix(v, (n, i)).view()).unwrap(), &up);
    let f_weights = |v: &[f64]| {
        let l = Dense::from_parts(as_matrix(v, (i, o)), layer.bias.clone()).unwrap();
        weighted_sum(&l.forward(x.view()).unwrap(), &up)
    };
    let f_bias = |v: &[f64]| {
        let l = Dense::from_parts(layer.weights.clone(), Array1::from(v.to_vec())).unwrap();
        weighted_sum(&l.forward(x.view()).unwrap(), &up)
    };
    worst(&[
        (
            g.input.iter().copied().collect(),
            numeric_gradient(x.as_slice().unwrap(), STEP, f_input),
        ),
        (
            g.weights.iter().copied().collect(),
            numeric_gradient(layer.weights.as_slice().unwrap(), STEP, f_weights),
        ),
        (
            g.bias.to_vec(),
            numeric_gradient(layer.bias.as_slice().unwrap(), STEP, f_bias),
        ),
    ])
}

pub fn batchnorm_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (n, w) = (r.random_range(2..8), r.random_range(1..5));
    let mut bn = BatchNorm::new(w);
    bn.gamma = Array1::from_shape_simple_fn(w, || r.random_range(0.5..2.0));
    bn.beta = Array1::from_shape_simple_fn(w, || r.random_range(-1.0..1.0));
    let x = normal_matrix(n, w, &mut r) * 2.0 + 0.5;
    let up = normal_matrix(n, w, &mut r);
    let (_, cache) = bn.clone().forward_train(x.view()).unwrap();
    let g = bn.backward(&cache, up.view()).unwrap();
    let eval = |bn: &BatchNorm, x: ArrayView2<f64>| {
        weighted_sum(&bn.clone().forward_train(x).unwrap().0, &up)
    };
    let f_input = |v: &[f64]| eval(&bn, as_matrix(v, (n, w)).view());
    let f_gamma = |v: &[f64]| {
        eval(
            &BatchNorm {
                gamma: Array1::from(v.to_vec()),
                ..bn.clone()
            },
            x.view(),
        )
    };
    let f_beta = |v: &[f64]| {
        eval(
            &BatchNorm {
                beta: Array1::from(v.to_vec()),
                ..bn.clone()
            },
            x.view(),
        )
    };
    worst(&[
        (
            g.input.iter().copied().collect(),
            numeric_gradient(x.as_slice().unwrap(), STEP, f_input),
        ),
        (
            g.gamma.to_vec(),
            numeric_gradient(bn.gamma.as_slice().unwrap(), STEP, f_gamma),
        ),
        (
            g.beta.to_vec(),
            numeric_gradient(bn.beta.as_slice().unwrap(), STEP, f_beta),
        ),
    ])
}

/// ReLU followed by dropout with a fixed mask; inputs stay clear of the kink.
pub fn relu_dropout_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (n, w) = (r.random_range(1..6), r.random_range(1..6));
    let x = normal_matrix(n, w, &mut r).mapv(|v: f64| {
        if v.abs() < 0.05 {
            v.signum() * 0.05 + v
        } else {
            v
        }
    });
    let up = normal_matrix(n, w, &mut r);
    let rate = r.random_range(0.0..0.6);
    let drop = Dropout::new(rate).unwrap();
    let mask_seed = seed ^ 0xd00d;
    let (_, mask) = drop.forward(relu(x.view()).view(), Mode::Train, &mut rng(mask_seed));
    let analytic = relu_backward(x.view(), dropout_backward(mask.as_ref(), up.view()).view());
    let f = |v: &[f64]| {
        let a = relu(as_matrix(v, (n, w)).view());
        let (out, _) = drop.forward(a.view(), Mode::Train, &mut rng(mask_seed));
        weighted_sum(&out, &up)
    };
    relative_error(
        &analytic.iter().copied().collect::<Vec<_>>(),
        &numeric_gradient(x.as_slice().unwrap(), STEP, f),
    )
}

fn soft_targets<R: Rng>(n: usize, r: &mut R) -> Array2<f64> {
    let mut t = Array2::zeros((n, 2));
    for i in 0..n {
        let p = [0.0, 0.5, 1.0, r.random_range(0.0..1.0)][r.random_range(0..4)];
        t[[i, 0]] = 1.0 - p;
        t[[i, 1]] = p;
    }
    t
}

pub fn softmax_xent_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let n = r.random_range(1..8);
    let z = normal_matrix(n, 2, &mut r) * 3.0;
    let t = soft_targets(n, &mut r);
    let (_, g) = softmax_xent(z.view(), t.view()).unwrap();
    let f = |v: &[f64]| {
        softmax_xent(as_matrix(v, (n, 2)).view(), t.view())
            .unwrap()
            .0
    };
    relative_error(
        &g.iter().copied().collect::<Vec<_>>(),
        &numeric_gradient(z.as_slice().unwrap(), STEP, f),
    )
}

fn random_pairs<R: Rng>(bags: usize, count: usize, r: &mut R) -> Vec<(usize, usize, f64)> {
    (0..count)
        .map(|_| {
            let t = [0.0, 0.5, 1.0][r.random_range(0..3)];
            (r.random_range(0..bags), r.random_range(0..bags), t)
        })
        .collect()
}

pub fn composite_loss_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let bags = r.random_range(2..8);
    let z = normal_matrix(bags, 2, &mut r) * 3.0;
    let pairs = random_pairs(bags, r.random_range(1..6), &mut r);
    let (_, g) = composite_loss(z.view(), &pairs);
    let f = |v: &[f64]| composite_loss(as_matrix(v, (bags, 2)).view(), &pairs).0;
    relative_error(
        &g.iter().copied().collect::<Vec<_>>(),
        &numeric_gradient(z.as_slice().unwrap(), STEP, f),
    )
}

pub fn per_orientation_loss_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let bags = r.random_range(2..8);
    let z = normal_matrix(bags, 2, &mut r) * 3.0;
    let pairs = random_pairs(bags, r.random_range(1..6), &mut r);
    let (_, g) = per_orientation_loss(z.view(), &pairs).unwrap();
    let f = |v: &[f64]| {
        per_orientation_loss(as_matrix(v, (bags, 2)).view(), &pairs)
            .unwrap()
            .0
    };
    relative_error(
        &g.iter().copied().collect::<Vec<_>>(),
        &numeric_gradient(z.as_slice().unwrap(), STEP, f),
    )
}

/// Whole-model check on a tiny network (`h = 4`, `m = 8`) with the given objective.
///
/// Dropout masks are replayed from the same seed for every evaluation. `None`
/// when some parameter sits within one step of a ReLU kink, detected as
/// central differences at `STEP` and `STEP / 10` disagreeing.
pub fn end_to_end_error(seed: u64, objective: Objective) -> Option<f64> {
    let mut r = rng(seed);
    let layers = r.random_range(1..=2);
    let rate = [0.0, 0.25][r.random_range(0..2)];
    let model = NccModel::new(Architecture::new(4, layers, rate), &mut r).unwrap();
    let cfg = GeneratorConfig::default().with_points(8);
    let mut samples = Vec::new();
    for _ in 0..2 {
        let s = generate_scatterplot(&cfg, &mut r).unwrap();
        samples.push(s.swapped());
        samples.push(permuted_independent(&s, &mut r));
        samples.push(s);
    }
    let batch = TrainingBatch::new(&samples, objective).unwrap();
    let mask_seed = seed ^ 0xfeed;
    let loss_at = |m: &NccModel| {
        let mut m = m.clone();
        m.loss_and_gradients(&batch, objective, &mut rng(mask_seed))
            .unwrap()
    };
    let (_, grads) = loss_at(&model);
    let shapes: Vec<usize> = model.parameters().iter().map(|p| p.len()).collect();
    let flat: Vec<f64> = model
        .parameters()
        .iter()
        .flat_map(|p| p.iter().copied())
        .collect();
    let loss_of = |v: &[f64]| {
        let mut m = model.clone();
        let mut offset = 0;
        for (p, &len) in m.parameters_mut().into_iter().zip(&shapes) {
            p.copy_from_slice(&v[offset..offset + len]);
            offset += len;
        }
        loss_at(&m).0
    };
    let numeric = numeric_gradient(&flat, STEP, loss_of);
    if relative_error(&numeric, &numeric_gradient(&flat, STEP / 10.0, loss_of)) > 1e-6 {
        return None;
    }
    let mut offset = 0;
    let per_tensor: Vec<(Vec<f64>, Vec<f64>)> = grads
        .into_iter()
        .zip(&shapes)
        .map(|(g, &len)| {
            let n = numeric[offset..offset + len].to_vec();
            offset += len;
            (g, n)
        })
        .collect();
    Some(worst(&per_tensor))
}

/// Worst end-to-end error over the first [`CONFIGS`] kink-free seeds, and how many seeds were skipped.
pub fn end_to_end_suite(objective: Objective) -> (f64, usize) {
    let (mut worst_err, mut accepted, mut skipped) = (0.0f64, 0, 0);
    let mut seed = 1000;
    while accepted < CONFIGS {
        match end_to_end_error(seed, objective) {
            Some(e) => {
                worst_err = worst_err.max(e);
                accepted += 1;
            }
            None => skipped += 1,
        }
        seed += 1;
    }
    (worst_err, skipped)
}

/// Named checks, each returning the worst error over [`CONFIGS`] seeded configurations.
pub fn suite() -> Vec<(&'static str, f64)> {
    let over = |f: &dyn Fn(u64) -> f64| (0..CONFIGS).map(|s| f(1000 + s)).fold(0.0, f64::max);
    vec![
        ("dense", over(&dense_error)),
        ("batchnorm", over(&batchnorm_error)),
        ("relu+dropout", over(&relu_dropout_error)),
        ("softmax cross-entropy", over(&softmax_xent_error)),
        ("composite loss", over(&composite_loss_error)),
        ("per-orientation loss", over(&per_orientation_loss_error)),
        (
            "end-to-end composite",
            end_to_end_suite(Objective::Composite).0,
        ),
        (
            "end-to-end per-orientation",
            end_to_end_suite(Objective::PerOrientation).0,
        ),
    ]
}

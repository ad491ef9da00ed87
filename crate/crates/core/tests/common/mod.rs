//! Helpers shared by the integration tests: finite differences and an
//! additive-noise regression oracle for direction.
#![allow(dead_code)]

pub mod checks;
pub mod gradcheck;
pub mod oracle_checks;

use ncc_core::seed::{rng_from_seed, Rng64};
use ncc_core::synthgen::generate_scatterplot;
use ncc_core::GeneratorConfig;

pub fn rng(seed: u64) -> Rng64 {
    rng_from_seed(seed)
}

/// Central finite-difference gradient of `f` at `x` with step `h`.
pub fn numeric_gradient(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `||a - b|| / max(||a||, ||b||)`, or the absolute difference when both are tiny.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale < 1e-8 {
        diff
    } else {
        diff / scale
    }
}

fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        let d = a[col][col];
        if d.abs() < 1e-12 {
            continue;
        }
        for row in col + 1..n {
            let f = a[row][col] / d;
            let pivot_row = a[col].clone();
            for (dst, src) in a[row][col..].iter_mut().zip(&pivot_row[col..]) {
                *dst -= f * src;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = if a[row][row].abs() < 1e-12 {
            0.0
        } else {
            (b[row] - s) / a[row][row]
        };
    }
    x
}

/// Residuals of a least-squares cubic regression spline of `y` on `x`
/// (truncated power basis, knots at interior quantiles of `x`).
pub fn spline_residuals(x: &[f64], y: &[f64], knots: usize) -> Vec<f64> {
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let ks: Vec<f64> = (1..=knots)
        .map(|i| sorted[i * (sorted.len() - 1) / (knots + 1)])
        .collect();
    let basis = |v: f64| {
        let mut row = vec![1.0, v, v * v, v * v * v];
        row.extend(ks.iter().map(|k| (v - k).max(0.0).powi(3)));
        row
    };
    let rows: Vec<Vec<f64>> = x.iter().map(|&v| basis(v)).collect();
    let p = rows[0].len();
    let mut ata = vec![vec![0.0; p]; p];
    let mut aty = vec![0.0; p];
    for (r, &t) in rows.iter().zip(y) {
        for i in 0..p {
            aty[i] += r[i] * t;
            for j in 0..p {
                ata[i][j] += r[i] * r[j];
            }
        }
    }
    for (i, row) in ata.iter_mut().enumerate() {
        row[i] += 1e-9;
    }
    let beta = solve(ata, aty);
    rows.iter()
        .zip(y)
        .map(|(r, &t)| t - r.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>())
        .collect()
}

fn centered_distances(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            d[i * n + j] = (v[i] - v[j]).abs();
        }
    }
    let row: Vec<f64> = (0..n)
        .map(|i| d[i * n..(i + 1) * n].iter().sum::<f64>() / n as f64)
        .collect();
    let all = row.iter().sum::<f64>() / n as f64;
    for i in 0..n {
        for j in 0..n {
            d[i * n + j] += all - row[i] - row[j];
        }
    }
    d
}

/// Sample distance correlation (Székely et al.), in `[0, 1]`.
pub fn distance_correlation(a: &[f64], b: &[f64]) -> f64 {
    let (da, db) = (centered_distances(a), centered_distances(b));
    let dot = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| x * y).sum::<f64>();
    let (vab, vaa, vbb) = (dot(&da, &db), dot(&da, &da), dot(&db, &db));
    if vaa <= 0.0 || vbb <= 0.0 {
        return 0.0;
    }
    (vab / (vaa * vbb).sqrt()).max(0.0).sqrt()
}

/// Dependence between regressor and residual when regressing `y` on `x`.
pub fn residual_dependence(x: &[f64], y: &[f64]) -> f64 {
    distance_correlation(x, &spline_residuals(x, y, 6))
}

/// True when the additive-noise fit prefers `X -> Y`: residuals of `y` on `x`
/// are less dependent on `x` than residuals of `x` on `y` are on `y`.
pub fn regression_prefers_forward(x: &[f64], y: &[f64]) -> bool {
    residual_dependence(x, y) < residual_dependence(y, x)
}

/// Fraction of `count` samples from `cfg` on which the regression oracle finds `X -> Y`.
pub fn oracle_agreement(cfg: &GeneratorConfig, seed: u64, count: usize) -> f64 {
    let mut r = rng(seed);
    let hits = (0..count)
        .filter(|_| {
            let s = generate_scatterplot(cfg, &mut r).unwrap();
            regression_prefers_forward(&s.xs(), &s.ys())
        })
        .count();
    hits as f64 / count as f64
}

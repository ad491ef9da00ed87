//! Losses over the 2-way logits of a batch of bags.
//!
//! For a pair `(own, swap, l)` the composite prediction of `P(X <- Y)` is
//! `p = (NCC(S) + 1 - NCC(swap S)) / 2 = (sigmoid(u) + sigmoid(v)) / 2` with
//! `u = z1(S) - z0(S)` and `v = z0(swap S) - z1(swap S)`. The loss is the
//! soft-target cross-entropy `-l ln p - (1 - l) ln(1 - p)`, evaluated in the
//! log domain.

use ndarray::{Array2, ArrayView2};

use crate::nn::{softmax_xent, NnError};

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn log_sigmoid(t: f64) -> f64 {
    -softplus(-t)
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Loss terms and their derivatives with respect to `u` and `v`.
pub(crate) fn composite_term(u: f64, v: f64, target: f64) -> (f64, f64, f64) {
    let (ls_u, ls_nu) = (log_sigmoid(u), log_sigmoid(-u));
    let (ls_v, ls_nv) = (log_sigmoid(v), log_sigmoid(-v));
    let half = std::f64::consts::LN_2;
    let log_p = log_add_exp(ls_u, ls_v) - half;
    let log_q = log_add_exp(ls_nu, ls_nv) - half;
    let loss = -target * log_p - (1.0 - target) * log_q;
    // d ln p / du = s(u) s(-u) / (s(u) + s(v)); d ln(1-p) / du = -s(u) s(-u) / (s(-u) + s(-v))
    let lse_p = log_add_exp(ls_u, ls_v);
    let lse_q = log_add_exp(ls_nu, ls_nv);
    let dlp_du = (ls_u + ls_nu - lse_p).exp();
    let dlq_du = -(ls_u + ls_nu - lse_q).exp();
    let dlp_dv = (ls_v + ls_nv - lse_p).exp();
    let dlq_dv = -(ls_v + ls_nv - lse_q).exp();
    let du = -target * dlp_du - (1.0 - target) * dlq_du;
    let dv = -target * dlp_dv - (1.0 - target) * dlq_dv;
    (loss, du, dv)
}

/// Mean composite loss over `pairs` and the gradient with respect to `logits`.
pub fn composite_loss(
    logits: ArrayView2<f64>,
    pairs: &[(usize, usize, f64)],
) -> (f64, Array2<f64>) {
    let n = pairs.len() as f64;
    let mut grad = Array2::zeros(logits.dim());
    let mut loss = 0.0;
    for &(own, swap, target) in pairs {
        let u = logits[[own, 1]] - logits[[own, 0]];
        let v = logits[[swap, 0]] - logits[[swap, 1]];
        let (l, du, dv) = composite_term(u, v, target);
        loss += l;
        grad[[own, 1]] += du / n;
        grad[[own, 0]] -= du / n;
        grad[[swap, 0]] += dv / n;
        grad[[swap, 1]] -= dv / n;
    }
    (loss / n, grad)
}

/// Plain soft-target cross-entropy on each sample's own logits.
pub fn per_orientation_loss(
    logits: ArrayView2<f64>,
    pairs: &[(usize, usize, f64)],
) -> Result<(f64, Array2<f64>), NnError> {
    let mut rows = Array2::zeros((pairs.len(), 2));
    let mut targets = Array2::zeros((pairs.len(), 2));
    for (i, &(own, _, t)) in pairs.iter().enumerate() {
        rows[[i, 0]] = logits[[own, 0]];
        rows[[i, 1]] = logits[[own, 1]];
        targets[[i, 0]] = 1.0 - t;
        targets[[i, 1]] = t;
    }
    let (loss, g) = softmax_xent(rows.view(), targets.view())?;
    let mut grad = Array2::zeros(logits.dim());
    for (i, &(own, _, _)) in pairs.iter().enumerate() {
        grad[[own, 0]] += g[[i, 0]];
        grad[[own, 1]] += g[[i, 1]];
    }
    Ok((loss, grad))
}

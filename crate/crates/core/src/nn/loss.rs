use ndarray::{Array2, ArrayView2, Axis};

use super::NnError;

/// Row-wise numerically stable log-softmax.
pub fn log_softmax_rows(logits: ArrayView2<f64>) -> Array2<f64> {
    let mut out = logits.to_owned();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - lse);
    }
    out
}

pub fn softmax_rows(logits: ArrayView2<f64>) -> Array2<f64> {
    log_softmax_rows(logits).mapv(f64::exp)
}

/// Mean soft-target cross-entropy and its gradient with respect to the logits.
pub fn softmax_xent(
    logits: ArrayView2<f64>,
    targets: ArrayView2<f64>,
) -> Result<(f64, Array2<f64>), NnError> {
    if logits.dim() != targets.dim() {
        return Err(NnError::ShapeMismatch {
            op: "softmax_xent",
            expected: logits.dim(),
            got: targets.dim(),
        });
    }
    for (row, t) in targets.axis_iter(Axis(0)).enumerate() {
        let sum = t.sum();
        if (sum - 1.0).abs() > 1e-9 || t.iter().any(|&v| v < 0.0) {
            return Err(NnError::InvalidTarget { row, sum });
        }
    }
    let n = logits.nrows() as f64;
    let logp = log_softmax_rows(logits);
    let loss = -(&targets * &logp).sum() / n;
    let grad = (logp.mapv(f64::exp) - targets) / n;
    Ok((loss, grad))
}

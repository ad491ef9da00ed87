use ndarray::{Array2, ArrayView2, Zip};
use rand::Rng;

use super::{Mode, NnError};

pub fn relu(x: ArrayView2<f64>) -> Array2<f64> {
    x.mapv(|v| v.max(0.0))
}

/// Gradient of ReLU given its input (pre-activation).
pub fn relu_backward(pre: ArrayView2<f64>, upstream: ArrayView2<f64>) -> Array2<f64> {
    let mut out = upstream.to_owned();
    Zip::from(&mut out).and(&pre).for_each(|g, &p| {
        if p <= 0.0 {
            *g = 0.0;
        }
    });
    out
}

/// Inverted dropout: survivors are scaled by `1 / (1 - rate)` in train mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dropout {
    rate: f64,
}

impl Dropout {
    pub fn new(rate: f64) -> Result<Self, NnError> {
        if !(0.0..1.0).contains(&rate) {
            return Err(NnError::InvalidRate(rate));
        }
        Ok(Self { rate })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Returns the output and, in train mode with a nonzero rate, the applied mask.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        x: ArrayView2<f64>,
        mode: Mode,
        rng: &mut R,
    ) -> (Array2<f64>, Option<Array2<f64>>) {
        if mode == Mode::Eval || self.rate == 0.0 {
            return (x.to_owned(), None);
        }
        let keep = 1.0 - self.rate;
        let scale = 1.0 / keep;
        let mask =
            Array2::from_shape_vec(x.dim(), keep_mask(x.len(), keep, scale, rng)).expect("shape");
        (&x * &mask, Some(mask))
    }
}

/// `len` entries equal to `scale` with probability `keep`, else zero.
pub fn keep_mask<R: Rng + ?Sized>(len: usize, keep: f64, scale: f64, rng: &mut R) -> Vec<f64> {
    let threshold = (keep * 4294967296.0) as u64;
    let mut out = Vec::with_capacity(len);
    while out.len() < len {
        let bits = rng.next_u64();
        out.push(if (bits & 0xffff_ffff) < threshold {
            scale
        } else {
            0.0
        });
        if out.len() < len {
            out.push(if (bits >> 32) < threshold { scale } else { 0.0 });
        }
    }
    out
}

/// Functional form of [`Dropout::forward`].
pub fn dropout<R: Rng + ?Sized>(
    x: ArrayView2<f64>,
    rate: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<(Array2<f64>, Option<Array2<f64>>), NnError> {
    Ok(Dropout::new(rate)?.forward(x, mode, rng))
}

pub fn dropout_backward(mask: Option<&Array2<f64>>, upstream: ArrayView2<f64>) -> Array2<f64> {
    match mask {
        Some(m) => &upstream * m,
        None => upstream.to_owned(),
    }
}

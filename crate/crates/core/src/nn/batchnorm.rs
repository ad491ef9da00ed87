use ndarray::{Array1, Array2, ArrayView2};

use super::{Mode, NnError};

pub const DEFAULT_MOMENTUM: f64 = 0.99;
pub const DEFAULT_EPSILON: f64 = 1e-5;

/// Per-column batch normalization.
///
/// Running statistics follow `running = momentum * running + (1 - momentum) * batch`
/// with the population (biased) batch variance.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
    pub momentum: f64,
    pub epsilon: f64,
}

/// Saved train-mode quantities needed by the backward pass.
#[derive(Debug, Clone)]
pub struct BatchNormCache {
    normalized: Array2<f64>,
    inv_std: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct BatchNormGrads {
    pub input: Array2<f64>,
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
}

impl BatchNorm {
    pub fn new(width: usize) -> Self {
        Self {
            gamma: Array1::ones(width),
            beta: Array1::zeros(width),
            running_mean: Array1::zeros(width),
            running_var: Array1::ones(width),
            momentum: DEFAULT_MOMENTUM,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn width(&self) -> usize {
        self.gamma.len()
    }

    fn check(&self, input: &ArrayView2<f64>) -> Result<(), NnError> {
        if input.ncols() != self.width() {
            return Err(NnError::ShapeMismatch {
                op: "batchnorm",
                expected: (input.nrows(), self.width()),
                got: input.dim(),
            });
        }
        Ok(())
    }

    /// Dispatches on `mode`; the cache is only produced in train mode.
    pub fn forward(
        &mut self,
        input: ArrayView2<f64>,
        mode: Mode,
    ) -> Result<(Array2<f64>, Option<BatchNormCache>), NnError> {
        match mode {
            Mode::Train => self.forward_train(input).map(|(y, c)| (y, Some(c))),
            Mode::Eval => self.forward_eval(input).map(|y| (y, None)),
        }
    }

    /// Normalizes with batch statistics and updates the running statistics.
    pub fn forward_train(
        &mut self,
        input: ArrayView2<f64>,
    ) -> Result<(Array2<f64>, BatchNormCache), NnError> {
        self.check(&input)?;
        let n = input.nrows();
        if n < 2 {
            return Err(NnError::BatchTooSmall(n));
        }
        let width = self.width();
        let x = input.as_standard_layout();
        let x = x.as_slice().expect("standard layout");
        let mut mean = vec![0.0; width];
        for row in x.chunks_exact(width) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; width];
        for row in x.chunks_exact(width) {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                let d = v - m;
                *s += d * d;
            }
        }
        var.iter_mut().for_each(|v| *v /= n as f64);
        let inv_std: Vec<f64> = var
            .iter()
            .map(|v| 1.0 / (v + self.epsilon).sqrt())
            .collect();
        let gamma = self.gamma.as_slice().expect("contiguous");
        let beta = self.beta.as_slice().expect("contiguous");
        let mut normalized = vec![0.0; x.len()];
        let mut out = vec![0.0; x.len()];
        for ((xr, nr), or) in x
            .chunks_exact(width)
            .zip(normalized.chunks_exact_mut(width))
            .zip(out.chunks_exact_mut(width))
        {
            for (((((n, o), v), m), s), (g, b)) in nr
                .iter_mut()
                .zip(or.iter_mut())
                .zip(xr)
                .zip(&mean)
                .zip(&inv_std)
                .zip(gamma.iter().zip(beta))
            {
                *n = (v - m) * s;
                *o = *n * g + b;
            }
        }
        let shape = (n, width);
        let normalized = Array2::from_shape_vec(shape, normalized).expect("shape");
        let out = Array2::from_shape_vec(shape, out).expect("shape");
        let mean = Array1::from(mean);
        let var = Array1::from(var);
        let inv_std = Array1::from(inv_std);

        let keep = self.momentum;
        self.running_mean = &self.running_mean * keep + &mean * (1.0 - keep);
        self.running_var = &self.running_var * keep + &var * (1.0 - keep);
        Ok((
            out,
            BatchNormCache {
                normalized,
                inv_std,
            },
        ))
    }

    /// Normalizes with the running statistics; rows are independent.
    pub fn forward_eval(&self, input: ArrayView2<f64>) -> Result<Array2<f64>, NnError> {
        self.check(&input)?;
        let scale = &self.gamma / &self.running_var.mapv(|v| (v + self.epsilon).sqrt());
        let shift = &self.beta - &(&self.running_mean * &scale);
        Ok(&input * &scale + &shift)
    }

    pub fn backward(
        &self,
        cache: &BatchNormCache,
        upstream: ArrayView2<f64>,
    ) -> Result<BatchNormGrads, NnError> {
        if upstream.dim() != cache.normalized.dim() {
            return Err(NnError::ShapeMismatch {
                op: "batchnorm backward",
                expected: cache.normalized.dim(),
                got: upstream.dim(),
            });
        }
        let (rows, width) = upstream.dim();
        let n = rows as f64;
        let dy = upstream.as_standard_layout();
        let dy = dy.as_slice().expect("standard layout");
        let xhat = cache.normalized.as_slice().expect("standard layout");
        let mut beta = vec![0.0; width];
        let mut gamma = vec![0.0; width];
        for (dr, xr) in dy.chunks_exact(width).zip(xhat.chunks_exact(width)) {
            for (((b, g), d), z) in beta.iter_mut().zip(gamma.iter_mut()).zip(dr).zip(xr) {
                *b += d;
                *g += d * z;
            }
        }
        // dx = gamma * inv_std / n * (n * dy - sum(dy) - xhat * sum(dy * xhat))
        let coef: Vec<f64> = self
            .gamma
            .iter()
            .zip(&cache.inv_std)
            .map(|(g, s)| g * s / n)
            .collect();
        let mut input = vec![0.0; dy.len()];
        for ((ir, dr), xr) in input
            .chunks_exact_mut(width)
            .zip(dy.chunks_exact(width))
            .zip(xhat.chunks_exact(width))
        {
            for ((((i, d), z), c), (b, g)) in ir
                .iter_mut()
                .zip(dr)
                .zip(xr)
                .zip(&coef)
                .zip(beta.iter().zip(&gamma))
            {
                *i = c * (n * d - b - z * g);
            }
        }
        let input = Array2::from_shape_vec((rows, width), input).expect("shape");
        let gamma = Array1::from(gamma);
        let beta = Array1::from(beta);
        Ok(BatchNormGrads { input, gamma, beta })
    }
}

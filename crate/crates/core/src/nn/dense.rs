use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Uniform};

use super::NnError;

/// Affine map `input · W + b` with `W` stored `(inputs, outputs)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub input: Array2<f64>,
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    /// Uniform `(-1/sqrt(inputs), 1/sqrt(inputs))` initialization for weights and bias.
    pub fn new<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        Self {
            weights: Array2::from_shape_simple_fn((inputs, outputs), || dist.sample(rng)),
            bias: Array1::from_shape_simple_fn(outputs, || dist.sample(rng)),
        }
    }

    pub fn from_parts(weights: Array2<f64>, bias: Array1<f64>) -> Result<Self, NnError> {
        if weights.ncols() != bias.len() {
            return Err(NnError::ShapeMismatch {
                op: "dense",
                expected: (weights.nrows(), weights.ncols()),
                got: (1, bias.len()),
            });
        }
        Ok(Self { weights, bias })
    }

    pub fn inputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weights.ncols()
    }

    fn check_input(&self, input: &ArrayView2<f64>) -> Result<(), NnError> {
        if input.ncols() != self.inputs() {
            return Err(NnError::ShapeMismatch {
                op: "dense",
                expected: (input.nrows(), self.inputs()),
                got: input.dim(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, input: ArrayView2<f64>) -> Result<Array2<f64>, NnError> {
        self.check_input(&input)?;
        let mut out = input.dot(&self.weights);
        out += &self.bias;
        Ok(out)
    }

    pub fn backward(
        &self,
        input: ArrayView2<f64>,
        upstream: ArrayView2<f64>,
    ) -> Result<DenseGrads, NnError> {
        self.check_input(&input)?;
        if upstream.dim() != (input.nrows(), self.outputs()) {
            return Err(NnError::ShapeMismatch {
                op: "dense backward",
                expected: (input.nrows(), self.outputs()),
                got: upstream.dim(),
            });
        }
        Ok(DenseGrads {
            input: upstream.dot(&self.weights.t()),
            weights: input.t().dot(&upstream),
            bias: upstream.sum_axis(Axis(0)),
        })
    }
}

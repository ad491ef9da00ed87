use super::NnError;

/// RMSProp with the accumulator inside the square root:
/// `acc = decay * acc + (1 - decay) * g^2`, `param -= lr * g / sqrt(acc + eps)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RmsProp {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
    accumulators: Vec<Vec<f64>>,
}

impl Default for RmsProp {
    fn default() -> Self {
        Self::new(1e-3, 0.9, 1e-8)
    }
}

impl RmsProp {
    pub fn new(learning_rate: f64, decay: f64, epsilon: f64) -> Self {
        Self {
            learning_rate,
            decay,
            epsilon,
            accumulators: Vec::new(),
        }
    }

    pub fn accumulators(&self) -> &[Vec<f64>] {
        &self.accumulators
    }

    /// Updates each parameter slice in place. Accumulators are created on the first call.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<(), NnError> {
        if params.len() != grads.len() {
            return Err(NnError::ShapeMismatch {
                op: "rmsprop",
                expected: (params.len(), 1),
                got: (grads.len(), 1),
            });
        }
        if self.accumulators.is_empty() {
            self.accumulators = params.iter().map(|p| vec![0.0; p.len()]).collect();
        }
        if self.accumulators.len() != params.len() {
            return Err(NnError::ShapeMismatch {
                op: "rmsprop",
                expected: (self.accumulators.len(), 1),
                got: (params.len(), 1),
            });
        }
        for ((p, g), acc) in params.iter_mut().zip(grads).zip(&mut self.accumulators) {
            if p.len() != g.len() || p.len() != acc.len() {
                return Err(NnError::ShapeMismatch {
                    op: "rmsprop",
                    expected: (acc.len(), 1),
                    got: (g.len(), 1),
                });
            }
            for ((w, &gi), a) in p.iter_mut().zip(g.iter()).zip(acc.iter_mut()) {
                *a = self.decay * *a + (1.0 - self.decay) * gi * gi;
                *w -= self.learning_rate * gi / (*a + self.epsilon).sqrt();
            }
        }
        Ok(())
    }
}

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::spline::uniform;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureComponent {
    pub mean: f64,
    pub stddev: f64,
    pub weight: f64,
}

/// Univariate Gaussian mixture used as the cause distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    components: Vec<MixtureComponent>,
}

pub const MAX_COMPONENTS: usize = 5;

impl GaussianMixture {
    /// Builds a mixture from unnormalized weights.
    ///
    /// Weights are divided by their sum; an all-zero weight vector falls
    /// back to uniform weights.
    pub fn new(mut components: Vec<MixtureComponent>) -> Self {
        assert!(
            (1..=MAX_COMPONENTS).contains(&components.len()),
            "mixture needs 1..={MAX_COMPONENTS} components, got {}",
            components.len()
        );
        for c in &components {
            assert!(
                c.stddev >= 0.0 && c.weight >= 0.0,
                "negative mixture parameter: {c:?}"
            );
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        let k = components.len() as f64;
        for c in &mut components {
            c.weight = if total > 0.0 {
                c.weight / total
            } else {
                1.0 / k
            };
        }
        Self { components }
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = &self.components[self.components.len() - 1];
        for c in &self.components {
            acc += c.weight;
            if u < acc {
                chosen = c;
                break;
            }
        }
        let z: f64 = StandardNormal.sample(rng);
        chosen.mean + chosen.stddev * z
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}

/// Ranges the random cause distribution is drawn from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixturePrior {
    pub components: (usize, usize),
    /// Range of `r`, the standard deviation of the component means.
    pub mean_scale: (f64, f64),
    /// Range of `s`, the standard deviation of the (folded) component stddevs.
    pub stddev_scale: (f64, f64),
}

impl Default for MixturePrior {
    fn default() -> Self {
        Self {
            components: (1, MAX_COMPONENTS),
            mean_scale: (0.0, 5.0),
            stddev_scale: (0.0, 5.0),
        }
    }
}

/// Draws a random cause distribution: `k` components with means ~ N(0, r),
/// stddevs ~ |N(0, s)| and weights ~ |N(0, 1)| normalized.
pub fn sample_cause_distribution<R: Rng + ?Sized>(
    prior: &MixturePrior,
    rng: &mut R,
) -> GaussianMixture {
    let k = rng.random_range(prior.components.0..=prior.components.1);
    let r = uniform(prior.mean_scale, rng);
    let s = uniform(prior.stddev_scale, rng);
    let means = Normal::new(0.0, r).expect("r >= 0");
    let stds = Normal::new(0.0, s).expect("s >= 0");
    let components = (0..k)
        .map(|_| MixtureComponent {
            mean: means.sample(rng),
            stddev: stds.sample(rng).abs(),
            weight: StandardNormal.sample(rng),
        })
        .map(|c: MixtureComponent| MixtureComponent {
            weight: c.weight.abs(),
            ..c
        })
        .collect();
    GaussianMixture::new(components)
}

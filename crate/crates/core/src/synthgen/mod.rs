//! Synthetic cause-effect scatterplots from a heteroscedastic additive noise model.
//!
//! Each sample draws a cause from a random Gaussian mixture, pushes it
//! through a random cubic Hermite mechanism and adds Gaussian noise whose
//! scale varies along the cause through a second random spline:
//!
//! ```text
//! y_j = f(x_j) + v(x_j) * e_j,   e_j ~ N(0, v)
//! ```
//!
//! Cause, noiseless effect and final effect are each standardized.

mod dump;
mod mixture;
mod spline;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::stats;

pub use dump::{write_minibatch, write_scatterplot};
pub use mixture::{sample_cause_distribution, GaussianMixture, MixtureComponent, MixturePrior};
pub use spline::{padded_support, random_mechanism, random_scale_spline, Spline};

/// Below this population standard deviation a signal is considered constant.
pub const DEGENERACY_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("signal of length {len} is degenerate (std {std:.3e})")]
    DegenerateSignal { len: usize, std: f64 },
    #[error("generation failed after {attempts} consecutive degenerate draws")]
    GenerationFailed { attempts: usize },
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
}

/// Direction label of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    /// `X -> Y`, target 0.
    Causal,
    /// `X <- Y`, target 1.
    Anticausal,
    /// No dependence, target 1/2.
    Independent,
}

impl Label {
    /// Probability of `X <- Y` used as the soft training target.
    pub fn target(self) -> f64 {
        match self {
            Label::Causal => 0.0,
            Label::Anticausal => 1.0,
            Label::Independent => 0.5,
        }
    }

    pub fn from_target(t: f64) -> Option<Self> {
        match t {
            0.0 => Some(Label::Causal),
            1.0 => Some(Label::Anticausal),
            0.5 => Some(Label::Independent),
            _ => None,
        }
    }

    pub fn swapped(self) -> Self {
        match self {
            Label::Causal => Label::Anticausal,
            Label::Anticausal => Label::Causal,
            Label::Independent => Label::Independent,
        }
    }
}

/// A bag of 2-D points with a direction label.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalSample {
    pub points: Vec<[f64; 2]>,
    pub label: Label,
}

impl CausalSample {
    pub fn new(points: Vec<[f64; 2]>, label: Label) -> Self {
        Self { points, label }
    }

    /// Zips two coordinate vectors into a sample.
    pub fn from_columns(xs: &[f64], ys: &[f64], label: Label) -> Self {
        assert_eq!(xs.len(), ys.len(), "column length mismatch");
        Self {
            points: xs.iter().zip(ys).map(|(&x, &y)| [x, y]).collect(),
            label,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn xs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p[0]).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        self.points.iter().map(|p| p[1]).collect()
    }

    /// Exchanges the coordinates of every point and flips the label.
    pub fn swapped(&self) -> Self {
        Self {
            points: self.points.iter().map(|&[x, y]| [y, x]).collect(),
            label: self.label.swapped(),
        }
    }
}

/// Standardizes to zero mean and unit population variance.
pub fn standardize(v: &[f64]) -> Result<Vec<f64>, SynthError> {
    if v.len() < 2 {
        return Err(SynthError::DegenerateSignal {
            len: v.len(),
            std: 0.0,
        });
    }
    let mu = stats::mean(v);
    let centered: Vec<f64> = v.iter().map(|x| x - mu).collect();
    let std = (centered.iter().map(|c| c * c).sum::<f64>() / v.len() as f64).sqrt();
    if std.is_nan() || std < DEGENERACY_THRESHOLD {
        return Err(SynthError::DegenerateSignal { len: v.len(), std });
    }
    Ok(centered.into_iter().map(|c| c / std).collect())
}

/// Parameters of the sampling process. Integer ranges are inclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub points_per_sample: (usize, usize),
    pub knot_count: (usize, usize),
    pub mixture: MixturePrior,
    /// Range of `v`, the stddev of the base noise.
    pub noise_level: (f64, f64),
    /// Range of the heteroscedastic scale-spline ordinates.
    pub noise_scale: (f64, f64),
    pub degenerate_retry_limit: usize,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            points_per_sample: (1000, 1000),
            knot_count: (4, 5),
            mixture: MixturePrior::default(),
            noise_level: (0.0, 5.0),
            noise_scale: (0.0, 5.0),
            degenerate_retry_limit: 10,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: String| Err(SynthError::InvalidConfig(msg));
        let (m_lo, m_hi) = self.points_per_sample;
        if m_lo < 2 || m_hi < m_lo {
            return bad(format!(
                "points_per_sample {m_lo}..={m_hi} must satisfy 2 <= lo <= hi"
            ));
        }
        let (k_lo, k_hi) = self.knot_count;
        if k_lo < 2 || k_hi < k_lo {
            return bad(format!(
                "knot_count {k_lo}..={k_hi} must satisfy 2 <= lo <= hi"
            ));
        }
        let (c_lo, c_hi) = self.mixture.components;
        if c_lo < 1 || c_hi < c_lo || c_hi > mixture::MAX_COMPONENTS {
            return bad(format!(
                "mixture components {c_lo}..={c_hi} must lie in 1..=5"
            ));
        }
        for (name, (lo, hi)) in [
            ("mean_scale", self.mixture.mean_scale),
            ("stddev_scale", self.mixture.stddev_scale),
            ("noise_level", self.noise_level),
            ("noise_scale", self.noise_scale),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && hi >= lo) {
                return bad(format!(
                    "{name} range [{lo}, {hi}] must be finite, nonnegative and ordered"
                ));
            }
        }
        if self.degenerate_retry_limit == 0 {
            return bad("degenerate_retry_limit must be positive".into());
        }
        Ok(())
    }

    /// Zero-noise variant: the effect is a deterministic function of the cause.
    pub fn noiseless(mut self) -> Self {
        self.noise_level = (0.0, 0.0);
        self
    }

    pub fn with_points(mut self, m: usize) -> Self {
        self.points_per_sample = (m, m);
        self
    }
}

/// Random mechanism with `{lo..=hi}` knots over the padded support of `xs`.
pub fn sample_mechanism<R: Rng + ?Sized>(cfg: &GeneratorConfig, xs: &[f64], rng: &mut R) -> Spline {
    let knots = rng.random_range(cfg.knot_count.0..=cfg.knot_count.1);
    random_mechanism(xs, knots, rng)
}

/// Everything drawn for one scatterplot, kept for inspection and tests.
#[derive(Debug, Clone)]
pub struct Scatterplot {
    pub sample: CausalSample,
    pub cause: GaussianMixture,
    pub mechanism: Spline,
    pub noise_scale: Spline,
    pub noise_level: f64,
}

/// Effect side of one draw: mechanism, noise scale, noise level and standardized effect.
#[derive(Debug, Clone)]
pub struct Effect {
    pub ys: Vec<f64>,
    pub mechanism: Spline,
    pub noise_scale: Spline,
    pub noise_level: f64,
}

/// Pushes a standardized cause through a fresh random mechanism and noise model.
pub fn sample_effect<R: Rng + ?Sized>(
    cfg: &GeneratorConfig,
    xs: &[f64],
    rng: &mut R,
) -> Result<Effect, SynthError> {
    let mechanism = sample_mechanism(cfg, xs, rng);
    let fx = standardize(&mechanism.eval_all(xs))?;

    let noise_level = spline::uniform(cfg.noise_level, rng);
    let knots = rng.random_range(cfg.knot_count.0..=cfg.knot_count.1);
    let noise_scale = random_scale_spline(xs, knots, cfg.noise_scale, rng);
    let noise = Normal::new(0.0, noise_level).expect("noise level >= 0");
    let noisy: Vec<f64> = xs
        .iter()
        .zip(&fx)
        .map(|(&x, &f)| {
            let e: f64 = noise.sample(rng);
            f + noise_scale.eval(x).max(0.0) * e
        })
        .collect();
    let ys = standardize(&noisy)?;
    Ok(Effect {
        ys,
        mechanism,
        noise_scale,
        noise_level,
    })
}

fn try_scatterplot<R: Rng + ?Sized>(
    cfg: &GeneratorConfig,
    rng: &mut R,
) -> Result<Scatterplot, SynthError> {
    let m = rng.random_range(cfg.points_per_sample.0..=cfg.points_per_sample.1);
    let cause = sample_cause_distribution(&cfg.mixture, rng);
    let xs = standardize(&cause.sample_n(m, rng))?;
    let Effect {
        ys,
        mechanism,
        noise_scale,
        noise_level,
    } = sample_effect(cfg, &xs, rng)?;
    Ok(Scatterplot {
        sample: CausalSample::from_columns(&xs, &ys, Label::Causal),
        cause,
        mechanism,
        noise_scale,
        noise_level,
    })
}

/// Draws one `X -> Y` scatterplot with all its latent parts, retrying degenerate draws.
pub fn generate_scatterplot_detailed<R: Rng + ?Sized>(
    cfg: &GeneratorConfig,
    rng: &mut R,
) -> Result<Scatterplot, SynthError> {
    cfg.validate()?;
    for _ in 0..cfg.degenerate_retry_limit {
        match try_scatterplot(cfg, rng) {
            Ok(s) => return Ok(s),
            Err(SynthError::DegenerateSignal { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(SynthError::GenerationFailed {
        attempts: cfg.degenerate_retry_limit,
    })
}

/// Draws one labeled `X -> Y` sample.
pub fn generate_scatterplot<R: Rng + ?Sized>(
    cfg: &GeneratorConfig,
    rng: &mut R,
) -> Result<CausalSample, SynthError> {
    generate_scatterplot_detailed(cfg, rng).map(|s| s.sample)
}

/// Copy of `sample` with the x coordinates shuffled, labeled independent.
pub fn permuted_independent<R: Rng + ?Sized>(sample: &CausalSample, rng: &mut R) -> CausalSample {
    let mut xs = sample.xs();
    xs.shuffle(rng);
    CausalSample::from_columns(&xs, &sample.ys(), Label::Independent)
}

/// Builds a training minibatch from `n` fresh scatterplots.
///
/// Per scatterplot the batch holds `(S, causal)`, `(swap S, anticausal)` and,
/// with `with_independent`, an x-permuted copy labeled independent.
pub fn make_training_minibatch<R: Rng + ?Sized>(
    cfg: &GeneratorConfig,
    n: usize,
    with_independent: bool,
    rng: &mut R,
) -> Result<Vec<CausalSample>, SynthError> {
    if n == 0 {
        return Err(SynthError::InvalidConfig("minibatch needs n >= 1".into()));
    }
    let per = if with_independent { 3 } else { 2 };
    let mut out = Vec::with_capacity(per * n);
    for _ in 0..n {
        let s = generate_scatterplot(cfg, rng)?;
        let swapped = s.swapped();
        let independent = with_independent.then(|| permuted_independent(&s, rng));
        out.push(s);
        out.push(swapped);
        out.extend(independent);
    }
    Ok(out)
}

/// Owns a config and its seeded random stream.
#[derive(Debug, Clone)]
pub struct Generator {
    cfg: GeneratorConfig,
    rng: crate::seed::Rng64,
}

impl Generator {
    pub fn new(cfg: GeneratorConfig) -> Result<Self, SynthError> {
        cfg.validate()?;
        let rng = crate::seed::rng_from_seed(cfg.seed);
        Ok(Self { cfg, rng })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.cfg
    }

    pub fn scatterplot(&mut self) -> Result<CausalSample, SynthError> {
        generate_scatterplot(&self.cfg, &mut self.rng)
    }

    pub fn minibatch(
        &mut self,
        n: usize,
        with_independent: bool,
    ) -> Result<Vec<CausalSample>, SynthError> {
        make_training_minibatch(&self.cfg, n, with_independent, &mut self.rng)
    }

    /// `count` samples, each randomly presented causal or swapped (anticausal).
    pub fn labeled_set(&mut self, count: usize) -> Result<Vec<CausalSample>, SynthError> {
        (0..count)
            .map(|_| {
                let s = self.scatterplot()?;
                Ok(if self.rng.random_bool(0.5) {
                    s.swapped()
                } else {
                    s
                })
            })
            .collect()
    }
}

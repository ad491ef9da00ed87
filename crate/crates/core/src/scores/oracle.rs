//! Synthetic feature bundles with planted causal structure.
//!
//! Per class the log odds `c` is the effect of a generated cause-effect
//! pair. Features then take one of four roles:
//!
//! * anticausal: a fresh additive-noise child of `c`, wiped out when the object is blacked out;
//! * causal: a noisy copy of the parent of `c`, wiped out when the context is blacked out;
//! * decoy: `c` plus a little Gaussian noise, strongly correlated but with no direction;
//! * independent: a fresh mixture draw unrelated to `c`.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{BundleSet, FeatureBundle, ScoreError};
use crate::seed::rng_from_seed;
use crate::synthgen::{
    generate_scatterplot_detailed, sample_cause_distribution, sample_effect, standardize,
    GeneratorConfig, SynthError,
};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub classes: usize,
    pub features: usize,
    pub images: usize,
    pub anticausal: usize,
    pub causal: usize,
    pub decoys: usize,
    /// Noise added to the parent to form a causal feature.
    pub causal_noise: f64,
    /// Noise added to `c` to form a decoy.
    pub decoy_noise: f64,
    /// Upper bound of the factor that survives a blackout of a feature's own region.
    pub blackout_residual: f64,
    /// Relative jitter under a blackout of the other region.
    pub blackout_jitter: f64,
    pub generator: GeneratorConfig,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            classes: 5,
            features: 512,
            images: 1000,
            anticausal: 16,
            causal: 16,
            decoys: 32,
            causal_noise: 0.1,
            decoy_noise: 0.05,
            blackout_residual: 0.2,
            blackout_jitter: 0.05,
            generator: GeneratorConfig::default(),
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<(), ScoreError> {
        let planted = self.anticausal + self.causal + self.decoys;
        if self.classes == 0 || self.images < 2 || planted > self.features {
            return Err(ScoreError::InvalidBundle(format!(
                "oracle needs classes >= 1, images >= 2 and planted features <= {}",
                self.features
            )));
        }
        if !(0.0..1.0).contains(&self.blackout_residual) || self.blackout_jitter < 0.0 {
            return Err(ScoreError::InvalidBundle(
                "blackout factors out of range".into(),
            ));
        }
        self.generator.validate()?;
        Ok(())
    }
}

/// Sorted feature indices of each planted role.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlantedTruth {
    pub anticausal: Vec<usize>,
    pub causal: Vec<usize>,
    pub decoys: Vec<usize>,
    pub independent: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleBundle {
    pub set: BundleSet,
    pub truth: Vec<PlantedTruth>,
}

#[derive(Clone, Copy)]
enum Role {
    Anticausal,
    Causal,
    Decoy,
    Independent,
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn retry<T, R: Rng + ?Sized>(
    limit: usize,
    rng: &mut R,
    mut draw: impl FnMut(&mut R) -> Result<T, SynthError>,
) -> Result<T, SynthError> {
    for _ in 0..limit {
        match draw(rng) {
            Err(SynthError::DegenerateSignal { .. }) => continue,
            other => return other,
        }
    }
    Err(SynthError::GenerationFailed { attempts: limit })
}

fn class_bundle<R: Rng + ?Sized>(
    cfg: &OracleConfig,
    class_id: usize,
    rng: &mut R,
) -> Result<(FeatureBundle, Array2<f64>, PlantedTruth), ScoreError> {
    let gen = cfg.generator.clone().with_points(cfg.images);
    let limit = gen.degenerate_retry_limit;
    let parent = generate_scatterplot_detailed(&gen, rng)?;
    let x0 = parent.sample.xs();
    let c = parent.sample.ys();

    let mut roles: Vec<(usize, Role)> = Vec::with_capacity(cfg.features);
    let mut order: Vec<usize> = (0..cfg.features).collect();
    order.shuffle(rng);
    let mut truth = PlantedTruth {
        anticausal: vec![],
        causal: vec![],
        decoys: vec![],
        independent: vec![],
    };
    for (rank, &l) in order.iter().enumerate() {
        let (role, list) = if rank < cfg.anticausal {
            (Role::Anticausal, &mut truth.anticausal)
        } else if rank < cfg.anticausal + cfg.causal {
            (Role::Causal, &mut truth.causal)
        } else if rank < cfg.anticausal + cfg.causal + cfg.decoys {
            (Role::Decoy, &mut truth.decoys)
        } else {
            (Role::Independent, &mut truth.independent)
        };
        list.push(l);
        roles.push((l, role));
    }
    roles.sort_by_key(|&(l, _)| l);
    for list in [
        &mut truth.anticausal,
        &mut truth.causal,
        &mut truth.decoys,
        &mut truth.independent,
    ] {
        list.sort_unstable();
    }

    let m = cfg.images;
    let mut f = Array2::zeros((m, cfg.features));
    let mut f_object = Array2::zeros((m, cfg.features));
    let mut f_context = Array2::zeros((m, cfg.features));
    for (l, role) in roles {
        let z: Vec<f64> = match role {
            Role::Anticausal => retry(limit, rng, |r| sample_effect(&gen, &c, r).map(|e| e.ys))?,
            Role::Causal => x0
                .iter()
                .map(|&x| x + cfg.causal_noise * normal(rng))
                .collect(),
            Role::Decoy => c
                .iter()
                .map(|&v| v + cfg.decoy_noise * normal(rng))
                .collect(),
            Role::Independent => retry(limit, rng, |r| {
                let mix = sample_cause_distribution(&gen.mixture, r);
                standardize(&mix.sample_n(m, r))
            })?,
        };
        let scale = rng.random_range(0.5..2.0);
        let offset = rng.random_range(-1.0..1.0);
        let own = rng.random_range(0.0..cfg.blackout_residual);
        let (mid_o, mid_c) = (rng.random_range(0.5..1.0), rng.random_range(0.5..1.0));
        for (j, &v) in z.iter().enumerate() {
            let x = scale * v + offset;
            let jitter = 1.0 + cfg.blackout_jitter * normal(rng);
            let (obj, ctx) = match role {
                Role::Anticausal => (x * jitter, x * own),
                Role::Causal => (x * own, x * jitter),
                Role::Decoy | Role::Independent => (x * mid_o, x * mid_c),
            };
            f[[j, l]] = x;
            f_object[[j, l]] = obj;
            f_context[[j, l]] = ctx;
        }
    }

    let mut logodds = Array2::from_shape_fn((m, cfg.classes), |_| normal(rng));
    for (j, &v) in c.iter().enumerate() {
        logodds[[j, class_id]] = v;
    }
    let bundle = FeatureBundle::new(class_id, f, f_object, f_context, c)?;
    Ok((bundle, logodds, truth))
}

/// Generates one bundle per class with planted feature roles.
pub fn synth_feature_oracle<R: Rng + ?Sized>(
    cfg: &OracleConfig,
    rng: &mut R,
) -> Result<OracleBundle, ScoreError> {
    cfg.validate()?;
    let mut set = BundleSet {
        bundles: vec![],
        logodds: vec![],
        image_ids: vec![],
        files: vec![],
    };
    let mut truth = Vec::with_capacity(cfg.classes);
    for k in 0..cfg.classes {
        let mut class_rng = rng_from_seed(rng.next_u64());
        let (b, l, t) = class_bundle(cfg, k, &mut class_rng)?;
        set.bundles.push(b);
        set.logodds.push(l);
        set.image_ids
            .push((0..cfg.images).map(|j| format!("c{k}_{j:05}")).collect());
        set.files.push(
            (0..cfg.images)
                .map(|j| format!("class_{k}/img_{j:05}.png"))
                .collect(),
        );
        truth.push(t);
    }
    Ok(OracleBundle { set, truth })
}

/// `m x classes` log odds whose column `effect` is an additive-noise child of column `cause`.
///
/// The other columns are independent standard normal draws.
pub fn planted_relation<R: Rng + ?Sized>(
    gen: &GeneratorConfig,
    classes: usize,
    cause: usize,
    effect: usize,
    rng: &mut R,
) -> Result<Array2<f64>, ScoreError> {
    if cause == effect || cause >= classes || effect >= classes {
        return Err(ScoreError::InvalidBundle(format!(
            "bad planted pair {cause} -> {effect} of {classes}"
        )));
    }
    let s = generate_scatterplot_detailed(gen, rng)?.sample;
    let m = s.len();
    let mut out = Array2::from_shape_fn((m, classes), |_| normal(rng));
    for (j, p) in s.points.iter().enumerate() {
        out[[j, cause]] = p[0];
        out[[j, effect]] = p[1];
    }
    Ok(out)
}

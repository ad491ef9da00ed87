use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

/// Cubic Hermite spline over evenly spaced knots.
///
/// Tangents are centered finite differences (Catmull-Rom), one-sided at the
/// two end knots. Outside the support the spline is clamped to the end values.
#[derive(Debug, Clone, PartialEq)]
pub struct Spline {
    abscissae: Vec<f64>,
    ordinates: Vec<f64>,
    tangents: Vec<f64>,
}

impl Spline {
    /// Builds a spline through `ordinates` placed evenly over `[lo, hi]`.
    ///
    /// Panics if fewer than two ordinates are given or the support is empty.
    pub fn evenly_spaced(lo: f64, hi: f64, ordinates: Vec<f64>) -> Self {
        let d = ordinates.len();
        assert!(d >= 2, "a spline needs at least two knots");
        assert!(hi > lo, "empty spline support [{lo}, {hi}]");
        let step = (hi - lo) / (d - 1) as f64;
        let mut abscissae: Vec<f64> = (0..d).map(|k| lo + step * k as f64).collect();
        abscissae[d - 1] = hi;
        Self::from_knots(abscissae, ordinates)
    }

    /// Builds a spline from explicit knots. Abscissae must be strictly increasing.
    pub fn from_knots(abscissae: Vec<f64>, ordinates: Vec<f64>) -> Self {
        assert_eq!(abscissae.len(), ordinates.len());
        assert!(abscissae.len() >= 2);
        assert!(
            abscissae.windows(2).all(|w| w[0] < w[1]),
            "knot abscissae must be strictly increasing"
        );
        let d = abscissae.len();
        let slope =
            |a: usize, b: usize| (ordinates[b] - ordinates[a]) / (abscissae[b] - abscissae[a]);
        let tangents = (0..d)
            .map(|k| match k {
                0 => slope(0, 1),
                k if k == d - 1 => slope(d - 2, d - 1),
                k => slope(k - 1, k + 1),
            })
            .collect();
        Self {
            abscissae,
            ordinates,
            tangents,
        }
    }

    pub fn support(&self) -> (f64, f64) {
        (self.abscissae[0], self.abscissae[self.abscissae.len() - 1])
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.abscissae
            .iter()
            .copied()
            .zip(self.ordinates.iter().copied())
    }

    pub fn knot_count(&self) -> usize {
        self.abscissae.len()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        let last = self.abscissae.len() - 1;
        if x <= lo {
            return self.ordinates[0];
        }
        if x >= hi {
            return self.ordinates[last];
        }
        // Segment k satisfies abscissae[k] <= x < abscissae[k + 1].
        let k = self.abscissae.partition_point(|&a| a <= x) - 1;
        let (x0, x1) = (self.abscissae[k], self.abscissae[k + 1]);
        let h = x1 - x0;
        let t = (x - x0) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ordinates[k]
            + h10 * h * self.tangents[k]
            + h01 * self.ordinates[k + 1]
            + h11 * h * self.tangents[k + 1]
    }

    pub fn eval_all(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.eval(x)).collect()
    }
}

/// Support interval `[min - std, max + std]` of a standardized cause.
pub fn padded_support(xs: &[f64]) -> (f64, f64) {
    let (min, max) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    let std = crate::stats::population_std(xs);
    (min - std, max + std)
}

/// Random mechanism: `knots` Gaussian(0, 1) ordinates over the padded support of `xs`.
pub fn random_mechanism<R: Rng + ?Sized>(xs: &[f64], knots: usize, rng: &mut R) -> Spline {
    let (lo, hi) = padded_support(xs);
    let ordinates = (0..knots).map(|_| StandardNormal.sample(rng)).collect();
    Spline::evenly_spaced(lo, hi, ordinates)
}

/// Random noise-scale spline: `knots` Uniform[lo, hi] ordinates over the padded support of `xs`.
pub fn random_scale_spline<R: Rng + ?Sized>(
    xs: &[f64],
    knots: usize,
    range: (f64, f64),
    rng: &mut R,
) -> Spline {
    let (lo, hi) = padded_support(xs);
    let ordinates = (0..knots).map(|_| uniform(range, rng)).collect();
    Spline::evenly_spaced(lo, hi, ordinates)
}

pub(crate) fn uniform<R: Rng + ?Sized>((lo, hi): (f64, f64), rng: &mut R) -> f64 {
    if hi <= lo {
        return lo;
    }
    Uniform::new(lo, hi).expect("finite bounds").sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn constant_ordinates_give_constant_spline() {
        let s = Spline::evenly_spaced(-3.0, 3.0, vec![0.5; 5]);
        for i in 0..=600 {
            let x = -3.0 + i as f64 * 0.01;
            assert_eq!(s.eval(x), 0.5);
        }
    }

    #[test]
    fn support_is_padded_by_one_std() {
        // min -2, max 2, population std exactly 1.
        let xs = [-2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0];
        assert_eq!(crate::stats::population_std(&xs), 1.0);
        assert_eq!(padded_support(&xs), (-3.0, 3.0));
        let mut rng = rng_from_seed(1);
        let s = random_mechanism(&xs, 4, &mut rng);
        assert_eq!(s.support(), (-3.0, 3.0));
    }

    #[test]
    fn interpolates_random_knots_exactly() {
        let mut rng = rng_from_seed(99);
        for _ in 0..100 {
            let xs: Vec<f64> = (0..50).map(|_| StandardNormal.sample(&mut rng)).collect();
            let knots = if rng.random_bool(0.5) { 4 } else { 5 };
            let s = random_mechanism(&xs, knots, &mut rng);
            for (a, o) in s.knots() {
                assert_eq!(s.eval(a), o);
            }
        }
    }

    #[test]
    fn linear_data_is_reproduced() {
        let s = Spline::from_knots(vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 2.0, 4.0, 6.0]);
        assert!((s.eval(1.5) - 3.0).abs() < 1e-12);
        assert!((s.eval(2.25) - 4.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn stays_within_hermite_overshoot_bound(ords in proptest::collection::vec(-3.0f64..3.0, 4..=5), x in -1.0f64..1.0) {
            let s = Spline::evenly_spaced(-1.0, 1.0, ords.clone());
            let max = ords.iter().cloned().fold(f64::MIN, f64::max);
            let min = ords.iter().cloned().fold(f64::MAX, f64::min);
            let span = max - min;
            let v = s.eval(x);
            prop_assert!(v.is_finite());
            // Catmull-Rom overshoot is bounded by a fraction of the ordinate range.
            prop_assert!(v <= max + span && v >= min - span);
        }
    }
}

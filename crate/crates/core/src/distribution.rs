//! Gaussian model of a similarity list and the largest-sub-list bound.
//!
//! A similarity list partitioned into `x` equal-width buckets over `[0, 1]`
//! has its largest bucket bounded by the share of Gaussian mass that bucket
//! carries, renormalised to the mass inside `[0, 1]`:
//!
//! ```text
//! s / n = (Phi(k3) + Phi(k4) - 1) / (Phi(k1) + Phi(k2) - 1)
//! ```
//!
//! where the bucket is `[mu - k3 sigma, mu + k4 sigma]` and `[0, 1]` is
//! `[mu - k1 sigma, mu + k2 sigma]`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};
use crate::similarity::SimilarityList;

/// Series for `erf(x)`, accurate for `0 <= x < 2.5`:
/// `erf(x) = 2/sqrt(pi) * exp(-x^2) * sum_n (2x^2)^n x / (1*3*...*(2n+1))`.
/// All terms are positive so there is no cancellation.
fn erf_series(x: f64) -> f64 {
    let two_x2 = 2.0 * x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= two_x2 / (2.0 * n + 1.0);
        sum += term;
        if term <= sum * 1e-17 {
            break;
        }
    }
    2.0 / PI.sqrt() * (-x * x).exp() * sum
}

/// Continued fraction for `erfc(x)`, `x >= 2.5`, evaluated with the modified
/// Lentz method:
/// `erfc(x) = exp(-x^2)/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))`.
fn erfc_continued_fraction(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = f;
    let mut d = 0.0;
    for k in 1..500 {
        let a = f64::from(k) * 0.5;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        d = 1.0 / d;
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / (PI.sqrt() * f)
}

/// Complementary error function for `x >= 0`.
fn erfc_nonneg(x: f64) -> f64 {
    if x < 2.5 {
        1.0 - erf_series(x)
    } else {
        erfc_continued_fraction(x)
    }
}

/// Standard normal CDF. Absolute error well under 1e-12 on `[-8, 8]`.
pub fn normal_cdf(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if z.is_infinite() {
        return if z > 0.0 { 1.0 } else { 0.0 };
    }
    let x = z.abs() * FRAC_1_SQRT_2;
    let tail = 0.5 * erfc_nonneg(x);
    if z >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct GaussianModel {
    pub mu: f64,
    pub sigma: f64,
}

impl GaussianModel {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if sigma.is_nan() || sigma <= 0.0 || !mu.is_finite() || !sigma.is_finite() {
            return Err(Error::InvalidParams(format!("mu {mu}, sigma {sigma}")));
        }
        Ok(GaussianModel { mu, sigma })
    }

    /// Signed distance of `value` from the mean in units of sigma.
    pub fn z(&self, value: f64) -> f64 {
        (value - self.mu) / self.sigma
    }
}

/// Multiples of sigma bounding `[0, 1]` (`k1`, `k2`) and one bucket
/// (`k3`, `k4`), plus the partition count `x`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct SublistParams {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub partitions: u32,
}

impl SublistParams {
    pub fn new(k1: f64, k2: f64, k3: f64, k4: f64, partitions: u32) -> Self {
        SublistParams {
            k1,
            k2,
            k3,
            k4,
            partitions,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let SublistParams { k1, k2, k3, k4, .. } = *self;
        let ok = (0.0..=4.0).contains(&k1)
            && k2 > 0.0
            && k2 <= 4.0
            && k3 >= 0.0
            && k3.is_finite()
            && k4 > 0.0
            && k4.is_finite()
            && self.partitions >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("{self:?}")))
        }
    }
}

/// The ratio of Gaussian masses with no constraint checks. Any of the `k`
/// may be negative, which turns the corresponding interval edge to the far
/// side of the mean.
pub fn mass_ratio(k1: f64, k2: f64, k3: f64, k4: f64) -> Result<f64> {
    let denominator = normal_cdf(k1) + normal_cdf(k2) - 1.0;
    // NaN counts as degenerate
    if denominator.is_nan() || denominator <= 0.0 {
        return Err(Error::DegenerateDenominator(denominator));
    }
    Ok((normal_cdf(k3) + normal_cdf(k4) - 1.0) / denominator)
}

/// Largest-sub-list size as a fraction of `n`.
pub fn sublist_fraction(params: &SublistParams) -> Result<f64> {
    let SublistParams { k1, k2, k3, k4, .. } = *params;
    let denominator = normal_cdf(k1) + normal_cdf(k2) - 1.0;
    // NaN counts as degenerate
    if denominator.is_nan() || denominator <= 0.0 {
        return Err(Error::DegenerateDenominator(denominator));
    }
    params.validate()?;
    mass_ratio(k1, k2, k3, k4)
}

/// The known optimum of the bucket-size maximisation together with the
/// mean and deviation its constraints pin down.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub params: SublistParams,
    pub mu: f64,
    pub sigma: f64,
}

/// `k1 = 0, k2 = 4, k3 = 0, k4 = 0.01`.
///
/// `mu - k1 sigma = 0` and `mu + k2 sigma = 1` give `mu = 0`, `sigma = 1/4`;
/// `mu + k4 sigma = 1/x` then gives `x = 400`. Only the arithmetic is
/// reproduced here, not the optimality.
pub fn lp_optimum() -> LpSolution {
    let (k1, k2, k3, k4): (f64, f64, f64, f64) = (0.0, 4.0, 0.0, 0.01);
    let sigma = 1.0 / (k1 + k2);
    let mu = k1 * sigma;
    let partitions = (1.0 / (mu + k4 * sigma)).round() as u32;
    LpSolution {
        params: SublistParams::new(k1, k2, k3, k4, partitions),
        mu,
        sigma,
    }
}

/// Sample mean and sample standard deviation (`n - 1` denominator).
pub fn fit_gaussian_values(values: &[f64]) -> Result<GaussianModel> {
    if values.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            len: values.len(),
        });
    }
    let n = values.len() as f64;
    let mu = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return Err(Error::ZeroVariance);
    }
    GaussianModel::new(mu, var.sqrt())
}

pub fn fit_gaussian(list: &SimilarityList) -> Result<GaussianModel> {
    let sims: Vec<f64> = list.entries().map(|e| e.sim).collect();
    fit_gaussian_values(&sims)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SublistReport {
    pub model: GaussianModel,
    /// Gaussian prediction of the largest bucket's share.
    pub fraction: f64,
    /// Measured share of the largest bucket.
    pub empirical_fraction: f64,
    pub largest: usize,
    pub counts: Vec<usize>,
    pub bucket_bounds: Vec<(f64, f64)>,
}

/// Edges of `x` equal-width buckets over `[0, 1]`. The last is closed.
pub fn bucket_bounds(partitions: u32) -> Vec<(f64, f64)> {
    let x = f64::from(partitions);
    (0..partitions)
        .map(|j| (f64::from(j) / x, f64::from(j + 1) / x))
        .collect()
}

pub fn bucket_of(sim: f64, partitions: u32) -> usize {
    let j = (sim * f64::from(partitions)).floor();
    (j.max(0.0) as usize).min(partitions as usize - 1)
}

/// Counts values per bucket and compares the fullest bucket's share with
/// the fitted Gaussian's mass over the same interval.
pub fn largest_bucket_values(values: &[f64], partitions: u32) -> Result<SublistReport> {
    if partitions == 0 {
        return Err(Error::ZeroPartitions);
    }
    let model = fit_gaussian_values(values)?;
    let mut counts = vec![0usize; partitions as usize];
    for &v in values {
        counts[bucket_of(v, partitions)] += 1;
    }
    let (largest, &max) = counts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .expect("at least one bucket");
    let bounds = bucket_bounds(partitions);
    let (lo, hi) = bounds[largest];
    let k = |signed: f64| signed.clamp(-8.0, 8.0);
    let fraction = mass_ratio(
        k(-model.z(0.0)),
        k(model.z(1.0)),
        k(-model.z(lo)),
        k(model.z(hi)),
    )?;
    Ok(SublistReport {
        model,
        fraction,
        empirical_fraction: max as f64 / values.len() as f64,
        largest,
        counts,
        bucket_bounds: bounds,
    })
}

pub fn largest_bucket(list: &SimilarityList, partitions: u32) -> Result<SublistReport> {
    let sims: Vec<f64> = list.entries().map(|e| e.sim).collect();
    largest_bucket_values(&sims, partitions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{rngs::StdRng, SeedableRng};
    use rand_distr::{Distribution, Normal};

    // reference values computed at 30 digits
    const PHI_REF: &[(f64, f64)] = &[
        (0.01, 0.503_989_356_314_631_6),
        (0.5, 0.691_462_461_274_013_1),
        (1.0, 0.841_344_746_068_542_9),
        (-1.0, 0.158_655_253_931_457_05),
        (1.96, 0.975_002_104_851_779_6),
        (4.0, 0.999_968_328_758_166_9),
        (-4.0, 3.167_124_183_311_992e-5),
        (6.0, 0.999_999_999_013_412_4),
        (-8.0, 6.220_960_574_271_784e-16),
        (-0.3, 0.382_088_577_811_047_4),
    ];

    #[test]
    fn cdf_reference_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        for &(z, want) in PHI_REF {
            assert!((normal_cdf(z) - want).abs() < 1e-14, "z = {z}");
        }
        assert!((normal_cdf(4.0) - 0.999_968_3).abs() <= 1e-7);
        assert!((normal_cdf(0.01) - 0.503_989_4).abs() <= 1e-7);
        assert_eq!(normal_cdf(f64::INFINITY), 1.0);
        assert_eq!(normal_cdf(f64::NEG_INFINITY), 0.0);
    }

    #[test]
    fn fraction_at_lp_optimum() {
        let sol = lp_optimum();
        let f = sublist_fraction(&sol.params).unwrap();
        assert!((f - 0.007_979_4).abs() <= 1e-5);
        assert!((f - 1.0 / 125.0).abs() <= 1e-4);
        assert!((f - 0.007_979_218_052_752_383).abs() < 1e-13);
    }

    #[test]
    fn equal_intervals_give_one() {
        for (k1, k2) in [(0.0, 4.0), (1.5, 2.5), (4.0, 0.3)] {
            let p = SublistParams::new(k1, k2, k1, k2, 10);
            assert_eq!(sublist_fraction(&p).unwrap(), 1.0);
        }
    }

    #[test]
    fn degenerate_and_invalid_params() {
        let p = SublistParams::new(0.0, 0.0, 0.0, 0.1, 10);
        assert!(matches!(
            sublist_fraction(&p),
            Err(Error::DegenerateDenominator(_))
        ));
        let p = SublistParams::new(5.0, 1.0, 0.0, 0.1, 10);
        assert!(matches!(sublist_fraction(&p), Err(Error::InvalidParams(_))));
        let p = SublistParams::new(0.0, 1.0, 0.0, 0.0, 10);
        assert!(matches!(sublist_fraction(&p), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn lp_solution_constraints() {
        let sol = lp_optimum();
        let p = sol.params;
        assert_eq!((p.k1, p.k2, p.k3, p.k4), (0.0, 4.0, 0.0, 0.01));
        assert_eq!(sol.mu - p.k1 * sol.sigma, 0.0);
        assert_eq!(sol.mu + p.k2 * sol.sigma, 1.0);
        assert_eq!(sol.mu - p.k3 * sol.sigma, 0.0);
        assert!((sol.mu + p.k4 * sol.sigma - 1.0 / f64::from(p.partitions)).abs() < 1e-15);
        assert_eq!(p.partitions, 400);
        p.validate().unwrap();
        // optimality over other parameter choices is deliberately not asserted
    }

    #[test]
    fn fit_two_points() {
        let g = fit_gaussian_values(&[0.4, 0.6]).unwrap();
        assert!((g.mu - 0.5).abs() < 1e-15);
        assert!((g.sigma - 0.02f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn fit_errors() {
        assert_eq!(
            fit_gaussian_values(&[0.3, 0.3, 0.3]),
            Err(Error::ZeroVariance)
        );
        assert!(matches!(
            fit_gaussian_values(&[0.3]),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn fit_recovers_normal_samples() {
        let mut rng = StdRng::seed_from_u64(42);
        let dist = Normal::new(0.5, 0.01).unwrap();
        let xs: Vec<f64> = (0..10_000).map(|_| dist.sample(&mut rng)).collect();
        let g = fit_gaussian_values(&xs).unwrap();
        assert!((g.mu - 0.5).abs() <= 0.001);
        assert!((g.sigma - 0.01).abs() <= 0.002);
    }

    #[test]
    fn buckets_counting() {
        let r = largest_bucket_values(&[0.1, 0.15, 0.9], 1).unwrap();
        assert_eq!(r.empirical_fraction, 1.0);
        assert!((r.fraction - 1.0).abs() < 1e-12);

        let r = largest_bucket_values(&[0.1, 0.15, 0.9], 2).unwrap();
        assert!((r.empirical_fraction - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.largest, 0);
        assert_eq!(r.counts, vec![2, 1]);
        assert!((0.0..=1.0).contains(&r.fraction));
        assert_eq!(
            largest_bucket_values(&[0.1, 0.2], 0),
            Err(Error::ZeroPartitions)
        );
    }

    #[test]
    fn bucket_edges() {
        assert_eq!(bucket_of(1.0, 4), 3);
        assert_eq!(bucket_of(0.0, 4), 0);
        assert_eq!(bucket_of(0.25, 4), 1);
        let b = bucket_bounds(4);
        assert_eq!(b.first().unwrap().0, 0.0);
        assert_eq!(b.last().unwrap().1, 1.0);
        assert!(b.windows(2).all(|w| w[0].1 == w[1].0));
    }

    #[test]
    fn off_mean_bucket_uses_signed_edges() {
        // mass of [0.5, 1] under N(0.25, 0.1) relative to [0, 1]
        let r = mass_ratio(2.5, 7.5, -2.5, 7.5).unwrap();
        let want = (normal_cdf(7.5) - normal_cdf(2.5)) / (normal_cdf(7.5) - normal_cdf(-2.5));
        assert!((r - want).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn cdf_monotone(a in -9.0f64..9.0, b in -9.0f64..9.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(normal_cdf(lo) <= normal_cdf(hi));
        }

        #[test]
        fn cdf_reflection(z in -8.0f64..8.0) {
            prop_assert!((normal_cdf(z) + normal_cdf(-z) - 1.0).abs() <= 2e-7);
        }

        #[test]
        fn swapped_params_are_reciprocal(
            k1 in 0.0f64..4.0, k2 in 0.05f64..4.0, k3 in 0.0f64..4.0, k4 in 0.05f64..4.0,
        ) {
            let p = SublistParams::new(k1, k2, k3, k4, 10);
            let q = SublistParams::new(k3, k4, k1, k2, 10);
            let prod = sublist_fraction(&p).unwrap() * sublist_fraction(&q).unwrap();
            prop_assert!((prod - 1.0).abs() < 1e-12);
        }

        #[test]
        fn bucket_counts_sum_to_len(
            xs in prop::collection::vec(0.0f64..=1.0, 2..200), parts in 1u32..50,
        ) {
            prop_assume!(xs.iter().any(|&v| v != xs[0]));
            let r = largest_bucket_values(&xs, parts).unwrap();
            prop_assert_eq!(r.counts.iter().sum::<usize>(), xs.len());
            prop_assert!((0.0..=1.0).contains(&r.empirical_fraction));
            prop_assert!(r.fraction >= 0.0 && r.fraction <= 1.0 + 1e-12);
        }
    }
}

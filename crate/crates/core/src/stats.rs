//! Distances between finite distributions, Bernoulli divergences, and the
//! sample-size and interval arithmetic used by the experiments.

use std::collections::BTreeMap;

use num_traits::Float;
use rand::Rng;
use rand_distr::{Binomial, Distribution as _};
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

/// Normal quantile for two-sided 95% intervals.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Largest dense support accepted by the empirical estimators.
pub const MAX_EMPIRICAL_SUPPORT: usize = 1_000_000;

/// Probability masses over ordered keys, summing to one within `1e-9`.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteDistribution<K: Ord, T> {
    mass: BTreeMap<K, T>,
}

impl<K: Ord + Clone, T: Scalar> FiniteDistribution<K, T> {
    /// Builds a distribution, merging repeated keys.
    pub fn new(pairs: impl IntoIterator<Item = (K, T)>) -> Result<Self> {
        let mut mass: BTreeMap<K, T> = BTreeMap::new();
        for (k, p) in pairs {
            if p.is_negative() {
                return Err(invalid(format!("negative mass {p:?}")));
            }
            let slot = mass.entry(k).or_insert_with(T::zero);
            *slot = slot.clone() + p;
        }
        let total = mass.values().fold(0.0, |acc, p| acc + p.as_f64());
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Unnormalized(total));
        }
        Ok(Self { mass })
    }

    /// Uniform distribution over the given keys.
    pub fn uniform(keys: impl IntoIterator<Item = K>) -> Result<Self> {
        let keys: Vec<K> = keys.into_iter().collect();
        let p = T::ratio(1, keys.len().max(1) as i64);
        Self::new(keys.into_iter().map(|k| (k, p.clone())))
    }

    pub fn point(key: K) -> Self {
        Self {
            mass: BTreeMap::from([(key, T::one())]),
        }
    }

    /// Normalized frequencies of the given counts.
    pub fn from_counts(counts: impl IntoIterator<Item = (K, u64)>) -> Result<Self> {
        let counts: Vec<(K, u64)> = counts.into_iter().collect();
        let total: u64 = counts.iter().map(|(_, c)| c).sum();
        if total == 0 {
            return Err(invalid("no samples"));
        }
        Self::new(
            counts
                .into_iter()
                .map(|(k, c)| (k, T::from_u64(c).expect("count fits") / T::from_u64(total).expect("total fits"))),
        )
    }

    pub fn prob(&self, key: &K) -> T {
        self.mass.get(key).cloned().unwrap_or_else(T::zero)
    }

    pub fn support(&self) -> impl Iterator<Item = &K> {
        self.mass.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, &T)> {
        self.mass.iter()
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }
}

/// Total variation distance `(1/2) sum |p - q|` over the union of supports.
pub fn tv_exact<K: Ord + Clone, T: Scalar>(p: &FiniteDistribution<K, T>, q: &FiniteDistribution<K, T>) -> T {
    let mut l1 = T::zero();
    for (k, a) in p.iter() {
        l1 = l1 + (a.clone() - q.prob(k)).abs();
    }
    for (k, b) in q.iter() {
        if !p.mass.contains_key(k) {
            l1 = l1 + b.clone();
        }
    }
    l1 / T::ratio(2, 1)
}

/// Sample counts over the dense support `0..size`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EmpiricalCounts {
    counts: Vec<u64>,
    total: u64,
}

impl EmpiricalCounts {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 || size > MAX_EMPIRICAL_SUPPORT {
            return Err(Error::Infeasible(format!(
                "empirical support of size {size} outside 1..={MAX_EMPIRICAL_SUPPORT}"
            )));
        }
        Ok(Self {
            counts: vec![0; size],
            total: 0,
        })
    }

    pub fn from_counts(counts: Vec<u64>) -> Result<Self> {
        let mut out = Self::new(counts.len())?;
        out.total = counts.iter().sum();
        out.counts = counts;
        Ok(out)
    }

    pub fn add(&mut self, index: usize) {
        self.counts[index] += 1;
        self.total += 1;
    }

    pub fn merge(&mut self, other: &EmpiricalCounts) -> Result<()> {
        if other.counts.len() != self.counts.len() {
            return Err(Error::DimensionMismatch {
                what: "empirical support",
                expected: self.counts.len(),
                actual: other.counts.len(),
            });
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
        Ok(())
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let t = self.total.max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / t).collect()
    }

    fn resample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        multinomial(&self.frequencies(), self.total, rng)
            .into_iter()
            .map(|c| c as f64 / self.total.max(1) as f64)
            .collect()
    }
}

/// Multinomial draw by sequential conditional binomials.
fn multinomial<R: Rng + ?Sized>(probs: &[f64], trials: u64, rng: &mut R) -> Vec<u64> {
    let mut left = trials;
    let mut rest = 1.0;
    let mut out = Vec::with_capacity(probs.len());
    for &p in probs {
        if left == 0 || rest <= 0.0 {
            out.push(0);
            continue;
        }
        let ratio = (p / rest).clamp(0.0, 1.0);
        let k = Binomial::new(left, ratio).map(|b| b.sample(rng)).unwrap_or(0);
        out.push(k);
        left -= k;
        rest -= p;
    }
    out
}

/// Plug-in TV estimate with a bootstrap interval.
///
/// The plug-in estimator is biased upward by sampling noise (roughly
/// `sum_k sqrt(p_k / N)` for small true distances), so a small true
/// distance shows up as a small positive estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TvEstimate {
    pub estimate: f64,
    /// 95% half-width from the bootstrap standard deviation.
    pub ci_halfwidth: f64,
    pub support: usize,
    pub samples: u64,
}

fn l1_half(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0
}

fn bootstrap_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
    var.sqrt()
}

/// Empirical TV between two sample sets over the same dense support.
pub fn tv_empirical<R: Rng + ?Sized>(
    p: &EmpiricalCounts,
    q: &EmpiricalCounts,
    bootstrap: usize,
    rng: &mut R,
) -> Result<TvEstimate> {
    if p.counts.len() != q.counts.len() {
        return Err(Error::DimensionMismatch {
            what: "empirical support",
            expected: p.counts.len(),
            actual: q.counts.len(),
        });
    }
    if p.total == 0 || q.total == 0 {
        return Err(invalid("empirical TV needs samples on both sides"));
    }
    let estimate = l1_half(&p.frequencies(), &q.frequencies());
    let reps: Vec<f64> = (0..bootstrap)
        .map(|_| l1_half(&p.resample(rng), &q.resample(rng)))
        .collect();
    Ok(TvEstimate {
        estimate,
        ci_halfwidth: Z95 * bootstrap_sd(&reps),
        support: p.counts.len(),
        samples: p.total.min(q.total),
    })
}

/// Empirical TV between samples and a known dense distribution.
pub fn tv_empirical_vs<R: Rng + ?Sized>(
    p: &EmpiricalCounts,
    exact: &[f64],
    bootstrap: usize,
    rng: &mut R,
) -> Result<TvEstimate> {
    if p.counts.len() != exact.len() {
        return Err(Error::DimensionMismatch {
            what: "empirical support",
            expected: p.counts.len(),
            actual: exact.len(),
        });
    }
    let total: f64 = exact.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Unnormalized(total));
    }
    if p.total == 0 {
        return Err(invalid("empirical TV needs samples"));
    }
    let estimate = l1_half(&p.frequencies(), exact);
    let reps: Vec<f64> = (0..bootstrap).map(|_| l1_half(&p.resample(rng), exact)).collect();
    Ok(TvEstimate {
        estimate,
        ci_halfwidth: Z95 * bootstrap_sd(&reps),
        support: exact.len(),
        samples: p.total,
    })
}

/// Bernoulli KL divergence `KL(Bern(p) || Bern(q))` in nats. Returns
/// `+inf` when `q` is 0 or 1 and differs from `p`.
pub fn kl_bernoulli<F: Float>(p: F, q: F) -> Result<F> {
    let unit = |x: F| x >= F::zero() && x <= F::one();
    if !unit(p) || !unit(q) {
        return Err(invalid("KL arguments must lie in [0, 1]"));
    }
    let term = |a: F, b: F| {
        if a == F::zero() {
            F::zero()
        } else if b == F::zero() {
            F::infinity()
        } else {
            a * (a / b).ln()
        }
    };
    Ok(term(p, q) + term(F::one() - p, F::one() - q))
}

/// TV upper bounds implied by a KL value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PinskerBounds {
    /// `sqrt(kl / 2)`, used for every internal bound.
    pub standard: f64,
    /// `sqrt(kl)`, the looser form, kept for comparison in reports.
    pub loose: f64,
}

pub fn pinsker_tv_bound(kl: f64) -> PinskerBounds {
    PinskerBounds {
        standard: (kl / 2.0).sqrt().min(1.0),
        loose: kl.sqrt().min(1.0),
    }
}

/// Smallest `l` with `exp(-2 l gap^2) <= failure`: the number of i.i.d.
/// `[0, 1]`-valued samples after which the empirical mean is within `gap`
/// of its expectation (one-sided) except with probability `failure`.
pub fn hoeffding_repetitions(gap: f64, failure: f64) -> Result<u64> {
    if !(gap > 0.0 && gap <= 1.0) {
        return Err(invalid(format!("gap must lie in (0, 1], got {gap}")));
    }
    if !(failure > 0.0 && failure < 1.0) {
        return Err(invalid(format!("failure must lie in (0, 1), got {failure}")));
    }
    let l = ((1.0 / failure).ln() / (2.0 * gap * gap)).ceil();
    if !l.is_finite() || l > u64::MAX as f64 {
        return Err(Error::Infeasible(format!("Hoeffding count for gap {gap} overflows")));
    }
    Ok((l as u64).max(1))
}

/// Wilson score interval for `successes / trials`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Half-width of the 95% Wilson interval.
pub fn wilson_halfwidth(successes: u64, trials: u64) -> f64 {
    let (lo, hi) = wilson_interval(successes, trials, Z95);
    (hi - lo) / 2.0
}

/// A Bernoulli frequency with its 95% Wilson half-width.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Proportion {
    pub successes: u64,
    pub trials: u64,
    pub estimate: f64,
    pub ci_halfwidth: f64,
}

impl Proportion {
    pub fn new(successes: u64, trials: u64) -> Self {
        Self {
            successes,
            trials,
            estimate: if trials == 0 { 0.0 } else { successes as f64 / trials as f64 },
            ci_halfwidth: wilson_halfwidth(successes, trials),
        }
    }
}

/// Running mean and standard error (Welford).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MeanAcc {
    n: u64,
    mean: f64,
    m2: f64,
}

impl MeanAcc {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Chan et al. pairwise merge.
    pub fn merge(&mut self, other: &MeanAcc) {
        if other.n == 0 {
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        self.m2 += other.m2 + delta * delta * (self.n as f64) * (other.n as f64) / n as f64;
        self.mean += delta * other.n as f64 / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

/// Pearson chi-square goodness of fit of `counts` against `probs`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

pub fn chi_square(counts: &[u64], probs: &[f64]) -> Result<ChiSquare> {
    if counts.len() != probs.len() {
        return Err(Error::DimensionMismatch {
            what: "chi-square cells",
            expected: probs.len(),
            actual: counts.len(),
        });
    }
    if counts.len() < 2 {
        return Err(invalid("chi-square needs at least two cells"));
    }
    let total: u64 = counts.iter().sum();
    let mut statistic = 0.0;
    for (&c, &p) in counts.iter().zip(probs) {
        let e = p * total as f64;
        if e <= 0.0 {
            if c > 0 {
                statistic = f64::INFINITY;
            }
            continue;
        }
        statistic += (c as f64 - e).powi(2) / e;
    }
    let dof = counts.len() - 1;
    let p_value = if statistic.is_finite() {
        let dist = ChiSquared::new(dof as f64).map_err(|e| invalid(e.to_string()))?;
        1.0 - dist.cdf(statistic)
    } else {
        0.0
    };
    Ok(ChiSquare {
        statistic,
        dof,
        p_value,
    })
}

/// `C(n, k) / 2^n`.
pub fn binomial_mass(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let ln_c = (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum::<f64>();
    (ln_c - n as f64 * std::f64::consts::LN_2).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Streams;
    use crate::Exact;

    #[test]
    fn tv_basic_cases() {
        let p = FiniteDistribution::<u8, f64>::new([(0, 0.7), (1, 0.3)]).unwrap();
        let q = FiniteDistribution::<u8, f64>::new([(0, 0.5), (1, 0.5)]).unwrap();
        assert!((tv_exact(&p, &q) - 0.2).abs() < 1e-15);
        assert_eq!(tv_exact(&p, &p), 0.0);
        let a = FiniteDistribution::<u8, Exact>::point(3);
        let b = FiniteDistribution::<u8, Exact>::point(4);
        assert_eq!(tv_exact(&a, &b), Exact::ratio(1, 1));
        assert!(matches!(
            FiniteDistribution::<u8, f64>::new([(0, 0.7)]),
            Err(Error::Unnormalized(_))
        ));
        assert!(FiniteDistribution::<u8, f64>::new([(0, 1.5), (1, -0.5)]).is_err());
    }

    #[test]
    fn empirical_support_cap() {
        assert!(matches!(EmpiricalCounts::new(2_000_000), Err(Error::Infeasible(_))));
        assert!(EmpiricalCounts::new(0).is_err());
    }

    #[test]
    fn disjoint_samples_have_tv_one() {
        let mut rng = Streams::new(1).stream(&[]);
        let p = EmpiricalCounts::from_counts(vec![10, 0, 0]).unwrap();
        let q = EmpiricalCounts::from_counts(vec![0, 7, 3]).unwrap();
        let est = tv_empirical(&p, &q, 50, &mut rng).unwrap();
        assert_eq!(est.estimate, 1.0);
        assert!(est.ci_halfwidth < 1e-12);
    }

    #[test]
    fn exhaustive_weighting_matches_exact() {
        let mut rng = Streams::new(2).stream(&[]);
        let p = EmpiricalCounts::from_counts(vec![1, 2, 1]).unwrap();
        let est = tv_empirical_vs(&p, &[0.5, 0.25, 0.25], 10, &mut rng).unwrap();
        assert!((est.estimate - 0.25).abs() < 1e-15);
    }

    #[test]
    fn multinomial_preserves_total() {
        let mut rng = Streams::new(3).stream(&[]);
        let draw = multinomial(&[0.2, 0.3, 0.5], 1000, &mut rng);
        assert_eq!(draw.iter().sum::<u64>(), 1000);
    }

    #[test]
    fn kl_limits() {
        assert_eq!(kl_bernoulli(0.5, 0.5).unwrap(), 0.0);
        assert_eq!(kl_bernoulli(0.0, 0.0).unwrap(), 0.0);
        assert!(kl_bernoulli(0.3, 0.0).unwrap().is_infinite());
        assert!(kl_bernoulli(0.3, 1.0).unwrap().is_infinite());
        assert!(kl_bernoulli(1.2, 0.5).is_err());
        assert!((kl_bernoulli(1.0f64, 0.5).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn hoeffding_closed_form() {
        assert_eq!(hoeffding_repetitions(0.1, 0.05).unwrap(), 150);
        assert_eq!(hoeffding_repetitions(0.05, 0.05).unwrap(), 600);
        assert!(hoeffding_repetitions(0.0, 0.05).is_err());
        assert!(hoeffding_repetitions(0.1, 1.0).is_err());
    }

    #[test]
    fn wilson_contains_estimate() {
        let (lo, hi) = wilson_interval(30, 100, Z95);
        assert!(lo < 0.3 && 0.3 < hi);
        let (lo, hi) = wilson_interval(0, 100, Z95);
        assert!(lo.abs() < 1e-15);
        assert!(hi > 0.0 && hi < 0.05);
    }

    #[test]
    fn mean_acc_merge_matches_sequential() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut all = MeanAcc::default();
        xs.iter().for_each(|&x| all.push(x));
        let (mut a, mut b) = (MeanAcc::default(), MeanAcc::default());
        xs[..37].iter().for_each(|&x| a.push(x));
        xs[37..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert!((a.mean() - all.mean()).abs() < 1e-12);
        assert!((a.variance() - all.variance()).abs() < 1e-12);
    }

    #[test]
    fn chi_square_flags_bias() {
        let fair = chi_square(&[5000, 5000], &[0.5, 0.5]).unwrap();
        assert!(fair.p_value > 0.99);
        let skew = chi_square(&[5500, 4500], &[0.5, 0.5]).unwrap();
        assert!(skew.p_value < 1e-10);
    }

    #[test]
    fn binomial_mass_sums_to_one() {
        let total: f64 = (0..=12).map(|k| binomial_mass(12, k)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((binomial_mass(4, 2) - 0.375).abs() < 1e-15);
    }
}

//! Streaming moments, goodness-of-fit statistics and their p-values.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Running mean and sum of squared deviations (Welford), mergeable (Chan).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanVar {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl MeanVar {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &MeanVar) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let total = na + nb;
        let delta = other.mean - self.mean;
        self.mean += delta * nb / total;
        self.m2 += other.m2 + delta * delta * na * nb / total;
        self.count += other.count;
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }

    pub fn estimate(&self) -> EstimateWithCI {
        EstimateWithCI {
            mean: self.mean,
            std_error: self.std_error(),
            replicas: self.count,
        }
    }
}

impl FromIterator<f64> for MeanVar {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = MeanVar::default();
        for x in iter {
            acc.push(x);
        }
        acc
    }
}

/// Fixed-width vector of [`MeanVar`] accumulators.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanVarVec(pub Vec<MeanVar>);

impl MeanVarVec {
    pub fn new(len: usize) -> Self {
        Self(vec![MeanVar::default(); len])
    }

    pub fn push(&mut self, xs: &[f64]) {
        debug_assert_eq!(xs.len(), self.0.len());
        for (acc, &x) in self.0.iter_mut().zip(xs) {
            acc.push(x);
        }
    }

    pub fn merge(&mut self, other: &MeanVarVec) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            a.merge(b);
        }
    }

    pub fn get(&self, k: usize) -> &MeanVar {
        &self.0[k]
    }
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithCI {
    pub mean: f64,
    pub std_error: f64,
    pub replicas: u64,
}

/// Slack added to every SE-scaled comparison so that statistics which are
/// exactly constant (SE = 0) compare up to rounding.
pub const ROUNDING_SLACK: f64 = 1e-12;

impl EstimateWithCI {
    pub fn half_width(&self, z: f64) -> f64 {
        z * self.std_error
    }

    /// Signed distance to `oracle` in standard errors.
    pub fn z_score(&self, oracle: f64) -> f64 {
        let diff = self.mean - oracle;
        if self.std_error > 0.0 {
            diff / self.std_error
        } else if diff.abs() <= ROUNDING_SLACK * oracle.abs().max(1.0) {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        }
    }

    /// `|mean - oracle| ≤ z·SE`, up to rounding.
    pub fn agrees_with(&self, oracle: f64, z: f64) -> bool {
        (self.mean - oracle).abs() <= z * self.std_error + ROUNDING_SLACK * oracle.abs().max(1.0)
    }

    /// Difference of two independent estimates.
    pub fn minus(&self, other: &EstimateWithCI) -> EstimateWithCI {
        EstimateWithCI {
            mean: self.mean - other.mean,
            std_error: self.std_error.hypot(other.std_error),
            replicas: self.replicas.min(other.replicas),
        }
    }

    /// `c · self` for a constant `c`.
    pub fn scale(&self, c: f64) -> EstimateWithCI {
        EstimateWithCI {
            mean: c * self.mean,
            std_error: c.abs() * self.std_error,
            replicas: self.replicas,
        }
    }
}

/// Linear combination `Σ c_k X_k` of independent estimates.
pub fn combine(terms: &[(f64, EstimateWithCI)]) -> EstimateWithCI {
    let mean = terms.iter().map(|(c, e)| c * e.mean).sum();
    let var: f64 = terms.iter().map(|(c, e)| (c * e.std_error).powi(2)).sum();
    EstimateWithCI {
        mean,
        std_error: var.sqrt(),
        replicas: terms.iter().map(|(_, e)| e.replicas).min().unwrap_or(0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub sample_size: u64,
}

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda.is_nan() || lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi-transformed series, fast for small λ.
        let c = std::f64::consts::PI * std::f64::consts::PI / (8.0 * lambda * lambda);
        let s: f64 = (1..=100)
            .map(|k| {
                let m = (2 * k - 1) as f64;
                (-m * m * c).exp()
            })
            .sum();
        return (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0);
    }
    let s: f64 = (1..=100)
        .map(|k| {
            let kf = k as f64;
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            sign * (-2.0 * kf * kf * lambda * lambda).exp()
        })
        .sum();
    (2.0 * s).clamp(0.0, 1.0)
}

/// Asymptotic p-value with the small-sample correction of the effective size.
fn ks_p_value(d: f64, effective_n: f64) -> f64 {
    let sq = effective_n.sqrt();
    kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d)
}

fn sorted(sample: &[f64]) -> Result<Vec<f64>> {
    if sample.is_empty() {
        return Err(Error::invalid("KS test needs a nonempty sample"));
    }
    if sample.iter().any(|x| x.is_nan()) {
        return Err(Error::invalid("KS sample contains NaN"));
    }
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// One-sample KS test against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Result<KsResult> {
    let v = sorted(sample)?;
    let m = v.len() as f64;
    let d = v
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i + 1) as f64 / m - f).max(f - i as f64 / m)
        })
        .fold(0.0, f64::max);
    Ok(KsResult {
        statistic: d,
        p_value: ks_p_value(d, m),
        sample_size: v.len() as u64,
    })
}

/// Two-sample KS test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    let (a, b) = (sorted(a)?, sorted(b)?);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(KsResult {
        statistic: d,
        p_value: ks_p_value(d, na * nb / (na + nb)),
        sample_size: (a.len() + b.len()) as u64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: u64,
    pub p_value: f64,
}

/// Pearson goodness of fit of `observed` counts to `expected` counts.
pub fn chi_square_gof(observed: &[u64], expected: &[f64]) -> Result<ChiSquareResult> {
    if observed.len() != expected.len() || observed.len() < 2 {
        return Err(Error::invalid("chi-square needs matching count vectors of length ≥ 2"));
    }
    if expected.iter().any(|e| e.is_nan() || *e <= 0.0) {
        return Err(Error::invalid("expected counts must be positive"));
    }
    let statistic: f64 = observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum();
    let dof = (observed.len() - 1) as u64;
    let p_value = ChiSquared::new(dof as f64)
        .map_err(|e| Error::invalid(e.to_string()))?
        .sf(statistic);
    Ok(ChiSquareResult {
        statistic,
        dof,
        p_value,
    })
}

/// Median of a sample; the mean of the two middle values for even sizes.
pub fn median(sample: &[f64]) -> Result<f64> {
    let v = sorted(sample)?;
    let m = v.len();
    Ok(if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use rand::Rng;

    #[test]
    fn welford_and_merge_agree_with_two_pass() {
        let xs: Vec<f64> = (0..1000).map(|k| ((k * 37) % 101) as f64 * 0.1 - 3.0).collect();
        let mean = xs.iter().sum::<f64>() / 1000.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 999.0;
        let one: MeanVar = xs.iter().copied().collect();
        let mut a: MeanVar = xs[..313].iter().copied().collect();
        let b: MeanVar = xs[313..].iter().copied().collect();
        a.merge(&b);
        for acc in [one, a] {
            assert!((acc.mean - mean).abs() < 1e-12);
            assert!((acc.variance() - var).abs() < 1e-10);
        }
        let mut empty = MeanVar::default();
        empty.merge(&one);
        assert_eq!(empty, one);
    }

    #[test]
    fn constant_statistic_compares_by_rounding() {
        let e: MeanVar = std::iter::repeat_n(0.125, 50).collect();
        let est = e.estimate();
        assert_eq!(est.std_error, 0.0);
        assert!(est.agrees_with(0.125, 4.0));
        assert!(!est.agrees_with(0.126, 4.0));
        assert_eq!(est.z_score(0.125), 0.0);
    }

    #[test]
    fn kolmogorov_branches_meet() {
        let below = kolmogorov_sf(1.18 - 1e-12);
        let above = kolmogorov_sf(1.18 + 1e-12);
        assert!((below - above).abs() < 1e-10);
        // known quantiles of the Kolmogorov distribution
        assert!((kolmogorov_sf(1.358) - 0.05).abs() < 5e-4);
        assert!((kolmogorov_sf(1.628) - 0.01).abs() < 5e-4);
        assert!((kolmogorov_sf(1.949) - 0.001).abs() < 1e-4);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
        assert!(kolmogorov_sf(0.2) > 0.999_99);
    }

    #[test]
    fn ks_on_exact_quantiles_is_small() {
        let m = 1000;
        let xs: Vec<f64> = (0..m).map(|k| (k as f64 + 0.5) / m as f64).collect();
        let r = ks_one_sample(&xs, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!((r.statistic - 0.5 / m as f64).abs() < 1e-12);
        assert!(r.p_value > 0.999);
    }

    #[test]
    fn ks_detects_a_shift() {
        let mut rng = RngStream::new(3, 0).rng();
        let xs: Vec<f64> = (0..2000).map(|_| rng.random::<f64>() * 0.9).collect();
        let r = ks_one_sample(&xs, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(r.p_value < 1e-6);
        let ys: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
        assert!(ks_two_sample(&xs, &ys).unwrap().p_value < 1e-6);
    }

    #[test]
    fn two_sample_statistic_by_hand() {
        let r = ks_two_sample(&[1.0, 2.0, 3.0], &[2.5, 3.5]).unwrap();
        // after 2.0 the empirical CDFs are 2/3 and 0
        assert!((r.statistic - 2.0 / 3.0).abs() < 1e-15);
        let same = ks_two_sample(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!(same.statistic, 0.0);
        assert!(ks_two_sample(&[], &[1.0]).is_err());
    }

    #[test]
    fn chi_square_basics() {
        let r = chi_square_gof(&[10, 10, 10], &[10.0, 10.0, 10.0]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.dof, 2);
        assert!((r.p_value - 1.0).abs() < 1e-12);
        // chi-square(1) survival at 3.841 is 0.05
        let r = chi_square_gof(&[0, 0], &[1.0, 1.0]).unwrap();
        assert!((r.statistic - 2.0).abs() < 1e-15);
        assert!(chi_square_gof(&[1], &[1.0]).is_err());
    }

    #[test]
    fn median_values() {
        assert_eq!(median(&[3.0, 1.0, 2.0]).unwrap(), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]).unwrap(), 2.5);
        assert!(median(&[]).is_err());
    }

    #[test]
    fn combination_of_estimates() {
        let a = EstimateWithCI { mean: 1.0, std_error: 0.3, replicas: 10 };
        let b = EstimateWithCI { mean: 0.5, std_error: 0.4, replicas: 12 };
        let d = a.minus(&b);
        assert!((d.mean - 0.5).abs() < 1e-15 && (d.std_error - 0.5).abs() < 1e-15);
        let c = combine(&[(2.0, a), (-1.0, b)]);
        assert!((c.mean - 1.5).abs() < 1e-15);
        assert!((c.std_error - (0.36f64 + 0.16).sqrt()).abs() < 1e-15);
    }
}

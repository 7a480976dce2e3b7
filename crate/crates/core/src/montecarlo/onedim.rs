//! One-dimensional statistics: Dirichlet partial sums, weighted empirical
//! processes, window counts and spacings of uniform samples.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::engine::Engine;
use super::report::Check;
use super::stats::{ks_two_sample, EstimateWithCI, KsResult};
use super::sub_seed;
use crate::ensembles::{sample_dirichlet, sample_gamma};
use crate::error::{Error, Result};
use crate::processes::floor_index;

fn uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

fn sorted_uniforms<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut c: Vec<f64> = (0..n).map(|_| uniform(rng)).collect();
    c.sort_by(f64::total_cmp);
    c
}

/// Largest number of sorted points in a closed window `[c_i, c_i + h]`.
pub fn max_window_count(sorted: &[f64], h: f64) -> usize {
    let mut best = 0;
    let mut hi = 0;
    for (lo, &x) in sorted.iter().enumerate() {
        if hi < lo {
            hi = lo;
        }
        while hi < sorted.len() && sorted[hi] <= x + h {
            hi += 1;
        }
        best = best.max(hi - lo);
    }
    best
}

/// `C_(k+r) - C_(k)` for `n` sorted points with `C_(0) = 0` and `C_(n+1) = 1`.
pub fn order_gap(sorted: &[f64], k: usize, r: usize) -> Result<f64> {
    let n = sorted.len();
    if k + r > n + 1 {
        return Err(Error::invalid(format!("k + r = {} exceeds n + 1 = {}", k + r, n + 1)));
    }
    let at = |m: usize| match m {
        0 => 0.0,
        m if m == n + 1 => 1.0,
        m => sorted[m - 1],
    };
    Ok(at(k + r) - at(k))
}

/// `(g_1 + … + g_r) / (g_1 + … + g_{n+1})` with i.i.d. unit exponentials.
pub fn gamma_ratio<R: Rng + ?Sized>(n: usize, r: usize, rng: &mut R) -> Result<f64> {
    if r > n + 1 {
        return Err(Error::invalid("r exceeds the number of spacings"));
    }
    let mut head = 0.0;
    let mut total = 0.0;
    for i in 0..=n {
        let g = sample_gamma(1.0, rng)?;
        if i < r {
            head += g;
        }
        total += g;
    }
    Ok(if r == n + 1 { 1.0 } else { head / total })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRow {
    pub n: usize,
    pub mean_max_count: EstimateWithCI,
    pub ratio_to_log_n: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpacingsResult {
    pub windows: Vec<WindowRow>,
    pub gap_n: usize,
    pub gap_k: usize,
    pub gap_r: usize,
    pub gap_ks: KsResult,
}

impl SpacingsResult {
    /// Largest over smallest `mean / log n`.
    pub fn log_ratio_spread(&self) -> f64 {
        let r: Vec<f64> = self.windows.iter().map(|w| w.ratio_to_log_n).collect();
        r.iter().copied().fold(f64::MIN, f64::max) / r.iter().copied().fold(f64::MAX, f64::min)
    }

    pub fn checks(&self, alpha: f64) -> Vec<Check> {
        let mut out: Vec<Check> = self
            .windows
            .iter()
            .map(|w| {
                let m = w.mean_max_count.mean;
                let mut c = if w.n == 100 {
                    Check::predicate("mean sup window count", m, "in [2, 20]", (2.0..=20.0).contains(&m))
                } else {
                    Check::predicate("mean sup window count", m, "informational", true)
                };
                c.std_error = Some(w.mean_max_count.std_error);
                c.with_n(w.n)
            })
            .collect();
        let spread = self.log_ratio_spread();
        out.push(Check::predicate("mean sup window count / log n, max/min", spread, "<= 3", spread <= 3.0));
        out.push(
            Check::ks(
                format!("order gap k={} r={} vs gamma ratio", self.gap_k, self.gap_r),
                self.gap_ks,
                alpha,
            )
            .with_n(self.gap_n),
        );
        out
    }
}

/// Window counts over `window_ns` and the spacings identity at `(gap_n, k, r)`.
pub fn spacings_diagnostics(
    engine: &Engine,
    seed: u64,
    window_ns: &[usize],
    window_replicas: u64,
    (gap_n, k, r): (usize, usize, usize),
    gap_replicas: u64,
) -> Result<SpacingsResult> {
    if window_ns.iter().any(|&n| n < 2) || gap_n < 2 {
        return Err(Error::invalid("n must be at least 2"));
    }
    let mut windows = Vec::with_capacity(window_ns.len());
    for &n in window_ns {
        let h = 1.0 / n as f64;
        let acc = engine.mean_var(sub_seed(seed, format!("windows n={n}")), window_replicas, |rng, _| {
            Ok(max_window_count(&sorted_uniforms(n, rng), h) as f64)
        })?;
        windows.push(WindowRow {
            n,
            mean_max_count: acc.estimate(),
            ratio_to_log_n: acc.mean / (n as f64).ln(),
        });
    }
    order_gap(&vec![0.5; gap_n], k, r)?;
    let lhs = engine.collect(sub_seed(seed, "gap order"), gap_replicas, |rng, _| {
        order_gap(&sorted_uniforms(gap_n, rng), k, r)
    })?;
    let rhs = engine.collect(sub_seed(seed, "gap gamma"), gap_replicas, |rng, _| gamma_ratio(gap_n, r, rng))?;
    Ok(SpacingsResult {
        windows,
        gap_n,
        gap_k: k,
        gap_r: r,
        gap_ks: ks_two_sample(&lhs, &rhs)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneDimRow {
    pub name: String,
    pub estimate: EstimateWithCI,
    /// Exact value at this `n`.
    pub exact: f64,
    /// Value as `n → ∞`.
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneDimResult {
    pub n: usize,
    pub beta_prime: f64,
    pub s: f64,
    pub rows: Vec<OneDimRow>,
}

impl OneDimResult {
    /// Asserts against the exact finite-n values; the limit is reported as a z-score.
    pub fn checks(&self, z: f64) -> Vec<Check> {
        self.rows
            .iter()
            .flat_map(|r| {
                let exact = Check::against(r.name.clone(), r.estimate, r.exact, z);
                let limit = Check::info(format!("{} (limit)", r.name), r.estimate, Some(r.limit));
                [exact, limit]
            })
            .map(|c| {
                let mut c = c.with_n(self.n);
                c.point[0] = Some(self.s);
                c
            })
            .collect()
    }
}

/// Variance of `√n B₀(s)` from Dirichlet partial sums, the weighted empirical
/// variance at `s`, and the mean of `n Σ u_i²`.
pub fn dirichlet_onedim_checks(
    engine: &Engine,
    seed: u64,
    n: usize,
    replicas: u64,
    beta_prime: f64,
    s: f64,
) -> Result<OneDimResult> {
    if n < 2 {
        return Err(Error::invalid("n must be at least 2"));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::invalid("s must lie in (0, 1)"));
    }
    let nf = n as f64;
    let sqrt_n = nf.sqrt();
    let k = floor_index(n, s);
    let acc = engine.mean_var_vec(seed, replicas, 3, |rng, _, buf| {
        let u = sample_dirichlet(n, beta_prime, rng)?;
        let partial: f64 = u[..k].iter().map(|x| x - 1.0 / nf).sum();
        let mut weighted = 0.0;
        for &ui in &u {
            let ind = if uniform(rng) <= s { 1.0 } else { 0.0 };
            weighted += ui * (ind - s);
        }
        let b0 = sqrt_n * partial;
        let we = sqrt_n * weighted;
        buf.extend([b0 * b0, we * we, nf * u.iter().map(|x| x * x).sum::<f64>()]);
        Ok(())
    })?;
    let kf = k as f64;
    let denom = nf * beta_prime + 1.0;
    let g = s * (1.0 - s);
    let weight = nf * (beta_prime + 1.0) / denom;
    let rows = vec![
        OneDimRow {
            name: "Var sqrt(n) B0(s)".into(),
            estimate: acc.get(0).estimate(),
            exact: kf * (nf - kf) / (nf * denom),
            limit: g / beta_prime,
        },
        OneDimRow {
            name: "Var weighted empirical(s)".into(),
            estimate: acc.get(1).estimate(),
            exact: weight * g,
            limit: (1.0 + 1.0 / beta_prime) * g,
        },
        OneDimRow {
            name: "mean n sum u_i^2".into(),
            estimate: acc.get(2).estimate(),
            exact: weight,
            limit: 1.0 + 1.0 / beta_prime,
        },
    ];
    Ok(OneDimResult {
        n,
        beta_prime,
        s,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn window_count_by_hand() {
        let pts = [0.1, 0.15, 0.2, 0.5, 0.52, 0.9];
        assert_eq!(max_window_count(&pts, 0.1), 3);
        assert_eq!(max_window_count(&pts, 0.01), 1);
        assert_eq!(max_window_count(&pts, 1.0), 6);
        assert_eq!(max_window_count(&[], 0.1), 0);
    }

    #[test]
    fn full_gap_is_one_on_both_sides() {
        let mut rng = RngStream::new(1, 0).rng();
        let c = sorted_uniforms(7, &mut rng);
        assert_eq!(order_gap(&c, 0, 8).unwrap(), 1.0);
        assert_eq!(gamma_ratio(7, 8, &mut rng).unwrap(), 1.0);
        assert!(order_gap(&c, 2, 7).is_err());
        assert_eq!(order_gap(&c, 0, 1).unwrap(), c[0]);
    }

    #[test]
    fn spacings_small_run() {
        let e = Engine::new(2).unwrap();
        let r = spacings_diagnostics(&e, 3, &[100, 1000], 300, (10, 2, 3), 3000).unwrap();
        assert!(r.gap_ks.p_value > 1e-3, "{r:?}");
        assert!(r.checks(1e-3).iter().all(|c| c.pass), "{r:?}");
    }

    #[test]
    fn dirichlet_small_run() {
        let e = Engine::new(2).unwrap();
        let r = dirichlet_onedim_checks(&e, 4, 20, 20_000, 0.5, 0.5).unwrap();
        // k = 10, n = 20, β′ = 1/2: 10·10/(20·11)
        assert!((r.rows[0].exact - 100.0 / 220.0).abs() < 1e-15);
        for c in r.checks(4.5) {
            if c.rule != "informational" {
                assert!(c.pass, "{c:?}");
            }
        }
    }
}

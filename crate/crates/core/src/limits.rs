//! Covariance kernels of the limit fields and the one-dimensional limit law.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::hermite::GaussHermite;
use gauss_quad::legendre::GaussLegendre;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::ensembles::EnsembleKind;
use crate::error::{Error, Result};

fn check_unit(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{x} is outside [0, 1]")))
    }
}

#[inline]
fn g(s: f64, s2: f64) -> f64 {
    s.min(s2) - s * s2
}

/// Brownian bridge covariance `s ∧ s' - s s'`.
pub fn bridge_cov(s: f64, s2: f64) -> Result<f64> {
    check_unit(s)?;
    check_unit(s2)?;
    Ok(g(s, s2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelKind {
    /// `(s∧s')(t∧t') - ss'tt'`.
    BivariateBridge,
    /// `g(s,s') g(t,t')`.
    TiedDownBridge,
    /// `ss' g(t,t') + tt' g(s,s')`.
    CalWInfinity,
    /// Product of two independent bridges; same kernel as the tied-down bridge.
    ProductBridge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovKernel2D {
    pub kind: KernelKind,
    pub scale: f64,
}

impl CovKernel2D {
    pub fn new(kind: KernelKind) -> Self {
        Self { kind, scale: 1.0 }
    }

    pub fn scaled(kind: KernelKind, scale: f64) -> Result<Self> {
        if scale < 0.0 || !scale.is_finite() {
            return Err(Error::invalid("kernel scale must be finite and nonnegative"));
        }
        Ok(Self { kind, scale })
    }

    pub fn eval(&self, p: (f64, f64), q: (f64, f64)) -> Result<f64> {
        for x in [p.0, p.1, q.0, q.1] {
            check_unit(x)?;
        }
        Ok(self.scale * raw_kernel(self.kind, p, q))
    }

    /// Kernel matrix over a list of points, row-major.
    pub fn matrix(&self, points: &[(f64, f64)]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(points.len() * points.len());
        for &p in points {
            for &q in points {
                out.push(self.eval(p, q)?);
            }
        }
        Ok(out)
    }
}

fn raw_kernel(kind: KernelKind, (s, t): (f64, f64), (s2, t2): (f64, f64)) -> f64 {
    match kind {
        KernelKind::BivariateBridge => s.min(s2) * t.min(t2) - s * s2 * t * t2,
        KernelKind::TiedDownBridge | KernelKind::ProductBridge => g(s, s2) * g(t, t2),
        KernelKind::CalWInfinity => s * s2 * g(t, t2) + t * t2 * g(s, s2),
    }
}

pub fn kernel_eval(k: CovKernel2D, p: (f64, f64), q: (f64, f64)) -> Result<f64> {
    k.eval(p, q)
}

/// `K_n = Σ_ij E w_ij^2`.
pub fn fourth_moment_mass(n: usize, kind: EnsembleKind) -> f64 {
    let n = n as f64;
    match kind {
        EnsembleKind::HaarUnitary => 2.0 * n / (n + 1.0),
        EnsembleKind::HaarOrthogonal => 3.0 * n / (n + 2.0),
        EnsembleKind::Dft => 1.0,
        EnsembleKind::Permutation => n,
    }
}

/// `E[𝒵(s,t) 𝒵(s',t')] = K_n g(s,s') g(t,t')` at order `n`.
pub fn finite_n_z_cov(n: usize, kind: EnsembleKind, p: (f64, f64), q: (f64, f64)) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    Ok(fourth_moment_mass(n, kind) * CovKernel2D::new(KernelKind::TiedDownBridge).eval(p, q)?)
}

/// Covariance of `n^{-1/2}(𝒯 - n s t)` at order `n`: the `𝒲^∞` kernel plus
/// `K_n g g / n`. For permutations this is the bivariate bridge kernel.
pub fn finite_n_cal_t_cov(n: usize, kind: EnsembleKind, p: (f64, f64), q: (f64, f64)) -> Result<f64> {
    let w = CovKernel2D::new(KernelKind::CalWInfinity).eval(p, q)?;
    Ok(w + finite_n_z_cov(n, kind, p, q)? / n as f64)
}

/// Standard normal CDF.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn legendre20() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(NonZeroUsize::new(20).unwrap()))
}

fn hermite64() -> &'static GaussHermite {
    static RULE: OnceLock<GaussHermite> = OnceLock::new();
    RULE.get_or_init(|| GaussHermite::new(NonZeroUsize::new(64).unwrap()))
}

/// Law of `a N₁ + N₂ N₃` with independent standard normals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalLimitLaw {
    a: f64,
}

impl MarginalLimitLaw {
    pub fn new(a: f64) -> Result<Self> {
        if a < 0.0 || !a.is_finite() {
            return Err(Error::invalid(format!("a must be finite and nonnegative, got {a}")));
        }
        Ok(Self { a })
    }

    /// `a = √(1/β′)`.
    pub fn for_beta_prime(beta_prime: f64) -> Result<Self> {
        Self::new((1.0 / beta_prime).sqrt())
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn variance(&self) -> f64 {
        self.a * self.a + 1.0
    }

    /// `P(a N₁ + N₂ N₃ ≤ x)`.
    ///
    /// Given `N₃ = u` the law is `N(0, a² + u²)`, so the CDF is
    /// `2 ∫₀^∞ φ(u) Φ(x / √(a² + u²)) du`. The integrand is bounded but, for
    /// small `a`, steep near `u = 0`; dyadic panels shrinking towards 0 absorb
    /// that, and the range is cut at `u = 9` where the neglected mass is
    /// below `1e-18`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        if x == 0.0 {
            return 0.5;
        }
        if x.is_infinite() {
            return if x > 0.0 { 1.0 } else { 0.0 };
        }
        let a2 = self.a * self.a;
        let integrand = |u: f64| {
            let phi = (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt();
            phi * std_normal_cdf(x / (a2 + u * u).sqrt())
        };
        let rule = legendre20();
        let upper = 9.0;
        let mut hi = upper;
        let mut total = 0.0;
        for _ in 0..48 {
            let lo = 0.5 * hi;
            total += rule.integrate(lo, hi, integrand);
            hi = lo;
        }
        total += rule.integrate(0.0, hi, integrand);
        (2.0 * total).clamp(0.0, 1.0)
    }

    /// The same CDF by 64-point Gauss–Hermite quadrature over `N₃`. The
    /// conditional CDF has complex singularities at `u = ±ia`, so this is only
    /// accurate to `1e-6` once `a ≥ 1`.
    pub fn cdf_gauss_hermite(&self, x: f64) -> f64 {
        let a2 = self.a * self.a;
        let sum = hermite64().integrate(|y| {
            let u = std::f64::consts::SQRT_2 * y;
            std_normal_cdf(x / (a2 + u * u).sqrt())
        });
        sum / std::f64::consts::PI.sqrt()
    }
}

pub fn marginal_limit_cdf(x: f64, a: f64) -> Result<f64> {
    Ok(MarginalLimitLaw::new(a)?.cdf(x))
}

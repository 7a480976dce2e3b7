//! Householder QR specialised to Haar sampling.
//!
//! Only the unitary factor is needed. It is returned with the phase
//! correction already applied: column `k` of `Q` is multiplied by
//! `R_kk / |R_kk|`, which makes the triangular factor's diagonal positive and
//! turns `Q` of a Ginibre matrix into an exact Haar sample.

use std::ops::{Add, AddAssign, Mul, Sub, SubAssign};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub(crate) trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + AddAssign
    + SubAssign
    + Send
    + Sync
{
    const ZERO: Self;
    const ONE: Self;
    fn conj(self) -> Self;
    fn abs2(self) -> f64;
    fn scale(self, s: f64) -> Self;
    fn unscale(self, s: f64) -> Self;
    fn into_complex(self) -> Complex64;
    fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

impl Scalar for f64 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;

    #[inline]
    fn conj(self) -> Self {
        self
    }
    #[inline]
    fn abs2(self) -> f64 {
        self * self
    }
    #[inline]
    fn scale(self, s: f64) -> Self {
        self * s
    }
    #[inline]
    fn unscale(self, s: f64) -> Self {
        self / s
    }
    #[inline]
    fn into_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
    fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
}

impl Scalar for Complex64 {
    const ZERO: Self = Complex64::new(0.0, 0.0);
    const ONE: Self = Complex64::new(1.0, 0.0);

    #[inline]
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    #[inline]
    fn abs2(self) -> f64 {
        self.norm_sqr()
    }
    #[inline]
    fn scale(self, s: f64) -> Self {
        self * s
    }
    #[inline]
    fn unscale(self, s: f64) -> Self {
        self / s
    }
    #[inline]
    fn into_complex(self) -> Complex64 {
        self
    }
    fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> Self {
        // The overall scale of a Ginibre matrix does not affect Q.
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    }
}

/// `x -= tau * v * (v^* x)` for one column.
#[inline]
fn reflect<S: Scalar>(v: &[S], tau: f64, x: &mut [S]) {
    let mut dot = S::ZERO;
    for (vi, xi) in v.iter().zip(x.iter()) {
        dot += vi.conj() * *xi;
    }
    let f = dot.scale(tau);
    for (vi, xi) in v.iter().zip(x.iter_mut()) {
        *xi -= *vi * f;
    }
}

/// Haar-distributed unitary factor of the column-major `n x n` matrix `a`.
///
/// `a` is overwritten by the Householder vectors. The result is column-major.
pub(crate) fn haar_q<S: Scalar>(a: &mut [S], n: usize) -> Vec<S> {
    debug_assert_eq!(a.len(), n * n);
    let mut taus = vec![0.0f64; n];
    let mut fix = vec![S::ONE; n];

    for k in 0..n {
        let (head, tail) = a.split_at_mut((k + 1) * n);
        let v = &mut head[k * n + k..];
        let x0 = v[0];
        let abs_x0 = x0.abs2().sqrt();
        let phase = if abs_x0 > 0.0 {
            x0.unscale(abs_x0)
        } else {
            S::ONE
        };
        let below: f64 = v[1..].iter().map(|z| z.abs2()).sum();
        if below == 0.0 {
            // Already triangular in this column: H = I and R_kk = x0.
            fix[k] = phase;
            continue;
        }
        let alpha = (abs_x0 * abs_x0 + below).sqrt();
        v[0] = x0 + phase.scale(alpha);
        // |x0 + phase * alpha|^2 = (|x0| + alpha)^2
        let tau = 2.0 / (below + (abs_x0 + alpha) * (abs_x0 + alpha));
        taus[k] = tau;
        // R_kk = -phase * alpha
        fix[k] = S::ZERO - phase;

        let v: &[S] = v;
        for col in tail.chunks_exact_mut(n) {
            reflect(v, tau, &mut col[k..]);
        }
    }

    let mut q = vec![S::ZERO; n * n];
    for i in 0..n {
        q[i * n + i] = S::ONE;
    }
    for k in (0..n).rev() {
        let tau = taus[k];
        if tau == 0.0 {
            continue;
        }
        let v = &a[k * n + k..(k + 1) * n];
        for col in q[k * n..].chunks_exact_mut(n) {
            reflect(v, tau, &mut col[k..]);
        }
    }
    for (k, col) in q.chunks_exact_mut(n).enumerate() {
        let d = fix[k];
        for z in col.iter_mut() {
            *z = *z * d;
        }
    }
    q
}

/// Draws an `n x n` Ginibre matrix (column-major) and returns its Haar factor.
pub(crate) fn sample_haar<S: Scalar, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<S> {
    let mut a: Vec<S> = (0..n * n).map(|_| S::gaussian(rng)).collect();
    haar_q(&mut a, n)
}

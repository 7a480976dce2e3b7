//! Matrix ensembles and their squared-modulus weight matrices.
//!
//! Haar samples come from a Ginibre matrix pushed through the in-house
//! Householder QR in [`qr`], with the diagonal phase correction that makes the
//! law exactly Haar. The DFT matrix is deterministic and permutation matrices
//! come from a Fisher–Yates shuffle.

mod qr;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnsembleKind {
    #[serde(rename = "unitary")]
    HaarUnitary,
    #[serde(rename = "orthogonal")]
    HaarOrthogonal,
    Dft,
    Permutation,
}

impl EnsembleKind {
    pub const ALL: [EnsembleKind; 4] = [
        EnsembleKind::HaarUnitary,
        EnsembleKind::HaarOrthogonal,
        EnsembleKind::Dft,
        EnsembleKind::Permutation,
    ];

    /// β′ = β/2: 1 for the unitary group, 1/2 for the orthogonal group, and
    /// 1 for flat-modulus matrices read as unitary. Permutations carry none.
    pub fn beta_prime(self) -> Option<f64> {
        match self {
            EnsembleKind::HaarUnitary | EnsembleKind::Dft => Some(1.0),
            EnsembleKind::HaarOrthogonal => Some(0.5),
            EnsembleKind::Permutation => None,
        }
    }

    pub fn is_haar(self) -> bool {
        matches!(self, EnsembleKind::HaarUnitary | EnsembleKind::HaarOrthogonal)
    }

    pub fn name(self) -> &'static str {
        match self {
            EnsembleKind::HaarUnitary => "unitary",
            EnsembleKind::HaarOrthogonal => "orthogonal",
            EnsembleKind::Dft => "dft",
            EnsembleKind::Permutation => "permutation",
        }
    }
}

impl fmt::Display for EnsembleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnsembleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "unitary" | "haar-unitary" | "u" => Ok(EnsembleKind::HaarUnitary),
            "orthogonal" | "haar-orthogonal" | "o" => Ok(EnsembleKind::HaarOrthogonal),
            "dft" | "fourier" | "flat" => Ok(EnsembleKind::Dft),
            "permutation" | "perm" => Ok(EnsembleKind::Permutation),
            other => Err(Error::invalid(format!("unknown ensemble `{other}`"))),
        }
    }
}

/// What is known about a matrix beyond its entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Structure {
    General,
    /// Every entry has modulus exactly `n^{-1/2}`.
    FlatModulus,
    /// A 0/1 permutation matrix.
    Permutation,
}

/// Dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareMatrix {
    n: usize,
    entries: Vec<Complex64>,
    structure: Structure,
}

impl SquareMatrix {
    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::invalid("matrix must have at least one row"));
        }
        let mut entries = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::invalid(format!(
                    "matrix is not square: {n} rows but a row of length {}",
                    row.len()
                )));
            }
            entries.extend(row);
        }
        Ok(Self {
            n,
            entries,
            structure: Structure::General,
        })
    }

    fn from_col_major<S: qr::Scalar>(n: usize, cols: &[S]) -> Self {
        let mut entries = vec![Complex64::new(0.0, 0.0); n * n];
        for j in 0..n {
            for i in 0..n {
                entries[i * n + j] = cols[j * n + i].into_complex();
            }
        }
        Self {
            n,
            entries,
            structure: Structure::General,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn structure(&self) -> Structure {
        self.structure
    }

    /// Entry at zero-based `(i, j)`.
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// `max |(M M^*)_{ij} - δ_ij|`.
    pub fn unitarity_residual(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for a in 0..n {
            let ra = &self.entries[a * n..(a + 1) * n];
            for b in a..n {
                let rb = &self.entries[b * n..(b + 1) * n];
                let dot: Complex64 = ra.iter().zip(rb).map(|(x, y)| x * y.conj()).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).norm());
            }
        }
        worst
    }

    /// For a permutation matrix, the image `π(i)` of each row.
    pub fn permutation(&self) -> Option<Vec<usize>> {
        if self.structure != Structure::Permutation {
            return None;
        }
        let n = self.n;
        Some(
            (0..n)
                .map(|i| (0..n).find(|&j| self.get(i, j).re == 1.0).expect("permutation row"))
                .collect(),
        )
    }
}

/// Doubly stochastic matrix `w_ij = |U_ij|^2`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrix {
    n: usize,
    w: Vec<f64>,
}

impl WeightMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::invalid("weight matrix must be non-empty"));
        }
        let mut w = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::invalid("weight matrix is not square"));
            }
            if row.iter().any(|x| x.is_nan() || *x < 0.0) {
                return Err(Error::invalid("weights must be nonnegative"));
            }
            w.extend(row);
        }
        Ok(Self { n, w })
    }

    /// The flat matrix with every entry `1/n`.
    pub fn flat(n: usize) -> Self {
        Self {
            n,
            w: vec![1.0 / n as f64; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n + j]
    }

    /// `v_ij = w_ij - 1/n`.
    #[inline]
    pub fn centered(&self, i: usize, j: usize) -> f64 {
        self.get(i, j) - 1.0 / self.n as f64
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.w[i * self.n..(i + 1) * self.n]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }

    /// The centered matrix `V`, row-major.
    pub fn centered_matrix(&self) -> Vec<f64> {
        let inv = 1.0 / self.n as f64;
        self.w.iter().map(|x| x - inv).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n];
        for row in self.w.chunks_exact(self.n) {
            for (s, x) in sums.iter_mut().zip(row) {
                *s += x;
            }
        }
        sums
    }

    /// Largest deviation of a row or column sum from 1.
    pub fn stochastic_residual(&self) -> f64 {
        self.row_sums()
            .into_iter()
            .chain(self.column_sums())
            .map(|s| (s - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `Σ_ij w_ij^2`.
    pub fn sum_of_squares(&self) -> f64 {
        self.w.iter().map(|x| x * x).sum()
    }
}

fn check_order(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::invalid("matrix order n must be at least 1"))
    } else {
        Ok(())
    }
}

pub fn sample_haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<SquareMatrix> {
    check_order(n)?;
    let q: Vec<Complex64> = qr::sample_haar(n, rng);
    Ok(SquareMatrix::from_col_major(n, &q))
}

pub fn sample_haar_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<SquareMatrix> {
    check_order(n)?;
    let q: Vec<f64> = qr::sample_haar(n, rng);
    Ok(SquareMatrix::from_col_major(n, &q))
}

/// `e^{-2iπ m/n}` with exact values on the quarter turns.
fn root_of_unity(m: usize, n: usize) -> Complex64 {
    let m = m % n;
    if (4 * m).is_multiple_of(n) {
        return match 4 * m / n {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, -1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, 1.0),
        };
    }
    let theta = -2.0 * PI * m as f64 / n as f64;
    Complex64::new(theta.cos(), theta.sin())
}

/// `F_jk = n^{-1/2} e^{-2iπ(j-1)(k-1)/n}`.
pub fn dft_matrix(n: usize) -> Result<SquareMatrix> {
    check_order(n)?;
    let scale = 1.0 / (n as f64).sqrt();
    let mut entries = Vec::with_capacity(n * n);
    for j in 0..n {
        for k in 0..n {
            entries.push(root_of_unity(j * k, n) * scale);
        }
    }
    Ok(SquareMatrix {
        n,
        entries,
        structure: Structure::FlatModulus,
    })
}

/// Uniform permutation matrix (Fisher–Yates). Row `i` has its 1 in column `π(i)`.
pub fn sample_permutation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<SquareMatrix> {
    check_order(n)?;
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }
    let mut entries = vec![Complex64::new(0.0, 0.0); n * n];
    for (i, &p) in perm.iter().enumerate() {
        entries[i * n + p] = Complex64::new(1.0, 0.0);
    }
    Ok(SquareMatrix {
        n,
        entries,
        structure: Structure::Permutation,
    })
}

/// Draws one matrix of the given ensemble. The DFT ignores `rng`.
pub fn sample<R: Rng + ?Sized>(kind: EnsembleKind, n: usize, rng: &mut R) -> Result<SquareMatrix> {
    match kind {
        EnsembleKind::HaarUnitary => sample_haar_unitary(n, rng),
        EnsembleKind::HaarOrthogonal => sample_haar_orthogonal(n, rng),
        EnsembleKind::Dft => dft_matrix(n),
        EnsembleKind::Permutation => sample_permutation(n, rng),
    }
}

/// `w_ij = |m_ij|^2`.
pub fn weight_matrix(m: &SquareMatrix) -> WeightMatrix {
    let n = m.n;
    match m.structure {
        // The modulus is known exactly; recomputing it would cost an ulp.
        Structure::FlatModulus => WeightMatrix::flat(n),
        Structure::General | Structure::Permutation => WeightMatrix {
            n,
            w: m.entries.iter().map(|z| z.norm_sqr()).collect(),
        },
    }
}

/// Samples a matrix and returns only its weight matrix. Skips the complex
/// detour for the DFT and permutations.
pub fn sample_weights<R: Rng + ?Sized>(
    kind: EnsembleKind,
    n: usize,
    rng: &mut R,
) -> Result<WeightMatrix> {
    check_order(n)?;
    match kind {
        EnsembleKind::HaarUnitary => {
            let q: Vec<Complex64> = qr::sample_haar(n, rng);
            let mut w = vec![0.0; n * n];
            for j in 0..n {
                for i in 0..n {
                    w[i * n + j] = q[j * n + i].norm_sqr();
                }
            }
            Ok(WeightMatrix { n, w })
        }
        EnsembleKind::HaarOrthogonal => {
            let q: Vec<f64> = qr::sample_haar(n, rng);
            let mut w = vec![0.0; n * n];
            for j in 0..n {
                for i in 0..n {
                    w[i * n + j] = q[j * n + i] * q[j * n + i];
                }
            }
            Ok(WeightMatrix { n, w })
        }
        EnsembleKind::Dft => Ok(WeightMatrix::flat(n)),
        EnsembleKind::Permutation => Ok(weight_matrix(&sample_permutation(n, rng)?)),
    }
}

/// One gamma(shape, 1) variate. Shapes 1 and 1/2 use exact transforms of a
/// uniform and a normal respectively.
pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> Result<f64> {
    if shape <= 0.0 || !shape.is_finite() {
        return Err(Error::invalid(format!("gamma shape must be positive, got {shape}")));
    }
    Ok(if shape == 1.0 {
        let u: f64 = rng.random();
        -(1.0 - u).ln()
    } else if shape == 0.5 {
        let z: f64 = rng.sample(StandardNormal);
        0.5 * z * z
    } else {
        Gamma::new(shape, 1.0)
            .map_err(|e| Error::invalid(e.to_string()))?
            .sample(rng)
    })
}

/// Dirichlet(β′, …, β′) on `n` components via normalised gamma draws.
pub fn sample_dirichlet<R: Rng + ?Sized>(n: usize, beta_prime: f64, rng: &mut R) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::invalid("Dirichlet needs at least one component"));
    }
    let mut g = Vec::with_capacity(n);
    for _ in 0..n {
        g.push(sample_gamma(beta_prime, rng)?);
    }
    let total: f64 = g.iter().sum();
    for x in &mut g {
        *x /= total;
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn rng(seed: u64) -> crate::rng::StreamRng {
        RngStream::new(seed, 0).rng()
    }

    #[test]
    fn order_zero_is_rejected() {
        let mut r = rng(0);
        assert!(matches!(sample_haar_unitary(0, &mut r), Err(Error::InvalidArgument(_))));
        assert!(matches!(sample_haar_orthogonal(0, &mut r), Err(Error::InvalidArgument(_))));
        assert!(matches!(sample_permutation(0, &mut r), Err(Error::InvalidArgument(_))));
        assert!(dft_matrix(0).is_err());
    }

    #[test]
    fn order_one() {
        let mut r = rng(1);
        let u = sample_haar_unitary(1, &mut r).unwrap();
        assert!((u.get(0, 0).norm() - 1.0).abs() < 1e-12);
        let o = sample_haar_orthogonal(1, &mut r).unwrap();
        let x = o.get(0, 0);
        assert!(x.im == 0.0 && (x.re == 1.0 || x.re == -1.0), "{x}");
        let p = sample_permutation(1, &mut r).unwrap();
        assert_eq!(p.get(0, 0), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn haar_samples_are_unitary() {
        let mut r = rng(2);
        for n in [2, 4, 7, 16, 33] {
            let u = sample_haar_unitary(n, &mut r).unwrap();
            assert!(u.unitarity_residual() <= 1e-10 * n as f64);
            let o = sample_haar_orthogonal(n, &mut r).unwrap();
            assert!(o.unitarity_residual() <= 1e-10 * n as f64);
            assert!(o.entries().iter().all(|z| z.im == 0.0));
        }
        let u4 = sample_haar_unitary(4, &mut r).unwrap();
        assert!(u4.unitarity_residual() <= 1e-10);
    }

    #[test]
    fn dft_entries() {
        let f2 = dft_matrix(2).unwrap();
        let h = 1.0 / 2f64.sqrt();
        let expect = [h, h, h, -h];
        for (z, e) in f2.entries().iter().zip(expect) {
            assert!((z.re - e).abs() < 1e-15 && z.im == 0.0, "{z}");
        }
        let f4 = dft_matrix(4).unwrap();
        // one-based (2,2)
        assert_eq!(f4.get(1, 1), Complex64::new(0.0, -0.5));
        for n in [1, 3, 5, 8, 13] {
            assert!(dft_matrix(n).unwrap().unitarity_residual() < 1e-12);
        }
    }

    #[test]
    fn dft_weights_are_exactly_flat() {
        for n in [1, 5, 12] {
            let w = weight_matrix(&dft_matrix(n).unwrap());
            assert!(w.as_slice().iter().all(|&x| x == 1.0 / n as f64));
        }
        let w5 = weight_matrix(&dft_matrix(5).unwrap());
        assert!(w5.as_slice().iter().all(|&x| x == 0.2));
    }

    #[test]
    fn permutation_weights_are_the_matrix() {
        let mut r = rng(3);
        let p = sample_permutation(9, &mut r).unwrap();
        let w = weight_matrix(&p);
        for i in 0..9 {
            let ones = (0..9).filter(|&j| w.get(i, j) == 1.0).count();
            let zeros = (0..9).filter(|&j| w.get(i, j) == 0.0).count();
            assert_eq!((ones, zeros), (1, 8));
            for j in 0..9 {
                assert_eq!(w.get(i, j), p.get(i, j).re);
            }
        }
        assert_eq!(w.stochastic_residual(), 0.0);
        let perm = p.permutation().unwrap();
        let mut sorted = perm.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..9).collect::<Vec<_>>());
    }

    #[test]
    fn haar_weights_are_doubly_stochastic() {
        let mut r = rng(4);
        for kind in [EnsembleKind::HaarUnitary, EnsembleKind::HaarOrthogonal] {
            for n in [4, 17] {
                let w = sample_weights(kind, n, &mut r).unwrap();
                assert!(w.stochastic_residual() <= 1e-9);
                let v = w.centered_matrix();
                for i in 0..n {
                    let s: f64 = v[i * n..(i + 1) * n].iter().sum();
                    assert!(s.abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn sample_weights_matches_weight_matrix() {
        for kind in EnsembleKind::ALL {
            let direct = sample_weights(kind, 6, &mut rng(5)).unwrap();
            let via = weight_matrix(&sample(kind, 6, &mut rng(5)).unwrap());
            assert_eq!(direct, via);
        }
    }

    #[test]
    fn non_square_rows_rejected() {
        let rows = vec![vec![Complex64::new(1.0, 0.0); 2], vec![Complex64::new(0.0, 0.0); 3]];
        assert!(matches!(SquareMatrix::from_rows(rows), Err(Error::InvalidArgument(_))));
        assert!(WeightMatrix::from_rows(vec![vec![0.5, 0.5], vec![1.0]]).is_err());
    }

    #[test]
    fn deterministic_given_stream() {
        let a = sample_haar_unitary(8, &mut RngStream::new(9, 4).rng()).unwrap();
        let b = sample_haar_unitary(8, &mut RngStream::new(9, 4).rng()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dirichlet_sums_to_one() {
        let mut r = rng(6);
        for bp in [0.5, 1.0, 2.5] {
            for n in [1, 3, 50] {
                let u = sample_dirichlet(n, bp, &mut r).unwrap();
                assert!((u.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                assert!(u.iter().all(|&x| x >= 0.0));
            }
        }
        assert!(sample_dirichlet(3, 0.0, &mut r).is_err());
        assert!(sample_dirichlet(3, -1.0, &mut r).is_err());
    }

    #[test]
    fn parse_ensemble_names() {
        assert_eq!("unitary".parse::<EnsembleKind>().unwrap(), EnsembleKind::HaarUnitary);
        assert_eq!("DFT".parse::<EnsembleKind>().unwrap(), EnsembleKind::Dft);
        assert!("gue".parse::<EnsembleKind>().is_err());
        assert_eq!(EnsembleKind::Permutation.beta_prime(), None);
        assert_eq!(EnsembleKind::HaarOrthogonal.beta_prime(), Some(0.5));
    }
}

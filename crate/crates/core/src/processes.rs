//! Truncation statistics of a weight matrix evaluated on an `(s, t)` grid.
//!
//! All two-parameter processes are right-continuous step functions; grid
//! evaluation samples them exactly. Rows are accumulated in increasing order
//! of their selector `R_i` and columns are scanned in increasing order of
//! `C_j`, so one replica costs `O(n^2 + n |s|)` whatever the grid size, and the
//! value at a grid point does not depend on which other points are present.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ensembles::WeightMatrix;
use crate::error::{Error, Result};

/// Row and column selectors `(R_i)`, `(C_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationDraw {
    r: Vec<f64>,
    c: Vec<f64>,
}

impl TruncationDraw {
    pub fn new(r: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        if r.len() != c.len() {
            return Err(Error::DimensionMismatch {
                expected: r.len(),
                actual: c.len(),
            });
        }
        if r.iter().chain(&c).any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::invalid("selectors must lie in [0, 1]"));
        }
        Ok(Self { r, c })
    }

    /// Uniforms on `(0, 1]`, so that `s = 0` always selects nothing.
    pub fn sample<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut draw = || 1.0 - rng.random::<f64>();
        let r = (0..n).map(|_| draw()).collect();
        let c = (0..n).map(|_| draw()).collect();
        Self { r, c }
    }

    pub fn n(&self) -> usize {
        self.r.len()
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    s_points: Vec<f64>,
    t_points: Vec<f64>,
}

impl GridSpec {
    pub fn new(s_points: Vec<f64>, t_points: Vec<f64>) -> Result<Self> {
        for (name, pts) in [("s", &s_points), ("t", &t_points)] {
            if pts.is_empty() {
                return Err(Error::invalid(format!("{name} grid is empty")));
            }
            if pts.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return Err(Error::invalid(format!("{name} grid leaves [0, 1]")));
            }
            if pts.windows(2).any(|p| p[0] >= p[1]) {
                return Err(Error::invalid(format!("{name} grid is not strictly increasing")));
            }
        }
        Ok(Self { s_points, t_points })
    }

    /// Same points on both axes.
    pub fn square(points: Vec<f64>) -> Result<Self> {
        Self::new(points.clone(), points)
    }

    /// `{0.1, 0.3, 0.5, 0.7, 0.9}` on each axis plus the boundary values 0 and 1.
    pub fn default_grid() -> Self {
        let pts = vec![0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0];
        Self {
            s_points: pts.clone(),
            t_points: pts,
        }
    }

    pub fn single(s: f64, t: f64) -> Result<Self> {
        Self::new(vec![s], vec![t])
    }

    pub fn s_points(&self) -> &[f64] {
        &self.s_points
    }

    pub fn t_points(&self) -> &[f64] {
        &self.t_points
    }

    pub fn len(&self) -> usize {
        self.s_points.len() * self.t_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid points in row-major order (`s` outer).
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.s_points
            .iter()
            .flat_map(move |&s| self.t_points.iter().map(move |&t| (s, t)))
    }
}

/// `⌊n s⌋`, robust to `s` values such as `0.3` that are not exact binary fractions.
pub fn floor_index(n: usize, s: f64) -> usize {
    ((n as f64 * s + 1e-9).floor().max(0.0) as usize).min(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProcessKind {
    /// Deterministic truncation `Σ_{i≤⌊ns⌋, j≤⌊nt⌋} w_ij`.
    T,
    /// Random truncation `Σ w_ij 1{R_i≤s} 1{C_j≤t}`.
    CalT,
    /// Doubly centered random truncation.
    CalZ,
    /// `s F(t) + t G(s)`.
    CalW,
    /// Column empirical process, indexed by `t`.
    F,
    /// Row empirical process, indexed by `s`.
    G,
    /// `Σ_{i≤⌊ns⌋} (w_i1 - 1/n)`.
    B0det,
    /// `Σ_i w_i1 (1{R_i≤s} - s)`.
    CalB0,
}

impl ProcessKind {
    pub fn is_two_parameter(self) -> bool {
        matches!(
            self,
            ProcessKind::T | ProcessKind::CalT | ProcessKind::CalZ | ProcessKind::CalW
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            ProcessKind::T => "T",
            ProcessKind::CalT => "calT",
            ProcessKind::CalZ => "calZ",
            ProcessKind::CalW => "calW",
            ProcessKind::F => "F",
            ProcessKind::G => "G",
            ProcessKind::B0det => "B0det",
            ProcessKind::CalB0 => "calB0",
        }
    }
}

impl std::str::FromStr for ProcessKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "T" | "t" => ProcessKind::T,
            "calT" | "calt" => ProcessKind::CalT,
            "calZ" | "calz" | "Z" | "z" => ProcessKind::CalZ,
            "calW" | "calw" | "W" | "w" => ProcessKind::CalW,
            "F" | "f" => ProcessKind::F,
            "G" | "g" => ProcessKind::G,
            "B0det" | "b0det" | "B0" | "b0" => ProcessKind::B0det,
            "calB0" | "calb0" => ProcessKind::CalB0,
            other => return Err(Error::invalid(format!("unknown process `{other}`"))),
        })
    }
}

/// Values of one process on a grid. Two-parameter kinds are stored row-major
/// with `s` outer; `F` is indexed by `t`, every other one-parameter kind by `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessSample {
    pub kind: ProcessKind,
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl ProcessSample {
    /// Value at grid indices `(a, b)`; the unused index is ignored for
    /// one-parameter kinds.
    pub fn at(&self, a: usize, b: usize) -> f64 {
        match self.kind {
            k if k.is_two_parameter() => self.values[a * self.grid.t_points.len() + b],
            ProcessKind::F => self.values[b],
            _ => self.values[a],
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// One row per grid point.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let g = &self.grid;
        match self.kind {
            k if k.is_two_parameter() => {
                writeln!(out, "s,t,{}", k.name())?;
                for ((s, t), v) in g.points().zip(&self.values) {
                    writeln!(out, "{s:.16e},{t:.16e},{v:.16e}")?;
                }
            }
            ProcessKind::F => {
                writeln!(out, "t,F")?;
                for (t, v) in g.t_points.iter().zip(&self.values) {
                    writeln!(out, "{t:.16e},{v:.16e}")?;
                }
            }
            k => {
                writeln!(out, "s,{}", k.name())?;
                for (s, v) in g.s_points.iter().zip(&self.values) {
                    writeln!(out, "{s:.16e},{v:.16e}")?;
                }
            }
        }
        Ok(())
    }
}

/// Every random-truncation process of one replica on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Processes {
    pub cal_t: ProcessSample,
    pub cal_z: ProcessSample,
    pub cal_w: ProcessSample,
    pub f: ProcessSample,
    pub g: ProcessSample,
}

fn check_dims(w: &WeightMatrix, d: &TruncationDraw) -> Result<()> {
    if w.n() != d.n() {
        return Err(Error::DimensionMismatch {
            expected: w.n(),
            actual: d.n(),
        });
    }
    Ok(())
}

fn order_by(x: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    idx
}

/// `#{k : x_k ≤ p}` for each point, given `x` in sorted order.
fn counts_below(x: &[f64], order: &[usize], points: &[f64]) -> Vec<usize> {
    let mut pos = 0;
    points
        .iter()
        .map(|&p| {
            while pos < order.len() && x[order[pos]] <= p {
                pos += 1;
            }
            pos
        })
        .collect()
}

/// Evaluates `𝒯`, `𝒵`, `𝒲`, `F` and `G` in one pass.
pub fn evaluate(w: &WeightMatrix, d: &TruncationDraw, grid: &GridSpec) -> Result<Processes> {
    check_dims(w, d)?;
    let n = w.n();
    let (sp, tp) = (grid.s_points(), grid.t_points());
    let (ns, nt) = (sp.len(), tp.len());
    let rows = order_by(d.r());
    let cols = order_by(d.c());
    let inv_sqrt_n = 1.0 / (n as f64).sqrt();

    let row_counts = counts_below(d.r(), &rows, sp);
    let col_counts = counts_below(d.c(), &cols, tp);
    let g: Vec<f64> = sp
        .iter()
        .zip(&row_counts)
        .map(|(&s, &k)| (k as f64 - n as f64 * s) * inv_sqrt_n)
        .collect();
    let f: Vec<f64> = tp
        .iter()
        .zip(&col_counts)
        .map(|(&t, &k)| (k as f64 - n as f64 * t) * inv_sqrt_n)
        .collect();

    // Column sums, accumulated in the same order as the partial row sums so
    // that the s = 1 partial sum reproduces them bit for bit.
    let mut kappa = vec![0.0; n];
    for &i in &rows {
        for (k, x) in kappa.iter_mut().zip(w.row(i)) {
            *k += x;
        }
    }

    let mut cal_t = vec![0.0; ns * nt];
    let mut cal_z = vec![0.0; ns * nt];
    let mut partial = vec![0.0; n];
    let mut centered = vec![0.0; n];
    let mut next = 0;
    for (a, &s) in sp.iter().enumerate() {
        while next < row_counts[a] {
            for (z, x) in partial.iter_mut().zip(w.row(rows[next])) {
                *z += x;
            }
            next += 1;
        }
        for ((zc, z), k) in centered.iter_mut().zip(&partial).zip(&kappa) {
            *zc = z - s * k;
        }
        let total: f64 = cols.iter().map(|&j| centered[j]).sum();
        let (mut pos, mut run_t, mut run_z) = (0, 0.0, 0.0);
        for (b, &t) in tp.iter().enumerate() {
            while pos < col_counts[b] {
                let j = cols[pos];
                run_t += partial[j];
                run_z += centered[j];
                pos += 1;
            }
            cal_t[a * nt + b] = run_t;
            cal_z[a * nt + b] = run_z - t * total;
        }
    }

    let cal_w = sp
        .iter()
        .zip(&g)
        .flat_map(|(&s, &gs)| tp.iter().zip(&f).map(move |(&t, &ft)| s * ft + t * gs))
        .collect();

    let sample = |kind, values| ProcessSample {
        kind,
        grid: grid.clone(),
        values,
    };
    Ok(Processes {
        cal_t: sample(ProcessKind::CalT, cal_t),
        cal_z: sample(ProcessKind::CalZ, cal_z),
        cal_w: sample(ProcessKind::CalW, cal_w),
        f: sample(ProcessKind::F, f),
        g: sample(ProcessKind::G, g),
    })
}

/// Deterministic truncation via a 2D prefix-sum table.
pub fn eval_t(w: &WeightMatrix, grid: &GridSpec) -> ProcessSample {
    let n = w.n();
    let stride = n + 1;
    let mut prefix = vec![0.0; stride * stride];
    for i in 0..n {
        let mut row_run = 0.0;
        for j in 0..n {
            row_run += w.get(i, j);
            prefix[(i + 1) * stride + j + 1] = prefix[i * stride + j + 1] + row_run;
        }
    }
    let values = grid
        .points()
        .map(|(s, t)| prefix[floor_index(n, s) * stride + floor_index(n, t)])
        .collect();
    ProcessSample {
        kind: ProcessKind::T,
        grid: grid.clone(),
        values,
    }
}

pub fn eval_cal_t(w: &WeightMatrix, d: &TruncationDraw, grid: &GridSpec) -> Result<ProcessSample> {
    Ok(evaluate(w, d, grid)?.cal_t)
}

pub fn eval_cal_z(w: &WeightMatrix, d: &TruncationDraw, grid: &GridSpec) -> Result<ProcessSample> {
    Ok(evaluate(w, d, grid)?.cal_z)
}

/// `(𝒲, F, G)`; these depend only on the selectors.
pub fn eval_cal_w_f_g(d: &TruncationDraw, grid: &GridSpec) -> (ProcessSample, ProcessSample, ProcessSample) {
    let n = d.n();
    let inv_sqrt_n = 1.0 / (n as f64).sqrt();
    let emp = |x: &[f64], p: f64| {
        let k = x.iter().filter(|&&v| v <= p).count();
        (k as f64 - n as f64 * p) * inv_sqrt_n
    };
    let f: Vec<f64> = grid.t_points().iter().map(|&t| emp(d.c(), t)).collect();
    let g: Vec<f64> = grid.s_points().iter().map(|&s| emp(d.r(), s)).collect();
    let nt = f.len();
    let w = grid
        .points()
        .enumerate()
        .map(|(k, (s, t))| s * f[k % nt] + t * g[k / nt])
        .collect();
    let sample = |kind, values| ProcessSample {
        kind,
        grid: grid.clone(),
        values,
    };
    (
        sample(ProcessKind::CalW, w),
        sample(ProcessKind::F, f),
        sample(ProcessKind::G, g),
    )
}

/// `max |(𝒯 - nst) - 𝒵 - √n 𝒲|` over the grid.
pub fn check_anova_identity(w: &WeightMatrix, d: &TruncationDraw, grid: &GridSpec) -> Result<f64> {
    let p = evaluate(w, d, grid)?;
    let n = w.n() as f64;
    let sqrt_n = n.sqrt();
    Ok(grid
        .points()
        .enumerate()
        .map(|(k, (s, t))| {
            ((p.cal_t.values[k] - n * s * t) - p.cal_z.values[k] - sqrt_n * p.cal_w.values[k]).abs()
        })
        .fold(0.0, f64::max))
}

/// `𝒵 = Ξ₁ - Ξ₂` with `Ξ₁ = 𝒯 + nst` and `Ξ₂ = s Σ_j 1{C_j≤t} + t Σ_i 1{R_i≤s}`,
/// both coordinate-wise non-decreasing.
pub fn monotone_decomposition(
    w: &WeightMatrix,
    d: &TruncationDraw,
    grid: &GridSpec,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let p = evaluate(w, d, grid)?;
    let n = w.n() as f64;
    let sqrt_n = n.sqrt();
    let nt = grid.t_points().len();
    let mut xi1 = Vec::with_capacity(grid.len());
    let mut xi2 = Vec::with_capacity(grid.len());
    for (k, (s, t)) in grid.points().enumerate() {
        xi1.push(p.cal_t.values[k] + n * s * t);
        let rows = p.g.values[k / nt] * sqrt_n + n * s;
        let cols = p.f.values[k % nt] * sqrt_n + n * t;
        xi2.push(s * cols.round() + t * rows.round());
    }
    Ok((xi1, xi2))
}

/// Whether row-major `values` on an `ns x nt` grid is non-decreasing along
/// both axes, allowing `tol` of rounding.
pub fn is_coordinatewise_nondecreasing(values: &[f64], nt: usize, tol: f64) -> bool {
    let ns = values.len() / nt;
    (0..ns).all(|a| {
        (0..nt).all(|b| {
            let v = values[a * nt + b];
            (b + 1 == nt || values[a * nt + b + 1] >= v - tol)
                && (a + 1 == ns || values[(a + 1) * nt + b] >= v - tol)
        })
    })
}

/// `Σ_{i≤⌊ns⌋} (w_i1 - 1/n)` for the first column.
pub fn eval_b0det(w: &WeightMatrix, grid: &GridSpec) -> ProcessSample {
    let n = w.n();
    let inv = 1.0 / n as f64;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut run = 0.0;
    for i in 0..n {
        run += w.get(i, 0) - inv;
        prefix.push(run);
    }
    ProcessSample {
        kind: ProcessKind::B0det,
        grid: grid.clone(),
        values: grid.s_points().iter().map(|&s| prefix[floor_index(n, s)]).collect(),
    }
}

/// `Σ_i w_i1 (1{R_i≤s} - s)` for the first column.
pub fn eval_cal_b0(w: &WeightMatrix, r: &[f64], grid: &GridSpec) -> Result<ProcessSample> {
    let n = w.n();
    if r.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: r.len(),
        });
    }
    let col = w.column(0);
    let values = grid
        .s_points()
        .iter()
        .map(|&s| {
            col.iter()
                .zip(r)
                .map(|(x, &ri)| x * (f64::from(u8::from(ri <= s)) - s))
                .sum()
        })
        .collect();
    Ok(ProcessSample {
        kind: ProcessKind::CalB0,
        grid: grid.clone(),
        values,
    })
}

/// Evaluates one named process.
pub fn eval_kind(
    kind: ProcessKind,
    w: &WeightMatrix,
    d: &TruncationDraw,
    grid: &GridSpec,
) -> Result<ProcessSample> {
    match kind {
        ProcessKind::T => Ok(eval_t(w, grid)),
        ProcessKind::B0det => Ok(eval_b0det(w, grid)),
        ProcessKind::CalB0 => eval_cal_b0(w, d.r(), grid),
        _ => {
            let p = evaluate(w, d, grid)?;
            Ok(match kind {
                ProcessKind::CalT => p.cal_t,
                ProcessKind::CalZ => p.cal_z,
                ProcessKind::CalW => p.cal_w,
                ProcessKind::F => p.f,
                _ => p.g,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{dft_matrix, sample_permutation, sample_weights, weight_matrix, EnsembleKind};
    use crate::rng::RngStream;

    fn setup(kind: EnsembleKind, n: usize, seed: u64) -> (WeightMatrix, TruncationDraw) {
        let mut rng = RngStream::new(seed, 0).rng();
        let w = sample_weights(kind, n, &mut rng).unwrap();
        let d = TruncationDraw::sample(n, &mut rng);
        (w, d)
    }

    /// The bilinear form written out directly.
    fn brute_z(w: &WeightMatrix, d: &TruncationDraw, s: f64, t: f64) -> f64 {
        let n = w.n();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let a = f64::from(u8::from(d.r()[i] <= s)) - s;
                let b = f64::from(u8::from(d.c()[j] <= t)) - t;
                acc += w.get(i, j) * a * b;
            }
        }
        acc
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(vec![0.2, 0.1], vec![0.5]).is_err());
        assert!(GridSpec::new(vec![0.2, 0.2], vec![0.5]).is_err());
        assert!(GridSpec::new(vec![0.2], vec![1.5]).is_err());
        assert!(GridSpec::new(vec![], vec![0.5]).is_err());
        assert!(GridSpec::new(vec![0.0, 1.0], vec![0.0, 1.0]).is_ok());
    }

    #[test]
    fn floor_index_handles_decimal_points() {
        assert_eq!(floor_index(10, 0.3), 3);
        assert_eq!(floor_index(10, 0.7), 7);
        assert_eq!(floor_index(32, 0.5), 16);
        assert_eq!(floor_index(7, 1.0), 7);
        assert_eq!(floor_index(7, 0.0), 0);
    }

    #[test]
    fn total_mass_is_n() {
        let (w, d) = setup(EnsembleKind::HaarUnitary, 12, 1);
        let g = GridSpec::single(1.0, 1.0).unwrap();
        assert!((eval_t(&w, &g).values[0] - 12.0).abs() < 1e-9);
        assert!((eval_cal_t(&w, &d, &g).unwrap().values[0] - 12.0).abs() < 1e-9);
    }

    #[test]
    fn deterministic_truncation_of_permutation_counts_fixed_block() {
        let mut rng = RngStream::new(2, 0).rng();
        let p = sample_permutation(10, &mut rng).unwrap();
        let perm = p.permutation().unwrap();
        let w = weight_matrix(&p);
        let grid = GridSpec::default_grid();
        let t = eval_t(&w, &grid);
        for (k, (s, tt)) in grid.points().enumerate() {
            let (ks, kt) = (floor_index(10, s), floor_index(10, tt));
            let expect = (0..ks).filter(|&i| perm[i] < kt).count() as f64;
            assert_eq!(t.values[k], expect);
        }
    }

    #[test]
    fn factored_z_matches_bilinear_form() {
        for kind in EnsembleKind::ALL {
            let (w, d) = setup(kind, 9, 3);
            let grid = GridSpec::default_grid();
            let z = eval_cal_z(&w, &d, &grid).unwrap();
            for (k, (s, t)) in grid.points().enumerate() {
                assert!((z.values[k] - brute_z(&w, &d, s, t)).abs() < 1e-12, "{kind} {s} {t}");
            }
        }
    }

    #[test]
    fn z_vanishes_on_the_boundary() {
        let (w, d) = setup(EnsembleKind::HaarOrthogonal, 15, 4);
        let grid = GridSpec::default_grid();
        let z = eval_cal_z(&w, &d, &grid).unwrap();
        for (k, (s, t)) in grid.points().enumerate() {
            if s == 0.0 || t == 0.0 || s == 1.0 || t == 1.0 {
                assert_eq!(z.values[k], 0.0, "({s}, {t})");
            }
        }
        let t = eval_cal_t(&w, &d, &grid).unwrap();
        for (k, (s, tt)) in grid.points().enumerate() {
            if s == 0.0 || tt == 0.0 {
                assert_eq!(t.values[k], 0.0);
            }
        }
    }

    #[test]
    fn dft_z_is_product_of_empirical_processes() {
        let n = 11;
        let w = weight_matrix(&dft_matrix(n).unwrap());
        let d = TruncationDraw::sample(n, &mut RngStream::new(5, 0).rng());
        let grid = GridSpec::default_grid();
        let p = evaluate(&w, &d, &grid).unwrap();
        let nt = grid.t_points().len();
        for k in 0..grid.len() {
            let prod = p.f.values[k % nt] * p.g.values[k / nt];
            assert!((p.cal_z.values[k] - prod).abs() < 1e-12);
        }
    }

    #[test]
    fn w_f_g_basics() {
        let d = TruncationDraw::sample(16, &mut RngStream::new(6, 0).rng());
        let grid = GridSpec::default_grid();
        let (w, f, g) = eval_cal_w_f_g(&d, &grid);
        assert_eq!(f.values[f.values.len() - 1], 0.0);
        assert_eq!(g.values[g.values.len() - 1], 0.0);
        assert_eq!(w.values[0], 0.0);
        let full = evaluate(&WeightMatrix::flat(16), &d, &grid).unwrap();
        assert_eq!(full.f.values, f.values);
        assert_eq!(full.g.values, g.values);
        assert_eq!(full.cal_w.values, w.values);
    }

    #[test]
    fn anova_identity_holds() {
        for kind in EnsembleKind::ALL {
            for n in [8, 16, 10] {
                let (w, d) = setup(kind, n, 7);
                let r = check_anova_identity(&w, &d, &GridSpec::default_grid()).unwrap();
                let tol = if kind.is_haar() { 1e-8 * n as f64 } else { 1e-10 };
                assert!(r <= tol, "{kind} n={n} residual {r}");
            }
        }
    }

    #[test]
    fn anova_detects_a_broken_weight_matrix() {
        let n = 6;
        let mut rows = vec![vec![1.0 / n as f64; n]; n];
        rows[0][0] += 0.3;
        let w = WeightMatrix::from_rows(rows).unwrap();
        let d = TruncationDraw::new(vec![0.1; n], vec![0.1; n]).unwrap();
        let grid = GridSpec::square(vec![0.2, 0.5, 0.9]).unwrap();
        assert!(check_anova_identity(&w, &d, &grid).unwrap() > 0.01);
    }

    #[test]
    fn monotone_parts() {
        let (w, d) = setup(EnsembleKind::HaarUnitary, 20, 9);
        let pts: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
        let grid = GridSpec::square(pts).unwrap();
        let (xi1, xi2) = monotone_decomposition(&w, &d, &grid).unwrap();
        let nt = grid.t_points().len();
        assert!(is_coordinatewise_nondecreasing(&xi1, nt, 1e-12));
        assert!(is_coordinatewise_nondecreasing(&xi2, nt, 1e-12));
        let z = eval_cal_z(&w, &d, &grid).unwrap();
        for k in 0..grid.len() {
            assert!((xi1[k] - xi2[k] - z.values[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let w = WeightMatrix::flat(4);
        let d = TruncationDraw::sample(5, &mut RngStream::new(1, 1).rng());
        assert!(matches!(
            evaluate(&w, &d, &GridSpec::default_grid()),
            Err(Error::DimensionMismatch { expected: 4, actual: 5 })
        ));
        assert!(TruncationDraw::new(vec![0.5], vec![0.5, 0.5]).is_err());
        assert!(TruncationDraw::new(vec![1.5], vec![0.5]).is_err());
    }

    #[test]
    fn first_column_paths() {
        let (w, d) = setup(EnsembleKind::HaarUnitary, 16, 10);
        let grid = GridSpec::default_grid();
        let b = eval_b0det(&w, &grid);
        assert_eq!(b.values[0], 0.0);
        assert!(b.values.last().unwrap().abs() < 1e-12);
        let cb = eval_cal_b0(&w, d.r(), &grid).unwrap();
        assert_eq!(cb.values[0], 0.0);
        assert!(cb.values.last().unwrap().abs() < 1e-12);
    }

    #[test]
    fn csv_has_one_row_per_point() {
        let (w, d) = setup(EnsembleKind::Dft, 5, 11);
        let grid = GridSpec::default_grid();
        let z = eval_cal_z(&w, &d, &grid).unwrap();
        let mut buf = Vec::new();
        z.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + grid.len());
        assert!(text.starts_with("s,t,calZ\n"));
        let json = serde_json::to_string(&z).unwrap();
        let back: ProcessSample = serde_json::from_str(&json).unwrap();
        assert_eq!(back, z);
    }
}

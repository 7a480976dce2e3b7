//! Exchangeability-averaged entry statistics of one `n x n` row-major matrix.
//!
//! Haar laws are invariant under row and column permutations, so a moment of
//! a fixed entry pattern can be estimated by averaging the pattern over every
//! placement in one sample. The sums below do that in `O(n²)` or `O(n³)`.

fn row_sums(x: &[f64], n: usize) -> Vec<f64> {
    x.chunks_exact(n).map(|r| r.iter().sum()).collect()
}

fn col_sums(x: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n];
    for row in x.chunks_exact(n) {
        for (acc, v) in c.iter_mut().zip(row) {
            *acc += v;
        }
    }
    c
}

pub fn squares(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| v * v).collect()
}

/// Number of placements of a pattern on two distinct rows and two distinct columns.
pub fn placements(n: usize) -> f64 {
    let n = n as f64;
    n * n * (n - 1.0) * (n - 1.0)
}

/// `Σ x_ij y_kl` over `i ≠ k`, `j ≠ l`.
pub fn disjoint_pair_sum(x: &[f64], y: &[f64], n: usize) -> f64 {
    let (rx, ry) = (row_sums(x, n), row_sums(y, n));
    let (cx, cy) = (col_sums(x, n), col_sums(y, n));
    let tx: f64 = rx.iter().sum();
    let ty: f64 = ry.iter().sum();
    let rows: f64 = rx.iter().zip(&ry).map(|(a, b)| a * b).sum();
    let cols: f64 = cx.iter().zip(&cy).map(|(a, b)| a * b).sum();
    let same: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    tx * ty - rows - cols + same
}

/// `Σ x_ij x_il x_kj x_kl` over `i ≠ k`, `j ≠ l`.
pub fn rectangle_sum(x: &[f64], n: usize) -> f64 {
    let a = squares(x);
    let mut total = 0.0;
    for i in 0..n {
        let xi = &x[i * n..(i + 1) * n];
        let ai = &a[i * n..(i + 1) * n];
        for k in 0..n {
            if k == i {
                continue;
            }
            let xk = &x[k * n..(k + 1) * n];
            let ak = &a[k * n..(k + 1) * n];
            let g: f64 = xi.iter().zip(xk).map(|(p, q)| p * q).sum();
            let g2: f64 = ai.iter().zip(ak).map(|(p, q)| p * q).sum();
            total += g * g - g2;
        }
    }
    total
}

/// `Σ x_ij x_il x_kl` over `i ≠ k`, `j ≠ l`.
pub fn path_sum(x: &[f64], n: usize) -> f64 {
    let r = row_sums(x, n);
    let c = col_sums(x, n);
    let mut total = 0.0;
    for i in 0..n {
        for l in 0..n {
            let v = x[i * n + l];
            total += v * (r[i] - v) * (c[l] - v);
        }
    }
    total
}

/// `Σ_i Σ_{j≠l} a_ij a_il`: pairs within a row.
pub fn row_pair_sum(a: &[f64], n: usize) -> f64 {
    a.chunks_exact(n)
        .map(|row| {
            let s: f64 = row.iter().sum();
            s * s - row.iter().map(|v| v * v).sum::<f64>()
        })
        .sum()
}

/// `Σ_j Σ_{i≠k} a_ij a_kj`: pairs within a column.
pub fn col_pair_sum(a: &[f64], n: usize) -> f64 {
    let c = col_sums(a, n);
    let sq: f64 = a.iter().map(|v| v * v).sum();
    c.iter().map(|s| s * s).sum::<f64>() - sq
}

/// `x xᵀ`, row-major.
pub fn gram(x: &[f64], n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        let xi = &x[i * n..(i + 1) * n];
        for k in i..n {
            let xk = &x[k * n..(k + 1) * n];
            let v: f64 = xi.iter().zip(xk).map(|(p, q)| p * q).sum();
            h[i * n + k] = v;
            h[k * n + i] = v;
        }
    }
    h
}

/// Position averages of `H11²`, `H11 H22` and `H12²` for a symmetric `h`.
pub fn h_moments(h: &[f64], n: usize) -> (f64, f64, f64) {
    let nf = n as f64;
    let diag: Vec<f64> = (0..n).map(|i| h[i * n + i]).collect();
    let d2: f64 = diag.iter().map(|v| v * v).sum();
    let tr: f64 = diag.iter().sum();
    let all2: f64 = h.iter().map(|v| v * v).sum();
    let pairs = nf * (nf - 1.0);
    (d2 / nf, (tr * tr - d2) / pairs, (all2 - d2) / pairs)
}

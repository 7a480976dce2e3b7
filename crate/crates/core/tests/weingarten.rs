//! Exact entry moments from Weingarten calculus, computed by inverting the
//! Gram matrix of pairings (orthogonal) or permutations (unitary) in exact
//! rational arithmetic, then compared with the library's closed forms.

use haartrunc::moments::{m2k_orthogonal, m2k_unitary, orthogonal_i_exact, orthogonal_i_printed, IPattern};
use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Zero};

type Q = BigRational;

fn q(v: i64) -> Q {
    Q::from_integer(BigInt::from(v))
}

fn pow(n: i64, e: usize) -> Q {
    (0..e).fold(Q::one(), |acc, _| acc * q(n))
}

/// Solves `g x = b` by Gaussian elimination over the rationals.
fn solve(mut g: Vec<Vec<Q>>, mut b: Vec<Q>) -> Vec<Q> {
    let m = b.len();
    for col in 0..m {
        let piv = (col..m).find(|&r| !g[r][col].is_zero()).expect("Gram matrix is invertible");
        g.swap(col, piv);
        b.swap(col, piv);
        let inv = Q::one() / g[col][col].clone();
        let pivot_row = g[col].clone();
        let pivot_b = b[col].clone();
        for (r, (row, br)) in g.iter_mut().zip(b.iter_mut()).enumerate() {
            if r == col || row[col].is_zero() {
                continue;
            }
            let f = row[col].clone() * inv.clone();
            for (x, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= f.clone() * p.clone();
            }
            *br -= f * pivot_b.clone();
        }
    }
    (0..m).map(|i| b[i].clone() / g[i][i].clone()).collect()
}

/// All perfect matchings of `0..2k`, each as a partner array.
fn pairings(len: usize) -> Vec<Vec<usize>> {
    fn go(free: &mut Vec<usize>, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if free.is_empty() {
            out.push(cur.clone());
            return;
        }
        let a = free.remove(0);
        for idx in 0..free.len() {
            let b = free.remove(idx);
            cur[a] = b;
            cur[b] = a;
            go(free, cur, out);
            free.insert(idx, b);
        }
        free.insert(0, a);
    }
    let mut out = Vec::new();
    go(&mut (0..len).collect(), &mut vec![0; len], &mut out);
    out
}

/// Number of cycles in the union of two matchings.
fn loops(p: &[usize], r: &[usize]) -> usize {
    let mut seen = vec![false; p.len()];
    let mut count = 0;
    for start in 0..p.len() {
        if seen[start] {
            continue;
        }
        count += 1;
        let mut x = start;
        loop {
            seen[x] = true;
            let y = p[x];
            seen[y] = true;
            x = r[y];
            if x == start {
                break;
            }
        }
    }
    count
}

fn respects(p: &[usize], idx: &[usize]) -> bool {
    (0..p.len()).all(|a| idx[a] == idx[p[a]])
}

/// `E Π O_{i_a j_a}` for Haar orthogonal `O` of order `n`.
fn orthogonal_moment(n: i64, entries: &[(usize, usize)]) -> Q {
    let ps = pairings(entries.len());
    let rows: Vec<usize> = entries.iter().map(|e| e.0).collect();
    let cols: Vec<usize> = entries.iter().map(|e| e.1).collect();
    let gram: Vec<Vec<Q>> = ps
        .iter()
        .map(|p| ps.iter().map(|r| pow(n, loops(p, r))).collect())
        .collect();
    let dj: Vec<Q> = ps.iter().map(|p| if respects(p, &cols) { Q::one() } else { Q::zero() }).collect();
    let x = solve(gram, dj);
    ps.iter()
        .zip(x)
        .filter(|(p, _)| respects(p, &rows))
        .fold(Q::zero(), |acc, (_, v)| acc + v)
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..k {
            let mut v = p.clone();
            v.insert(pos, k - 1);
            out.push(v);
        }
    }
    out
}

fn cycles(p: &[usize]) -> usize {
    let mut seen = vec![false; p.len()];
    let mut count = 0;
    for s in 0..p.len() {
        if !seen[s] {
            count += 1;
            let mut x = s;
            while !seen[x] {
                seen[x] = true;
                x = p[x];
            }
        }
    }
    count
}

/// `E |U11|^{2k}` for Haar unitary `U` of order `n`.
fn unitary_abs_moment(n: i64, k: usize) -> Q {
    let perms = permutations(k);
    // σ⁻¹τ, as a permutation
    let compose = |s: &[usize], t: &[usize]| -> Vec<usize> {
        let mut inv = vec![0; s.len()];
        for (i, &v) in s.iter().enumerate() {
            inv[v] = i;
        }
        t.iter().map(|&v| inv[v]).collect()
    };
    let gram: Vec<Vec<Q>> = perms
        .iter()
        .map(|s| perms.iter().map(|t| pow(n, cycles(&compose(s, t)))).collect())
        .collect();
    // every index is 1, so every pair of permutations contributes
    let x = solve(gram, vec![Q::one(); perms.len()]);
    x.into_iter().fold(Q::zero(), |acc, v| acc + v)
}

fn pattern_entries(p: IPattern) -> Vec<(usize, usize)> {
    let cells = [(0, 0), (0, 1), (1, 0), (1, 1)];
    p.exponents()
        .iter()
        .zip(cells)
        .flat_map(|(&e, cell)| std::iter::repeat_n(cell, e as usize))
        .collect()
}

#[test]
fn orthogonal_patterns_match_weingarten() {
    for n in 4..=8i64 {
        for p in IPattern::ALL {
            let oracle = orthogonal_moment(n, &pattern_entries(p));
            assert_eq!(orthogonal_i_exact(p, n as u64).unwrap(), oracle, "{p} at n={n}");
        }
    }
}

#[test]
fn printed_forms_differ_where_expected() {
    let n = 6;
    for p in IPattern::ALL {
        let oracle = orthogonal_moment(n, &pattern_entries(p));
        let printed = orthogonal_i_printed(p, n as u64).unwrap();
        let differs = matches!(p, IPattern::I2222 | IPattern::I2202);
        assert_eq!(printed != oracle, differs, "{p}");
    }
}

#[test]
fn single_entry_moments_match_weingarten() {
    for n in 3..=7i64 {
        for k in 1..=3usize {
            let entries = vec![(0, 0); 2 * k];
            assert_eq!(m2k_orthogonal(n as u64, k as u64).unwrap(), orthogonal_moment(n, &entries));
        }
        // the permutation Gram matrix is singular once k > n
        for k in 1..=4usize.min(n as usize) {
            assert_eq!(m2k_unitary(n as u64, k as u64).unwrap(), unitary_abs_moment(n, k));
        }
    }
}

#[test]
fn small_gram_sanity() {
    assert_eq!(pairings(4).len(), 3);
    assert_eq!(pairings(8).len(), 105);
    // E O11² = 1/n
    assert_eq!(orthogonal_moment(5, &[(0, 0), (0, 0)]), Q::new(BigInt::from(1), BigInt::from(5)));
    // E O11 O22 = 0
    assert!(orthogonal_moment(5, &[(0, 0), (1, 1)]).is_zero());
}

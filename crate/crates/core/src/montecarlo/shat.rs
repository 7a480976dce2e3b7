//! Statistics of the bilinear form `Σ X_i w_ij Y_j` and of `Ŝ = Σ_j (Σ_i V_ij X_i)²`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::engine::Engine;
use super::estimators::{
    col_pair_sum, disjoint_pair_sum, gram, h_moments, placements, rectangle_sum, row_pair_sum, squares,
};
use super::report::Check;
use super::stats::{EstimateWithCI, MeanVarVec};
use crate::ensembles::{sample_weights, EnsembleKind};
use crate::error::{Error, Result};
use crate::moments::{lemma53_limits, scaled_var_v, to_f64};

fn normals<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// `Ŝ` for centered weights `v` (row-major) and a vector `x`.
pub fn shat(v: &[f64], n: usize, x: &[f64]) -> f64 {
    let mut y = vec![0.0; n];
    for (row, xi) in v.chunks_exact(n).zip(x) {
        for (acc, vij) in y.iter_mut().zip(row) {
            *acc += vij * xi;
        }
    }
    y.iter().map(|v| v * v).sum()
}

/// `E Ŝ = n² E V_11²` for every ensemble.
pub fn expected_shat(kind: EnsembleKind, n: usize) -> Result<f64> {
    match kind {
        EnsembleKind::HaarUnitary | EnsembleKind::HaarOrthogonal => Ok(to_f64(&scaled_var_v(n as u64, kind)?)),
        EnsembleKind::Dft => Ok(0.0),
        EnsembleKind::Permutation => Ok(n as f64 - 1.0),
    }
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        Err(Error::invalid("n must be at least 2"))
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShatResult {
    pub ensemble: EnsembleKind,
    pub n: usize,
    pub mean: EstimateWithCI,
    pub sample_variance: f64,
    pub oracle: f64,
}

impl ShatResult {
    pub fn check(&self, z: f64) -> Check {
        Check::against("mean Shat", self.mean, self.oracle, z)
            .with_ensemble(self.ensemble)
            .with_n(self.n)
    }
}

pub fn shat_experiment(engine: &Engine, seed: u64, kind: EnsembleKind, n: usize, replicas: u64) -> Result<ShatResult> {
    check_n(n)?;
    let acc = engine.mean_var(seed, replicas, |rng, _| {
        let w = sample_weights(kind, n, rng)?;
        let x = normals(n, rng);
        Ok(shat(&w.centered_matrix(), n, &x))
    })?;
    Ok(ShatResult {
        ensemble: kind,
        n,
        mean: acc.estimate(),
        sample_variance: acc.variance(),
        oracle: expected_shat(kind, n)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharFnRow {
    pub theta: f64,
    /// `E cos θΣ`.
    pub lhs: EstimateWithCI,
    /// `E exp(-θ²/2 (n⁻¹(ΣX)² + Ŝ))`.
    pub rhs: EstimateWithCI,
    /// Paired difference of the two, replica by replica.
    pub difference: EstimateWithCI,
    /// `E sin θΣ`.
    pub imaginary: EstimateWithCI,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharFnResult {
    pub ensemble: EnsembleKind,
    pub n: usize,
    pub rows: Vec<CharFnRow>,
    pub max_discrepancy: f64,
}

impl CharFnResult {
    pub fn checks(&self, z: f64) -> Vec<Check> {
        self.rows
            .iter()
            .flat_map(|r| {
                [
                    Check::against(format!("charfn real theta={}", r.theta), r.difference, 0.0, z),
                    Check::against(format!("charfn imag theta={}", r.theta), r.imaginary, 0.0, z),
                ]
            })
            .map(|c| c.with_ensemble(self.ensemble).with_n(self.n))
            .collect()
    }
}

pub fn char_function_identity(
    engine: &Engine,
    seed: u64,
    kind: EnsembleKind,
    n: usize,
    replicas: u64,
    thetas: &[f64],
) -> Result<CharFnResult> {
    check_n(n)?;
    if thetas.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid("every theta must be finite"));
    }
    let acc = engine.mean_var_vec(seed, replicas, 4 * thetas.len(), |rng, _, buf| {
        let w = sample_weights(kind, n, rng)?;
        let x = normals(n, rng);
        let y = normals(n, rng);
        let sigma: f64 = w
            .as_slice()
            .chunks_exact(n)
            .zip(&x)
            .map(|(row, xi)| xi * row.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>())
            .sum();
        let sx: f64 = x.iter().sum();
        let q = sx * sx / n as f64 + shat(&w.centered_matrix(), n, &x);
        for &theta in thetas {
            let (c, e) = ((theta * sigma).cos(), (-0.5 * theta * theta * q).exp());
            buf.extend([c, e, c - e, (theta * sigma).sin()]);
        }
        Ok(())
    })?;
    let rows: Vec<CharFnRow> = thetas
        .iter()
        .enumerate()
        .map(|(k, &theta)| CharFnRow {
            theta,
            lhs: acc.get(4 * k).estimate(),
            rhs: acc.get(4 * k + 1).estimate(),
            difference: acc.get(4 * k + 2).estimate(),
            imaginary: acc.get(4 * k + 3).estimate(),
        })
        .collect();
    let max_discrepancy = rows
        .iter()
        .map(|r| r.difference.mean.abs().max(r.imaginary.mean.abs()))
        .fold(0.0, f64::max);
    Ok(CharFnResult {
        ensemble: kind,
        n,
        rows,
        max_discrepancy,
    })
}

/// One identity between a moment of `H = VVᵀ` and moments of `V`, each
/// side estimated on its own half of the replicas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityRow {
    pub name: String,
    pub lhs: EstimateWithCI,
    pub rhs: EstimateWithCI,
}

impl IdentityRow {
    pub fn residual(&self) -> EstimateWithCI {
        self.lhs.minus(&self.rhs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HIdentityResult {
    pub ensemble: EnsembleKind,
    pub n: usize,
    pub rows: Vec<IdentityRow>,
}

impl HIdentityResult {
    pub fn checks(&self, z: f64) -> Vec<Check> {
        self.rows
            .iter()
            .map(|r| {
                Check::against(r.name.clone(), r.residual(), 0.0, z)
                    .with_ensemble(self.ensemble)
                    .with_n(self.n)
            })
            .collect()
    }
}

/// Even replicas give `E H11²`, `E H11 H22`, `E H12²` and `E Ŝ²` directly;
/// odd replicas give the right-hand sides.
pub fn h_identity_checks(
    engine: &Engine,
    seed: u64,
    kind: EnsembleKind,
    n: usize,
    replicas: u64,
) -> Result<HIdentityResult> {
    check_n(n)?;
    if replicas < 4 {
        return Err(Error::invalid("need at least 4 replicas"));
    }
    let nf = n as f64;
    let pairs = nf * (nf - 1.0);
    let (lhs, rhs) = engine.fold(
        seed,
        replicas,
        || (MeanVarVec::new(4), MeanVarVec::new(4)),
        |rng, r, (lhs, rhs)| {
            let w = sample_weights(kind, n, rng)?;
            let v = w.centered_matrix();
            if r % 2 == 0 {
                let (h11, h11h22, h12) = h_moments(&gram(&v, n), n);
                let s = shat(&v, n, &normals(n, rng));
                lhs.push(&[h11, h11h22, h12, s * s]);
            } else {
                let a = squares(&v);
                let v4 = a.iter().map(|x| x * x).sum::<f64>() / (nf * nf);
                let same_row = row_pair_sum(&a, n) / (nf * pairs);
                let same_col = col_pair_sum(&a, n) / (nf * pairs);
                let diag = disjoint_pair_sum(&a, &a, n) / placements(n);
                let rect = rectangle_sum(&v, n) / placements(n);
                let (h11, h11h22, h12) = h_moments(&gram(&v, n), n);
                rhs.push(&[
                    nf * v4 + pairs * same_row,
                    nf * same_col + pairs * diag,
                    nf * same_col + pairs * rect,
                    pairs * h11h22 + 2.0 * pairs * h12 + 3.0 * nf * h11,
                ]);
            }
            Ok(())
        },
    )?;
    let names = ["E H11^2", "E H11 H22", "E H12^2", "E Shat^2"];
    Ok(HIdentityResult {
        ensemble: kind,
        n,
        rows: names
            .iter()
            .enumerate()
            .map(|(k, name)| IdentityRow {
                name: name.to_string(),
                lhs: lhs.get(k).estimate(),
                rhs: rhs.get(k).estimate(),
            })
            .collect(),
    })
}

/// `n²(n-1)² E V11² V22²` and `n²(n-1)² E V11 V12 V21 V22` with their limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VFourthResult {
    pub ensemble: EnsembleKind,
    pub n: usize,
    pub diagonal: EstimateWithCI,
    pub rectangle: EstimateWithCI,
    pub limits: (f64, f64),
}

impl VFourthResult {
    /// The `z`-SE interval of the diagonal term must meet `[(1-rel) L, (1+rel) L]`.
    pub fn checks(&self, z: f64, rel: f64) -> Vec<Check> {
        let l = self.limits.0;
        let (lo, hi) = (
            self.diagonal.mean - z * self.diagonal.std_error,
            self.diagonal.mean + z * self.diagonal.std_error,
        );
        let pass = hi >= (1.0 - rel) * l && lo <= (1.0 + rel) * l;
        let mut diag = Check::predicate(
            "n^2(n-1)^2 E V11^2 V22^2",
            self.diagonal.mean,
            format!("{z} SE interval meets [{}, {}]", (1.0 - rel) * l, (1.0 + rel) * l),
            pass,
        );
        diag.std_error = Some(self.diagonal.std_error);
        diag.oracle = Some(l);
        diag.z_score = Some(self.diagonal.z_score(l));
        vec![
            diag.with_ensemble(self.ensemble).with_n(self.n),
            Check::info("n^2(n-1)^2 E V11 V12 V21 V22", self.rectangle, Some(self.limits.1))
                .with_ensemble(self.ensemble)
                .with_n(self.n),
        ]
    }
}

pub fn v_fourth_moments(
    engine: &Engine,
    seed: u64,
    kind: EnsembleKind,
    n: usize,
    replicas: u64,
) -> Result<VFourthResult> {
    check_n(n)?;
    let (l1, l2) = lemma53_limits(kind)?;
    let acc = engine.mean_var_vec(seed, replicas, 2, |rng, _, buf| {
        let w = sample_weights(kind, n, rng)?;
        let v = w.centered_matrix();
        let a = squares(&v);
        buf.push(disjoint_pair_sum(&a, &a, n));
        buf.push(rectangle_sum(&v, n));
        Ok(())
    })?;
    Ok(VFourthResult {
        ensemble: kind,
        n,
        diagonal: acc.get(0).estimate(),
        rectangle: acc.get(1).estimate(),
        limits: (l1 as f64, l2 as f64),
    })
}

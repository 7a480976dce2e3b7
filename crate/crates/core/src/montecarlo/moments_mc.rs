//! Monte Carlo estimates of the entry moments tabulated in [`crate::moments`].

use serde::{Deserialize, Serialize};

use super::engine::Engine;
use super::estimators::{disjoint_pair_sum, path_sum, placements, rectangle_sum, squares};
use super::report::Check;
use super::stats::EstimateWithCI;
use crate::ensembles::{sample_weights, EnsembleKind};
use crate::error::{Error, Result};
use crate::moments::{moment_table, MomentReport, MomentSource};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub ensemble: EnsembleKind,
    pub oracle: MomentReport,
    pub estimate: EstimateWithCI,
}

impl MomentEstimate {
    /// Closed forms are asserted at `z` SE; leading-order values are reported only.
    pub fn check(&self, z: f64) -> Check {
        let label = self.oracle.name.clone();
        let c = match self.oracle.source {
            MomentSource::ClosedForm => Check::against(label, self.estimate, self.oracle.value, z),
            MomentSource::LeadingOrder => Check::info(label, self.estimate, Some(self.oracle.value)),
        };
        c.with_ensemble(self.ensemble).with_n(self.oracle.n as usize)
    }
}

/// One sample's estimates, in the row order of [`moment_table`].
pub fn moment_statistics(w: &[f64], n: usize, out: &mut Vec<f64>) {
    let nf = n as f64;
    let m = w.len() as f64;
    let mut p = [0.0f64; 4];
    let mut var = 0.0;
    for &x in w {
        let x2 = x * x;
        p[0] += x;
        p[1] += x2;
        p[2] += x2 * x;
        p[3] += x2 * x2;
        let v = x - 1.0 / nf;
        var += v * v;
    }
    out.extend(p.iter().map(|s| s / m));
    out.push(nf * nf * var / m);
    let a = squares(w);
    let denom = placements(n);
    out.push(disjoint_pair_sum(&a, &a, n) / denom);
    out.push(rectangle_sum(w, n) / denom);
    out.push(disjoint_pair_sum(w, &a, n) / denom);
    out.push(path_sum(w, n) / denom);
}

/// Estimates every tabulated moment of a Haar ensemble at order `n ≥ 2`.
pub fn estimate_moments(
    engine: &Engine,
    seed: u64,
    kind: EnsembleKind,
    n: usize,
    replicas: u64,
) -> Result<Vec<MomentEstimate>> {
    if n < 2 {
        return Err(Error::invalid("moment estimates need n ≥ 2"));
    }
    let table = moment_table(kind, n as u64)?;
    let acc = engine.mean_var_vec(seed, replicas, table.len(), |rng, _, buf| {
        let w = sample_weights(kind, n, rng)?;
        moment_statistics(w.as_slice(), n, buf);
        Ok(())
    })?;
    Ok(table
        .into_iter()
        .enumerate()
        .map(|(k, oracle)| MomentEstimate {
            ensemble: kind,
            oracle,
            estimate: acc.get(k).estimate(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::MixedItem;

    #[test]
    fn statistic_layout_matches_table() {
        let n = 3;
        let table = moment_table(EnsembleKind::HaarOrthogonal, n as u64).unwrap();
        let mut buf = Vec::new();
        moment_statistics(&[1.0 / 3.0; 9], n, &mut buf);
        assert_eq!(buf.len(), table.len());
        // flat matrix: every power mean is n^{-k}, the variance vanishes
        for (k, v) in buf[..4].iter().enumerate() {
            assert!((v - 3f64.powi(-(k as i32 + 1))).abs() < 1e-15);
        }
        assert!(buf[4].abs() < 1e-15);
        for (k, item) in MixedItem::ALL.iter().enumerate() {
            let deg: u32 = item.exponents().iter().sum::<u32>() / 2;
            assert!((buf[5 + k] - 3f64.powi(-(deg as i32))).abs() < 1e-14);
        }
    }

    #[test]
    fn permutation_matrix_statistics() {
        // identity: w_11 w_22 = 1 on the diagonal, w_12 = 0
        let n = 4;
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            w[i * n + i] = 1.0;
        }
        let mut buf = Vec::new();
        moment_statistics(&w, n, &mut buf);
        assert!((buf[0] - 0.25).abs() < 1e-15);
        // diag44 averages w_ij^2 w_kl^2 over i≠k, j≠l: n(n-1) of n²(n-1)² hits
        assert!((buf[5] - 1.0 / 12.0).abs() < 1e-15);
        assert_eq!(buf[6], 0.0);
        assert_eq!(buf[8], 0.0);
    }

    #[test]
    fn small_run_is_consistent() {
        let e = Engine::new(2).unwrap();
        let est = estimate_moments(&e, 3, EnsembleKind::HaarUnitary, 4, 4000).unwrap();
        for m in &est {
            assert!(m.check(5.0).pass, "{m:?}");
        }
        assert!(estimate_moments(&e, 3, EnsembleKind::HaarUnitary, 1, 10).is_err());
    }
}

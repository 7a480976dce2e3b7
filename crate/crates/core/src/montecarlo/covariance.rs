//! Second moments of `𝒵`, `𝒯` and `𝒲` at pairs of grid points.

use serde::{Deserialize, Serialize};

use super::engine::Engine;
use super::report::Check;
use super::stats::EstimateWithCI;
use super::{sub_seed, ExperimentConfig};
use crate::ensembles::{sample_weights, EnsembleKind};
use crate::error::Result;
use crate::limits::{finite_n_cal_t_cov, finite_n_z_cov};
use crate::processes::{evaluate, GridSpec, TruncationDraw};

pub type Point = (f64, f64);
pub type PointPair = (Point, Point);

/// Diagonal, same-row, same-column, crossing and generic pairs.
pub const STANDARD_PAIRS: [PointPair; 6] = [
    ((0.5, 0.5), (0.5, 0.5)),
    ((0.3, 0.7), (0.3, 0.7)),
    ((0.2, 0.4), (0.6, 0.8)),
    ((0.25, 0.5), (0.75, 0.5)),
    ((0.1, 0.9), (0.9, 0.1)),
    ((0.4, 0.3), (0.4, 0.6)),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceRow {
    pub ensemble: EnsembleKind,
    pub n: usize,
    pub p: Point,
    pub q: Point,
    /// `E 𝒵(p) 𝒵(q)`; the mean of `𝒵` is zero.
    pub z_cov: EstimateWithCI,
    pub z_oracle: f64,
    /// Covariance of `n^{-1/2}(𝒯 - nst)`.
    pub cal_t_cov: EstimateWithCI,
    pub cal_t_oracle: f64,
    /// `E 𝒵(p) 𝒲(q)` and `E 𝒵(q) 𝒲(p)`.
    pub cross: [EstimateWithCI; 2],
}

impl CovarianceRow {
    pub fn z_check(&self, z: f64) -> Check {
        self.tag(Check::against("cov Z", self.z_cov, self.z_oracle, z))
    }

    pub fn cal_t_check(&self, z: f64) -> Check {
        self.tag(Check::against("cov calT", self.cal_t_cov, self.cal_t_oracle, z))
    }

    pub fn cross_checks(&self, z: f64) -> [Check; 2] {
        [
            self.tag(Check::against("E Z(p)W(q)", self.cross[0], 0.0, z)),
            self.tag(Check::against("E Z(q)W(p)", self.cross[1], 0.0, z)),
        ]
    }

    fn tag(&self, c: Check) -> Check {
        c.with_ensemble(self.ensemble).with_n(self.n).at_pair(self.p, self.q)
    }
}

/// The smallest rectangular grid containing every point, and each point's
/// flat index in it.
fn grid_for(pairs: &[PointPair]) -> Result<(GridSpec, Vec<(usize, usize)>)> {
    let axis = |pick: fn(&Point) -> f64| {
        let mut v: Vec<f64> = pairs.iter().flat_map(|(p, q)| [pick(p), pick(q)]).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let (sv, tv) = (axis(|p| p.0), axis(|p| p.1));
    let nt = tv.len();
    let index = |p: &Point| {
        let a = sv.iter().position(|&s| s == p.0).expect("s on grid");
        let b = tv.iter().position(|&t| t == p.1).expect("t on grid");
        a * nt + b
    };
    let idx = pairs.iter().map(|(p, q)| (index(p), index(q))).collect();
    Ok((GridSpec::new(sv, tv)?, idx))
}

/// Runs all covariance estimates of one ensemble at one order.
pub fn covariance_rows(
    engine: &Engine,
    seed: u64,
    kind: EnsembleKind,
    n: usize,
    replicas: u64,
    pairs: &[PointPair],
) -> Result<Vec<CovarianceRow>> {
    let (grid, idx) = grid_for(pairs)?;
    let sqrt_n = (n as f64).sqrt();
    let points: Vec<Point> = grid.points().collect();
    let acc = engine.mean_var_vec(seed, replicas, 4 * pairs.len(), |rng, _, buf| {
        let w = sample_weights(kind, n, rng)?;
        let d = TruncationDraw::sample(n, rng);
        let pr = evaluate(&w, &d, &grid)?;
        let centered = |k: usize| {
            let (s, t) = points[k];
            (pr.cal_t.values[k] - n as f64 * s * t) / sqrt_n
        };
        for &(a, b) in &idx {
            let (za, zb) = (pr.cal_z.values[a], pr.cal_z.values[b]);
            buf.push(za * zb);
            buf.push(centered(a) * centered(b));
            buf.push(za * pr.cal_w.values[b]);
            buf.push(zb * pr.cal_w.values[a]);
        }
        Ok(())
    })?;
    pairs
        .iter()
        .enumerate()
        .map(|(k, &(p, q))| {
            Ok(CovarianceRow {
                ensemble: kind,
                n,
                p,
                q,
                z_cov: acc.get(4 * k).estimate(),
                z_oracle: finite_n_z_cov(n, kind, p, q)?,
                cal_t_cov: acc.get(4 * k + 1).estimate(),
                cal_t_oracle: finite_n_cal_t_cov(n, kind, p, q)?,
                cross: [acc.get(4 * k + 2).estimate(), acc.get(4 * k + 3).estimate()],
            })
        })
        .collect()
}

fn over_config(cfg: &ExperimentConfig, pairs: &[PointPair]) -> Result<Vec<CovarianceRow>> {
    let engine = cfg.engine()?;
    let mut rows = Vec::new();
    for &n in &cfg.n_values {
        let seed = sub_seed(cfg.seed, format!("covariance/{}/{n}", cfg.ensemble));
        rows.extend(covariance_rows(&engine, seed, cfg.ensemble, n, cfg.replicas, pairs)?);
    }
    Ok(rows)
}

/// `E 𝒵(p) 𝒵(q)` for every configured order, with the finite-n oracle.
pub fn estimate_z_covariance(cfg: &ExperimentConfig, pairs: &[PointPair]) -> Result<Vec<(CovarianceRow, Check)>> {
    Ok(over_config(cfg, pairs)?
        .into_iter()
        .map(|r| {
            let c = r.z_check(super::Z_MOMENT);
            (r, c)
        })
        .collect())
}

/// Covariance of `n^{-1/2}(𝒯 - E𝒯)` for every configured order.
pub fn estimate_cal_t_covariance(
    cfg: &ExperimentConfig,
    pairs: &[PointPair],
) -> Result<Vec<(CovarianceRow, Check)>> {
    Ok(over_config(cfg, pairs)?
        .into_iter()
        .map(|r| {
            let c = r.cal_t_check(super::Z_MOMENT);
            (r, c)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_covers_pairs() {
        let (g, idx) = grid_for(&STANDARD_PAIRS).unwrap();
        let pts: Vec<Point> = g.points().collect();
        for (&(p, q), &(a, b)) in STANDARD_PAIRS.iter().zip(&idx) {
            assert_eq!(pts[a], p);
            assert_eq!(pts[b], q);
        }
    }

    #[test]
    fn dft_small_run_matches_oracle() {
        let mut cfg = ExperimentConfig::new(EnsembleKind::Dft, vec![8], 20_000, 5);
        cfg.workers = 2;
        let rows = estimate_z_covariance(&cfg, &STANDARD_PAIRS[..3]).unwrap();
        assert_eq!(rows.len(), 3);
        for (r, c) in &rows {
            assert!(c.pass, "{c:?}");
            assert!(r.cal_t_check(4.0).pass);
            assert!(r.cross_checks(5.0).iter().all(|c| c.pass));
        }
        assert!((rows[0].0.z_oracle - 1.0 / 16.0).abs() < 1e-15);
    }
}

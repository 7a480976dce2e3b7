//! The full acceptance battery and its report files.

use std::fs;
use std::path::{Path, PathBuf};

use num::rational::BigRational;
use num::BigInt;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ensembles::{sample_weights, EnsembleKind};
use crate::error::{Error, Result};
use crate::moments::{m2k_orthogonal, m2k_unitary, orthogonal_i_printed, scaled_i, to_f64, IPattern, MixedItem, MomentSource};
use crate::montecarlo::covariance::{covariance_rows, STANDARD_PAIRS};
use crate::montecarlo::lindeberg::lindeberg_compare;
use crate::montecarlo::marginal::{cal_t_marginal_ks, marginal_ks, zero_convergence};
use crate::montecarlo::moments_mc::estimate_moments;
use crate::montecarlo::onedim::{dirichlet_onedim_checks, gamma_ratio, order_gap, spacings_diagnostics};
use crate::montecarlo::report::{write_checks_csv, Check, KS_ALPHA, Z_IDENTITY, Z_MOMENT};
use crate::montecarlo::shat::{char_function_identity, h_identity_checks, v_fourth_moments, shat_experiment};
use crate::montecarlo::Engine;
use crate::processes::{check_anova_identity, GridSpec, TruncationDraw};
use crate::rng::{derive_seed, RngStream};

pub const REPORT_FILE: &str = "suite_report.json";
pub const CHECKS_FILE: &str = "suite_checks.csv";

/// Identifiers of the battery's sections; `0` holds supplementary checks.
pub const CRITERIA: [u32; 12] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Multiplies every replica count; 1 is the full battery.
    pub scale: f64,
    /// Run only these sections; empty means all.
    #[serde(default)]
    pub only: Vec<u32>,
    #[serde(skip_serializing, default = "one")]
    pub workers: usize,
}

fn one() -> usize {
    1
}

impl SuiteConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            scale: 1.0,
            only: Vec::new(),
            workers: 1,
        }
    }

    fn replicas(&self, m: u64) -> u64 {
        ((m as f64 * self.scale).round() as u64).max(2)
    }

    fn seed_for(&self, id: u32, tag: &str) -> u64 {
        derive_seed(self.seed, &format!("criterion-{id}/{tag}"))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::invalid("scale must be positive"));
        }
        if self.workers == 0 {
            return Err(Error::invalid("workers must be at least 1"));
        }
        if let Some(bad) = self.only.iter().find(|id| !CRITERIA.contains(id)) {
            return Err(Error::invalid(format!("no criterion {bad}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: u32,
    pub title: String,
    pub pass: bool,
    pub checks: Vec<Check>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl CriterionReport {
    fn new(id: u32, title: &str, checks: Vec<Check>, notes: Vec<String>) -> Self {
        Self {
            id,
            title: title.into(),
            pass: checks.iter().all(|c| c.pass),
            checks,
            notes,
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub config: SuiteConfig,
    pub pass: bool,
    pub criteria: Vec<CriterionReport>,
}

impl SuiteReport {
    pub fn all_checks(&self) -> Vec<Check> {
        self.criteria
            .iter()
            .flat_map(|c| {
                c.checks.iter().cloned().map(move |mut k| {
                    k.label = format!("[{}] {}", c.id, k.label);
                    k
                })
            })
            .collect()
    }

    /// Writes the JSON report and the CSV table into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let json_path = dir.join(REPORT_FILE);
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))?;
        let csv_path = dir.join(CHECKS_FILE);
        let mut csv = Vec::new();
        write_checks_csv(&self.all_checks(), &mut csv).map_err(|e| Error::io(&csv_path, e))?;
        fs::write(&csv_path, csv).map_err(|e| Error::io(&csv_path, e))?;
        Ok(vec![json_path, csv_path])
    }
}

/// Runs the battery; `progress` sees each section as soon as it finishes.
pub fn run_suite(cfg: &SuiteConfig, mut progress: impl FnMut(&CriterionReport)) -> Result<SuiteReport> {
    cfg.validate()?;
    let engine = Engine::new(cfg.workers)?;
    let mut criteria = Vec::new();
    let mut moments_done = false;
    for id in CRITERIA {
        if !cfg.only.is_empty() && !cfg.only.contains(&id) {
            continue;
        }
        let report = match id {
            1 => anova(cfg, &engine)?,
            2 | 3 if moments_done => continue,
            2 | 3 => {
                // both sections share one moment run per ensemble
                moments_done = true;
                let (c2, c3) = moments(cfg, &engine)?;
                for r in [c2, c3] {
                    if cfg.only.is_empty() || cfg.only.contains(&r.id) {
                        progress(&r);
                        criteria.push(r);
                    }
                }
                continue;
            }
            4 => shat_section(cfg, &engine)?,
            5 => charfn_section(cfg, &engine)?,
            6 => covariance_section(cfg, &engine)?,
            7 => marginal_section(cfg, &engine)?,
            8 => lindeberg_section(cfg, &engine)?,
            9 => onedim_section(cfg, &engine)?,
            10 => spacings_section(cfg, &engine)?,
            11 => zero_section(cfg, &engine)?,
            _ => supplementary(cfg, &engine)?,
        };
        progress(&report);
        criteria.push(report);
    }
    Ok(SuiteReport {
        config: cfg.clone(),
        pass: criteria.iter().all(|c| c.pass),
        criteria,
    })
}

fn anova(cfg: &SuiteConfig, engine: &Engine) -> Result<CriterionReport> {
    let grid = GridSpec::default_grid();
    let mut checks = Vec::new();
    for kind in EnsembleKind::ALL {
        for n in [8usize, 32, 128] {
            let residuals = engine.collect(cfg.seed_for(1, &format!("{kind}/{n}")), 100, |rng, _| {
                let w = sample_weights(kind, n, rng)?;
                let d = TruncationDraw::sample(n, rng);
                check_anova_identity(&w, &d, &grid)
            })?;
            let worst = residuals.iter().copied().fold(0.0, f64::max);
            let bound = 1e-8 * n as f64;
            checks.push(
                Check::predicate("max decomposition residual", worst, format!("<= {bound:e}"), worst <= bound)
                    .with_ensemble(kind)
                    .with_n(n),
            );
        }
    }
    Ok(CriterionReport::new(1, "exact decomposition of the truncated sum", checks, vec![]))
}

fn exact_rational_checks() -> Vec<Check> {
    let q = |num: i64, den: i64| BigRational::new(BigInt::from(num), BigInt::from(den));
    let mut ok = [true; 4];
    for n in 1..=64i64 {
        let nu = n as u64;
        ok[0] &= m2k_unitary(nu, 1).ok() == Some(q(1, n)) && m2k_orthogonal(nu, 1).ok() == Some(q(1, n));
        ok[1] &= m2k_unitary(nu, 2).ok() == Some(q(2, n * (n + 1)));
        ok[2] &= m2k_orthogonal(nu, 2).ok() == Some(q(3, n * (n + 2)));
        ok[3] &= m2k_unitary(nu, 3).ok() == Some(q(6, n * (n + 1) * (n + 2)));
    }
    let labels = [
        "E|u11|^2 = 1/n (both groups)",
        "E|U11|^4 = 2/(n(n+1))",
        "E O11^4 = 3/(n(n+2))",
        "E|U11|^6 = 6/(n(n+1)(n+2))",
    ];
    labels
        .iter()
        .zip(ok)
        .map(|(l, pass)| Check::predicate(*l, if pass { 1.0 } else { 0.0 }, "exact for n = 1..64", pass))
        .collect()
}

fn moments(cfg: &SuiteConfig, engine: &Engine) -> Result<(CriterionReport, CriterionReport)> {
    let n = 8;
    let m = cfg.replicas(1_000_000);
    let mut c2 = exact_rational_checks();
    let mut c3 = Vec::new();
    for kind in [EnsembleKind::HaarUnitary, EnsembleKind::HaarOrthogonal] {
        for est in estimate_moments(engine, cfg.seed_for(2, kind.name()), kind, n, m)? {
            let mixed = est.oracle.asymptotic_leading.is_some();
            if kind == EnsembleKind::HaarOrthogonal && mixed && est.oracle.source == MomentSource::ClosedForm {
                c3.push(est.check(Z_IDENTITY));
                if let Some(item) = MixedItem::ALL.iter().find(|m| m.name() == est.oracle.name) {
                    let p = item.orthogonal_pattern();
                    let printed = to_f64(&orthogonal_i_printed(p, n as u64)?);
                    if printed != est.oracle.value {
                        c3.push(
                            Check::info(format!("{} against the uncorrected closed form", p.label()), est.estimate, Some(printed))
                                .with_ensemble(kind)
                                .with_n(n),
                        );
                    }
                }
            } else {
                c2.push(est.check(Z_MOMENT));
            }
        }
    }
    for p in IPattern::ALL {
        let lead = p.leading();
        let ratio = scaled_i(p, 64)? / f64::from(lead.coefficient);
        c3.push(
            Check::predicate(
                format!("n^{} {} / {}", -lead.order, p.label(), lead.coefficient),
                ratio,
                "within 15% of 1",
                (ratio - 1.0).abs() <= 0.15,
            )
            .with_ensemble(EnsembleKind::HaarOrthogonal)
            .with_n(64),
        );
    }
    Ok((
        CriterionReport::new(2, "exact entry moments", c2, vec![]),
        CriterionReport::new(
            3,
            "orthogonal corner integrals",
            c3,
            vec!["I(2 2;2 2) and I(2 2;0 2) are checked in their corrected closed forms".into()],
        ),
    ))
}

fn shat_section(cfg: &SuiteConfig, engine: &Engine) -> Result<CriterionReport> {
    let mut checks = Vec::new();
    for kind in [EnsembleKind::HaarUnitary, EnsembleKind::HaarOrthogonal] {
        let mut variances = Vec::new();
        for n in [16usize, 50, 128] {
            let r = shat_experiment(engine, cfg.seed_for(4, &format!("{kind}/{n}")), kind, n, cfg.replicas(10_000))?;
            checks.push(r.check(Z_MOMENT));
            variances.push(r.sample_variance);
        }
        let decreasing = variances.windows(2).all(|w| w[1] < w[0]);
        checks.push(
            Check::predicate(
                "sample variance of Shat over n = 16, 50, 128",
                *variances.last().expect("three orders"),
                "strictly decreasing",
                decreasing,
            )
            .with_ensemble(kind),
        );
    }
    Ok(CriterionReport::new(4, "concentration of Shat", checks, vec![]))
}

fn charfn_section(cfg: &SuiteConfig, engine: &Engine) -> Result<CriterionReport> {
    let mut checks = Vec::new();
    for kind in [EnsembleKind::HaarUnitary, EnsembleKind::HaarOrthogonal] {
        let r = char_function_identity(
            engine,
            cfg.seed_for(5, kind.name()),
            kind,
            32,
            cfg.replicas(100_000),
            &[0.0, 0.5, 1.0, 2.0],
        )?;
        checks.extend(r.checks(Z_IDENTITY));
    }
    Ok(CriterionReport::new(
        5,
        "characteristic function of the bilinear form",
        checks,
        vec!["real part compared through the per-replica paired difference".into()],
    ))
}

fn covariance_section(cfg: &SuiteConfig, engine: &Engine) -> Result<CriterionReport> {
    let mut checks = Vec::new();
    for (n, m, stage) in [(8usize, 1_000_000u64, "oracle validation"), (32, 100_000, "assertion")] {
        for kind in EnsembleKind::ALL {
            let seed = cfg.seed_for(6, &format!("{stage}/{kind}/{n}"));
            for row in covariance_rows(engine, seed, kind, n, cfg.replicas(m), &STANDARD_PAIRS)? {
                let mut z = row.z_check(Z_MOMENT);
                z.label = format!("{} ({stage})", z.label);
                checks.push(z);
                if n == 32 {
                    checks.push(row.cal_t_check(Z_MOMENT));
                }
                checks.extend(row.cross_checks(Z_IDENTITY));
            }
        }
    }
    Ok(CriterionReport::new(6, "finite-n covariance of Z", checks, vec![]))
}

fn marginal_section(cfg: &SuiteConfig, engine: &Engine) -> Result<CriterionReport> {
    let (n, m) = (200, cfg.replicas(5000));
    let mut checks = Vec::new();
    for kind in [EnsembleKind::HaarUnitary, EnsembleKind::HaarOrthogonal, EnsembleKind::Dft] {
        let r = marginal_ks(engine, cfg.seed_for(7, &format!("Z/{kind}")), kind, n, m, 0.5, 0.5)?;
        checks.extend(r.checks(KS_ALPHA));
    }
    for kind in EnsembleKind::ALL {
        let r = cal_t_marginal_ks(engine, cfg.seed_for(7, &format!("T/{kind}")), kind, n, m, 0.5, 0.5)?;
        checks.extend(r.checks(KS_ALPHA));
    }
    Ok(CriterionReport::new(
        7,
        "one-point limit laws",
        checks,
        vec!["lattice-valued statistics (dft, permutation) are decided after U(-1/2,1/2) jitter of the counts".into()],
    ))
}

fn lindeberg_section(cfg: &SuiteConfig, engine: &Engine) -> Result<CriterionReport> {
    let r = lindeberg_compare(
        engine,
        cfg.seed_for(8, "unitary"),
        EnsembleKind::HaarUnitary,
        &[16, 64, 256],
        cfg.replicas(5000),
        0.03,
        0.03,
        Some(64),
    )?;
    Ok(CriterionReport::new(
        8,
        "Bernoulli to Gaussian swap",
        r.checks(0.05, KS_ALPHA, Z_MOMENT),
        vec!["s = t = 0.03; third moment judged on its conditional mean given w".into()],
    ))
}

fn onedim_section(cfg: &SuiteConfig, engine: &Engine) -> Result<CriterionReport> {
    let mut checks = Vec::new();
    for beta in [1.0, 0.5] {
        let r = dirichlet_onedim_checks(engine, cfg.seed_for(9, &format!("beta={beta}")), 200, cfg.replicas(100_000), beta, 0.5)?;
        checks.extend(r.checks(Z_MOMENT));
    }
    Ok(CriterionReport::new(
        9,
        "Dirichlet weights and weighted empirical process",
        checks,
        vec!["asserted against exact n = 200 values; limits are reported as z-scores".into()],
    ))
}

fn spacings_section(cfg: &SuiteConfig, engine: &Engine) -> Result<CriterionReport> {
    let r = spacings_diagnostics(
        engine,
        cfg.seed_for(10, "spacings"),
        &[100, 1000, 10_000],
        cfg.replicas(10_000),
        (20, 3, 4),
        cfg.replicas(100_000),
    )?;
    let mut checks = r.checks(KS_ALPHA);
    let mut rng = RngStream::new(cfg.seed_for(10, "full gap"), 0).rng();
    let mut c: Vec<f64> = (0..20).map(|_| 1.0 - rng.random::<f64>()).collect();
    c.sort_by(f64::total_cmp);
    let lhs = order_gap(&c, 0, 21)?;
    let rhs = gamma_ratio(20, 21, &mut rng)?;
    checks.push(Check::predicate("full gap k=0 r=n+1", lhs, "both sides equal 1", lhs == 1.0 && rhs == 1.0).with_n(20));
    Ok(CriterionReport::new(
        10,
        "window counts and spacings",
        checks,
        vec!["gaps use n + 1 spacings with C_(0) = 0 and C_(n+1) = 1".into()],
    ))
}

fn zero_section(cfg: &SuiteConfig, engine: &Engine) -> Result<CriterionReport> {
    let r = zero_convergence(
        engine,
        cfg.seed_for(11, "unitary"),
        EnsembleKind::HaarUnitary,
        &[16, 64, 256],
        cfg.replicas(2000),
        &GridSpec::default_grid(),
    )?;
    Ok(CriterionReport::new(11, "n^{-1/2} Z tends to zero", r.checks(), vec![]))
}

fn supplementary(cfg: &SuiteConfig, engine: &Engine) -> Result<CriterionReport> {
    let mut checks = Vec::new();
    for kind in [EnsembleKind::HaarUnitary, EnsembleKind::HaarOrthogonal, EnsembleKind::Dft] {
        let r = h_identity_checks(engine, cfg.seed_for(0, &format!("H/{kind}")), kind, 16, cfg.replicas(100_000))?;
        checks.extend(r.checks(Z_IDENTITY));
    }
    for kind in [EnsembleKind::HaarUnitary, EnsembleKind::HaarOrthogonal] {
        let r = v_fourth_moments(engine, cfg.seed_for(0, &format!("V/{kind}")), kind, 64, cfg.replicas(20_000))?;
        checks.extend(r.checks(Z_IDENTITY, 0.3));
    }
    Ok(CriterionReport::new(0, "supplementary: H = VV^T identities and fourth-order V moments", checks, vec![]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_rationals_hold() {
        assert!(exact_rational_checks().iter().all(|c| c.pass));
    }

    #[test]
    fn config_validation() {
        let mut c = SuiteConfig::new(1);
        c.validate().unwrap();
        c.only = vec![13];
        assert!(c.validate().is_err());
        c.only = vec![1];
        c.scale = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn selected_sections_write_identical_files() {
        let mut cfg = SuiteConfig::new(7);
        cfg.only = vec![1, 11];
        cfg.scale = 0.05;
        let dir = std::env::temp_dir().join(format!("haartrunc-suite-{}", std::process::id()));
        let mut bytes = Vec::new();
        for workers in [1, 3] {
            cfg.workers = workers;
            let mut seen = Vec::new();
            let report = run_suite(&cfg, |r| seen.push(r.id)).unwrap();
            assert_eq!(seen, vec![1, 11]);
            assert!(report.criteria[0].pass);
            let paths = report.write(&dir.join(workers.to_string())).unwrap();
            bytes.push(paths.iter().map(|p| fs::read(p).unwrap()).collect::<Vec<_>>());
        }
        assert_eq!(bytes[0], bytes[1]);
        let _ = fs::remove_dir_all(&dir);
    }
}

//! One function per verb. Each returns whether every asserted check passed.

use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use haartrunc::ensembles::{sample, sample_weights, weight_matrix, EnsembleKind};
use haartrunc::montecarlo::covariance::{covariance_rows, PointPair, STANDARD_PAIRS};
use haartrunc::montecarlo::lindeberg::lindeberg_compare;
use haartrunc::montecarlo::marginal::{cal_t_marginal_ks, marginal_ks};
use haartrunc::montecarlo::moments_mc::estimate_moments;
use haartrunc::montecarlo::onedim::spacings_diagnostics;
use haartrunc::montecarlo::report::write_checks_csv;
use haartrunc::montecarlo::{Check, Engine, KS_ALPHA, Z_IDENTITY, Z_MOMENT};
use haartrunc::moments::MomentSource;
use haartrunc::processes::{
    check_anova_identity, eval_kind, evaluate, is_coordinatewise_nondecreasing, monotone_decomposition, ProcessKind,
    TruncationDraw,
};
use haartrunc::rng::derive_seed;
use haartrunc::suite::{run_suite, SuiteConfig};
use serde_json::{json, Value};

use crate::args::{Cli, Format, Resolved, Verb};
use crate::CliError;

pub fn run(cli: &Cli, r: &Resolved) -> Result<bool, CliError> {
    let engine = Engine::new(r.threads)?;
    match &cli.verb {
        Verb::Sample { .. } => sample_cmd(r, &engine),
        Verb::VerifyMoments => verify_moments(r, &engine),
        Verb::Covariance => covariance(r, &engine),
        Verb::Marginal { .. } => marginal(r, &engine),
        Verb::Lindeberg { .. } => lindeberg(r, &engine),
        Verb::DecomposeCheck => decompose_check(r, &engine),
        Verb::Spacings { .. } => spacings(r, &engine),
        Verb::Suite { .. } => suite(r),
    }
}

fn seed_for(r: &Resolved, tag: impl std::fmt::Display) -> u64 {
    derive_seed(r.seed, &format!("{}/{tag}", r.verb))
}

fn ensemble(r: &Resolved) -> EnsembleKind {
    r.ensemble.unwrap_or(EnsembleKind::HaarUnitary)
}

fn write_out(r: &Resolved, bytes: &[u8]) -> Result<(), CliError> {
    match &r.out {
        Some(path) => std::fs::write(path, bytes).map_err(|e| haartrunc::Error::io(path, e).into()),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| haartrunc::Error::io("<stdout>", e).into()),
    }
}

fn config_line(r: &Resolved) -> Result<String, CliError> {
    Ok(format!("# config: {}\n", serde_json::to_string(r).map_err(haartrunc::Error::from)?))
}

fn failure_report(verb: &str, checks: &[Check]) {
    let failures: Vec<&Check> = checks.iter().filter(|c| !c.pass).collect();
    if !failures.is_empty() {
        let report = json!({ "status": "fail", "verb": verb, "failures": failures });
        eprintln!("{report}");
    }
}

/// Writes checks plus verb-specific results and returns the overall verdict.
fn emit(r: &Resolved, checks: &[Check], results: Value) -> Result<bool, CliError> {
    let pass = checks.iter().all(|c| c.pass);
    let bytes = match r.format {
        Format::Json => {
            let doc = json!({ "config": r, "pass": pass, "checks": checks, "results": results });
            let mut s = serde_json::to_string_pretty(&doc).map_err(haartrunc::Error::from)?;
            s.push('\n');
            s.into_bytes()
        }
        Format::Csv => {
            let mut buf = config_line(r)?.into_bytes();
            write_checks_csv(checks, &mut buf).map_err(|e| haartrunc::Error::io("<buffer>", e))?;
            buf
        }
    };
    write_out(r, &bytes)?;
    failure_report(r.verb, checks);
    Ok(pass)
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<Value, CliError> {
    Ok(serde_json::to_value(v).map_err(haartrunc::Error::from)?)
}

fn sample_cmd(r: &Resolved, engine: &Engine) -> Result<bool, CliError> {
    let kind = ensemble(r);
    let mut csv = config_line(r)?;
    let mut docs = Vec::new();
    let header = match (r.process, r.weights) {
        (Some(p), _) if p.is_two_parameter() => format!("n,replica,s,t,{}", p.name()),
        (Some(ProcessKind::F), _) => "n,replica,t,F".to_string(),
        (Some(p), _) => format!("n,replica,s,{}", p.name()),
        (None, true) => "n,replica,i,j,w".to_string(),
        (None, false) => "n,replica,i,j,re,im".to_string(),
    };
    csv.push_str(&header);
    csv.push('\n');
    for &n in &r.n {
        let seed = seed_for(r, format!("{kind}/{n}"));
        let rows = engine.collect(seed, r.replicas, |rng, _| {
            let mut lines = String::new();
            let doc = match r.process {
                Some(p) => {
                    let w = sample_weights(kind, n, rng)?;
                    let d = TruncationDraw::sample(n, rng);
                    let ps = eval_kind(p, &w, &d, &r.grid)?;
                    let mut buf = Vec::new();
                    ps.write_csv(&mut buf).map_err(|e| haartrunc::Error::io("<buffer>", e))?;
                    for line in String::from_utf8_lossy(&buf).lines().skip(1) {
                        lines.push_str(line);
                        lines.push('\n');
                    }
                    serde_json::to_value(&ps)?
                }
                None if r.weights => {
                    let w = sample_weights(kind, n, rng)?;
                    for i in 0..n {
                        for j in 0..n {
                            let _ = writeln!(lines, "{},{},{:.16e}", i + 1, j + 1, w.get(i, j));
                        }
                    }
                    json!({ "w": (0..n).map(|i| w.row(i).to_vec()).collect::<Vec<_>>() })
                }
                None => {
                    let m = sample(kind, n, rng)?;
                    let mut re = vec![vec![0.0; n]; n];
                    let mut im = vec![vec![0.0; n]; n];
                    for i in 0..n {
                        for j in 0..n {
                            let z = m.get(i, j);
                            let _ = writeln!(lines, "{},{},{:.16e},{:.16e}", i + 1, j + 1, z.re, z.im);
                            re[i][j] = z.re;
                            im[i][j] = z.im;
                        }
                    }
                    debug_assert_eq!(weight_matrix(&m).n(), n);
                    json!({ "re": re, "im": im })
                }
            };
            Ok((lines, doc))
        })?;
        for (rep, (lines, doc)) in rows.into_iter().enumerate() {
            for line in lines.lines() {
                let _ = writeln!(csv, "{n},{rep},{line}");
            }
            docs.push(json!({ "n": n, "replica": rep, "sample": doc }));
        }
    }
    let bytes = match r.format {
        Format::Csv => csv.into_bytes(),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&json!({ "config": r, "samples": docs }))
                .map_err(haartrunc::Error::from)?;
            s.push('\n');
            s.into_bytes()
        }
    };
    write_out(r, &bytes)?;
    Ok(true)
}

fn verify_moments(r: &Resolved, engine: &Engine) -> Result<bool, CliError> {
    let kind = ensemble(r);
    let mut checks = Vec::new();
    let mut results = Vec::new();
    for &n in &r.n {
        let est = estimate_moments(engine, seed_for(r, format!("{kind}/{n}")), kind, n, r.replicas)?;
        for e in &est {
            let mixed = e.oracle.asymptotic_leading.is_some() && e.oracle.source == MomentSource::ClosedForm;
            checks.push(e.check(if mixed { Z_IDENTITY } else { Z_MOMENT }));
        }
        results.push(to_json(&est)?);
    }
    emit(r, &checks, Value::Array(results))
}

fn all_pairs(r: &Resolved) -> Vec<PointPair> {
    if !r.grid_given {
        return STANDARD_PAIRS.to_vec();
    }
    let pts: Vec<(f64, f64)> = r.grid.points().collect();
    let mut out = Vec::new();
    for a in 0..pts.len() {
        for b in a..pts.len() {
            out.push((pts[a], pts[b]));
        }
    }
    out
}

fn covariance(r: &Resolved, engine: &Engine) -> Result<bool, CliError> {
    let kind = ensemble(r);
    let pairs = all_pairs(r);
    let mut checks = Vec::new();
    let mut results = Vec::new();
    for &n in &r.n {
        let rows = covariance_rows(engine, seed_for(r, format!("{kind}/{n}")), kind, n, r.replicas, &pairs)?;
        for row in &rows {
            checks.push(row.z_check(Z_MOMENT));
            checks.push(row.cal_t_check(Z_MOMENT));
            checks.extend(row.cross_checks(Z_IDENTITY));
        }
        results.push(to_json(&rows)?);
    }
    emit(r, &checks, Value::Array(results))
}

fn marginal(r: &Resolved, engine: &Engine) -> Result<bool, CliError> {
    let kind = ensemble(r);
    let (s, t) = (r.s.unwrap_or(0.5), r.t.unwrap_or(0.5));
    let mut checks = Vec::new();
    let mut results = Vec::new();
    for &n in &r.n {
        if kind != EnsembleKind::Permutation {
            let z = marginal_ks(engine, seed_for(r, format!("Z/{kind}/{n}")), kind, n, r.replicas, s, t)?;
            checks.extend(z.checks(KS_ALPHA));
            results.push(to_json(&z)?);
        }
        let ct = cal_t_marginal_ks(engine, seed_for(r, format!("T/{kind}/{n}")), kind, n, r.replicas, s, t)?;
        checks.extend(ct.checks(KS_ALPHA));
        results.push(to_json(&ct)?);
    }
    emit(r, &checks, Value::Array(results))
}

fn lindeberg(r: &Resolved, engine: &Engine) -> Result<bool, CliError> {
    let kind = ensemble(r);
    let aa = r.n[r.n.len() / 2];
    let res = lindeberg_compare(
        engine,
        seed_for(r, kind),
        kind,
        &r.n,
        r.replicas,
        r.s.unwrap_or(0.03),
        r.t.unwrap_or(0.03),
        Some(aa),
    )?;
    emit(r, &res.checks(0.05, KS_ALPHA, Z_MOMENT), to_json(&res)?)
}

fn decompose_check(r: &Resolved, engine: &Engine) -> Result<bool, CliError> {
    let kinds: Vec<EnsembleKind> = match r.ensemble {
        Some(k) => vec![k],
        None => EnsembleKind::ALL.to_vec(),
    };
    let nt = r.grid.t_points().len();
    let mut checks = Vec::new();
    for kind in kinds {
        for &n in &r.n {
            let tol = 1e-8 * n as f64;
            let per = engine.collect(seed_for(r, format!("{kind}/{n}")), r.replicas, |rng, _| {
                let w = sample_weights(kind, n, rng)?;
                let d = TruncationDraw::sample(n, rng);
                let anova = check_anova_identity(&w, &d, &r.grid)?;
                let (xi1, xi2) = monotone_decomposition(&w, &d, &r.grid)?;
                let z = evaluate(&w, &d, &r.grid)?.cal_z.values;
                let split = xi1
                    .iter()
                    .zip(&xi2)
                    .zip(&z)
                    .map(|((a, b), z)| (a - b - z).abs())
                    .fold(0.0, f64::max);
                let monotone = is_coordinatewise_nondecreasing(&xi1, nt, tol)
                    && is_coordinatewise_nondecreasing(&xi2, nt, tol);
                Ok((anova, split, monotone))
            })?;
            let worst_anova = per.iter().map(|p| p.0).fold(0.0, f64::max);
            let worst_split = per.iter().map(|p| p.1).fold(0.0, f64::max);
            let monotone = per.iter().all(|p| p.2);
            let rule = format!("<= {tol:e}");
            for c in [
                Check::predicate("max decomposition residual", worst_anova, rule.clone(), worst_anova <= tol),
                Check::predicate("max |Xi1 - Xi2 - Z|", worst_split, rule, worst_split <= tol),
                Check::predicate(
                    "Xi1 and Xi2 non-decreasing",
                    if monotone { 1.0 } else { 0.0 },
                    "every replica",
                    monotone,
                ),
            ] {
                checks.push(c.with_ensemble(kind).with_n(n));
            }
        }
    }
    emit(r, &checks, Value::Null)
}

fn spacings(r: &Resolved, engine: &Engine) -> Result<bool, CliError> {
    let (gn, k, gr, gm) = r.gap.unwrap_or((20, 3, 4, 100_000));
    let res = spacings_diagnostics(engine, seed_for(r, "spacings"), &r.n, r.replicas, (gn, k, gr), gm)?;
    emit(r, &res.checks(KS_ALPHA), to_json(&res)?)
}

fn suite(r: &Resolved) -> Result<bool, CliError> {
    let cfg = SuiteConfig {
        seed: r.seed,
        scale: r.scale.unwrap_or(1.0),
        only: r.only.clone(),
        workers: r.threads,
    };
    let dir = r.out.clone().unwrap_or_else(|| PathBuf::from("suite-out"));
    let report = run_suite(&cfg, |c| {
        let fails = c.failures().count();
        eprintln!(
            "criterion {:>2} {:<4} {} ({} checks, {} failed)",
            c.id,
            if c.pass { "PASS" } else { "FAIL" },
            c.title,
            c.checks.len(),
            fails
        );
    })?;
    let mut paths = report.write(&dir)?;
    let failures: Vec<Value> = report
        .criteria
        .iter()
        .flat_map(|c| c.failures().map(move |f| json!({ "criterion": c.id, "check": f })))
        .collect();
    if !failures.is_empty() {
        let path = dir.join("suite_failures.json");
        let doc = json!({ "status": "fail", "config": report.config, "failures": failures });
        let mut text = serde_json::to_string_pretty(&doc).map_err(haartrunc::Error::from)?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| haartrunc::Error::io(&path, e))?;
        eprintln!("{}", json!({ "status": "fail", "verb": "suite", "failures": failures }));
        paths.push(path);
    }
    for p in &paths {
        println!("{}", p.display());
    }
    println!("suite: {}", if report.pass { "PASS" } else { "FAIL" });
    Ok(report.pass)
}

//! One row per assertion, shared by every experiment and by the CLI.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::stats::{EstimateWithCI, KsResult};
use crate::ensembles::EnsembleKind;

/// Default SE multiple for comparisons against an exact value.
pub const Z_MOMENT: f64 = 4.0;
/// Default SE multiple for identities between two estimators.
pub const Z_IDENTITY: f64 = 5.0;
/// Default KS rejection level.
pub const KS_ALPHA: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub label: String,
    pub ensemble: Option<EnsembleKind>,
    pub n: Option<usize>,
    /// `(s, t, s', t')`; unused coordinates are `None`.
    pub point: [Option<f64>; 4],
    pub estimate: f64,
    pub std_error: Option<f64>,
    pub oracle: Option<f64>,
    pub z_score: Option<f64>,
    pub p_value: Option<f64>,
    pub rule: String,
    pub pass: bool,
}

impl Check {
    fn bare(label: impl Into<String>, estimate: f64, rule: String, pass: bool) -> Self {
        Self {
            label: label.into(),
            ensemble: None,
            n: None,
            point: [None; 4],
            estimate,
            std_error: None,
            oracle: None,
            z_score: None,
            p_value: None,
            rule,
            pass,
        }
    }

    /// `|estimate - oracle| ≤ z SE`.
    pub fn against(label: impl Into<String>, est: EstimateWithCI, oracle: f64, z: f64) -> Self {
        let mut c = Self::bare(label, est.mean, format!("|z| <= {z}"), est.agrees_with(oracle, z));
        c.std_error = Some(est.std_error);
        c.oracle = Some(oracle);
        c.z_score = Some(est.z_score(oracle));
        c
    }

    /// KS test that passes when `p > alpha`.
    pub fn ks(label: impl Into<String>, ks: KsResult, alpha: f64) -> Self {
        let mut c = Self::bare(label, ks.statistic, format!("p > {alpha}"), ks.p_value > alpha);
        c.p_value = Some(ks.p_value);
        c
    }

    /// A plain predicate on a derived value.
    pub fn predicate(label: impl Into<String>, value: f64, rule: impl Into<String>, pass: bool) -> Self {
        Self::bare(label, value, rule.into(), pass)
    }

    /// Reported but never failing.
    pub fn info(label: impl Into<String>, est: EstimateWithCI, oracle: Option<f64>) -> Self {
        let mut c = Self::bare(label, est.mean, "informational".into(), true);
        c.std_error = Some(est.std_error);
        c.oracle = oracle;
        c.z_score = oracle.map(|o| est.z_score(o));
        c
    }

    pub fn with_ensemble(mut self, kind: EnsembleKind) -> Self {
        self.ensemble = Some(kind);
        self
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = Some(n);
        self
    }

    pub fn at(mut self, s: f64, t: f64) -> Self {
        self.point[0] = Some(s);
        self.point[1] = Some(t);
        self
    }

    pub fn at_pair(mut self, p: (f64, f64), q: (f64, f64)) -> Self {
        self.point = [Some(p.0), Some(p.1), Some(q.0), Some(q.1)];
        self
    }
}

pub const CSV_HEADER: &str = "label,ensemble,n,s,t,s2,t2,estimate,se,oracle,z_score,p_value,rule,pass";

fn num(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.16e}")).unwrap_or_default()
}

fn quoted(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn write_checks_csv<W: Write>(checks: &[Check], out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for c in checks {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            quoted(&c.label),
            c.ensemble.map(|k| k.name()).unwrap_or(""),
            c.n.map(|n| n.to_string()).unwrap_or_default(),
            num(c.point[0]),
            num(c.point[1]),
            num(c.point[2]),
            num(c.point[3]),
            num(Some(c.estimate)),
            num(c.std_error),
            num(c.oracle),
            num(c.z_score),
            num(c.p_value),
            quoted(&c.rule),
            c.pass
        )?;
    }
    Ok(())
}

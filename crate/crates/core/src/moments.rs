//! Exact moments of Haar matrix entries as big rationals, plus the leading
//! asymptotics of the mixed moments that have no closed form here.

use std::fmt;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::ensembles::EnsembleKind;
use crate::error::{Error, Result};

fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

fn check_n(n: u64, min: u64) -> Result<i64> {
    if n < min {
        return Err(Error::invalid(format!("n must be at least {min}, got {n}")));
    }
    i64::try_from(n).map_err(|_| Error::invalid("n is too large"))
}

/// `E|U_ij|^{2k} = k! / (n (n+1) ⋯ (n+k-1))` for Haar unitary `U`.
pub fn m2k_unitary(n: u64, k: u64) -> Result<BigRational> {
    let n = check_n(n, 1)?;
    let mut acc = BigRational::one();
    for j in 0..k as i64 {
        acc *= ratio(j + 1, n + j);
    }
    Ok(acc)
}

/// `E O_ij^{2k} = ∏_{j<k} (2j+1) / (n+2j)` for Haar orthogonal `O`.
pub fn m2k_orthogonal(n: u64, k: u64) -> Result<BigRational> {
    let n = check_n(n, 1)?;
    let mut acc = BigRational::one();
    for j in 0..k as i64 {
        acc *= ratio(2 * j + 1, n + 2 * j);
    }
    Ok(acc)
}

/// `E|u_ij|^{2k}` for either Haar group.
pub fn m2k(kind: EnsembleKind, n: u64, k: u64) -> Result<BigRational> {
    match kind {
        EnsembleKind::HaarUnitary => m2k_unitary(n, k),
        EnsembleKind::HaarOrthogonal => m2k_orthogonal(n, k),
        other => Err(Error::UnsupportedEnsemble {
            op: "m2k",
            ensemble: other.to_string(),
        }),
    }
}

/// `n² Var |u_11|² = n² E V_11²`.
pub fn scaled_var_v(n: u64, kind: EnsembleKind) -> Result<BigRational> {
    let m = check_n(n, 2)?;
    match kind {
        EnsembleKind::HaarUnitary => Ok(ratio(m - 1, m + 1)),
        EnsembleKind::HaarOrthogonal => Ok(ratio(2 * (m - 1), m + 2)),
        other => Err(Error::UnsupportedEnsemble {
            op: "scaled_var_v",
            ensemble: other.to_string(),
        }),
    }
}

/// The four mixed moments of a 2x2 corner with a known leading term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MixedItem {
    /// `E |u11|⁴ |u22|⁴`
    Diag44,
    /// `E |u11|² |u12|² |u21|² |u22|²`
    Corner2222,
    /// `E |u11|² |u22|⁴`
    Diag24,
    /// `E |u11|² |u12|² |u22|²`
    Path222,
}

impl MixedItem {
    pub const ALL: [MixedItem; 4] = [
        MixedItem::Diag44,
        MixedItem::Corner2222,
        MixedItem::Diag24,
        MixedItem::Path222,
    ];

    /// Powers of `|u11|, |u12|, |u21|, |u22|`.
    pub fn exponents(self) -> [u32; 4] {
        match self {
            MixedItem::Diag44 => [4, 0, 0, 4],
            MixedItem::Corner2222 => [2, 2, 2, 2],
            MixedItem::Diag24 => [2, 0, 0, 4],
            MixedItem::Path222 => [2, 2, 0, 2],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MixedItem::Diag44 => "E|u11|^4|u22|^4",
            MixedItem::Corner2222 => "E|u11|^2|u12|^2|u21|^2|u22|^2",
            MixedItem::Diag24 => "E|u11|^2|u22|^4",
            MixedItem::Path222 => "E|u11|^2|u12|^2|u22|^2",
        }
    }

    /// The orthogonal integral that equals this item up to transposition.
    pub fn orthogonal_pattern(self) -> IPattern {
        match self {
            MixedItem::Diag44 => IPattern::I4004,
            MixedItem::Corner2222 => IPattern::I2222,
            MixedItem::Diag24 => IPattern::I2004,
            MixedItem::Path222 => IPattern::I2202,
        }
    }
}

impl std::str::FromStr for MixedItem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" | "diag44" => Ok(MixedItem::Diag44),
            "2" | "corner2222" => Ok(MixedItem::Corner2222),
            "3" | "diag24" => Ok(MixedItem::Diag24),
            "4" | "path222" => Ok(MixedItem::Path222),
            other => Err(Error::invalid(format!("unknown mixed moment `{other}`"))),
        }
    }
}

/// Leading term `c · n^p` of a mixed moment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Leading {
    pub coefficient: u32,
    pub order: i32,
}

impl Leading {
    pub fn at(&self, n: f64) -> f64 {
        f64::from(self.coefficient) * n.powi(self.order)
    }
}

pub fn mixed_moment_leading(kind: EnsembleKind, item: MixedItem) -> Result<Leading> {
    let (coefficient, order) = match (kind, item) {
        (EnsembleKind::HaarUnitary, MixedItem::Diag44) => (4, -4),
        (EnsembleKind::HaarUnitary, MixedItem::Corner2222) => (1, -4),
        (EnsembleKind::HaarUnitary, MixedItem::Diag24) => (2, -3),
        (EnsembleKind::HaarUnitary, MixedItem::Path222) => (1, -3),
        (EnsembleKind::HaarOrthogonal, MixedItem::Diag44) => (9, -4),
        (EnsembleKind::HaarOrthogonal, MixedItem::Corner2222) => (1, -4),
        (EnsembleKind::HaarOrthogonal, MixedItem::Diag24) => (3, -3),
        (EnsembleKind::HaarOrthogonal, MixedItem::Path222) => (1, -3),
        (other, _) => {
            return Err(Error::UnsupportedEnsemble {
                op: "mixed_moment_leading",
                ensemble: other.to_string(),
            })
        }
    };
    Ok(Leading { coefficient, order })
}

/// `I(a c; b d) = E O11^a O12^b O21^c O22^d` for the four patterns with closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IPattern {
    /// `E O11² O22⁴`
    I2004,
    /// `E O11⁴ O22⁴`
    I4004,
    /// `E O11² O12² O21² O22²`
    I2222,
    /// `E O11² O21² O22²`
    I2202,
}

impl IPattern {
    pub const ALL: [IPattern; 4] = [IPattern::I2004, IPattern::I4004, IPattern::I2222, IPattern::I2202];

    /// Powers of `O11, O12, O21, O22`.
    pub fn exponents(self) -> [u32; 4] {
        match self {
            IPattern::I2004 => [2, 0, 0, 4],
            IPattern::I4004 => [4, 0, 0, 4],
            IPattern::I2222 => [2, 2, 2, 2],
            IPattern::I2202 => [2, 0, 2, 2],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            IPattern::I2004 => "I(2 0;0 4)",
            IPattern::I4004 => "I(4 0;0 4)",
            IPattern::I2222 => "I(2 2;2 2)",
            IPattern::I2202 => "I(2 2;0 2)",
        }
    }

    /// The leading term of the matching mixed moment.
    pub fn leading(self) -> Leading {
        let item = match self {
            IPattern::I2004 => MixedItem::Diag24,
            IPattern::I4004 => MixedItem::Diag44,
            IPattern::I2222 => MixedItem::Corner2222,
            IPattern::I2202 => MixedItem::Path222,
        };
        mixed_moment_leading(EnsembleKind::HaarOrthogonal, item).expect("orthogonal item")
    }
}

impl fmt::Display for IPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for IPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let digits: String = s.chars().filter(char::is_ascii_digit).collect();
        match digits.as_str() {
            "2004" => Ok(IPattern::I2004),
            "4004" => Ok(IPattern::I4004),
            "2222" => Ok(IPattern::I2222),
            "2202" => Ok(IPattern::I2202),
            _ => Err(Error::invalid(format!("unknown pattern `{s}`"))),
        }
    }
}

fn prod(factors: &[i64]) -> BigInt {
    factors.iter().fold(BigInt::one(), |acc, &f| acc * BigInt::from(f))
}

fn frac(num: &[i64], den: &[i64]) -> BigRational {
    BigRational::new(prod(num), prod(den))
}

/// Factors of `(n+6)(n+4)(n+2)(n+1) n (n-1)`.
fn d8(n: i64) -> [i64; 6] {
    [n + 6, n + 4, n + 2, n + 1, n, n - 1]
}

/// Exact value of an orthogonal corner integral, valid for `n ≥ 2`.
pub fn orthogonal_i_exact(pattern: IPattern, n: u64) -> Result<BigRational> {
    let n = check_n(n, 2)?;
    Ok(match pattern {
        IPattern::I2004 => frac(&[3, n + 3], &[n, n - 1, n + 2, n + 4]),
        IPattern::I4004 => frac(&[9, n + 3, n + 5], &d8(n)),
        IPattern::I2222 => frac(&[n * n + 4 * n + 15], &d8(n)),
        IPattern::I2202 => frac(&[n + 1], &[n, n - 1, n + 2, n + 4]),
    })
}

/// The closed forms as usually printed. Two of them disagree with exact
/// Weingarten integration; kept for reporting the discrepancy.
pub fn orthogonal_i_printed(pattern: IPattern, n: u64) -> Result<BigRational> {
    let m = check_n(n, 2)?;
    match pattern {
        IPattern::I2222 => Ok(frac(&[m * m + 4 * m + 7], &d8(m))),
        IPattern::I2202 => Ok(frac(&[m + 1], &[m, m, m + 4, m + 2])),
        other => orthogonal_i_exact(other, n),
    }
}

/// `(lim n²(n-1)² E V11² V22², lim n²(n-1)² E V11 V12 V21 V22)`.
pub fn lemma53_limits(kind: EnsembleKind) -> Result<(i64, i64)> {
    match kind {
        EnsembleKind::HaarUnitary => Ok((1, 0)),
        EnsembleKind::HaarOrthogonal => Ok((4, 0)),
        other => Err(Error::UnsupportedEnsemble {
            op: "lemma53_limits",
            ensemble: other.to_string(),
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentSource {
    ClosedForm,
    LeadingOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub name: String,
    pub n: u64,
    /// Exact rational as `p/q`, when known.
    pub exact: Option<String>,
    pub value: f64,
    pub asymptotic_leading: Option<Leading>,
    pub source: MomentSource,
}

impl MomentReport {
    pub fn closed_form(name: impl Into<String>, n: u64, q: &BigRational) -> Self {
        Self {
            name: name.into(),
            n,
            exact: Some(format_rational(q)),
            value: to_f64(q),
            asymptotic_leading: None,
            source: MomentSource::ClosedForm,
        }
    }

    pub fn leading(name: impl Into<String>, n: u64, lead: Leading) -> Self {
        Self {
            name: name.into(),
            n,
            exact: None,
            value: lead.at(n as f64),
            asymptotic_leading: Some(lead),
            source: MomentSource::LeadingOrder,
        }
    }
}

pub fn format_rational(q: &BigRational) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Every closed-form and leading-order moment for one Haar group at order `n`.
pub fn moment_table(kind: EnsembleKind, n: u64) -> Result<Vec<MomentReport>> {
    let mut out = Vec::new();
    for k in 1..=4 {
        out.push(MomentReport::closed_form(format!("E|u11|^{}", 2 * k), n, &m2k(kind, n, k)?));
    }
    if n >= 2 {
        out.push(MomentReport::closed_form("n^2 Var|u11|^2", n, &scaled_var_v(n, kind)?));
    }
    for item in MixedItem::ALL {
        let lead = mixed_moment_leading(kind, item)?;
        if kind == EnsembleKind::HaarOrthogonal && n >= 2 {
            let q = orthogonal_i_exact(item.orthogonal_pattern(), n)?;
            let mut r = MomentReport::closed_form(item.name(), n, &q);
            r.asymptotic_leading = Some(lead);
            out.push(r);
        } else {
            out.push(MomentReport::leading(item.name(), n, lead));
        }
    }
    Ok(out)
}

/// `n^p I_n` for the pattern's leading power, to watch convergence.
pub fn scaled_i(pattern: IPattern, n: u64) -> Result<f64> {
    let q = orthogonal_i_exact(pattern, n)?;
    Ok(to_f64(&q) * (n as f64).powi(-pattern.leading().order))
}

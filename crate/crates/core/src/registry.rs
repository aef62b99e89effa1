//! The published IMKG methods, stored as printed and normalized on demand.
//!
//! Printed vectors do not always follow the length convention of
//! [`ImkgCoefficients`]: some carry extra leading zeros, some omit the
//! trailing `α̂_q = 1`, two omit the leading `α_1`. Normalization applies, in
//! order:
//!
//! 1. `β = β̂ = 0` for second-order methods, `β̂ = β` for third-order ones;
//! 2. for second-order methods append `α̂_q = 1` when missing, then left-pad
//!    or left-trim zeros of `α̂` to length `q`;
//! 3. left-pad or left-trim zeros of `δ̂` to length `q - 1`;
//! 4. when `α` has length `q - 1`, recover `α_1` from the leading coefficient
//!    of the family's target polynomial (KGO for order 2, KGNO for order 3);
//! 5. check the claimed order against the tableau-level conditions and the
//!    claimed implicit stage count against the nonzero `d̂`.
//!
//! A printed nonzero value is never changed. Step 5 failures are reported as
//! flags, not errors.

use crate::construction::{PolynomialFamily, PolynomialTarget};
use crate::order::{check_order2_general, check_order3_general, OrderReport, DEFAULT_TOLERANCE};
use crate::tableau::{DoubleTableau, ImkgCoefficients, TableauError};
use thiserror::Error;

/// `γ_-` in the 253a row.
pub const GAMMA_MINUS: f64 = 0.08931639747704086;
/// `γ_+` in the 253b row.
pub const GAMMA_PLUS: f64 = 1.2440169358562922;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegistryError {
    #[error("unknown method '{0}'")]
    NotFound(String),
    #[error("method name '{0}' does not parse as IMKG<p><f><j><letter>")]
    BadName(String),
    #[error("{name}: {what} cannot be aligned to length {target} without dropping a nonzero entry")]
    Alignment {
        name: String,
        what: &'static str,
        target: usize,
    },
    #[error("{name}: {reason}")]
    Recovery { name: String, reason: String },
    #[error("{name}: {source}")]
    Tableau {
        name: String,
        #[source]
        source: TableauError,
    },
}

/// Name digits `(p, f, j)`: order, explicit stages, implicit stages.
pub fn parse_name(name: &str) -> Result<(u8, usize, usize), RegistryError> {
    let bad = || RegistryError::BadName(name.to_string());
    let rest = name
        .get(..4)
        .filter(|p| p.eq_ignore_ascii_case("imkg"))
        .map(|_| &name[4..])
        .ok_or_else(bad)?;
    let digits: Vec<u32> = rest.chars().take(3).filter_map(|c| c.to_digit(10)).collect();
    let letter = rest.chars().nth(3);
    if digits.len() != 3 || !letter.is_some_and(|c| c.is_ascii_alphabetic()) || rest.len() != 4 {
        return Err(bad());
    }
    let (p, f, j) = (digits[0] as u8, digits[1] as usize, digits[2] as usize);
    if !(2..=3).contains(&p) || f < 2 || j < 1 || j > f {
        return Err(bad());
    }
    Ok((p, f, j))
}

/// Canonical `IMKG232a` spelling of `232a`, `imkg232A`, etc.
pub fn canonical_name(name: &str) -> String {
    let trimmed = name.trim();
    let body = match trimmed.get(..4) {
        Some(p) if p.eq_ignore_ascii_case("imkg") => &trimmed[4..],
        _ => trimmed,
    };
    format!("IMKG{}", body.to_ascii_lowercase())
}

/// A method as printed: vector lengths need not match the convention.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCoefficientRecord {
    pub name: String,
    pub p: u8,
    pub f: usize,
    pub j: usize,
    pub alpha: Vec<f64>,
    /// Not printed for second-order methods.
    pub beta: Option<Vec<f64>>,
    pub alpha_hat: Vec<f64>,
    pub delta_hat: Vec<f64>,
}

impl RawCoefficientRecord {
    pub fn new(
        name: &str,
        alpha: Vec<f64>,
        beta: Option<Vec<f64>>,
        alpha_hat: Vec<f64>,
        delta_hat: Vec<f64>,
    ) -> Result<Self, RegistryError> {
        let (p, f, j) = parse_name(name)?;
        Ok(Self {
            name: name.to_string(),
            p,
            f,
            j,
            alpha,
            beta,
            alpha_hat,
            delta_hat,
        })
    }

    /// A record whose vectors already follow the convention.
    pub fn from_coefficients(name: &str, c: &ImkgCoefficients) -> Result<Self, RegistryError> {
        let (p, ..) = parse_name(name)?;
        let beta = (p == 3).then(|| c.beta().to_vec());
        Self::new(
            name,
            c.alpha().to_vec(),
            beta,
            c.alpha_hat().to_vec(),
            c.delta_hat().to_vec(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NormalizationFlags {
    /// Alignment repairs applied, in order.
    pub repairs: Vec<String>,
    pub recovered_alpha1: Option<f64>,
    /// Violated conditions when the normalized method fails validation.
    pub as_printed_inconsistent: Option<Vec<String>>,
}

impl NormalizationFlags {
    pub fn is_clean(&self) -> bool {
        self.as_printed_inconsistent.is_none()
    }
}

/// Left-pads with zeros or drops leading zeros until `v` has length `len`.
fn align(v: &[f64], len: usize) -> Option<Vec<f64>> {
    if v.len() >= len {
        let cut = v.len() - len;
        v[..cut].iter().all(|x| *x == 0.0).then(|| v[cut..].to_vec())
    } else {
        let mut out = vec![0.0; len - v.len()];
        out.extend_from_slice(v);
        Some(out)
    }
}

fn align_named(
    rec: &RawCoefficientRecord,
    v: &[f64],
    len: usize,
    what: &'static str,
    repairs: &mut Vec<String>,
) -> Result<Vec<f64>, RegistryError> {
    let out = align(v, len).ok_or_else(|| RegistryError::Alignment {
        name: rec.name.clone(),
        what,
        target: len,
    })?;
    if v.len() < len {
        repairs.push(format!("{what}: padded {} leading zero(s)", len - v.len()));
    } else if v.len() > len {
        repairs.push(format!("{what}: dropped {} leading zero(s)", v.len() - len));
    }
    Ok(out)
}

/// Normalized coefficients, flags, and the validation report.
pub fn normalize_raw(
    rec: &RawCoefficientRecord,
) -> Result<(ImkgCoefficients, NormalizationFlags, OrderReport), RegistryError> {
    let q = rec.f;
    let mut flags = NormalizationFlags::default();

    let beta = match (rec.p, &rec.beta) {
        (2, _) => vec![0.0; q - 1],
        (_, Some(b)) => align_named(rec, b, q - 1, "beta", &mut flags.repairs)?,
        (_, None) => {
            return Err(RegistryError::Recovery {
                name: rec.name.clone(),
                reason: "third-order record without beta".into(),
            })
        }
    };
    let beta_hat = beta.clone();

    let mut alpha_hat = rec.alpha_hat.clone();
    if rec.p == 2 && alpha_hat.last() != Some(&1.0) {
        alpha_hat.push(1.0);
        flags.repairs.push("alpha_hat: appended alpha_hat_q = 1".into());
    }
    let alpha_hat = align_named(rec, &alpha_hat, q, "alpha_hat", &mut flags.repairs)?;
    let delta_hat = align_named(rec, &rec.delta_hat, q - 1, "delta_hat", &mut flags.repairs)?;

    let alpha = if rec.alpha.len() == q {
        rec.alpha.clone()
    } else if rec.alpha.len() + 1 == q {
        let family = if rec.p == 3 {
            PolynomialFamily::Kgno
        } else {
            PolynomialFamily::Kgo
        };
        let target = PolynomialTarget::builtin(family, q).map_err(|e| RegistryError::Recovery {
            name: rec.name.clone(),
            reason: e.to_string(),
        })?;
        let prod: f64 = rec.alpha.iter().product();
        let a1 = target.sigma[q - 1] / prod;
        flags.recovered_alpha1 = Some(a1);
        flags
            .repairs
            .push(format!("alpha: recovered alpha_1 = {a1} from the {family} sigma_{q}"));
        std::iter::once(a1).chain(rec.alpha.iter().copied()).collect()
    } else {
        return Err(RegistryError::Alignment {
            name: rec.name.clone(),
            what: "alpha",
            target: q,
        });
    };

    let c = ImkgCoefficients::new(alpha, beta, alpha_hat, beta_hat, delta_hat).map_err(|source| {
        RegistryError::Tableau {
            name: rec.name.clone(),
            source,
        }
    })?;
    let t = c.expand(rec.name.clone());
    let report = if rec.p == 3 {
        check_order3_general(&t, DEFAULT_TOLERANCE)
    } else {
        check_order2_general(&t, DEFAULT_TOLERANCE)
    };
    let mut violated: Vec<String> = report
        .violations()
        .map(|r| format!("{} (residual {:+.3e})", r.id, r.value))
        .collect();
    let nu = c.nonzero_delta_count();
    if nu != rec.j {
        violated.push(format!(
            "implicit stage count {nu} differs from the claimed {}",
            rec.j
        ));
    }
    if !violated.is_empty() {
        flags.as_printed_inconsistent = Some(violated);
    }
    Ok((c, flags, report))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistryEntry {
    pub raw: RawCoefficientRecord,
    pub coefficients: ImkgCoefficients,
    pub flags: NormalizationFlags,
    pub report: OrderReport,
}

impl RegistryEntry {
    pub fn name(&self) -> &str {
        &self.raw.name
    }

    pub fn tableau(&self) -> DoubleTableau {
        self.coefficients.expand(self.raw.name.clone())
    }

    pub fn is_clean(&self) -> bool {
        self.flags.is_clean()
    }
}

/// The properties row printed for a method: I or A, VI, SD.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrintedProperties {
    pub a_stable: bool,
    pub vi: bool,
    pub sd: bool,
}

/// Printed properties, including 243b which has no printed coefficients.
pub fn printed_properties(name: &str) -> Option<PrintedProperties> {
    const ROWS: [(&str, char, char, char); 17] = [
        ("232a", 'A', 'Y', 'Y'),
        ("232b", 'A', 'Y', 'Y'),
        ("242a", 'A', 'N', 'Y'),
        ("242b", 'A', 'Y', 'Y'),
        ("243a", 'A', 'Y', 'Y'),
        ("243b", 'A', 'Y', 'Y'),
        ("252a", 'A', 'N', 'Y'),
        ("252b", 'A', 'N', 'Y'),
        ("253a", 'A', 'Y', 'Y'),
        ("253b", 'A', 'Y', 'Y'),
        ("254a", 'I', 'Y', 'N'),
        ("254b", 'I', 'Y', 'N'),
        ("254c", 'A', 'Y', 'Y'),
        ("342a", 'A', 'N', 'Y'),
        ("343a", 'I', 'Y', 'N'),
        ("353a", 'A', 'Y', 'Y'),
        ("354a", 'I', 'Y', 'N'),
    ];
    let canon = canonical_name(name);
    ROWS.iter()
        .find(|row| canon[4..] == *row.0)
        .map(|&(_, ia, vi, sd)| PrintedProperties {
            a_stable: ia == 'A',
            vi: vi == 'Y',
            sd: sd == 'Y',
        })
}

/// The sixteen printed coefficient records, verbatim.
pub fn raw_records() -> Vec<RawCoefficientRecord> {
    let s2 = 2f64.sqrt();
    let s3 = 3f64.sqrt();
    let a3 = vec![0.5, 0.5, 1.0];
    let a4 = vec![0.25, 1.0 / 3.0, 0.5, 1.0];
    let a5 = vec![0.25, 1.0 / 6.0, 3.0 / 8.0, 0.5, 1.0];
    let lo = (2.0 - s2) / 2.0;
    let hi = (2.0 + s2) / 2.0;
    let p3 = 0.5 + s3 / 6.0;
    let m3 = 0.5 - s3 / 6.0;
    let k342 = (1.0 + s3 / 3.0) / 2.0;
    let rows: Vec<(&str, Vec<f64>, Option<Vec<f64>>, Vec<f64>, Vec<f64>)> = vec![
        ("IMKG232a", a3.clone(), None, vec![0.0, 0.0, (s2 - 1.0) / 2.0], vec![lo, lo]),
        ("IMKG232b", a3, None, vec![0.0, 0.0, -(1.0 + s2) / 2.0], vec![0.0, hi, hi]),
        ("IMKG242a", a4.clone(), None, vec![0.0, 0.0, (s2 - 1.0) / 2.0, 1.0], vec![0.0, 0.0, lo, lo]),
        ("IMKG242b", a4.clone(), None, vec![0.0, 0.0, -(1.0 + s2) / 2.0, 1.0], vec![0.0, 0.0, hi, hi]),
        ("IMKG243a", a4, None, vec![0.0, 1.0 / 6.0, s3 / 6.0, 1.0], vec![0.0, p3, p3, p3]),
        // last δ̂ entry is printed as 2√2/2
        ("IMKG252a", a5.clone(), None, vec![0.0, 0.0, (s2 - 1.0) / 2.0, 1.0], vec![0.0, 0.0, 0.0, lo, 2.0 * s2 / 2.0]),
        ("IMKG252b", a5.clone(), None, vec![0.0, 0.0, -(1.0 + s2) / 2.0, 1.0], vec![0.0, 0.0, 0.0, hi, hi]),
        ("IMKG253a", a5.clone(), None, vec![0.0, GAMMA_MINUS, s3 / 6.0, 1.0], vec![0.0, m3, m3, m3]),
        ("IMKG253b", a5.clone(), None, vec![0.0, GAMMA_PLUS, -s3 / 6.0, 1.0], vec![0.0, p3, p3, p3]),
        ("IMKG254a", a5.clone(), None, vec![0.0, -0.3, 5.0 / 6.0, -1.5], vec![-0.5, 1.0, 1.0, 2.0]),
        ("IMKG254b", a5.clone(), None, vec![0.0, -0.05, 1.25, -0.5], vec![-0.5, 1.0, 1.0, 1.0]),
        ("IMKG254c", a5, None, vec![0.0, 0.05, 5.0 / 36.0, 1.0 / 3.0, 1.0], vec![1.0 / 6.0; 4]),
        (
            "IMKG342a",
            vec![1.0 / 3.0, 1.0 / 3.0, 0.75],
            Some(vec![1.0 / 3.0, 1.0 / 3.0, 0.25]),
            vec![0.0, -(1.0 + s3) / 6.0, -(1.0 + s3) / 6.0, 0.75],
            vec![0.0, k342, k342],
        ),
        (
            "IMKG343a",
            vec![0.25, 2.0 / 3.0, 1.0 / 3.0, 0.75],
            Some(vec![0.0, 1.0 / 3.0, 0.25]),
            vec![0.0, -1.0 / 3.0, -2.0 / 3.0, 0.75],
            vec![-1.0 / 3.0, 1.0, 1.0],
        ),
        (
            "IMKG353a",
            vec![0.25, 2.0 / 3.0, 1.0 / 3.0, 0.75],
            Some(vec![0.0, 0.0, 1.0 / 3.0, 0.25]),
            vec![0.0, -359.0 / 600.0, -559.0 / 600.0, 0.75],
            vec![-1.1678009811335388, 1.265, 1.265],
        ),
        (
            "IMKG354a",
            vec![0.2, 0.2, 2.0 / 3.0, 1.0 / 3.0, 0.75],
            Some(vec![0.0, 0.0, 1.0 / 3.0, 0.25]),
            vec![0.0, 0.0, 11.0 / 30.0, -2.0 / 3.0, 0.75],
            vec![0.0, 0.4, 0.4, 1.0],
        ),
    ];
    rows.into_iter()
        .map(|(name, a, b, ah, dh)| {
            RawCoefficientRecord::new(name, a, b, ah, dh).expect("registry names are well formed")
        })
        .collect()
}

/// All printed methods with their normalization results.
pub fn registry() -> Vec<RegistryEntry> {
    raw_records()
        .into_iter()
        .map(|raw| {
            let (coefficients, flags, report) =
                normalize_raw(&raw).expect("printed records normalize");
            RegistryEntry {
                raw,
                coefficients,
                flags,
                report,
            }
        })
        .collect()
}

/// Case-insensitive lookup; the `IMKG` prefix is optional.
pub fn lookup(name: &str) -> Result<RegistryEntry, RegistryError> {
    let canon = canonical_name(name);
    registry()
        .into_iter()
        .find(|e| e.raw.name == canon)
        .ok_or_else(|| RegistryError::NotFound(name.to_string()))
}

//! Deriving IMKG coefficients from target stability polynomials.

use crate::order::{check_imkg_form, DEFAULT_TOLERANCE};
use crate::stability::implicit_stability_function;
use crate::tableau::{ImkgCoefficients, TableauError};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstructionError {
    #[error("target incompatible with nonzero alpha chain (alpha_{index} = 0)")]
    ZeroAlpha { index: usize },
    #[error("parameter domain error: {formula} divides by zero")]
    Domain { formula: &'static str },
    #[error("expected {expected} free parameters for {what}, got {found}")]
    FreeParameters {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("no built-in {family} target of degree {q}")]
    UnknownTarget { family: PolynomialFamily, q: usize },
    #[error(transparent)]
    Tableau(#[from] TableauError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolynomialFamily {
    Kgo,
    Kgno,
    Custom,
}

impl fmt::Display for PolynomialFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolynomialFamily::Kgo => "KGO",
            PolynomialFamily::Kgno => "KGNO",
            PolynomialFamily::Custom => "custom",
        })
    }
}

/// Target explicit stability polynomial `1 + σ_1 z + ... + σ_q z^q`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialTarget {
    pub family: PolynomialFamily,
    /// `σ_1..σ_q`.
    pub sigma: Vec<f64>,
}

impl PolynomialTarget {
    pub fn custom(sigma: Vec<f64>) -> Self {
        Self {
            family: PolynomialFamily::Custom,
            sigma,
        }
    }

    pub fn kgo3() -> Self {
        Self {
            family: PolynomialFamily::Kgo,
            sigma: vec![1.0, 0.5, 0.25],
        }
    }

    pub fn kgno4() -> Self {
        Self {
            family: PolynomialFamily::Kgno,
            sigma: vec![1.0, 0.5, 1.0 / 6.0, 1.0 / 24.0],
        }
    }

    pub fn kgo5() -> Self {
        Self {
            family: PolynomialFamily::Kgo,
            sigma: vec![1.0, 0.5, 3.0 / 16.0, 1.0 / 32.0, 1.0 / 128.0],
        }
    }

    pub fn kgno5() -> Self {
        Self {
            family: PolynomialFamily::Kgno,
            sigma: vec![1.0, 0.5, 1.0 / 6.0, 1.0 / 30.0, 1.0 / 150.0],
        }
    }

    pub fn builtin(family: PolynomialFamily, q: usize) -> Result<Self, ConstructionError> {
        match (family, q) {
            (PolynomialFamily::Kgo, 3) => Ok(Self::kgo3()),
            (PolynomialFamily::Kgno, 4) => Ok(Self::kgno4()),
            (PolynomialFamily::Kgo, 5) => Ok(Self::kgo5()),
            (PolynomialFamily::Kgno, 5) => Ok(Self::kgno5()),
            _ => Err(ConstructionError::UnknownTarget { family, q }),
        }
    }

    pub fn degree(&self) -> usize {
        self.sigma.len()
    }

    /// `(1, σ_1, ..., σ_q)`.
    pub fn coefficients(&self) -> Vec<f64> {
        std::iter::once(1.0).chain(self.sigma.iter().copied()).collect()
    }
}

/// Inverts the explicit polynomial recursion with `β = 0`: `α_q = σ_1` and
/// `α_{q-k+1} = σ_k / (α_q ⋯ α_{q-k+2})`.
pub fn alpha_from_polynomial(target: &PolynomialTarget) -> Result<Vec<f64>, ConstructionError> {
    let q = target.degree();
    let mut alpha = vec![0.0; q];
    let mut prod = 1.0;
    for k in 1..=q {
        let index = q - k + 1;
        let a = target.sigma[k - 1] / prod;
        if a == 0.0 || !a.is_finite() {
            return Err(ConstructionError::ZeroAlpha { index });
        }
        alpha[index - 1] = a;
        prod *= a;
    }
    Ok(alpha)
}

/// Second-order two-register method.
///
/// `alpha_hat_free` holds `α̂_1..α̂_{q-2}` and `delta_hat` holds
/// `d̂_1..d̂_{q-1}`; then `α̂_q = 1` and `α̂_{q-1} = 1/2 - d̂_{q-1}`.
pub fn derive_imkg2(
    target: &PolynomialTarget,
    alpha_hat_free: &[f64],
    delta_hat: &[f64],
) -> Result<ImkgCoefficients, ConstructionError> {
    let q = target.degree();
    if q < 2 {
        return Err(ConstructionError::FreeParameters {
            what: "target degree",
            expected: 2,
            found: q,
        });
    }
    if alpha_hat_free.len() != q - 2 {
        return Err(ConstructionError::FreeParameters {
            what: "alpha_hat",
            expected: q - 2,
            found: alpha_hat_free.len(),
        });
    }
    if delta_hat.len() != q - 1 {
        return Err(ConstructionError::FreeParameters {
            what: "delta_hat",
            expected: q - 1,
            found: delta_hat.len(),
        });
    }
    let alpha = alpha_from_polynomial(target)?;
    let mut alpha_hat = alpha_hat_free.to_vec();
    alpha_hat.push(0.5 - delta_hat[q - 2]);
    alpha_hat.push(1.0);
    let c = ImkgCoefficients::two_register(alpha, alpha_hat, delta_hat.to_vec())?;
    debug_assert!(check_imkg_form(&c, 2, DEFAULT_TOLERANCE).passes(2));
    Ok(c)
}

/// Third-order `q = 4` method with the degree-4 KGNO explicit polynomial.
///
/// Free parameters are `d̂_2, d̂_3, α_2, β_1`. The order conditions fix
/// `α_3, α_4, β_2, β_3`, `α̂_2..α̂_4` and `β̂`; `α_1` matches `σ_4 = 1/24`;
/// `d̂_1` and `α̂_1` are chosen so that `σ̂_3 = σ̂_4 = 0`, i.e. `deg P̂ <= 2`.
/// Both `σ̂_3` and `σ̂_4` are affine in `(d̂_1, α̂_1)`, so the pair solves a
/// 2×2 linear system.
pub fn derive_imkg3_q4(
    d2: f64,
    d3: f64,
    alpha2: f64,
    beta1: f64,
) -> Result<ImkgCoefficients, ConstructionError> {
    let node = alpha2 + beta1;
    if node == 0.0 {
        return Err(ConstructionError::Domain {
            formula: "alpha_3 = 2/(9(alpha_2 + beta_1))",
        });
    }
    let alpha3 = 2.0 / (9.0 * node);
    let alpha4 = 0.75;
    let beta2 = 2.0 / 3.0 - alpha3;
    let beta3 = 0.25;
    let alpha_hat3 = (2.0 / 9.0 - 2.0 * d3 / 3.0) / node;
    let beta_hat2 = 2.0 / 3.0 - d3 - alpha_hat3;
    let alpha_hat2 = alpha2 - d2;
    if alpha2 == 0.0 {
        return Err(ConstructionError::Domain {
            formula: "alpha_1 = sigma_4/(alpha_2 alpha_3 alpha_4)",
        });
    }
    let alpha1 = (1.0 / 24.0) / (alpha2 * alpha3 * alpha4);

    let build = |d1: f64, alpha_hat1: f64| {
        ImkgCoefficients::new(
            vec![alpha1, alpha2, alpha3, alpha4],
            vec![beta1, beta2, beta3],
            vec![alpha_hat1, alpha_hat2, alpha_hat3, alpha4],
            vec![beta1, beta_hat2, beta3],
            vec![d1, d2, d3],
        )
    };
    let tail = |d1: f64, a1: f64| -> Result<[f64; 2], ConstructionError> {
        let c = build(d1, a1)?;
        let r = implicit_stability_function(c.expand("probe").implicit_part());
        Ok([r.sigma_hat(3), r.sigma_hat(4)])
    };
    let s0 = tail(0.0, 0.0)?;
    let sd = tail(1.0, 0.0)?;
    let sa = tail(0.0, 1.0)?;
    let m = [[sd[0] - s0[0], sa[0] - s0[0]], [sd[1] - s0[1], sa[1] - s0[1]]];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let scale = m.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if det.abs() <= 1e-14 * scale * scale {
        return Err(ConstructionError::Domain {
            formula: "deg P̂ = 2 system for (d_1, alpha_hat_1)",
        });
    }
    let d1 = (-s0[0] * m[1][1] + s0[1] * m[0][1]) / det;
    let alpha_hat1 = (-s0[1] * m[0][0] + s0[0] * m[1][0]) / det;
    Ok(build(d1, alpha_hat1)?)
}

/// Degree of `P̂` with coefficients below `1e-12` treated as zero.
pub fn phat_degree(c: &ImkgCoefficients) -> usize {
    implicit_stability_function(c.expand("imkg").implicit_part()).numerator_degree()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::order::check_order3_general;
    use crate::stability::imkg_explicit_polynomial;

    #[test]
    fn kgo5_alpha_chain() {
        let a = alpha_from_polynomial(&PolynomialTarget::kgo5()).unwrap();
        let want = [0.25, 1.0 / 6.0, 0.375, 0.5, 1.0];
        for (x, y) in a.iter().zip(want) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn sigma2_zero_is_rejected() {
        let t = PolynomialTarget::custom(vec![1.0, 0.0, 0.1]);
        assert_eq!(
            alpha_from_polynomial(&t),
            Err(ConstructionError::ZeroAlpha { index: 2 })
        );
    }

    #[test]
    fn smallest_q() {
        let c = derive_imkg2(&PolynomialTarget::custom(vec![1.0, 0.5]), &[], &[0.5]).unwrap();
        assert_eq!(c.alpha(), &[0.5, 1.0]);
        assert_eq!(c.alpha_hat(), &[0.0, 1.0]);
    }

    #[test]
    fn imkg343a_reconstruction() {
        let c = derive_imkg3_q4(1.0, 1.0, 2.0 / 3.0, 0.0).unwrap();
        let want_alpha = [0.25, 2.0 / 3.0, 1.0 / 3.0, 0.75];
        let want_alpha_hat = [0.0, -1.0 / 3.0, -2.0 / 3.0, 0.75];
        let want_delta = [-1.0 / 3.0, 1.0, 1.0];
        let want_beta = [0.0, 1.0 / 3.0, 0.25];
        let pairs: [(&[f64], &[f64]); 5] = [
            (c.alpha(), &want_alpha),
            (c.alpha_hat(), &want_alpha_hat),
            (c.delta_hat(), &want_delta),
            (c.beta(), &want_beta),
            (c.beta_hat(), &want_beta),
        ];
        for (got, want) in pairs {
            for (x, y) in got.iter().zip(want) {
                assert!((x - y).abs() < 1e-12, "{got:?} vs {want:?}");
            }
        }
        assert_eq!(phat_degree(&c), 2);
        assert!(check_order3_general(&c.expand("x"), 1e-12).passes(3));
        let p = imkg_explicit_polynomial(&c);
        for (x, y) in p.coefficients().iter().zip(PolynomialTarget::kgno4().coefficients()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_node_is_a_domain_error() {
        assert!(matches!(
            derive_imkg3_q4(1.0, 1.0, 0.0, 0.0),
            Err(ConstructionError::Domain { .. })
        ));
    }
}

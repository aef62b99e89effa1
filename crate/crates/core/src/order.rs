//! IMEX order conditions up to third order.
//!
//! Two routes are provided: the tableau-level conditions on `(A, b, c)` and
//! `(Â, b̂, ĉ)`, which apply to any double tableau, and the reduced conditions
//! in terms of the IMKG coefficients. For IMKG methods the two are
//! equivalent; the tableau-level set is the arbiter.

use crate::tableau::{DoubleTableau, ImkgCoefficients};
use nalgebra::DVector;
use std::fmt;

pub const DEFAULT_TOLERANCE: f64 = 1e-10;

/// One order condition evaluated as `value - target`.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub id: String,
    pub order: u8,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderReport {
    pub order_classified: u8,
    pub residuals: Vec<Residual>,
    pub tolerance: f64,
}

impl OrderReport {
    fn from_residuals(residuals: Vec<Residual>, tolerance: f64) -> Self {
        let max_order = residuals.iter().map(|r| r.order).max().unwrap_or(0);
        let mut classified = 0;
        for p in 1..=max_order {
            let ok = residuals
                .iter()
                .filter(|r| r.order <= p)
                .all(|r| r.value.abs() <= tolerance);
            if !ok {
                break;
            }
            classified = p;
        }
        Self {
            order_classified: classified,
            residuals,
            tolerance,
        }
    }

    /// All conditions of order `<= p` hold.
    pub fn passes(&self, p: u8) -> bool {
        self.order_classified >= p
    }

    pub fn violations(&self) -> impl Iterator<Item = &Residual> {
        self.residuals
            .iter()
            .filter(move |r| r.value.abs() > self.tolerance)
    }

    pub fn max_abs_residual(&self) -> f64 {
        self.residuals
            .iter()
            .map(|r| r.value.abs())
            .fold(0.0, f64::max)
    }

    pub fn residual(&self, id: &str) -> Option<f64> {
        self.residuals.iter().find(|r| r.id == id).map(|r| r.value)
    }
}

impl fmt::Display for OrderReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "order {} (tolerance {:e})",
            self.order_classified, self.tolerance
        )?;
        for r in &self.residuals {
            let mark = if r.value.abs() <= self.tolerance {
                "ok"
            } else {
                "FAIL"
            };
            writeln!(f, "  [{}] {:<14} {:+.3e} {}", r.order, r.id, r.value, mark)?;
        }
        Ok(())
    }
}

fn residual(id: impl Into<String>, order: u8, value: f64, target: f64) -> Residual {
    Residual {
        id: id.into(),
        order,
        value: value - target,
    }
}

/// All 22 tableau-level conditions through third order.
fn general_residuals(t: &DoubleTableau, max_order: u8) -> Vec<Residual> {
    let e = t.explicit_part();
    let i = t.implicit_part();
    let weights = [("b", e.b()), ("bhat", i.b())];
    let matrices = [("A", e.a()), ("Ahat", i.a())];
    let nodes = [("c", e.c()), ("chat", i.c())];
    let mut out = Vec::with_capacity(22);

    for (wn, w) in weights {
        out.push(residual(format!("{wn}.1"), 1, w.sum(), 1.0));
    }
    if max_order < 2 {
        return out;
    }
    for (wn, w) in weights {
        for (cn, c) in nodes {
            out.push(residual(format!("{wn}.{cn}"), 2, w.dot(c), 0.5));
        }
    }
    if max_order < 3 {
        return out;
    }
    for (wn, w) in weights {
        for (mn, m) in matrices {
            for (cn, c) in nodes {
                out.push(residual(format!("{wn}.{mn}.{cn}"), 3, w.dot(&(m * c)), 1.0 / 6.0));
            }
        }
    }
    for (wn, w) in weights {
        for (dn, d) in [("C", e.c()), ("Chat", i.c())] {
            for (cn, c) in nodes {
                let dc: DVector<f64> = d.component_mul(c);
                out.push(residual(format!("{wn}.{dn}.{cn}"), 3, w.dot(&dc), 1.0 / 3.0));
            }
        }
    }
    out
}

/// Six conditions: both weight sums and the four `b·c`-type products.
pub fn check_order2_general(t: &DoubleTableau, tol: f64) -> OrderReport {
    OrderReport::from_residuals(general_residuals(t, 2), tol)
}

/// The full 22-condition set through third order.
pub fn check_order3_general(t: &DoubleTableau, tol: f64) -> OrderReport {
    OrderReport::from_residuals(general_residuals(t, 3), tol)
}

/// Largest order in `0..=3` whose complete tableau-level condition set holds.
pub fn classify_order(t: &DoubleTableau, tol: f64) -> u8 {
    check_order3_general(t, tol).order_classified
}

/// Reduced conditions in terms of the IMKG coefficients.
///
/// Order 2 uses the stage-`q` nodes `c_q = α_{q-1} + β_{q-2}` and
/// `ĉ_q = α̂_{q-1} + d̂_{q-1} + β̂_{q-2}`. Order 3 evaluates the last-weight
/// and last-first-column values, both versions of the 2/3 node condition, and
/// the four versions of `ᾰ_{q-1}·(inner node) + 2 d̆_{q-1}/3 = 2/9` obtained by
/// choosing the leading factor from `{α_{q-1} (d̆ = 0), α̂_{q-1} (d̆ = d̂_{q-1})}`
/// and the inner node from `{c_{q-1}, ĉ_{q-1}}`.
pub fn check_imkg_form(c: &ImkgCoefficients, target_order: u8, tol: f64) -> OrderReport {
    let q = c.q() as isize;
    let mut out = Vec::new();
    out.push(residual("alpha_q+beta_q-1", 1, c.al(q) + c.be(q - 1), 1.0));
    out.push(residual(
        "alphahat_q+betahat_q-1",
        1,
        c.alh(q) + c.beh(q - 1),
        1.0,
    ));
    let node = c.al(q - 1) + c.be(q - 2);
    let node_hat = c.alh(q - 1) + c.dh(q - 1) + c.beh(q - 2);
    if target_order >= 2 {
        out.push(residual("alpha_q*c_q", 2, c.al(q) * node, 0.5));
        out.push(residual("alpha_q*chat_q", 2, c.al(q) * node_hat, 0.5));
        out.push(residual("alphahat_q*chat_q", 2, c.alh(q) * node_hat, 0.5));
        out.push(residual("alphahat_q*c_q", 2, c.alh(q) * node, 0.5));
    }
    if target_order >= 3 {
        out.push(residual("alpha_q", 3, c.al(q), 0.75));
        out.push(residual("alphahat_q", 3, c.alh(q), 0.75));
        out.push(residual("beta_q-1", 3, c.be(q - 1), 0.25));
        out.push(residual("betahat_q-1", 3, c.beh(q - 1), 0.25));
        out.push(residual("c_q", 3, node, 2.0 / 3.0));
        out.push(residual("chat_q", 3, node_hat, 2.0 / 3.0));
        let inner = c.al(q - 2) + c.be(q - 3);
        let inner_hat = c.alh(q - 2) + c.dh(q - 2) + c.beh(q - 3);
        let leads = [
            ("alpha", c.al(q - 1), 0.0),
            ("alphahat", c.alh(q - 1), c.dh(q - 1)),
        ];
        for (ln, lead, d) in leads {
            for (inn, inner) in [("c", inner), ("chat", inner_hat)] {
                out.push(residual(
                    format!("{ln}_q-1*{inn}_q-1"),
                    3,
                    lead * inner + 2.0 * d / 3.0,
                    2.0 / 9.0,
                ));
            }
        }
    }
    OrderReport::from_residuals(out, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tableau::ButcherTableau;

    fn coeffs_343a() -> ImkgCoefficients {
        let beta = vec![0.0, 1.0 / 3.0, 0.25];
        ImkgCoefficients::new(
            vec![0.25, 2.0 / 3.0, 1.0 / 3.0, 0.75],
            beta.clone(),
            vec![0.0, -1.0 / 3.0, -2.0 / 3.0, 0.75],
            beta,
            vec![-1.0 / 3.0, 1.0, 1.0],
        )
        .unwrap()
    }

    #[test]
    fn forward_euler_pair_is_first_order() {
        let e = ButcherTableau::from_rows(&[vec![0.0]], &[1.0]).unwrap();
        let t = DoubleTableau::new("euler", e.clone(), e).unwrap();
        let rep = check_order2_general(&t, DEFAULT_TOLERANCE);
        assert_eq!(rep.order_classified, 1);
        assert_eq!(rep.residual("b.c"), Some(-0.5));
    }

    #[test]
    fn zero_tableau_is_order_zero() {
        let z = ButcherTableau::from_rows(&[vec![0.0, 0.0], vec![0.5, 0.0]], &[0.0, 0.0]).unwrap();
        let t = DoubleTableau::new("zero", z.clone(), z).unwrap();
        assert_eq!(classify_order(&t, DEFAULT_TOLERANCE), 0);
    }

    #[test]
    fn imkg343a_compact_form() {
        let rep = check_imkg_form(&coeffs_343a(), 3, 1e-14);
        assert_eq!(rep.order_classified, 3, "{rep}");
        assert_eq!(rep.residuals.len(), 16);
        let general = check_order3_general(&coeffs_343a().expand("343a"), 1e-14);
        assert_eq!(general.residuals.len(), 22);
        assert!(general.passes(3), "{general}");
    }

    #[test]
    fn wrong_last_weight_is_reported() {
        let mut c = coeffs_343a();
        let mut alpha = c.alpha().to_vec();
        alpha[3] = 0.5;
        c = ImkgCoefficients::new(
            alpha,
            c.beta().to_vec(),
            c.alpha_hat().to_vec(),
            c.beta_hat().to_vec(),
            c.delta_hat().to_vec(),
        )
        .unwrap();
        let rep = check_imkg_form(&c, 3, DEFAULT_TOLERANCE);
        assert_eq!(rep.residual("alpha_q"), Some(-0.25));
        assert!(!rep.passes(3));
    }
}

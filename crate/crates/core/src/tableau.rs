//! Butcher tableaux for additive (IMEX) Runge-Kutta methods and the IMKG
//! coefficient parameterization.
//!
//! An IMEX method pairs an explicit tableau `(A, b, c)`, applied to the
//! nonstiff term, with a diagonally implicit tableau `(Â, b̂, ĉ)` applied to
//! the stiff term. Nodes are always the row sums of the stage matrix.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Tolerance on `c = A·1` when nodes are supplied explicitly.
pub const NODE_TOLERANCE: f64 = 1e-14;

/// Tolerance used for the structural FSAL and SD flags.
const FLAG_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TableauError {
    #[error("stage matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("tableau must have at least one stage")]
    Empty,
    #[error("{what} has length {found}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{part} part not lower triangular (entry [{row}][{col}] = {value})")]
    NotLowerTriangular {
        part: &'static str,
        row: usize,
        col: usize,
        value: f64,
    },
    #[error("explicit part not strictly lower triangular (entry [{row}][{col}] = {value})")]
    NotStrictlyLower { row: usize, col: usize, value: f64 },
    #[error("node c[{row}] deviates from the row sum by {deviation:e}")]
    NodeMismatch { row: usize, deviation: f64 },
    #[error("explicit and implicit parts have different stage counts ({explicit} vs {implicit})")]
    StageCountMismatch { explicit: usize, implicit: usize },
    #[error("non-finite coefficient in {what}")]
    NonFinite { what: &'static str },
}

/// A single Runge-Kutta tableau `(A, b, c)` with `c = A·1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: DVector<f64>,
}

impl ButcherTableau {
    /// Builds a diagonally implicit (lower triangular) tableau; nodes are the row sums.
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self, TableauError> {
        if a.nrows() != a.ncols() {
            return Err(TableauError::NotSquare {
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        let r = a.nrows();
        if r == 0 {
            return Err(TableauError::Empty);
        }
        if b.len() != r {
            return Err(TableauError::LengthMismatch {
                what: "b",
                expected: r,
                found: b.len(),
            });
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(TableauError::NonFinite { what: "tableau" });
        }
        for i in 0..r {
            for j in (i + 1)..r {
                if a[(i, j)] != 0.0 {
                    return Err(TableauError::NotLowerTriangular {
                        part: "stage matrix",
                        row: i,
                        col: j,
                        value: a[(i, j)],
                    });
                }
            }
        }
        let c = row_sums(&a);
        Ok(Self { a, b, c })
    }

    /// Builds a tableau with explicitly supplied nodes, which must match the row sums.
    pub fn with_nodes(
        a: DMatrix<f64>,
        b: DVector<f64>,
        c: DVector<f64>,
    ) -> Result<Self, TableauError> {
        let t = Self::new(a, b)?;
        if c.len() != t.stages() {
            return Err(TableauError::LengthMismatch {
                what: "c",
                expected: t.stages(),
                found: c.len(),
            });
        }
        for (row, (given, sum)) in c.iter().zip(t.c.iter()).enumerate() {
            let deviation = (given - sum).abs();
            if deviation > NODE_TOLERANCE {
                return Err(TableauError::NodeMismatch { row, deviation });
            }
        }
        Ok(t)
    }

    pub fn from_rows(rows: &[Vec<f64>], b: &[f64]) -> Result<Self, TableauError> {
        let r = rows.len();
        if let Some(bad) = rows.iter().find(|row| row.len() != r) {
            return Err(TableauError::NotSquare {
                rows: r,
                cols: bad.len(),
            });
        }
        let a = DMatrix::from_fn(r, r, |i, j| rows[i][j]);
        Self::new(a, DVector::from_column_slice(b))
    }

    pub fn stages(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn is_explicit(&self) -> bool {
        (0..self.stages()).all(|i| self.a[(i, i)] == 0.0)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.stages()).map(|i| self.a[(i, i)]).collect()
    }

    /// Nonzero diagonal entries in stage order.
    pub fn implicit_diagonal(&self) -> Vec<f64> {
        self.diagonal().into_iter().filter(|d| *d != 0.0).collect()
    }

    /// `b_j = A[r][j]` for all `j`.
    pub fn last_row_is_weights(&self) -> bool {
        let r = self.stages();
        (0..r).all(|j| (self.b[j] - self.a[(r - 1, j)]).abs() <= FLAG_TOLERANCE)
    }
}

fn row_sums(a: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(a.nrows(), a.row_iter().map(|row| row.sum()))
}

/// An explicit/implicit tableau pair with a common stage count.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubleTableau {
    name: String,
    explicit: ButcherTableau,
    implicit: ButcherTableau,
}

impl DoubleTableau {
    pub fn new(
        name: impl Into<String>,
        explicit: ButcherTableau,
        implicit: ButcherTableau,
    ) -> Result<Self, TableauError> {
        if explicit.stages() != implicit.stages() {
            return Err(TableauError::StageCountMismatch {
                explicit: explicit.stages(),
                implicit: implicit.stages(),
            });
        }
        if let Some(i) = (0..explicit.stages()).find(|&i| explicit.a[(i, i)] != 0.0) {
            return Err(TableauError::NotStrictlyLower {
                row: i,
                col: i,
                value: explicit.a[(i, i)],
            });
        }
        Ok(Self {
            name: name.into(),
            explicit,
            implicit,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn stages(&self) -> usize {
        self.explicit.stages()
    }

    pub fn explicit_part(&self) -> &ButcherTableau {
        &self.explicit
    }

    pub fn implicit_part(&self) -> &ButcherTableau {
        &self.implicit
    }

    /// First same as last: both weight vectors equal the last stage rows.
    pub fn is_fsal(&self) -> bool {
        self.explicit.last_row_is_weights() && self.implicit.last_row_is_weights()
    }

    /// Single diagonal entry: every nonzero implicit diagonal entry is equal.
    pub fn is_sd(&self) -> bool {
        let diag = self.implicit.implicit_diagonal();
        match diag.first() {
            None => true,
            Some(&first) => diag
                .iter()
                .all(|d| (d - first).abs() <= FLAG_TOLERANCE * first.abs().max(1.0)),
        }
    }

    /// Number of nonzero diagonal entries of `Â`.
    pub fn implicit_stage_count(&self) -> usize {
        self.implicit.implicit_diagonal().len()
    }
}

/// The `(α, β, α̂, β̂, δ̂)` parameterization of an FSAL `(q+1)`-stage IMKG method.
///
/// Explicit stage `j+1` depends on stage `j` through `α_j` and on the first
/// stage through `β_{j-1}`; the implicit stage `j+1` (for `j < q`) adds the
/// diagonal entry `d̂_j`. The final stage has no implicit diagonal and its
/// rows double as the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ImkgCoefficients {
    q: usize,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    alpha_hat: Vec<f64>,
    beta_hat: Vec<f64>,
    delta_hat: Vec<f64>,
}

impl ImkgCoefficients {
    pub fn new(
        alpha: Vec<f64>,
        beta: Vec<f64>,
        alpha_hat: Vec<f64>,
        beta_hat: Vec<f64>,
        delta_hat: Vec<f64>,
    ) -> Result<Self, TableauError> {
        let q = alpha.len();
        if q < 2 {
            return Err(TableauError::LengthMismatch {
                what: "alpha (q >= 2)",
                expected: 2,
                found: q,
            });
        }
        let checks: [(&'static str, &Vec<f64>, usize); 4] = [
            ("beta", &beta, q - 1),
            ("alpha_hat", &alpha_hat, q),
            ("beta_hat", &beta_hat, q - 1),
            ("delta_hat", &delta_hat, q - 1),
        ];
        for (what, v, expected) in checks {
            if v.len() != expected {
                return Err(TableauError::LengthMismatch {
                    what,
                    expected,
                    found: v.len(),
                });
            }
        }
        let all = [&alpha, &beta, &alpha_hat, &beta_hat, &delta_hat];
        if all.iter().any(|v| v.iter().any(|x| !x.is_finite())) {
            return Err(TableauError::NonFinite {
                what: "IMKG coefficients",
            });
        }
        Ok(Self {
            q,
            alpha,
            beta,
            alpha_hat,
            beta_hat,
            delta_hat,
        })
    }

    /// Two-register form: `β = β̂ = 0`.
    pub fn two_register(
        alpha: Vec<f64>,
        alpha_hat: Vec<f64>,
        delta_hat: Vec<f64>,
    ) -> Result<Self, TableauError> {
        let n = alpha.len().saturating_sub(1);
        Self::new(alpha, vec![0.0; n], alpha_hat, vec![0.0; n], delta_hat)
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn alpha_hat(&self) -> &[f64] {
        &self.alpha_hat
    }

    pub fn beta_hat(&self) -> &[f64] {
        &self.beta_hat
    }

    pub fn delta_hat(&self) -> &[f64] {
        &self.delta_hat
    }

    // 1-based accessors; indices <= 0 read as zero.
    pub fn al(&self, k: isize) -> f64 {
        one_based(&self.alpha, k)
    }

    pub fn be(&self, k: isize) -> f64 {
        one_based(&self.beta, k)
    }

    pub fn alh(&self, k: isize) -> f64 {
        one_based(&self.alpha_hat, k)
    }

    pub fn beh(&self, k: isize) -> f64 {
        one_based(&self.beta_hat, k)
    }

    pub fn dh(&self, k: isize) -> f64 {
        one_based(&self.delta_hat, k)
    }

    pub fn nonzero_delta_count(&self) -> usize {
        self.delta_hat.iter().filter(|d| **d != 0.0).count()
    }

    /// Expands into the `(q+1)`-stage double tableau.
    pub fn expand(&self, name: impl Into<String>) -> DoubleTableau {
        let q = self.q;
        let r = q + 1;
        let mut a = DMatrix::zeros(r, r);
        let mut ah = DMatrix::zeros(r, r);
        for j in 1..=q {
            // stage j+1 is row j (0-based); alpha_j sits on the subdiagonal
            a[(j, j - 1)] += self.alpha[j - 1];
            ah[(j, j - 1)] += self.alpha_hat[j - 1];
            if j >= 2 {
                a[(j, 0)] += self.beta[j - 2];
                ah[(j, 0)] += self.beta_hat[j - 2];
            }
            if j < q {
                ah[(j, j)] = self.delta_hat[j - 1];
            }
        }
        let b = a.row(q).transpose();
        let bh = ah.row(q).transpose();
        let explicit = ButcherTableau::new(a, b).expect("IMKG explicit part is well formed");
        let implicit = ButcherTableau::new(ah, bh).expect("IMKG implicit part is well formed");
        DoubleTableau::new(name, explicit, implicit).expect("IMKG parts share a stage count")
    }
}

fn one_based(v: &[f64], k: isize) -> f64 {
    if k <= 0 {
        0.0
    } else {
        v.get(k as usize - 1).copied().unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn imkg232a() -> ImkgCoefficients {
        let s2 = 2f64.sqrt();
        ImkgCoefficients::two_register(
            vec![0.5, 0.5, 1.0],
            vec![0.0, (s2 - 1.0) / 2.0, 1.0],
            vec![(2.0 - s2) / 2.0; 2],
        )
        .unwrap()
    }

    fn imkg343a() -> ImkgCoefficients {
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
    fn expand_232a_nodes() {
        let s2 = 2f64.sqrt();
        let t = imkg232a().expand("IMKG232a");
        assert_eq!(t.stages(), 4);
        let c = t.explicit_part().c();
        let ch = t.implicit_part().c();
        let want_c = [0.0, 0.5, 0.5, 1.0];
        let want_ch = [0.0, (2.0 - s2) / 2.0, 0.5, 1.0];
        for i in 0..4 {
            assert!((c[i] - want_c[i]).abs() < 1e-15);
            assert!((ch[i] - want_ch[i]).abs() < 1e-15, "chat[{i}] = {}", ch[i]);
        }
        assert!(t.is_fsal());
        assert!(t.is_sd());
        assert_eq!(t.implicit_stage_count(), 2);
    }

    #[test]
    fn expand_343a_structure() {
        let t = imkg343a().expand("IMKG343a");
        assert_eq!(t.stages(), 5);
        assert!(t.is_fsal());
        assert!(!t.is_sd());
        assert_eq!(t.implicit_stage_count(), 3);
        let ah = t.implicit_part().a();
        // last implicit stage carries no diagonal entry
        assert_eq!(ah[(4, 4)], 0.0);
        assert_eq!(ah[(4, 3)], 0.75);
        assert_eq!(ah[(4, 0)], 0.25);
        assert_eq!(ah[(2, 0)], 0.0);
        assert_eq!(ah[(3, 0)], 1.0 / 3.0);
    }

    #[test]
    fn zero_delta_is_fully_explicit() {
        let c = ImkgCoefficients::two_register(
            vec![0.3, 0.5, 1.0],
            vec![0.2, 0.4, 1.0],
            vec![0.0, 0.0],
        )
        .unwrap();
        let t = c.expand("explicit");
        assert_eq!(t.implicit_stage_count(), 0);
        assert!(t.implicit_part().is_explicit());
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let err = ImkgCoefficients::new(
            vec![0.5, 0.5, 1.0],
            vec![0.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, 0.0],
            vec![0.1, 0.1],
        )
        .unwrap_err();
        assert!(matches!(
            err,
            TableauError::LengthMismatch {
                what: "alpha_hat",
                ..
            }
        ));
    }

    #[test]
    fn supplied_nodes_must_match_row_sums() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.5, 0.0]);
        let b = DVector::from_column_slice(&[0.0, 1.0]);
        assert!(ButcherTableau::with_nodes(
            a.clone(),
            b.clone(),
            DVector::from_column_slice(&[0.0, 0.5])
        )
        .is_ok());
        let err = ButcherTableau::with_nodes(a, b, DVector::from_column_slice(&[0.0, 0.5 + 1e-12]))
            .unwrap_err();
        assert!(matches!(err, TableauError::NodeMismatch { row: 1, .. }));
    }

    #[test]
    fn upper_entries_are_rejected() {
        let err = ButcherTableau::from_rows(&[vec![0.5, 0.1], vec![0.5, 0.5]], &[0.5, 0.5])
            .unwrap_err();
        assert!(matches!(err, TableauError::NotLowerTriangular { .. }));
    }

    #[test]
    fn explicit_part_must_be_strict() {
        let e = ButcherTableau::from_rows(&[vec![0.5]], &[1.0]).unwrap();
        let i = ButcherTableau::from_rows(&[vec![0.5]], &[1.0]).unwrap();
        assert!(matches!(
            DoubleTableau::new("x", e, i),
            Err(TableauError::NotStrictlyLower { .. })
        ));
    }
}

//! Linear stability of the explicit and implicit parts.
//!
//! The explicit part has a polynomial stability function `P(z)`; the
//! diagonally implicit part has `R̂(z) = P̂(z)/Q̂(z)` with
//! `Q̂(z) = ∏ (1 - z d̂_j)` over the nonzero diagonal entries. Both are
//! computed exactly (up to rounding) by forward substitution through the
//! stages with polynomial arithmetic.

use crate::poly::Poly;
use crate::tableau::{ButcherTableau, DoubleTableau, ImkgCoefficients};
use num_complex::Complex64;
use std::fmt;
use thiserror::Error;

/// Coefficient magnitude below which a polynomial coefficient counts as zero.
pub const COEFFICIENT_TOLERANCE: f64 = 1e-12;

/// Slack on `|R̂(iy)| <= 1` for the sampled I-stability test.
pub const SAMPLED_TOLERANCE: f64 = 1e-10;

/// Log-spaced samples per decade for the sampled I-stability test.
pub const SAMPLES_PER_DECADE: usize = 2048;

const SAMPLE_LOG10_MIN: f64 = -4.0;
const SAMPLE_LOG10_MAX: f64 = 6.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StabilityError {
    #[error("explicit stability polynomial requires a strictly lower triangular stage matrix")]
    NotExplicit,
    #[error("imaginary-axis limit {limit} exceeds the degree bound {bound}")]
    BoundViolated { limit: f64, bound: f64 },
}

/// `P(z) = σ_0 + σ_1 z + ... + σ_d z^d` with `σ_0 = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityPolynomial(Poly);

impl StabilityPolynomial {
    pub fn new(coefficients: Vec<f64>) -> Self {
        Self(Poly::new(coefficients))
    }

    pub fn coefficients(&self) -> &[f64] {
        self.0.coefficients()
    }

    pub fn poly(&self) -> &Poly {
        &self.0
    }

    /// Index of the last nonzero coefficient.
    pub fn degree(&self) -> usize {
        self.0.degree_with_tol(0.0)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.0.eval_complex(z)
    }
}

impl fmt::Display for StabilityPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coefficients().iter().map(|c| format!("{c:.16e}")).collect();
        write!(f, "({})", parts.join(", "))
    }
}

/// `R̂(z) = P̂(z) / ∏ (1 - z d̂_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalStabilityFunction {
    numerator: Poly,
    roots: Vec<f64>,
}

impl RationalStabilityFunction {
    pub fn numerator(&self) -> &Poly {
        &self.numerator
    }

    /// Denominator parameters `d̂_j`; each contributes the factor `1 - z d̂_j`.
    pub fn denominator_roots(&self) -> &[f64] {
        &self.roots
    }

    pub fn denominator(&self) -> Poly {
        self.roots
            .iter()
            .fold(Poly::one(), |acc, d| acc.times_one_minus(*d))
    }

    /// `σ̂_k`, zero beyond the stored degree.
    pub fn sigma_hat(&self, k: usize) -> f64 {
        self.numerator.coefficient(k)
    }

    /// Degree of `P̂`, ignoring coefficients below `COEFFICIENT_TOLERANCE`
    /// relative to the largest one (floored at 1).
    pub fn numerator_degree(&self) -> usize {
        self.numerator.degree_with_tol(self.negligible())
    }

    fn negligible(&self) -> f64 {
        let scale = self.numerator.coefficients().iter().fold(1.0f64, |m, c| m.max(c.abs()));
        COEFFICIENT_TOLERANCE * scale
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let q = self
            .roots
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, d| acc * (1.0 - z * d));
        self.numerator.eval_complex(z) / q
    }

    /// `|R̂(∞)| = 0`.
    pub fn vanishes_at_infinity(&self) -> bool {
        self.numerator_degree() < self.roots.len()
    }
}

/// `P(z) = 1 + z bᵀ(I - zA)⁻¹ 1` for strictly lower triangular `A`.
pub fn explicit_polynomial_general(t: &ButcherTableau) -> Result<StabilityPolynomial, StabilityError> {
    if !t.is_explicit() {
        return Err(StabilityError::NotExplicit);
    }
    let r = t.stages();
    let a = t.a();
    let mut stages: Vec<Poly> = Vec::with_capacity(r);
    for i in 0..r {
        let mut sum = Poly::new(Vec::new());
        for (j, y) in stages.iter().enumerate() {
            if a[(i, j)] != 0.0 {
                sum = sum + y.scale(a[(i, j)]);
            }
        }
        stages.push(Poly::one() + sum.shift());
    }
    let mut sum = Poly::new(Vec::new());
    for (j, y) in stages.iter().enumerate() {
        sum = sum + y.scale(t.b()[j]);
    }
    Ok(StabilityPolynomial(trim(Poly::one() + sum.shift())))
}

/// Closed-form explicit polynomial of an IMKG method.
pub fn imkg_explicit_polynomial(c: &ImkgCoefficients) -> StabilityPolynomial {
    let q = c.q() as isize;
    let mut coeffs = vec![1.0];
    let mut prod = 1.0;
    for k in 1..=q {
        if k >= 2 {
            prod *= c.al(q - k + 2);
        }
        coeffs.push(prod * (c.al(q - k + 1) + c.be(q - k)));
    }
    StabilityPolynomial(trim(Poly::new(coeffs)))
}

/// Stability function of a diagonally implicit tableau.
///
/// Stage `i` satisfies `Y_i (1 - z a_ii) = 1 + z Σ_{j<i} a_ij Y_j`. Writing
/// `Y_i = N_i / D_i` with `D_i = ∏_{k<=i} (1 - z a_kk)` keeps every quantity
/// polynomial.
pub fn implicit_stability_function(t: &ButcherTableau) -> RationalStabilityFunction {
    let r = t.stages();
    let a = t.a();
    let diag = t.diagonal();
    // partial[i] = ∏_{k<i} (1 - z a_kk)
    let mut partial = vec![Poly::one()];
    for d in &diag {
        let next = partial.last().unwrap().times_one_minus(*d);
        partial.push(next);
    }
    // ratio(j, i) = D_{i-1} / D_j = ∏_{j<k<i} (1 - z a_kk)
    let ratio = |j: usize, i: usize| {
        ((j + 1)..i).fold(Poly::one(), |acc, k| acc.times_one_minus(diag[k]))
    };
    let mut numerators: Vec<Poly> = Vec::with_capacity(r);
    for i in 0..r {
        let mut sum = Poly::new(Vec::new());
        for (j, n) in numerators.iter().enumerate() {
            if a[(i, j)] != 0.0 {
                sum = sum + (n * &ratio(j, i)).scale(a[(i, j)]);
            }
        }
        numerators.push(partial[i].clone() + sum.shift());
    }
    // P̂ = D_r + z Σ b_j N_j D_r / D_j
    let mut sum = Poly::new(Vec::new());
    for (j, n) in numerators.iter().enumerate() {
        if t.b()[j] != 0.0 {
            sum = sum + (n * &ratio(j, r)).scale(t.b()[j]);
        }
    }
    let numerator = trim(partial[r].clone() + sum.shift());
    RationalStabilityFunction {
        numerator,
        roots: t.implicit_diagonal(),
    }
}

fn trim(p: Poly) -> Poly {
    let mut v = p.into_coefficients();
    while v.len() > 1 && *v.last().unwrap() == 0.0 {
        v.pop();
    }
    Poly::new(v)
}

/// Elementary symmetric polynomials `e_0..e_n` of `xs`.
fn elementary_symmetric(xs: &[f64]) -> Vec<f64> {
    let p = xs.iter().fold(Poly::one(), |acc, x| acc.times_one_minus(-x));
    let mut v = p.into_coefficients();
    v.resize(xs.len() + 1, 0.0);
    v
}

fn e(xs: &[f64], k: usize) -> f64 {
    elementary_symmetric(xs).get(k).copied().unwrap_or(0.0)
}

/// `(σ̂_1, σ̂_2, σ̂_3)` from the IMKG coefficients without forming the tableau.
///
/// Sums over distinct indices run over unordered index sets.
pub fn sigma_hat_closed_form(c: &ImkgCoefficients) -> [f64; 3] {
    let q = c.q() as isize;
    let d: Vec<f64> = (1..q).map(|j| c.dh(j)).collect();
    let head = |n: isize| -> &[f64] { &d[..n.clamp(0, d.len() as isize) as usize] };
    let sum = |n: isize| head(n).iter().sum::<f64>();

    let s1 = c.alh(q) + c.beh(q - 1) - sum(q - 1);
    let s2 = c.alh(q) * (c.alh(q - 1) + c.beh(q - 2)) - c.alh(q) * sum(q - 2)
        - c.beh(q - 1) * sum(q - 1)
        + e(head(q - 1), 2);
    let s3 = c.alh(q) * c.alh(q - 1) * (c.alh(q - 2) + c.beh(q - 3))
        - c.alh(q - 1) * c.alh(q) * sum(q - 3)
        - c.alh(q) * c.beh(q - 2) * sum(q - 2)
        + c.alh(q) * e(head(q - 2), 2)
        + c.beh(q - 1) * e(head(q - 1), 2)
        - e(head(q - 1), 3);
    [s1, s2, s3]
}

/// Largest `y*` with `|P(iy)| <= 1 + 1e-12` on all of `[0, y*]`.
///
/// The excess `|P(iy)|² - 1` is scanned with step `1e-3` up to `deg + 1` and
/// the first crossing is refined by bisection to `tol`. Returns 0 when the
/// polynomial leaves the unit disk immediately.
pub fn imaginary_axis_limit(p: &StabilityPolynomial, tol: f64) -> Result<f64, StabilityError> {
    const THRESHOLD: f64 = 2e-12;
    const STEP: f64 = 1e-3;
    let excess = p.poly().imaginary_axis_excess();
    let leading = excess
        .coefficients()
        .iter()
        .find(|c| c.abs() > 1e-14)
        .copied()
        .unwrap_or(0.0);
    if leading > 0.0 {
        return Ok(0.0);
    }
    let d = p.degree();
    let y_max = d as f64 + 1.0;
    let n = (y_max / STEP).ceil() as usize;
    let mut lo = 0.0;
    let mut hi = None;
    for k in 1..=n {
        let y = k as f64 * STEP;
        if excess.eval(y) > THRESHOLD {
            hi = Some(y);
            break;
        }
        lo = y;
    }
    let limit = match hi {
        None => lo,
        Some(mut hi) => {
            while hi - lo > tol {
                let mid = 0.5 * (lo + hi);
                if excess.eval(mid) > THRESHOLD {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            lo
        }
    };
    if (p.coefficients().get(1).copied().unwrap_or(0.0) - 1.0).abs() < 1e-12 {
        let bound = d as f64 - 1.0;
        if limit > bound + tol.max(1e-6) {
            return Err(StabilityError::BoundViolated { limit, bound });
        }
    }
    Ok(limit)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KgClass {
    Kgo,
    Kgno,
    Other,
}

impl fmt::Display for KgClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KgClass::Kgo => "KGO",
            KgClass::Kgno => "KGNO",
            KgClass::Other => "other",
        })
    }
}

pub fn classify_kg(p: &StabilityPolynomial) -> KgClass {
    let d = p.degree() as f64;
    let Ok(r0) = imaginary_axis_limit(p, 1e-9) else {
        return KgClass::Other;
    };
    if d < 1.0 || r0 == 0.0 {
        return KgClass::Other;
    }
    if (r0 - (d - 1.0)).abs() <= 1e-6 {
        KgClass::Kgo
    } else if (d - 1.0) >= 1.0 && (r0 - ((d - 1.0).powi(2) - 1.0).sqrt()).abs() <= 1e-6 {
        KgClass::Kgno
    } else {
        KgClass::Other
    }
}

/// How I-stability was decided.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IStabilityEvidence {
    /// The `γ_1, γ_2, γ_3 <= 0` test holds.
    Gamma,
    /// The `γ` test fails or does not apply; the sampled supremum decides.
    Sampled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub i_stable: bool,
    pub a_stable: bool,
    pub vi: bool,
    pub l_stable: bool,
    pub sd: bool,
    pub explicit_imag_limit: f64,
    pub kg_class: KgClass,
    pub evidence: IStabilityEvidence,
    /// `None` when some `σ̂_k`, `k >= 4`, is nonzero.
    pub gammas: Option<[f64; 3]>,
    /// Largest sampled `|R̂(iy)|`.
    pub sampled_sup: f64,
    pub phat_degree: usize,
    pub implicit_stages: usize,
}

impl StabilityReport {
    /// I-stable, but only by sampling.
    pub fn caveat(&self) -> bool {
        self.i_stable && self.evidence == IStabilityEvidence::Sampled
    }

    /// `A`, `I`, `I*` (sampled only) or `-`.
    pub fn ia_flag(&self) -> &'static str {
        match (self.a_stable, self.i_stable, self.caveat()) {
            (true, _, false) => "A",
            (true, _, true) => "A*",
            (false, true, false) => "I",
            (false, true, true) => "I*",
            _ => "-",
        }
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "Y"
    } else {
        "N"
    }
}

impl fmt::Display for StabilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "I or A  {}", self.ia_flag())?;
        writeln!(f, "VI      {}", yes_no(self.vi))?;
        writeln!(f, "SD      {}", yes_no(self.sd))?;
        writeln!(f, "L       {}", yes_no(self.l_stable))?;
        writeln!(f, "deg P̂   {} ({} implicit stages)", self.phat_degree, self.implicit_stages)?;
        if let Some(g) = self.gammas {
            writeln!(f, "gamma   {:+.6e} {:+.6e} {:+.6e}", g[0], g[1], g[2])?;
        } else {
            writeln!(f, "gamma   n/a (sigma_hat_4.. nonzero)")?;
        }
        writeln!(f, "sup|R(iy)| {:.12}", self.sampled_sup)?;
        write!(
            f,
            "explicit r0 {:.7} ({})",
            self.explicit_imag_limit, self.kg_class
        )
    }
}

/// `γ_1, γ_2, γ_3` of the sufficient I-stability test, or `None` when some
/// `σ̂_k` with `k >= 4` is nonzero.
pub fn gamma_test(r: &RationalStabilityFunction) -> Option<[f64; 3]> {
    if r.numerator_degree() > 3 {
        return None;
    }
    let sq: Vec<f64> = r.roots.iter().map(|d| d * d).collect();
    let es = elementary_symmetric(&sq);
    let get = |k: usize| es.get(k).copied().unwrap_or(0.0);
    let (s1, s2, s3) = (r.sigma_hat(1), r.sigma_hat(2), r.sigma_hat(3));
    Some([
        s1 * s1 - 2.0 * s2 - get(1),
        s2 * s2 - 2.0 * s1 * s3 - get(2),
        s3 * s3 - get(3),
    ])
}

/// `sup |R̂(iy)|` over a log grid of `y` in `[1e-4, 1e6]`.
pub fn sampled_imaginary_sup(r: &RationalStabilityFunction) -> f64 {
    let decades = SAMPLE_LOG10_MAX - SAMPLE_LOG10_MIN;
    let n = (decades as usize) * SAMPLES_PER_DECADE;
    (0..=n)
        .map(|k| {
            let y = 10f64.powf(SAMPLE_LOG10_MIN + decades * k as f64 / n as f64);
            r.eval(Complex64::new(0.0, y)).norm()
        })
        .fold(0.0, f64::max)
}

/// Stability classification of a double tableau.
pub fn stability_report_tableau(t: &DoubleTableau) -> Result<StabilityReport, StabilityError> {
    let p = explicit_polynomial_general(t.explicit_part())?;
    let r = implicit_stability_function(t.implicit_part());
    let gammas = gamma_test(&r);
    let sampled_sup = sampled_imaginary_sup(&r);
    let gamma_ok = gammas.is_some_and(|g| g.iter().all(|v| *v <= COEFFICIENT_TOLERANCE));
    let (i_stable, evidence) = if gamma_ok {
        (true, IStabilityEvidence::Gamma)
    } else {
        (sampled_sup <= 1.0 + SAMPLED_TOLERANCE, IStabilityEvidence::Sampled)
    };
    let a_stable = i_stable && t.implicit_part().diagonal().iter().all(|d| *d >= 0.0);
    let vi = r.vanishes_at_infinity();
    Ok(StabilityReport {
        i_stable,
        a_stable,
        vi,
        l_stable: vi && i_stable,
        sd: t.is_sd(),
        explicit_imag_limit: imaginary_axis_limit(&p, 1e-8)?,
        kg_class: classify_kg(&p),
        evidence,
        gammas,
        sampled_sup,
        phat_degree: r.numerator_degree(),
        implicit_stages: r.roots.len(),
    })
}

pub fn stability_report(c: &ImkgCoefficients) -> StabilityReport {
    stability_report_tableau(&c.expand("imkg")).expect("IMKG explicit part is strictly lower")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        let n = a.len().max(b.len());
        (0..n).all(|k| {
            let x = a.get(k).copied().unwrap_or(0.0);
            let y = b.get(k).copied().unwrap_or(0.0);
            (x - y).abs() <= tol
        })
    }

    fn imkg232a() -> ImkgCoefficients {
        let s2 = 2f64.sqrt();
        ImkgCoefficients::two_register(
            vec![0.5, 0.5, 1.0],
            vec![0.0, (s2 - 1.0) / 2.0, 1.0],
            vec![(2.0 - s2) / 2.0; 2],
        )
        .unwrap()
    }

    #[test]
    fn explicit_euler_polynomial() {
        let t = ButcherTableau::from_rows(&[vec![0.0]], &[1.0]).unwrap();
        let p = explicit_polynomial_general(&t).unwrap();
        assert_eq!(p.coefficients(), &[1.0, 1.0]);
        assert_eq!(imaginary_axis_limit(&p, 1e-8).unwrap(), 0.0);
        assert_eq!(classify_kg(&p), KgClass::Other);
    }

    #[test]
    fn implicit_midpoint() {
        let t = ButcherTableau::from_rows(&[vec![0.5]], &[1.0]).unwrap();
        let r = implicit_stability_function(&t);
        assert!(close(r.numerator().coefficients(), &[1.0, 0.5], 1e-15));
        assert_eq!(r.denominator_roots(), &[0.5]);
        let z = Complex64::new(-3.0, 0.7);
        let want = (1.0 + z / 2.0) / (1.0 - z / 2.0);
        assert!((r.eval(z) - want).norm() < 1e-15);
    }

    #[test]
    fn imkg232a_implicit_function() {
        let c = imkg232a();
        let r = implicit_stability_function(c.expand("a").implicit_part());
        let s2 = 2f64.sqrt();
        assert!(close(r.numerator().coefficients(), &[1.0, s2 - 1.0, 0.0, 0.0], 1e-15));
        assert_eq!(r.numerator_degree(), 1);
        assert!(r.vanishes_at_infinity());
        let closed = sigma_hat_closed_form(&c);
        assert!(close(&closed, &[s2 - 1.0, 0.0, 0.0], 1e-15));
        let g = gamma_test(&r).unwrap();
        assert!(g[0].abs() < 1e-15 && g[1] < 0.0 && g[2].abs() < 1e-15, "{g:?}");
    }

    #[test]
    fn kgo3_limit_is_two() {
        let p = StabilityPolynomial::new(vec![1.0, 1.0, 0.5, 0.25]);
        let r0 = imaginary_axis_limit(&p, 1e-8).unwrap();
        assert!((r0 - 2.0).abs() < 1e-6, "{r0}");
        assert_eq!(classify_kg(&p), KgClass::Kgo);
    }

    #[test]
    fn rk4_limit() {
        let p = StabilityPolynomial::new(vec![1.0, 1.0, 0.5, 1.0 / 6.0, 1.0 / 24.0]);
        let r0 = imaginary_axis_limit(&p, 1e-8).unwrap();
        assert!((r0 - 8f64.sqrt()).abs() < 1e-6, "{r0}");
        assert_eq!(classify_kg(&p), KgClass::Kgno);
    }

    #[test]
    fn closed_form_explicit_matches_tableau() {
        let c = imkg232a();
        let a = imkg_explicit_polynomial(&c);
        let b = explicit_polynomial_general(c.expand("a").explicit_part()).unwrap();
        assert!(close(a.coefficients(), &[1.0, 1.0, 0.5, 0.25], 1e-15));
        assert!(close(a.coefficients(), b.coefficients(), 1e-15));
    }

    #[test]
    fn imkg232a_report() {
        let rep = stability_report(&imkg232a());
        assert!(rep.i_stable && rep.a_stable && rep.vi && rep.l_stable && rep.sd);
        assert_eq!(rep.evidence, IStabilityEvidence::Gamma);
        assert_eq!(rep.ia_flag(), "A");
        assert_eq!(rep.kg_class, KgClass::Kgo);
    }

    #[test]
    fn elementary_symmetric_values() {
        assert_eq!(elementary_symmetric(&[1.0, 2.0, 3.0]), vec![1.0, 6.0, 11.0, 6.0]);
    }
}

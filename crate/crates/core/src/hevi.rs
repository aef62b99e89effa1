//! Stability of IMEX methods on the HEVI test equation
//! `u' = -i k_x N u - i k_z S u`, with the horizontal part treated
//! explicitly and the vertical part implicitly.
//!
//! One step multiplies `u` by the 3×3 matrix `R_H(x, z)`, `x = Δt k_x`,
//! `z = Δt k_z`. The H-stability region is the set of `(x, z)` where every
//! eigenvalue of `R_H` has modulus at most one.

use crate::tableau::DoubleTableau;
use nalgebra::Matrix3;
use num_complex::Complex64;
use rayon::prelude::*;
use std::io::Write;
use thiserror::Error;

pub type CMatrix3 = Matrix3<Complex64>;

/// Default slack on `ρ <= 1`.
pub const DEFAULT_RHO_TOLERANCE: f64 = 1e-8;

/// Extra `z` samples beyond the uniform grid, probing `z → ∞`.
pub const DEFAULT_EXTRA_Z: [f64; 3] = [100.0, 1e3, 1e6];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeviError {
    #[error("singular stage matrix at (x, z) = ({x}, {z})")]
    Singular { x: f64, z: f64 },
    #[error("grid reaches x = {x_max}, which does not cover n0 = {n0}")]
    NotCovered { n0: f64, x_max: f64 },
    #[error("explicit axis unstable before n0 (rho = {rho} at x = {x})")]
    ExplicitAxisUnstable { x: f64, rho: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Horizontal coupling `N`: first and third components.
pub fn n_matrix() -> CMatrix3 {
    let mut m = CMatrix3::zeros();
    m[(0, 2)] = c(1.0);
    m[(2, 0)] = c(1.0);
    m
}

/// Vertical coupling `S`: second and third components.
pub fn s_matrix() -> CMatrix3 {
    let mut m = CMatrix3::zeros();
    m[(1, 2)] = c(1.0);
    m[(2, 1)] = c(1.0);
    m
}

/// `R_H = I - i (bᵀ⊗xN + b̂ᵀ⊗zS)(I + A⊗ixN + Â⊗izS)⁻¹(1⊗I)`.
///
/// The inner matrix is block lower triangular, so the solve is a block
/// forward substitution with one 3×3 inverse per stage.
pub fn hstability_matrix(t: &DoubleTableau, x: f64, z: f64) -> Result<CMatrix3, HeviError> {
    let r = t.stages();
    let a = t.explicit_part().a();
    let ah = t.implicit_part().a();
    let ix_n = n_matrix() * Complex64::new(0.0, x);
    let iz_s = s_matrix() * Complex64::new(0.0, z);
    let id = CMatrix3::identity();
    let mut y: Vec<CMatrix3> = Vec::with_capacity(r);
    for i in 0..r {
        let mut rhs = id;
        for (j, yj) in y.iter().enumerate() {
            let coupling = ix_n * c(a[(i, j)]) + iz_s * c(ah[(i, j)]);
            rhs -= coupling * yj;
        }
        let yi = if ah[(i, i)] == 0.0 {
            rhs
        } else {
            let m = id + iz_s * c(ah[(i, i)]);
            m.try_inverse().ok_or(HeviError::Singular { x, z })? * rhs
        };
        y.push(yi);
    }
    let b = t.explicit_part().b();
    let bh = t.implicit_part().b();
    let mut sum = CMatrix3::zeros();
    for (j, yj) in y.iter().enumerate() {
        sum += (ix_n * c(b[j]) + iz_s * c(bh[j])) * yj;
    }
    Ok(id - sum)
}

/// Roots of the monic cubic `λ³ + c2 λ² + c1 λ + c0`.
fn cubic_roots(c2: Complex64, c1: Complex64, c0: Complex64) -> [Complex64; 3] {
    let shift = -c2 / 3.0;
    // λ = μ + shift gives μ³ + p μ + q
    let p = c1 - c2 * c2 / 3.0;
    let q = c2 * c2 * c2 * (2.0 / 27.0) - c2 * c1 / 3.0 + c0;
    let disc = (q * q / 4.0 + p * p * p / 27.0).sqrt();
    let u1 = -q / 2.0 + disc;
    let u2 = -q / 2.0 - disc;
    let u = if u1.norm() >= u2.norm() { u1 } else { u2 };
    let omega = Complex64::new(-0.5, 3f64.sqrt() / 2.0);
    let mut roots = [shift; 3];
    if u.norm() > 0.0 {
        let cbrt = u.powf(1.0 / 3.0);
        let mut w = c(1.0);
        for root in roots.iter_mut() {
            let s = cbrt * w;
            *root = s - p / (s * 3.0) + shift;
            w *= omega;
        }
    }
    // Newton polish on the original cubic
    for root in roots.iter_mut() {
        for _ in 0..3 {
            let f = ((*root + c2) * *root + c1) * *root + c0;
            let df = (*root * 3.0 + c2 * 2.0) * *root + c1;
            if df.norm() == 0.0 {
                break;
            }
            let step = f / df;
            if !step.is_finite() {
                break;
            }
            *root -= step;
        }
    }
    roots
}

/// Eigenvalues of a 3×3 complex matrix from its characteristic cubic.
pub fn eigenvalues3(m: &CMatrix3) -> [Complex64; 3] {
    let tr = m.trace();
    let minors = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)] + m[(0, 0)] * m[(2, 2)]
        - m[(0, 2)] * m[(2, 0)]
        + m[(1, 1)] * m[(2, 2)]
        - m[(1, 2)] * m[(2, 1)];
    let det = m.determinant();
    cubic_roots(-tr, minors, -det)
}

fn inf_norm(m: &CMatrix3) -> f64 {
    (0..3)
        .map(|i| (0..3).map(|j| m[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `lim ‖M^n‖^{1/n}` by normalized repeated squaring.
pub fn gelfand_radius(m: &CMatrix3) -> f64 {
    const SQUARINGS: i32 = 50;
    let s0 = inf_norm(m);
    if s0 == 0.0 || !s0.is_finite() {
        return s0;
    }
    let mut b = m / c(s0);
    let mut log = s0.ln();
    let mut weight = 0.5;
    for _ in 0..SQUARINGS {
        let sq = b * b;
        let n = inf_norm(&sq);
        if n == 0.0 {
            return 0.0;
        }
        log += weight * n.ln();
        b = sq / c(n);
        weight *= 0.5;
    }
    log.exp()
}

/// Largest eigenvalue modulus.
///
/// Closed-form cubic roots; when the dominant root has a close neighbour the
/// root is ill-conditioned and the Gelfand estimate is used instead.
pub fn spectral_radius(m: &CMatrix3) -> f64 {
    if m.iter().any(|v| !v.is_finite()) {
        return f64::INFINITY;
    }
    let roots = eigenvalues3(m);
    let (k, top) = roots
        .iter()
        .enumerate()
        .map(|(k, r)| (k, r.norm()))
        .fold((0, -1.0), |acc, v| if v.1 > acc.1 { v } else { acc });
    let scale = top.max(f64::MIN_POSITIVE);
    let clustered = roots
        .iter()
        .enumerate()
        .any(|(j, r)| j != k && (r - roots[k]).norm() < 1e-3 * scale);
    if clustered || !top.is_finite() {
        gelfand_radius(m)
    } else {
        top
    }
}

/// Sampled `ρ(R_H)` over a rectangle of scaled wave numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct HStabilityGrid {
    x: Vec<f64>,
    z: Vec<f64>,
    /// Row-major in `x`: `rho[ix * z.len() + iz]`.
    rho: Vec<f64>,
}

impl HStabilityGrid {
    pub fn x_grid(&self) -> &[f64] {
        &self.x
    }

    pub fn z_grid(&self) -> &[f64] {
        &self.z
    }

    pub fn rho(&self, ix: usize, iz: usize) -> f64 {
        self.rho[ix * self.z.len() + iz]
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn max_rho(&self) -> f64 {
        self.rho.iter().copied().fold(0.0, f64::max)
    }

    /// `(x, z, ρ)` in `x`-major order.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.x.iter().enumerate().flat_map(move |(ix, &x)| {
            self.z
                .iter()
                .enumerate()
                .map(move |(iz, &z)| (x, z, self.rho(ix, iz)))
        })
    }

    fn column_stable(&self, ix: usize, tol: f64) -> bool {
        (0..self.z.len()).all(|iz| self.rho(ix, iz) <= 1.0 + tol)
    }

    /// Largest sampled `x` such that every column up to and including it is
    /// stable for all sampled `z`.
    pub fn stable_column_width(&self, tol: f64) -> f64 {
        let mut width = 0.0;
        for (ix, &x) in self.x.iter().enumerate() {
            if !self.column_stable(ix, tol) {
                break;
            }
            width = x;
        }
        width
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,z,rho")?;
        for (x, z, rho) in self.points() {
            writeln!(out, "{x:.16e},{z:.16e},{rho:.16e}")?;
        }
        Ok(())
    }
}

/// `n` uniform samples of `[0, max]`; a single sample is `0`.
pub fn uniform(max: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![0.0];
    }
    (0..n).map(|k| max * k as f64 / (n - 1) as f64).collect()
}

/// Scans `[0, x_max] × ([0, z_max] ∪ extra_z)`; singular points are stored as `+∞`.
pub fn scan_grid(
    t: &DoubleTableau,
    x_max: f64,
    z_max: f64,
    nx: usize,
    nz: usize,
    extra_z: &[f64],
) -> Result<HStabilityGrid, HeviError> {
    if nx == 0 || nz == 0 {
        return Err(HeviError::InvalidGrid("sample counts must be positive".into()));
    }
    if !(x_max >= 0.0 && z_max >= 0.0) {
        return Err(HeviError::InvalidGrid("extents must be nonnegative".into()));
    }
    let x = uniform(x_max, nx);
    let mut z = uniform(z_max, nz);
    z.extend(extra_z.iter().copied().filter(|v| *v > z_max));
    z.sort_by(f64::total_cmp);
    z.dedup();
    Ok(scan_points(t, x, z))
}

/// Evaluates `ρ` on an arbitrary tensor grid.
pub fn scan_points(t: &DoubleTableau, x: Vec<f64>, z: Vec<f64>) -> HStabilityGrid {
    let rho: Vec<f64> = x
        .par_iter()
        .flat_map_iter(|&xv| {
            z.iter().map(move |&zv| match hstability_matrix(t, xv, zv) {
                Ok(m) => spectral_radius(&m),
                Err(_) => f64::INFINITY,
            })
        })
        .collect();
    HStabilityGrid { x, z, rho }
}

/// Builds a grid from precomputed samples.
pub fn grid_from_samples(x: Vec<f64>, z: Vec<f64>, rho: Vec<f64>) -> Result<HStabilityGrid, HeviError> {
    if rho.len() != x.len() * z.len() {
        return Err(HeviError::InvalidGrid(format!(
            "{} samples for a {}x{} grid",
            rho.len(),
            x.len(),
            z.len()
        )));
    }
    Ok(HStabilityGrid { x, z, rho })
}

const COVER_SLACK: f64 = 1e-12;

fn check_cover(g: &HStabilityGrid, n0: f64) -> Result<(), HeviError> {
    let x_max = g.x.last().copied().unwrap_or(0.0);
    if x_max + COVER_SLACK < n0 {
        return Err(HeviError::NotCovered { n0, x_max });
    }
    Ok(())
}

/// Every sampled point with `x <= n0` has `ρ <= 1 + tol`.
pub fn region_t_contained(g: &HStabilityGrid, n0: f64, tol: f64) -> Result<bool, HeviError> {
    check_cover(g, n0)?;
    Ok(g.x
        .iter()
        .enumerate()
        .filter(|(_, &x)| x <= n0 + COVER_SLACK)
        .all(|(ix, _)| g.column_stable(ix, tol)))
}

/// Smallest sampled `γ` such that every unstable sample with `x <= n0` lies
/// below the line `z = γ x`.
///
/// Returns `Ok(None)` when some column `x <= n0` is still unstable at the
/// largest sampled `z`, or when the `x = 0` column is unstable.
pub fn min_gamma(g: &HStabilityGrid, n0: f64, tol: f64) -> Result<Option<f64>, HeviError> {
    check_cover(g, n0)?;
    let z0 = g.z.iter().position(|&z| z == 0.0);
    let last = g.z.len() - 1;
    let mut gamma: f64 = 0.0;
    for (ix, &x) in g.x.iter().enumerate() {
        if x > n0 + COVER_SLACK {
            break;
        }
        if let Some(iz0) = z0 {
            let rho = g.rho(ix, iz0);
            if rho > 1.0 + tol {
                return Err(HeviError::ExplicitAxisUnstable { x, rho });
            }
        }
        let top_unstable = (0..g.z.len()).rev().find(|&iz| g.rho(ix, iz) > 1.0 + tol);
        if let Some(iz) = top_unstable {
            if iz == last || x == 0.0 {
                return Ok(None);
            }
            gamma = gamma.max(g.z[iz] / x);
        }
    }
    Ok(Some(gamma))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionQueryResult {
    pub n0: f64,
    pub t_contained: bool,
    /// `None` when no cone works or the explicit axis is unstable below `n0`.
    pub gamma_min: Option<f64>,
    pub explicit_axis_stable: bool,
    pub tolerance: f64,
}

pub fn region_query(g: &HStabilityGrid, n0: f64, tol: f64) -> Result<RegionQueryResult, HeviError> {
    let t_contained = region_t_contained(g, n0, tol)?;
    let (gamma_min, explicit_axis_stable) = match min_gamma(g, n0, tol) {
        Ok(gm) => (gm, true),
        Err(HeviError::ExplicitAxisUnstable { .. }) => (None, false),
        Err(e) => return Err(e),
    };
    Ok(RegionQueryResult {
        n0,
        t_contained,
        gamma_min,
        explicit_axis_stable,
        tolerance: tol,
    })
}

//! Single-column nonhydrostatic acoustic model.
//!
//! Interfaces `i = 0..=L` run from the model top to the surface and carry
//! `w` and `φ`; midpoints `k = 0..L` carry `Θ_k = (∂π/∂η)_k θ_v` and
//! `∂π/∂η`. Pressure follows from the equation of state written through the
//! geopotential thickness, `p_k = (-(∂φ/∂η)_k / (R Θ_k))^{1/(κ-1)}`, with the
//! reference pressure dropped from the Exner function. The vertical forcing is
//! `w' = -g (1 - μ)`, `φ' = g w`, where `μ = ∂p/∂π` at interfaces.

use super::tridiagonal::solve_tridiagonal;
use super::ProblemError;
use crate::integrator::{
    newton_iterate, IntegratorError, SplitProblem, StageContext, StageSolution, StageSolver,
};
use nalgebra::DMatrix;
use std::io::Write;

pub const GRAVITY: f64 = 9.80616;
pub const R_DRY: f64 = 287.04;
pub const CP_DRY: f64 = 1004.64;
pub const PI_TOP: f64 = 225.0;
pub const SURFACE_PRESSURE: f64 = 1e5;

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnBackground {
    layers: usize,
    /// Interface coordinates, `η_top` to 1.
    eta: Vec<f64>,
    d_eta: f64,
    /// `∂π/∂η` on midpoints.
    dpi: Vec<f64>,
    pi_interface: Vec<f64>,
    pi_mid: Vec<f64>,
    theta: Vec<f64>,
    pub g: f64,
    pub r_d: f64,
    pub kappa: f64,
    pub pi_top: f64,
}

impl ColumnBackground {
    /// Isothermal column with `π = p_s η`, so `∂π/∂η = p_s` on every layer.
    pub fn isothermal(layers: usize, temperature: f64) -> Result<Self, ProblemError> {
        if layers == 0 {
            return Err(ProblemError::Background("at least one layer is required".into()));
        }
        if !(temperature > 0.0) {
            return Err(ProblemError::Background(format!(
                "temperature must be positive, got {temperature}"
            )));
        }
        let eta_top = PI_TOP / SURFACE_PRESSURE;
        let d_eta = (1.0 - eta_top) / layers as f64;
        let dpi = vec![SURFACE_PRESSURE; layers];
        Self::from_profile(eta_top, d_eta, dpi, |_, _| temperature)
    }

    /// General background from `∂π/∂η` and a temperature profile `T(k, π_mid)`.
    pub fn from_profile(
        eta_top: f64,
        d_eta: f64,
        dpi: Vec<f64>,
        temperature: impl Fn(usize, f64) -> f64,
    ) -> Result<Self, ProblemError> {
        let layers = dpi.len();
        if layers == 0 || !(d_eta > 0.0) {
            return Err(ProblemError::Background("empty layer structure".into()));
        }
        if let Some(k) = dpi.iter().position(|v| !(*v > 0.0)) {
            return Err(ProblemError::Background(format!(
                "dpi/deta must be positive (layer {k})"
            )));
        }
        let kappa = R_DRY / CP_DRY;
        let eta: Vec<f64> = (0..=layers).map(|i| eta_top + i as f64 * d_eta).collect();
        let mut pi_interface = Vec::with_capacity(layers + 1);
        pi_interface.push(PI_TOP);
        for k in 0..layers {
            pi_interface.push(pi_interface[k] + dpi[k] * d_eta);
        }
        let pi_mid: Vec<f64> = (0..layers)
            .map(|k| 0.5 * (pi_interface[k] + pi_interface[k + 1]))
            .collect();
        let mut theta = Vec::with_capacity(layers);
        for k in 0..layers {
            let t = temperature(k, pi_mid[k]);
            if !(t > 0.0) {
                return Err(ProblemError::Background(format!(
                    "temperature must be positive (layer {k})"
                )));
            }
            theta.push(dpi[k] * t * pi_mid[k].powf(-kappa));
        }
        Ok(Self {
            layers,
            eta,
            d_eta,
            dpi,
            pi_interface,
            pi_mid,
            theta,
            g: GRAVITY,
            r_d: R_DRY,
            kappa,
            pi_top: PI_TOP,
        })
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn dpi(&self) -> &[f64] {
        &self.dpi
    }

    pub fn pi_interface(&self) -> &[f64] {
        &self.pi_interface
    }

    pub fn pi_mid(&self) -> &[f64] {
        &self.pi_mid
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// `φ` with `p = π` on every layer and `φ = 0` at the surface.
    pub fn hydrostatic_phi(&self) -> Vec<f64> {
        let l = self.layers;
        let mut phi = vec![0.0; l + 1];
        for k in (0..l).rev() {
            let thickness = self.r_d * self.theta[k] * self.pi_mid[k].powf(self.kappa - 1.0) * self.d_eta;
            phi[k] = phi[k + 1] + thickness;
        }
        phi
    }

    /// `(w, φ) = (0, hydrostatic φ)`.
    pub fn hydrostatic_state(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.layers + 1];
        x.extend(self.hydrostatic_phi());
        x
    }

    fn thickness_ratio(&self, phi: &[f64], k: usize) -> Result<(f64, f64), IntegratorError> {
        let d = (phi[k] - phi[k + 1]) / self.d_eta;
        let arg = d / (self.r_d * self.theta[k]);
        if !(arg > 0.0) || !arg.is_finite() {
            return Err(IntegratorError::Domain(format!(
                "nonpositive geopotential thickness in layer {k}"
            )));
        }
        Ok((d, arg))
    }

    /// Midpoint pressures from `φ`.
    pub fn pressure(&self, phi: &[f64]) -> Result<Vec<f64>, IntegratorError> {
        let e = 1.0 / (1.0 - self.kappa);
        (0..self.layers)
            .map(|k| {
                let (_, arg) = self.thickness_ratio(phi, k)?;
                // exponent 1/(κ-1) < 0
                Ok(1.0 / arg.powf(e))
            })
            .collect()
    }

    fn mu_denominator(&self, i: usize) -> f64 {
        if i == 0 {
            self.pi_mid[0] - self.pi_top
        } else {
            self.pi_mid[i] - self.pi_mid[i - 1]
        }
    }

    /// `μ` at interfaces `0..L`; the bottom entry is masked and reported as 1.
    pub fn mu(&self, p: &[f64]) -> Vec<f64> {
        let l = self.layers;
        let mut mu = vec![1.0; l + 1];
        for (i, m) in mu.iter_mut().enumerate().take(l) {
            let above = if i == 0 { self.pi_top } else { p[i - 1] };
            *m = (p[i] - above) / self.mu_denominator(i);
        }
        mu
    }

    /// `μ` and the tridiagonal `∂μ/∂φ` as `(sub, diag, sup)`; row `L` is zero.
    pub fn mu_jacobian(&self, phi: &[f64]) -> Result<(Vec<f64>, [Vec<f64>; 3]), IntegratorError> {
        let l = self.layers;
        let p = self.pressure(phi)?;
        // ∂p_k/∂φ_k = -∂p_k/∂φ_{k+1}
        let mut dp = Vec::with_capacity(l);
        for (k, pk) in p.iter().enumerate() {
            let (d, _) = self.thickness_ratio(phi, k)?;
            dp.push(pk / ((self.kappa - 1.0) * d * self.d_eta));
        }
        let mut sub = vec![0.0; l];
        let mut diag = vec![0.0; l + 1];
        let mut sup = vec![0.0; l];
        for i in 0..l {
            let den = self.mu_denominator(i);
            let above = if i == 0 { 0.0 } else { dp[i - 1] };
            if i > 0 {
                sub[i - 1] = -above / den;
            }
            diag[i] = (dp[i] + above) / den;
            sup[i] = -dp[i] / den;
        }
        Ok((self.mu(&p), [sub, diag, sup]))
    }

    /// `s(w, φ) = (-g (1 - μ), g w)` with the bottom `w` tendency masked.
    pub fn tendency(&self, x: &[f64], out: &mut [f64]) -> Result<(), IntegratorError> {
        let n = self.layers + 1;
        let (w, phi) = x.split_at(n);
        let mu = self.mu(&self.pressure(phi)?);
        for i in 0..n {
            out[i] = if i + 1 == n { 0.0 } else { -self.g * (1.0 - mu[i]) };
            out[n + i] = self.g * w[i];
        }
        Ok(())
    }

    /// Dense `∂s/∂(w, φ)`.
    pub fn tendency_jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>, IntegratorError> {
        let n = self.layers + 1;
        let (_, [sub, diag, sup]) = self.mu_jacobian(&x[n..])?;
        let mut j = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..self.layers {
            j[(i, n + i)] = self.g * diag[i];
            if i > 0 {
                j[(i, n + i - 1)] = self.g * sub[i - 1];
            }
            j[(i, n + i + 1)] = self.g * sup[i];
        }
        for i in 0..n {
            j[(n + i, i)] = self.g;
        }
        Ok(j)
    }

    pub fn snapshot(&self, x: &[f64]) -> Result<ColumnSnapshot, IntegratorError> {
        let n = self.layers + 1;
        let p = self.pressure(&x[n..])?;
        Ok(ColumnSnapshot {
            eta: self.eta.clone(),
            eta_mid: (0..self.layers)
                .map(|k| 0.5 * (self.eta[k] + self.eta[k + 1]))
                .collect(),
            w: x[..n].to_vec(),
            phi: x[n..].to_vec(),
            mu: self.mu(&p),
            p,
        })
    }
}

/// Diagnostic view of a column state.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSnapshot {
    pub eta: Vec<f64>,
    pub eta_mid: Vec<f64>,
    pub w: Vec<f64>,
    pub phi: Vec<f64>,
    pub p: Vec<f64>,
    pub mu: Vec<f64>,
}

impl ColumnSnapshot {
    /// Interface and midpoint rows interleaved top to bottom; fields that do
    /// not live on a row's location are written as `NaN`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "eta,w,phi,p,mu")?;
        let nan = f64::NAN;
        for i in 0..self.eta.len() {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{nan},{:.16e}",
                self.eta[i], self.w[i], self.phi[i], self.mu[i]
            )?;
            if let Some(em) = self.eta_mid.get(i) {
                writeln!(out, "{em:.16e},{nan},{nan},{:.16e},{nan}", self.p[i])?;
            }
        }
        Ok(())
    }
}

/// Stage solver eliminating `w` through `g^w = (g^φ - E^φ)/(g Δt Â_jj)` and
/// running Newton on the tridiagonal system for `g^φ`:
/// `G(φ) = φ - E^φ - h E^w + h² (1 - μ(φ))`, `h = g Δt Â_jj`.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnStageSolver {
    bg: ColumnBackground,
}

impl ColumnStageSolver {
    pub fn new(bg: ColumnBackground) -> Self {
        Self { bg }
    }

    /// Reduced residual `G(φ)`.
    pub fn residual(&self, phi: &[f64], e: &[f64], h: f64) -> Result<Vec<f64>, IntegratorError> {
        let n = self.bg.layers + 1;
        let (ew, ephi) = e.split_at(n);
        let mu = self.bg.mu(&self.bg.pressure(phi)?);
        Ok((0..n)
            .map(|i| {
                let forcing = if i + 1 == n { 0.0 } else { h * h * (1.0 - mu[i]) };
                phi[i] - ephi[i] - h * ew[i] + forcing
            })
            .collect())
    }

    /// `∂G/∂φ = I - h² ∂μ/∂φ` as `(sub, diag, sup)`.
    pub fn residual_jacobian(&self, phi: &[f64], h: f64) -> Result<[Vec<f64>; 3], IntegratorError> {
        let (_, [sub, diag, sup]) = self.bg.mu_jacobian(phi)?;
        let h2 = h * h;
        Ok([
            sub.iter().map(|v| -h2 * v).collect(),
            diag.iter().map(|v| 1.0 - h2 * v).collect(),
            sup.iter().map(|v| -h2 * v).collect(),
        ])
    }
}

impl StageSolver for ColumnStageSolver {
    fn solve(&self, _problem: &dyn SplitProblem, ctx: &StageContext) -> Result<StageSolution, IntegratorError> {
        let n = self.bg.layers + 1;
        let h = self.bg.g * ctx.dt * ctx.a_jj;
        let (ew, ephi) = ctx.e.split_at(n);
        let sol = newton_iterate(ephi.to_vec(), &ctx.weights[n..], ctx.cfg, ctx.stage, false, |phi| {
            let g = self.residual(phi, ctx.e, h)?;
            let [sub, diag, sup] = self.residual_jacobian(phi, h)?;
            let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
            solve_tridiagonal(&sub, &diag, &sup, &rhs).ok_or(IntegratorError::SingularJacobian { stage: ctx.stage })
        })?;
        let mut g = Vec::with_capacity(2 * n);
        for i in 0..n {
            g.push(if i + 1 == n { ew[i] } else { (sol.g[i] - ephi[i]) / h });
        }
        g.extend_from_slice(&sol.g);
        Ok(StageSolution { g, ..sol })
    }
}

/// The column as a split problem with `n ≡ 0` and the acoustic terms in `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnProblem {
    solver: ColumnStageSolver,
    initial: Vec<f64>,
}

pub fn acoustic_column(bg: ColumnBackground) -> ColumnProblem {
    ColumnProblem {
        initial: bg.hydrostatic_state(),
        solver: ColumnStageSolver::new(bg),
    }
}

impl ColumnProblem {
    pub fn background(&self) -> &ColumnBackground {
        &self.solver.bg
    }

    pub fn reduced_solver(&self) -> &ColumnStageSolver {
        &self.solver
    }

    /// Adds `amplitude · sin(π i / L)` to the hydrostatic `φ`; the top and
    /// surface interfaces are left in place.
    pub fn with_sine_perturbation(mut self, amplitude: f64) -> Self {
        let l = self.solver.bg.layers;
        let mut x = self.solver.bg.hydrostatic_state();
        for i in 0..=l {
            x[l + 1 + i] += amplitude * (std::f64::consts::PI * i as f64 / l as f64).sin();
        }
        self.initial = x;
        self
    }

    pub fn with_initial(mut self, x: Vec<f64>) -> Self {
        self.initial = x;
        self
    }
}

impl SplitProblem for ColumnProblem {
    fn name(&self) -> &str {
        "column"
    }

    fn dim(&self) -> usize {
        2 * (self.solver.bg.layers + 1)
    }

    fn nonstiff(&self, _t: f64, _x: &[f64], out: &mut [f64]) -> Result<(), IntegratorError> {
        out.fill(0.0);
        Ok(())
    }

    fn stiff(&self, _t: f64, x: &[f64], out: &mut [f64]) -> Result<(), IntegratorError> {
        self.solver.bg.tendency(x, out)
    }

    fn stiff_jacobian(&self, _t: f64, x: &[f64]) -> Result<DMatrix<f64>, IntegratorError> {
        self.solver.bg.tendency_jacobian(x)
    }

    fn initial_state(&self) -> Vec<f64> {
        self.initial.clone()
    }

    /// `10 ε_r` for `w`, `10⁵ ε_r` for `φ`.
    fn default_abs_tolerance(&self, eps_r: f64) -> Vec<f64> {
        let n = self.solver.bg.layers + 1;
        let mut v = vec![10.0 * eps_r; n];
        v.extend(std::iter::repeat(1e5 * eps_r).take(n));
        v
    }

    fn component_names(&self) -> Vec<String> {
        let n = self.solver.bg.layers + 1;
        (0..n)
            .map(|i| format!("w{i}"))
            .chain((0..n).map(|i| format!("phi{i}")))
            .collect()
    }

    fn stage_solver(&self) -> &dyn StageSolver {
        &self.solver
    }
}

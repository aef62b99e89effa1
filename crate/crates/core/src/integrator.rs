//! IMEX Runge-Kutta integration of additively split systems
//! `x' = n(x, t) + s(x, t)` with Newton solves for the implicit stages.

use crate::tableau::DoubleTableau;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::io::Write;
use thiserror::Error;

/// A solution whose norm exceeds this multiple of the initial norm aborts the run.
pub const BLOW_UP_FACTOR: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegratorError {
    #[error("Newton iteration did not converge in stage {stage} after {iterations} iterations (last update norm {norm:e})")]
    NewtonDiverged {
        stage: usize,
        iterations: usize,
        norm: f64,
    },
    #[error("singular stage Jacobian in stage {stage}")]
    SingularJacobian { stage: usize },
    #[error("state out of domain: {0}")]
    Domain(String),
    #[error("solution blew up at step {step} (t = {t}, norm {norm:e})")]
    BlowUp { step: usize, t: f64, norm: f64 },
    #[error("step {step} (t = {t}): {source}")]
    Step {
        step: usize,
        t: f64,
        #[source]
        source: Box<IntegratorError>,
    },
    #[error("invalid step size {0}")]
    InvalidStep(f64),
    #[error("state has dimension {found}, problem expects {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("no exact solution available for '{0}'")]
    ReferenceUnavailable(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Convergence control for implicit stage solves.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonConfig {
    /// Stop when `R·‖δ‖ < epsilon`.
    pub epsilon: f64,
    pub eps_r: f64,
    /// Per-component absolute tolerances; `None` uses the problem's default.
    pub eps_a: Option<Vec<f64>>,
    pub max_iters: usize,
    /// `R^{(k+1)} = max(rate_floor·R^{(k)}, ‖δ^{(k+1)}‖/‖δ^{(k)}‖)`.
    pub rate_floor: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            eps_r: 1e-6,
            eps_a: None,
            max_iters: 20,
            rate_floor: 0.3,
        }
    }
}

impl NewtonConfig {
    /// Tolerances tight enough that stage-solve error sits near rounding level.
    pub fn tight() -> Self {
        Self {
            eps_r: 1e-13,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), IntegratorError> {
        let bad = |what: &str| Err(IntegratorError::Config(format!("{what} must be positive")));
        if !(self.epsilon > 0.0) {
            return bad("epsilon");
        }
        if !(self.eps_r > 0.0) {
            return bad("eps_r");
        }
        if self.eps_a.as_ref().is_some_and(|a| a.iter().any(|v| !(*v > 0.0))) {
            return bad("eps_a");
        }
        if self.max_iters == 0 {
            return bad("max_iters");
        }
        Ok(())
    }
}

/// `[(1/N) Σ (δ_l / (ε_r|x_l| + ε_a,l))²]^{1/2}`.
pub fn wrms_norm(delta: &[f64], x: &[f64], eps_r: f64, eps_a: &[f64]) -> f64 {
    let w = weights(x, eps_r, eps_a);
    weighted_rms(delta, &w)
}

pub fn weights(x: &[f64], eps_r: f64, eps_a: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(eps_a)
        .map(|(xl, al)| eps_r * xl.abs() + al)
        .collect()
}

pub fn weighted_rms(delta: &[f64], weights: &[f64]) -> f64 {
    if delta.is_empty() {
        return 0.0;
    }
    let sum: f64 = delta
        .iter()
        .zip(weights)
        .map(|(d, w)| (d / w) * (d / w))
        .sum();
    (sum / delta.len() as f64).sqrt()
}

/// Inputs of one implicit stage `g = E + Δt·a·s(g, t)`.
#[derive(Debug, Clone, Copy)]
pub struct StageContext<'a> {
    pub stage: usize,
    pub e: &'a [f64],
    pub a_jj: f64,
    pub dt: f64,
    pub t: f64,
    /// WRMS weights from the step-start state.
    pub weights: &'a [f64],
    pub cfg: &'a NewtonConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageSolution {
    pub g: Vec<f64>,
    /// Number of linear solves.
    pub iterations: usize,
    pub final_norm: f64,
}

/// Strategy for solving an implicit stage.
pub trait StageSolver: Send + Sync {
    fn solve(&self, problem: &dyn SplitProblem, ctx: &StageContext) -> Result<StageSolution, IntegratorError>;
}

/// Additively split initial value problem.
pub trait SplitProblem: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    /// Nonstiff tendency, treated explicitly.
    fn nonstiff(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<(), IntegratorError>;

    /// Stiff tendency, treated implicitly.
    fn stiff(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<(), IntegratorError>;

    /// `∂s/∂x`; the default is a forward difference.
    fn stiff_jacobian(&self, t: f64, x: &[f64]) -> Result<DMatrix<f64>, IntegratorError> {
        let d = self.dim();
        let mut base = vec![0.0; d];
        self.stiff(t, x, &mut base)?;
        let mut j = DMatrix::zeros(d, d);
        let mut xp = x.to_vec();
        let mut col = vec![0.0; d];
        for k in 0..d {
            let h = f64::EPSILON.sqrt() * x[k].abs().max(1.0);
            xp[k] = x[k] + h;
            self.stiff(t, &xp, &mut col)?;
            for i in 0..d {
                j[(i, k)] = (col[i] - base[i]) / h;
            }
            xp[k] = x[k];
        }
        Ok(j)
    }

    /// A linear stiff term needs exactly one Newton iteration.
    fn stiff_is_linear(&self) -> bool {
        false
    }

    fn initial_state(&self) -> Vec<f64>;

    fn exact_solution(&self, _t: f64, _x0: &[f64], _t0: f64) -> Option<Vec<f64>> {
        None
    }

    /// Default `ε_a` given `ε_r`.
    fn default_abs_tolerance(&self, eps_r: f64) -> Vec<f64> {
        vec![eps_r; self.dim()]
    }

    fn component_names(&self) -> Vec<String> {
        (0..self.dim()).map(|k| format!("x{k}")).collect()
    }

    fn stage_solver(&self) -> &dyn StageSolver {
        &DenseNewton
    }
}

/// Newton iteration with the rate-based stopping test.
///
/// `update` returns the correction `δ` at the current iterate. With
/// `single_iteration` the first update is accepted, which is exact for
/// linear problems.
pub fn newton_iterate(
    mut g: Vec<f64>,
    weights: &[f64],
    cfg: &NewtonConfig,
    stage: usize,
    single_iteration: bool,
    mut update: impl FnMut(&[f64]) -> Result<Vec<f64>, IntegratorError>,
) -> Result<StageSolution, IntegratorError> {
    let mut rate = 1.0;
    let mut previous: Option<f64> = None;
    let mut norm = f64::NAN;
    for k in 1..=cfg.max_iters {
        let delta = update(&g)?;
        for (gi, di) in g.iter_mut().zip(&delta) {
            *gi += di;
        }
        norm = weighted_rms(&delta, weights);
        if !norm.is_finite() {
            break;
        }
        if let Some(p) = previous {
            rate = (cfg.rate_floor * rate).max(norm / p);
        }
        if single_iteration || rate * norm < cfg.epsilon {
            return Ok(StageSolution {
                g,
                iterations: k,
                final_norm: norm,
            });
        }
        previous = Some(norm);
    }
    Err(IntegratorError::NewtonDiverged {
        stage,
        iterations: cfg.max_iters,
        norm,
    })
}

/// Full Newton with a dense LU factorization of `I - Δt·a·∂s/∂x`.
#[derive(Debug, Clone, Copy, Default)]
pub struct DenseNewton;

impl StageSolver for DenseNewton {
    fn solve(&self, problem: &dyn SplitProblem, ctx: &StageContext) -> Result<StageSolution, IntegratorError> {
        let d = problem.dim();
        let h = ctx.dt * ctx.a_jj;
        let mut s = vec![0.0; d];
        newton_iterate(
            ctx.e.to_vec(),
            ctx.weights,
            ctx.cfg,
            ctx.stage,
            problem.stiff_is_linear(),
            |g| {
                problem.stiff(ctx.t, g, &mut s)?;
                let residual = DVector::from_iterator(
                    d,
                    (0..d).map(|l| -(g[l] - ctx.e[l] - h * s[l])),
                );
                let jac = DMatrix::identity(d, d) - problem.stiff_jacobian(ctx.t, g)? * h;
                let delta = jac
                    .lu()
                    .solve(&residual)
                    .ok_or(IntegratorError::SingularJacobian { stage: ctx.stage })?;
                Ok(delta.as_slice().to_vec())
            },
        )
    }
}

/// Per-step accounting.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepStats {
    pub newton_iterations: usize,
    pub n_evaluations: usize,
    pub s_evaluations: usize,
}

/// One IMEX step from `(t_m, x_m)`.
///
/// `E_j = x_m + Δt Σ_{l<j} (A_jl n_l + Â_jl s_l)`, then
/// `g_j = E_j + Δt Â_jj s(g_j)`. Tendencies are evaluated only when a later
/// stage or the update uses them; for FSAL tableaux the new state is the last
/// stage and its tendencies are never formed.
pub fn imex_step(
    t: &DoubleTableau,
    problem: &dyn SplitProblem,
    x_m: &[f64],
    t_m: f64,
    dt: f64,
    cfg: &NewtonConfig,
) -> Result<(Vec<f64>, StepStats), IntegratorError> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(IntegratorError::InvalidStep(dt));
    }
    let d = problem.dim();
    if x_m.len() != d {
        return Err(IntegratorError::Dimension {
            expected: d,
            found: x_m.len(),
        });
    }
    let r = t.stages();
    let ex = t.explicit_part();
    let im = t.implicit_part();
    let (a, ah) = (ex.a(), im.a());
    let (b, bh) = (ex.b(), im.b());
    let (c, ch) = (ex.c(), im.c());
    let fsal = t.is_fsal();

    let eps_a = match &cfg.eps_a {
        Some(v) => v.clone(),
        None => problem.default_abs_tolerance(cfg.eps_r),
    };
    let w = weights(x_m, cfg.eps_r, &eps_a);

    let needs = |m: &DMatrix<f64>, weights: &DVector<f64>, j: usize| {
        ((j + 1)..r).any(|i| m[(i, j)] != 0.0) || (!fsal && weights[j] != 0.0)
    };

    let mut stats = StepStats::default();
    let mut n_vals: Vec<Option<Vec<f64>>> = Vec::with_capacity(r);
    let mut s_vals: Vec<Option<Vec<f64>>> = Vec::with_capacity(r);
    let mut last = x_m.to_vec();
    for j in 0..r {
        let mut e = x_m.to_vec();
        for l in 0..j {
            if let Some(nl) = &n_vals[l] {
                if a[(j, l)] != 0.0 {
                    let f = dt * a[(j, l)];
                    e.iter_mut().zip(nl).for_each(|(ei, v)| *ei += f * v);
                }
            }
            if let Some(sl) = &s_vals[l] {
                if ah[(j, l)] != 0.0 {
                    let f = dt * ah[(j, l)];
                    e.iter_mut().zip(sl).for_each(|(ei, v)| *ei += f * v);
                }
            }
        }
        let g = if ah[(j, j)] == 0.0 {
            e
        } else {
            let ctx = StageContext {
                stage: j,
                e: &e,
                a_jj: ah[(j, j)],
                dt,
                t: t_m + ch[j] * dt,
                weights: &w,
                cfg,
            };
            let sol = problem.stage_solver().solve(problem, &ctx)?;
            stats.newton_iterations += sol.iterations;
            sol.g
        };
        if needs(a, b, j) {
            let mut v = vec![0.0; d];
            problem.nonstiff(t_m + c[j] * dt, &g, &mut v)?;
            stats.n_evaluations += 1;
            n_vals.push(Some(v));
        } else {
            n_vals.push(None);
        }
        if needs(ah, bh, j) {
            let mut v = vec![0.0; d];
            problem.stiff(t_m + ch[j] * dt, &g, &mut v)?;
            stats.s_evaluations += 1;
            s_vals.push(Some(v));
        } else {
            s_vals.push(None);
        }
        last = g;
    }
    if fsal {
        return Ok((last, stats));
    }
    let mut x = x_m.to_vec();
    for j in 0..r {
        if let Some(nj) = &n_vals[j] {
            x.iter_mut().zip(nj).for_each(|(xi, v)| *xi += dt * b[j] * v);
        }
        if let Some(sj) = &s_vals[j] {
            x.iter_mut().zip(sj).for_each(|(xi, v)| *xi += dt * bh[j] * v);
        }
    }
    Ok((x, stats))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Newton iterations summed over the stages of each step.
    pub newton_iterations: Vec<usize>,
    pub n_evaluations: usize,
    pub s_evaluations: usize,
    /// Max-norm error at the final time when the problem has an exact solution.
    pub final_error: Option<f64>,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory holds the initial time")
    }

    pub fn write_csv<W: Write>(&self, mut out: W, names: &[String]) -> std::io::Result<()> {
        writeln!(out, "t,{}", names.join(","))?;
        for (t, x) in self.times.iter().zip(&self.states) {
            write!(out, "{t:.16e}")?;
            for v in x {
                write!(out, ",{v:.16e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Step count and final step for covering `[t0, t_end]` with steps `dt`;
/// a remainder beyond rounding shortens the last step.
fn step_plan(t0: f64, t_end: f64, dt: f64) -> (usize, f64) {
    let span = t_end - t0;
    let ratio = span / dt;
    let rounded = ratio.round();
    if (ratio - rounded).abs() <= 1e-9 * ratio.max(1.0) {
        (rounded as usize, dt)
    } else {
        let n = ratio.ceil() as usize;
        (n, span - (n - 1) as f64 * dt)
    }
}

/// Repeated [`imex_step`] from `t0` to `t_end`.
pub fn integrate(
    t: &DoubleTableau,
    problem: &dyn SplitProblem,
    x0: &[f64],
    t0: f64,
    t_end: f64,
    dt: f64,
    cfg: &NewtonConfig,
) -> Result<Trajectory, IntegratorError> {
    if !(dt > 0.0) || !dt.is_finite() || !(t_end >= t0) {
        return Err(IntegratorError::InvalidStep(dt));
    }
    cfg.validate()?;
    let (steps, last_dt) = step_plan(t0, t_end, dt);
    let limit = BLOW_UP_FACTOR * if norm2(x0) > 0.0 { norm2(x0) } else { 1.0 };
    let mut traj = Trajectory {
        times: vec![t0],
        states: vec![x0.to_vec()],
        newton_iterations: Vec::with_capacity(steps),
        n_evaluations: 0,
        s_evaluations: 0,
        final_error: None,
    };
    let mut x = x0.to_vec();
    let mut time = t0;
    for step in 0..steps {
        let h = if step + 1 == steps { last_dt } else { dt };
        let (next, stats) = imex_step(t, problem, &x, time, h, cfg).map_err(|e| IntegratorError::Step {
            step,
            t: time,
            source: Box::new(e),
        })?;
        time = if step + 1 == steps { t_end } else { t0 + (step + 1) as f64 * dt };
        let n = norm2(&next);
        if !n.is_finite() || n > limit {
            return Err(IntegratorError::BlowUp { step, t: time, norm: n });
        }
        traj.newton_iterations.push(stats.newton_iterations);
        traj.n_evaluations += stats.n_evaluations;
        traj.s_evaluations += stats.s_evaluations;
        traj.times.push(time);
        traj.states.push(next.clone());
        x = next;
    }
    traj.final_error = problem
        .exact_solution(t_end, x0, t0)
        .map(|exact| max_abs_diff(&exact, &x));
    Ok(traj)
}

/// Final state only; avoids storing the trajectory.
pub fn integrate_final(
    t: &DoubleTableau,
    problem: &dyn SplitProblem,
    x0: &[f64],
    t0: f64,
    t_end: f64,
    dt: f64,
    cfg: &NewtonConfig,
) -> Result<Vec<f64>, IntegratorError> {
    if !(dt > 0.0) || !dt.is_finite() || !(t_end >= t0) {
        return Err(IntegratorError::InvalidStep(dt));
    }
    cfg.validate()?;
    let (steps, last_dt) = step_plan(t0, t_end, dt);
    let limit = BLOW_UP_FACTOR * if norm2(x0) > 0.0 { norm2(x0) } else { 1.0 };
    let mut x = x0.to_vec();
    let mut time = t0;
    for step in 0..steps {
        let h = if step + 1 == steps { last_dt } else { dt };
        let (next, _) = imex_step(t, problem, &x, time, h, cfg).map_err(|e| IntegratorError::Step {
            step,
            t: time,
            source: Box::new(e),
        })?;
        time = if step + 1 == steps { t_end } else { t0 + (step + 1) as f64 * dt };
        let n = norm2(&next);
        if !n.is_finite() || n > limit {
            return Err(IntegratorError::BlowUp { step, t: time, norm: n });
        }
        x = next;
    }
    Ok(x)
}

/// Source of the reference solution for error measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reference {
    /// Exact solution if the problem has one, otherwise self-reference with factor 256.
    Auto,
    Exact,
    /// The same method at `min(Δt) / factor`.
    SelfReference { factor: usize },
}

/// Least-squares slope of `log error` against `log Δt`.
pub fn fitted_slope(rows: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|(_, e)| *e > 0.0)
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Rows used for the asymptotic order.
pub const ASYMPTOTIC_WINDOW: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    /// `(Δt, max-norm error)` with `Δt` strictly decreasing.
    pub rows: Vec<(f64, f64)>,
    /// Slope over the finest [`ASYMPTOTIC_WINDOW`] step sizes.
    pub order: f64,
    /// Slope over all rows.
    pub full_range_order: f64,
}

impl ConvergenceTable {
    pub fn from_rows(rows: Vec<(f64, f64)>) -> Self {
        let start = rows.len().saturating_sub(ASYMPTOTIC_WINDOW);
        Self {
            order: fitted_slope(&rows[start..]),
            full_range_order: fitted_slope(&rows),
            rows,
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "dt,error")?;
        for (h, e) in &self.rows {
            writeln!(out, "{h:.16e},{e:.16e}")?;
        }
        Ok(())
    }
}

/// Max-norm errors at `t_end` for each `Δt`, run in parallel.
pub fn convergence_study(
    t: &DoubleTableau,
    problem: &dyn SplitProblem,
    x0: &[f64],
    dts: &[f64],
    t_end: f64,
    cfg: &NewtonConfig,
    reference: Reference,
) -> Result<ConvergenceTable, IntegratorError> {
    let mut dts = dts.to_vec();
    dts.sort_by(|a, b| b.total_cmp(a));
    dts.dedup();
    let Some(&finest) = dts.last() else {
        return Err(IntegratorError::Config("empty step-size list".into()));
    };
    let exact = problem.exact_solution(t_end, x0, 0.0);
    let reference_state = match (reference, exact) {
        (Reference::Exact | Reference::Auto, Some(e)) => e,
        (Reference::Exact, None) => {
            return Err(IntegratorError::ReferenceUnavailable(problem.name().to_string()))
        }
        (Reference::Auto, None) => integrate_final(t, problem, x0, 0.0, t_end, finest / 256.0, cfg)?,
        (Reference::SelfReference { factor }, _) => {
            if factor < 100 {
                return Err(IntegratorError::Config(
                    "self-reference factor must be at least 100".into(),
                ));
            }
            integrate_final(t, problem, x0, 0.0, t_end, finest / factor as f64, cfg)?
        }
    };
    let errors: Result<Vec<f64>, IntegratorError> = dts
        .par_iter()
        .map(|&h| {
            integrate_final(t, problem, x0, 0.0, t_end, h, cfg)
                .map(|x| max_abs_diff(&x, &reference_state))
        })
        .collect();
    Ok(ConvergenceTable::from_rows(dts.into_iter().zip(errors?).collect()))
}

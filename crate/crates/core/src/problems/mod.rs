//! Split test problems and a named registry for building them from
//! `key=value` parameters.

mod column;
mod dahlquist;
mod hevi_test;
mod tridiagonal;

pub use column::{acoustic_column, ColumnBackground, ColumnProblem, ColumnStageSolver, ColumnSnapshot};
pub use dahlquist::{dahlquist_split, DahlquistSplit};
pub use hevi_test::{hevi_problem, HeviTestProblem};
pub use tridiagonal::solve_tridiagonal;

use crate::integrator::SplitProblem;
use num_complex::Complex64;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("unknown problem '{0}'")]
    Unknown(String),
    #[error("problem '{problem}' has no parameter '{key}' (known: {known})")]
    UnknownParameter {
        problem: String,
        key: String,
        known: String,
    },
    #[error("malformed parameter '{0}', expected key=value")]
    Malformed(String),
    #[error("invalid background: {0}")]
    Background(String),
}

/// Parameter overrides keyed by name.
pub type Params = BTreeMap<String, f64>;

/// Parses `key=value` pairs.
pub fn parse_params<S: AsRef<str>>(items: &[S]) -> Result<Params, ProblemError> {
    let mut out = Params::new();
    for item in items {
        let item = item.as_ref();
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| ProblemError::Malformed(item.to_string()))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| ProblemError::Malformed(item.to_string()))?;
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}

pub struct ProblemEntry {
    pub name: &'static str,
    pub description: &'static str,
    /// `(key, default, meaning)`.
    pub parameters: &'static [(&'static str, f64, &'static str)],
    build: fn(&dyn Fn(&str) -> f64) -> Result<Box<dyn SplitProblem>, ProblemError>,
}

impl ProblemEntry {
    fn value(&self, params: &Params, key: &str) -> f64 {
        params.get(key).copied().unwrap_or_else(|| {
            self.parameters
                .iter()
                .find(|p| p.0 == key)
                .map(|p| p.1)
                .expect("parameter declared in the registry")
        })
    }

    fn check_keys(&self, params: &Params) -> Result<(), ProblemError> {
        for key in params.keys() {
            if !self.parameters.iter().any(|(k, _, _)| k == key) {
                return Err(ProblemError::UnknownParameter {
                    problem: self.name.to_string(),
                    key: key.clone(),
                    known: self
                        .parameters
                        .iter()
                        .map(|p| p.0)
                        .collect::<Vec<_>>()
                        .join(", "),
                });
            }
        }
        Ok(())
    }

    pub fn build(&self, params: &Params) -> Result<Box<dyn SplitProblem>, ProblemError> {
        self.check_keys(params)?;
        (self.build)(&|key| self.value(params, key))
    }
}

static PROBLEMS: [ProblemEntry; 3] = [
    ProblemEntry {
        name: "dahlquist",
        description: "x' = lambda_n x + lambda_s x on the complex plane, stored as (re, im)",
        parameters: &[
            ("ln_re", 0.0, "Re lambda_n"),
            ("ln_im", 1.0, "Im lambda_n"),
            ("ls_re", -1.0, "Re lambda_s"),
            ("ls_im", 0.0, "Im lambda_s"),
            ("x0_re", 1.0, "Re x(0)"),
            ("x0_im", 0.0, "Im x(0)"),
        ],
        build: |get| {
            Ok(Box::new(
                dahlquist_split(
                    Complex64::new(get("ln_re"), get("ln_im")),
                    Complex64::new(get("ls_re"), get("ls_im")),
                )
                .with_initial(Complex64::new(get("x0_re"), get("x0_im"))),
            ))
        },
    },
    ProblemEntry {
        name: "hevi",
        description: "u' = -i kx N u - i kz S u with u in C^3, stored as (Re u, Im u)",
        parameters: &[("kx", 1.0, "horizontal wave number"), ("kz", 10.0, "vertical wave number")],
        build: |get| Ok(Box::new(hevi_problem(get("kx"), get("kz")))),
    },
    ProblemEntry {
        name: "column",
        description: "isothermal acoustic column, state (w_0..w_L, phi_0..phi_L), all terms implicit",
        parameters: &[
            ("layers", 20.0, "number of layers L"),
            ("temperature", 300.0, "background temperature (K)"),
            ("amplitude", 10.0, "initial geopotential perturbation (m^2/s^2)"),
        ],
        build: |get| Ok(Box::new(column_with(get)?)),
    },
];

fn column_with(get: &dyn Fn(&str) -> f64) -> Result<ColumnProblem, ProblemError> {
    let layers = get("layers");
    if layers < 1.0 || layers.fract() != 0.0 {
        return Err(ProblemError::Background(format!(
            "layers must be a positive integer, got {layers}"
        )));
    }
    let bg = ColumnBackground::isothermal(layers as usize, get("temperature"))?;
    Ok(acoustic_column(bg).with_sine_perturbation(get("amplitude")))
}

/// The registry's `column` problem as its concrete type.
pub fn column_problem(params: &Params) -> Result<ColumnProblem, ProblemError> {
    let entry = &PROBLEMS[2];
    entry.check_keys(params)?;
    column_with(&|key| entry.value(params, key))
}

pub fn problem_registry() -> &'static [ProblemEntry] {
    &PROBLEMS
}

pub fn build_problem(name: &str, params: &Params) -> Result<Box<dyn SplitProblem>, ProblemError> {
    PROBLEMS
        .iter()
        .find(|p| p.name == name)
        .ok_or_else(|| ProblemError::Unknown(name.to_string()))?
        .build(params)
}

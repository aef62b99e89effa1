use crate::integrator::{IntegratorError, SplitProblem};
use nalgebra::DMatrix;
use num_complex::Complex64;

/// `x' = λ_n x + λ_s x` with `x ∈ ℂ` stored as `(Re x, Im x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DahlquistSplit {
    pub lambda_n: Complex64,
    pub lambda_s: Complex64,
    pub x0: Complex64,
}

pub fn dahlquist_split(lambda_n: Complex64, lambda_s: Complex64) -> DahlquistSplit {
    DahlquistSplit {
        lambda_n,
        lambda_s,
        x0: Complex64::new(1.0, 0.0),
    }
}

impl DahlquistSplit {
    pub fn with_initial(mut self, x0: Complex64) -> Self {
        self.x0 = x0;
        self
    }
}

fn apply(l: Complex64, x: &[f64], out: &mut [f64]) {
    out[0] = l.re * x[0] - l.im * x[1];
    out[1] = l.im * x[0] + l.re * x[1];
}

impl SplitProblem for DahlquistSplit {
    fn name(&self) -> &str {
        "dahlquist"
    }

    fn dim(&self) -> usize {
        2
    }

    fn nonstiff(&self, _t: f64, x: &[f64], out: &mut [f64]) -> Result<(), IntegratorError> {
        apply(self.lambda_n, x, out);
        Ok(())
    }

    fn stiff(&self, _t: f64, x: &[f64], out: &mut [f64]) -> Result<(), IntegratorError> {
        apply(self.lambda_s, x, out);
        Ok(())
    }

    fn stiff_jacobian(&self, _t: f64, _x: &[f64]) -> Result<DMatrix<f64>, IntegratorError> {
        let l = self.lambda_s;
        Ok(DMatrix::from_row_slice(2, 2, &[l.re, -l.im, l.im, l.re]))
    }

    fn stiff_is_linear(&self) -> bool {
        true
    }

    fn initial_state(&self) -> Vec<f64> {
        vec![self.x0.re, self.x0.im]
    }

    fn exact_solution(&self, t: f64, x0: &[f64], t0: f64) -> Option<Vec<f64>> {
        let x = Complex64::new(x0[0], x0[1]) * ((self.lambda_n + self.lambda_s) * (t - t0)).exp();
        Some(vec![x.re, x.im])
    }

    fn component_names(&self) -> Vec<String> {
        vec!["re".into(), "im".into()]
    }
}

use crate::integrator::{IntegratorError, SplitProblem};
use nalgebra::{DMatrix, Matrix3, SymmetricEigen, Vector3};
use num_complex::Complex64;

/// `u' = -i k_x N u - i k_z S u`, `u ∈ ℂ³`, stored as `(Re u, Im u) ∈ ℝ⁶`.
///
/// With `u = a + i b` and a real symmetric `K`, `-i K u` is `K b - i K a`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeviTestProblem {
    pub kx: f64,
    pub kz: f64,
    pub u0: [Complex64; 3],
}

fn n_real() -> Matrix3<f64> {
    Matrix3::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0)
}

fn s_real() -> Matrix3<f64> {
    Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0)
}

pub fn hevi_problem(kx: f64, kz: f64) -> HeviTestProblem {
    HeviTestProblem {
        kx,
        kz,
        u0: [
            Complex64::new(1.0, 0.2),
            Complex64::new(0.5, -0.1),
            Complex64::new(-0.25, 0.3),
        ],
    }
}

fn apply(k: &Matrix3<f64>, x: &[f64], out: &mut [f64]) {
    let a = Vector3::new(x[0], x[1], x[2]);
    let b = Vector3::new(x[3], x[4], x[5]);
    let ka = k * a;
    let kb = k * b;
    out[..3].copy_from_slice(kb.as_slice());
    for i in 0..3 {
        out[3 + i] = -ka[i];
    }
}

impl HeviTestProblem {
    pub fn with_initial(mut self, u0: [Complex64; 3]) -> Self {
        self.u0 = u0;
        self
    }

    pub fn generator(&self) -> Matrix3<f64> {
        n_real() * self.kx + s_real() * self.kz
    }

    pub fn to_real(u: &[Complex64; 3]) -> Vec<f64> {
        u.iter().map(|z| z.re).chain(u.iter().map(|z| z.im)).collect()
    }

    pub fn to_complex(x: &[f64]) -> [Complex64; 3] {
        [0, 1, 2].map(|i| Complex64::new(x[i], x[i + 3]))
    }
}

impl SplitProblem for HeviTestProblem {
    fn name(&self) -> &str {
        "hevi"
    }

    fn dim(&self) -> usize {
        6
    }

    fn nonstiff(&self, _t: f64, x: &[f64], out: &mut [f64]) -> Result<(), IntegratorError> {
        apply(&(n_real() * self.kx), x, out);
        Ok(())
    }

    fn stiff(&self, _t: f64, x: &[f64], out: &mut [f64]) -> Result<(), IntegratorError> {
        apply(&(s_real() * self.kz), x, out);
        Ok(())
    }

    fn stiff_jacobian(&self, _t: f64, _x: &[f64]) -> Result<DMatrix<f64>, IntegratorError> {
        let k = s_real() * self.kz;
        let mut j = DMatrix::zeros(6, 6);
        for r in 0..3 {
            for c in 0..3 {
                j[(r, 3 + c)] = k[(r, c)];
                j[(3 + r, c)] = -k[(r, c)];
            }
        }
        Ok(j)
    }

    fn stiff_is_linear(&self) -> bool {
        true
    }

    fn initial_state(&self) -> Vec<f64> {
        Self::to_real(&self.u0)
    }

    /// `u(t) = V e^{-iΛ(t-t0)} Vᵀ u0` from `K = V Λ Vᵀ`.
    fn exact_solution(&self, t: f64, x0: &[f64], t0: f64) -> Option<Vec<f64>> {
        let eig = SymmetricEigen::new(self.generator());
        let v = eig.eigenvectors;
        let u0 = Self::to_complex(x0);
        let mut u = [Complex64::new(0.0, 0.0); 3];
        for k in 0..3 {
            let proj: Complex64 = (0..3).map(|i| u0[i] * v[(i, k)]).sum();
            let phase = Complex64::new(0.0, -eig.eigenvalues[k] * (t - t0)).exp();
            for (i, ui) in u.iter_mut().enumerate() {
                *ui += proj * phase * v[(i, k)];
            }
        }
        Some(Self::to_real(&u))
    }

    fn component_names(&self) -> Vec<String> {
        ["re_u1", "re_u2", "re_u3", "im_u1", "im_u2", "im_u3"]
            .map(String::from)
            .to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_solution_satisfies_the_ode() {
        let p = hevi_problem(1.3, 7.0);
        let x0 = p.initial_state();
        let h = 1e-6;
        let xp = p.exact_solution(0.4 + h, &x0, 0.0).unwrap();
        let xm = p.exact_solution(0.4 - h, &x0, 0.0).unwrap();
        let x = p.exact_solution(0.4, &x0, 0.0).unwrap();
        let (mut n, mut s) = (vec![0.0; 6], vec![0.0; 6]);
        p.nonstiff(0.0, &x, &mut n).unwrap();
        p.stiff(0.0, &x, &mut s).unwrap();
        for i in 0..6 {
            let d = (xp[i] - xm[i]) / (2.0 * h);
            assert!((d - n[i] - s[i]).abs() < 1e-7, "{i}: {d} vs {}", n[i] + s[i]);
        }
    }
}

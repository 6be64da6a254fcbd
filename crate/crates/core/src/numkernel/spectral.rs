//! Largest singular values by power iteration on the Gram operator `M†M`.

use num_complex::Complex64;

use super::matrix::{inner, vector_norm, ComplexMatrix};
use super::rng::SeededRng;
use crate::error::{Error, Result};

/// Seed of the fixed start-vector stream (stream id 0).
pub const START_VECTOR_SEED: u64 = 0x005e_ed0f_5eed;

pub const DEFAULT_NORM_TOL: f64 = 1e-14;

#[derive(Clone, Copy, Debug)]
pub struct PowerIteration {
    /// Relative change of the squared-norm estimate at which iteration stops.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PowerIteration {
    fn default() -> Self {
        Self {
            tol: DEFAULT_NORM_TOL,
            max_iter: 10_000,
        }
    }
}

impl PowerIteration {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }

    /// Largest singular value of the operator given by `apply` and its adjoint `apply_adj`,
    /// acting on vectors of length `dim`. `restrict` is applied to the start vector and after
    /// every Gram step, so the iteration stays inside the subspace it selects.
    pub fn run(
        &self,
        dim: usize,
        apply: impl Fn(&[Complex64]) -> Vec<Complex64>,
        apply_adj: impl Fn(&[Complex64]) -> Vec<Complex64>,
        restrict: impl Fn(&mut Vec<Complex64>),
    ) -> Result<f64> {
        let mut rng = SeededRng::new(START_VECTOR_SEED, 0);
        let mut x: Vec<Complex64> = (0..dim).map(|_| rng.complex_normal()).collect();
        restrict(&mut x);
        let n0 = vector_norm(&x);
        if n0 == 0.0 {
            return Ok(0.0);
        }
        x.iter_mut().for_each(|z| *z /= n0);

        let mut last = f64::NAN;
        let mut residual = f64::INFINITY;
        for _ in 0..self.max_iter {
            let y = apply(&x);
            let lambda = y.iter().map(|z| z.norm_sqr()).sum::<f64>();
            let mut z = apply_adj(&y);
            restrict(&mut z);
            let zn = vector_norm(&z);
            if lambda == 0.0 || zn == 0.0 {
                return Ok(0.0);
            }
            // ‖Gx − λx‖ for the Gram operator G = M†M.
            residual = z
                .iter()
                .zip(&x)
                .map(|(a, b)| (a - lambda * b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            z.iter_mut().for_each(|v| *v /= zn);
            x = z;
            if (lambda - last).abs() <= self.tol * lambda || residual <= self.tol * lambda {
                return Ok(lambda.sqrt());
            }
            last = lambda;
        }
        Err(Error::Convergence {
            iterations: self.max_iter,
            estimate: last.sqrt(),
            residual,
            iterate: x,
        })
    }
}

/// Operator 2-norm (largest singular value) of `m` to relative tolerance `tol`.
pub fn operator_norm(m: &ComplexMatrix, tol: f64) -> Result<f64> {
    operator_norm_with(m, &PowerIteration::with_tol(tol))
}

pub fn operator_norm_with(m: &ComplexMatrix, opts: &PowerIteration) -> Result<f64> {
    opts.run(m.cols(), |x| m.matvec(x), |y| m.adjoint_matvec(y), |_| {})
}

/// Operator norm of `(I − P) m (I − P)` where `P` projects onto the span of `fixed_subspace`.
pub fn deflated_leading_value(m: &ComplexMatrix, fixed_subspace: &[Vec<Complex64>], tol: f64) -> Result<f64> {
    deflated_leading_value_with(m, fixed_subspace, &PowerIteration::with_tol(tol))
}

pub fn deflated_leading_value_with(
    m: &ComplexMatrix,
    fixed_subspace: &[Vec<Complex64>],
    opts: &PowerIteration,
) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::Shape(format!(
            "deflation needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    check_orthonormal(fixed_subspace, m.rows(), 1e-10)?;
    let project_out = |x: &mut Vec<Complex64>| {
        for v in fixed_subspace {
            let c = inner(v, x);
            for (xi, vi) in x.iter_mut().zip(v) {
                *xi -= c * vi;
            }
        }
    };
    opts.run(
        m.rows(),
        |x| {
            let mut y = m.matvec(x);
            project_out(&mut y);
            y
        },
        |y| m.adjoint_matvec(y),
        project_out,
    )
}

pub fn check_orthonormal(vectors: &[Vec<Complex64>], dim: usize, tol: f64) -> Result<()> {
    for (i, a) in vectors.iter().enumerate() {
        if a.len() != dim {
            return Err(Error::Precondition(format!(
                "subspace vector {i} has length {}, expected {dim}",
                a.len()
            )));
        }
        for (j, b) in vectors.iter().enumerate().skip(i) {
            let g = inner(a, b);
            let target = if i == j { 1.0 } else { 0.0 };
            if (g - target).norm() > tol {
                return Err(Error::Precondition(format!(
                    "subspace vectors {i},{j} not orthonormal: ⟨a,b⟩ = {g}"
                )));
            }
        }
    }
    Ok(())
}

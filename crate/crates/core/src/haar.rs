//! Haar-measure sampling on U(D) and the exact twirl/projector objects used as ground truth.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numkernel::unitary::UnitaryMatrix;
use crate::numkernel::{qr, vector_norm, ComplexMatrix, SeededRng};

/// Highest moment order with an exact invariant-subspace construction.
pub const MAX_MOMENT_ORDER: usize = 2;

/// Samples Haar-distributed unitaries of a fixed dimension.
#[derive(Clone, Debug)]
pub struct HaarSampler {
    dim: usize,
    rng: SeededRng,
}

impl HaarSampler {
    pub fn new(dim: usize, rng: SeededRng) -> Self {
        assert!(dim >= 1);
        Self { dim, rng }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sample(&mut self) -> UnitaryMatrix {
        sample_haar(self.dim, &mut self.rng)
    }
}

/// One Haar-random unitary: QR of a complex Ginibre matrix, with each column of `Q` rotated by
/// the phase of the matching diagonal entry of `R`. Without that correction the result is
/// unitary but not Haar distributed.
pub fn sample_haar(dim: usize, rng: &mut SeededRng) -> UnitaryMatrix {
    assert!(dim >= 1, "dimension must be positive");
    let data: Vec<Complex64> = (0..dim * dim).map(|_| rng.complex_normal()).collect();
    let z = ComplexMatrix::from_vec(dim, dim, data).expect("finite gaussian entries");
    let (mut q, r) = qr(&z).expect("square");
    for j in 0..dim {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 {
            rjj / rjj.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    UnitaryMatrix::new_unchecked(q)
}

/// A Haar-random pure state: distributed as any fixed column of a Haar unitary.
pub fn sample_haar_state(dim: usize, rng: &mut SeededRng) -> Vec<Complex64> {
    let mut v: Vec<Complex64> = (0..dim).map(|_| rng.complex_normal()).collect();
    let n = vector_norm(&v);
    v.iter_mut().for_each(|z| *z /= n);
    v
}

/// Exact Haar average of `U a U†`, which is `trace(a)·I/D`.
pub fn exact_twirl_t1(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !a.is_square() {
        return Err(Error::Shape(format!(
            "twirl needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let d = a.rows();
    Ok(ComplexMatrix::identity(d).scale(a.trace() / d as f64))
}

/// All permutations of `0..t` in lexicographic order.
pub fn permutations(t: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, rest: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for k in 0..rest.len() {
            let x = rest.remove(k);
            prefix.push(x);
            rec(prefix, rest, out);
            prefix.pop();
            rest.insert(k, x);
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut (0..t).collect(), &mut out);
    out
}

pub fn cycle_count(perm: &[usize]) -> usize {
    let mut seen = vec![false; perm.len()];
    let mut cycles = 0;
    for start in 0..perm.len() {
        if seen[start] {
            continue;
        }
        cycles += 1;
        let mut k = start;
        while !seen[k] {
            seen[k] = true;
            k = perm[k];
        }
    }
    cycles
}

/// Row-major vectorization of the operator permuting `t` tensor factors of C^dim:
/// entry `(i₁…i_t, j₁…j_t)` is 1 when `i_k = j_{π(k)}` for every k.
pub fn vec_permutation_operator(perm: &[usize], dim: usize) -> Vec<Complex64> {
    let t = perm.len();
    let half = dim.pow(t as u32);
    let mut v = vec![Complex64::new(0.0, 0.0); half * half];
    let mut digits = vec![0usize; t];
    for col in 0..half {
        let mut c = col;
        for k in (0..t).rev() {
            digits[k] = c % dim;
            c /= dim;
        }
        let row = (0..t).fold(0, |acc, k| acc * dim + digits[perm[k]]);
        v[row * half + col] = Complex64::new(1.0, 0.0);
    }
    v
}

fn check_order(t: usize, dim: usize) -> Result<()> {
    if t == 0 || t > MAX_MOMENT_ORDER {
        return Err(Error::Unsupported(format!(
            "moment order t = {t}; only 1 ≤ t ≤ {MAX_MOMENT_ORDER} is implemented"
        )));
    }
    if dim < t.max(1) {
        return Err(Error::Precondition(format!(
            "dimension {dim} too small for linearly independent order-{t} permutations"
        )));
    }
    Ok(())
}

/// Orthonormal basis of the span of vectorized permutation operators of `t` factors,
/// orthonormalized with the exact Gram matrix `G[π,σ] = dim^{cycles(π⁻¹σ)}`.
pub fn haar_invariant_basis(t: usize, dim: usize) -> Result<Vec<Vec<Complex64>>> {
    check_order(t, dim)?;
    let perms = permutations(t);
    let k = perms.len();
    let gram: Vec<Vec<f64>> = perms
        .iter()
        .map(|p| {
            perms
                .iter()
                .map(|s| {
                    let mut inv = vec![0; t];
                    for (i, &pi) in p.iter().enumerate() {
                        inv[pi] = i;
                    }
                    let composed: Vec<usize> = s.iter().map(|&x| inv[x]).collect();
                    (dim as f64).powi(cycle_count(&composed) as i32)
                })
                .collect()
        })
        .collect();
    // Cholesky G = L Lᵀ; the basis is L⁻¹ applied to the permutation vectors.
    let mut l = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..=i {
            let s: f64 = gram[i][j] - (0..j).map(|p| l[i][p] * l[j][p]).sum::<f64>();
            if i == j {
                if s <= 0.0 {
                    return Err(Error::Internal("permutation Gram matrix not positive definite".into()));
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let raw: Vec<Vec<Complex64>> = perms.iter().map(|p| vec_permutation_operator(p, dim)).collect();
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(k);
    for i in 0..k {
        let mut e = raw[i].clone();
        for (j, prev) in basis.iter().enumerate() {
            let c = l[i][j];
            for (x, y) in e.iter_mut().zip(prev) {
                *x -= c * y;
            }
        }
        let inv = 1.0 / l[i][i];
        e.iter_mut().for_each(|x| *x *= inv);
        basis.push(e);
    }
    Ok(basis)
}

/// Orthogonal projector onto the invariant subspace of `U^{⊗t} ⊗ Ū^{⊗t}`.
pub fn haar_projector(t: usize, dim: usize) -> Result<ComplexMatrix> {
    let basis = haar_invariant_basis(t, dim)?;
    let n = basis[0].len();
    let mut p = ComplexMatrix::zeros(n, n);
    for e in &basis {
        p.add_scaled(&ComplexMatrix::outer(e, e), Complex64::new(1.0, 0.0));
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dim_one_is_a_phase() {
        let mut rng = SeededRng::new(1, 0);
        for _ in 0..10 {
            let u = sample_haar(1, &mut rng);
            assert!((u[(0, 0)].norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn samples_are_unitary() {
        let mut rng = SeededRng::new(2, 0);
        for dim in [2, 3, 4, 8, 16] {
            let u = sample_haar(dim, &mut rng);
            assert!(u.unitarity_residual() <= 1e-12, "dim {dim}");
        }
    }

    #[test]
    fn twirl_examples() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(exact_twirl_t1(&i2).unwrap(), i2);
        let x = UnitaryMatrix::pauli_x();
        assert_eq!(exact_twirl_t1(&x).unwrap().max_abs(), 0.0);
        let p0 = ComplexMatrix::from_real_diag(&[1.0, 0.0]);
        assert_eq!(exact_twirl_t1(&p0).unwrap(), i2.scale_real(0.5));
        assert!(exact_twirl_t1(&ComplexMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn projector_t1_dim2() {
        let p = haar_projector(1, 2).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v = vec![s.into(), 0.0.into(), 0.0.into(), s.into()];
        let expected = ComplexMatrix::outer(&v, &v);
        assert!(p.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn projector_t2_rank_and_idempotence() {
        for dim in [2, 3, 4] {
            let p = haar_projector(2, dim).unwrap();
            assert!((p.trace().re - 2.0).abs() < 1e-12);
            assert!(p.matmul(&p).max_abs_diff(&p) < 1e-12);
            assert!(p.is_hermitian(1e-12));
        }
    }

    #[test]
    fn unsupported_order() {
        assert!(matches!(haar_projector(3, 4), Err(Error::Unsupported(_))));
        assert!(matches!(haar_projector(0, 4), Err(Error::Unsupported(_))));
    }

    #[test]
    fn permutation_bookkeeping() {
        assert_eq!(permutations(3).len(), 6);
        assert_eq!(cycle_count(&[0, 1, 2]), 3);
        assert_eq!(cycle_count(&[1, 0, 2]), 2);
        assert_eq!(cycle_count(&[1, 2, 0]), 1);
    }
}

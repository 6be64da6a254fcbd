use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of entries a matrix built by `kron` may hold.
pub const DEFAULT_ELEMENT_CAP: u64 = 1 << 32;

const PAR_MATMUL_MIN_DIM: usize = 64;

/// Dense complex matrix stored row-major.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_diag(diag: &[Complex64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = d;
        }
        m
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let d: Vec<Complex64> = diag.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::from_diag(&d)
    }

    /// Builds a matrix from row-major entries, checking the shape and that every entry is finite.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!("empty matrix {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} entries cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Validation("matrix has non-finite entries".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Self::from_vec(r, c, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Outer product |a⟩⟨b|.
    pub fn outer(a: &[Complex64], b: &[Complex64]) -> Self {
        Self::from_fn(a.len(), b.len(), |i, j| a[i] * b[j].conj())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<Complex64>> {
        self.data.chunks(self.cols).map(<[_]>::to_vec).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    /// `self += s * other`; shapes must agree.
    pub fn add_scaled(&mut self, other: &Self, s: Complex64) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Frobenius norm of `self† self - I`.
    pub fn unitarity_residual(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let g = self.adjoint().matmul(self);
        (&g - &Self::identity(self.rows)).frobenius_norm()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square() && self.max_abs_diff(&self.adjoint()) <= tol
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, x.len());
        self.data
            .chunks(self.cols)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `self† x` without forming the adjoint.
    pub fn adjoint_matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.rows, x.len());
        let mut out = vec![Complex64::new(0.0, 0.0); self.cols];
        for (row, &xi) in self.data.chunks(self.cols).zip(x) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a.conj() * xi;
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(
            self.cols, other.rows,
            "matmul shape mismatch {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let (n, p) = (self.cols, other.cols);
        let mut data = vec![Complex64::new(0.0, 0.0); self.rows * p];
        let row_kernel = |(i, out): (usize, &mut [Complex64])| {
            let a_row = &self.data[i * n..(i + 1) * n];
            for (k, &a) in a_row.iter().enumerate() {
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let b_row = &other.data[k * p..(k + 1) * p];
                for (o, &b) in out.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        };
        if self.rows >= PAR_MATMUL_MIN_DIM && p >= PAR_MATMUL_MIN_DIM {
            data.par_chunks_mut(p).enumerate().for_each(row_kernel);
        } else {
            data.chunks_mut(p).enumerate().for_each(row_kernel);
        }
        Self {
            rows: self.rows,
            cols: p,
            data,
        }
    }

    /// Integer power by repeated squaring.
    pub fn pow(&self, m: u64) -> Self {
        assert!(self.is_square());
        let mut result = Self::identity(self.rows);
        if m == 0 {
            return result;
        }
        let mut base = self.clone();
        let mut e = m;
        let mut first = true;
        loop {
            if e & 1 == 1 {
                result = if first { base.clone() } else { result.matmul(&base) };
                first = false;
            }
            e >>= 1;
            if e == 0 {
                break;
            }
            base = base.matmul(&base);
        }
        result
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl AddAssign<&ComplexMatrix> for ComplexMatrix {
    fn add_assign(&mut self, rhs: &ComplexMatrix) {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for row in self.data.chunks(self.cols) {
            write!(f, "  ")?;
            for z in row {
                write!(f, "{:+.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Kronecker product with the default element cap.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    kron_with_cap(a, b, DEFAULT_ELEMENT_CAP)
}

pub fn kron_with_cap(a: &ComplexMatrix, b: &ComplexMatrix, cap: u64) -> Result<ComplexMatrix> {
    let rows = a.rows as u64 * b.rows as u64;
    let cols = a.cols as u64 * b.cols as u64;
    let requested = rows.saturating_mul(cols);
    if requested > cap {
        return Err(Error::Capacity { requested, cap });
    }
    let (rows, cols) = (rows as usize, cols as usize);
    let mut data = vec![Complex64::new(0.0, 0.0); rows * cols];
    for ai in 0..a.rows {
        for bi in 0..b.rows {
            let out_row = &mut data[(ai * b.rows + bi) * cols..(ai * b.rows + bi + 1) * cols];
            for aj in 0..a.cols {
                let x = a[(ai, aj)];
                let dst = &mut out_row[aj * b.cols..(aj + 1) * b.cols];
                for (o, &y) in dst.iter_mut().zip(b.row(bi)) {
                    *o = x * y;
                }
            }
        }
    }
    Ok(ComplexMatrix { rows, cols, data })
}

/// Reduced matrix on the `keep` subsystems of a square matrix over a tensor product with
/// subsystem dimensions `dims` (subsystem 0 is the most significant index).
pub fn partial_trace(m: &ComplexMatrix, dims: &[usize], keep: &[usize]) -> Result<ComplexMatrix> {
    if !m.is_square() {
        return Err(Error::Shape(format!(
            "partial trace of non-square {}x{}",
            m.rows, m.cols
        )));
    }
    let total: usize = dims.iter().product();
    if dims.is_empty() || total != m.rows {
        return Err(Error::Shape(format!(
            "subsystem dims {dims:?} do not factor dimension {}",
            m.rows
        )));
    }
    if keep.is_empty() || keep.iter().any(|&k| k >= dims.len()) {
        return Err(Error::Shape(format!(
            "keep set {keep:?} invalid for {} subsystems",
            dims.len()
        )));
    }
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !kept.contains(i)).collect();
    let kept_dim: usize = kept.iter().map(|&i| dims[i]).product();
    let traced_dim: usize = traced.iter().map(|&i| dims[i]).product();

    // Row-major strides of the full index.
    let mut strides = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    let offset = |sel: &[usize], mut idx: usize| -> usize {
        let mut off = 0;
        for &s in sel.iter().rev() {
            off += (idx % dims[s]) * strides[s];
            idx /= dims[s];
        }
        off
    };
    let kept_offsets: Vec<usize> = (0..kept_dim).map(|i| offset(&kept, i)).collect();
    let traced_offsets: Vec<usize> = (0..traced_dim).map(|i| offset(&traced, i)).collect();

    let mut out = ComplexMatrix::zeros(kept_dim, kept_dim);
    for (a, &ra) in kept_offsets.iter().enumerate() {
        for (b, &cb) in kept_offsets.iter().enumerate() {
            out[(a, b)] = traced_offsets.iter().map(|&t| m[(ra + t, cb + t)]).sum();
        }
    }
    Ok(out)
}

/// Reduced density matrix of a pure state on the `keep` subsystems, without forming |ψ⟩⟨ψ|.
pub fn reduced_state(psi: &[Complex64], dims: &[usize], keep: &[usize]) -> Result<ComplexMatrix> {
    let total: usize = dims.iter().product();
    if total != psi.len() {
        return Err(Error::Shape(format!("state of length {} vs dims {dims:?}", psi.len())));
    }
    if keep.is_empty() || keep.iter().any(|&k| k >= dims.len()) {
        return Err(Error::Shape(format!(
            "keep set {keep:?} invalid for {} subsystems",
            dims.len()
        )));
    }
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !kept.contains(i)).collect();
    let kept_dim: usize = kept.iter().map(|&i| dims[i]).product();
    let traced_dim: usize = traced.iter().map(|&i| dims[i]).product();
    let mut strides = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    let offset = |sel: &[usize], mut idx: usize| -> usize {
        let mut off = 0;
        for &s in sel.iter().rev() {
            off += (idx % dims[s]) * strides[s];
            idx /= dims[s];
        }
        off
    };
    let kept_offsets: Vec<usize> = (0..kept_dim).map(|i| offset(&kept, i)).collect();
    let traced_offsets: Vec<usize> = (0..traced_dim).map(|i| offset(&traced, i)).collect();
    // Reshape ψ into a kept × traced matrix A; ρ = A A†.
    let a = ComplexMatrix::from_fn(kept_dim, traced_dim, |i, t| psi[kept_offsets[i] + traced_offsets[t]]);
    Ok(a.matmul(&a.adjoint()))
}

pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn vector_norm(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Householder QR of a square matrix: returns `(q, r)` with `q` unitary and `r` upper triangular.
/// The diagonal of `r` carries arbitrary phases.
pub fn qr(a: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    if !a.is_square() {
        return Err(Error::Shape(format!("qr of non-square {}x{}", a.rows, a.cols)));
    }
    let n = a.rows;
    let mut r = a.clone();
    let mut q = ComplexMatrix::identity(n);
    for k in 0..n.saturating_sub(1) {
        let x: Vec<Complex64> = (k..n).map(|i| r[(i, k)]).collect();
        let xnorm = vector_norm(&x);
        if xnorm == 0.0 {
            continue;
        }
        let phase = if x[0].norm() > 0.0 {
            x[0] / x[0].norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let alpha = -phase * xnorm;
        let mut v = x;
        v[0] -= alpha;
        let vnorm = vector_norm(&v);
        if vnorm == 0.0 {
            continue;
        }
        for z in &mut v {
            *z /= vnorm;
        }
        // R <- (I - 2vv†) R on rows k..n
        for j in 0..n {
            let s: Complex64 = (k..n).map(|i| v[i - k].conj() * r[(i, j)]).sum();
            for i in k..n {
                r[(i, j)] -= 2.0 * v[i - k] * s;
            }
        }
        // Q <- Q (I - 2vv†) on columns k..n
        for i in 0..n {
            let s: Complex64 = (k..n).map(|j| q[(i, j)] * v[j - k]).sum();
            for j in k..n {
                q[(i, j)] -= 2.0 * s * v[j - k].conj();
            }
        }
    }
    for i in 1..n {
        for j in 0..i {
            r[(i, j)] = Complex64::new(0.0, 0.0);
        }
    }
    Ok((q, r))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pauli_x() -> ComplexMatrix {
        ComplexMatrix::from_rows(&[vec![c(0., 0.), c(1., 0.)], vec![c(1., 0.), c(0., 0.)]]).unwrap()
    }

    #[test]
    fn kron_identities() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(kron(&i2, &i2).unwrap(), ComplexMatrix::identity(4));
        let d = ComplexMatrix::from_real_diag(&[1.0, 2.0]);
        assert_eq!(
            kron(&d, &i2).unwrap(),
            ComplexMatrix::from_real_diag(&[1.0, 1.0, 2.0, 2.0])
        );
    }

    #[test]
    fn kron_matches_four_index_definition() {
        let x = pauli_x();
        let k = kron(&x, &x).unwrap();
        for i1 in 0..2 {
            for i2 in 0..2 {
                for j1 in 0..2 {
                    for j2 in 0..2 {
                        assert_eq!(k[(2 * i1 + i2, 2 * j1 + j2)], x[(i1, j1)] * x[(i2, j2)]);
                    }
                }
            }
        }
        assert_eq!(k[(3, 0)], c(1.0, 0.0));
    }

    #[test]
    fn kron_respects_cap() {
        let a = ComplexMatrix::identity(8);
        match kron_with_cap(&a, &a, 63) {
            Err(Error::Capacity {
                requested: 4096,
                cap: 63,
            }) => {}
            other => panic!("expected capacity error, got {other:?}"),
        }
    }

    #[test]
    fn partial_trace_simple_cases() {
        let pt = partial_trace(&ComplexMatrix::identity(4), &[2, 2], &[0]).unwrap();
        assert_eq!(pt, ComplexMatrix::identity(2).scale_real(2.0));
        let mut zero = vec![c(0., 0.); 4];
        zero[0] = c(1., 0.);
        let rho = ComplexMatrix::outer(&zero, &zero);
        let pt = partial_trace(&rho, &[2, 2], &[0]).unwrap();
        assert_eq!(pt, ComplexMatrix::from_real_diag(&[1.0, 0.0]));
    }

    #[test]
    fn partial_trace_shape_errors() {
        let m = ComplexMatrix::identity(4);
        assert!(matches!(partial_trace(&m, &[2, 3], &[0]), Err(Error::Shape(_))));
        assert!(matches!(partial_trace(&m, &[2, 2], &[2]), Err(Error::Shape(_))));
        assert!(matches!(partial_trace(&m, &[2, 2], &[]), Err(Error::Shape(_))));
    }

    #[test]
    fn reduced_state_matches_partial_trace() {
        let psi: Vec<Complex64> = (0..8).map(|k| c(k as f64 * 0.1 + 0.3, 0.2 - 0.05 * k as f64)).collect();
        let n = vector_norm(&psi);
        let psi: Vec<Complex64> = psi.iter().map(|z| z / n).collect();
        let rho = ComplexMatrix::outer(&psi, &psi);
        for keep in [vec![0], vec![1], vec![2], vec![0, 2], vec![1, 2]] {
            let a = partial_trace(&rho, &[2, 2, 2], &keep).unwrap();
            let b = reduced_state(&psi, &[2, 2, 2], &keep).unwrap();
            assert!(a.max_abs_diff(&b) < 1e-14, "keep {keep:?}");
        }
    }

    #[test]
    fn qr_reconstructs() {
        let a = ComplexMatrix::from_fn(5, 5, |i, j| {
            c((i * 7 + j * 3) as f64 % 5.0 - 2.0, (i + 2 * j) as f64 % 3.0 - 1.0)
        });
        let (q, r) = qr(&a).unwrap();
        assert!(q.unitarity_residual() < 1e-13);
        assert!(q.matmul(&r).max_abs_diff(&a) < 1e-12);
        for i in 1..5 {
            for j in 0..i {
                assert_eq!(r[(i, j)], c(0.0, 0.0));
            }
        }
    }

    #[test]
    fn pow_by_squaring() {
        let m = ComplexMatrix::from_rows(&[vec![c(0.5, 0.1), c(0.2, 0.0)], vec![c(-0.3, 0.2), c(0.9, -0.4)]]).unwrap();
        let mut naive = ComplexMatrix::identity(2);
        for k in 0..=13u64 {
            assert!(m.pow(k).max_abs_diff(&naive) < 1e-14, "power {k}");
            naive = naive.matmul(&m);
        }
    }

    #[test]
    fn from_vec_rejects_non_finite() {
        assert!(ComplexMatrix::from_vec(1, 1, vec![c(f64::NAN, 0.0)]).is_err());
        assert!(ComplexMatrix::from_vec(2, 1, vec![c(1.0, 0.0)]).is_err());
    }
}

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ensemble::det_one_projection;
use crate::error::{Error, Result};
use crate::numkernel::ComplexMatrix;

/// Largest spin (as 2j) accepted by `wigner_d` unless a limit is given explicitly.
pub const DEFAULT_TWICE_J_MAX: u32 = 12;

const LOG_FACTORIAL_LEN: usize = 171;

/// Spin label j ≥ 0, stored as the integer 2j.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Spin {
    pub twice_j: u32,
}

impl Spin {
    pub const ZERO: Spin = Spin { twice_j: 0 };

    pub fn from_twice(twice_j: u32) -> Self {
        Self { twice_j }
    }

    pub fn integer(j: u32) -> Self {
        Self { twice_j: 2 * j }
    }

    pub fn dim(self) -> usize {
        self.twice_j as usize + 1
    }

    pub fn j(self) -> f64 {
        self.twice_j as f64 / 2.0
    }

    pub fn is_trivial(self) -> bool {
        self.twice_j == 0
    }

    /// 0, 1/2, 1, …, up to and including `max`.
    pub fn up_to(max: Spin) -> impl Iterator<Item = Spin> {
        (0..=max.twice_j).map(Spin::from_twice)
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.twice_j.is_multiple_of(2) {
            write!(f, "{}", self.twice_j / 2)
        } else {
            write!(f, "{}/2", self.twice_j)
        }
    }
}

impl FromStr for Spin {
    type Err = Error;

    /// Accepts `3`, `5/2` or `2.5`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Usage(format!("`{s}` is not a nonnegative half-integer"));
        let s = s.trim();
        if let Some((num, den)) = s.split_once('/') {
            if den.trim() != "2" {
                return Err(bad());
            }
            let n: u32 = num.trim().parse().map_err(|_| bad())?;
            return Ok(Spin::from_twice(n));
        }
        let x: f64 = s.parse().map_err(|_| bad())?;
        let twice = 2.0 * x;
        if twice.is_nan() || twice < 0.0 || twice.fract() != 0.0 || twice > u32::MAX as f64 {
            return Err(bad());
        }
        Ok(Spin::from_twice(twice as u32))
    }
}

fn log_factorial(n: usize) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = vec![0.0; LOG_FACTORIAL_LEN];
        for k in 1..LOG_FACTORIAL_LEN {
            t[k] = t[k - 1] + (k as f64).ln();
        }
        t
    });
    table[n]
}

/// Little-d matrix d^j(β); row/column index i corresponds to m = j − i.
pub fn little_d(spin: Spin, beta: f64) -> Vec<Vec<f64>> {
    let tj = spin.twice_j as usize;
    assert!(tj < LOG_FACTORIAL_LEN, "spin too large for the factorial table");
    let (s, c) = (beta / 2.0).sin_cos();
    let mut d = vec![vec![0.0; tj + 1]; tj + 1];
    for (i, row) in d.iter_mut().enumerate() {
        for (l, entry) in row.iter_mut().enumerate() {
            let prefactor = 0.5 * (log_factorial(tj - i) + log_factorial(i) + log_factorial(tj - l) + log_factorial(l));
            let k_lo = i.saturating_sub(l);
            let k_hi = (tj - l).min(i);
            let mut sum = 0.0;
            for k in k_lo..=k_hi {
                let log_mag = prefactor
                    - log_factorial(tj - l - k)
                    - log_factorial(k)
                    - log_factorial(i - k)
                    - log_factorial(k + l - i);
                let sign = if (k + l - i) % 2 == 0 { 1.0 } else { -1.0 };
                let cos_pow = (tj + i - l - 2 * k) as i32;
                let sin_pow = (2 * k + l - i) as i32;
                sum += sign * log_mag.exp() * c.powi(cos_pow) * s.powi(sin_pow);
            }
            *entry = sum;
        }
    }
    d
}

/// D^j(α, β, γ) = e^{−i m′ α} d^j_{m′m}(β) e^{−i m γ} in the z-y-z convention.
pub fn wigner_d_euler(spin: Spin, alpha: f64, beta: f64, gamma: f64) -> ComplexMatrix {
    let d = little_d(spin, beta);
    let tj = spin.twice_j as f64;
    ComplexMatrix::from_fn(spin.dim(), spin.dim(), |i, l| {
        let m_row = (tj - 2.0 * i as f64) / 2.0;
        let m_col = (tj - 2.0 * l as f64) / 2.0;
        Complex64::from_polar(d[i][l], -(m_row * alpha + m_col * gamma))
    })
}

/// z-y-z Euler angles of an SU(2) element `[[a, b], [−b̄, ā]]`, chosen so that
/// `wigner_d_euler(1/2, …)` reproduces the element exactly. At β = 0 and β = π only one
/// combination of α and γ is determined; γ is then set to 0 and absorbed into α.
pub fn euler_zyz(g: &ComplexMatrix) -> (f64, f64, f64) {
    let a = g[(0, 0)];
    let b = g[(0, 1)];
    let beta = 2.0 * b.norm().atan2(a.norm());
    const EPS: f64 = 1e-15;
    if b.norm() < EPS {
        return (-2.0 * a.arg(), beta, 0.0);
    }
    if a.norm() < EPS {
        return (-2.0 * (-b).arg(), beta, 0.0);
    }
    let alpha = -a.arg() - (-b).arg();
    let gamma = -a.arg() + (-b).arg();
    (alpha, beta, gamma)
}

/// SU(2) element with the given Euler angles.
pub fn su2_from_euler(alpha: f64, beta: f64, gamma: f64) -> ComplexMatrix {
    wigner_d_euler(Spin::from_twice(1), alpha, beta, gamma)
}

/// Spin-j representation matrix of a single-qubit unitary, after removing its global phase.
pub fn wigner_d(spin: Spin, g: &ComplexMatrix) -> Result<ComplexMatrix> {
    wigner_d_with_limit(spin, g, Spin::from_twice(DEFAULT_TWICE_J_MAX))
}

pub fn wigner_d_with_limit(spin: Spin, g: &ComplexMatrix, limit: Spin) -> Result<ComplexMatrix> {
    if spin > limit {
        return Err(Error::Limit(format!("spin {spin} exceeds j_max = {limit}")));
    }
    if g.rows() != 2 || g.cols() != 2 {
        return Err(Error::Shape(format!(
            "wigner_d needs a 2x2 unitary, got {}x{}",
            g.rows(),
            g.cols()
        )));
    }
    let s = det_one_projection(g);
    let (alpha, beta, gamma) = euler_zyz(&s);
    Ok(wigner_d_euler(spin, alpha, beta, gamma))
}

/// Dimension d^{(D)}_{k,l} = (k+l+D−1)/(D−1) · C(k+D−2, k) · C(l+D−2, l) of the U(D) irrep
/// labelled by `(k, l)`.
pub fn irrep_dim(big_d: u64, k: u64, l: u64) -> Result<u64> {
    if big_d < 2 {
        return Err(Error::Precondition(format!("irrep_dim needs D ≥ 2, got {big_d}")));
    }
    let overflow = || Error::Limit(format!("irrep dimension for D={big_d}, (k,l)=({k},{l}) overflows"));
    let lead = k as u128 + l as u128 + big_d as u128 - 1;
    let numerator = lead
        .checked_mul(binomial(k + big_d - 2, k).ok_or_else(overflow)?)
        .and_then(|x| x.checked_mul(binomial(l + big_d - 2, l)?))
        .ok_or_else(overflow)?;
    let denom = (big_d - 1) as u128;
    if numerator % denom != 0 {
        return Err(Error::Internal(format!(
            "dimension formula gave non-integer {numerator}/{denom} for D={big_d}, (k,l)=({k},{l})"
        )));
    }
    u64::try_from(numerator / denom).map_err(|_| overflow())
}

/// Exact binomial coefficient, `None` on overflow.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

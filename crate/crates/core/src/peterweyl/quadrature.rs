use std::f64::consts::PI;

use rayon::prelude::*;

use crate::numkernel::ComplexMatrix;

use super::wigner::su2_from_euler;

pub const DEFAULT_RESOLUTION: usize = 48;

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Three-term recurrence for P_n(x) and its derivative.
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pn_1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn_1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((x, w));
    }
    out
}

/// One node of the Euler-angle product grid.
#[derive(Clone, Copy, Debug)]
pub struct QuadratureNode {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub weight: f64,
}

impl QuadratureNode {
    pub fn element(&self) -> ComplexMatrix {
        su2_from_euler(self.alpha, self.beta, self.gamma)
    }
}

/// Product grid for normalized Haar measure on SU(2): uniform α ∈ [0, 2π), uniform
/// γ ∈ [0, 4π), Gauss–Legendre in cos β.
#[derive(Clone, Debug)]
pub struct QuadratureGrid {
    resolution: usize,
    nodes: Vec<QuadratureNode>,
}

impl QuadratureGrid {
    pub fn new(resolution: usize) -> Self {
        let n = resolution;
        let gl = gauss_legendre(n);
        let mut nodes = Vec::with_capacity(n * n * n);
        for p in 0..n {
            let alpha = 2.0 * PI * p as f64 / n as f64;
            for &(x, w) in &gl {
                let beta = x.acos();
                for q in 0..n {
                    let gamma = 4.0 * PI * q as f64 / n as f64;
                    nodes.push(QuadratureNode {
                        alpha,
                        beta,
                        gamma,
                        weight: w / (2.0 * (n * n) as f64),
                    });
                }
            }
        }
        Self { resolution, nodes }
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn nodes(&self) -> &[QuadratureNode] {
        &self.nodes
    }

    /// ∫ f dμ, accumulated per α-slab in parallel and combined in slab order.
    pub fn integrate<T, F>(&self, zero: T, f: F) -> T
    where
        T: Clone + Send + Sync,
        F: Fn(&QuadratureNode) -> T + Sync,
        for<'a> T: std::ops::AddAssign<&'a T>,
    {
        let slab = self.resolution * self.resolution;
        let partial: Vec<T> = self
            .nodes
            .par_chunks(slab)
            .map(|chunk| {
                let mut acc = zero.clone();
                for node in chunk {
                    acc += &f(node);
                }
                acc
            })
            .collect();
        let mut total = zero;
        for p in &partial {
            total += p;
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_weights_and_moments() {
        for n in [1, 2, 5, 16, 48] {
            let gl = gauss_legendre(n);
            let wsum: f64 = gl.iter().map(|&(_, w)| w).sum();
            assert!((wsum - 2.0).abs() < 1e-13, "n = {n}");
            // Exact for x^(2n-2): ∫ x^(2n-2) dx = 2/(2n-1).
            let deg = 2 * n - 2;
            let m: f64 = gl.iter().map(|&(x, w)| w * x.powi(deg as i32)).sum();
            assert!((m - 2.0 / (deg as f64 + 1.0)).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn grid_weights_sum_to_one() {
        let g = QuadratureGrid::new(12);
        let total: f64 = g.nodes().iter().map(|n| n.weight).sum();
        assert!((total - 1.0).abs() < 1e-10);
        assert!(g.nodes().iter().all(|n| n.weight > 0.0));
    }
}

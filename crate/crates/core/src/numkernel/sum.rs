//! Order-stable reductions. Results depend only on the item order, never on thread count.

use std::ops::AddAssign;

use rayon::prelude::*;

/// Items per sequential block before pairwise combination.
pub const BLOCK: usize = 256;

/// Pairwise (cascade) summation of `values`.
pub fn pairwise_sum<T>(values: &[T]) -> T
where
    T: Clone + AddAssign + Default,
{
    if values.len() <= 8 {
        let mut acc = T::default();
        for v in values {
            acc += v.clone();
        }
        return acc;
    }
    let mid = values.len() / 2;
    let mut left = pairwise_sum(&values[..mid]);
    left += pairwise_sum(&values[mid..]);
    left
}

/// Sums `f(i)` for `i in 0..n`, evaluating in parallel over fixed blocks of `BLOCK` indices.
/// Each block is summed sequentially and the block totals are combined pairwise, so the
/// result is bit-identical for any rayon pool size.
pub fn par_block_sum<T, F>(n: usize, zero: T, f: F) -> T
where
    T: Clone + Send + Sync,
    F: Fn(usize) -> T + Sync,
    for<'a> T: AddAssign<&'a T>,
{
    let blocks: Vec<T> = (0..n.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut acc = zero.clone();
            for i in b * BLOCK..((b + 1) * BLOCK).min(n) {
                acc += &f(i);
            }
            acc
        })
        .collect();
    tree_reduce(blocks, zero)
}

fn tree_reduce<T>(mut items: Vec<T>, zero: T) -> T
where
    T: Clone,
    for<'a> T: AddAssign<&'a T>,
{
    if items.is_empty() {
        return zero;
    }
    while items.len() > 1 {
        let mut next = Vec::with_capacity(items.len().div_ceil(2));
        let mut it = items.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                a += &b;
            }
            next.push(a);
        }
        items = next;
    }
    items.pop().unwrap()
}

/// Running first and second moments of a real statistic.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    pub n: f64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn of(x: f64) -> Self {
        Self {
            n: 1.0,
            sum: x,
            sum_sq: x * x,
        }
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.n
    }

    /// Standard error of the mean (sample standard deviation / √n).
    pub fn std_error(&self) -> f64 {
        if self.n < 2.0 {
            return 0.0;
        }
        let mean = self.mean();
        let var = ((self.sum_sq - self.n * mean * mean) / (self.n - 1.0)).max(0.0);
        (var / self.n).sqrt()
    }
}

impl AddAssign<&Moments> for Moments {
    fn add_assign(&mut self, rhs: &Moments) {
        self.n += rhs.n;
        self.sum += rhs.sum;
        self.sum_sq += rhs.sum_sq;
    }
}

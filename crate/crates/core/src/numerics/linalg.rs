//! Dense LU factorisation with partial pivoting for the small systems that
//! arise in implicit collocation.

use crate::scalar::Real;

/// Row-major square matrix of dimension `n`.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    n: usize,
    a: Vec<T>,
    piv: Vec<usize>,
}

impl<T: Real> Lu<T> {
    /// Factorises `a` (row-major, `n*n`). Returns `None` for an exactly singular pivot.
    pub fn new(mut a: Vec<T>, n: usize) -> Option<Self> {
        assert_eq!(a.len(), n * n);
        let mut piv: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let p = (col..n)
                .max_by(|&i, &j| {
                    a[i * n + col]
                        .abs()
                        .partial_cmp(&a[j * n + col].abs())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .unwrap();
            if a[p * n + col] == T::zero() || !a[p * n + col].is_finite() {
                return None;
            }
            if p != col {
                for c in 0..n {
                    a.swap(p * n + c, col * n + c);
                }
                piv.swap(p, col);
            }
            let d = a[col * n + col];
            for r in col + 1..n {
                let f = a[r * n + col] / d;
                a[r * n + col] = f;
                for c in col + 1..n {
                    a[r * n + c] = a[r * n + c] - f * a[col * n + c];
                }
            }
        }
        Some(Self { n, a, piv })
    }

    /// Solves `A x = b` in place.
    pub fn solve(&self, b: &mut [T]) {
        let n = self.n;
        let mut x: Vec<T> = self.piv.iter().map(|&p| b[p]).collect();
        for r in 0..n {
            let mut s = x[r];
            for c in 0..r {
                s = s - self.a[r * n + c] * x[c];
            }
            x[r] = s;
        }
        for r in (0..n).rev() {
            let mut s = x[r];
            for c in r + 1..n {
                s = s - self.a[r * n + c] * x[c];
            }
            x[r] = s / self.a[r * n + r];
        }
        b.copy_from_slice(&x);
    }
}

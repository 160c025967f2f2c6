//! Piecewise quintic Hermite interpolation from values and two derivatives.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Interpolant through `(x_i, y_i, y'_i, y''_i)` with strictly increasing `x`.
#[derive(Debug, Clone)]
pub struct QuinticHermite<T> {
    x: Vec<T>,
    y: Vec<[T; 3]>,
}

impl<T: Real> QuinticHermite<T> {
    pub fn new(x: Vec<T>, y: Vec<[T; 3]>) -> Result<Self> {
        if x.len() < 2 || x.len() != y.len() {
            return Err(Error::domain(
                "Hermite table needs at least two matching nodes",
            ));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("Hermite nodes must be strictly increasing"));
        }
        Ok(Self { x, y })
    }

    pub fn domain(&self) -> (T, T) {
        (self.x[0], *self.x.last().unwrap())
    }

    pub fn nodes(&self) -> &[T] {
        &self.x
    }

    /// Value and first two derivatives at `t`. Outside the table the end
    /// segments are extrapolated.
    pub fn eval(&self, t: T) -> [T; 3] {
        let n = self.x.len();
        let i = match self
            .x
            .binary_search_by(|p| p.partial_cmp(&t).unwrap_or(std::cmp::Ordering::Less))
        {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        };
        let (x0, x1) = (self.x[i], self.x[i + 1]);
        let h = x1 - x0;
        let s = (t - x0) / h;
        let (p, q) = (self.y[i], self.y[i + 1]);
        // Represent on [0,1] in the scaled variable: derivatives scale by h, h^2.
        let (y0, d0, e0) = (p[0], p[1] * h, p[2] * h * h);
        let (y1, d1, e1) = (q[0], q[1] * h, q[2] * h * h);
        let hf = T::half();
        // Coefficients of c0 + c1 s + ... + c5 s^5.
        let c0 = y0;
        let c1 = d0;
        let c2 = hf * e0;
        let c3 = T::lit(10.0) * (y1 - y0) - T::lit(6.0) * d0 - T::lit(4.0) * d1 - T::lit(1.5) * e0
            + hf * e1;
        let c4 =
            T::lit(-15.0) * (y1 - y0) + T::lit(8.0) * d0 + T::lit(7.0) * d1 + T::lit(1.5) * e0 - e1;
        let c5 = T::lit(6.0) * (y1 - y0) - T::lit(3.0) * (d0 + d1) - hf * e0 + hf * e1;
        let v = c0 + s * (c1 + s * (c2 + s * (c3 + s * (c4 + s * c5))));
        let dv = c1
            + s * (T::two() * c2
                + s * (T::lit(3.0) * c3 + s * (T::lit(4.0) * c4 + s * T::lit(5.0) * c5)));
        let ddv = T::two() * c2
            + s * (T::lit(6.0) * c3 + s * (T::lit(12.0) * c4 + s * T::lit(20.0) * c5));
        [v, dv / h, ddv / (h * h)]
    }
}

//! Explicit adaptive Dormand–Prince 5(4) with dense output.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy)]
pub struct Dopri5Options<T> {
    pub rtol: T,
    pub atol: T,
    /// Initial step; zero selects one from the local derivative.
    pub h_init: T,
    pub h_max: T,
    pub max_steps: usize,
}

impl<T: Real> Default for Dopri5Options<T> {
    fn default() -> Self {
        Self {
            rtol: T::lit(1e-10),
            atol: T::lit(1e-12),
            h_init: T::zero(),
            h_max: T::infinity(),
            max_steps: 100_000_000,
        }
    }
}

/// An accepted step with its continuous extension.
#[derive(Debug, Clone, Copy)]
pub struct DenseStep<T, const N: usize> {
    pub x0: T,
    pub h: T,
    pub y0: [T; N],
    pub y1: [T; N],
    r: [[T; N]; 5],
}

impl<T: Real, const N: usize> DenseStep<T, N> {
    pub fn x1(&self) -> T {
        self.x0 + self.h
    }

    /// Fourth-order interpolant at `x` in `[x0, x0 + h]`.
    pub fn eval(&self, x: T) -> [T; N] {
        let th = (x - self.x0) / self.h;
        let th1 = T::one() - th;
        let mut out = [T::zero(); N];
        for i in 0..N {
            let r = &self.r;
            out[i] = r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i])));
        }
        out
    }
}

/// Outcome of an integration.
#[derive(Debug, Clone, Copy)]
pub struct Dopri5Outcome<T, const N: usize> {
    pub x: T,
    pub y: [T; N],
    pub accepted: usize,
    pub rejected: usize,
    /// True when the observer requested termination before `x_end`.
    pub stopped: bool,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn comb<T: Real, const N: usize>(y: &[T; N], h: T, terms: &[(f64, &[T; N])]) -> [T; N] {
    let mut out = *y;
    for (c, k) in terms {
        let hc = h * T::lit(*c);
        for i in 0..N {
            out[i] = out[i] + hc * k[i];
        }
    }
    out
}

fn rms<T: Real, const N: usize>(v: &[T; N], y: &[T; N], opts: &Dopri5Options<T>) -> T {
    let s: T = (0..N)
        .map(|i| (v[i] / (opts.atol + opts.rtol * y[i].abs())).powi(2))
        .sum();
    (s / T::from_usize_lossy(N.max(1))).sqrt()
}

// Starting step selection of Hairer, Nørsett & Wanner (II.4).
fn initial_step<T: Real, const N: usize, F: FnMut(T, &[T; N]) -> [T; N]>(
    f: &mut F,
    x: T,
    y: &[T; N],
    f0: &[T; N],
    dir: T,
    opts: &Dopri5Options<T>,
) -> T {
    let d0 = rms(y, y, opts);
    let d1 = rms(f0, y, opts);
    let h0 = if d0 < T::lit(1e-5) || d1 < T::lit(1e-5) {
        T::lit(1e-6)
    } else {
        T::lit(0.01) * d0 / d1
    };
    let y1 = comb(y, h0 * dir, &[(1.0, f0)]);
    let f1 = f(x + h0 * dir, &y1);
    let mut df = [T::zero(); N];
    for i in 0..N {
        df[i] = f1[i] - f0[i];
    }
    let d2 = rms(&df, y, opts) / h0;
    let dm = d1.max(d2);
    let h1 = if dm <= T::lit(1e-15) {
        (h0 * T::lit(1e-3)).max(T::lit(1e-6))
    } else {
        (T::lit(0.01) / dm).powf(T::lit(0.2))
    };
    (T::lit(100.0) * h0).min(h1)
}

/// Integrates `y' = f(x, y)` from `x0` to `x_end`. The observer sees every
/// accepted step and may return `false` to stop early (used for divergence
/// detection). Fails on step-size underflow or an exhausted step budget.
pub fn dopri5<T, const N: usize, F, O>(
    mut f: F,
    x0: T,
    y0: [T; N],
    x_end: T,
    opts: &Dopri5Options<T>,
    mut observer: O,
) -> Result<Dopri5Outcome<T, N>>
where
    T: Real,
    F: FnMut(T, &[T; N]) -> [T; N],
    O: FnMut(&DenseStep<T, N>) -> bool,
{
    let dir = if x_end >= x0 { T::one() } else { -T::one() };
    let mut x = x0;
    let mut y = y0;
    let mut k1 = f(x, &y);
    let span = (x_end - x0).abs();
    let mut h = if opts.h_init > T::zero() {
        opts.h_init
    } else {
        initial_step(&mut f, x, &y, &k1, dir, opts)
    }
    .min(span)
    .min(opts.h_max);
    let mut err_old = T::lit(1e-4);
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let beta = T::lit(0.04);
    let expo = T::lit(0.2) - beta * T::lit(0.75);

    while (x_end - x) * dir > T::zero() {
        if accepted + rejected >= opts.max_steps {
            return Err(Error::StepBudget {
                budget: opts.max_steps,
                at: x.to_f64().unwrap_or(f64::NAN),
                diagnostics: format!("step size {:e}", h.to_f64().unwrap_or(0.0)),
            });
        }
        let remaining = (x_end - x).abs();
        let last = h >= remaining;
        let hh = if last { remaining } else { h };
        let hs = hh * dir;
        let k2 = f(x + T::lit(C2) * hs, &comb(&y, hs, &[(A21, &k1)]));
        let k3 = f(
            x + T::lit(C3) * hs,
            &comb(&y, hs, &[(A31, &k1), (A32, &k2)]),
        );
        let k4 = f(
            x + T::lit(C4) * hs,
            &comb(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
        );
        let k5 = f(
            x + T::lit(C5) * hs,
            &comb(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = f(
            x + hs,
            &comb(
                &y,
                hs,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            ),
        );
        let y1 = comb(
            &y,
            hs,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        let x1 = if last { x_end } else { x + hs };
        let k7 = f(x1, &y1);
        let mut err = T::zero();
        for i in 0..N {
            let e = hs
                * (T::lit(E1) * k1[i]
                    + T::lit(E3) * k3[i]
                    + T::lit(E4) * k4[i]
                    + T::lit(E5) * k5[i]
                    + T::lit(E6) * k6[i]
                    + T::lit(E7) * k7[i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(y1[i].abs());
            err = err + (e / sc).powi(2);
        }
        err = (err / T::from_usize_lossy(N.max(1))).sqrt();

        if !err.is_finite() {
            h = hh * T::lit(0.1);
            rejected += 1;
        } else if err <= T::one() {
            let mut r = [[T::zero(); N]; 5];
            for i in 0..N {
                let dy = y1[i] - y[i];
                let bspl = hs * k1[i] - dy;
                r[0][i] = y[i];
                r[1][i] = dy;
                r[2][i] = bspl;
                r[3][i] = dy - hs * k7[i] - bspl;
                r[4][i] = hs
                    * (T::lit(D1) * k1[i]
                        + T::lit(D3) * k3[i]
                        + T::lit(D4) * k4[i]
                        + T::lit(D5) * k5[i]
                        + T::lit(D6) * k6[i]
                        + T::lit(D7) * k7[i]);
            }
            let step = DenseStep {
                x0: x,
                h: hs,
                y0: y,
                y1,
                r,
            };
            accepted += 1;
            x = x1;
            y = y1;
            k1 = k7;
            if !observer(&step) {
                return Ok(Dopri5Outcome {
                    x,
                    y,
                    accepted,
                    rejected,
                    stopped: true,
                });
            }
            let e = err.max(T::lit(1e-10));
            let fac = (T::lit(0.9) * e.powf(-expo) * err_old.powf(beta))
                .max(T::lit(0.2))
                .min(T::lit(10.0));
            err_old = e.max(T::lit(1e-4));
            h = (hh * fac).min(opts.h_max);
        } else {
            rejected += 1;
            let fac = (T::lit(0.9) * err.powf(-T::lit(0.2))).max(T::lit(0.2));
            h = hh * fac;
        }
        let tiny = x.abs().max(span * T::lit(1e-6)) * T::epsilon() * T::lit(4.0);
        if h <= tiny {
            return Err(Error::StepUnderflow {
                at: x.to_f64().unwrap_or(f64::NAN),
                hint: "explicit step size underflow".into(),
            });
        }
    }
    Ok(Dopri5Outcome {
        x,
        y,
        accepted,
        rejected,
        stopped: false,
    })
}

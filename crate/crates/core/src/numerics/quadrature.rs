//! Adaptive Gauss–Kronrod (7/15) quadrature for scalar and vector integrands.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Real;

// Kronrod abscissae (positive half, descending) and weights, QUADPACK qk15.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights on the odd Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerances for adaptive quadrature. Convergence means
/// `error <= max(abs_tol, rel_tol * |value|)`; for vectors, per component
/// with `∫|f|` in place of `|value|`, so that components which cancel to
/// nearly zero do not demand unbounded relative accuracy.
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions<T> {
    pub abs_tol: T,
    pub rel_tol: T,
    pub max_intervals: usize,
}

impl<T: Real> Default for QuadOptions<T> {
    fn default() -> Self {
        Self {
            abs_tol: T::lit(1e-14),
            rel_tol: T::lit(1e-11),
            max_intervals: 2000,
        }
    }
}

impl<T: Real> QuadOptions<T> {
    pub fn new(abs_tol: T, rel_tol: T) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: T,
    pub evaluations: usize,
}

/// The 15 Kronrod nodes of `[lo, hi]` in a fixed order: centre, then pairs.
fn nodes<T: Real>(lo: T, hi: T) -> [T; 15] {
    let c = T::half() * (lo + hi);
    let h = T::half() * (hi - lo);
    let mut out = [c; 15];
    for j in 0..7 {
        let dx = h * T::lit(XGK[j]);
        out[1 + 2 * j] = c - dx;
        out[2 + 2 * j] = c + dx;
    }
    out
}

/// Applies the rule to function values laid out as in [`nodes`].
fn rule<T: Real>(half: T, f: &[T; 15]) -> (T, T) {
    let mut k = T::lit(WGK[7]) * f[0];
    let mut g = T::lit(WG[3]) * f[0];
    for j in 0..7 {
        let pair = f[1 + 2 * j] + f[2 + 2 * j];
        k = k + T::lit(WGK[j]) * pair;
        if j % 2 == 1 {
            g = g + T::lit(WG[j / 2]) * pair;
        }
    }
    (k * half, ((k - g) * half).abs())
}

/// Fixed 15-point Kronrod estimate of `∫_lo^hi f` with its embedded error.
pub fn gk15<T: Real, F: FnMut(T) -> T>(mut f: F, lo: T, hi: T) -> (T, T) {
    let xs = nodes(lo, hi);
    let mut fx = [T::zero(); 15];
    for (v, &x) in fx.iter_mut().zip(xs.iter()) {
        *v = f(x);
    }
    rule(T::half() * (hi - lo), &fx)
}

struct Segment<T> {
    lo: T,
    hi: T,
    value: T,
    error: T,
}

/// Globally adaptive integration of a scalar integrand over a finite interval.
pub fn integrate<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    lo: T,
    hi: T,
    opts: &QuadOptions<T>,
) -> Result<QuadResult<T>> {
    if lo == hi {
        return Ok(QuadResult {
            value: T::zero(),
            error: T::zero(),
            evaluations: 0,
        });
    }
    let (v0, e0) = gk15(&mut f, lo, hi);
    let mut segs = vec![Segment {
        lo,
        hi,
        value: v0,
        error: e0,
    }];
    let mut evaluations = 15;
    loop {
        let value: T = segs.iter().map(|s| s.value).sum();
        let error: T = segs.iter().map(|s| s.error).sum();
        if !value.is_finite() || !error.is_finite() {
            return Err(Error::Quadrature {
                estimate: value.to_f64().unwrap_or(f64::NAN),
                error: error.to_f64().unwrap_or(f64::NAN),
                requested: opts.abs_tol.to_f64().unwrap_or(f64::NAN),
            });
        }
        let target = opts.abs_tol.max(opts.rel_tol * value.abs());
        if error <= target {
            return Ok(QuadResult {
                value,
                error,
                evaluations,
            });
        }
        if segs.len() >= opts.max_intervals {
            return Err(Error::Quadrature {
                estimate: value.to_f64().unwrap_or(f64::NAN),
                error: error.to_f64().unwrap_or(f64::NAN),
                requested: target.to_f64().unwrap_or(f64::NAN),
            });
        }
        let (worst, _) =
            segs.iter()
                .enumerate()
                .fold((0, T::neg_infinity()), |(bi, be), (i, s)| {
                    if s.error > be {
                        (i, s.error)
                    } else {
                        (bi, be)
                    }
                });
        let s = segs.swap_remove(worst);
        let mid = T::half() * (s.lo + s.hi);
        for (a, b) in [(s.lo, mid), (mid, s.hi)] {
            let (v, e) = gk15(&mut f, a, b);
            segs.push(Segment {
                lo: a,
                hi: b,
                value: v,
                error: e,
            });
        }
        evaluations += 30;
    }
}

/// Result of a vector-valued integration.
#[derive(Debug, Clone)]
pub struct VecQuadResult<T> {
    pub value: Vec<T>,
    pub error: Vec<T>,
    /// `∫|f|` per component.
    pub magnitude: Vec<T>,
    pub evaluations: usize,
    pub converged: bool,
    /// Interval endpoints of the final partition, sorted.
    pub breakpoints: Vec<T>,
}

struct VecSegment<T> {
    lo: T,
    hi: T,
    value: Vec<T>,
    error: Vec<T>,
    magnitude: Vec<T>,
}

fn vec_rule<T: Real>(lo: T, hi: T, fx: &[Vec<T>], dim: usize) -> (Vec<T>, Vec<T>, Vec<T>) {
    let half = T::half() * (hi - lo);
    let mut value = Vec::with_capacity(dim);
    let mut error = Vec::with_capacity(dim);
    let mut magnitude = Vec::with_capacity(dim);
    for c in 0..dim {
        let mut col = [T::zero(); 15];
        for (slot, row) in col.iter_mut().zip(fx.iter()) {
            *slot = row[c];
        }
        let (v, e) = rule(half, &col);
        value.push(v);
        error.push(e);
        col.iter_mut().for_each(|x| *x = x.abs());
        magnitude.push(rule(half, &col).0);
    }
    (value, error, magnitude)
}

/// Globally adaptive integration of a vector-valued integrand of dimension
/// `dim`. Integrand evaluations at the 15 nodes of a segment run in parallel;
/// results are reduced in a fixed order, so the output is deterministic.
///
/// `initial` optionally seeds the partition with interior breakpoints.
/// Non-convergence is reported through `converged = false` rather than an
/// error so that callers can attach their own diagnostics.
pub fn integrate_vec<T, F>(
    f: F,
    lo: T,
    hi: T,
    dim: usize,
    initial: &[T],
    opts: &QuadOptions<T>,
) -> Result<VecQuadResult<T>>
where
    T: Real,
    F: Fn(T) -> Result<Vec<T>> + Sync,
{
    let eval_segment = |a: T, b: T| -> Result<VecSegment<T>> {
        let xs = nodes(a, b);
        let fx: Vec<Vec<T>> = xs.par_iter().map(|&x| f(x)).collect::<Result<_>>()?;
        let (value, error, magnitude) = vec_rule(a, b, &fx, dim);
        Ok(VecSegment {
            lo: a,
            hi: b,
            value,
            error,
            magnitude,
        })
    };

    let mut cuts = vec![lo];
    cuts.extend(initial.iter().copied().filter(|&x| x > lo && x < hi));
    cuts.push(hi);
    let mut segs: Vec<VecSegment<T>> = cuts
        .par_windows(2)
        .map(|w| eval_segment(w[0], w[1]))
        .collect::<Result<_>>()?;
    let mut evaluations = 15 * segs.len();

    loop {
        let mut value = vec![T::zero(); dim];
        let mut error = vec![T::zero(); dim];
        let mut magnitude = vec![T::zero(); dim];
        for s in &segs {
            for c in 0..dim {
                value[c] = value[c] + s.value[c];
                error[c] = error[c] + s.error[c];
                magnitude[c] = magnitude[c] + s.magnitude[c];
            }
        }
        if value.iter().chain(error.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Quadrature {
                estimate: value.first().and_then(|x| x.to_f64()).unwrap_or(f64::NAN),
                error: error.first().and_then(|x| x.to_f64()).unwrap_or(f64::NAN),
                requested: opts.rel_tol.to_f64().unwrap_or(f64::NAN),
            });
        }
        let targets: Vec<T> = magnitude
            .iter()
            .map(|v| opts.abs_tol.max(opts.rel_tol * *v))
            .collect();
        let converged = error.iter().zip(&targets).all(|(e, t)| *e <= *t);
        if converged || segs.len() >= opts.max_intervals {
            let mut breakpoints: Vec<T> = segs.iter().map(|s| s.lo).collect();
            breakpoints.push(hi);
            breakpoints.sort_by(|a, b| a.partial_cmp(b).unwrap());
            return Ok(VecQuadResult {
                value,
                error,
                magnitude,
                evaluations,
                converged,
                breakpoints,
            });
        }
        // Bisect every segment whose error share exceeds its even share of
        // the target (always including the worst one), all in parallel.
        let n = T::from_usize_lossy(segs.len());
        let score = |s: &VecSegment<T>| {
            s.error
                .iter()
                .zip(&targets)
                .map(|(e, t)| *e * n / *t)
                .fold(T::zero(), |m, x| m.max(x))
        };
        let scores: Vec<T> = segs.iter().map(score).collect();
        let worst = scores
            .iter()
            .copied()
            .fold(T::zero(), |m, x| if x > m { x } else { m });
        let budget = opts.max_intervals - segs.len();
        let mut split = Vec::new();
        let mut keep = Vec::new();
        for (s, sc) in segs.into_iter().zip(scores) {
            if (sc > T::one() || sc == worst) && split.len() < budget {
                split.push(s);
            } else {
                keep.push(s);
            }
        }
        let halves: Vec<(T, T)> = split
            .iter()
            .flat_map(|s| {
                let mid = T::half() * (s.lo + s.hi);
                [(s.lo, mid), (mid, s.hi)]
            })
            .collect();
        let fresh: Vec<VecSegment<T>> = halves
            .par_iter()
            .map(|&(a, b)| eval_segment(a, b))
            .collect::<Result<_>>()?;
        evaluations += 15 * fresh.len();
        keep.extend(fresh);
        keep.sort_by(|a, b| a.lo.partial_cmp(&b.lo).unwrap());
        segs = keep;
    }
}

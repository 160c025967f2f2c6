//! Gauss–Legendre collocation for linear second-order oscillators
//! `x'' + q(t) x = 0` with complex data.
//!
//! Each step builds the real 2x2 propagator of the first-order system, so a
//! complex state is advanced by a real symplectic map and the Wronskian
//! `x conj(x') - conj(x) x'` is conserved up to roundoff. Integrals of the form
//! `∫ g(t, x, x') dt` can be accumulated from stage values; as a Runge–Kutta
//! method on the augmented system this keeps the full order `2s`.

use crate::error::{Error, Result};
use crate::numerics::linalg::Lu;
use crate::scalar::{Cx, Real};

/// Nodes and weights of the `s`-point Gauss–Legendre rule on `[0, 1]`.
pub fn gauss_legendre(s: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(s >= 1);
    let mut nodes = vec![0.0; s];
    let mut weights = vec![0.0; s];
    for i in 0..s {
        // Chebyshev-like initial guess, then Newton on P_s.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (s as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(s, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(s, x);
        if d.is_finite() {
            dp = d;
        }
        nodes[i] = 0.5 * (1.0 - x);
        weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Butcher tableau of the `s`-stage Gauss collocation method.
#[derive(Debug, Clone)]
pub struct GaussTableau<T> {
    pub c: Vec<T>,
    pub b: Vec<T>,
    /// Row-major `s x s`.
    pub a: Vec<T>,
    pub stages: usize,
}

impl<T: Real> GaussTableau<T> {
    pub fn new(s: usize) -> Self {
        let (c, b) = gauss_legendre(s);
        // a_ij = ∫_0^{c_i} l_j(t) dt, evaluated exactly by the same Gauss rule on [0, c_i].
        let mut a = vec![0.0; s * s];
        for i in 0..s {
            for j in 0..s {
                let mut acc = 0.0;
                for q in 0..s {
                    let t = c[i] * c[q];
                    let mut l = 1.0;
                    for m in 0..s {
                        if m != j {
                            l *= (t - c[m]) / (c[j] - c[m]);
                        }
                    }
                    acc += b[q] * l;
                }
                a[i * s + j] = c[i] * acc;
            }
        }
        Self {
            c: c.into_iter().map(T::lit).collect(),
            b: b.into_iter().map(T::lit).collect(),
            a: a.into_iter().map(T::lit).collect(),
            stages: s,
        }
    }
}

/// Real 2x2 matrix, row-major.
pub type Mat2<T> = [[T; 2]; 2];

fn mat_mul<T: Real>(x: &Mat2<T>, y: &Mat2<T>) -> Mat2<T> {
    [
        [
            x[0][0] * y[0][0] + x[0][1] * y[1][0],
            x[0][0] * y[0][1] + x[0][1] * y[1][1],
        ],
        [
            x[1][0] * y[0][0] + x[1][1] * y[1][0],
            x[1][0] * y[0][1] + x[1][1] * y[1][1],
        ],
    ]
}

fn apply<T: Real>(m: &Mat2<T>, y: [Cx<T>; 2]) -> [Cx<T>; 2] {
    [
        y[0] * m[0][0] + y[1] * m[0][1],
        y[0] * m[1][0] + y[1] * m[1][1],
    ]
}

/// One collocation step: the step propagator and the stage propagators
/// (stage value `Y_i = P_i y0`).
struct Step<T> {
    m: Mat2<T>,
    stages: Vec<Mat2<T>>,
    q: Vec<T>,
}

impl<T: Real> GaussTableau<T> {
    fn step<Q: Fn(T) -> T>(&self, q: &Q, t: T, h: T) -> Result<Step<T>> {
        let s = self.stages;
        let qs: Vec<T> = self.c.iter().map(|&ci| q(t + ci * h)).collect();
        // Unknowns: stage states (x_i, v_i), i = 0..s, interleaved.
        // Y_i = y0 + h Σ_j a_ij A_j Y_j with A_j = [[0, 1], [-q_j, 0]].
        let n = 2 * s;
        let mut mat = vec![T::zero(); n * n];
        for i in 0..s {
            mat[(2 * i) * n + 2 * i] = T::one();
            mat[(2 * i + 1) * n + 2 * i + 1] = T::one();
            for j in 0..s {
                let ha = h * self.a[i * s + j];
                mat[(2 * i) * n + 2 * j + 1] = mat[(2 * i) * n + 2 * j + 1] - ha;
                mat[(2 * i + 1) * n + 2 * j] = mat[(2 * i + 1) * n + 2 * j] + ha * qs[j];
            }
        }
        let lu = Lu::new(mat, n).ok_or_else(|| Error::StepUnderflow {
            at: t.to_f64().unwrap_or(f64::NAN),
            hint: "singular collocation system".into(),
        })?;
        let mut stages = vec![[[T::zero(); 2]; 2]; s];
        let mut m = [[T::zero(); 2]; 2];
        for col in 0..2 {
            let mut rhs = vec![T::zero(); n];
            for i in 0..s {
                rhs[2 * i + col] = T::one();
            }
            lu.solve(&mut rhs);
            let mut x1 = if col == 0 { T::one() } else { T::zero() };
            let mut v1 = if col == 1 { T::one() } else { T::zero() };
            for i in 0..s {
                let (xi, vi) = (rhs[2 * i], rhs[2 * i + 1]);
                stages[i][0][col] = xi;
                stages[i][1][col] = vi;
                x1 = x1 + h * self.b[i] * vi;
                v1 = v1 - h * self.b[i] * qs[i] * xi;
            }
            m[0][col] = x1;
            m[1][col] = v1;
        }
        Ok(Step { m, stages, q: qs })
    }
}

/// Controls for [`propagate`].
#[derive(Debug, Clone, Copy)]
pub struct OscillatorOptions<T> {
    /// Per-step tolerance on the propagator in the local energy norm.
    pub tol: T,
    pub h_max: T,
    pub max_steps: usize,
}

impl<T: Real> Default for OscillatorOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-13),
            h_max: T::infinity(),
            max_steps: 2_000_000,
        }
    }
}

/// A stage value handed to an observer: time, quadrature weight `h b_i`,
/// `q(t)` and the state `(x, x')`.
#[derive(Debug, Clone, Copy)]
pub struct StagePoint<T> {
    pub t: T,
    pub weight: T,
    pub q: T,
    pub x: Cx<T>,
    pub v: Cx<T>,
}

/// Summary of a propagation.
#[derive(Debug, Clone, Copy)]
pub struct Propagation<T> {
    pub x: Cx<T>,
    pub v: Cx<T>,
    pub steps: usize,
    pub rejected: usize,
}

fn energy_scale<T: Real>(q: T, floor: T) -> T {
    q.abs().sqrt().max(floor)
}

/// Advances `(x, x')` from `t0` to `t1` (either direction) for `x'' + q(t) x = 0`.
///
/// Steps land exactly on every point of `stops` that lies strictly between
/// `t0` and `t1`; `on_stop` receives the state there. `on_stage` receives every
/// stage value of every accepted step, so `Σ weight * g(stage)` approximates
/// `∫ g dt` at order `2s`.
#[allow(clippy::too_many_arguments)]
pub fn propagate<T, Q, S, P>(
    tableau: &GaussTableau<T>,
    q: Q,
    t0: T,
    t1: T,
    y0: [Cx<T>; 2],
    stops: &[T],
    opts: &OscillatorOptions<T>,
    mut on_stage: S,
    mut on_stop: P,
) -> Result<Propagation<T>>
where
    T: Real,
    Q: Fn(T) -> T,
    S: FnMut(StagePoint<T>),
    P: FnMut(T, [Cx<T>; 2]),
{
    let dir = if t1 >= t0 { T::one() } else { -T::one() };
    let span = (t1 - t0).abs();
    let mut targets: Vec<T> = stops
        .iter()
        .copied()
        .filter(|&s| (s - t0) * dir > T::zero() && (t1 - s) * dir > T::zero())
        .collect();
    targets.sort_by(|a, b| ((*a - t0) * dir).partial_cmp(&((*b - t0) * dir)).unwrap());
    targets.push(t1);

    let floor = T::lit(1e-3) / span.max(T::min_positive_value());
    let q0 = q(t0);
    let mut h = (T::one() / energy_scale(q0, floor))
        .min(span)
        .min(opts.h_max);
    let h_min = span * T::epsilon() * T::lit(16.0);
    let order = T::from_usize_lossy(2 * tableau.stages + 1);
    let mut t = t0;
    let mut y = y0;
    let mut steps = 0usize;
    let mut rejected = 0usize;

    for &target in &targets {
        while (target - t) * dir > T::zero() {
            if steps + rejected >= opts.max_steps {
                return Err(Error::StepBudget {
                    budget: opts.max_steps,
                    at: t.to_f64().unwrap_or(f64::NAN),
                    diagnostics: format!("oscillator step size {:e}", h.to_f64().unwrap_or(0.0)),
                });
            }
            let remaining = (target - t).abs();
            let mut hh = h.min(remaining);
            let last = hh >= remaining;
            if last {
                hh = remaining;
            }
            let hs = hh * dir;
            let full = tableau.step(&q, t, hs)?;
            let half = T::half() * hs;
            let s1 = tableau.step(&q, t, half)?;
            let s2 = tableau.step(&q, t + half, half)?;
            let two = mat_mul(&s2.m, &s1.m);
            let w0 = energy_scale(q(t), floor);
            let t_next = if last { target } else { t + hs };
            let w1 = energy_scale(q(t_next), floor);
            // Compare the two estimates in the local energy norm: rows scaled
            // by (sqrt(w1), 1/sqrt(w1)), columns by (1/sqrt(w0), sqrt(w0)).
            let rs = [w1.sqrt(), T::one() / w1.sqrt()];
            let cs = [T::one() / w0.sqrt(), w0.sqrt()];
            let mut err = T::zero();
            for r in 0..2 {
                for c in 0..2 {
                    let d = (two[r][c] - full.m[r][c]).abs() * rs[r] * cs[c];
                    err = err.max(d);
                }
            }
            if !err.is_finite() {
                return Err(Error::StepUnderflow {
                    at: t.to_f64().unwrap_or(f64::NAN),
                    hint: "non-finite propagator".into(),
                });
            }
            let fac = (T::lit(0.9)
                * (opts.tol / err.max(T::min_positive_value())).powf(T::one() / order))
            .max(T::lit(0.2))
            .min(T::lit(4.0));
            if err <= opts.tol {
                for (k, st) in [(0usize, &s1), (1, &s2)] {
                    let base = if k == 0 { y } else { apply(&s1.m, y) };
                    let tb = t + T::from_usize_lossy(k) * half;
                    for i in 0..tableau.stages {
                        let yi = apply(&st.stages[i], base);
                        on_stage(StagePoint {
                            t: tb + tableau.c[i] * half,
                            weight: half.abs() * tableau.b[i],
                            q: st.q[i],
                            x: yi[0],
                            v: yi[1],
                        });
                    }
                }
                y = apply(&two, y);
                t = t_next;
                steps += 1;
                if !last {
                    h = (hh * fac).min(opts.h_max);
                }
            } else {
                rejected += 1;
                h = hh * fac;
                if h < h_min {
                    return Err(Error::StepUnderflow {
                        at: t.to_f64().unwrap_or(f64::NAN),
                        hint: "oscillator step size underflow".into(),
                    });
                }
            }
        }
        if target != t1 {
            on_stop(target, y);
        }
    }
    Ok(Propagation {
        x: y[0],
        v: y[1],
        steps,
        rejected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cx;

    #[test]
    fn gauss_rule_integrates_degree_2s_minus_1() {
        for s in 1..=8 {
            let (x, w) = gauss_legendre(s);
            let deg = 2 * s - 1;
            let v: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
            assert!((v - 1.0 / (deg as f64 + 1.0)).abs() < 1e-14, "s={s}");
        }
    }

    #[test]
    fn tableau_satisfies_simplifying_assumptions() {
        // Σ_j a_ij c_j^(k-1) = c_i^k / k for k <= s.
        let tab = GaussTableau::<f64>::new(5);
        for i in 0..5 {
            for k in 1..=5 {
                let lhs: f64 = (0..5)
                    .map(|j| tab.a[i * 5 + j] * tab.c[j].powi(k - 1))
                    .sum();
                assert!((lhs - tab.c[i].powi(k) / k as f64).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn harmonic_oscillator_phase_and_wronskian() {
        let tab = GaussTableau::<f64>::new(6);
        let w: f64 = 7.0;
        let y0 = [cx(1.0 / (2.0 * w).sqrt(), 0.0), cx(0.0, -(w / 2.0).sqrt())];
        let t1 = 40.0;
        let r = propagate(
            &tab,
            |_| w * w,
            0.0,
            t1,
            y0,
            &[],
            &OscillatorOptions::default(),
            |_| {},
            |_, _| {},
        )
        .unwrap();
        let exact = Cx::from_polar(1.0 / (2.0 * w).sqrt(), -w * t1);
        assert!((r.x - exact).norm() < 1e-9, "{}", (r.x - exact).norm());
        let wr = r.x * r.v.conj() - r.x.conj() * r.v;
        assert!((wr - cx(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn stage_accumulation_integrates_observables() {
        // For x = cos(t): ∫_0^T x^2 dt = T/2 + sin(2T)/4.
        let tab = GaussTableau::<f64>::new(6);
        let mut acc = 0.0;
        let t1 = 5.0;
        propagate(
            &tab,
            |_| 1.0,
            0.0,
            t1,
            [cx(1.0, 0.0), cx(0.0, 0.0)],
            &[],
            &OscillatorOptions::default(),
            |p| acc += p.weight * p.x.re * p.x.re,
            |_, _| {},
        )
        .unwrap();
        assert!((acc - (t1 / 2.0 + (2.0 * t1).sin() / 4.0)).abs() < 1e-11);
    }

    #[test]
    fn airy_equation_against_backward_run() {
        // x'' + t x = 0 forward then backward returns to the initial state.
        let tab = GaussTableau::<f64>::new(6);
        let y0 = [cx(0.3, 0.1), cx(-0.2, 0.5)];
        let opts = OscillatorOptions::default();
        let f = propagate(&tab, |t| t, 0.0, 30.0, y0, &[], &opts, |_| {}, |_, _| {}).unwrap();
        let b = propagate(
            &tab,
            |t| t,
            30.0,
            0.0,
            [f.x, f.v],
            &[],
            &opts,
            |_| {},
            |_, _| {},
        )
        .unwrap();
        assert!((b.x - y0[0]).norm() < 1e-10);
        assert!((b.v - y0[1]).norm() < 1e-10);
    }

    #[test]
    fn stops_are_hit_exactly() {
        let tab = GaussTableau::<f64>::new(4);
        let mut seen = Vec::new();
        propagate(
            &tab,
            |_| 4.0,
            0.0,
            3.0,
            [cx(1.0, 0.0), cx(0.0, 0.0)],
            &[2.5, 1.0, 7.0],
            &OscillatorOptions::default(),
            |_| {},
            |t, y| seen.push((t, y[0].re)),
        )
        .unwrap();
        assert_eq!(seen.len(), 2);
        assert_eq!(seen[0].0, 1.0);
        assert!((seen[0].1 - 2f64.cos()).abs() < 1e-11);
        assert!((seen[1].1 - 5f64.cos()).abs() < 1e-11);
    }
}

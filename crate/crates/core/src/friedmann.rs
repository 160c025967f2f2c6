//! Friedmann equation extended by the local curvature term `ε J00`:
//!
//! `H²/H0² = Ω_Λ + Ω_m/a³ + Ω_r/a⁴ + ε J00/H0⁴`.
//!
//! With `x = ln(1+z)` and `u = ln(H/H0)`, `J00 = −6H⁴(3u_x² + 2u_xx − 6u_x)`
//! and the equation becomes the second-order ODE
//!
//! `u_xx = [(H_Λ²/H² − 1)/(6εH²) − 3u_x² + 6u_x] / 2`,
//!
//! where `H_Λ²` is the ΛCDM right-hand side. For `ε > 0` deviations from
//! `H_Λ` oscillate with frequency `1/(H√(6ε))` in `x`; for `ε < 0` they grow
//! exponentially.
//!
//! With ΛCDM initial data and `ε > 0` the oscillation is not excited and the
//! solution follows the slow manifold `H² = H_Λ² + εJ00[H_Λ] + O(ε²)`, whose
//! relative correction is about `2(H√(6ε))²`. While `H√(6ε)` is small that
//! expansion replaces the (stiff) integration.

use rayon::prelude::*;

use crate::background::{CosmologyParams, HubbleHistory};
use crate::error::{Error, Result};
use crate::numerics::interp::QuinticHermite;
use crate::numerics::ode::{dopri5, Dopri5Options};
use crate::scalar::Real;

/// Hubble rate and its redshift derivative at `z = 0`, in units of `H0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FriedmannInitial<T> {
    pub hubble: T,
    pub dhubble_dz: T,
}

impl<T: Real> FriedmannInitial<T> {
    /// ΛCDM values at `z = 0`.
    pub fn lcdm(params: &CosmologyParams<T>) -> Self {
        let e2 = params.e2(T::one());
        let h = e2.sqrt();
        let de2 = T::lit(3.0) * params.omega_m + T::lit(4.0) * params.omega_r;
        Self {
            hubble: h,
            dhubble_dz: de2 / (T::two() * h),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FriedmannOptions<T> {
    pub z_max: T,
    /// Output nodes per decade of `z` on the logarithmic grid.
    pub points_per_decade: usize,
    /// Smallest nonzero output redshift.
    pub z_min: T,
    /// Divergence once `H` leaves `[H_Λ/factor, H_Λ·factor]`. The `ε < 0`
    /// runaway saturates near `H ~ 1/√(6|ε|)`, so the band only catches
    /// `|ε|` well below `1/(6 factor²)`.
    pub divergence_factor: T,
    /// Slow-manifold expansion is used while `H√(6ε)` stays below this
    /// (`ε > 0` and ΛCDM initial data only); zero integrates from `z = 0`.
    pub quasi_static_below: T,
    pub ode: Dopri5Options<T>,
}

impl<T: Real> Default for FriedmannOptions<T> {
    fn default() -> Self {
        Self {
            z_max: T::lit(1e9),
            points_per_decade: 20,
            z_min: T::lit(1e-3),
            divergence_factor: T::lit(1e6),
            quasi_static_below: T::lit(1e-3),
            ode: Dopri5Options {
                max_steps: 1_000_000_000,
                ..Dopri5Options::default()
            },
        }
    }
}

impl<T: Real> FriedmannOptions<T> {
    /// `z = 0` followed by a logarithmic grid from `z_min` to `z_max`.
    pub fn z_grid(&self) -> Vec<T> {
        let mut z = vec![T::zero()];
        let lo = self.z_min.log10();
        let hi = self.z_max.log10();
        let n = ((hi - lo) * T::from_usize_lossy(self.points_per_decade))
            .ceil()
            .to_usize()
            .unwrap_or(1)
            .max(1);
        for i in 0..=n {
            let e = lo + (hi - lo) * T::from_usize_lossy(i) / T::from_usize_lossy(n);
            z.push(T::lit(10.0).powf(e));
        }
        z
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Divergence<T> {
    pub z: T,
    pub reason: DivergenceReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivergenceReason {
    /// `H` left the band around the ΛCDM value.
    Departure,
    NonFinite,
    StepUnderflow,
}

/// Solution of the extended Friedmann equation on a redshift grid.
#[derive(Debug, Clone)]
pub struct ExtendedFriedmannSolution<T> {
    pub epsilon: T,
    pub params: CosmologyParams<T>,
    pub initial: FriedmannInitial<T>,
    /// Grid points reached (all of them unless the solution diverged).
    pub z: Vec<T>,
    /// `H/H0` on `z`.
    pub hubble: Vec<T>,
    /// `d ln H / d ln(1+z)` and its derivative on `z`.
    pub dlnh: Vec<T>,
    pub d2lnh: Vec<T>,
    pub divergence: Option<Divergence<T>>,
    pub steps: usize,
    /// End of the slow-manifold segment, if one was used.
    pub quasi_static_z: Option<T>,
}

fn hubble_lambda2<T: Real>(x: T, p: &CosmologyParams<T>) -> T {
    p.omega_lambda + p.omega_m * (T::lit(3.0) * x).exp() + p.omega_r * (T::lit(4.0) * x).exp()
}

/// `ln H_Λ` and its first three derivatives in `x = ln(1+z)`.
fn lcdm_log_derivs<T: Real>(x: T, p: &CosmologyParams<T>) -> [T; 4] {
    let m = p.omega_m * (T::lit(3.0) * x).exp();
    let r = p.omega_r * (T::lit(4.0) * x).exp();
    let e = p.omega_lambda + m + r;
    let q1 = (T::lit(3.0) * m + T::lit(4.0) * r) / e;
    let q2 = (T::lit(9.0) * m + T::lit(16.0) * r) / e;
    let q3 = (T::lit(27.0) * m + T::lit(64.0) * r) / e;
    [
        T::half() * e.ln(),
        T::half() * q1,
        T::half() * (q2 - q1 * q1),
        T::half() * (q3 - T::lit(3.0) * q1 * q2 + T::two() * q1.powi(3)),
    ]
}

/// `(u, u_x)` on the slow manifold to first order in `ε`.
fn slow_manifold<T: Real>(x: T, eps: T, p: &CosmologyParams<T>) -> [T; 2] {
    let [u, u1, u2, u3] = lcdm_log_derivs(x, p);
    let six = T::lit(6.0);
    let h2 = (T::two() * u).exp();
    let q = T::lit(3.0) * u1 * u1 + T::two() * u2 - six * u1;
    let dq = six * u1 * u2 + T::two() * u3 - six * u2;
    // g = εJ00/H_Λ², H² = H_Λ²(1 + g)
    let g = -six * eps * h2 * q;
    let dg = -six * eps * h2 * (T::two() * u1 * q + dq);
    [
        u + T::half() * g.ln_1p(),
        u1 + dg / (T::two() * (T::one() + g)),
    ]
}

fn slow_manifold_curvature<T: Real>(x: T, eps: T, p: &CosmologyParams<T>) -> T {
    let h = T::lit(1e-3);
    let d = |k: T| slow_manifold(x + k * h, eps, p)[1];
    (d(-T::two()) - T::lit(8.0) * d(-T::one()) + T::lit(8.0) * d(T::one()) - d(T::two()))
        / (T::lit(12.0) * h)
}

/// `x` at which `H_Λ√(6ε)` reaches `level`.
fn quasi_static_end<T: Real>(eps: T, level: T, p: &CosmologyParams<T>) -> T {
    let s = |x: T| hubble_lambda2(x, p).sqrt() * (T::lit(6.0) * eps).sqrt();
    if s(T::zero()) >= level {
        return T::zero();
    }
    let (mut lo, mut hi) = (T::zero(), T::one());
    while s(hi) < level {
        lo = hi;
        hi = hi * T::two();
    }
    for _ in 0..200 {
        let mid = T::half() * (lo + hi);
        if s(mid) < level {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= T::epsilon() * hi {
            break;
        }
    }
    lo
}

fn second_derivative<T: Real>(x: T, u: T, ux: T, eps: T, p: &CosmologyParams<T>) -> T {
    let h2 = (T::two() * u).exp();
    let src = (hubble_lambda2(x, p) / h2 - T::one()) / (T::lit(6.0) * eps * h2);
    T::half() * (src - T::lit(3.0) * ux * ux + T::lit(6.0) * ux)
}

/// Solves the extended equation from `z = 0` up to `opts.z_max`.
///
/// Divergence (the `ε < 0` instability) is reported through
/// [`ExtendedFriedmannSolution::divergence`], not as an error; an exhausted
/// step budget is an error.
pub fn solve_extended<T: Real>(
    epsilon: T,
    params: &CosmologyParams<T>,
    initial: Option<FriedmannInitial<T>>,
    opts: &FriedmannOptions<T>,
) -> Result<ExtendedFriedmannSolution<T>> {
    params.validate()?;
    if !epsilon.is_finite() {
        return Err(Error::domain("epsilon must be finite"));
    }
    let lcdm = FriedmannInitial::lcdm(params);
    let initial = initial.unwrap_or(lcdm);
    if !(initial.hubble > T::zero()) {
        return Err(Error::domain("initial Hubble rate must be positive"));
    }
    let zs = opts.z_grid();
    let xs: Vec<T> = zs.iter().map(|&z| z.ln_1p()).collect();
    let mut sol = ExtendedFriedmannSolution {
        epsilon,
        params: *params,
        initial,
        z: Vec::with_capacity(zs.len()),
        hubble: Vec::with_capacity(zs.len()),
        dlnh: Vec::with_capacity(zs.len()),
        d2lnh: Vec::with_capacity(zs.len()),
        divergence: None,
        steps: 0,
        quasi_static_z: None,
    };

    if epsilon == T::zero() {
        let tol = T::lit(1e-12);
        if (initial.hubble - lcdm.hubble).abs() > tol
            || (initial.dhubble_dz - lcdm.dhubble_dz).abs() > tol
        {
            return Err(Error::domain(
                "at epsilon = 0 the initial data are fixed by the algebraic equation",
            ));
        }
        // Algebraic ΛCDM: u = ln(H_Λ²)/2.
        let (m, r) = (params.omega_m, params.omega_r);
        for (&z, &x) in zs.iter().zip(&xs) {
            let e2 = hubble_lambda2(x, params);
            let d1 = T::lit(3.0) * m * (T::lit(3.0) * x).exp()
                + T::lit(4.0) * r * (T::lit(4.0) * x).exp();
            let d2 = T::lit(9.0) * m * (T::lit(3.0) * x).exp()
                + T::lit(16.0) * r * (T::lit(4.0) * x).exp();
            sol.z.push(z);
            sol.hubble.push(e2.sqrt());
            sol.dlnh.push(d1 / (T::two() * e2));
            sol.d2lnh
                .push(d2 / (T::two() * e2) - d1 * d1 / (T::two() * e2 * e2));
        }
        return Ok(sol);
    }

    let f = |x: T, y: &[T; 2]| [y[1], second_derivative(x, y[0], y[1], epsilon, params)];
    let band = opts.divergence_factor.ln();
    let x_end = *xs.last().unwrap_or(&T::zero());
    let record = |sol: &mut ExtendedFriedmannSolution<T>, i: usize, y: [T; 2]| {
        sol.z.push(zs[i]);
        sol.hubble.push(y[0].exp());
        sol.dlnh.push(y[1]);
        sol.d2lnh
            .push(second_derivative(xs[i], y[0], y[1], epsilon, params));
    };
    let tol = T::lit(1e-12);
    let on_manifold = (initial.hubble - lcdm.hubble).abs() <= tol
        && (initial.dhubble_dz - lcdm.dhubble_dz).abs() <= tol;
    let mut x0 = T::zero();
    let mut y0 = [initial.hubble.ln(), initial.dhubble_dz / initial.hubble];
    let mut next = 0usize;
    if epsilon > T::zero() && on_manifold && opts.quasi_static_below > T::zero() {
        x0 = quasi_static_end(epsilon, opts.quasi_static_below, params).min(x_end);
        if x0 > T::zero() {
            while next < xs.len() && xs[next] <= x0 {
                let y = slow_manifold(xs[next], epsilon, params);
                sol.z.push(zs[next]);
                sol.hubble.push(y[0].exp());
                sol.dlnh.push(y[1]);
                // The ODE form of u_xx cancels catastrophically here.
                sol.d2lnh
                    .push(slow_manifold_curvature(xs[next], epsilon, params));
                next += 1;
            }
            y0 = slow_manifold(x0, epsilon, params);
            sol.quasi_static_z = Some(x0.exp_m1());
        }
    }
    if next == 0 {
        record(&mut sol, 0, y0);
        next += 1;
    }
    if x0 >= x_end {
        return Ok(sol);
    }
    let outcome = dopri5(f, x0, y0, x_end, &opts.ode, |step| {
        while next < xs.len() && xs[next] <= step.x1() {
            record(&mut sol, next, step.eval(xs[next]));
            next += 1;
        }
        let x1 = step.x1();
        let [u, ux] = step.y1;
        if !(u.is_finite() && ux.is_finite()) {
            sol.divergence = Some(Divergence {
                z: x1.exp_m1(),
                reason: DivergenceReason::NonFinite,
            });
            return false;
        }
        if (u - T::half() * hubble_lambda2(x1, params).ln()).abs() > band {
            sol.divergence = Some(Divergence {
                z: x1.exp_m1(),
                reason: DivergenceReason::Departure,
            });
            return false;
        }
        true
    });
    match outcome {
        Ok(o) => sol.steps = o.accepted,
        Err(Error::StepUnderflow { at, .. }) => {
            sol.divergence = Some(Divergence {
                z: T::lit(at).exp_m1(),
                reason: DivergenceReason::StepUnderflow,
            });
        }
        Err(e) => return Err(e),
    }
    // Grid nodes recorded before a divergence may lie past the last good step.
    if let Some(d) = sol.divergence {
        let keep = sol.z.iter().take_while(|&&z| z <= d.z).count();
        sol.z.truncate(keep);
        sol.hubble.truncate(keep);
        sol.dlnh.truncate(keep);
        sol.d2lnh.truncate(keep);
    }
    Ok(sol)
}

/// Runs [`solve_extended`] for every `ε` in parallel; results keep input order.
pub fn scan_epsilon<T: Real>(
    epsilons: &[T],
    params: &CosmologyParams<T>,
    opts: &FriedmannOptions<T>,
) -> Vec<Result<ExtendedFriedmannSolution<T>>> {
    epsilons
        .par_iter()
        .map(|&e| solve_extended(e, params, None, opts))
        .collect()
}

impl<T: Real> ExtendedFriedmannSolution<T> {
    pub fn diverged(&self) -> bool {
        self.divergence.is_some()
    }

    /// `ε J00 / H0⁴` on the grid.
    pub fn epsilon_term(&self) -> Vec<T> {
        let six = T::lit(6.0);
        self.hubble
            .iter()
            .zip(&self.dlnh)
            .zip(&self.d2lnh)
            .map(|((&h, &ux), &uxx)| {
                -six * self.epsilon
                    * h.powi(4)
                    * (T::lit(3.0) * ux * ux + T::two() * uxx - six * ux)
            })
            .collect()
    }

    /// Interpolated history usable as a background, valid where the grid
    /// resolves the oscillation scale `H√(6ε)` in `ln(1+z)`.
    pub fn history(&self) -> Result<TabulatedHistory<T>> {
        if self.z.len() < 2 {
            return Err(Error::domain("solution has fewer than two grid points"));
        }
        let xs: Vec<T> = self.z.iter().map(|&z| z.ln_1p()).collect();
        let mut resolved = Vec::with_capacity(xs.len() - 1);
        let x_qs = self.quasi_static_z.map_or(T::neg_infinity(), |z| z.ln_1p());
        for i in 0..xs.len() - 1 {
            let period = self.hubble[i] * (T::lit(6.0) * self.epsilon.abs()).sqrt();
            resolved.push(
                self.epsilon == T::zero()
                    || xs[i + 1] <= x_qs
                    || xs[i + 1] - xs[i] < T::half() * period,
            );
        }
        let rows = self
            .hubble
            .iter()
            .zip(&self.dlnh)
            .zip(&self.d2lnh)
            .map(|((&h, &ux), &uxx)| [h.ln(), ux, uxx])
            .collect();
        Ok(TabulatedHistory {
            u: QuinticHermite::new(xs, rows)?,
            resolved,
        })
    }
}

/// Hubble history interpolated from a tabulated solution.
pub struct TabulatedHistory<T> {
    u: QuinticHermite<T>,
    resolved: Vec<bool>,
}

impl<T: Real> HubbleHistory<T> for TabulatedHistory<T> {
    fn hubble_derivs(&self, a: T) -> Result<[T; 3]> {
        let x = -a.ln();
        let (lo, hi) = self.u.domain();
        if x < lo || x > hi {
            return Err(Error::domain(format!(
                "scale factor {a:e} outside the tabulated history"
            )));
        }
        let nodes = self.u.nodes();
        let i = nodes
            .partition_point(|&n| n <= x)
            .saturating_sub(1)
            .min(self.resolved.len() - 1);
        if !self.resolved[i] {
            return Err(Error::InsufficientSmoothness {
                z: x.exp_m1().to_f64().unwrap_or(f64::NAN),
            });
        }
        let [u, ux, uxx] = self.u.eval(x);
        let h = u.exp();
        Ok([h, -h * h * ux, h * h * h * (T::two() * ux * ux + uxx)])
    }
}

/// Constant fitted to `a⁴(H²/H0² − Ω_Λ − Ω_m/a³)` over a redshift window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveRadiation<T> {
    pub omega_r_tilde: T,
    pub window: (T, T),
    /// RMS deviation from the constant relative to it.
    pub residual: T,
    pub points: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct RadiationFit<T> {
    pub z_lo: T,
    pub z_hi: T,
    pub threshold: T,
}

impl<T: Real> Default for RadiationFit<T> {
    fn default() -> Self {
        Self {
            z_lo: T::lit(1e7),
            z_hi: T::lit(1e9),
            threshold: T::lit(1e-2),
        }
    }
}

pub fn extract_effective_radiation<T: Real>(
    sol: &ExtendedFriedmannSolution<T>,
    fit: &RadiationFit<T>,
) -> Result<EffectiveRadiation<T>> {
    if let Some(d) = sol.divergence {
        return Err(Error::domain(format!(
            "solution diverged at z = {:e}",
            d.z.to_f64().unwrap_or(f64::NAN)
        )));
    }
    let p = &sol.params;
    let vals: Vec<T> = sol
        .z
        .iter()
        .zip(&sol.hubble)
        .filter(|(&z, _)| z >= fit.z_lo && z <= fit.z_hi)
        .map(|(&z, &h)| {
            let ia = T::one() + z;
            (h * h - p.omega_lambda - p.omega_m * ia.powi(3)) / ia.powi(4)
        })
        .collect();
    if vals.is_empty() {
        return Err(Error::domain("no grid points inside the fit window"));
    }
    let n = T::from_usize_lossy(vals.len());
    let mean = vals.iter().fold(T::zero(), |s, &v| s + v) / n;
    let var = vals
        .iter()
        .fold(T::zero(), |s, &v| s + (v - mean) * (v - mean))
        / n;
    let residual = var.sqrt() / mean.abs();
    if !(residual <= fit.threshold) {
        return Err(Error::FitResidual {
            residual: residual.to_f64().unwrap_or(f64::NAN),
            threshold: fit.threshold.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(EffectiveRadiation {
        omega_r_tilde: mean,
        window: (fit.z_lo, fit.z_hi),
        residual,
        points: vals.len(),
    })
}

/// Upper end of the `ε` range compatible with primordial nucleosynthesis.
pub const EPSILON_BBN_MAX: f64 = 2e-15;
/// Value implied by Starobinsky inflation.
pub const EPSILON_STAROBINSKY: f64 = 1e-113;
/// Upper bound from torsion-balance tests of Newton's law.
pub const EPSILON_TORSION_MAX: f64 = 1e-60;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundVerdict {
    pub name: &'static str,
    pub compatible: bool,
    pub detail: String,
    pub provenance: &'static str,
}

/// Classifies `ε` against the nucleosynthesis range, the Starobinsky value and
/// the torsion-balance bound.
pub fn epsilon_bounds_report(epsilon: f64) -> Vec<BoundVerdict> {
    let bbn = (0.0..EPSILON_BBN_MAX).contains(&epsilon);
    let torsion = epsilon < EPSILON_TORSION_MAX;
    let rel = if epsilon > EPSILON_STAROBINSKY {
        "above"
    } else if epsilon < EPSILON_STAROBINSKY {
        "below"
    } else {
        "equal to"
    };
    vec![
        BoundVerdict {
            name: "bbn",
            compatible: bbn,
            detail: format!("0 <= epsilon < {EPSILON_BBN_MAX:e}"),
            provenance: "nucleosynthesis constraint on the expansion rate",
        },
        BoundVerdict {
            name: "starobinsky",
            compatible: epsilon >= 0.0,
            detail: format!("epsilon is {rel} the inflationary value {EPSILON_STAROBINSKY:e}"),
            provenance: "R^2 inflation fixes epsilon",
        },
        BoundVerdict {
            name: "torsion-balance",
            compatible: torsion,
            detail: format!("epsilon < {EPSILON_TORSION_MAX:e}"),
            provenance: "short-distance tests of the inverse-square law",
        },
    ]
}

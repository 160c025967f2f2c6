//! Field modes `χ_k(τ)` of a scalar field on a conformal background and the
//! zeroth-order adiabatic (WKB) reference modes.
//!
//! Modes solve `χ'' + (k² + m²a² + (ξ − 1/6) R a²) χ = 0` with
//! `R a² = 6 a''/a`, normalised by `χ conj(χ') − conj(χ) χ' = i`.

use crate::background::ConformalBackground;
use crate::error::{Error, Result};
use crate::numerics::gauss::{propagate, GaussTableau, OscillatorOptions, StagePoint};
use crate::numerics::quadrature::{integrate, QuadOptions};
use crate::scalar::{cx, max_of, Cx, Real};

/// Momentum, mass (units of H0) and curvature coupling of a mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeSpec<T> {
    pub k: T,
    pub mass: T,
    pub xi: T,
}

impl<T: Real> ModeSpec<T> {
    /// Conformally coupled mode, `ξ = 1/6`.
    pub fn conformal(k: T, mass: T) -> Self {
        Self {
            k,
            mass,
            xi: conformal_coupling(),
        }
    }

    pub fn is_conformal(&self) -> bool {
        (self.xi - conformal_coupling::<T>()).abs() <= T::epsilon()
    }

    /// `q(τ) = k² + m²a² + (ξ − 1/6)·6a''/a`.
    pub fn omega2_eff(&self, d: [T; 4]) -> T {
        let [a, _, a2, _] = d;
        let base = self.k * self.k + self.mass * self.mass * a * a;
        if self.is_conformal() {
            base
        } else {
            base + (self.xi - conformal_coupling::<T>()) * T::lit(6.0) * a2 / a
        }
    }
}

pub fn conformal_coupling<T: Real>() -> T {
    T::one() / T::lit(6.0)
}

/// Adiabatic frequency `W = sqrt(k² + m²a²)`.
pub fn frequency<T: Real>(k: T, mass: T, a: T) -> T {
    (k * k + mass * mass * a * a).sqrt()
}

/// `χ conj(χ') − conj(χ) χ'`; equals `i` for normalised modes.
pub fn wronskian<T: Real>(chi: Cx<T>, dchi: Cx<T>) -> Cx<T> {
    chi * dchi.conj() - chi.conj() * dchi
}

/// Exact massless conformally coupled mode `e^{−ikτ}/sqrt(2k)` and its derivative.
pub fn exact_conformal_mode<T: Real>(k: T, tau: T) -> [Cx<T>; 2] {
    let chi = Cx::from_polar(T::one() / (T::two() * k).sqrt(), -k * tau);
    [chi, chi * cx(T::zero(), -k)]
}

#[derive(Debug, Clone, Copy)]
pub struct ModeOptions<T> {
    /// Per-step propagator tolerance.
    pub tol: T,
    /// Largest accumulated phase `∫ sqrt(q) dτ` accepted for direct integration.
    pub phase_budget: T,
    /// Wronskian drift above which the result is flagged.
    pub wronskian_threshold: T,
    /// Gauss–Legendre stages (method order `2s`).
    pub stages: usize,
    pub max_steps: usize,
}

impl<T: Real> Default for ModeOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-12),
            phase_budget: T::lit(1e6),
            wronskian_threshold: T::lit(1e-8),
            stages: 6,
            max_steps: 5_000_000,
        }
    }
}

/// A mode sampled on a conformal-time grid.
#[derive(Debug, Clone)]
pub struct ModeFunction<T> {
    pub spec: ModeSpec<T>,
    pub grid: Vec<T>,
    pub chi: Vec<Cx<T>>,
    pub dchi: Vec<Cx<T>>,
    /// `max |W[χ] − W[χ](τ0)|` over the grid.
    pub wronskian_drift: T,
    /// Set when the drift exceeds [`ModeOptions::wronskian_threshold`].
    pub wronskian_warning: bool,
    pub steps: usize,
}

impl<T: Real> ModeFunction<T> {
    pub fn wronskian(&self, i: usize) -> Cx<T> {
        wronskian(self.chi[i], self.dchi[i])
    }
}

/// Accumulated phase `∫ sqrt(|q|) dτ` over `[lo, hi]`.
pub fn phase_estimate<T: Real, B: ConformalBackground<T> + ?Sized>(
    spec: &ModeSpec<T>,
    bg: &B,
    lo: T,
    hi: T,
) -> Result<T> {
    let r = integrate(
        |tau| spec.omega2_eff(bg.scale_derivs(tau)).abs().sqrt(),
        lo.min(hi),
        lo.max(hi),
        &QuadOptions::new(T::zero(), T::lit(1e-6)),
    )?;
    Ok(r.value)
}

/// A stage value of a mode integration, with the background at that time.
#[derive(Debug, Clone, Copy)]
pub struct ModeStage<T> {
    pub tau: T,
    pub weight: T,
    pub chi: Cx<T>,
    pub dchi: Cx<T>,
}

/// Low-level driver: integrates the mode from `tau0` with data `y0` over the
/// whole interval `[lo, hi]` (which must contain `tau0`). `on_stop` receives
/// the state at every point of `stops` inside the interval (and at `tau0` if
/// listed); `on_stage` receives every quadrature stage. Returns the step count.
#[allow(clippy::too_many_arguments)]
pub fn evolve_mode<T, B, S, P>(
    spec: &ModeSpec<T>,
    bg: &B,
    tau0: T,
    y0: [Cx<T>; 2],
    lo: T,
    hi: T,
    stops: &[T],
    opts: &ModeOptions<T>,
    mut on_stage: S,
    mut on_stop: P,
) -> Result<usize>
where
    T: Real,
    B: ConformalBackground<T> + ?Sized,
    S: FnMut(ModeStage<T>),
    P: FnMut(T, [Cx<T>; 2]),
{
    let (rlo, rhi) = bg.tau_range();
    if !(lo <= tau0 && tau0 <= hi) || lo < rlo || hi > rhi {
        return Err(Error::domain(
            "mode interval outside the background range or not containing tau0",
        ));
    }
    let phase = phase_estimate(spec, bg, lo, hi)?;
    if phase > opts.phase_budget {
        return Err(Error::ModeInfeasible {
            phase: phase.to_f64().unwrap_or(f64::INFINITY),
            budget: opts.phase_budget.to_f64().unwrap_or(f64::NAN),
        });
    }
    for &s in stops {
        if s == tau0 {
            on_stop(s, y0);
        }
    }
    let tableau = GaussTableau::new(opts.stages);
    let q = |tau: T| spec.omega2_eff(bg.scale_derivs(tau));
    let gopts = OscillatorOptions {
        tol: opts.tol,
        h_max: T::infinity(),
        max_steps: opts.max_steps,
    };
    let mut steps = 0;
    for end in [hi, lo] {
        if end == tau0 {
            continue;
        }
        let r = propagate(
            &tableau,
            q,
            tau0,
            end,
            y0,
            stops,
            &gopts,
            |p: StagePoint<T>| {
                on_stage(ModeStage {
                    tau: p.t,
                    weight: p.weight,
                    chi: p.x,
                    dchi: p.v,
                })
            },
            &mut on_stop,
        )?;
        for &s in stops {
            if s == end {
                on_stop(s, [r.x, r.v]);
            }
        }
        steps += r.steps;
    }
    Ok(steps)
}

/// Solves the mode equation from data `initial` at `tau0` and samples it on `grid`.
pub fn solve_mode<T, B>(
    spec: &ModeSpec<T>,
    bg: &B,
    tau0: T,
    initial: [Cx<T>; 2],
    grid: &[T],
    opts: &ModeOptions<T>,
) -> Result<ModeFunction<T>>
where
    T: Real,
    B: ConformalBackground<T> + ?Sized,
{
    if grid.is_empty() {
        return Err(Error::domain("empty conformal-time grid"));
    }
    let lo = grid.iter().copied().fold(tau0, T::min);
    let hi = grid.iter().copied().fold(tau0, T::max);
    let w0 = wronskian(initial[0], initial[1]);
    if (w0 - cx(T::zero(), T::one())).norm() > T::lit(1e-6) {
        return Err(Error::domain(format!(
            "initial data violates the normalisation: Wronskian {}{:+}i",
            w0.re, w0.im
        )));
    }
    let mut samples: Vec<Option<[Cx<T>; 2]>> = vec![None; grid.len()];
    let steps = evolve_mode(
        spec,
        bg,
        tau0,
        initial,
        lo,
        hi,
        grid,
        opts,
        |_| {},
        |tau, y| {
            for (slot, &g) in samples.iter_mut().zip(grid) {
                if g == tau {
                    *slot = Some(y);
                }
            }
        },
    )?;
    let mut chi = Vec::with_capacity(grid.len());
    let mut dchi = Vec::with_capacity(grid.len());
    for s in samples {
        let [x, v] = s.ok_or_else(|| Error::domain("grid point not reached"))?;
        chi.push(x);
        dchi.push(v);
    }
    let drift = max_of(
        chi.iter()
            .zip(&dchi)
            .map(|(x, v)| (wronskian(*x, *v) - w0).norm()),
    );
    Ok(ModeFunction {
        spec: *spec,
        grid: grid.to_vec(),
        chi,
        dchi,
        wronskian_drift: drift,
        wronskian_warning: drift > opts.wronskian_threshold,
        steps,
    })
}

/// Instantaneous WKB basis mode with zero phase at the background point `d`:
/// `χ̃ = 1/sqrt(2W)`, `χ̃' = (−iW − W'/(2W)) χ̃`.
pub fn wkb_basis<T: Real>(k: T, mass: T, d: [T; 4]) -> [Cx<T>; 2] {
    let [a, a1, _, _] = d;
    let w = frequency(k, mass, a);
    let w1 = mass * mass * a * a1 / w;
    let chi = T::one() / (T::two() * w).sqrt();
    [cx(chi, T::zero()), cx(-w1 / (T::two() * w) * chi, -w * chi)]
}

/// Bogoliubov coefficients `(α, β)` of a mode in the local WKB basis,
/// `χ = α χ̃ + β conj(χ̃)`.
pub fn bogoliubov_projection<T: Real>(
    chi: Cx<T>,
    dchi: Cx<T>,
    k: T,
    mass: T,
    d: [T; 4],
) -> (Cx<T>, Cx<T>) {
    let [b, db] = wkb_basis(k, mass, d);
    let mi = cx(T::zero(), -T::one());
    let alpha = mi * (chi * db.conj() - dchi * b.conj());
    let beta = mi * (b * dchi - db * chi);
    (alpha, beta)
}

/// Zeroth-order adiabatic mode `exp(−i∫_{τ0}^τ W)/sqrt(2W)` at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WkbMode<T> {
    pub k: T,
    pub mass: T,
    pub tau0: T,
    pub tau: T,
    /// `∫_{τ0}^{τ} W dτ'`.
    pub phase: T,
    pub w: T,
    /// `∂_τ W`.
    pub dw: T,
}

impl<T: Real> WkbMode<T> {
    pub fn chi(&self) -> Cx<T> {
        Cx::from_polar(T::one() / (T::two() * self.w).sqrt(), -self.phase)
    }

    pub fn dchi(&self) -> Cx<T> {
        self.chi() * cx(-self.dw / (T::two() * self.w), -self.w)
    }

    pub fn pair(&self) -> [Cx<T>; 2] {
        [self.chi(), self.dchi()]
    }
}

pub fn wkb_mode<T: Real, B: ConformalBackground<T> + ?Sized>(
    k: T,
    mass: T,
    bg: &B,
    tau0: T,
    tau: T,
) -> Result<WkbMode<T>> {
    let phase = if mass == T::zero() {
        k * (tau - tau0)
    } else {
        let r = integrate(
            |s| frequency(k, mass, bg.scale_derivs(s)[0]),
            tau0,
            tau,
            &QuadOptions::new(T::zero(), T::lit(1e-13)),
        )?;
        r.value
    };
    let [a, a1, _, _] = bg.scale_derivs(tau);
    let w = frequency(k, mass, a);
    Ok(WkbMode {
        k,
        mass,
        tau0,
        tau,
        phase,
        w,
        dw: mass * mass * a * a1 / w,
    })
}

/// Adiabaticity estimators `e1 = H m / W²` and `e2 = (∂_τ H) m / W³`.
pub fn adiabatic_error<T: Real, B: ConformalBackground<T> + ?Sized>(
    k: T,
    mass: T,
    bg: &B,
    tau: T,
) -> (T, T) {
    let d = bg.scale_derivs(tau);
    let [h, hd, _] = crate::background::hubble_from_conformal(d);
    let w = frequency(k, mass, d[0]);
    let dtau_h = d[0] * hd;
    (h.abs() * mass / (w * w), dtau_h.abs() * mass / w.powi(3))
}

/// Whether the WKB mode may replace a direct solve on `[lo, hi]`: both
/// estimators stay below `threshold` at every one of `samples` points.
pub fn wkb_gate<T: Real, B: ConformalBackground<T> + ?Sized>(
    k: T,
    mass: T,
    bg: &B,
    lo: T,
    hi: T,
    threshold: T,
    samples: usize,
) -> bool {
    let n = samples.max(2);
    let worst = max_of((0..n).map(|i| {
        let tau = lo + (hi - lo) * T::from_usize_lossy(i) / T::from_usize_lossy(n - 1);
        let (e1, e2) = adiabatic_error(k, mass, bg, tau);
        e1.max(e2)
    }));
    worst < threshold
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::background::{DeSitter, Minkowski, TanhProfile};

    #[test]
    fn minkowski_massive_mode() {
        let spec = ModeSpec::conformal(2.0, 1.5);
        let w: f64 = (4.0f64 + 2.25).sqrt();
        let y0 = [cx(1.0 / (2.0 * w).sqrt(), 0.0), cx(0.0, -(w / 2.0).sqrt())];
        let grid: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let m = solve_mode(&spec, &Minkowski, 0.0, y0, &grid, &ModeOptions::default()).unwrap();
        for (i, &t) in grid.iter().enumerate() {
            let exact = Cx::from_polar(1.0 / (2.0 * w).sqrt(), -w * t);
            assert!((m.chi[i] - exact).norm() < 1e-10);
        }
        assert!(!m.wronskian_warning);
    }

    #[test]
    fn wkb_is_exact_for_constant_scale_factor() {
        let mode = wkb_mode(3.0f64, 2.0, &Minkowski, 0.0, 1.7).unwrap();
        let w = 13f64.sqrt();
        assert!((mode.chi() - Cx::from_polar(1.0 / (2.0 * w).sqrt(), -w * 1.7)).norm() < 1e-14);
        assert!((wronskian(mode.chi(), mode.dchi()) - cx(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn wkb_wronskian_is_exact_on_expanding_background() {
        let bg = DeSitter { h: 1.0f64 };
        for &k in &[0.1, 1.0, 30.0] {
            let mode = wkb_mode(k, 5.0, &bg, -2.0, -0.5).unwrap();
            assert!((wronskian(mode.chi(), mode.dchi()) - cx(0.0, 1.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn projection_recovers_coefficients() {
        let d = [1.3f64, 0.4, 0.2, -0.1];
        let [b, db] = wkb_basis(2.0, 3.0, d);
        let (al, be) = (cx(1.2, 0.3), cx(0.5, -0.4));
        let chi = al * b + be * b.conj();
        let dchi = al * db + be * db.conj();
        let (a2, b2) = bogoliubov_projection(chi, dchi, 2.0, 3.0, d);
        assert!((a2 - al).norm() < 1e-14 && (b2 - be).norm() < 1e-14);
    }

    #[test]
    fn infeasible_phase_is_refused() {
        let spec = ModeSpec::conformal(1e7f64, 0.0);
        let err = solve_mode(
            &spec,
            &Minkowski,
            0.0,
            exact_conformal_mode(1e7, 0.0),
            &[1.0],
            &ModeOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::ModeInfeasible { .. }));
    }

    #[test]
    fn adiabatic_errors_vanish_at_large_momentum() {
        let bg = TanhProfile {
            a_mid: 2.0f64,
            b_amp: 1.0,
            rate: 1.0,
        };
        let (a1, b1) = adiabatic_error(100.0, 2.0, &bg, 0.0);
        let (a2, b2) = adiabatic_error(1000.0, 2.0, &bg, 0.0);
        assert!((a1 / a2 - 100.0).abs() / 100.0 < 0.01);
        assert!((b1 / b2 - 1000.0).abs() / 1000.0 < 0.01);
    }

    #[test]
    fn nonconformal_coupling_enters_through_curvature() {
        let bg = TanhProfile {
            a_mid: 2.0f64,
            b_amp: 1.0,
            rate: 1.0,
        };
        let d = bg.scale_derivs(0.3);
        let minimal = ModeSpec {
            k: 1.0,
            mass: 0.0,
            xi: 0.0,
        };
        assert!((minimal.omega2_eff(d) - (1.0 - d[2] / d[0])).abs() < 1e-14);
    }
}

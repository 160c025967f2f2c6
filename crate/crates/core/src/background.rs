//! ΛCDM geometry: Hubble rate, time-variable conversions, curvature tensors on
//! flat FLRW, and conformal-time frames used by the mode solver.
//!
//! Internal units: `H0 = 1`. Cosmological time derivatives are written with
//! dots (`Ḣ = dH/dt`), conformal ones with primes (`a' = da/dτ`).

use crate::error::{Error, Result};
use crate::numerics::interp::QuinticHermite;
use crate::numerics::quadrature::{gk15, integrate, QuadOptions};
use crate::scalar::Real;

/// Reduced Planck-free Newton constant `G H0^2 = (H0 / M_pl)^2` for
/// `H0 = 1e-33 eV` and `M_pl = 1.22091e28 eV`.
pub const NEWTON_CONSTANT_DEFAULT: f64 = 6.708_612_363_414_659e-123;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosmologyParams<T> {
    /// H0 in internal units (normally 1).
    pub hubble_constant: T,
    pub omega_lambda: T,
    pub omega_m: T,
    pub omega_r: T,
    /// Newton's constant in units of `1/H0^2`.
    pub newton_constant: T,
}

impl<T: Real> Default for CosmologyParams<T> {
    fn default() -> Self {
        Self {
            hubble_constant: T::one(),
            omega_lambda: T::lit(0.6999),
            omega_m: T::lit(0.3),
            omega_r: T::lit(1e-4),
            newton_constant: T::lit(NEWTON_CONSTANT_DEFAULT),
        }
    }
}

impl<T: Real> CosmologyParams<T> {
    pub fn new(
        hubble_constant: T,
        omega_lambda: T,
        omega_m: T,
        omega_r: T,
        newton_constant: T,
    ) -> Result<Self> {
        let p = Self {
            hubble_constant,
            omega_lambda,
            omega_m,
            omega_r,
            newton_constant,
        };
        p.validate()?;
        Ok(p)
    }

    /// Flat model: `Ω_Λ = 1 − Ω_m − Ω_r`.
    pub fn flat(omega_m: T, omega_r: T) -> Result<Self> {
        Self::new(
            T::one(),
            T::one() - omega_m - omega_r,
            omega_m,
            omega_r,
            T::lit(NEWTON_CONSTANT_DEFAULT),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hubble_constant > T::zero()) {
            return Err(Error::domain("hubble_constant must be positive"));
        }
        for (name, v) in [
            ("omega_lambda", self.omega_lambda),
            ("omega_m", self.omega_m),
            ("omega_r", self.omega_r),
        ] {
            if !(v >= T::zero()) || !v.is_finite() {
                return Err(Error::domain(format!(
                    "{name} must be a finite non-negative number"
                )));
            }
        }
        if !(self.newton_constant > T::zero()) {
            return Err(Error::domain("newton_constant must be positive"));
        }
        Ok(())
    }

    /// Critical density `3 H0^2 / (8 π G)` in internal units.
    pub fn rho0(&self) -> T {
        T::lit(3.0) * self.hubble_constant.powi(2) / (T::lit(8.0) * T::PI() * self.newton_constant)
    }

    /// `(H/H0)^2` of the ΛCDM model at scale factor `a`.
    pub fn e2(&self, a: T) -> T {
        self.omega_lambda + self.omega_m / a.powi(3) + self.omega_r / a.powi(4)
    }
}

/// `H(a) = H0 sqrt(Ω_Λ + Ω_m/a³ + Ω_r/a⁴)`.
pub fn hubble_lcdm<T: Real>(a: T, params: &CosmologyParams<T>) -> Result<T> {
    if !(a > T::zero()) {
        return Err(Error::domain(format!(
            "scale factor must be positive, got {a:e}"
        )));
    }
    Ok(params.hubble_constant * params.e2(a).sqrt())
}

/// Hubble rate and its first two cosmological-time derivatives as a function
/// of the scale factor.
pub trait HubbleHistory<T: Real>: Send + Sync {
    /// `[H, Ḣ, Ḧ]` at `a`.
    fn hubble_derivs(&self, a: T) -> Result<[T; 3]>;
}

impl<T: Real> HubbleHistory<T> for CosmologyParams<T> {
    fn hubble_derivs(&self, a: T) -> Result<[T; 3]> {
        let h = hubble_lcdm(a, self)?;
        let h0sq = self.hubble_constant.powi(2);
        let m = self.omega_m / a.powi(3);
        let r = self.omega_r / a.powi(4);
        // H² = H0²(Ω_Λ + m + r), dm/dt = −3Hm, dr/dt = −4Hr.
        let hd = -T::half() * h0sq * (T::lit(3.0) * m + T::lit(4.0) * r);
        let hdd = T::half() * h0sq * h * (T::lit(9.0) * m + T::lit(16.0) * r);
        Ok([h, hd, hdd])
    }
}

/// Conformal time `τ(a) = ∫_1^a da'/(a'² H(a'))`, origin at `a = 1`.
pub fn conformal_time<T: Real, B: HubbleHistory<T> + ?Sized>(
    a: T,
    history: &B,
    tol: T,
) -> Result<T> {
    time_integral(a, history, tol, true)
}

/// Cosmological time `t(a) = ∫_1^a da'/(a' H(a'))`, origin at `a = 1`.
pub fn cosmic_time<T: Real, B: HubbleHistory<T> + ?Sized>(a: T, history: &B, tol: T) -> Result<T> {
    time_integral(a, history, tol, false)
}

fn time_integral<T: Real, B: HubbleHistory<T> + ?Sized>(
    a: T,
    history: &B,
    tol: T,
    conformal: bool,
) -> Result<T> {
    if !(a > T::zero()) {
        return Err(Error::domain(format!(
            "scale factor must be positive, got {a:e}"
        )));
    }
    // Integrate in ln a: dτ = d ln a / (a H), dt = d ln a / H.
    let mut failure = None;
    let r = integrate(
        |s: T| {
            let aa = s.exp();
            match history.hubble_derivs(aa) {
                Ok([h, _, _]) => {
                    if conformal {
                        T::one() / (aa * h)
                    } else {
                        T::one() / h
                    }
                }
                Err(e) => {
                    failure.get_or_insert(e);
                    T::zero()
                }
            }
        },
        T::zero(),
        a.ln(),
        &QuadOptions::new(T::zero(), tol),
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(r?.value)
}

/// A point on the background in all four time variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimePoint<T> {
    pub z: T,
    pub a: T,
    pub t: T,
    pub tau: T,
}

impl<T: Real> TimePoint<T> {
    pub fn from_scale_factor<B: HubbleHistory<T> + ?Sized>(
        a: T,
        history: &B,
        tol: T,
    ) -> Result<Self> {
        Ok(Self {
            z: T::one() / a - T::one(),
            a,
            t: cosmic_time(a, history, tol)?,
            tau: conformal_time(a, history, tol)?,
        })
    }

    pub fn from_redshift<B: HubbleHistory<T> + ?Sized>(z: T, history: &B, tol: T) -> Result<Self> {
        if !(z > -T::one()) {
            return Err(Error::domain(format!("redshift must exceed -1, got {z:e}")));
        }
        let mut p = Self::from_scale_factor(T::one() / (T::one() + z), history, tol)?;
        p.z = z;
        Ok(p)
    }
}

/// Time-time components of the local curvature tensors on flat FLRW in
/// cosmological time, signature (+,−,−,−).
///
/// `I_ab` and `J_ab` are the metric variations of `∫√−g R²` and
/// `∫√−g R_ab R^ab`. On flat FLRW the Weyl tensor vanishes and the
/// Gauss–Bonnet density is a total derivative, so `I_ab = 3 J_ab`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureTensors00<T> {
    pub g00: T,
    pub ricci_scalar: T,
    pub einstein00: T,
    pub i00: T,
    pub j00: T,
}

/// Ratio `I00 / J00` on any flat FLRW background.
pub const I_OVER_J: f64 = 3.0;

impl<T: Real> CurvatureTensors00<T> {
    pub fn from_hubble(h: T, hd: T, hdd: T) -> Self {
        let six = T::lit(6.0);
        let core = T::two() * h * hdd - hd * hd + six * h * h * hd;
        Self {
            g00: T::one(),
            ricci_scalar: six * (hd + T::two() * h * h),
            einstein00: T::lit(3.0) * h * h,
            i00: T::lit(-18.0) * core,
            j00: -six * core,
        }
    }
}

/// Curvature tensors at `point` for the given Hubble history.
pub fn curvature_at<T: Real, B: HubbleHistory<T> + ?Sized>(
    point: &TimePoint<T>,
    history: &B,
) -> Result<CurvatureTensors00<T>> {
    let [h, hd, hdd] = history.hubble_derivs(point.a)?;
    Ok(CurvatureTensors00::from_hubble(h, hd, hdd))
}

/// Converts conformal derivatives `[a, a', a'', a''']` to `[H, Ḣ, Ḧ]`.
pub fn hubble_from_conformal<T: Real>(d: [T; 4]) -> [T; 3] {
    let [a, a1, a2, a3] = d;
    let h = a1 / (a * a);
    let hd = a2 / a.powi(3) - T::two() * a1 * a1 / a.powi(4);
    let hdd =
        a3 / a.powi(4) - T::lit(7.0) * a1 * a2 / a.powi(5) + T::lit(8.0) * a1.powi(3) / a.powi(6);
    [h, hd, hdd]
}

/// Converts `a` and `[H, Ḣ, Ḧ]` to conformal derivatives `[a, a', a'', a''']`.
pub fn conformal_from_hubble<T: Real>(a: T, hh: [T; 3]) -> [T; 4] {
    let [h, hd, hdd] = hh;
    [
        a,
        a * a * h,
        a.powi(3) * (T::two() * h * h + hd),
        a.powi(4) * (T::lit(6.0) * h.powi(3) + T::lit(7.0) * h * hd + hdd),
    ]
}

/// A background parametrised by conformal time, as needed by the mode equation.
pub trait ConformalBackground<T: Real>: Send + Sync {
    /// `[a, a', a'', a''']` at conformal time `tau`.
    fn scale_derivs(&self, tau: T) -> [T; 4];

    /// Interval of conformal time on which the background is defined.
    fn tau_range(&self) -> (T, T);

    /// Cosmological time at `tau` (any fixed origin).
    fn cosmic_time(&self, tau: T) -> T;

    /// Inverse of `a(τ)`.
    fn tau_at(&self, a: T) -> Result<T>;

    fn hubble(&self, tau: T) -> [T; 3] {
        hubble_from_conformal(self.scale_derivs(tau))
    }
}

/// Flat space, `a ≡ 1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Minkowski;

impl<T: Real> ConformalBackground<T> for Minkowski {
    fn scale_derivs(&self, _tau: T) -> [T; 4] {
        [T::one(), T::zero(), T::zero(), T::zero()]
    }
    fn tau_range(&self) -> (T, T) {
        (T::neg_infinity(), T::infinity())
    }
    fn cosmic_time(&self, tau: T) -> T {
        tau
    }
    fn tau_at(&self, a: T) -> Result<T> {
        if a == T::one() {
            Ok(T::zero())
        } else {
            Err(Error::domain("Minkowski background has a = 1 only"))
        }
    }
}

/// De Sitter space with constant `H`, `a(τ) = 1/(1 − Hτ)`.
#[derive(Debug, Clone, Copy)]
pub struct DeSitter<T> {
    pub h: T,
}

impl<T: Real> ConformalBackground<T> for DeSitter<T> {
    fn scale_derivs(&self, tau: T) -> [T; 4] {
        let a = T::one() / (T::one() - self.h * tau);
        let h = self.h;
        [
            a,
            h * a * a,
            T::two() * h * h * a.powi(3),
            T::lit(6.0) * h.powi(3) * a.powi(4),
        ]
    }
    fn tau_range(&self) -> (T, T) {
        (T::neg_infinity(), T::one() / self.h)
    }
    fn cosmic_time(&self, tau: T) -> T {
        -(T::one() - self.h * tau).ln() / self.h
    }
    fn tau_at(&self, a: T) -> Result<T> {
        if !(a > T::zero()) {
            return Err(Error::domain("scale factor must be positive"));
        }
        Ok((T::one() - T::one() / a) / self.h)
    }
}

/// Smooth transition `a²(τ) = A + B tanh(ρτ)` between two static regions.
/// The adiabatic expansion on this profile is an expansion in `ρ`.
#[derive(Debug, Clone, Copy)]
pub struct TanhProfile<T> {
    pub a_mid: T,
    pub b_amp: T,
    pub rate: T,
}

impl<T: Real> ConformalBackground<T> for TanhProfile<T> {
    fn scale_derivs(&self, tau: T) -> [T; 4] {
        let th = (self.rate * tau).tanh();
        let sech2 = T::one() - th * th;
        let r = self.rate;
        let g = self.a_mid + self.b_amp * th;
        let g1 = self.b_amp * r * sech2;
        let g2 = -T::two() * r * th * g1;
        let g3 = -T::two() * self.b_amp * r.powi(3) * sech2 * (sech2 - T::two() * th * th);
        let [a, a1, a2, a3] = chain_sqrt(g, g1, g2, g3);
        [a, a1, a2, a3]
    }
    fn tau_range(&self) -> (T, T) {
        (T::neg_infinity(), T::infinity())
    }
    fn cosmic_time(&self, tau: T) -> T {
        let (v, _) = gk15(|s| self.scale_derivs(s)[0], T::zero(), tau);
        v
    }
    fn tau_at(&self, a: T) -> Result<T> {
        let x = (a * a - self.a_mid) / self.b_amp;
        if !(x.abs() < T::one()) {
            return Err(Error::domain("scale factor outside the tanh profile range"));
        }
        Ok(x.atanh() / self.rate)
    }
}

/// Derivatives of `sqrt(g)` from those of `g`.
pub(crate) fn chain_sqrt<T: Real>(g: T, g1: T, g2: T, g3: T) -> [T; 4] {
    let w = g.sqrt();
    let two = T::two();
    let w1 = g1 / (two * w);
    let w2 = g2 / (two * w) - g1 * g1 / (T::lit(4.0) * w.powi(3));
    let w3 = g3 / (two * w) - T::lit(3.0) * g1 * g2 / (T::lit(4.0) * w.powi(3))
        + T::lit(3.0) * g1.powi(3) / (T::lit(8.0) * w.powi(5));
    [w, w1, w2, w3]
}

/// Conformal frame of a [`HubbleHistory`] over a range of scale factors.
///
/// `τ(a)` and `t(a)` are tabulated on nodes uniform in `ln a`; `a(τ)` is
/// recovered by quintic Hermite interpolation and the derivatives of `a` are
/// then evaluated from the history at that scale factor.
pub struct HistoryFrame<T, B> {
    history: B,
    a_of_tau: QuinticHermite<T>,
    t_of_tau: QuinticHermite<T>,
    a_lo: T,
    a_hi: T,
}

impl<T: Real, B: HubbleHistory<T>> HistoryFrame<T, B> {
    /// Tabulates the frame on `[a_lo, a_hi]` with node spacing `d_ln_a`.
    pub fn new(history: B, a_lo: T, a_hi: T, d_ln_a: T, tol: T) -> Result<Self> {
        if !(a_lo > T::zero() && a_hi > a_lo) {
            return Err(Error::domain("frame needs 0 < a_lo < a_hi"));
        }
        let span = (a_hi / a_lo).ln();
        let n = (span / d_ln_a).ceil().to_usize().unwrap_or(1).max(2);
        let step = span / T::from_usize_lossy(n);
        let mut taus = Vec::with_capacity(n + 1);
        let mut ts = Vec::with_capacity(n + 1);
        let mut a_rows = Vec::with_capacity(n + 1);
        let mut t_rows = Vec::with_capacity(n + 1);
        let mut tau = conformal_time(a_lo, &history, tol)?;
        let mut t = cosmic_time(a_lo, &history, tol)?;
        let mut failure = None;
        for i in 0..=n {
            let s = a_lo.ln() + step * T::from_usize_lossy(i);
            if i > 0 {
                let s0 = s - step;
                let mut seg = |conformal: bool| {
                    gk15(
                        |x: T| {
                            let aa = x.exp();
                            match history.hubble_derivs(aa) {
                                Ok([h, _, _]) => {
                                    if conformal {
                                        T::one() / (aa * h)
                                    } else {
                                        T::one() / h
                                    }
                                }
                                Err(e) => {
                                    failure.get_or_insert(e);
                                    T::zero()
                                }
                            }
                        },
                        s0,
                        s,
                    )
                    .0
                };
                tau = tau + seg(true);
                t = t + seg(false);
            }
            let a = if i == n { a_hi } else { s.exp() };
            let hh = history.hubble_derivs(a)?;
            let d = conformal_from_hubble(a, hh);
            taus.push(tau);
            ts.push(t);
            a_rows.push([d[0], d[1], d[2]]);
            // t' = a, t'' = a'.
            t_rows.push([t, d[0], d[1]]);
        }
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(Self {
            history,
            a_of_tau: QuinticHermite::new(taus.clone(), a_rows)?,
            t_of_tau: QuinticHermite::new(taus, t_rows)?,
            a_lo,
            a_hi,
        })
    }

    pub fn history(&self) -> &B {
        &self.history
    }

    pub fn scale_factor_range(&self) -> (T, T) {
        (self.a_lo, self.a_hi)
    }
}

impl<T: Real, B: HubbleHistory<T>> ConformalBackground<T> for HistoryFrame<T, B> {
    fn scale_derivs(&self, tau: T) -> [T; 4] {
        let a = self.a_of_tau.eval(tau)[0];
        match self.history.hubble_derivs(a) {
            Ok(hh) => conformal_from_hubble(a, hh),
            Err(_) => [T::nan(); 4],
        }
    }

    fn tau_range(&self) -> (T, T) {
        self.a_of_tau.domain()
    }

    fn cosmic_time(&self, tau: T) -> T {
        self.t_of_tau.eval(tau)[0]
    }

    fn tau_at(&self, a: T) -> Result<T> {
        if !(a >= self.a_lo && a <= self.a_hi) {
            return Err(Error::domain(format!(
                "scale factor {a:e} outside the tabulated frame"
            )));
        }
        // Newton on the interpolant, started from a secant guess.
        let (lo, hi) = self.tau_range();
        let mut tau =
            lo + (hi - lo) * (a.ln() - self.a_lo.ln()) / (self.a_hi.ln() - self.a_lo.ln());
        for _ in 0..50 {
            let [v, d, _] = self.a_of_tau.eval(tau);
            let dt = (v - a) / d;
            tau = (tau - dt).max(lo).min(hi);
            if dt.abs() <= T::epsilon() * (T::one() + tau.abs()) * T::lit(4.0) {
                break;
            }
        }
        Ok(tau)
    }
}

/// ΛCDM conformal frame.
pub type LcdmFrame<T> = HistoryFrame<T, CosmologyParams<T>>;

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> CosmologyParams<f64> {
        CosmologyParams::default()
    }

    #[test]
    fn hubble_today_is_h0() {
        assert!((hubble_lcdm(1.0, &params()).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn radiation_era_value() {
        let h = hubble_lcdm(1e-9, &params()).unwrap();
        assert!((h / 1e16 - 1.0).abs() < 1e-4, "{h:e}");
    }

    #[test]
    fn non_positive_scale_factor_is_domain_error() {
        assert!(matches!(hubble_lcdm(0.0, &params()), Err(Error::Domain(_))));
        assert!(matches!(
            hubble_lcdm(-1.0, &params()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn radiation_only_conformal_time_is_linear() {
        let p = CosmologyParams::<f64>::new(1.0, 0.0, 0.0, 1.0, 1.0).unwrap();
        let t1 = conformal_time(0.3, &p, 1e-12).unwrap();
        let t2 = conformal_time(0.8, &p, 1e-12).unwrap();
        assert!((t2 - t1 - 0.5).abs() < 1e-12);
        assert_eq!(conformal_time(1.0, &p, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn de_sitter_curvature() {
        let c = CurvatureTensors00::from_hubble(2.0, 0.0, 0.0);
        assert_eq!(c.ricci_scalar, 48.0);
        assert_eq!(c.einstein00, 12.0);
        assert_eq!(c.i00, 0.0);
        assert_eq!(c.j00, 0.0);
        let flat = CurvatureTensors00::from_hubble(0.0, 0.0, 0.0);
        assert_eq!(
            [flat.ricci_scalar, flat.einstein00, flat.i00, flat.j00],
            [0.0; 4]
        );
    }

    #[test]
    fn hubble_conformal_roundtrip() {
        let hh: [f64; 3] = [0.7, -0.3, 0.45];
        let back = hubble_from_conformal(conformal_from_hubble(1.3, hh));
        for i in 0..3 {
            assert!((back[i] - hh[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn de_sitter_frame_is_consistent() {
        let ds = DeSitter { h: 1.5f64 };
        let [h, hd, hdd] = ds.hubble(0.2);
        assert!((h - 1.5).abs() < 1e-14 && hd.abs() < 1e-13 && hdd.abs() < 1e-12);
        let tau = ds.tau_at(2.0).unwrap();
        assert!((ds.scale_derivs(tau)[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn lcdm_frame_matches_direct_quadrature() {
        let frame = LcdmFrame::new(params(), 0.5, 1.5, 2e-3, 1e-13).unwrap();
        for &a in &[0.55, 0.9, 1.0, 1.37] {
            let tau = frame.tau_at(a).unwrap();
            let direct = conformal_time(a, &params(), 1e-13).unwrap();
            assert!((tau - direct).abs() < 1e-11, "{a}");
            let d = frame.scale_derivs(tau);
            assert!((d[0] - a).abs() < 1e-12);
            let t = cosmic_time(a, &params(), 1e-13).unwrap();
            assert!((frame.cosmic_time(tau) - t).abs() < 1e-11);
        }
    }

    #[test]
    fn tanh_profile_derivatives_match_finite_differences() {
        let p = TanhProfile {
            a_mid: 2.0,
            b_amp: 1.0,
            rate: 0.7,
        };
        let tau = 0.4;
        let h = 1e-4;
        let d = p.scale_derivs(tau);
        let f = |s: f64| p.scale_derivs(s);
        for k in 0..3 {
            let fd = (f(tau + h)[k] - f(tau - h)[k]) / (2.0 * h);
            assert!((fd - d[k + 1]).abs() < 1e-7, "{k}");
        }
    }
}

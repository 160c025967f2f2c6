//! States of low energy and their generalised thermal dressings.
//!
//! A state of low energy (SLE) is built per momentum from a reference mode
//! `χ`: the transformed mode `λχ + μ conj(χ)` with `|λ|² − |μ|² = 1` that
//! minimises the energy density smeared in cosmological time with a sampling
//! function `f`.

use crate::background::ConformalBackground;
use crate::error::{Error, Result};
use crate::modes::{
    bogoliubov_projection, evolve_mode, exact_conformal_mode, frequency, phase_estimate, wkb_basis,
    wkb_gate, ModeOptions, ModeSpec, ModeStage,
};
use crate::numerics::quadrature::{integrate, QuadOptions};
use crate::scalar::{cx, Cx, Real};

/// `∫_{-1}^{1} exp(−1/(1−x²)) dx`.
fn bump_integral<T: Real>() -> T {
    integrate(
        bump,
        -T::one(),
        T::one(),
        &QuadOptions::new(T::zero(), T::lit(1e-14)),
    )
    .map(|r| r.value)
    .unwrap_or_else(|_| T::lit(0.443_993_816_168_079_4))
}

fn bump<T: Real>(x: T) -> T {
    if x.abs() >= T::one() {
        T::zero()
    } else {
        (-T::one() / (T::one() - x * x)).exp()
    }
}

/// Smooth compactly supported bump in cosmological time, `∫ f dt = weight`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingFunction<T> {
    t_lo: T,
    t_hi: T,
    tau_lo: T,
    tau_hi: T,
    weight: T,
    norm: T,
}

impl<T: Real> SamplingFunction<T> {
    /// Support given in conformal time; the bump itself lives in cosmological time.
    pub fn in_conformal_time<B: ConformalBackground<T> + ?Sized>(
        tau_lo: T,
        tau_hi: T,
        bg: &B,
    ) -> Result<Self> {
        if !(tau_hi > tau_lo) {
            return Err(Error::domain("sampling support must have positive length"));
        }
        let (t_lo, t_hi) = (bg.cosmic_time(tau_lo), bg.cosmic_time(tau_hi));
        let half = T::half() * (t_hi - t_lo);
        Ok(Self {
            t_lo,
            t_hi,
            tau_lo,
            tau_hi,
            weight: T::one(),
            norm: T::one() / (half * bump_integral::<T>()),
        })
    }

    /// Window centred at scale factor `a_center`, `width` e-folds wide in `a`.
    pub fn from_scale_factor_window<B: ConformalBackground<T> + ?Sized>(
        a_center: T,
        width: T,
        bg: &B,
    ) -> Result<Self> {
        if !(a_center > T::zero() && width > T::zero()) {
            return Err(Error::domain(
                "sampling window needs a positive centre and width",
            ));
        }
        let e = (T::half() * width).exp();
        Self::in_conformal_time(bg.tau_at(a_center / e)?, bg.tau_at(a_center * e)?, bg)
    }

    pub fn from_redshift_window<B: ConformalBackground<T> + ?Sized>(
        z_center: T,
        width: T,
        bg: &B,
    ) -> Result<Self> {
        Self::from_scale_factor_window(T::one() / (T::one() + z_center), width, bg)
    }

    /// Same shape with total weight multiplied by `factor`.
    pub fn scaled(mut self, factor: T) -> Self {
        self.weight = self.weight * factor;
        self
    }

    pub fn value_at_time(&self, t: T) -> T {
        let x = (T::two() * t - self.t_lo - self.t_hi) / (self.t_hi - self.t_lo);
        self.weight * self.norm * bump(x)
    }

    pub fn value<B: ConformalBackground<T> + ?Sized>(&self, tau: T, bg: &B) -> T {
        if tau <= self.tau_lo || tau >= self.tau_hi {
            return T::zero();
        }
        self.value_at_time(bg.cosmic_time(tau))
    }

    pub fn time_support(&self) -> (T, T) {
        (self.t_lo, self.t_hi)
    }

    pub fn conformal_support(&self) -> (T, T) {
        (self.tau_lo, self.tau_hi)
    }

    /// Conformal time at the middle of the support in cosmological time.
    pub fn conformal_center<B: ConformalBackground<T> + ?Sized>(&self, bg: &B) -> T {
        let target = T::half() * (self.t_lo + self.t_hi);
        let (mut lo, mut hi) = (self.tau_lo, self.tau_hi);
        for _ in 0..200 {
            let mid = T::half() * (lo + hi);
            if bg.cosmic_time(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= T::epsilon() * (T::one() + mid.abs()) {
                break;
            }
        }
        T::half() * (lo + hi)
    }
}

/// Coefficients of the sampled energy of `λχ + μ conj(χ)`:
/// `c1 (|λ|² + |μ|²) + 2 Re(λ conj(μ) c2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledForm<T> {
    pub c1: T,
    pub c2: Cx<T>,
}

impl<T: Real> SampledForm<T> {
    pub fn energy(&self, lambda: Cx<T>, mu: Cx<T>) -> T {
        self.c1 * (lambda.norm_sqr() + mu.norm_sqr()) + T::two() * (lambda * mu.conj() * self.c2).re
    }

    pub fn scaled(&self, s: T) -> Self {
        Self {
            c1: self.c1 * s,
            c2: self.c2 * s,
        }
    }
}

/// Energy of one mode, `(|χ'|² + ω²|χ|²)/2`, and its bilinear partner
/// `(χ'² + ω²χ²)/2` with `ω² = k² + m²a²`.
pub(crate) fn energy_pair<T: Real>(chi: Cx<T>, dchi: Cx<T>, w2: T) -> (T, Cx<T>) {
    let e = T::half() * (dchi.norm_sqr() + w2 * chi.norm_sqr());
    let b = (dchi * dchi + chi * chi * w2) * T::half();
    (e, b)
}

/// Reference mode used to build the sampled form.
#[derive(Debug, Clone, Copy)]
pub enum ReferenceMode<T> {
    /// `e^{−ikτ}/sqrt(2k)`; valid for massless conformal coupling only.
    ExactConformal,
    /// Numerical solution from data `(χ, χ')` at `tau0`.
    Numeric { tau0: T, data: [Cx<T>; 2] },
}

/// `c1 = ∫ f E[χ] a^{-4} dt`, `c2 = ∫ f B[χ] a^{-4} dt` with `dt = a dτ`.
pub fn sampled_energy_form<T: Real, B: ConformalBackground<T> + ?Sized>(
    spec: &ModeSpec<T>,
    bg: &B,
    sampling: &SamplingFunction<T>,
    reference: ReferenceMode<T>,
    opts: &ModeOptions<T>,
) -> Result<SampledForm<T>> {
    let (lo, hi) = sampling.conformal_support();
    let form = match reference {
        ReferenceMode::ExactConformal => {
            if spec.mass != T::zero() || !spec.is_conformal() {
                return Err(Error::domain(
                    "exact reference modes need m = 0 and conformal coupling",
                ));
            }
            let integrand = |tau: T, part: usize| {
                let [chi, dchi] = exact_conformal_mode(spec.k, tau);
                let a = bg.scale_derivs(tau)[0];
                let (e, b) = energy_pair(chi, dchi, spec.k * spec.k);
                let w = sampling.value(tau, bg) / a.powi(3);
                match part {
                    0 => e * w,
                    1 => b.re * w,
                    _ => b.im * w,
                }
            };
            let c1 = integrate(
                |t| integrand(t, 0),
                lo,
                hi,
                &QuadOptions::new(T::zero(), T::lit(1e-12)),
            )?
            .value;
            // B[χ] vanishes identically here; only roundoff is left to resolve.
            let q = QuadOptions::new(T::lit(1e-14) * c1, T::lit(1e-12));
            let re = integrate(|t| integrand(t, 1), lo, hi, &q)?.value;
            let im = integrate(|t| integrand(t, 2), lo, hi, &q)?.value;
            SampledForm { c1, c2: cx(re, im) }
        }
        ReferenceMode::Numeric { tau0, data } => {
            let (c1, c2, _) = numeric_form(
                spec,
                bg,
                sampling,
                tau0,
                data,
                lo.min(tau0),
                hi.max(tau0),
                &[],
                opts,
            )?;
            SampledForm { c1, c2 }
        }
    };
    if !(form.c1 > form.c2.norm()) {
        return Err(Error::DegenerateForm {
            c1: form.c1.to_f64().unwrap_or(f64::NAN),
            c2_abs: form.c2.norm().to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(form)
}

/// Integrates the reference mode over `[lo, hi]`, accumulating the sampled
/// form and recording the mode at `stops`.
#[allow(clippy::too_many_arguments, clippy::type_complexity)]
fn numeric_form<T: Real, B: ConformalBackground<T> + ?Sized>(
    spec: &ModeSpec<T>,
    bg: &B,
    sampling: &SamplingFunction<T>,
    tau0: T,
    data: [Cx<T>; 2],
    lo: T,
    hi: T,
    stops: &[T],
    opts: &ModeOptions<T>,
) -> Result<(T, Cx<T>, Vec<(T, [Cx<T>; 2])>)> {
    let (slo, shi) = sampling.conformal_support();
    let mut all_stops: Vec<T> = stops.to_vec();
    all_stops.extend([slo, shi]);
    let mut c1 = T::zero();
    let mut c2 = cx(T::zero(), T::zero());
    let mut samples = Vec::with_capacity(stops.len());
    evolve_mode(
        spec,
        bg,
        tau0,
        data,
        lo,
        hi,
        &all_stops,
        opts,
        |s: ModeStage<T>| {
            if s.tau > slo && s.tau < shi {
                let a = bg.scale_derivs(s.tau)[0];
                let w2 = spec.k * spec.k + spec.mass * spec.mass * a * a;
                let (e, b) = energy_pair(s.chi, s.dchi, w2);
                let wt = s.weight * sampling.value(s.tau, bg) / a.powi(3);
                c1 = c1 + wt * e;
                c2 = c2 + b * wt;
            }
        },
        |tau, y| {
            if stops.contains(&tau) {
                samples.push((tau, y))
            }
        },
    )?;
    Ok((c1, c2, samples))
}

/// Minimiser of a sampled form on `|λ|² − |μ|² = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BogoliubovEntry<T> {
    pub lambda: Cx<T>,
    pub mu: Cx<T>,
    /// Hyperbolic angle: `λ = cosh θ`, `|μ| = sinh θ`.
    pub theta: T,
    /// Phase of `μ`.
    pub phi: T,
    pub minimum: T,
}

/// Closed-form minimiser: `tanh 2θ = |c2|/c1`, `μ = −sinh θ · c2/|c2|`,
/// minimum `sqrt(c1² − |c2|²)`.
pub fn minimize_bogoliubov<T: Real>(c1: T, c2: Cx<T>) -> Result<BogoliubovEntry<T>> {
    let r = c2.norm();
    if !(c1 > r) {
        return Err(Error::DegenerateForm {
            c1: c1.to_f64().unwrap_or(f64::NAN),
            c2_abs: r.to_f64().unwrap_or(f64::NAN),
        });
    }
    let theta = T::half() * (r / c1).atanh();
    if r == T::zero() {
        return Ok(BogoliubovEntry {
            lambda: cx(T::one(), T::zero()),
            mu: cx(T::zero(), T::zero()),
            theta: T::zero(),
            phi: T::zero(),
            minimum: c1,
        });
    }
    let phi = c2.arg() + T::PI();
    let phi = if phi > T::PI() {
        phi - T::two() * T::PI()
    } else {
        phi
    };
    Ok(BogoliubovEntry {
        lambda: cx(theta.cosh(), T::zero()),
        mu: Cx::from_polar(theta.sinh(), phi),
        theta,
        phi,
        minimum: ((c1 - r) * (c1 + r)).sqrt(),
    })
}

/// Bogoliubov coefficients on a momentum grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BogoliubovPair<T> {
    pub k: Vec<T>,
    pub lambda: Vec<Cx<T>>,
    pub mu: Vec<Cx<T>>,
}

impl<T: Real> BogoliubovPair<T> {
    /// `max_k | |λ|² − |μ|² − 1 |`.
    pub fn normalisation_defect(&self) -> T {
        self.lambda
            .iter()
            .zip(&self.mu)
            .map(|(l, m)| (l.norm_sqr() - m.norm_sqr() - T::one()).abs())
            .fold(T::zero(), T::max)
    }
}

/// Bose weights `(1/(1 − e^{−βk0}), 1/(e^{βk0} − 1))`; `(1, 0)` for
/// `βk0 > 700` or infinite `β`.
pub fn thermal_weights<T: Real>(beta: T, k0: T) -> (T, T) {
    let x = beta * k0;
    if !(x <= T::lit(700.0)) {
        return (T::one(), T::zero());
    }
    let n = T::one() / x.exp_m1();
    (T::one() + n, n)
}

/// How the reference mode of one momentum is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceRoute {
    ExactConformal,
    Numeric,
    Wkb,
}

#[derive(Debug, Clone, Copy)]
pub struct SleOptions<T> {
    pub mode: ModeOptions<T>,
    /// Largest adiabaticity estimate for which WKB modes replace direct solves.
    pub wkb_threshold: T,
    pub gate_samples: usize,
}

impl<T: Real> Default for SleOptions<T> {
    fn default() -> Self {
        Self {
            mode: ModeOptions::default(),
            wkb_threshold: T::lit(1e-4),
            gate_samples: 33,
        }
    }
}

/// SLE mode of one momentum sampled at a set of conformal times, expressed
/// by its coefficients in the local WKB basis.
#[derive(Debug, Clone)]
pub struct SleSamples<T> {
    pub route: ReferenceRoute,
    pub form: Option<SampledForm<T>>,
    pub entry: BogoliubovEntry<T>,
    pub taus: Vec<T>,
    pub alpha: Vec<Cx<T>>,
    pub beta: Vec<Cx<T>>,
}

/// State of low energy of a conformally coupled field of mass `mass`.
#[derive(Debug, Clone, Copy)]
pub struct StateOfLowEnergy<T> {
    pub mass: T,
    pub sampling: SamplingFunction<T>,
    pub options: SleOptions<T>,
}

impl<T: Real> StateOfLowEnergy<T> {
    pub fn new(mass: T, sampling: SamplingFunction<T>) -> Self {
        Self {
            mass,
            sampling,
            options: SleOptions::default(),
        }
    }

    /// Conformal interval covering the sampling support and `taus`.
    pub fn span(&self, taus: &[T]) -> (T, T) {
        let (lo, hi) = self.sampling.conformal_support();
        let lo = taus.iter().copied().fold(lo, T::min);
        let hi = taus.iter().copied().fold(hi, T::max);
        (lo, hi)
    }

    /// Chooses the reference route for momentum `k` on the interval needed for `taus`.
    pub fn route<B: ConformalBackground<T> + ?Sized>(
        &self,
        k: T,
        bg: &B,
        taus: &[T],
    ) -> Result<ReferenceRoute> {
        if self.mass == T::zero() {
            return Ok(ReferenceRoute::ExactConformal);
        }
        let (lo, hi) = self.span(taus);
        let spec = ModeSpec::conformal(k, self.mass);
        let phase = phase_estimate(&spec, bg, lo, hi)?;
        if phase <= self.options.mode.phase_budget {
            return Ok(ReferenceRoute::Numeric);
        }
        if wkb_gate(
            k,
            self.mass,
            bg,
            lo,
            hi,
            self.options.wkb_threshold,
            self.options.gate_samples,
        ) {
            return Ok(ReferenceRoute::Wkb);
        }
        Err(Error::ModeInfeasible {
            phase: phase.to_f64().unwrap_or(f64::INFINITY),
            budget: self.options.mode.phase_budget.to_f64().unwrap_or(f64::NAN),
        })
    }

    /// SLE mode of momentum `k` at the conformal times `taus`, using the WKB
    /// mode at the window centre as reference on the numerical route.
    pub fn sample<B: ConformalBackground<T> + ?Sized>(
        &self,
        k: T,
        bg: &B,
        taus: &[T],
    ) -> Result<SleSamples<T>> {
        match self.route(k, bg, taus)? {
            ReferenceRoute::ExactConformal => {
                let alpha = taus
                    .iter()
                    .map(|&t| exact_conformal_mode(k, t)[0] * (T::two() * k).sqrt())
                    .collect();
                Ok(SleSamples {
                    route: ReferenceRoute::ExactConformal,
                    form: None,
                    entry: minimize_bogoliubov(T::one(), cx(T::zero(), T::zero()))?,
                    taus: taus.to_vec(),
                    alpha,
                    beta: vec![cx(T::zero(), T::zero()); taus.len()],
                })
            }
            ReferenceRoute::Numeric => {
                let tau0 = self.sampling.conformal_center(bg);
                let data = wkb_basis(k, self.mass, bg.scale_derivs(tau0));
                self.sample_with_reference(k, bg, taus, tau0, data)
            }
            // Beyond the gate the oscillatory c2 integral is negligible and
            // the WKB mode is taken as the SLE mode itself.
            ReferenceRoute::Wkb => Ok(SleSamples {
                route: ReferenceRoute::Wkb,
                form: None,
                entry: minimize_bogoliubov(T::one(), cx(T::zero(), T::zero()))?,
                taus: taus.to_vec(),
                alpha: vec![cx(T::one(), T::zero()); taus.len()],
                beta: vec![cx(T::zero(), T::zero()); taus.len()],
            }),
        }
    }

    /// As [`sample`](Self::sample) with an explicit numerical reference mode.
    pub fn sample_with_reference<B: ConformalBackground<T> + ?Sized>(
        &self,
        k: T,
        bg: &B,
        taus: &[T],
        tau0: T,
        data: [Cx<T>; 2],
    ) -> Result<SleSamples<T>> {
        let spec = ModeSpec::conformal(k, self.mass);
        let (lo, hi) = self.span(taus);
        let (lo, hi) = (lo.min(tau0), hi.max(tau0));
        let (c1, c2, samples) = numeric_form(
            &spec,
            bg,
            &self.sampling,
            tau0,
            data,
            lo,
            hi,
            taus,
            &self.options.mode,
        )?;
        let entry = minimize_bogoliubov(c1, c2)?;
        let mut alpha = vec![cx(T::nan(), T::nan()); taus.len()];
        let mut beta = alpha.clone();
        for (tau, [x, v]) in samples {
            let xs = x * entry.lambda + x.conj() * entry.mu;
            let vs = v * entry.lambda + v.conj() * entry.mu;
            let (al, be) = bogoliubov_projection(xs, vs, k, self.mass, bg.scale_derivs(tau));
            for (i, &t) in taus.iter().enumerate() {
                if t == tau {
                    alpha[i] = al;
                    beta[i] = be;
                }
            }
        }
        Ok(SleSamples {
            route: ReferenceRoute::Numeric,
            form: Some(SampledForm { c1, c2 }),
            entry,
            taus: taus.to_vec(),
            alpha,
            beta,
        })
    }

    /// Bogoliubov coefficients relative to the reference modes on a momentum grid.
    pub fn bogoliubov_pair<B: ConformalBackground<T> + ?Sized>(
        &self,
        ks: &[T],
        bg: &B,
    ) -> Result<BogoliubovPair<T>> {
        let mut lambda = Vec::with_capacity(ks.len());
        let mut mu = Vec::with_capacity(ks.len());
        for &k in ks {
            let s = self.sample(k, bg, &[])?;
            lambda.push(s.entry.lambda);
            mu.push(s.entry.mu);
        }
        Ok(BogoliubovPair {
            k: ks.to_vec(),
            lambda,
            mu,
        })
    }
}

/// SLE dressed with Bose occupation at inverse temperature `beta`
/// (conformal units) frozen at scale factor `a_f`.
#[derive(Debug, Clone, Copy)]
pub struct GeneralizedThermalState<T> {
    pub base: StateOfLowEnergy<T>,
    /// `T::infinity()` gives the SLE itself.
    pub beta: T,
    pub a_f: T,
}

impl<T: Real> GeneralizedThermalState<T> {
    pub fn new(base: StateOfLowEnergy<T>, beta: T, a_f: T) -> Result<Self> {
        if !(beta > T::zero()) {
            return Err(Error::domain("inverse temperature must be positive"));
        }
        if !(a_f > T::zero()) {
            return Err(Error::domain("freeze-out scale factor must be positive"));
        }
        Ok(Self { base, beta, a_f })
    }

    pub fn vacuum(base: StateOfLowEnergy<T>) -> Self {
        Self {
            base,
            beta: T::infinity(),
            a_f: T::one(),
        }
    }

    pub fn mass(&self) -> T {
        self.base.mass
    }

    /// `k0 = sqrt(k² + m² a_F²)`.
    pub fn k0(&self, k: T) -> T {
        frequency(k, self.base.mass, self.a_f)
    }

    pub fn weights(&self, k: T) -> (T, T) {
        thermal_weights(self.beta, self.k0(k))
    }

    /// Occupation number `n(k)`.
    pub fn occupation(&self, k: T) -> T {
        self.weights(k).1
    }

    pub fn is_thermal(&self) -> bool {
        self.beta.is_finite()
    }
}

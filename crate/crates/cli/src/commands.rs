//! One function per subcommand, each producing a [`Table`].

use semicosmo::background::{
    curvature_at, ConformalBackground, CosmologyParams, HubbleHistory, LcdmFrame, TimePoint,
};
use semicosmo::energy::{
    rho_total, FieldContent, FreezeOutParams, MassiveThermal, ModeSumOptions, RenormalizationChoice,
};
use semicosmo::friedmann::{
    epsilon_bounds_report, extract_effective_radiation, scan_epsilon, FriedmannOptions,
    RadiationFit,
};
use semicosmo::modes::{solve_mode, wkb_basis, ModeOptions, ModeSpec};
use semicosmo::numerics::ode::Dopri5Options;
use semicosmo::states::{
    GeneralizedThermalState, ReferenceRoute, SamplingFunction, SleOptions, StateOfLowEnergy,
};
use semicosmo::units::{BOLTZMANN_EV_PER_K, HBAR_C_EV_M, PLANCK_MASS_EV};

use crate::config::{MassiveThermalMode, RunConfig};
use crate::output::{format_float, Cell, Header, Table};
use crate::{CliError, Command, TOOL_VERSION};

pub struct CommandOutput {
    pub table: Table,
    /// Extra header entries.
    pub notes: Header,
    /// `(ε, z)` of a divergence when exactly one ε was requested.
    pub divergence: Option<(f64, f64)>,
}

impl CommandOutput {
    fn plain(table: Table) -> Self {
        Self {
            table,
            notes: Vec::new(),
            divergence: None,
        }
    }
}

pub fn execute(cmd: Command, cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    match cmd {
        Command::Background => background(cfg).map(CommandOutput::plain),
        Command::Modes => modes(cfg).map(CommandOutput::plain),
        Command::Sle => sle(cfg).map(CommandOutput::plain),
        Command::Rho => rho(cfg).map(CommandOutput::plain),
        Command::Friedmann => friedmann(cfg),
        Command::Scan => scan(cfg).map(CommandOutput::plain),
    }
}

/// Provenance block: tool version, configuration hash, tolerances and the
/// conversion constants in effect.
pub fn header(cmd: Command, cfg: &RunConfig, notes: &Header) -> Header {
    let t = &cfg.tolerances;
    let p = params(cfg).ok();
    let mut h: Header = vec![
        ("tool".into(), format!("semicosmo {TOOL_VERSION}")),
        ("command".into(), cmd.name().into()),
        ("config_sha256".into(), cfg.hash()),
        (
            "tolerances".into(),
            format!(
                "mode_tol={} phase_budget={} wronskian_threshold={} wkb_threshold={} quad_rel_tol={} quad_abs_tol={} frame_tol={} frame_step={} ode_rtol={} ode_atol={}",
                format_float(t.mode_tol),
                format_float(t.phase_budget),
                format_float(t.wronskian_threshold),
                format_float(t.wkb_threshold),
                format_float(t.quad_rel_tol),
                format_float(t.quad_abs_tol),
                format_float(t.frame_tol),
                format_float(t.frame_step),
                format_float(t.ode_rtol),
                format_float(t.ode_atol)
            ),
        ),
        (
            "constants".into(),
            format!(
                "hbar_c_ev_m={} boltzmann_ev_per_k={} planck_mass_ev={} hubble_ev={} newton_constant={} rho0={}",
                format_float(HBAR_C_EV_M),
                format_float(BOLTZMANN_EV_PER_K),
                format_float(PLANCK_MASS_EV),
                format_float(cfg.cosmology.hubble_ev),
                format_float(cfg.newton_constant()),
                format_float(p.map(|p| p.rho0()).unwrap_or(f64::NAN))
            ),
        ),
        ("units".into(), "H0 = 1; densities in units of rho0".into()),
    ];
    h.extend(notes.iter().cloned());
    h
}

fn params(cfg: &RunConfig) -> Result<CosmologyParams<f64>, CliError> {
    let c = &cfg.cosmology;
    Ok(CosmologyParams::new(
        1.0,
        c.omega_lambda,
        c.omega_m,
        c.omega_r,
        cfg.newton_constant(),
    )?)
}

fn taus_and_frame(
    cfg: &RunConfig,
    zs: &[f64],
) -> Result<(LcdmFrame<f64>, SamplingFunction<f64>, Vec<f64>), CliError> {
    let p = params(cfg)?;
    let s = &cfg.sampling;
    let half = 0.5 * s.width_efolds;
    let a_c = 1.0 / (1.0 + s.z_center);
    let z_hi = zs.iter().copied().fold(s.z_center, f64::max);
    let z_lo = zs.iter().copied().fold(s.z_center, f64::min);
    let a_lo = (a_c * (-half).exp()).min(1.0 / (1.0 + z_hi)) / 1.05;
    let a_hi = (a_c * half.exp()).max(1.0 / (1.0 + z_lo)) * 1.05;
    let t = &cfg.tolerances;
    let frame = LcdmFrame::new(p, a_lo, a_hi, t.frame_step, t.frame_tol)?;
    let sampling = SamplingFunction::from_redshift_window(s.z_center, s.width_efolds, &frame)?;
    let taus = zs
        .iter()
        .map(|&z| frame.tau_at(1.0 / (1.0 + z)))
        .collect::<semicosmo::Result<Vec<_>>>()?;
    Ok((frame, sampling, taus))
}

fn mode_options(cfg: &RunConfig) -> ModeOptions<f64> {
    let t = &cfg.tolerances;
    ModeOptions {
        tol: t.mode_tol,
        phase_budget: t.phase_budget,
        wronskian_threshold: t.wronskian_threshold,
        ..ModeOptions::default()
    }
}

fn sle_state(cfg: &RunConfig, mass: f64, sampling: SamplingFunction<f64>) -> StateOfLowEnergy<f64> {
    let mut s = StateOfLowEnergy::new(mass, sampling);
    s.options = SleOptions {
        mode: mode_options(cfg),
        wkb_threshold: cfg.tolerances.wkb_threshold,
        ..SleOptions::default()
    };
    s
}

fn masses(cfg: &RunConfig) -> Vec<f64> {
    let mut m = Vec::new();
    if cfg.massless.enabled {
        m.push(0.0);
    }
    if cfg.massive.enabled {
        m.push(cfg.massive.mass);
    }
    m
}

fn background(cfg: &RunConfig) -> Result<Table, CliError> {
    let p = params(cfg)?;
    let mut t = Table::new(&[
        "z",
        "a",
        "t",
        "tau",
        "hubble",
        "hubble_dot",
        "hubble_ddot",
        "ricci_scalar",
        "einstein00",
        "i00",
        "j00",
    ]);
    for z in cfg.grid.redshifts() {
        let pt = TimePoint::from_redshift(z, &p, cfg.tolerances.frame_tol)?;
        let [h, hd, hdd] = p.hubble_derivs(pt.a)?;
        let c = curvature_at(&pt, &p)?;
        t.push(
            [
                z,
                pt.a,
                pt.t,
                pt.tau,
                h,
                hd,
                hdd,
                c.ricci_scalar,
                c.einstein00,
                c.i00,
                c.j00,
            ]
            .into_iter()
            .map(Cell::F)
            .collect(),
        );
    }
    Ok(t)
}

fn modes(cfg: &RunConfig) -> Result<Table, CliError> {
    let zs = cfg.grid.redshifts();
    let (frame, sampling, taus) = taus_and_frame(cfg, &zs)?;
    let tau0 = sampling.conformal_center(&frame);
    let d0 = frame.scale_derivs(tau0);
    let opts = mode_options(cfg);
    let mut t = Table::new(&[
        "mass",
        "k",
        "z",
        "tau",
        "chi_re",
        "chi_im",
        "dchi_re",
        "dchi_im",
        "wronskian_drift",
    ]);
    for m in masses(cfg) {
        for &k in &cfg.grid.k {
            let spec = ModeSpec::conformal(k, m);
            let mf = solve_mode(&spec, &frame, tau0, wkb_basis(k, m, d0), &taus, &opts)?;
            if mf.wronskian_warning {
                log::warn!(
                    "k = {k:e}, m = {m:e}: Wronskian drift {:e}",
                    mf.wronskian_drift
                );
            }
            for (i, &z) in zs.iter().enumerate() {
                let (c, dc) = (mf.chi[i], mf.dchi[i]);
                t.push(
                    [
                        m,
                        k,
                        z,
                        taus[i],
                        c.re,
                        c.im,
                        dc.re,
                        dc.im,
                        mf.wronskian_drift,
                    ]
                    .into_iter()
                    .map(Cell::F)
                    .collect(),
                );
            }
        }
    }
    Ok(t)
}

fn route_name(r: ReferenceRoute) -> &'static str {
    match r {
        ReferenceRoute::ExactConformal => "exact-conformal",
        ReferenceRoute::Numeric => "numeric",
        ReferenceRoute::Wkb => "wkb",
    }
}

fn sle(cfg: &RunConfig) -> Result<Table, CliError> {
    let (frame, sampling, _) = taus_and_frame(cfg, &[cfg.sampling.z_center])?;
    let mut t = Table::new(&[
        "mass",
        "k",
        "route",
        "c1",
        "c2_re",
        "c2_im",
        "lambda_re",
        "lambda_im",
        "mu_re",
        "mu_im",
        "theta",
        "phi",
        "minimum",
    ]);
    for m in masses(cfg) {
        let state = sle_state(cfg, m, sampling);
        for &k in &cfg.grid.k {
            let s = state.sample(k, &frame, &[])?;
            let (c1, c2) = s
                .form
                .map(|f| (f.c1, f.c2))
                .unwrap_or((f64::NAN, Default::default()));
            let e = s.entry;
            let mut row = vec![Cell::F(m), Cell::F(k), Cell::S(route_name(s.route).into())];
            row.extend(
                [
                    c1,
                    c2.re,
                    c2.im,
                    e.lambda.re,
                    e.lambda.im,
                    e.mu.re,
                    e.mu.im,
                    e.theta,
                    e.phi,
                    e.minimum,
                ]
                .into_iter()
                .map(Cell::F),
            );
            t.push(row);
        }
    }
    Ok(t)
}

fn quad_options(cfg: &RunConfig) -> ModeSumOptions<f64> {
    ModeSumOptions {
        rel_tol: cfg.tolerances.quad_rel_tol,
        abs_tol: cfg.tolerances.quad_abs_tol,
        ..ModeSumOptions::default()
    }
}

fn rho(cfg: &RunConfig) -> Result<Table, CliError> {
    let zs = cfg.grid.redshifts();
    let (frame, sampling, taus) = taus_and_frame(cfg, &zs)?;
    let p = params(cfg)?;
    let units = cfg.units();
    let massless = if cfg.massless.enabled {
        let base = sle_state(cfg, 0.0, sampling);
        Some(if cfg.massless.thermal {
            GeneralizedThermalState::new(
                base,
                units.kelvin_to_beta(cfg.massless.temperature_k),
                1.0,
            )?
        } else {
            GeneralizedThermalState::vacuum(base)
        })
    } else {
        None
    };
    let m = &cfg.massive;
    let base = sle_state(cfg, m.mass, sampling);
    let (massive, massive_thermal) = match m.thermal {
        MassiveThermalMode::None => (
            GeneralizedThermalState::vacuum(base),
            MassiveThermal::ModeSum,
        ),
        MassiveThermalMode::ModeSum => (
            GeneralizedThermalState::new(base, m.beta, m.a_f)?,
            MassiveThermal::ModeSum,
        ),
        MassiveThermalMode::FreezeOut => {
            let fo = FreezeOutParams::wimp(m.freeze_out_mass_gev)?;
            (
                GeneralizedThermalState::vacuum(base),
                MassiveThermal::FreezeOut {
                    mass: fo.mass_internal(&units),
                    beta: fo.beta(&units),
                    a_f: fo.a_f,
                },
            )
        }
    };
    let content = FieldContent {
        massless,
        massive: m.enabled.then_some(massive),
        massive_thermal,
    };
    let r = &cfg.renormalization;
    let renorm = RenormalizationChoice {
        omega_lambda_ren: r.omega_lambda_ren,
        delta: r.delta,
        epsilon: r.epsilon,
        gamma: r.gamma,
        mu_scale: units.inverse_length_to_internal(r.inverse_mu_m),
    };
    let rows = rho_total(&content, &frame, &p, &renorm, &taus, &quad_options(cfg))?;
    let mut t = Table::new(&[
        "z",
        "rho_gvac_m",
        "rho_gvac_0",
        "rho_gth_m",
        "rho_gth_0",
        "anomaly",
        "lambda_term",
        "delta_term",
        "epsilon_term",
        "total",
        "rho_lcdm",
    ]);
    for (b, &z) in rows.iter().zip(&zs) {
        let a = 1.0 / (1.0 + z);
        let mut row = vec![Cell::F(z)];
        row.extend(b.components().into_iter().map(Cell::F));
        row.push(Cell::F(b.total));
        row.push(Cell::F(p.e2(a)));
        t.push(row);
    }
    Ok(t)
}

fn friedmann_options(cfg: &RunConfig) -> FriedmannOptions<f64> {
    let f = &cfg.friedmann;
    FriedmannOptions {
        z_max: f.z_max,
        points_per_decade: f.points_per_decade,
        ode: Dopri5Options {
            rtol: cfg.tolerances.ode_rtol,
            atol: cfg.tolerances.ode_atol,
            ..FriedmannOptions::<f64>::default().ode
        },
        ..FriedmannOptions::default()
    }
}

fn friedmann(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let p = params(cfg)?;
    let eps = &cfg.friedmann.epsilon;
    let sols = scan_epsilon(eps, &p, &friedmann_options(cfg));
    let mut t = Table::new(&["epsilon", "z", "hubble", "hubble_lcdm", "epsilon_term"]);
    let mut notes = Vec::new();
    let mut divergence = None;
    for sol in sols {
        let sol = sol?;
        for ((&z, &h), term) in sol.z.iter().zip(&sol.hubble).zip(sol.epsilon_term()) {
            let lcdm = p.e2(1.0 / (1.0 + z)).sqrt();
            t.push(vec![
                Cell::F(sol.epsilon),
                Cell::F(z),
                Cell::F(h),
                Cell::F(lcdm),
                Cell::F(term),
            ]);
        }
        if let Some(d) = sol.divergence {
            notes.push((
                format!("divergence[{}]", format_float(sol.epsilon)),
                format!("z={} reason={:?}", format_float(d.z), d.reason),
            ));
            if eps.len() == 1 {
                divergence = Some((sol.epsilon, d.z));
            }
        }
    }
    Ok(CommandOutput {
        table: t,
        notes,
        divergence,
    })
}

fn scan(cfg: &RunConfig) -> Result<Table, CliError> {
    let p = params(cfg)?;
    let f = &cfg.friedmann;
    let fit = RadiationFit {
        z_lo: f.fit_z_lo,
        z_hi: f.fit_z_hi,
        threshold: f.fit_threshold,
    };
    let sols = scan_epsilon(&f.epsilon, &p, &friedmann_options(cfg));
    let mut t = Table::new(&[
        "epsilon",
        "status",
        "blowup_z",
        "omega_r_tilde",
        "omega_r_ratio",
        "fit_residual",
        "bbn",
        "starobinsky",
        "torsion_balance",
    ]);
    for (sol, &e) in sols.into_iter().zip(&f.epsilon) {
        let sol = sol?;
        let (status, blowup, omega, resid) =
            match (sol.divergence, extract_effective_radiation(&sol, &fit)) {
                (Some(d), _) => ("diverged".to_string(), d.z, f64::NAN, f64::NAN),
                (None, Ok(r)) => ("ok".to_string(), f64::NAN, r.omega_r_tilde, r.residual),
                (None, Err(semicosmo::Error::FitResidual { residual, .. })) => {
                    ("fit-residual".to_string(), f64::NAN, f64::NAN, residual)
                }
                (None, Err(e)) => return Err(e.into()),
            };
        let verdicts = epsilon_bounds_report(e);
        let mut row = vec![
            Cell::F(e),
            Cell::S(status),
            Cell::F(blowup),
            Cell::F(omega),
            Cell::F(omega / p.omega_r),
            Cell::F(resid),
        ];
        row.extend(verdicts.iter().map(|v| Cell::B(v.compatible)));
        t.push(row);
    }
    Ok(t)
}

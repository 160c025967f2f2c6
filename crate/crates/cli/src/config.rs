//! Run configuration: TOML on disk, every field defaulted.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use semicosmo::background::NEWTON_CONSTANT_DEFAULT;
use semicosmo::units::Units;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub cosmology: CosmologyConfig,
    pub renormalization: RenormConfig,
    pub sampling: SamplingConfig,
    pub massive: MassiveConfig,
    pub massless: MasslessConfig,
    pub grid: GridConfig,
    pub tolerances: ToleranceConfig,
    pub friedmann: FriedmannConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CosmologyConfig {
    pub omega_lambda: f64,
    pub omega_m: f64,
    pub omega_r: f64,
    /// `H0` in eV; fixes every unit conversion.
    pub hubble_ev: f64,
    /// `G` in units of `1/H0²`; derived from `hubble_ev` when absent.
    pub newton_constant: Option<f64>,
}

impl Default for CosmologyConfig {
    fn default() -> Self {
        Self {
            omega_lambda: 0.6999,
            omega_m: 0.3,
            omega_r: 1e-4,
            hubble_ev: 1e-33,
            newton_constant: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenormConfig {
    pub omega_lambda_ren: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub gamma: f64,
    /// Hadamard length scale `1/μ` in metres.
    pub inverse_mu_m: f64,
}

impl Default for RenormConfig {
    fn default() -> Self {
        Self {
            omega_lambda_ren: 0.6999,
            delta: 0.0,
            epsilon: 0.0,
            gamma: 1e-122,
            inverse_mu_m: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub z_center: f64,
    /// Support width in e-folds of the scale factor.
    pub width_efolds: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            z_center: 0.01,
            width_efolds: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MassiveThermalMode {
    None,
    ModeSum,
    FreezeOut,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MassiveConfig {
    pub enabled: bool,
    /// Mass in units of `H0` used for mode sums.
    pub mass: f64,
    pub thermal: MassiveThermalMode,
    /// Comoving inverse temperature in units of `1/H0` (mode-sum thermal part).
    pub beta: f64,
    pub a_f: f64,
    /// Mass in GeV of the species in the freeze-out closed form.
    pub freeze_out_mass_gev: f64,
}

impl Default for MassiveConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            mass: 1.0,
            thermal: MassiveThermalMode::None,
            beta: 1.0,
            a_f: 1.0,
            freeze_out_mass_gev: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MasslessConfig {
    pub enabled: bool,
    /// `false` gives the pure state of low energy.
    pub thermal: bool,
    /// Present temperature in kelvin.
    pub temperature_k: f64,
}

impl Default for MasslessConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            thermal: true,
            temperature_k: 2.7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub z_min: f64,
    pub z_max: f64,
    pub z_points: usize,
    pub z_spacing: Spacing,
    /// Comoving momenta in units of `H0` for `modes` and `sle`.
    pub k: Vec<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            z_min: 0.0,
            z_max: 1.0,
            z_points: 11,
            z_spacing: Spacing::Linear,
            k: vec![0.1, 1.0, 10.0, 100.0],
        }
    }
}

impl GridConfig {
    pub fn redshifts(&self) -> Vec<f64> {
        let n = self.z_points;
        if n == 1 {
            return vec![self.z_min];
        }
        (0..n)
            .map(|i| {
                let s = i as f64 / (n - 1) as f64;
                match self.z_spacing {
                    Spacing::Linear => self.z_min + (self.z_max - self.z_min) * s,
                    Spacing::Log => {
                        let (lo, hi) = (self.z_min.ln_1p(), self.z_max.ln_1p());
                        (lo + (hi - lo) * s).exp_m1()
                    }
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceConfig {
    pub mode_tol: f64,
    pub phase_budget: f64,
    pub wronskian_threshold: f64,
    pub wkb_threshold: f64,
    pub quad_rel_tol: f64,
    pub quad_abs_tol: f64,
    pub frame_tol: f64,
    pub frame_step: f64,
    pub ode_rtol: f64,
    pub ode_atol: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            mode_tol: 1e-12,
            phase_budget: 1e6,
            wronskian_threshold: 1e-8,
            wkb_threshold: 1e-4,
            quad_rel_tol: 1e-5,
            quad_abs_tol: 1e-10,
            frame_tol: 1e-12,
            frame_step: 0.01,
            ode_rtol: 1e-10,
            ode_atol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FriedmannConfig {
    pub epsilon: Vec<f64>,
    pub z_max: f64,
    pub points_per_decade: usize,
    pub fit_z_lo: f64,
    pub fit_z_hi: f64,
    pub fit_threshold: f64,
}

impl Default for FriedmannConfig {
    fn default() -> Self {
        Self {
            epsilon: vec![0.0],
            z_max: 1e9,
            points_per_decade: 20,
            fit_z_lo: 1e7,
            fit_z_hi: 1e9,
            fit_threshold: 1e-2,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Canonical TOML; identical configs serialise to identical bytes.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always serialisable")
    }

    /// SHA-256 of the canonical TOML.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn units(&self) -> Units {
        Units {
            hubble_ev: self.cosmology.hubble_ev,
        }
    }

    pub fn newton_constant(&self) -> f64 {
        self.cosmology.newton_constant.unwrap_or_else(|| {
            if self.cosmology.hubble_ev == 1e-33 {
                NEWTON_CONSTANT_DEFAULT
            } else {
                self.units().newton_constant()
            }
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        let c = &self.cosmology;
        if !(c.hubble_ev > 0.0) {
            return bad("cosmology.hubble_ev must be positive");
        }
        if let Some(g) = c.newton_constant {
            if !(g > 0.0) {
                return bad("cosmology.newton_constant must be positive");
            }
        }
        let g = &self.grid;
        if g.z_points == 0 || !(g.z_min >= -0.5 && g.z_max >= g.z_min) {
            return bad("grid needs z_points >= 1 and -0.5 <= z_min <= z_max");
        }
        if g.k.iter().any(|&k| !(k > 0.0)) {
            return bad("grid.k entries must be positive");
        }
        let s = &self.sampling;
        if !(s.width_efolds > 0.0 && s.z_center > -0.5) {
            return bad("sampling needs width_efolds > 0 and z_center > -0.5");
        }
        let m = &self.massive;
        if !(m.mass >= 0.0 && m.beta > 0.0 && m.a_f > 0.0 && m.freeze_out_mass_gev > 0.0) {
            return bad("massive needs mass >= 0 and positive beta, a_f, freeze_out_mass_gev");
        }
        if !(self.massless.temperature_k > 0.0) {
            return bad("massless.temperature_k must be positive");
        }
        if !(self.renormalization.inverse_mu_m > 0.0) {
            return bad("renormalization.inverse_mu_m must be positive");
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("mode_tol", t.mode_tol),
            ("phase_budget", t.phase_budget),
            ("wronskian_threshold", t.wronskian_threshold),
            ("wkb_threshold", t.wkb_threshold),
            ("quad_rel_tol", t.quad_rel_tol),
            ("quad_abs_tol", t.quad_abs_tol),
            ("frame_tol", t.frame_tol),
            ("frame_step", t.frame_step),
            ("ode_rtol", t.ode_rtol),
            ("ode_atol", t.ode_atol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!(
                    "tolerances.{name} must be positive and finite"
                )));
            }
        }
        let f = &self.friedmann;
        if f.epsilon.iter().any(|e| !e.is_finite()) {
            return bad("friedmann.epsilon entries must be finite");
        }
        if !(f.z_max > 0.0
            && f.points_per_decade > 0
            && f.fit_z_hi >= f.fit_z_lo
            && f.fit_threshold > 0.0)
        {
            return bad("friedmann needs z_max > 0, points_per_decade > 0, fit_z_hi >= fit_z_lo, fit_threshold > 0");
        }
        Ok(())
    }
}

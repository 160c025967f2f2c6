//! Conversions between physical units and the internal `H0 = 1` units.

/// Reduced Planck constant times the speed of light, eV·m.
pub const HBAR_C_EV_M: f64 = 1.973_269_804e-7;
/// Boltzmann constant, eV/K.
pub const BOLTZMANN_EV_PER_K: f64 = 8.617_333_262e-5;
/// Planck mass `sqrt(ħc/G)`, eV.
pub const PLANCK_MASS_EV: f64 = 1.220_91e28;

/// Unit system anchored at a Hubble constant expressed in eV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Units {
    pub hubble_ev: f64,
}

impl Default for Units {
    fn default() -> Self {
        Self { hubble_ev: 1e-33 }
    }
}

impl Units {
    pub fn gev_to_internal(&self, m_gev: f64) -> f64 {
        m_gev * 1e9 / self.hubble_ev
    }

    pub fn internal_to_gev(&self, m: f64) -> f64 {
        m * self.hubble_ev * 1e-9
    }

    /// Temperature in kelvin to an inverse temperature in units of `1/H0`.
    pub fn kelvin_to_beta(&self, kelvin: f64) -> f64 {
        self.hubble_ev / (BOLTZMANN_EV_PER_K * kelvin)
    }

    pub fn beta_to_kelvin(&self, beta: f64) -> f64 {
        self.hubble_ev / (BOLTZMANN_EV_PER_K * beta)
    }

    /// `G H0² = (H0/M_pl)²`, Newton's constant in internal units.
    pub fn newton_constant(&self) -> f64 {
        (self.hubble_ev / PLANCK_MASS_EV).powi(2)
    }

    /// Inverse length `1/L` (L in metres) in units of `H0`.
    pub fn inverse_length_to_internal(&self, metres: f64) -> f64 {
        HBAR_C_EV_M / metres / self.hubble_ev
    }

    /// Critical density `3 H0² M_pl² / (8π)` in GeV⁴.
    pub fn rho0_gev4(&self) -> f64 {
        let h = self.hubble_ev * 1e-9;
        let mp = PLANCK_MASS_EV * 1e-9;
        3.0 * h * h * mp * mp / (8.0 * std::f64::consts::PI)
    }
}

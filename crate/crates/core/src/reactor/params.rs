use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Full thermal power (W).
pub const FULL_POWER_W: f64 = 500e6;
/// Lumped delayed-neutron fraction.
pub const DELAYED_FRACTION: f64 = 7.65e-3;
/// Prompt neutron generation time (s).
pub const GENERATION_TIME_S: f64 = 1.76e-4;
/// Lumped precursor decay constant (1/s).
pub const LUMPED_DECAY: f64 = 7.59e-2;

/// Operating levels available from [`ReactorParams::table1`], in percent.
pub const TABLE1_POWERS: [u32; 5] = [100, 80, 60, 40, 20];

/// Which heat capacity divides the fission-power term `P0 · n_r` in the
/// fuel energy balance.
///
/// The tabulated operating points only reproduce the reference transfer
/// functions and dc gains of the reactor when that term is divided by the
/// coolant heat capacity, so [`HeatingScale::CoolantCapacity`] is the
/// default. [`HeatingScale::FuelCapacity`] is the energy balance as usually
/// written, `μ_f dT_f/dt = P0 n − Ω (T_f − T_c)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeatingScale {
    FuelCapacity,
    #[default]
    CoolantCapacity,
}

/// Constants for one operating power level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactorParams {
    /// Full thermal power (W).
    pub p0: f64,
    /// Total delayed-neutron fraction.
    pub beta: f64,
    /// Prompt neutron generation time Λ (s).
    pub generation_time: f64,
    /// Per-group precursor decay constants (1/s).
    pub decay_constants: Vec<f64>,
    /// Per-group delayed fractions; must sum to `beta`.
    pub group_fractions: Vec<f64>,
    /// Fuel temperature reactivity coefficient (1/°C).
    pub alpha_fuel: f64,
    /// Coolant temperature reactivity coefficient (1/°C).
    pub alpha_coolant: f64,
    /// Fuel heat capacity μ_f (J/°C).
    pub mu_fuel: f64,
    /// Coolant heat capacity μ_c (J/°C).
    pub mu_coolant: f64,
    /// Fuel-to-coolant convective conductance Ω = A·h (W/°C).
    pub omega: f64,
    /// Coolant flow heat capacity rate M_c = w_c·c_pc (W/°C).
    pub m_coolant: f64,
    /// Relative neutron density at the operating point.
    pub n_r0: f64,
    /// Average coolant temperature at the operating point (°C).
    pub t_coolant0: f64,
    #[serde(default)]
    pub heating: HeatingScale,
}

impl ReactorParams {
    /// Built-in operating point for `power_percent` ∈ {100, 80, 60, 40, 20}.
    pub fn table1(power_percent: u32) -> Option<Self> {
        // (T_c, n_r0, α_f, α_c, μ_f, μ_c, Ω, M_c)
        let row = match power_percent {
            100 => (302.0, 1.0, -2.9e-5, -6.3e-4, 2.25e7, 6.9e7, 3.94e6, 7.08e7),
            80 => (298.6, 0.8, -3.2e-5, -5.59e-4, 2.21e7, 6.8e7, 4.16e6, 6.89e7),
            60 => (295.0, 0.6, -3.3e-5, -5.56e-4, 2.18e7, 6.7e7, 4.38e6, 6.87e7),
            40 => (291.8, 0.4, -3.5e-5, -5.22e-4, 2.14e7, 6.61e7, 4.61e6, 6.79e7),
            20 => (288.4, 0.2, -3.8e-5, -4.86e-4, 2.10e7, 6.53e7, 4.85e6, 6.7e7),
            _ => return None,
        };
        let (t_coolant0, n_r0, alpha_fuel, alpha_coolant, mu_fuel, mu_coolant, omega, m_coolant) =
            row;
        Some(Self {
            p0: FULL_POWER_W,
            beta: DELAYED_FRACTION,
            generation_time: GENERATION_TIME_S,
            decay_constants: vec![LUMPED_DECAY],
            group_fractions: vec![DELAYED_FRACTION],
            alpha_fuel,
            alpha_coolant,
            mu_fuel,
            mu_coolant,
            omega,
            m_coolant,
            n_r0,
            t_coolant0,
            heating: HeatingScale::default(),
        })
    }

    /// Number of delayed-neutron groups.
    pub fn groups(&self) -> usize {
        self.decay_constants.len()
    }

    /// Heat capacity dividing the fission-power term.
    pub fn heating_capacity(&self) -> f64 {
        match self.heating {
            HeatingScale::FuelCapacity => self.mu_fuel,
            HeatingScale::CoolantCapacity => self.mu_coolant,
        }
    }

    pub fn with_heating(mut self, heating: HeatingScale) -> Self {
        self.heating = heating;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("reactor parameters: {msg}")));
        if self.decay_constants.is_empty() {
            return bad("at least one delayed group is required");
        }
        if self.decay_constants.len() != self.group_fractions.len() {
            return bad("decay_constants and group_fractions differ in length");
        }
        let sum: f64 = self.group_fractions.iter().sum();
        if (sum - self.beta).abs() > 1e-12 * self.beta.abs().max(f64::MIN_POSITIVE) {
            return bad("group_fractions must sum to beta");
        }
        if self.decay_constants.iter().any(|&l| !(l > 0.0)) {
            return bad("decay constants must be positive");
        }
        let positive = [
            ("p0", self.p0),
            ("generation_time", self.generation_time),
            ("mu_fuel", self.mu_fuel),
            ("mu_coolant", self.mu_coolant),
            ("omega", self.omega),
            ("m_coolant", self.m_coolant),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be positive and finite"));
            }
        }
        if !(self.n_r0 > 0.0 && self.n_r0 <= 1.0) {
            return bad("n_r0 must lie in (0, 1]");
        }
        if !self.t_coolant0.is_finite() || !self.alpha_fuel.is_finite() || !self.alpha_coolant.is_finite() {
            return bad("temperatures and coefficients must be finite");
        }
        Ok(())
    }
}

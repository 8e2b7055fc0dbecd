//! Physical constants and the two coordinate systems of the probe's
//! parameter space: magnetic field / temperature on one hand, total energy /
//! energy ratio on the other.
//!
//! Energies cross the API in kelvin equivalents (E/k_B); joules appear only
//! in intermediate expressions. Magnetic fields are in gauss.

use crate::error::{Error, Result};

/// Bohr magneton (J/T), CODATA 2018.
pub const BOHR_MAGNETON: f64 = 9.274_010_078_3e-24;

/// Boltzmann constant (J/K), exact since the 2019 SI redefinition.
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Unified atomic mass unit (kg), CODATA 2018.
pub const ATOMIC_MASS: f64 = 1.660_539_066_60e-27;

/// Gauss in tesla.
pub const GAUSS_TO_TESLA: f64 = 1e-4;

/// Mass of the bath atom, 86.909 u (kg).
pub const MASS_RB: f64 = 86.909 * ATOMIC_MASS;

/// Mass of the probe atom, 132.905 u (kg).
pub const MASS_CS: f64 = 132.905 * ATOMIC_MASS;

/// Constants describing the probe/bath atom pair and field coupling.
///
/// `reduced_mass` is always derived from the two masses; it cannot be set
/// independently.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalConstants {
    /// Bohr magneton (J/T).
    pub bohr_magneton: f64,
    /// Boltzmann constant (J/K).
    pub boltzmann: f64,
    /// Bath atom mass (kg).
    pub mass_rb: f64,
    /// Probe atom mass (kg).
    pub mass_cs: f64,
    /// Reduced mass of the colliding pair (kg), derived.
    pub reduced_mass: f64,
    /// |g_F| of the probe ground manifold.
    pub g_cs: f64,
    /// |g_F| of the bath ground manifold.
    pub g_rb: f64,
    /// Total angular momentum of the probe manifold.
    pub f_cs: f64,
    /// Total angular momentum of the bath manifold.
    pub f_rb: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::new(
            BOHR_MAGNETON,
            BOLTZMANN,
            MASS_RB,
            MASS_CS,
            0.25,
            0.5,
            3.0,
            1.0,
        )
        .expect("default constants are consistent")
    }
}

impl PhysicalConstants {
    /// Builds a constant set, deriving the reduced mass and checking
    /// consistency: the bath g-factor must be exactly twice the probe's,
    /// and all dimensional quantities must be positive.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        bohr_magneton: f64,
        boltzmann: f64,
        mass_rb: f64,
        mass_cs: f64,
        g_cs: f64,
        g_rb: f64,
        f_cs: f64,
        f_rb: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("bohr_magneton", bohr_magneton),
            ("boltzmann", boltzmann),
            ("mass_rb", mass_rb),
            ("mass_cs", mass_cs),
            ("g_cs", g_cs),
            ("g_rb", g_rb),
            ("f_cs", f_cs),
            ("f_rb", f_rb),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Constants(format!(
                    "{name} must be finite and > 0, got {v}"
                )));
            }
        }
        if g_rb != 2.0 * g_cs {
            return Err(Error::Constants(format!(
                "g_rb must equal 2 * g_cs exactly (got g_rb = {g_rb}, g_cs = {g_cs})"
            )));
        }
        let reduced_mass = mass_rb * mass_cs / (mass_rb + mass_cs);
        debug_assert!(reduced_mass < mass_rb.min(mass_cs));
        Ok(Self {
            bohr_magneton,
            boltzmann,
            mass_rb,
            mass_cs,
            reduced_mass,
            g_cs,
            g_rb,
            f_cs,
            f_rb,
        })
    }

    /// Half the Zeeman energy quantum exchanged per spin-flip, mu_B |g_F| B,
    /// in joules. This is the kinetic-energy cost of one endoergic collision.
    pub fn zeeman_gap(&self, b_gauss: f64) -> Result<f64> {
        if !b_gauss.is_finite() || b_gauss < 0.0 {
            return Err(Error::Domain(format!(
                "magnetic field must be >= 0 gauss, got {b_gauss}"
            )));
        }
        Ok(self.bohr_magneton * self.g_cs * b_gauss * GAUSS_TO_TESLA)
    }

    /// Same gap expressed in kelvin equivalents.
    pub fn zeeman_gap_kelvin(&self, b_gauss: f64) -> Result<f64> {
        Ok(self.zeeman_gap(b_gauss)? / self.boltzmann)
    }

    /// Mean relative speed of the colliding pair at temperature `t` (m/s),
    /// sqrt(8 k_B T / (pi mu)).
    pub fn mean_rel_speed(&self, t: f64) -> Result<f64> {
        if !t.is_finite() || t <= 0.0 {
            return Err(Error::Domain(format!("temperature must be > 0 K, got {t}")));
        }
        Ok((8.0 * self.boltzmann * t / (std::f64::consts::PI * self.reduced_mass)).sqrt())
    }

    /// Maps a bath condition to (total energy, energy ratio) coordinates,
    /// with E_th = k_B T and E_Z = mu_B |g_F| B.
    pub fn to_energy_point(&self, p: BTPoint) -> Result<EnergyPoint> {
        if !p.temperature.is_finite() || p.temperature <= 0.0 {
            return Err(Error::Domain(format!(
                "temperature must be > 0 K, got {}",
                p.temperature
            )));
        }
        if !p.b_field.is_finite() || p.b_field <= 0.0 {
            return Err(Error::Domain(format!(
                "energy ratio is undefined at b_field = {} gauss; field must be > 0",
                p.b_field
            )));
        }
        let e_z = self.zeeman_gap_kelvin(p.b_field)?;
        let e_th = p.temperature;
        Ok(EnergyPoint {
            e_total: e_th + e_z,
            e_ratio: e_th / e_z,
        })
    }

    /// Inverse of [`to_energy_point`](Self::to_energy_point).
    pub fn from_energy_point(&self, e: EnergyPoint) -> Result<BTPoint> {
        if !e.e_total.is_finite() || e.e_total <= 0.0 {
            return Err(Error::Domain(format!(
                "total energy must be > 0 K, got {}",
                e.e_total
            )));
        }
        if !e.e_ratio.is_finite() || e.e_ratio <= 0.0 {
            return Err(Error::Domain(format!(
                "energy ratio must be > 0, got {}",
                e.e_ratio
            )));
        }
        let e_z = e.e_total / (1.0 + e.e_ratio);
        let e_th = e.e_total * e.e_ratio / (1.0 + e.e_ratio);
        let b_field = e_z * self.boltzmann / (self.bohr_magneton * self.g_cs) / GAUSS_TO_TESLA;
        Ok(BTPoint {
            b_field,
            temperature: e_th,
        })
    }
}

/// A bath condition as (magnetic field, temperature).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BTPoint {
    /// Magnetic field in gauss.
    pub b_field: f64,
    /// Temperature in kelvin.
    pub temperature: f64,
}

impl BTPoint {
    pub fn new(b_field: f64, temperature: f64) -> Self {
        Self {
            b_field,
            temperature,
        }
    }
}

/// The same condition as (total energy, thermal-to-Zeeman energy ratio).
/// `e_total` is in kelvin equivalents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyPoint {
    pub e_total: f64,
    pub e_ratio: f64,
}

impl EnergyPoint {
    pub fn new(e_total: f64, e_ratio: f64) -> Self {
        Self { e_total, e_ratio }
    }
}

/// The canonical reference condition used throughout: 43 mG, 435 nK.
pub const REFERENCE_POINT: BTPoint = BTPoint {
    b_field: 0.043,
    temperature: 435e-9,
};

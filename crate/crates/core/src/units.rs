//! Internal unit system and SI conversions.
//!
//! Internal units: energy in eV, length in nm, time in ħ/eV (≈ 0.658 fs) so
//! that ħ = 1. Masses are then carried in eV·(ħ/eV)²/nm², temperatures enter
//! as k_B·T in eV. Every conversion goes through the constants below.

/// ħ in eV·s (CODATA 2018).
pub const HBAR_EV_S: f64 = 6.582_119_569e-16;
/// k_B in eV/K (CODATA 2018).
pub const KB_EV_PER_K: f64 = 8.617_333_262e-5;
/// ħc in eV·nm.
pub const HBAR_C_EV_NM: f64 = 197.326_980_4;
/// Electron rest energy in eV.
pub const ELECTRON_MASS_EV: f64 = 0.510_998_95e6;
/// c²/e: energy equivalent of one kilogram, in eV.
pub const EV_PER_KG: f64 = 5.609_588_603_804_452e35;

/// One internal time unit (ħ/eV) expressed in femtoseconds.
pub const TIME_UNIT_FS: f64 = HBAR_EV_S * 1e15;

/// Conversion helpers between SI-flavoured inputs and internal units.
#[derive(Debug, Clone, Copy, Default)]
pub struct UnitSystem;

impl UnitSystem {
    /// Mass of one electron in internal units (≈ 13.12 eV⁻¹·nm⁻²).
    pub fn electron_mass() -> f64 {
        ELECTRON_MASS_EV / (HBAR_C_EV_NM * HBAR_C_EV_NM)
    }

    pub fn mass_from_electron_masses(m: f64) -> f64 {
        m * Self::electron_mass()
    }

    pub fn mass_to_electron_masses(m: f64) -> f64 {
        m / Self::electron_mass()
    }

    /// m/s → nm per internal time unit.
    pub fn speed_from_si(v: f64) -> f64 {
        v * 1e9 * HBAR_EV_S
    }

    pub fn speed_to_si(v: f64) -> f64 {
        v / (1e9 * HBAR_EV_S)
    }

    pub fn time_from_fs(t: f64) -> f64 {
        t / TIME_UNIT_FS
    }

    pub fn time_to_fs(t: f64) -> f64 {
        t * TIME_UNIT_FS
    }

    /// Rate in internal inverse time → fs⁻¹.
    pub fn rate_to_per_fs(r: f64) -> f64 {
        r / TIME_UNIT_FS
    }

    /// Kelvin → k_B·T in eV.
    pub fn thermal_energy(t_kelvin: f64) -> f64 {
        t_kelvin * KB_EV_PER_K
    }

    pub fn temperature_from_energy(e: f64) -> f64 {
        e / KB_EV_PER_K
    }

    /// Areal mass density kg/m² → internal mass per nm².
    pub fn areal_density_from_si(rho: f64) -> f64 {
        rho * EV_PER_KG / (HBAR_C_EV_NM * HBAR_C_EV_NM) * 1e-18
    }

    pub fn areal_density_to_si(rho: f64) -> f64 {
        rho / (EV_PER_KG / (HBAR_C_EV_NM * HBAR_C_EV_NM) * 1e-18)
    }

    /// ħ²/(2 m_e) in eV·nm², the free-electron kinetic prefactor.
    pub fn free_electron_kinetic() -> f64 {
        0.5 / Self::electron_mass()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_constants() {
        // ħ²/2m_e = 3.80998 eV·Å²
        assert!((UnitSystem::free_electron_kinetic() - 0.038_099_82).abs() < 1e-7);
        assert!((TIME_UNIT_FS - 0.658_211_956_9).abs() < 1e-12);
        // 4700 m/s ≈ 3.0936e-3 nm per ħ/eV
        assert!((UnitSystem::speed_from_si(4700.0) - 3.093_596e-3).abs() < 1e-8);
    }

    proptest! {
        #[test]
        fn round_trips(x in 1e-6f64..1e6) {
            let rel = |a: f64, b: f64| ((a - b) / b).abs();
            prop_assert!(rel(UnitSystem::speed_to_si(UnitSystem::speed_from_si(x)), x) < 1e-12);
            prop_assert!(rel(UnitSystem::time_to_fs(UnitSystem::time_from_fs(x)), x) < 1e-12);
            prop_assert!(rel(UnitSystem::mass_to_electron_masses(UnitSystem::mass_from_electron_masses(x)), x) < 1e-12);
            prop_assert!(rel(UnitSystem::temperature_from_energy(UnitSystem::thermal_energy(x)), x) < 1e-12);
            prop_assert!(rel(UnitSystem::areal_density_to_si(UnitSystem::areal_density_from_si(x)), x) < 1e-12);
        }
    }
}

//! Material records, derived Debye/Fermi quantities, lattice-disorder strength
//! and coupling-regime classification.
//!
//! Lattice constants are in nanometres. The tabulated copper value 0.36 is
//! only consistent with copper's Debye temperature (≈ 353 K) when read in nm,
//! so every preset uses that reading.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_with_breaks, QuadConfig};
use crate::units::UnitSystem;

/// Physical parameters of one material.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    pub name: String,
    /// Effective mass in electron masses.
    pub m_eff: f64,
    /// Longitudinal sound speed, m/s.
    pub v_s: f64,
    /// Lattice constant, nm.
    pub a: f64,
    /// Deformation-potential constant, eV. Zero switches the coupling off.
    pub e_d: f64,
    /// Bulk mass density, kg/m³.
    pub rho: f64,
}

/// Debye and Fermi quantities implied by a [`MaterialParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    /// Debye wavenumber, nm⁻¹.
    pub q_d: f64,
    /// Fermi wavenumber, nm⁻¹.
    pub k_f: f64,
    /// Debye temperature, K.
    pub t_d: f64,
    /// Fermi energy above the band bottom, eV.
    pub e_f: f64,
}

impl MaterialParams {
    pub fn copper() -> Self {
        Self { name: "copper".into(), m_eff: 1.0, v_s: 4700.0, a: 0.36, e_d: 10.0, rho: 8960.0 }
    }

    pub fn bi2212() -> Self {
        Self { name: "bi2212".into(), m_eff: 8.4, v_s: 2800.0, a: 0.54, e_d: 10.0, rho: 5200.0 }
    }

    /// Built-in registry lookup (case-insensitive).
    pub fn by_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "copper" | "cu" => Ok(Self::copper()),
            "bi2212" => Ok(Self::bi2212()),
            _ => Err(Error::UnknownMaterial(name.to_string())),
        }
    }

    pub fn registry() -> Vec<Self> {
        vec![Self::copper(), Self::bi2212()]
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: &str| Err(Error::InvalidMaterial { name: self.name.clone(), reason: reason.into() });
        for (label, v) in [("effective mass", self.m_eff), ("sound speed", self.v_s), ("lattice constant", self.a), ("density", self.rho)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(&format!("{label} must be positive, got {v}"));
            }
        }
        if !(self.e_d.is_finite() && self.e_d >= 0.0) {
            return bad(&format!("deformation constant must be non-negative, got {}", self.e_d));
        }
        Ok(())
    }

    /// Effective mass in internal units.
    pub fn mass(&self) -> f64 {
        UnitSystem::mass_from_electron_masses(self.m_eff)
    }

    /// Sound speed in nm per internal time unit.
    pub fn sound_speed(&self) -> f64 {
        UnitSystem::speed_from_si(self.v_s)
    }

    /// Areal density ρ·a of one atomic layer, internal units.
    pub fn areal_density(&self) -> f64 {
        UnitSystem::areal_density_from_si(self.rho * self.a * 1e-9)
    }

    /// Free-electron band energy ħ²k²/2m in eV.
    pub fn band_energy(&self, k: f64) -> f64 {
        k * k / (2.0 * self.mass())
    }
}

/// q_D = 2√π/a, k_F = q_D/2, T_D = ħ v_s q_D / k_B, E_F = ħ²k_F²/2m.
pub fn derive_parameters(mat: &MaterialParams) -> Result<DerivedParams> {
    mat.validate()?;
    let q_d = 2.0 * std::f64::consts::PI.sqrt() / mat.a;
    let k_f = q_d / 2.0;
    let t_d = UnitSystem::temperature_from_energy(q_d * mat.sound_speed());
    let e_f = mat.band_energy(k_f);
    Ok(DerivedParams { q_d, k_f, t_d, e_f })
}

/// Bose occupation 1/(e^x − 1) for x = ħω/k_BT, with the T = 0 limit.
pub fn bose(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        1.0 / x.exp_m1()
    }
}

/// ∫₀^{q_D} q² dq / (e^{ħ v_s q / k_B T} − 1), the thermal factor of ΔV_def².
pub fn disorder_integral(mat: &MaterialParams, t_kelvin: f64) -> Result<f64> {
    let d = derive_parameters(mat)?;
    if t_kelvin < 0.0 || !t_kelvin.is_finite() {
        return Err(Error::Config(format!("temperature must be non-negative, got {t_kelvin}")));
    }
    if t_kelvin == 0.0 {
        return Ok(0.0);
    }
    let kt = UnitSystem::thermal_energy(t_kelvin);
    let v = mat.sound_speed();
    let integrand = |q: f64| {
        if q == 0.0 {
            0.0
        } else {
            let x = v * q / kt;
            if x < 1e-8 {
                // q²/x · (1 − x/2) → q k_BT/(ħ v_s) as q → 0
                q * kt / v * (1.0 - 0.5 * x)
            } else {
                q * q * bose(x)
            }
        }
    };
    // Above ~40 k_BT/ħv_s the integrand is below e⁻⁴⁰ of its peak.
    let q_thermal = 40.0 * kt / v;
    let breaks: Vec<f64> = if q_thermal < d.q_d { vec![0.0, q_thermal, d.q_d] } else { vec![0.0, d.q_d] };
    let r = integrate_with_breaks(integrand, &breaks, QuadConfig::new(1e-10, 1e-12))?;
    Ok(r.value)
}

/// RMS deformation potential ΔV_def in eV:
/// ΔV² = 2 E_d² ħ / (π ρ v_s) ∫₀^{q_D} q² dq / (e^{ħ v_s q/k_BT} − 1), with ρ
/// the areal density of the simulated layer.
pub fn rms_deformation(mat: &MaterialParams, t_kelvin: f64) -> Result<f64> {
    let integral = disorder_integral(mat, t_kelvin)?;
    let pref = 2.0 * mat.e_d * mat.e_d / (std::f64::consts::PI * mat.areal_density() * mat.sound_speed());
    Ok((pref * integral).sqrt())
}

/// Fitted exponent p of ΔV_def² ∝ T^p over `[t_lo, t_hi]` (log-log least
/// squares on `samples` geometrically spaced temperatures).
pub fn disorder_scaling_exponent(mat: &MaterialParams, t_lo: f64, t_hi: f64, samples: usize) -> Result<f64> {
    if !(t_lo > 0.0 && t_hi > t_lo) || samples < 2 {
        return Err(Error::Config("need 0 < t_lo < t_hi and at least two samples".into()));
    }
    let mut pts = Vec::with_capacity(samples);
    for i in 0..samples {
        let t = t_lo * (t_hi / t_lo).powf(i as f64 / (samples - 1) as f64);
        let dv = rms_deformation(mat, t)?;
        pts.push((t.ln(), (dv * dv).ln()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CouplingRegime {
    Perturbative,
    Nonperturbative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingClass {
    /// K̄ = E_F / ΔV_def.
    pub kbar: f64,
    pub regime: CouplingRegime,
}

pub const DEFAULT_KBAR_THRESHOLD: f64 = 1.0;

/// Perturbative iff K̄ is strictly above `threshold`.
pub fn classify(kbar: f64, threshold: f64) -> CouplingRegime {
    if kbar > threshold {
        CouplingRegime::Perturbative
    } else {
        CouplingRegime::Nonperturbative
    }
}

pub fn coupling_class(mat: &MaterialParams, t_kelvin: f64, threshold: f64) -> Result<CouplingClass> {
    let d = derive_parameters(mat)?;
    let dv = rms_deformation(mat, t_kelvin)?;
    let kbar = if dv > 0.0 { d.e_f / dv } else { f64::INFINITY };
    Ok(CouplingClass { kbar, regime: classify(kbar, threshold) })
}

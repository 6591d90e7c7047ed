//! Momentum-relaxation rates from lowest-order perturbation theory with Fermi
//! statistics, for the full bath and for the mean-field deformation potential.
//!
//! With c± = q/2 ± m v_s the rate is
//!
//! 1/τ = β E_d²/(2π ρ v_s) Σ± ∫₀^{q_D} dq ∫_{|c±|}^∞ dk q² c± / (k² √(1 − c±²/k²)) W± f(ε)(1 − f(ε ∓ ω_q))
//!
//! with W₋ = N_q (absorption) and W₊ = N_q + 1 (emission), or W₊ = N_q for the
//! mean field. The numerator keeps its sign: for q < 2mv_s the absorption
//! term is negative. The substitution k = |c|·cosh u removes the inverse
//! square root at the lower limit and turns the k integrand into q² c W F / k.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::material::{bose, derive_parameters, MaterialParams};
use crate::quadrature::{integrate_with_breaks, QuadConfig};
use crate::units::UnitSystem;

/// ln(10¹²): the k integral stops where f(ε) < 1e-12.
const FERMI_TAIL: f64 = 27.631_021_115_928_547;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    Full,
    MeanField,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateResult {
    pub inv_tau_per_fs: f64,
    pub variant: Variant,
    pub temperature: f64,
    /// Accumulated quadrature error estimate, fs⁻¹.
    pub error_per_fs: f64,
}

/// Fermi–Dirac occupation with chemical potential E_F.
#[inline]
pub fn fermi(e: f64, e_f: f64, beta: f64) -> f64 {
    let x = (beta * (e - e_f)).clamp(-700.0, 700.0);
    1.0 / (x.exp() + 1.0)
}

/// Shared per-material quantities.
#[derive(Debug, Clone, Copy)]
struct Setup {
    m: f64,
    v: f64,
    q_d: f64,
    k_f: f64,
    e_f: f64,
    kt: f64,
    beta: f64,
    prefactor: f64,
}

impl Setup {
    fn new(mat: &MaterialParams, t_kelvin: f64) -> Result<Self> {
        if !(t_kelvin > 0.0) || !t_kelvin.is_finite() {
            return Err(Error::Config(format!("rates need T > 0, got {t_kelvin}")));
        }
        let d = derive_parameters(mat)?;
        let kt = UnitSystem::thermal_energy(t_kelvin);
        let v = mat.sound_speed();
        let beta = 1.0 / kt;
        let prefactor = beta * mat.e_d * mat.e_d / (2.0 * std::f64::consts::PI * mat.areal_density() * v);
        Ok(Self { m: mat.mass(), v, q_d: d.q_d, k_f: d.k_f, e_f: d.e_f, kt, beta, prefactor })
    }

    fn k_of_energy(&self, e: f64) -> Option<f64> {
        (e > 0.0).then(|| (2.0 * self.m * e).sqrt())
    }

    /// ∫ dk over k ≥ |c| of q² c W f(ε)(1 − f(ε + shift)) / (k² √(1 − c²/k²)),
    /// shift = +ω for absorption and −ω for emission.
    fn k_integral(&self, q: f64, c: f64, weight: f64, shift: f64, cfg: QuadConfig) -> Result<(f64, f64)> {
        let k_min = c.abs();
        if weight == 0.0 || k_min < 1e-300 {
            return Ok((0.0, 0.0));
        }
        let k_hi = (2.0 * self.m * (self.e_f + FERMI_TAIL * self.kt)).sqrt();
        if k_hi <= k_min {
            return Ok((0.0, 0.0));
        }
        let u_max = (k_hi / k_min).acosh();
        let mut breaks = vec![0.0, u_max];
        // Fermi edges at ε = E_F and ε = E_F − shift, each bracketed by a few
        // kT so that sharp low-temperature steps sit on panel boundaries.
        let mut features = Vec::new();
        for edge in [self.e_f, self.e_f - shift] {
            for j in [-20.0, -5.0, -1.0, 0.0, 1.0, 5.0, 20.0] {
                features.push(self.k_of_energy(edge + j * self.kt));
            }
        }
        for k in features.into_iter().flatten() {
            if k > k_min {
                let u = (k / k_min).acosh();
                if u > 0.0 && u < u_max {
                    breaks.push(u);
                }
            }
        }
        breaks.sort_by(|a, b| a.partial_cmp(b).expect("finite breaks"));
        breaks.dedup();
        let (m, e_f, beta) = (self.m, self.e_f, self.beta);
        let integrand = |u: f64| {
            let k = k_min * u.cosh();
            let e = k * k / (2.0 * m);
            q * q * c / k * weight * fermi(e, e_f, beta) * (1.0 - fermi(e + shift, e_f, beta))
        };
        // Terms suppressed by e^{-βω} need an absolute floor: measure it against
        // the same term with unit weight and an order-one thermal window.
        let floor = cfg.rel_tol * 1e-3 * q * q * k_min * m * self.kt / (self.k_f * self.k_f);
        let cfg = QuadConfig { abs_tol: cfg.abs_tol.max(floor), ..cfg };
        let r = integrate_with_breaks(integrand, &breaks, cfg)?;
        Ok((r.value, r.abs_error))
    }

    /// q-resolved integrand of the absorption and emission terms.
    fn q_terms(&self, q: f64, variant: Variant, cfg: QuadConfig) -> Result<[(f64, f64); 2]> {
        if q <= 0.0 {
            return Ok([(0.0, 0.0); 2]);
        }
        let omega = self.v * q;
        let n = bose(omega / self.kt);
        let mv = self.m * self.v;
        let emit_weight = match variant {
            Variant::Full => n + 1.0,
            Variant::MeanField => n,
        };
        let abs = self.k_integral(q, q / 2.0 - mv, n, omega, cfg)?;
        let emi = self.k_integral(q, q / 2.0 + mv, emit_weight, -omega, cfg)?;
        Ok([abs, emi])
    }
}

/// Inner integrand at one q, in internal units before the outer prefactor;
/// exposed for cross-checks against independent evaluations.
pub fn q_integrand(mat: &MaterialParams, t_kelvin: f64, q: f64, variant: Variant) -> Result<[f64; 2]> {
    let s = Setup::new(mat, t_kelvin)?;
    let r = s.q_terms(q, variant, QuadConfig::new(0.0, 1e-11))?;
    Ok([r[0].0, r[1].0])
}

/// Both rates with explicit tolerances. The outer q integral uses
/// `outer`, every inner k integral `inner`.
pub fn rates_with(mat: &MaterialParams, t_kelvin: f64, outer: QuadConfig, inner: QuadConfig) -> Result<(RateResult, RateResult)> {
    let s = Setup::new(mat, t_kelvin)?;
    let mut breaks = vec![0.0, s.q_d];
    let q_turn = 2.0 * s.m * s.v;
    if q_turn > 0.0 && q_turn < s.q_d {
        breaks.insert(1, q_turn);
    }
    let thermal_q = 40.0 * s.kt / s.v;
    if thermal_q < s.q_d && thermal_q > breaks[breaks.len() - 2] {
        let at = breaks.len() - 1;
        breaks.insert(at, thermal_q);
    }
    let mut inner_err = 0.0f64;
    let mut absorption = |q: f64| match s.q_terms(q, Variant::MeanField, inner) {
        Ok(r) => {
            inner_err += (r[0].1 + r[1].1) * 1e-3;
            r[0].0
        }
        Err(_) => f64::NAN,
    };
    let a = integrate_with_breaks(&mut absorption, &breaks, outer)?;
    let emission = |variant: Variant| {
        integrate_with_breaks(
            |q: f64| match s.q_terms(q, variant, inner) {
                Ok(r) => r[1].0,
                Err(_) => f64::NAN,
            },
            &breaks,
            outer,
        )
    };
    let e_full = emission(Variant::Full)?;
    let e_mf = emission(Variant::MeanField)?;
    for v in [a.value, e_full.value, e_mf.value] {
        if !v.is_finite() {
            return Err(Error::Quadrature { error: f64::NAN, worst_lo: 0.0, worst_hi: s.q_d });
        }
    }
    let conv = |x: f64| UnitSystem::rate_to_per_fs(s.prefactor * x);
    let full = RateResult {
        inv_tau_per_fs: conv(a.value + e_full.value),
        variant: Variant::Full,
        temperature: t_kelvin,
        error_per_fs: conv(a.abs_error + e_full.abs_error + inner_err).abs(),
    };
    let mf = RateResult {
        inv_tau_per_fs: conv(a.value + e_mf.value),
        variant: Variant::MeanField,
        temperature: t_kelvin,
        error_per_fs: conv(a.abs_error + e_mf.abs_error + inner_err).abs(),
    };
    Ok((full, mf))
}

fn default_tolerances() -> (QuadConfig, QuadConfig) {
    (QuadConfig::new(0.0, 1e-9), QuadConfig::new(0.0, 1e-10))
}

pub fn rates(mat: &MaterialParams, t_kelvin: f64) -> Result<(RateResult, RateResult)> {
    let (o, i) = default_tolerances();
    rates_with(mat, t_kelvin, o, i)
}

pub fn rate_full(mat: &MaterialParams, t_kelvin: f64) -> Result<RateResult> {
    Ok(rates(mat, t_kelvin)?.0)
}

pub fn rate_meanfield(mat: &MaterialParams, t_kelvin: f64) -> Result<RateResult> {
    Ok(rates(mat, t_kelvin)?.1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub temperature: f64,
    pub inv_tau_full_per_fs: f64,
    pub inv_tau_mf_per_fs: f64,
    /// R = τ_full/τ_mf = inv_tau_mf / inv_tau_full.
    pub ratio: f64,
    pub error_per_fs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSweep {
    pub rows: Vec<SweepRow>,
    /// Full rate nondecreasing in T over the sorted rows.
    pub full_monotone: bool,
    /// R nondecreasing over the upper half of the sorted temperatures.
    pub ratio_monotone_high: bool,
    pub full_dominates: bool,
}

impl RateSweep {
    pub fn to_csv(&self, config_hash: &str) -> String {
        let mut s = format!("# config_hash={config_hash}\nT_K,inv_tau_full_per_fs,inv_tau_mf_per_fs,R,err_est\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{:.6},{:.10e},{:.10e},{:.10e},{:.3e}\n",
                r.temperature, r.inv_tau_full_per_fs, r.inv_tau_mf_per_fs, r.ratio, r.error_per_fs
            ));
        }
        s
    }
}

/// Rates over `temperatures`, evaluated in parallel and returned in input
/// order, with monotonicity diagnostics computed on the sorted table.
pub fn rate_sweep(mat: &MaterialParams, temperatures: &[f64]) -> Result<RateSweep> {
    if temperatures.is_empty() {
        return Err(Error::Config("temperature list is empty".into()));
    }
    let rows = temperatures
        .par_iter()
        .map(|&t| {
            let (f, m) = rates(mat, t)?;
            Ok(SweepRow {
                temperature: t,
                inv_tau_full_per_fs: f.inv_tau_per_fs,
                inv_tau_mf_per_fs: m.inv_tau_per_fs,
                ratio: m.inv_tau_per_fs / f.inv_tau_per_fs,
                error_per_fs: f.error_per_fs.max(m.error_per_fs),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sorted = rows.clone();
    sorted.sort_by(|a, b| a.temperature.partial_cmp(&b.temperature).expect("finite temperatures"));
    let full_monotone = sorted.windows(2).all(|w| w[1].inv_tau_full_per_fs >= w[0].inv_tau_full_per_fs);
    let high = &sorted[sorted.len() / 2..];
    let ratio_monotone_high = high.windows(2).all(|w| w[1].ratio >= w[0].ratio);
    let full_dominates = rows.iter().all(|r| r.inv_tau_full_per_fs >= r.inv_tau_mf_per_fs);
    Ok(RateSweep { rows, full_monotone, ratio_monotone_high, full_dominates })
}
